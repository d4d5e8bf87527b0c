#include "lyromel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "lyromel/rng.hpp"
#include "lyromel/tuning.hpp"

namespace lyromel {

Matrix flatten_sequences(std::span<const Sequence> sequences, bool scaled) {
    if (sequences.empty()) throw std::invalid_argument("flatten_sequences: empty set");
    const std::size_t len = sequences.front().size();
    Matrix out(sequences.size(), 3 * len);
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        if (sequences[i].size() != len) throw ShapeError("flatten_sequences: ragged sequence set");
        double* row = out.row(i);
        for (std::size_t t = 0; t < len; ++t) {
            const auto& n = sequences[i][t];
            row[3 * t + 0] = scaled ? n.midi / kMidiScale : n.midi;
            row[3 * t + 1] = scaled ? n.duration / kDurationScale : n.duration;
            row[3 * t + 2] = scaled ? n.rest / kRestScale : n.rest;
        }
    }
    return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return acc;
}

void check_sets(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols()) throw std::invalid_argument("mmd: dimension mismatch");
    if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("mmd: empty sample set");
}

// Mean cross-set Euclidean distance; per-i partials are reduced in index
// order so the parallel and serial paths agree bitwise.
double mean_cross_distance(const Matrix& x, const Matrix& y, bool parallel) {
    const std::size_t m = x.rows(), n = y.rows(), dim = x.cols();
    std::vector<double> partial(m, 0.0);
    const auto mi = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(effective_threads()) if (parallel)
    for (std::int64_t i = 0; i < mi; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += std::sqrt(sq_dist(x.row(i), y.row(j), dim));
        partial[i] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total / (static_cast<double>(m) * static_cast<double>(n));
}

double self_term(const Matrix& x, double inv_two_sigma2, bool parallel) {
    const std::size_t m = x.rows(), dim = x.cols();
    if (m < 2) return 0.0;  // empty sum for a singleton set
    std::vector<double> partial(m, 0.0);
    const auto mi = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(effective_threads()) if (parallel)
    for (std::int64_t i = 0; i < mi; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (static_cast<std::size_t>(i) == j) continue;
            acc += std::exp(-sq_dist(x.row(i), x.row(j), dim) * inv_two_sigma2);
        }
        partial[i] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total / (static_cast<double>(m) * static_cast<double>(m - 1));
}

double cross_term(const Matrix& x, const Matrix& y, double inv_two_sigma2, bool parallel) {
    const std::size_t m = x.rows(), n = y.rows(), dim = x.cols();
    std::vector<double> partial(m, 0.0);
    const auto mi = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(effective_threads()) if (parallel)
    for (std::int64_t i = 0; i < mi; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += std::exp(-sq_dist(x.row(i), y.row(j), dim) * inv_two_sigma2);
        }
        partial[i] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return 2.0 * total / (static_cast<double>(m) * static_cast<double>(n));
}

double mmd2_impl(const Matrix& x, const Matrix& y, double sigma, bool parallel) {
    check_sets(x, y);
    if (!(sigma > 0.0)) throw std::invalid_argument("mmd: sigma must be positive");
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    return self_term(x, inv_two_sigma2, parallel) + self_term(y, inv_two_sigma2, parallel) -
           cross_term(x, y, inv_two_sigma2, parallel);
}

double bandwidth_impl(const Matrix& x, const Matrix& y, bool parallel) {
    check_sets(x, y);
    const double mean_dist = mean_cross_distance(x, y, parallel);
    if (mean_dist <= 0.0) return 1.0;  // all points identical
    return std::sqrt(mean_dist / 2.0);
}

} // namespace

double median_bandwidth(const Matrix& x, const Matrix& y) { return bandwidth_impl(x, y, true); }

double mmd2_unbiased(const Matrix& x, const Matrix& y, double sigma) {
    return mmd2_impl(x, y, sigma, true);
}

double mmd2_unbiased(const Matrix& x, const Matrix& y) {
    return mmd2_impl(x, y, median_bandwidth(x, y), true);
}

namespace serial {

double median_bandwidth(const Matrix& x, const Matrix& y) { return bandwidth_impl(x, y, false); }

double mmd2_unbiased(const Matrix& x, const Matrix& y, double sigma) {
    return mmd2_impl(x, y, sigma, false);
}

} // namespace serial

// ---- In-song metrics ---------------------------------------------------------

namespace {

double ngram_repetitions(const Sequence& seq, std::size_t n) {
    if (seq.size() < n) return 0.0;
    std::set<std::vector<int>> distinct;
    const std::size_t total = seq.size() - n + 1;
    for (std::size_t i = 0; i < total; ++i) {
        std::vector<int> gram(n);
        for (std::size_t k = 0; k < n; ++k) gram[k] = seq[i + k].midi;
        distinct.insert(std::move(gram));
    }
    return static_cast<double>(total - distinct.size());
}

} // namespace

MetricsRow music_metrics(std::span<const Sequence> sequences) {
    if (sequences.empty()) throw std::invalid_argument("music_metrics: empty input");
    MetricsRow avg;
    for (const auto& seq : sequences) {
        if (seq.empty()) throw std::invalid_argument("music_metrics: empty sequence");
        int lo = seq.front().midi, hi = seq.front().midi;
        std::set<int> unique;
        double rest_sum = 0, length = 0;
        std::size_t no_rest = 0;
        for (const auto& note : seq) {
            lo = std::min(lo, note.midi);
            hi = std::max(hi, note.midi);
            unique.insert(note.midi);
            rest_sum += note.rest;
            length += note.duration + note.rest;
            if (note.rest == 0.0) ++no_rest;
        }
        avg.midi_span += hi - lo;
        avg.three_gram_reps += ngram_repetitions(seq, 3);
        avg.two_gram_reps += ngram_repetitions(seq, 2);
        avg.unique_midi += static_cast<double>(unique.size());
        avg.notes_without_rest += static_cast<double>(no_rest);
        avg.avg_rest += rest_sum / static_cast<double>(seq.size());
        avg.song_length += length;
    }
    const auto n = static_cast<double>(sequences.size());
    avg.midi_span /= n;
    avg.three_gram_reps /= n;
    avg.two_gram_reps /= n;
    avg.unique_midi /= n;
    avg.notes_without_rest /= n;
    avg.avg_rest /= n;
    avg.song_length /= n;
    return avg;
}

std::map<int, double> transition_distribution(std::span<const Sequence> sequences) {
    std::map<int, double> hist;
    std::size_t total = 0;
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            hist[seq[i + 1].midi - seq[i].midi] += 1.0;
            ++total;
        }
    }
    for (auto& [_, v] : hist) v /= static_cast<double>(total);
    return hist;
}

// ---- Baseline ----------------------------------------------------------------

namespace {

template <typename K>
K sample_from_histogram(const std::map<K, double>& hist, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& [value, p] : hist) {
        acc += p;
        if (u < acc) return value;
    }
    return hist.rbegin()->first;
}

} // namespace

std::vector<Sequence> sample_baseline(const AttributeHistograms& hist, std::size_t n,
                                      std::uint64_t seed) {
    if (hist.midi.empty() || hist.duration.empty() || hist.rest.empty()) {
        throw std::invalid_argument("sample_baseline: empty histograms");
    }
    Rng rng(seed);
    std::vector<Sequence> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sequence seq(kSequenceLength);
        for (auto& note : seq) {
            note.midi = std::clamp(sample_from_histogram(hist.midi, rng), 60, 80);
            note.duration = sample_from_histogram(hist.duration, rng);
            note.rest = sample_from_histogram(hist.rest, rng);
        }
        out.push_back(constrain_to_scale(seq, detect_scale(seq)));
    }
    return out;
}

// ---- Conditioning-distance experiment ------------------------------------------

namespace {

double frob_distance(const Matrix& a, const Matrix& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc) / static_cast<double>(a.size());
}

// ‖permuted(D) − G‖_F/(NM) without materializing the permutation.
double shuffled_distance(const Matrix& d, const Matrix& g,
                         const std::vector<std::size_t>* row_perm,
                         const std::vector<std::size_t>* col_perm) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double* drow = d.row(row_perm ? (*row_perm)[i] : i);
        const double* grow = g.row(i);
        for (std::size_t j = 0; j < d.cols(); ++j) {
            const double diff = drow[col_perm ? (*col_perm)[j] : j] - grow[j];
            acc += diff * diff;
        }
    }
    return std::sqrt(acc) / static_cast<double>(d.size());
}

ShuffleDistribution summarize(std::vector<double> samples) {
    ShuffleDistribution dist;
    double sum = 0.0;
    for (double s : samples) sum += s;
    dist.mean = sum / static_cast<double>(samples.size());
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };
    dist.q1 = quantile(0.25);
    dist.median = quantile(0.5);
    dist.q3 = quantile(0.75);
    dist.samples = std::move(samples);
    return dist;
}

} // namespace

ConditioningResult conditioning_distance(const Matrix& d_matrix, const Matrix& g_matrix,
                                         std::size_t shuffles, std::uint64_t seed) {
    if (!d_matrix.same_shape(g_matrix)) {
        throw std::invalid_argument("conditioning_distance: shape mismatch");
    }
    if (d_matrix.rows() == 0 || shuffles == 0) {
        throw std::invalid_argument("conditioning_distance: empty input");
    }

    ConditioningResult result;
    result.d = frob_distance(d_matrix, g_matrix);

    std::vector<double> rs(shuffles), rn(shuffles), rns(shuffles);
    const auto count = static_cast<std::int64_t>(shuffles);
    // Per-shuffle seeds keep the experiment reproducible under parallelism.
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (std::int64_t s = 0; s < count; ++s) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        const auto rows = rng.permutation(d_matrix.rows());
        const auto cols = rng.permutation(d_matrix.cols());
        const auto rows2 = rng.permutation(d_matrix.rows());
        rs[s] = shuffled_distance(d_matrix, g_matrix, &rows, nullptr);
        rn[s] = shuffled_distance(d_matrix, g_matrix, nullptr, &cols);
        rns[s] = shuffled_distance(d_matrix, g_matrix, &rows2, &cols);
    }
    result.rs = summarize(std::move(rs));
    result.rn = summarize(std::move(rn));
    result.rns = summarize(std::move(rns));
    return result;
}

} // namespace lyromel
