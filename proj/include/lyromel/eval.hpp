#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "lyromel/dataset.hpp"
#include "lyromel/matrix.hpp"

namespace lyromel {

using Sequence = std::vector<NoteTriplet>;

// Per-attribute scaling shared by the discriminator input and the MMD sample
// vectors, so no attribute dominates.
constexpr double kMidiScale = 127.0;
constexpr double kDurationScale = 32.0;
constexpr double kRestScale = 32.0;

// Rows are points. Flattens 20-note sequences to 60-dim sample vectors.
Matrix flatten_sequences(std::span<const Sequence> sequences, bool scaled = true);

// σ such that mean-cross-distance / (2σ²) = 1; identical point sets fall back
// to σ = 1.
double median_bandwidth(const Matrix& x, const Matrix& y);

// Unbiased MMD² estimate with Gaussian kernel exp(-‖x-x'‖²/(2σ²)). Singleton
// sets contribute an empty self-term; empty sets are invalid.
double mmd2_unbiased(const Matrix& x, const Matrix& y, double sigma);
double mmd2_unbiased(const Matrix& x, const Matrix& y);  // bandwidth from median_bandwidth

namespace serial {
double median_bandwidth(const Matrix& x, const Matrix& y);
double mmd2_unbiased(const Matrix& x, const Matrix& y, double sigma);
} // namespace serial

// The seven in-song metrics, each averaged over the set.
struct MetricsRow {
    double midi_span = 0;
    double three_gram_reps = 0;
    double two_gram_reps = 0;
    double unique_midi = 0;
    double notes_without_rest = 0;
    double avg_rest = 0;
    double song_length = 0;
};

MetricsRow music_metrics(std::span<const Sequence> sequences);

// Normalized histogram of consecutive MIDI-number deltas.
std::map<int, double> transition_distribution(std::span<const Sequence> sequences);

// Attribute-wise independent sampling from the dataset histograms; MIDI
// numbers clamp to {60,…,80} and sequences are then scale-constrained.
std::vector<Sequence> sample_baseline(const AttributeHistograms& hist, std::size_t n,
                                      std::uint64_t seed);

struct ShuffleDistribution {
    double mean = 0, median = 0, q1 = 0, q3 = 0;
    std::vector<double> samples;
};

struct ConditioningResult {
    double d = 0;               // ‖D−G‖_F/(N·M)
    ShuffleDistribution rs;     // rows of D shuffled (random songs)
    ShuffleDistribution rn;     // columns of D shuffled (random notes)
    ShuffleDistribution rns;    // both
};

// D row i holds the reference attribute sequence whose syllables produced
// G row i. Each distribution is estimated from `shuffles` independent draws.
ConditioningResult conditioning_distance(const Matrix& d_matrix, const Matrix& g_matrix,
                                         std::size_t shuffles, std::uint64_t seed);

} // namespace lyromel
