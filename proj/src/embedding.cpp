#include "lyromel/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lyromel/matrix.hpp"
#include "lyromel/nn.hpp"

namespace lyromel {

// ---- Tokenizer ------------------------------------------------------------------

namespace {

bool vowel_letter(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// y counts as a vowel when it is not adjacent to one ("rhythm", "my").
bool is_vowel(const std::string& w, std::size_t i) {
    if (vowel_letter(w[i])) return true;
    if (w[i] != 'y') return false;
    const bool prev_v = i > 0 && vowel_letter(w[i - 1]);
    const bool next_v = i + 1 < w.size() && vowel_letter(w[i + 1]);
    return !prev_v && !next_v;
}

bool is_digraph(char a, char b) {
    static constexpr const char* kDigraphs[] = {"ch", "sh", "th", "ph", "wh", "gh", "ck", "qu"};
    for (const char* d : kDigraphs) {
        if (d[0] == a && d[1] == b) return true;
    }
    return false;
}

// Irregular words the heuristic gets wrong.
const std::unordered_map<std::string, std::vector<std::string>>& syllable_exceptions() {
    static const std::unordered_map<std::string, std::vector<std::string>> map = {
        {"maybe", {"may", "be"}},     {"baby", {"ba", "by"}},
        {"body", {"bod", "y"}},       {"anyone", {"an", "y", "one"}},
        {"everyone", {"ev", "ery", "one"}}, {"every", {"ev", "ery"}},
        {"everything", {"ev", "ery", "thing"}}, {"somebody", {"some", "bod", "y"}},
        {"goodbye", {"good", "bye"}}, {"beautiful", {"beau", "ti", "ful"}},
        {"ocean", {"o", "cean"}},     {"desire", {"de", "sire"}},
        {"being", {"be", "ing"}},     {"seeing", {"see", "ing"}},
        {"doing", {"do", "ing"}},     {"going", {"go", "ing"}},
        {"dying", {"dy", "ing"}},     {"trying", {"try", "ing"}},
        {"crying", {"cry", "ing"}},   {"flying", {"fly", "ing"}},
        {"lying", {"ly", "ing"}},     {"saying", {"say", "ing"}},
        {"playing", {"play", "ing"}}, {"staying", {"stay", "ing"}},
        {"praying", {"pray", "ing"}}, {"idea", {"i", "de", "a"}},
        {"area", {"ar", "e", "a"}},   {"real", {"re", "al"}},
        {"really", {"re", "al", "ly"}}, {"create", {"cre", "ate"}},
        {"quiet", {"qui", "et"}},     {"diamond", {"dia", "mond"}},
        {"violin", {"vi", "o", "lin"}}, {"radio", {"ra", "di", "o"}},
        {"piano", {"pi", "an", "o"}},
    };
    return map;
}

} // namespace

std::vector<std::string> syllabify(const std::string& word) {
    if (word.empty()) return {};
    if (auto it = syllable_exceptions().find(word); it != syllable_exceptions().end()) {
        return it->second;
    }

    const std::size_t n = word.size();
    // Vowel groups as [start, end) ranges.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < n;) {
        if (std::isalpha(static_cast<unsigned char>(word[i])) && is_vowel(word, i)) {
            std::size_t j = i + 1;
            while (j < n && std::isalpha(static_cast<unsigned char>(word[j])) && is_vowel(word, j)) ++j;
            groups.emplace_back(i, j);
            i = j;
        } else {
            ++i;
        }
    }
    if (groups.size() <= 1) return {word};

    const bool ends_cons_le =
        n >= 3 && word[n - 1] == 'e' && word[n - 2] == 'l' && !is_vowel(word, n - 3);

    // Final lone silent 'e' ("love", "time") does not start a syllable,
    // except the consonant+"le" pattern ("ta-ble").
    const std::size_t last_start = groups.back().first;
    if (!ends_cons_le && last_start == n - 1 && word[last_start] == 'e' &&
        !is_vowel(word, last_start - 1)) {
        groups.pop_back();
        if (groups.size() == 1) return {word};
    }

    std::vector<std::size_t> boundaries;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
        const std::size_t prev_end = groups[g].second;     // one past prev group
        const std::size_t next_start = groups[g + 1].first;
        const std::size_t cons = next_start - prev_end;    // >= 1: groups are maximal runs
        if (g + 2 == groups.size() && ends_cons_le) {
            boundaries.push_back(n - 3);  // "peo-ple", "ta-ble"
        } else if (cons == 1) {
            boundaries.push_back(prev_end);  // V-CV: "mu-sic"
        } else if (cons == 2 && is_digraph(word[prev_end], word[prev_end + 1])) {
            boundaries.push_back(prev_end);  // "tea-cher"
        } else {
            boundaries.push_back(prev_end + 1);  // VC-CV: "lis-ten"
        }
    }

    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t b : boundaries) {
        if (b > start && b < n) {
            out.push_back(word.substr(start, b - start));
            start = b;
        }
    }
    out.push_back(word.substr(start));
    return out;
}

std::vector<TokenizedSentence> tokenize(std::string_view text) {
    std::vector<TokenizedSentence> sentences;
    TokenizedSentence current;
    std::string word;

    auto flush_word = [&] {
        if (word.empty()) return;
        while (!word.empty() && word.back() == '\'') word.pop_back();
        std::size_t lead = 0;
        while (lead < word.size() && word[lead] == '\'') ++lead;
        word.erase(0, lead);
        if (!word.empty()) {
            for (const auto& syll : syllabify(word)) current.pairs.push_back({word, syll});
        }
        word.clear();
    };
    auto flush_sentence = [&] {
        flush_word();
        if (!current.pairs.empty()) {
            sentences.push_back(std::move(current));
            current = {};
        }
    };

    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u)) {
            word.push_back(static_cast<char>(std::tolower(u)));
        } else if (c == '\'' && !word.empty()) {
            word.push_back(c);
        } else if (c == '.' || c == '!' || c == '?' || c == ';' || c == '\n') {
            flush_sentence();
        } else {
            flush_word();
        }
    }
    flush_sentence();
    return sentences;
}

// ---- Skip-gram --------------------------------------------------------------------

EmbeddingTable train_skipgram(std::span<const std::vector<std::string>> sentences,
                              const SkipgramConfig& config,
                              std::vector<double>* epoch_losses) {
    std::unordered_map<std::string, std::size_t> ids;
    std::vector<std::string> names;
    std::vector<double> counts;
    std::vector<std::vector<std::size_t>> corpus;
    for (const auto& sentence : sentences) {
        std::vector<std::size_t> row;
        for (const auto& token : sentence) {
            auto [it, inserted] = ids.emplace(token, names.size());
            if (inserted) {
                names.push_back(token);
                counts.push_back(0.0);
            }
            counts[it->second] += 1.0;
            row.push_back(it->second);
        }
        if (!row.empty()) corpus.push_back(std::move(row));
    }
    const std::size_t vocab = names.size();
    if (vocab < 2) throw std::invalid_argument("train_skipgram: need at least 2 distinct tokens");

    // Negative-sampling distribution ∝ count^α, as a cumulative table.
    std::vector<double> cumulative(vocab);
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) {
        acc += std::pow(counts[i], config.neg_alpha);
        cumulative[i] = acc;
    }

    Rng rng(config.seed);
    const std::size_t dim = config.dim;
    Matrix in_vecs(vocab, dim), out_vecs(vocab, dim);
    const double span = 0.5 / static_cast<double>(dim);
    for (std::size_t i = 0; i < in_vecs.size(); ++i) in_vecs.data()[i] = rng.uniform(-span, span);
    // output vectors start at zero, as in the reference word2vec formulation

    auto sample_negative = [&] {
        const double u = rng.uniform() * acc;
        return static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    };

    const auto half = static_cast<std::ptrdiff_t>(config.window / 2);
    std::vector<double> in_update(dim);

    if (epoch_losses) epoch_losses->clear();
    for (std::size_t epoch = 0;; ++epoch) {
        const double lr = config.lr0 * std::pow(config.lr_decay, static_cast<double>(epoch));
        if (lr < config.lr_min) break;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;

        for (const auto& row : corpus) {
            const auto len = static_cast<std::ptrdiff_t>(row.size());
            for (std::ptrdiff_t center = 0; center < len; ++center) {
                const std::size_t center_id = row[center];
                double* v = in_vecs.row(center_id);
                for (std::ptrdiff_t off = -half; off <= half; ++off) {
                    const std::ptrdiff_t ctx = center + off;
                    if (off == 0 || ctx < 0 || ctx >= len) continue;
                    const std::size_t target = row[ctx];
                    std::fill(in_update.begin(), in_update.end(), 0.0);

                    for (std::size_t k = 0; k <= config.negatives; ++k) {
                        std::size_t out_id;
                        double label;
                        if (k == 0) {
                            out_id = target;
                            label = 1.0;
                        } else {
                            out_id = sample_negative();
                            if (out_id == target) continue;
                            label = 0.0;
                        }
                        double* u = out_vecs.row(out_id);
                        double dot = 0.0;
                        for (std::size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
                        const double s = sigmoid(dot);
                        const double g = (s - label) * lr;
                        for (std::size_t d = 0; d < dim; ++d) {
                            in_update[d] += g * u[d];
                            u[d] -= g * v[d];
                        }
                        loss_sum += label == 1.0 ? -std::log(std::max(s, 1e-12))
                                                 : -std::log(std::max(1.0 - s, 1e-12));
                    }
                    for (std::size_t d = 0; d < dim; ++d) v[d] -= in_update[d];
                    ++loss_count;
                }
            }
        }
        if (epoch_losses) {
            epoch_losses->push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
        }
    }

    EmbeddingTable table;
    table.dimension = dim;
    for (std::size_t i = 0; i < vocab; ++i) {
        table.vocab[names[i]] = std::vector<double>(in_vecs.row(i), in_vecs.row(i) + dim);
    }
    return table;
}

std::vector<double> embed(const std::string& word, const std::string& syllable,
                          const EmbeddingTable& words, const EmbeddingTable& syllables) {
    if (words.dimension != kTokenDim || syllables.dimension != kTokenDim) {
        throw ShapeError("embed: tables must be 10-dimensional");
    }
    std::vector<double> out(kEmbeddingDim, 0.0);
    if (auto it = words.vocab.find(word); it != words.vocab.end()) {
        std::copy(it->second.begin(), it->second.end(), out.begin());
    }
    if (auto it = syllables.vocab.find(syllable); it != syllables.vocab.end()) {
        std::copy(it->second.begin(), it->second.end(), out.begin() + kTokenDim);
    }
    return out;
}

void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    char buf[32];
    for (const auto& [token, vec] : table.vocab) {
        os << token;
        for (double x : vec) {
            std::snprintf(buf, sizeof buf, "%.17g", x);
            os << ' ' << buf;
        }
        os << '\n';
    }
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vec;
        double x;
        while (ss >> x) vec.push_back(x);
        if (vec.size() != table.dimension) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(table.dimension) + " values");
        }
        table.vocab[token] = std::move(vec);
    }
    return table;
}

} // namespace lyromel
