#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lyromel/dataset.hpp"

namespace lyromel {

constexpr std::size_t kTokenDim = 10;
constexpr std::size_t kEmbeddingDim = 2 * kTokenDim;  // word part ∥ syllable part

// Words and their syllables, sentence by sentence (context windows do not
// cross sentence boundaries). Text is case-folded and punctuation-stripped.
struct TokenizedSentence {
    std::vector<SyllablePair> pairs;
};

std::vector<TokenizedSentence> tokenize(std::string_view text);

// Dictionary of irregular words plus a vowel-group heuristic fallback.
// Concatenating the result always spells the word.
std::vector<std::string> syllabify(const std::string& word);

struct EmbeddingTable {
    std::size_t dimension = kTokenDim;
    std::map<std::string, std::vector<double>> vocab;
};

struct SkipgramConfig {
    std::size_t dim = kTokenDim;
    std::size_t window = 7;       // full span of adjacent tokens (center ± 3)
    double neg_alpha = 0.75;      // negative-sampling distribution exponent
    double lr0 = 0.03;
    double lr_min = 0.0007;
    double lr_decay = 0.9;        // per-epoch factor; trains until lr < lr_min
    std::size_t negatives = 5;
    std::uint64_t seed = 1;
};

// Skip-gram with negative sampling, trained as a logistic regression with
// SGD. Optionally reports the mean positive-pair loss per epoch.
EmbeddingTable train_skipgram(std::span<const std::vector<std::string>> sentences,
                              const SkipgramConfig& config,
                              std::vector<double>* epoch_losses = nullptr);

// y = word vector ∥ syllable vector; unknown tokens map to a zero half.
std::vector<double> embed(const std::string& word, const std::string& syllable,
                          const EmbeddingTable& words, const EmbeddingTable& syllables);

// Text format: one line per token — token then `dimension` reals.
void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

} // namespace lyromel
