#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lyromel/dataset.hpp"
#include "lyromel/embedding.hpp"
#include "lyromel/eval.hpp"
#include "lyromel/nn.hpp"
#include "lyromel/tuning.hpp"

namespace lyromel {

// Network shapes default to the published configuration: 400-wide layers, a
// 30-dim uniform noise vector and a 20-dim syllable embedding per step.
struct GanConfig {
    std::size_t noise_dim = 30;
    std::size_t embed_dim = kEmbeddingDim;
    std::size_t seq_len = kSequenceLength;
    std::size_t fc_width = 400;
    std::size_t hidden = 400;
    // Feed the discriminator midi/127, dur/32, rest/32 instead of raw ranges;
    // generator outputs are unscaled on the way out. Deviation knob.
    bool scale_attributes = true;

    std::size_t generator_input() const { return noise_dim + embed_dim + 3; }
    std::size_t discriminator_input() const { return 3 + embed_dim; }
};

struct GeneratorParams {
    DenseParams fc_in;       // (noise ∥ embedding ∥ previous triplet) → fc_width, relu
    LstmCellParams lstm1;    // fc_width → hidden
    LstmCellParams lstm2;    // hidden → hidden
    DenseParams fc_out;      // hidden → 3, linear
};

struct DiscriminatorParams {
    LstmCellParams lstm1;    // (triplet ∥ embedding) → hidden
    LstmCellParams lstm2;    // hidden → hidden
    DenseParams fc_out;      // hidden → 1, sigmoid
};

struct GeneratorGrad {
    DenseGrad fc_in;
    LstmGrad lstm1, lstm2;
    DenseGrad fc_out;
};

struct DiscriminatorGrad {
    LstmGrad lstm1, lstm2;
    DenseGrad fc_out;
};

GeneratorParams make_generator(const GanConfig& cfg, Rng& rng);
DiscriminatorParams make_discriminator(const GanConfig& cfg, Rng& rng);
GeneratorGrad zero_grad(const GeneratorParams& p);
DiscriminatorGrad zero_grad(const DiscriminatorParams& p);
std::vector<ParamRef> param_refs(GeneratorParams& p);
std::vector<ParamRef> param_refs(DiscriminatorParams& p);

// ---- Batched forward/backward (columns are examples) --------------------------

struct GeneratorCache {
    std::vector<DenseCache> fc_in;
    std::vector<LstmStepCache> lstm1, lstm2;
    std::vector<DenseCache> fc_out;
};

struct DiscriminatorCache {
    std::vector<LstmStepCache> lstm1, lstm2;
    DenseCache fc_out;
};

// noise[t] is noise_dim × m, embeds[t] is embed_dim × m. Step t consumes
// [z_t ∥ y_t ∥ x̂_{t-1}] with a zero triplet at t = 0; LSTM states carry
// across steps. Returns the per-step 3 × m outputs in model space.
std::vector<Matrix> generator_forward_batch(const GeneratorParams& p, const GanConfig& cfg,
                                            std::span<const Matrix> noise,
                                            std::span<const Matrix> embeds,
                                            GeneratorCache* cache);

// triplets[t] is 3 × m in model space. Two LSTM layers; the final step's
// output goes through the sigmoid head. Returns 1 × m scores in (0,1).
Matrix discriminator_forward_batch(const DiscriminatorParams& p, const GanConfig& cfg,
                                   std::span<const Matrix> triplets,
                                   std::span<const Matrix> embeds, DiscriminatorCache* cache);

// Backprop through time, including the autoregressive output feed. Throws a
// state error when the cache holds no recorded forward.
void generator_backward(const GeneratorParams& p, const GanConfig& cfg,
                        const GeneratorCache& cache, std::span<const Matrix> d_outputs,
                        GeneratorGrad& grads);

// d_score is 1 × m at the sigmoid output. Optionally emits per-step gradients
// on the triplet inputs (for the generator step).
void discriminator_backward(const DiscriminatorParams& p, const GanConfig& cfg,
                            const DiscriminatorCache& cache, const Matrix& d_score,
                            DiscriminatorGrad& grads, std::vector<Matrix>* d_triplets);

// ---- Single-sequence forms in attribute units ----------------------------------

using NoiseSequence = std::vector<std::vector<double>>;  // seq_len × noise_dim, each in [0,1]

NoiseSequence sample_noise_sequence(const GanConfig& cfg, Rng& rng);

ContinuousTriplet to_continuous(const NoteTriplet& n);

// Returns seq_len continuous triplets (MIDI number, beats, beats).
std::vector<ContinuousTriplet> generator_forward(const GeneratorParams& p, const GanConfig& cfg,
                                                 const NoiseSequence& noise,
                                                 std::span<const std::vector<double>> embeds);

double discriminator_forward(const DiscriminatorParams& p, const GanConfig& cfg,
                             std::span<const ContinuousTriplet> triplets,
                             std::span<const std::vector<double>> embeds);

// ---- Adversarial losses ---------------------------------------------------------

// Scores are clamped into [1e-7, 1-1e-7] inside the log terms.
double loss_generator(std::span<const double> d_scores);                      // mean log(1-s)
double loss_discriminator(std::span<const double> real_scores,
                          std::span<const double> fake_scores);               // mean[-log r - log(1-f)]

// ---- Training -------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 400;
    std::size_t batch = 32;
    std::uint64_t seed = 1;
    double lr0 = 0.1;               // defaults follow lr_schedule
    double lr_decay = 0.995;
    bool mmd_on_tuned = true;       // epoch selection on tuned vs raw sequences
    std::size_t checkpoint_every = 1;
    GanConfig gan;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double loss_d = 0, loss_g = 0, mmd2 = 0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::size_t selected_epoch = 0;
    GeneratorParams generator;        // the minimum-MMD² model
    DiscriminatorParams discriminator;
};

// Alternates one discriminator and one generator step per minibatch, computes
// validation MMD² after every epoch and keeps the minimum. Writes per-epoch
// checkpoints and a selection manifest when out_dir is non-empty.
TrainResult train_gan(std::span<const AlignedSequence> dataset, const DatasetSplit& split,
                      const EmbeddingTable& words, const EmbeddingTable& syllables,
                      const TrainConfig& config, const std::filesystem::path& out_dir,
                      std::ostream* log = nullptr);

// Checkpoints hold every named parameter tensor plus the config scalars.
void save_gan_checkpoint(const std::filesystem::path& path, const GeneratorParams& g,
                         const DiscriminatorParams& d, const GanConfig& cfg);

struct GanCheckpoint {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    GanConfig config;
};
GanCheckpoint load_gan_checkpoint(const std::filesystem::path& path);

// Embedding matrix (embed_dim × seq_len) for one aligned sequence.
Matrix sequence_embeddings(const AlignedSequence& seq, const EmbeddingTable& words,
                           const EmbeddingTable& syllables);

// Generate one tuned sequence for the given embeddings (plus the raw
// continuous triplets if wanted).
Sequence generate_tuned(const GeneratorParams& p, const GanConfig& cfg, const Matrix& embeds,
                        Rng& rng, std::vector<ContinuousTriplet>* raw_out = nullptr);

} // namespace lyromel
