#include "lyromel/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace lyromel {

namespace {

constexpr double kScoreEps = 1e-7;

double clamp_score(double s) { return std::clamp(s, kScoreEps, 1.0 - kScoreEps); }

void copy_rows(Matrix& dst, std::size_t dst_row, const Matrix& src) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
        std::memcpy(dst.row(dst_row + r), src.row(r), src.cols() * sizeof(double));
    }
}

Matrix slice_rows(const Matrix& src, std::size_t begin, std::size_t count) {
    Matrix out(count, src.cols());
    for (std::size_t r = 0; r < count; ++r) {
        std::memcpy(out.row(r), src.row(begin + r), src.cols() * sizeof(double));
    }
    return out;
}

} // namespace

GeneratorParams make_generator(const GanConfig& cfg, Rng& rng) {
    GeneratorParams p;
    p.fc_in = make_dense(cfg.fc_width, cfg.generator_input(), Activation::relu, rng);
    p.lstm1 = make_lstm(cfg.hidden, cfg.fc_width, rng);
    p.lstm2 = make_lstm(cfg.hidden, cfg.hidden, rng);
    p.fc_out = make_dense(3, cfg.hidden, Activation::linear, rng);
    return p;
}

DiscriminatorParams make_discriminator(const GanConfig& cfg, Rng& rng) {
    DiscriminatorParams p;
    p.lstm1 = make_lstm(cfg.hidden, cfg.discriminator_input(), rng);
    p.lstm2 = make_lstm(cfg.hidden, cfg.hidden, rng);
    p.fc_out = make_dense(1, cfg.hidden, Activation::sigmoid, rng);
    return p;
}

GeneratorGrad zero_grad(const GeneratorParams& p) {
    return {zero_grad(p.fc_in), zero_grad(p.lstm1), zero_grad(p.lstm2), zero_grad(p.fc_out)};
}

DiscriminatorGrad zero_grad(const DiscriminatorParams& p) {
    return {zero_grad(p.lstm1), zero_grad(p.lstm2), zero_grad(p.fc_out)};
}

std::vector<ParamRef> param_refs(GeneratorParams& p) {
    std::vector<ParamRef> refs;
    auto append = [&refs](std::vector<ParamRef> group) {
        for (auto& r : group) refs.push_back(std::move(r));
    };
    append(param_refs(p.fc_in, "gen.fc_in"));
    append(param_refs(p.lstm1, "gen.lstm1"));
    append(param_refs(p.lstm2, "gen.lstm2"));
    append(param_refs(p.fc_out, "gen.fc_out"));
    return refs;
}

std::vector<ParamRef> param_refs(DiscriminatorParams& p) {
    std::vector<ParamRef> refs;
    auto append = [&refs](std::vector<ParamRef> group) {
        for (auto& r : group) refs.push_back(std::move(r));
    };
    append(param_refs(p.lstm1, "dis.lstm1"));
    append(param_refs(p.lstm2, "dis.lstm2"));
    append(param_refs(p.fc_out, "dis.fc_out"));
    return refs;
}

// ---- Batched forward ------------------------------------------------------------

std::vector<Matrix> generator_forward_batch(const GeneratorParams& p, const GanConfig& cfg,
                                            std::span<const Matrix> noise,
                                            std::span<const Matrix> embeds,
                                            GeneratorCache* cache) {
    if (noise.size() != cfg.seq_len || embeds.size() != cfg.seq_len) {
        throw ShapeError("generator_forward: need exactly seq_len noise and embedding steps");
    }
    const std::size_t m = noise.front().cols();
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        if (noise[t].rows() != cfg.noise_dim || noise[t].cols() != m ||
            embeds[t].rows() != cfg.embed_dim || embeds[t].cols() != m) {
            throw ShapeError("generator_forward: step shape mismatch");
        }
    }
    if (cache) {
        cache->fc_in.resize(cfg.seq_len);
        cache->lstm1.resize(cfg.seq_len);
        cache->lstm2.resize(cfg.seq_len);
        cache->fc_out.resize(cfg.seq_len);
    }

    Matrix h1(cfg.hidden, m), c1(cfg.hidden, m), h2(cfg.hidden, m), c2(cfg.hidden, m);
    Matrix prev_out(3, m);
    std::vector<Matrix> outputs;
    outputs.reserve(cfg.seq_len);
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        Matrix input(cfg.generator_input(), m);
        copy_rows(input, 0, noise[t]);
        copy_rows(input, cfg.noise_dim, embeds[t]);
        copy_rows(input, cfg.noise_dim + cfg.embed_dim, prev_out);

        Matrix a = dense_forward_batch(p.fc_in, input, cache ? &cache->fc_in[t] : nullptr);
        lstm_step_batch(p.lstm1, a, h1, c1, cache ? &cache->lstm1[t] : nullptr);
        lstm_step_batch(p.lstm2, h1, h2, c2, cache ? &cache->lstm2[t] : nullptr);
        Matrix out = dense_forward_batch(p.fc_out, h2, cache ? &cache->fc_out[t] : nullptr);
        prev_out = out;
        outputs.push_back(std::move(out));
    }
    return outputs;
}

Matrix discriminator_forward_batch(const DiscriminatorParams& p, const GanConfig& cfg,
                                   std::span<const Matrix> triplets,
                                   std::span<const Matrix> embeds, DiscriminatorCache* cache) {
    if (triplets.size() != cfg.seq_len || embeds.size() != cfg.seq_len) {
        throw ShapeError("discriminator_forward: need exactly seq_len steps");
    }
    const std::size_t m = triplets.front().cols();
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        if (triplets[t].rows() != 3 || triplets[t].cols() != m ||
            embeds[t].rows() != cfg.embed_dim || embeds[t].cols() != m) {
            throw ShapeError("discriminator_forward: step shape mismatch");
        }
    }
    if (cache) {
        cache->lstm1.resize(cfg.seq_len);
        cache->lstm2.resize(cfg.seq_len);
    }

    Matrix h1(cfg.hidden, m), c1(cfg.hidden, m), h2(cfg.hidden, m), c2(cfg.hidden, m);
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        Matrix input(cfg.discriminator_input(), m);
        copy_rows(input, 0, triplets[t]);
        copy_rows(input, 3, embeds[t]);
        lstm_step_batch(p.lstm1, input, h1, c1, cache ? &cache->lstm1[t] : nullptr);
        lstm_step_batch(p.lstm2, h1, h2, c2, cache ? &cache->lstm2[t] : nullptr);
    }
    return dense_forward_batch(p.fc_out, h2, cache ? &cache->fc_out : nullptr);
}

// ---- Batched backward -----------------------------------------------------------

void generator_backward(const GeneratorParams& p, const GanConfig& cfg,
                        const GeneratorCache& cache, std::span<const Matrix> d_outputs,
                        GeneratorGrad& grads) {
    if (cache.lstm1.empty()) {
        throw std::logic_error("generator_backward: no recorded forward pass");
    }
    if (d_outputs.size() != cfg.seq_len) {
        throw ShapeError("generator_backward: gradient count != seq_len");
    }
    const std::size_t m = d_outputs.front().cols();
    Matrix dh1(cfg.hidden, m), dc1(cfg.hidden, m), dh2(cfg.hidden, m), dc2(cfg.hidden, m);
    Matrix d_feed(3, m);  // gradient on x̂_{t-1} through the next step's input

    for (std::size_t t = cfg.seq_len; t-- > 0;) {
        Matrix d_out = d_outputs[t];
        add_inplace(d_out, d_feed);

        Matrix dh2_local = dense_backward(p.fc_out, cache.fc_out[t], d_out, grads.fc_out);
        add_inplace(dh2_local, dh2);
        LstmStepBack back2 = lstm_backward_step(p.lstm2, cache.lstm2[t], dh2_local, dc2, grads.lstm2);
        dh2 = std::move(back2.dh_prev);
        dc2 = std::move(back2.dc_prev);

        Matrix dh1_local = std::move(back2.dx);
        add_inplace(dh1_local, dh1);
        LstmStepBack back1 = lstm_backward_step(p.lstm1, cache.lstm1[t], dh1_local, dc1, grads.lstm1);
        dh1 = std::move(back1.dh_prev);
        dc1 = std::move(back1.dc_prev);

        Matrix d_input = dense_backward(p.fc_in, cache.fc_in[t], back1.dx, grads.fc_in);
        d_feed = slice_rows(d_input, cfg.noise_dim + cfg.embed_dim, 3);
    }
    // d_feed now addresses the zero initial triplet and is dropped.
}

void discriminator_backward(const DiscriminatorParams& p, const GanConfig& cfg,
                            const DiscriminatorCache& cache, const Matrix& d_score,
                            DiscriminatorGrad& grads, std::vector<Matrix>* d_triplets) {
    if (cache.lstm1.empty()) {
        throw std::logic_error("discriminator_backward: no recorded forward pass");
    }
    const std::size_t m = d_score.cols();
    if (d_score.rows() != 1) throw ShapeError("discriminator_backward: d_score must be 1×m");
    if (d_triplets) d_triplets->assign(cfg.seq_len, Matrix());

    Matrix dh1(cfg.hidden, m), dc1(cfg.hidden, m), dh2(cfg.hidden, m), dc2(cfg.hidden, m);
    for (std::size_t t = cfg.seq_len; t-- > 0;) {
        Matrix dh2_local(cfg.hidden, m);
        if (t + 1 == cfg.seq_len) {
            dh2_local = dense_backward(p.fc_out, cache.fc_out, d_score, grads.fc_out);
        }
        add_inplace(dh2_local, dh2);
        LstmStepBack back2 = lstm_backward_step(p.lstm2, cache.lstm2[t], dh2_local, dc2, grads.lstm2);
        dh2 = std::move(back2.dh_prev);
        dc2 = std::move(back2.dc_prev);

        Matrix dh1_local = std::move(back2.dx);
        add_inplace(dh1_local, dh1);
        LstmStepBack back1 = lstm_backward_step(p.lstm1, cache.lstm1[t], dh1_local, dc1, grads.lstm1);
        dh1 = std::move(back1.dh_prev);
        dc1 = std::move(back1.dc_prev);
        if (d_triplets) (*d_triplets)[t] = slice_rows(back1.dx, 0, 3);
    }
}

// ---- Single-sequence forms --------------------------------------------------------

NoiseSequence sample_noise_sequence(const GanConfig& cfg, Rng& rng) {
    NoiseSequence noise(cfg.seq_len, std::vector<double>(cfg.noise_dim));
    for (auto& step : noise) {
        for (double& z : step) z = rng.uniform();
    }
    return noise;
}

ContinuousTriplet to_continuous(const NoteTriplet& n) {
    return {static_cast<double>(n.midi), n.duration, n.rest};
}

namespace {

std::vector<Matrix> columns_from_vectors(std::span<const std::vector<double>> vecs,
                                         std::size_t expected_dim, const char* what) {
    std::vector<Matrix> out;
    out.reserve(vecs.size());
    for (const auto& v : vecs) {
        if (v.size() != expected_dim) throw ShapeError(std::string(what) + ": wrong vector size");
        Matrix m(expected_dim, 1);
        for (std::size_t i = 0; i < expected_dim; ++i) m(i, 0) = v[i];
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace

std::vector<ContinuousTriplet> generator_forward(const GeneratorParams& p, const GanConfig& cfg,
                                                 const NoiseSequence& noise,
                                                 std::span<const std::vector<double>> embeds) {
    auto noise_steps = columns_from_vectors(noise, cfg.noise_dim, "noise");
    auto embed_steps = columns_from_vectors(embeds, cfg.embed_dim, "embedding");
    auto outputs = generator_forward_batch(p, cfg, noise_steps, embed_steps, nullptr);
    std::vector<ContinuousTriplet> triplets(outputs.size());
    for (std::size_t t = 0; t < outputs.size(); ++t) {
        triplets[t].midi = outputs[t](0, 0) * (cfg.scale_attributes ? kMidiScale : 1.0);
        triplets[t].duration = outputs[t](1, 0) * (cfg.scale_attributes ? kDurationScale : 1.0);
        triplets[t].rest = outputs[t](2, 0) * (cfg.scale_attributes ? kRestScale : 1.0);
    }
    return triplets;
}

double discriminator_forward(const DiscriminatorParams& p, const GanConfig& cfg,
                             std::span<const ContinuousTriplet> triplets,
                             std::span<const std::vector<double>> embeds) {
    if (triplets.size() != cfg.seq_len) throw ShapeError("discriminator_forward: need seq_len triplets");
    std::vector<Matrix> triplet_steps;
    triplet_steps.reserve(triplets.size());
    for (const auto& t : triplets) {
        Matrix m(3, 1);
        m(0, 0) = cfg.scale_attributes ? t.midi / kMidiScale : t.midi;
        m(1, 0) = cfg.scale_attributes ? t.duration / kDurationScale : t.duration;
        m(2, 0) = cfg.scale_attributes ? t.rest / kRestScale : t.rest;
        triplet_steps.push_back(std::move(m));
    }
    auto embed_steps = columns_from_vectors(embeds, cfg.embed_dim, "embedding");
    return discriminator_forward_batch(p, cfg, triplet_steps, embed_steps, nullptr)(0, 0);
}

// ---- Losses -----------------------------------------------------------------------

double loss_generator(std::span<const double> d_scores) {
    if (d_scores.empty()) throw std::invalid_argument("loss_generator: empty score list");
    double acc = 0.0;
    for (double s : d_scores) acc += std::log(1.0 - clamp_score(s));
    return acc / static_cast<double>(d_scores.size());
}

double loss_discriminator(std::span<const double> real_scores,
                          std::span<const double> fake_scores) {
    if (real_scores.empty() || real_scores.size() != fake_scores.size()) {
        throw std::invalid_argument("loss_discriminator: need equal, non-empty score lists");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < real_scores.size(); ++i) {
        acc += -std::log(clamp_score(real_scores[i])) - std::log(1.0 - clamp_score(fake_scores[i]));
    }
    return acc / static_cast<double>(real_scores.size());
}

// ---- Training ----------------------------------------------------------------------

Matrix sequence_embeddings(const AlignedSequence& seq, const EmbeddingTable& words,
                           const EmbeddingTable& syllables) {
    Matrix out(kEmbeddingDim, seq.syllables.size());
    for (std::size_t t = 0; t < seq.syllables.size(); ++t) {
        const auto v = embed(seq.syllables[t].word, seq.syllables[t].syllable, words, syllables);
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) out(i, t) = v[i];
    }
    return out;
}

namespace {

std::vector<Matrix> noise_steps_batch(const GanConfig& cfg, std::size_t m, Rng& rng) {
    // Sampled per example then per step so each column is one NoiseSequence.
    std::vector<Matrix> steps(cfg.seq_len, Matrix(cfg.noise_dim, m));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t t = 0; t < cfg.seq_len; ++t) {
            for (std::size_t i = 0; i < cfg.noise_dim; ++i) steps[t](i, j) = rng.uniform();
        }
    }
    return steps;
}

std::vector<Matrix> gather_triplet_steps(const GanConfig& cfg,
                                         std::span<const AlignedSequence> dataset,
                                         std::span<const std::size_t> indices) {
    std::vector<Matrix> steps(cfg.seq_len, Matrix(3, indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& notes = dataset[indices[j]].notes;
        for (std::size_t t = 0; t < cfg.seq_len; ++t) {
            steps[t](0, j) = cfg.scale_attributes ? notes[t].midi / kMidiScale : notes[t].midi;
            steps[t](1, j) = cfg.scale_attributes ? notes[t].duration / kDurationScale : notes[t].duration;
            steps[t](2, j) = cfg.scale_attributes ? notes[t].rest / kRestScale : notes[t].rest;
        }
    }
    return steps;
}

std::vector<Matrix> gather_embed_steps(const GanConfig& cfg, std::span<const Matrix> embeds,
                                       std::span<const std::size_t> indices) {
    std::vector<Matrix> steps(cfg.seq_len, Matrix(cfg.embed_dim, indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const Matrix& e = embeds[indices[j]];
        for (std::size_t t = 0; t < cfg.seq_len; ++t) {
            for (std::size_t i = 0; i < cfg.embed_dim; ++i) steps[t](i, j) = e(i, t);
        }
    }
    return steps;
}

std::vector<double> score_row(const Matrix& scores) {
    return std::vector<double>(scores.data(), scores.data() + scores.cols());
}

ContinuousTriplet unscale_output(const GanConfig& cfg, double m, double d, double r) {
    if (cfg.scale_attributes) return {m * kMidiScale, d * kDurationScale, r * kRestScale};
    return {m, d, r};
}

// Sequences the generator produces for the given embeddings, tuned or raw.
std::vector<Sequence> generate_for_embeddings(const GeneratorParams& g, const GanConfig& cfg,
                                              std::span<const Matrix> embeds,
                                              std::span<const std::size_t> indices,
                                              std::size_t batch, Rng& rng, bool tuned) {
    std::vector<Sequence> out;
    out.reserve(indices.size());
    for (std::size_t begin = 0; begin < indices.size(); begin += batch) {
        const std::size_t m = std::min(batch, indices.size() - begin);
        const std::span<const std::size_t> chunk = indices.subspan(begin, m);
        auto embed_steps = gather_embed_steps(cfg, embeds, chunk);
        auto noise = noise_steps_batch(cfg, m, rng);
        auto outputs = generator_forward_batch(g, cfg, noise, embed_steps, nullptr);
        for (std::size_t j = 0; j < m; ++j) {
            std::vector<ContinuousTriplet> raw(cfg.seq_len);
            for (std::size_t t = 0; t < cfg.seq_len; ++t) {
                raw[t] = unscale_output(cfg, outputs[t](0, j), outputs[t](1, j), outputs[t](2, j));
            }
            if (tuned) {
                out.push_back(tune_sequence(raw));
            } else {
                Sequence q(cfg.seq_len);
                for (std::size_t t = 0; t < cfg.seq_len; ++t) q[t] = quantize_triplet(raw[t]);
                out.push_back(std::move(q));
            }
        }
    }
    return out;
}

std::string epoch_checkpoint_name(std::size_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04zu.ckpt", epoch);
    return buf;
}

} // namespace

TrainResult train_gan(std::span<const AlignedSequence> dataset, const DatasetSplit& split,
                      const EmbeddingTable& words, const EmbeddingTable& syllables,
                      const TrainConfig& config, const std::filesystem::path& out_dir,
                      std::ostream* log) {
    if (split.train.empty() || split.validation.empty()) {
        throw std::invalid_argument("train_gan: empty train or validation split");
    }
    const GanConfig& cfg = config.gan;

    std::vector<Matrix> embeds;
    embeds.reserve(dataset.size());
    for (const auto& seq : dataset) embeds.push_back(sequence_embeddings(seq, words, syllables));

    // Real validation sample set, fixed across epochs.
    std::vector<Sequence> val_real;
    val_real.reserve(split.validation.size());
    for (std::size_t idx : split.validation) val_real.push_back(dataset[idx].notes);
    const Matrix val_real_flat = flatten_sequences(val_real);

    Rng rng(config.seed);
    GeneratorParams generator = make_generator(cfg, rng);
    DiscriminatorParams discriminator = make_discriminator(cfg, rng);

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    TrainResult result;
    double best_mmd = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(split.train.begin(), split.train.end());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = config.lr0 * std::pow(config.lr_decay, static_cast<double>(epoch - 1));
        rng.shuffle(order);

        double epoch_loss_d = 0, epoch_loss_g = 0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
            const std::size_t m = std::min(config.batch, order.size() - begin);
            const std::span<const std::size_t> chunk(order.data() + begin, m);
            auto embed_steps = gather_embed_steps(cfg, embeds, chunk);
            auto real_steps = gather_triplet_steps(cfg, dataset, chunk);

            // Discriminator step: minimize mean[-log D(x|y) - log(1-D(G(z|y)))].
            auto fake_steps = generator_forward_batch(generator, cfg,
                                                      noise_steps_batch(cfg, m, rng),
                                                      embed_steps, nullptr);
            DiscriminatorCache cache_real, cache_fake;
            Matrix real_scores =
                discriminator_forward_batch(discriminator, cfg, real_steps, embed_steps, &cache_real);
            Matrix fake_scores =
                discriminator_forward_batch(discriminator, cfg, fake_steps, embed_steps, &cache_fake);
            epoch_loss_d += loss_discriminator(score_row(real_scores), score_row(fake_scores));

            const double inv_m = 1.0 / static_cast<double>(m);
            Matrix d_real(1, m), d_fake(1, m);
            for (std::size_t j = 0; j < m; ++j) {
                d_real(0, j) = -inv_m / clamp_score(real_scores(0, j));
                d_fake(0, j) = inv_m / (1.0 - clamp_score(fake_scores(0, j)));
            }
            DiscriminatorGrad d_grads = zero_grad(discriminator);
            discriminator_backward(discriminator, cfg, cache_real, d_real, d_grads, nullptr);
            discriminator_backward(discriminator, cfg, cache_fake, d_fake, d_grads, nullptr);
            sgd_update(discriminator.lstm1, d_grads.lstm1, lr);
            sgd_update(discriminator.lstm2, d_grads.lstm2, lr);
            sgd_update(discriminator.fc_out, d_grads.fc_out, lr);

            // Generator step: minimize mean log(1-D(G(z|y))).
            GeneratorCache cache_gen;
            auto fresh_fakes = generator_forward_batch(generator, cfg,
                                                       noise_steps_batch(cfg, m, rng),
                                                       embed_steps, &cache_gen);
            DiscriminatorCache cache_d2;
            Matrix gen_scores =
                discriminator_forward_batch(discriminator, cfg, fresh_fakes, embed_steps, &cache_d2);
            epoch_loss_g += loss_generator(score_row(gen_scores));

            Matrix d_gen_score(1, m);
            for (std::size_t j = 0; j < m; ++j) {
                d_gen_score(0, j) = -inv_m / (1.0 - clamp_score(gen_scores(0, j)));
            }
            DiscriminatorGrad sink = zero_grad(discriminator);  // D is frozen in this step
            std::vector<Matrix> d_triplets;
            discriminator_backward(discriminator, cfg, cache_d2, d_gen_score, sink, &d_triplets);
            GeneratorGrad g_grads = zero_grad(generator);
            generator_backward(generator, cfg, cache_gen, d_triplets, g_grads);
            sgd_update(generator.fc_in, g_grads.fc_in, lr);
            sgd_update(generator.lstm1, g_grads.lstm1, lr);
            sgd_update(generator.lstm2, g_grads.lstm2, lr);
            sgd_update(generator.fc_out, g_grads.fc_out, lr);
            ++batches;
        }

        // Epoch selection: MMD² between validation-conditioned generations and
        // the real validation sequences.
        Rng val_rng(derive_seed(config.seed, 1u << 20 | epoch));
        auto generated = generate_for_embeddings(generator, cfg, embeds, split.validation,
                                                 config.batch, val_rng, config.mmd_on_tuned);
        const double mmd = mmd2_unbiased(flatten_sequences(generated), val_real_flat);

        EpochStats stats{epoch, epoch_loss_d / static_cast<double>(batches),
                         epoch_loss_g / static_cast<double>(batches), mmd};
        result.history.push_back(stats);
        if (log) {
            (*log) << "epoch " << epoch << " loss_d " << stats.loss_d << " loss_g " << stats.loss_g
                   << " mmd2 " << stats.mmd2 << '\n';
        }
        if (!out_dir.empty() &&
            (epoch % config.checkpoint_every == 0 || epoch == config.epochs)) {
            save_gan_checkpoint(out_dir / epoch_checkpoint_name(epoch), generator, discriminator, cfg);
        }
        if (mmd < best_mmd) {
            best_mmd = mmd;
            result.selected_epoch = epoch;
            result.generator = generator;
            result.discriminator = discriminator;
        }
    }

    if (!out_dir.empty()) {
        save_gan_checkpoint(out_dir / "selected.ckpt", result.generator, result.discriminator, cfg);
        nlohmann::json manifest;
        manifest["selected_epoch"] = result.selected_epoch;
        manifest["selected_checkpoint"] = "selected.ckpt";
        nlohmann::json epochs = nlohmann::json::array();
        for (const auto& s : result.history) {
            epochs.push_back({{"epoch", s.epoch},
                              {"loss_d", s.loss_d},
                              {"loss_g", s.loss_g},
                              {"mmd2", s.mmd2},
                              {"checkpoint", epoch_checkpoint_name(s.epoch)}});
        }
        manifest["epochs"] = epochs;
        std::ofstream os(out_dir / "manifest.json", std::ios::trunc);
        os << manifest.dump(2) << '\n';
    }
    return result;
}

// ---- Checkpoints --------------------------------------------------------------------

namespace {

NamedTensor scalar_tensor(const std::string& name, double v) {
    NamedTensor t;
    t.name = name;
    t.rows = 1;
    t.cols = 1;
    t.values = {v};
    return t;
}

void append(std::vector<NamedTensor>& dst, std::vector<NamedTensor> src) {
    for (auto& t : src) dst.push_back(std::move(t));
}

LstmCellParams lstm_from_tensors(std::span<const NamedTensor> ts, const std::string& prefix) {
    LstmCellParams p;
    p.w_input = tensor_matrix(find_tensor(ts, prefix + ".w_input"));
    p.w_forget = tensor_matrix(find_tensor(ts, prefix + ".w_forget"));
    p.w_output = tensor_matrix(find_tensor(ts, prefix + ".w_output"));
    p.w_candidate = tensor_matrix(find_tensor(ts, prefix + ".w_candidate"));
    p.b_input = tensor_vector(find_tensor(ts, prefix + ".b_input"));
    p.b_forget = tensor_vector(find_tensor(ts, prefix + ".b_forget"));
    p.b_output = tensor_vector(find_tensor(ts, prefix + ".b_output"));
    p.b_candidate = tensor_vector(find_tensor(ts, prefix + ".b_candidate"));
    return p;
}

DenseParams dense_from_tensors(std::span<const NamedTensor> ts, const std::string& prefix,
                               Activation act) {
    DenseParams p;
    p.weight = tensor_matrix(find_tensor(ts, prefix + ".weight"));
    p.bias = tensor_vector(find_tensor(ts, prefix + ".bias"));
    p.activation = act;
    return p;
}

} // namespace

void save_gan_checkpoint(const std::filesystem::path& path, const GeneratorParams& g,
                         const DiscriminatorParams& d, const GanConfig& cfg) {
    std::vector<NamedTensor> tensors;
    tensors.push_back(scalar_tensor("config.noise_dim", static_cast<double>(cfg.noise_dim)));
    tensors.push_back(scalar_tensor("config.embed_dim", static_cast<double>(cfg.embed_dim)));
    tensors.push_back(scalar_tensor("config.seq_len", static_cast<double>(cfg.seq_len)));
    tensors.push_back(scalar_tensor("config.fc_width", static_cast<double>(cfg.fc_width)));
    tensors.push_back(scalar_tensor("config.hidden", static_cast<double>(cfg.hidden)));
    tensors.push_back(scalar_tensor("config.scale_attributes", cfg.scale_attributes ? 1.0 : 0.0));
    append(tensors, to_tensors(g.fc_in, "gen.fc_in"));
    append(tensors, to_tensors(g.lstm1, "gen.lstm1"));
    append(tensors, to_tensors(g.lstm2, "gen.lstm2"));
    append(tensors, to_tensors(g.fc_out, "gen.fc_out"));
    append(tensors, to_tensors(d.lstm1, "dis.lstm1"));
    append(tensors, to_tensors(d.lstm2, "dis.lstm2"));
    append(tensors, to_tensors(d.fc_out, "dis.fc_out"));
    save_tensors(path, tensors);
}

GanCheckpoint load_gan_checkpoint(const std::filesystem::path& path) {
    const auto tensors = load_tensors(path);
    GanCheckpoint ckpt;
    auto scalar = [&](const std::string& name) {
        return find_tensor(tensors, name).values.at(0);
    };
    ckpt.config.noise_dim = static_cast<std::size_t>(scalar("config.noise_dim"));
    ckpt.config.embed_dim = static_cast<std::size_t>(scalar("config.embed_dim"));
    ckpt.config.seq_len = static_cast<std::size_t>(scalar("config.seq_len"));
    ckpt.config.fc_width = static_cast<std::size_t>(scalar("config.fc_width"));
    ckpt.config.hidden = static_cast<std::size_t>(scalar("config.hidden"));
    ckpt.config.scale_attributes = scalar("config.scale_attributes") != 0.0;
    ckpt.generator.fc_in = dense_from_tensors(tensors, "gen.fc_in", Activation::relu);
    ckpt.generator.lstm1 = lstm_from_tensors(tensors, "gen.lstm1");
    ckpt.generator.lstm2 = lstm_from_tensors(tensors, "gen.lstm2");
    ckpt.generator.fc_out = dense_from_tensors(tensors, "gen.fc_out", Activation::linear);
    ckpt.discriminator.lstm1 = lstm_from_tensors(tensors, "dis.lstm1");
    ckpt.discriminator.lstm2 = lstm_from_tensors(tensors, "dis.lstm2");
    ckpt.discriminator.fc_out = dense_from_tensors(tensors, "dis.fc_out", Activation::sigmoid);
    return ckpt;
}

Sequence generate_tuned(const GeneratorParams& p, const GanConfig& cfg, const Matrix& embeds,
                        Rng& rng, std::vector<ContinuousTriplet>* raw_out) {
    if (embeds.rows() != cfg.embed_dim || embeds.cols() != cfg.seq_len) {
        throw ShapeError("generate_tuned: embedding matrix must be embed_dim × seq_len");
    }
    std::vector<std::vector<double>> embed_vecs(cfg.seq_len, std::vector<double>(cfg.embed_dim));
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        for (std::size_t i = 0; i < cfg.embed_dim; ++i) embed_vecs[t][i] = embeds(i, t);
    }
    const auto raw = generator_forward(p, cfg, sample_noise_sequence(cfg, rng), embed_vecs);
    if (raw_out) *raw_out = raw;
    return tune_sequence(raw);
}

} // namespace lyromel
