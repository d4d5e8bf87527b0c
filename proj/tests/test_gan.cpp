#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "lyromel/gan.hpp"

using namespace lyromel;

namespace {

GanConfig tiny_config(Rng& rng) {
    GanConfig cfg;
    cfg.noise_dim = 2 + rng.uniform_index(5);
    cfg.embed_dim = 2 + rng.uniform_index(5);
    cfg.seq_len = 1 + rng.uniform_index(5);
    cfg.fc_width = 2 + rng.uniform_index(7);
    cfg.hidden = 2 + rng.uniform_index(7);
    return cfg;
}

std::vector<Matrix> random_steps(std::size_t steps, std::size_t rows, std::size_t m, Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
    std::vector<Matrix> out(steps, Matrix(rows, m));
    for (auto& step : out) {
        for (std::size_t i = 0; i < step.size(); ++i) step.data()[i] = rng.uniform(lo, hi);
    }
    return out;
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double clamp01(double s) { return std::clamp(s, 1e-7, 1.0 - 1e-7); }

// Eq.-11 loss of the discriminator on a fixed batch, as a function of its
// parameters; used by the finite-difference check.
double d_loss_value(const DiscriminatorParams& d, const GanConfig& cfg,
                    std::span<const Matrix> real_steps, std::span<const Matrix> fake_steps,
                    std::span<const Matrix> embed_steps) {
    const Matrix real = discriminator_forward_batch(d, cfg, real_steps, embed_steps, nullptr);
    const Matrix fake = discriminator_forward_batch(d, cfg, fake_steps, embed_steps, nullptr);
    std::vector<double> rs(real.data(), real.data() + real.cols());
    std::vector<double> fs(fake.data(), fake.data() + fake.cols());
    return loss_discriminator(rs, fs);
}

// Eq.-10 loss through the full generator->discriminator composition as a
// function of the generator parameters.
double g_loss_value(const GeneratorParams& g, const DiscriminatorParams& d, const GanConfig& cfg,
                    std::span<const Matrix> noise_steps, std::span<const Matrix> embed_steps) {
    const auto fakes = generator_forward_batch(g, cfg, noise_steps, embed_steps, nullptr);
    const Matrix scores = discriminator_forward_batch(d, cfg, fakes, embed_steps, nullptr);
    std::vector<double> ss(scores.data(), scores.data() + scores.cols());
    return loss_generator(ss);
}

} // namespace

TEST_CASE("generator output is always seq_len x 3 and deterministic") {
    Rng rng(51);
    GanConfig cfg;
    cfg.fc_width = 16;
    cfg.hidden = 16;
    GeneratorParams g = make_generator(cfg, rng);

    Rng noise_rng(7);
    const NoiseSequence noise = sample_noise_sequence(cfg, noise_rng);
    CHECK(noise.size() == cfg.seq_len);
    for (const auto& step : noise) {
        CHECK(step.size() == cfg.noise_dim);
        for (double z : step) {
            CHECK(z >= 0.0);
            CHECK(z < 1.0);
        }
    }

    std::vector<std::vector<double>> embeds(cfg.seq_len, std::vector<double>(cfg.embed_dim, 0.1));
    const auto a = generator_forward(g, cfg, noise, embeds);
    const auto b = generator_forward(g, cfg, noise, embeds);
    REQUIRE(a.size() == kSequenceLength);
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].midi == b[t].midi);
        CHECK(a[t].duration == b[t].duration);
        CHECK(a[t].rest == b[t].rest);
        CHECK(std::isfinite(a[t].midi));
    }
}

TEST_CASE("all-zero generator parameters produce all-zero triplets") {
    GanConfig cfg;
    cfg.fc_width = 8;
    cfg.hidden = 8;
    Rng rng(1);
    GeneratorParams g = make_generator(cfg, rng);
    for (auto& ref : param_refs(g)) {
        for (double& v : ref.values) v = 0.0;
    }
    Rng noise_rng(2);
    const NoiseSequence noise = sample_noise_sequence(cfg, noise_rng);
    std::vector<std::vector<double>> embeds(cfg.seq_len, std::vector<double>(cfg.embed_dim, 0.5));
    for (const auto& t : generator_forward(g, cfg, noise, embeds)) {
        CHECK(t.midi == 0.0);
        CHECK(t.duration == 0.0);
        CHECK(t.rest == 0.0);
    }
}

TEST_CASE("discriminator score is a probability; zero head gives 0.5") {
    GanConfig cfg;
    cfg.fc_width = 8;
    cfg.hidden = 8;
    Rng rng(3);
    DiscriminatorParams d = make_discriminator(cfg, rng);
    for (std::size_t i = 0; i < d.fc_out.weight.size(); ++i) d.fc_out.weight.data()[i] = 0.0;
    for (double& b : d.fc_out.bias) b = 0.0;

    std::vector<ContinuousTriplet> triplets(cfg.seq_len, ContinuousTriplet{70.0, 2.0, 1.0});
    std::vector<std::vector<double>> embeds(cfg.seq_len, std::vector<double>(cfg.embed_dim, 0.3));
    CHECK(discriminator_forward(d, cfg, triplets, embeds) == 0.5);

    DiscriminatorParams d2 = make_discriminator(cfg, rng);
    const double s = discriminator_forward(d2, cfg, triplets, embeds);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
}

TEST_CASE("permuting the 20 steps changes the discriminator output") {
    GanConfig cfg;
    cfg.fc_width = 8;
    cfg.hidden = 8;
    Rng rng(4);
    DiscriminatorParams d = make_discriminator(cfg, rng);
    std::vector<ContinuousTriplet> triplets(cfg.seq_len);
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        triplets[t] = {60.0 + static_cast<double>(5 * t % 17), 1.0 + (t % 3), (t % 2) * 2.0};
    }
    std::vector<std::vector<double>> embeds(cfg.seq_len, std::vector<double>(cfg.embed_dim, 0.2));
    const double original = discriminator_forward(d, cfg, triplets, embeds);
    std::reverse(triplets.begin(), triplets.end());
    const double permuted = discriminator_forward(d, cfg, triplets, embeds);
    CHECK(original != permuted);
}

TEST_CASE("loss values match the stated arithmetic") {
    std::vector<double> half(4, 0.5);
    CHECK(loss_generator(half) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    std::vector<double> pair{0.2, 0.8};
    CHECK(loss_generator(pair) ==
          doctest::Approx((std::log(0.8) + std::log(0.2)) / 2.0).epsilon(1e-12));
    CHECK(loss_generator(pair) == doctest::Approx(-0.9163).epsilon(1e-4));

    // scores near 0 mean the generator is failing: loss tends to 0 from below
    std::vector<double> failing{1e-9};
    CHECK(loss_generator(failing) < 0.0);
    CHECK(loss_generator(failing) > -1e-6);

    std::vector<double> r{0.5}, f{0.5};
    CHECK(loss_discriminator(r, f) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    std::vector<double> good_r{0.9}, good_f{0.1};
    CHECK(loss_discriminator(good_r, good_f) == doctest::Approx(0.2107).epsilon(1e-3));

    // perfect discriminator: loss tends to 0
    std::vector<double> perfect_r{1.0 - 1e-9}, perfect_f{1e-9};
    CHECK(loss_discriminator(perfect_r, perfect_f) < 1e-6);

    // clamping keeps the losses finite at the boundary
    std::vector<double> zero{0.0}, one{1.0};
    CHECK(std::isfinite(loss_generator(one)));
    CHECK(std::isfinite(loss_discriminator(zero, one)));

    CHECK_THROWS_AS(loss_generator({}), std::invalid_argument);
    std::vector<double> lone{0.5};
    CHECK_THROWS_AS(loss_discriminator(lone, {}), std::invalid_argument);
}

TEST_CASE("discriminator loss gradient matches finite differences") {
    Rng rng(60);
    for (int iter = 0; iter < 3; ++iter) {
        const GanConfig cfg = tiny_config(rng);
        const std::size_t m = 1 + rng.uniform_index(3);
        DiscriminatorParams d = make_discriminator(cfg, rng);
        const auto real_steps = random_steps(cfg.seq_len, 3, m, rng);
        const auto fake_steps = random_steps(cfg.seq_len, 3, m, rng);
        const auto embed_steps = random_steps(cfg.seq_len, cfg.embed_dim, m, rng);

        // analytic gradient, composed exactly like the training step
        DiscriminatorCache cache_r, cache_f;
        const Matrix rs = discriminator_forward_batch(d, cfg, real_steps, embed_steps, &cache_r);
        const Matrix fs = discriminator_forward_batch(d, cfg, fake_steps, embed_steps, &cache_f);
        Matrix d_real(1, m), d_fake(1, m);
        for (std::size_t j = 0; j < m; ++j) {
            d_real(0, j) = -1.0 / (static_cast<double>(m) * clamp01(rs(0, j)));
            d_fake(0, j) = 1.0 / (static_cast<double>(m) * (1.0 - clamp01(fs(0, j))));
        }
        DiscriminatorGrad grads = zero_grad(d);
        discriminator_backward(d, cfg, cache_r, d_real, grads, nullptr);
        discriminator_backward(d, cfg, cache_f, d_fake, grads, nullptr);

        auto grad_refs = param_refs(grads.lstm1, "dis.lstm1");
        for (auto& r : param_refs(grads.lstm2, "dis.lstm2")) grad_refs.push_back(r);
        for (auto& r : param_refs(grads.fc_out, "dis.fc_out")) grad_refs.push_back(r);
        auto value_refs = param_refs(d);

        const double eps = 1e-5;
        double max_err = 0.0;
        for (std::size_t g = 0; g < value_refs.size(); ++g) {
            for (std::size_t i = 0; i < value_refs[g].values.size(); ++i) {
                double& theta = value_refs[g].values[i];
                const double orig = theta;
                theta = orig + eps;
                const double up = d_loss_value(d, cfg, real_steps, fake_steps, embed_steps);
                theta = orig - eps;
                const double down = d_loss_value(d, cfg, real_steps, fake_steps, embed_steps);
                theta = orig;
                max_err = std::max(
                    max_err, relative_error(grad_refs[g].values[i], (up - down) / (2.0 * eps)));
            }
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("generator loss gradient through the discriminator matches finite differences") {
    Rng rng(61);
    for (int iter = 0; iter < 3; ++iter) {
        const GanConfig cfg = tiny_config(rng);
        const std::size_t m = 1 + rng.uniform_index(3);
        GeneratorParams g = make_generator(cfg, rng);
        DiscriminatorParams d = make_discriminator(cfg, rng);
        const auto noise_steps = random_steps(cfg.seq_len, cfg.noise_dim, m, rng, 0.0, 1.0);
        const auto embed_steps = random_steps(cfg.seq_len, cfg.embed_dim, m, rng);

        GeneratorCache cache_g;
        const auto fakes = generator_forward_batch(g, cfg, noise_steps, embed_steps, &cache_g);
        DiscriminatorCache cache_d;
        const Matrix scores = discriminator_forward_batch(d, cfg, fakes, embed_steps, &cache_d);
        Matrix d_score(1, m);
        for (std::size_t j = 0; j < m; ++j) {
            d_score(0, j) = -1.0 / (static_cast<double>(m) * (1.0 - clamp01(scores(0, j))));
        }
        DiscriminatorGrad sink = zero_grad(d);
        std::vector<Matrix> d_triplets;
        discriminator_backward(d, cfg, cache_d, d_score, sink, &d_triplets);
        GeneratorGrad grads = zero_grad(g);
        generator_backward(g, cfg, cache_g, d_triplets, grads);

        auto grad_refs = param_refs(grads.fc_in, "gen.fc_in");
        for (auto& r : param_refs(grads.lstm1, "gen.lstm1")) grad_refs.push_back(r);
        for (auto& r : param_refs(grads.lstm2, "gen.lstm2")) grad_refs.push_back(r);
        for (auto& r : param_refs(grads.fc_out, "gen.fc_out")) grad_refs.push_back(r);
        auto value_refs = param_refs(g);

        const double eps = 1e-5;
        double max_err = 0.0;
        for (std::size_t gi = 0; gi < value_refs.size(); ++gi) {
            for (std::size_t i = 0; i < value_refs[gi].values.size(); ++i) {
                double& theta = value_refs[gi].values[i];
                const double orig = theta;
                theta = orig + eps;
                const double up = g_loss_value(g, d, cfg, noise_steps, embed_steps);
                theta = orig - eps;
                const double down = g_loss_value(g, d, cfg, noise_steps, embed_steps);
                theta = orig;
                max_err = std::max(
                    max_err, relative_error(grad_refs[gi].values[i], (up - down) / (2.0 * eps)));
            }
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("one discriminator update decreases its loss on the same minibatch") {
    Rng rng(62);
    GanConfig cfg;
    cfg.fc_width = 8;
    cfg.hidden = 8;
    cfg.embed_dim = 4;
    cfg.noise_dim = 4;
    DiscriminatorParams d = make_discriminator(cfg, rng);
    const std::size_t m = 4;
    const auto real_steps = random_steps(cfg.seq_len, 3, m, rng, 0.2, 0.8);
    const auto fake_steps = random_steps(cfg.seq_len, 3, m, rng, -0.8, -0.2);
    const auto embed_steps = random_steps(cfg.seq_len, cfg.embed_dim, m, rng);

    const double before = d_loss_value(d, cfg, real_steps, fake_steps, embed_steps);

    DiscriminatorCache cache_r, cache_f;
    const Matrix rs = discriminator_forward_batch(d, cfg, real_steps, embed_steps, &cache_r);
    const Matrix fs = discriminator_forward_batch(d, cfg, fake_steps, embed_steps, &cache_f);
    Matrix d_real(1, m), d_fake(1, m);
    for (std::size_t j = 0; j < m; ++j) {
        d_real(0, j) = -1.0 / (static_cast<double>(m) * clamp01(rs(0, j)));
        d_fake(0, j) = 1.0 / (static_cast<double>(m) * (1.0 - clamp01(fs(0, j))));
    }
    DiscriminatorGrad grads = zero_grad(d);
    discriminator_backward(d, cfg, cache_r, d_real, grads, nullptr);
    discriminator_backward(d, cfg, cache_f, d_fake, grads, nullptr);

    const double lr = 1e-4;
    sgd_update(d.lstm1, grads.lstm1, lr);
    sgd_update(d.lstm2, grads.lstm2, lr);
    sgd_update(d.fc_out, grads.fc_out, lr);
    const double after = d_loss_value(d, cfg, real_steps, fake_steps, embed_steps);
    CHECK(after < before);
}

TEST_CASE("gan checkpoints reload bit-exactly") {
    Rng rng(63);
    GanConfig cfg;
    cfg.fc_width = 6;
    cfg.hidden = 5;
    cfg.noise_dim = 4;
    cfg.embed_dim = 6;
    cfg.seq_len = 3;
    cfg.scale_attributes = false;
    GeneratorParams g = make_generator(cfg, rng);
    DiscriminatorParams d = make_discriminator(cfg, rng);

    const auto path = std::filesystem::temp_directory_path() / "lyromel_gan_test.ckpt";
    save_gan_checkpoint(path, g, d, cfg);
    const GanCheckpoint ckpt = load_gan_checkpoint(path);
    std::filesystem::remove(path);

    CHECK(ckpt.config.noise_dim == cfg.noise_dim);
    CHECK(ckpt.config.embed_dim == cfg.embed_dim);
    CHECK(ckpt.config.seq_len == cfg.seq_len);
    CHECK(ckpt.config.fc_width == cfg.fc_width);
    CHECK(ckpt.config.hidden == cfg.hidden);
    CHECK(ckpt.config.scale_attributes == cfg.scale_attributes);
    CHECK(ckpt.generator.fc_in.weight == g.fc_in.weight);
    CHECK(ckpt.generator.lstm1.w_candidate == g.lstm1.w_candidate);
    CHECK(ckpt.generator.fc_out.bias == g.fc_out.bias);
    CHECK(ckpt.generator.fc_out.activation == Activation::linear);
    CHECK(ckpt.discriminator.lstm2.b_forget == d.lstm2.b_forget);
    CHECK(ckpt.discriminator.fc_out.activation == Activation::sigmoid);
}

TEST_CASE("train_gan smoke: checkpoints, manifest selection, determinism") {
    // tiny corpus of two alternating patterns
    std::vector<AlignedSequence> dataset;
    for (int i = 0; i < 12; ++i) {
        AlignedSequence seq;
        seq.source_id = "toy" + std::to_string(i);
        for (std::size_t t = 0; t < kSequenceLength; ++t) {
            seq.syllables.push_back({"la", "la"});
            seq.notes.push_back({i % 2 ? 64 : 60, 1.0, t % 4 ? 0.0 : 1.0});
        }
        dataset.push_back(std::move(seq));
    }
    const DatasetSplit split = split_dataset(dataset.size(), 3);

    EmbeddingTable words, syllables;
    words.vocab["la"] = std::vector<double>(kTokenDim, 0.05);
    syllables.vocab["la"] = std::vector<double>(kTokenDim, -0.05);

    TrainConfig config;
    config.epochs = 2;
    config.batch = 4;
    config.seed = 11;
    config.gan.fc_width = 8;
    config.gan.hidden = 8;

    const auto dir = std::filesystem::temp_directory_path() / "lyromel_train_smoke";
    std::filesystem::remove_all(dir);
    std::ostringstream log;
    const TrainResult result =
        train_gan(dataset, split, words, syllables, config, dir, &log);

    REQUIRE(result.history.size() == 2);
    for (const auto& stats : result.history) {
        CHECK(std::isfinite(stats.loss_d));
        CHECK(std::isfinite(stats.loss_g));
        CHECK(std::isfinite(stats.mmd2));
    }
    // the selected epoch is the argmin of the recorded MMD² values
    std::size_t argmin = 1;
    for (const auto& stats : result.history) {
        if (stats.mmd2 < result.history[argmin - 1].mmd2) argmin = stats.epoch;
    }
    CHECK(result.selected_epoch == argmin);
    CHECK(std::filesystem::exists(dir / "epoch_0001.ckpt"));
    CHECK(std::filesystem::exists(dir / "epoch_0002.ckpt"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "selected.ckpt"));

    // identical seeds give identical histories and selected parameters
    const TrainResult again = train_gan(dataset, split, words, syllables, config, "", nullptr);
    REQUIRE(again.history.size() == result.history.size());
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        CHECK(result.history[i].loss_d == again.history[i].loss_d);
        CHECK(result.history[i].loss_g == again.history[i].loss_g);
        CHECK(result.history[i].mmd2 == again.history[i].mmd2);
    }
    CHECK(result.generator.fc_in.weight == again.generator.fc_in.weight);
    CHECK(result.generator.lstm2.w_output == again.generator.lstm2.w_output);

    CHECK_THROWS_AS(train_gan(dataset, DatasetSplit{}, words, syllables, config, "", nullptr),
                    std::invalid_argument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("generate_tuned emits legal sequences") {
    Rng rng(64);
    GanConfig cfg;
    cfg.fc_width = 8;
    cfg.hidden = 8;
    GeneratorParams g = make_generator(cfg, rng);
    Matrix embeds(cfg.embed_dim, cfg.seq_len, 0.1);
    Rng noise(9);
    std::vector<ContinuousTriplet> raw;
    const Sequence tuned = generate_tuned(g, cfg, embeds, noise, &raw);
    REQUIRE(tuned.size() == kSequenceLength);
    REQUIRE(raw.size() == kSequenceLength);
    for (const auto& n : tuned) {
        CHECK(n.midi >= kMidiMin);
        CHECK(n.midi <= kMidiMax);
        CHECK(is_legal_duration(n.duration));
        CHECK(is_legal_rest(n.rest));
    }
}
