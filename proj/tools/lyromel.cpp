#include <iostream>

#include <CLI11.hpp>

#include "lyromel/commands.hpp"

using namespace lyromel;

int main(int argc, char** argv) {
    CLI::App app{"lyromel: lyrics-conditioned melody generation toolkit"};
    app.set_config("--config", "", "TOML/INI config file; command-line flags override it");
    app.require_subcommand(1);

    BuildDatasetOptions build_opt;
    auto* build = app.add_subcommand("build-dataset",
                                     "Parse lyric MIDI files into an aligned-sequence dataset");
    build->add_option("--in", build_opt.input_dir, "directory of .mid files")->required();
    build->add_option("--out", build_opt.output, "dataset JSONL path")->required();
    build->add_option("--seed", build_opt.seed, "split shuffle seed")->required();

    TrainEmbeddingsOptions emb_opt;
    auto* emb = app.add_subcommand("train-embeddings",
                                   "Train word and syllable skip-gram embedding tables");
    emb->add_option("--dataset", emb_opt.dataset, "aligned-sequence JSONL");
    emb->add_option("--text", emb_opt.text_file, "raw lyrics text file (instead of --dataset)");
    emb->add_option("--out-prefix", emb_opt.out_prefix, "writes <prefix>.words.vec/.syllables.vec")
        ->required();
    emb->add_option("--seed", emb_opt.seed)->required();

    TrainOptions train_opt;
    bool mmd_raw = false, no_scale = false;
    auto* train = app.add_subcommand("train", "Train the conditional LSTM-GAN");
    train->add_option("--dataset", train_opt.dataset)->required();
    train->add_option("--embeddings", train_opt.embeddings_prefix, "embedding table prefix")
        ->required();
    train->add_option("--out", train_opt.out_dir, "checkpoint directory")->required();
    train->add_option("--epochs", train_opt.config.epochs)->capture_default_str();
    train->add_option("--batch", train_opt.config.batch)->capture_default_str();
    train->add_option("--seed", train_opt.config.seed)->required();
    train->add_option("--fc-width", train_opt.config.gan.fc_width)->capture_default_str();
    train->add_option("--hidden", train_opt.config.gan.hidden)->capture_default_str();
    train->add_option("--noise-dim", train_opt.config.gan.noise_dim)->capture_default_str();
    train->add_option("--checkpoint-every", train_opt.config.checkpoint_every)
        ->capture_default_str();
    train->add_flag("--mmd-raw", mmd_raw, "select epochs on raw instead of tuned sequences");
    train->add_flag("--no-scale-attributes", no_scale,
                    "feed raw attribute ranges to the discriminator");

    GenerateOptions gen_opt;
    auto* gen = app.add_subcommand("generate", "Generate melodies for lyrics");
    gen->add_option("--checkpoint", gen_opt.checkpoint)->required();
    gen->add_option("--embeddings", gen_opt.embeddings_prefix)->required();
    gen->add_option("--lyrics", gen_opt.lyrics, "lyrics text");
    gen->add_option("--lyrics-file", gen_opt.lyrics_file, "lyrics text file");
    gen->add_option("--count", gen_opt.count)->capture_default_str();
    gen->add_option("--seed", gen_opt.seed)->required();
    gen->add_option("--out", gen_opt.out_dir)->required();
    gen->add_flag("--emit-raw", gen_opt.emit_raw, "include raw continuous triplets in the dump");

    EvaluateOptions eval_opt;
    auto* eval = app.add_subcommand("evaluate", "Metrics, MMD and conditioning experiments");
    eval->add_option("--dataset", eval_opt.dataset)->required();
    eval->add_option("--checkpoint", eval_opt.checkpoint)->required();
    eval->add_option("--embeddings", eval_opt.embeddings_prefix)->required();
    eval->add_option("--seed", eval_opt.seed)->required();
    eval->add_option("--out", eval_opt.out_dir)->required();
    eval->add_option("--shuffles", eval_opt.shuffles)->capture_default_str();

    BaselineOptions base_opt;
    auto* base = app.add_subcommand("baseline", "Sample baseline sequences from the dataset distribution");
    base->add_option("--dataset", base_opt.dataset)->required();
    base->add_option("--n", base_opt.count)->required();
    base->add_option("--seed", base_opt.seed)->required();
    base->add_option("--out", base_opt.output)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build_dataset(build_opt, std::cout, std::cerr);
        if (emb->parsed()) return cmd_train_embeddings(emb_opt, std::cout, std::cerr);
        if (train->parsed()) {
            train_opt.config.mmd_on_tuned = !mmd_raw;
            train_opt.config.gan.scale_attributes = !no_scale;
            return cmd_train(train_opt, std::cout, std::cerr);
        }
        if (gen->parsed()) return cmd_generate(gen_opt, std::cout, std::cerr);
        if (eval->parsed()) return cmd_evaluate(eval_opt, std::cout, std::cerr);
        if (base->parsed()) return cmd_baseline(base_opt, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
