#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "lyromel/gan.hpp"

namespace lyromel {

// Pipeline commands behind the CLI subcommands. Each is a pure function of
// (inputs, options, seed): reruns produce byte-identical artifacts. Outputs
// are written to temp paths and atomically renamed. Returns a process exit
// code; user-facing diagnostics go to `err`.

struct BuildDatasetOptions {
    std::filesystem::path input_dir;
    std::filesystem::path output;  // dataset JSONL; sidecars get .hist.json/.split.json suffixes
    std::uint64_t seed = 0;
};
int cmd_build_dataset(const BuildDatasetOptions& opt, std::ostream& out, std::ostream& err);

struct TrainEmbeddingsOptions {
    std::filesystem::path dataset;     // aligned-sequence JSONL
    std::filesystem::path text_file;   // optional raw lyrics instead of a dataset
    std::filesystem::path out_prefix;  // writes <prefix>.words.vec and <prefix>.syllables.vec
    std::uint64_t seed = 0;
};
int cmd_train_embeddings(const TrainEmbeddingsOptions& opt, std::ostream& out, std::ostream& err);

struct TrainOptions {
    std::filesystem::path dataset;
    std::filesystem::path embeddings_prefix;
    std::filesystem::path out_dir;
    TrainConfig config;
};
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

struct GenerateOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path embeddings_prefix;
    std::filesystem::path out_dir;
    std::string lyrics;                // inline lyrics text…
    std::filesystem::path lyrics_file; // …or a file (takes precedence when set)
    std::size_t count = 1;
    std::uint64_t seed = 0;
    bool emit_raw = false;
};
int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
    std::filesystem::path dataset;
    std::filesystem::path checkpoint;
    std::filesystem::path embeddings_prefix;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::size_t shuffles = 10000;
};
int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);

struct BaselineOptions {
    std::filesystem::path dataset;
    std::filesystem::path output;  // JSONL of sampled sequences
    std::size_t count = 0;
    std::uint64_t seed = 0;
};
int cmd_baseline(const BaselineOptions& opt, std::ostream& out, std::ostream& err);

// Word tokens of an aligned sequence, one per word (syllable pairs collapse).
std::vector<std::string> word_stream(const AlignedSequence& seq);

} // namespace lyromel
