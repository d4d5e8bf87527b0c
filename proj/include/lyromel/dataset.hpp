#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lyromel/rng.hpp"

namespace lyromel {

constexpr int kMidiMin = 21;
constexpr int kMidiMax = 108;
constexpr std::size_t kSequenceLength = 20;

// Legal quantized values (beats).
constexpr std::array<double, 12> kDurationValues{0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4, 6, 8, 16, 32};
constexpr std::array<double, 7> kRestValues{0, 1, 2, 4, 8, 16, 32};

enum class AttributeKind { duration, rest };

// One melody event: pitch, sounded length, preceding silence.
struct NoteTriplet {
    int midi = 60;
    double duration = 1.0;
    double rest = 0.0;

    friend bool operator==(const NoteTriplet&, const NoteTriplet&) = default;
};

struct SyllablePair {
    std::string word;
    std::string syllable;

    friend bool operator==(const SyllablePair&, const SyllablePair&) = default;
};

// The unit of training data: 20 syllables aligned 1:1 with 20 notes.
struct AlignedSequence {
    std::vector<SyllablePair> syllables;
    std::vector<NoteTriplet> notes;
    std::string source_id;

    friend bool operator==(const AlignedSequence&, const AlignedSequence&) = default;
};

// Nearest member of `set`, ties toward the smaller value; inputs beyond the
// extremes clamp to them.
double quantize_to_set(double raw, std::span<const double> set);

// x = φ(t·BPM/60) against the legal value set for the attribute.
double beats_from_seconds(double t_seconds, double bpm, AttributeKind kind);

bool is_legal_duration(double v);
bool is_legal_rest(double v);

// A parsed song after quantization: triplets plus their syllables, in order.
struct SongTriplets {
    std::vector<SyllablePair> syllables;
    std::vector<NoteTriplet> notes;
    std::string source_id;
};

// 0 sequences below 20 notes, 1 for [20,40), 2 for >= 40; contiguous runs
// starting at notes 0 and 20.
std::vector<AlignedSequence> extract_sequences(const SongTriplets& song);

struct AttributeHistograms {
    std::map<int, double> midi;
    std::map<double, double> duration;
    std::map<double, double> rest;
};

AttributeHistograms compute_histograms(std::span<const AlignedSequence> dataset);

struct DatasetSplit {
    std::vector<std::size_t> train, validation, test;  // indices into the dataset
};

// Deterministic 0.8/0.1/0.1 split; requires at least 10 sequences.
DatasetSplit split_dataset(std::size_t dataset_size, std::uint64_t seed);

// JSON-lines dataset IO; reload is bit-exact.
void save_dataset_jsonl(const std::filesystem::path& path, std::span<const AlignedSequence> dataset);
std::vector<AlignedSequence> load_dataset_jsonl(const std::filesystem::path& path);

void save_histograms_json(const std::filesystem::path& path, const AttributeHistograms& h);
AttributeHistograms load_histograms_json(const std::filesystem::path& path);

void save_split_json(const std::filesystem::path& path, const DatasetSplit& split,
                     const std::string& warning = "");
DatasetSplit load_split_json(const std::filesystem::path& path);

} // namespace lyromel
