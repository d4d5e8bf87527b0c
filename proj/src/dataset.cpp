#include "lyromel/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lyromel {

double quantize_to_set(double raw, std::span<const double> set) {
    double best = set.front();
    double best_dist = std::abs(raw - best);
    for (double v : set.subspan(1)) {
        const double d = std::abs(raw - v);
        if (d < best_dist) {  // strict: ties keep the smaller (earlier) value
            best = v;
            best_dist = d;
        }
    }
    return best;
}

double beats_from_seconds(double t_seconds, double bpm, AttributeKind kind) {
    if (!(t_seconds >= 0.0)) throw std::invalid_argument("beats_from_seconds: negative time");
    if (!(bpm > 0.0)) throw std::invalid_argument("beats_from_seconds: BPM must be positive");
    const double raw = t_seconds * bpm / 60.0;
    return kind == AttributeKind::duration ? quantize_to_set(raw, kDurationValues)
                                           : quantize_to_set(raw, kRestValues);
}

bool is_legal_duration(double v) {
    for (double x : kDurationValues)
        if (x == v) return true;
    return false;
}

bool is_legal_rest(double v) {
    for (double x : kRestValues)
        if (x == v) return true;
    return false;
}

std::vector<AlignedSequence> extract_sequences(const SongTriplets& song) {
    const std::size_t n = song.notes.size();
    if (song.syllables.size() != n) throw std::invalid_argument("extract_sequences: misaligned song");
    std::size_t count = 0;
    if (n >= 2 * kSequenceLength) {
        count = 2;
    } else if (n >= kSequenceLength) {
        count = 1;
    }
    std::vector<AlignedSequence> out;
    for (std::size_t s = 0; s < count; ++s) {
        AlignedSequence seq;
        const std::size_t begin = s * kSequenceLength;
        seq.syllables.assign(song.syllables.begin() + begin,
                             song.syllables.begin() + begin + kSequenceLength);
        seq.notes.assign(song.notes.begin() + begin, song.notes.begin() + begin + kSequenceLength);
        seq.source_id = song.source_id + "#" + std::to_string(s);
        out.push_back(std::move(seq));
    }
    return out;
}

AttributeHistograms compute_histograms(std::span<const AlignedSequence> dataset) {
    if (dataset.empty()) throw std::invalid_argument("compute_histograms: empty dataset");
    AttributeHistograms h;
    std::size_t total = 0;
    for (const auto& seq : dataset) {
        for (const auto& note : seq.notes) {
            h.midi[note.midi] += 1.0;
            h.duration[note.duration] += 1.0;
            h.rest[note.rest] += 1.0;
            ++total;
        }
    }
    for (auto& [_, v] : h.midi) v /= static_cast<double>(total);
    for (auto& [_, v] : h.duration) v /= static_cast<double>(total);
    for (auto& [_, v] : h.rest) v /= static_cast<double>(total);
    return h;
}

DatasetSplit split_dataset(std::size_t dataset_size, std::uint64_t seed) {
    if (dataset_size < 10) throw std::invalid_argument("split_dataset: need at least 10 sequences");
    Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(dataset_size);
    const auto n = static_cast<double>(dataset_size);
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * n));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * n));
    DatasetSplit split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test.assign(order.begin() + n_train + n_val, order.end());
    return split;
}

// ---- JSON IO ------------------------------------------------------------------

namespace {

using nlohmann::json;

json sequence_to_json(const AlignedSequence& seq) {
    json syllables = json::array();
    for (const auto& p : seq.syllables) syllables.push_back({p.word, p.syllable});
    json notes = json::array();
    for (const auto& n : seq.notes) notes.push_back({n.midi, n.duration, n.rest});
    return json{{"source_id", seq.source_id}, {"syllables", syllables}, {"notes", notes}};
}

AlignedSequence sequence_from_json(const json& j) {
    AlignedSequence seq;
    seq.source_id = j.at("source_id").get<std::string>();
    for (const auto& p : j.at("syllables")) {
        seq.syllables.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    }
    for (const auto& n : j.at("notes")) {
        seq.notes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<double>()});
    }
    if (seq.syllables.size() != kSequenceLength || seq.notes.size() != kSequenceLength) {
        throw std::runtime_error("dataset: sequence is not 20 syllables / 20 notes");
    }
    return seq;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return is;
}

} // namespace

void save_dataset_jsonl(const std::filesystem::path& path, std::span<const AlignedSequence> dataset) {
    auto os = open_out(path);
    for (const auto& seq : dataset) os << sequence_to_json(seq).dump() << '\n';
}

std::vector<AlignedSequence> load_dataset_jsonl(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::vector<AlignedSequence> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(sequence_from_json(json::parse(line)));
    }
    return out;
}

void save_histograms_json(const std::filesystem::path& path, const AttributeHistograms& h) {
    json j;
    json midi = json::array();
    for (const auto& [k, v] : h.midi) midi.push_back({k, v});
    json dur = json::array();
    for (const auto& [k, v] : h.duration) dur.push_back({k, v});
    json rest = json::array();
    for (const auto& [k, v] : h.rest) rest.push_back({k, v});
    j["midi"] = midi;
    j["duration"] = dur;
    j["rest"] = rest;
    open_out(path) << j.dump(2) << '\n';
}

AttributeHistograms load_histograms_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    json j = json::parse(is);
    AttributeHistograms h;
    for (const auto& e : j.at("midi")) h.midi[e.at(0).get<int>()] = e.at(1).get<double>();
    for (const auto& e : j.at("duration")) h.duration[e.at(0).get<double>()] = e.at(1).get<double>();
    for (const auto& e : j.at("rest")) h.rest[e.at(0).get<double>()] = e.at(1).get<double>();
    return h;
}

void save_split_json(const std::filesystem::path& path, const DatasetSplit& split,
                     const std::string& warning) {
    json j{{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
    if (!warning.empty()) j["warning"] = warning;
    open_out(path) << j.dump(2) << '\n';
}

DatasetSplit load_split_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    json j = json::parse(is);
    DatasetSplit split;
    split.train = j.at("train").get<std::vector<std::size_t>>();
    split.validation = j.at("validation").get<std::vector<std::size_t>>();
    split.test = j.at("test").get<std::vector<std::size_t>>();
    return split;
}

} // namespace lyromel
