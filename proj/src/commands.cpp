#include "lyromel/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "lyromel/midi.hpp"

namespace lyromel {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

json triplets_to_json(std::span<const NoteTriplet> notes) {
    json arr = json::array();
    for (const auto& n : notes) arr.push_back({n.midi, n.duration, n.rest});
    return arr;
}

json continuous_to_json(std::span<const ContinuousTriplet> notes) {
    json arr = json::array();
    for (const auto& n : notes) arr.push_back({n.midi, n.duration, n.rest});
    return arr;
}

struct LoadedEmbeddings {
    EmbeddingTable words, syllables;
};

LoadedEmbeddings load_embeddings(const fs::path& prefix) {
    LoadedEmbeddings t;
    t.words = load_embedding_table(prefix.string() + ".words.vec");
    t.syllables = load_embedding_table(prefix.string() + ".syllables.vec");
    return t;
}

int fail(std::ostream& err, const std::string& message) {
    err << "error: " << message << '\n';
    return 1;
}

} // namespace

namespace {

std::vector<std::string> words_from_pairs(std::span<const SyllablePair> pairs) {
    std::vector<std::string> words;
    std::size_t i = 0;
    const std::size_t n = pairs.size();
    while (i < n) {
        const std::string& word = pairs[i].word;
        std::string concat = pairs[i].syllable;
        std::size_t last = i;
        while (concat.size() < word.size() && last + 1 < n && pairs[last + 1].word == word) {
            ++last;
            concat += pairs[last].syllable;
        }
        words.push_back(word);
        i = last + 1;
    }
    return words;
}

} // namespace

std::vector<std::string> word_stream(const AlignedSequence& seq) {
    return words_from_pairs(seq.syllables);
}

// ---- build-dataset ---------------------------------------------------------------

int cmd_build_dataset(const BuildDatasetOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> files;
    if (!fs::is_directory(opt.input_dir)) {
        return fail(err, "input directory " + opt.input_dir.string() + " does not exist");
    }
    for (const auto& entry : fs::directory_iterator(opt.input_dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".mid" || ext == ".midi" || ext == ".smf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());  // deterministic merge order

    std::vector<AlignedSequence> dataset;
    std::vector<std::string> failures;
    std::size_t parsed_files = 0;
    for (const auto& file : files) {
        try {
            const auto bytes = read_file_bytes(file);
            const ParsedSong song = parse_midi(bytes);
            ++parsed_files;
            if (song.notes.empty()) {
                if (!song.lyric_events_present) {
                    out << file.filename().string() << ": no lyric events, skipped\n";
                }
                continue;
            }
            const auto triplets = song_to_triplets(song, file.filename().string());
            for (auto& seq : extract_sequences(triplets)) dataset.push_back(std::move(seq));
        } catch (const std::exception& e) {
            failures.push_back(file.filename().string() + ": " + e.what());
        }
    }

    if (parsed_files == 0) {
        err << "error: no parseable MIDI files in " << opt.input_dir.string() << " ("
            << files.size() << " candidates)\n";
        for (const auto& f : failures) err << "  " << f << '\n';
        return 1;
    }
    for (const auto& f : failures) out << "skipped " << f << '\n';
    if (dataset.empty()) {
        return fail(err, "no 20-note aligned sequences found in " + opt.input_dir.string());
    }

    {
        std::ostringstream ss;
        for (const auto& seq : dataset) {
            json syllables = json::array();
            for (const auto& p : seq.syllables) syllables.push_back({p.word, p.syllable});
            ss << json{{"source_id", seq.source_id},
                       {"syllables", syllables},
                       {"notes", triplets_to_json(seq.notes)}}
                      .dump()
               << '\n';
        }
        atomic_write(opt.output, ss.str());
    }

    const auto hist = compute_histograms(dataset);
    {
        json j;
        json midi = json::array();
        for (const auto& [k, v] : hist.midi) midi.push_back({k, v});
        json dur = json::array();
        for (const auto& [k, v] : hist.duration) dur.push_back({k, v});
        json rest = json::array();
        for (const auto& [k, v] : hist.rest) rest.push_back({k, v});
        j["midi"] = midi;
        j["duration"] = dur;
        j["rest"] = rest;
        atomic_write(opt.output.string() + ".hist.json", j.dump(2) + "\n");
    }

    DatasetSplit split;
    std::string warning;
    if (dataset.size() >= 10) {
        split = split_dataset(dataset.size(), opt.seed);
    } else {
        for (std::size_t i = 0; i < dataset.size(); ++i) split.train.push_back(i);
        warning = "dataset smaller than 10 sequences; 0.8/0.1/0.1 split skipped";
        out << "warning: " << warning << '\n';
    }
    {
        json j{{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
        if (!warning.empty()) j["warning"] = warning;
        atomic_write(opt.output.string() + ".split.json", j.dump(2) + "\n");
    }

    out << "dataset: " << dataset.size() << " sequences from " << parsed_files << " files ("
        << failures.size() << " failed)\n";
    return 0;
}

// ---- train-embeddings --------------------------------------------------------------

int cmd_train_embeddings(const TrainEmbeddingsOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<std::vector<std::string>> word_sentences, syllable_sentences;
    if (!opt.text_file.empty()) {
        std::ifstream is(opt.text_file);
        if (!is) return fail(err, "cannot open " + opt.text_file.string());
        std::stringstream ss;
        ss << is.rdbuf();
        for (const auto& sentence : tokenize(ss.str())) {
            std::vector<std::string> syllables;
            for (const auto& pair : sentence.pairs) syllables.push_back(pair.syllable);
            word_sentences.push_back(words_from_pairs(sentence.pairs));
            syllable_sentences.push_back(std::move(syllables));
        }
    } else {
        const auto dataset = load_dataset_jsonl(opt.dataset);
        for (const auto& seq : dataset) {
            word_sentences.push_back(word_stream(seq));
            std::vector<std::string> syllables;
            for (const auto& p : seq.syllables) syllables.push_back(p.syllable);
            syllable_sentences.push_back(std::move(syllables));
        }
    }
    if (word_sentences.empty()) return fail(err, "no tokens to train on");

    SkipgramConfig config;
    config.seed = opt.seed;
    const auto words = train_skipgram(word_sentences, config);
    config.seed = derive_seed(opt.seed, 1);
    const auto syllables = train_skipgram(syllable_sentences, config);

    {
        std::ostringstream ss;
        char buf[32];
        for (const auto& [token, vec] : words.vocab) {
            ss << token;
            for (double x : vec) {
                std::snprintf(buf, sizeof buf, "%.17g", x);
                ss << ' ' << buf;
            }
            ss << '\n';
        }
        atomic_write(opt.out_prefix.string() + ".words.vec", ss.str());
    }
    {
        std::ostringstream ss;
        char buf[32];
        for (const auto& [token, vec] : syllables.vocab) {
            ss << token;
            for (double x : vec) {
                std::snprintf(buf, sizeof buf, "%.17g", x);
                ss << ' ' << buf;
            }
            ss << '\n';
        }
        atomic_write(opt.out_prefix.string() + ".syllables.vec", ss.str());
    }
    out << "embeddings: " << words.vocab.size() << " words, " << syllables.vocab.size()
        << " syllables\n";
    return 0;
}

// ---- train ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
    const auto dataset = load_dataset_jsonl(opt.dataset);
    const auto split = load_split_json(opt.dataset.string() + ".split.json");
    if (split.train.empty() || split.validation.empty()) {
        return fail(err, "dataset split has an empty train or validation part");
    }
    const auto tables = load_embeddings(opt.embeddings_prefix);
    const TrainResult result =
        train_gan(dataset, split, tables.words, tables.syllables, opt.config, opt.out_dir, &out);
    out << "selected epoch " << result.selected_epoch << " (mmd2 "
        << format_real(result.history[result.selected_epoch - 1].mmd2) << ")\n";
    return 0;
}

// ---- generate ------------------------------------------------------------------------

int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err) {
    if (!fs::exists(opt.checkpoint)) {
        return fail(err, "checkpoint " + opt.checkpoint.string() + " does not exist");
    }
    const GanCheckpoint ckpt = load_gan_checkpoint(opt.checkpoint);
    const auto tables = load_embeddings(opt.embeddings_prefix);

    std::string lyrics = opt.lyrics;
    if (!opt.lyrics_file.empty()) {
        std::ifstream is(opt.lyrics_file);
        if (!is) return fail(err, "cannot open " + opt.lyrics_file.string());
        std::stringstream ss;
        ss << is.rdbuf();
        lyrics = ss.str();
    }

    std::vector<SyllablePair> pairs;
    for (const auto& sentence : tokenize(lyrics)) {
        for (const auto& p : sentence.pairs) pairs.push_back(p);
    }
    if (pairs.empty()) return fail(err, "lyrics contain no usable syllables");

    bool padded = false, truncated = false;
    if (pairs.size() < kSequenceLength) {
        padded = true;
        while (pairs.size() < kSequenceLength) pairs.push_back(pairs.back());
    } else if (pairs.size() > kSequenceLength) {
        truncated = true;
        out << "warning: lyrics tokenize to " << pairs.size() << " syllables; truncating to "
            << kSequenceLength << '\n';
        pairs.resize(kSequenceLength);
    }

    AlignedSequence aligned;
    aligned.syllables = pairs;
    aligned.notes.resize(kSequenceLength);
    const Matrix embeds = sequence_embeddings(aligned, tables.words, tables.syllables);

    fs::create_directories(opt.out_dir);
    json dump;
    dump["lyrics"] = lyrics;
    dump["padded"] = padded;
    dump["truncated"] = truncated;
    json syllables = json::array();
    for (const auto& p : pairs) syllables.push_back({p.word, p.syllable});
    dump["syllables"] = syllables;
    json melodies = json::array();

    for (std::size_t c = 0; c < opt.count; ++c) {
        Rng rng(derive_seed(opt.seed, c));
        std::vector<ContinuousTriplet> raw;
        Sequence tuned = generate_tuned(ckpt.generator, ckpt.config, embeds, rng, &raw);
        tuned.front().rest = 0.0;  // leading silence is not an attribute of the first note

        char name[32];
        std::snprintf(name, sizeof name, "melody_%03zu.mid", c);
        const auto bytes = write_midi(tuned, pairs, 120.0);
        atomic_write(opt.out_dir / name,
                     std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));

        json melody;
        melody["midi_file"] = name;
        melody["tuned"] = triplets_to_json(tuned);
        if (opt.emit_raw) melody["raw"] = continuous_to_json(raw);
        melodies.push_back(std::move(melody));
    }
    dump["melodies"] = melodies;
    atomic_write(opt.out_dir / "generation.json", dump.dump(2) + "\n");
    out << "wrote " << opt.count << " melodies to " << opt.out_dir.string() << '\n';
    return 0;
}

// ---- evaluate ------------------------------------------------------------------------

namespace {

json metrics_to_json(const MetricsRow& m) {
    return json{{"midi_span", m.midi_span},
                {"three_gram_reps", m.three_gram_reps},
                {"two_gram_reps", m.two_gram_reps},
                {"unique_midi", m.unique_midi},
                {"notes_without_rest", m.notes_without_rest},
                {"avg_rest", m.avg_rest},
                {"song_length", m.song_length}};
}

json distribution_to_json(const ShuffleDistribution& d) {
    return json{{"mean", d.mean}, {"median", d.median}, {"q1", d.q1}, {"q3", d.q3}};
}

std::string conditioning_csv(const ConditioningResult& r) {
    std::ostringstream ss;
    ss << "statistic,value\n";
    ss << "d," << format_real(r.d) << '\n';
    auto rows = [&](const char* name, const ShuffleDistribution& d) {
        ss << name << "_mean," << format_real(d.mean) << '\n';
        ss << name << "_q1," << format_real(d.q1) << '\n';
        ss << name << "_median," << format_real(d.median) << '\n';
        ss << name << "_q3," << format_real(d.q3) << '\n';
    };
    rows("rs", r.rs);
    rows("rn", r.rn);
    rows("rns", r.rns);
    return ss.str();
}

Matrix attribute_matrix(std::span<const Sequence> sequences, bool rests) {
    Matrix out(sequences.size(), kSequenceLength);
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        for (std::size_t t = 0; t < kSequenceLength; ++t) {
            out(i, t) = rests ? sequences[i][t].rest : sequences[i][t].duration;
        }
    }
    return out;
}

} // namespace

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
    if (!fs::exists(opt.checkpoint)) {
        return fail(err, "checkpoint " + opt.checkpoint.string() + " does not exist");
    }
    const auto dataset = load_dataset_jsonl(opt.dataset);
    const auto split = load_split_json(opt.dataset.string() + ".split.json");
    if (split.test.empty()) return fail(err, "dataset split has an empty test part");
    const GanCheckpoint ckpt = load_gan_checkpoint(opt.checkpoint);
    const auto tables = load_embeddings(opt.embeddings_prefix);

    std::vector<Sequence> ground_truth;
    ground_truth.reserve(split.test.size());
    for (std::size_t idx : split.test) ground_truth.push_back(dataset[idx].notes);

    // One generated melody per test lyrics.
    std::vector<Sequence> model_tuned, model_unconstrained;
    model_tuned.reserve(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const auto& seq = dataset[split.test[i]];
        const Matrix embeds = sequence_embeddings(seq, tables.words, tables.syllables);
        Rng rng(derive_seed(opt.seed, (1u << 24) + i));
        std::vector<ContinuousTriplet> raw;
        model_tuned.push_back(generate_tuned(ckpt.generator, ckpt.config, embeds, rng, &raw));
        Sequence quantized(raw.size());
        for (std::size_t t = 0; t < raw.size(); ++t) quantized[t] = quantize_triplet(raw[t]);
        model_unconstrained.push_back(std::move(quantized));
    }

    const auto hist = compute_histograms(dataset);
    const auto baseline = sample_baseline(hist, split.test.size(), derive_seed(opt.seed, 2));

    const MetricsRow gt_metrics = music_metrics(ground_truth);
    const MetricsRow model_metrics = music_metrics(model_tuned);
    const MetricsRow model_uncons_metrics = music_metrics(model_unconstrained);
    const MetricsRow baseline_metrics = music_metrics(baseline);

    const auto gt_trans = transition_distribution(ground_truth);
    const auto model_trans = transition_distribution(model_tuned);
    const auto baseline_trans = transition_distribution(baseline);

    const Matrix gt_flat = flatten_sequences(ground_truth);
    const double mmd_model = mmd2_unbiased(flatten_sequences(model_tuned), gt_flat);
    const double mmd_baseline = mmd2_unbiased(flatten_sequences(baseline), gt_flat);

    const auto cond_duration =
        conditioning_distance(attribute_matrix(ground_truth, false),
                              attribute_matrix(model_tuned, false), opt.shuffles,
                              derive_seed(opt.seed, 3));
    const auto cond_rest = conditioning_distance(attribute_matrix(ground_truth, true),
                                                 attribute_matrix(model_tuned, true), opt.shuffles,
                                                 derive_seed(opt.seed, 4));

    fs::create_directories(opt.out_dir);
    {
        json report;
        report["test_sequences"] = split.test.size();
        report["metrics"] = {{"ground_truth", metrics_to_json(gt_metrics)},
                             {"model", metrics_to_json(model_metrics)},
                             {"model_unconstrained", metrics_to_json(model_uncons_metrics)},
                             {"baseline", metrics_to_json(baseline_metrics)}};
        auto trans_json = [](const std::map<int, double>& t) {
            json arr = json::array();
            for (const auto& [delta, p] : t) arr.push_back({delta, p});
            return arr;
        };
        report["transitions"] = {{"ground_truth", trans_json(gt_trans)},
                                 {"model", trans_json(model_trans)},
                                 {"baseline", trans_json(baseline_trans)}};
        report["mmd2"] = {{"model_vs_test", mmd_model}, {"baseline_vs_test", mmd_baseline}};
        report["conditioning"] = {
            {"duration",
             {{"d", cond_duration.d},
              {"rs", distribution_to_json(cond_duration.rs)},
              {"rn", distribution_to_json(cond_duration.rn)},
              {"rns", distribution_to_json(cond_duration.rns)}}},
            {"rest",
             {{"d", cond_rest.d},
              {"rs", distribution_to_json(cond_rest.rs)},
              {"rn", distribution_to_json(cond_rest.rn)},
              {"rns", distribution_to_json(cond_rest.rns)}}}};
        atomic_write(opt.out_dir / "report.json", report.dump(2) + "\n");
    }
    {
        std::ostringstream ss;
        ss << "metric,ground_truth,model,model_unconstrained,baseline\n";
        auto row = [&](const char* name, auto get) {
            ss << name << ',' << format_real(get(gt_metrics)) << ',' << format_real(get(model_metrics))
               << ',' << format_real(get(model_uncons_metrics)) << ','
               << format_real(get(baseline_metrics)) << '\n';
        };
        row("midi_span", [](const MetricsRow& m) { return m.midi_span; });
        row("three_gram_reps", [](const MetricsRow& m) { return m.three_gram_reps; });
        row("two_gram_reps", [](const MetricsRow& m) { return m.two_gram_reps; });
        row("unique_midi", [](const MetricsRow& m) { return m.unique_midi; });
        row("notes_without_rest", [](const MetricsRow& m) { return m.notes_without_rest; });
        row("avg_rest", [](const MetricsRow& m) { return m.avg_rest; });
        row("song_length", [](const MetricsRow& m) { return m.song_length; });
        atomic_write(opt.out_dir / "metrics.csv", ss.str());
    }
    {
        std::map<int, bool> deltas;
        for (const auto& [d, _] : gt_trans) deltas[d] = true;
        for (const auto& [d, _] : model_trans) deltas[d] = true;
        for (const auto& [d, _] : baseline_trans) deltas[d] = true;
        auto get = [](const std::map<int, double>& t, int d) {
            auto it = t.find(d);
            return it == t.end() ? 0.0 : it->second;
        };
        std::ostringstream ss;
        ss << "delta,ground_truth,model,baseline\n";
        for (const auto& [d, _] : deltas) {
            ss << d << ',' << format_real(get(gt_trans, d)) << ',' << format_real(get(model_trans, d))
               << ',' << format_real(get(baseline_trans, d)) << '\n';
        }
        atomic_write(opt.out_dir / "transitions.csv", ss.str());
    }
    atomic_write(opt.out_dir / "conditioning_duration.csv", conditioning_csv(cond_duration));
    atomic_write(opt.out_dir / "conditioning_rest.csv", conditioning_csv(cond_rest));

    out << "evaluated " << split.test.size() << " test lyrics; mmd2 model "
        << format_real(mmd_model) << " baseline " << format_real(mmd_baseline) << '\n';
    return 0;
}

// ---- baseline ------------------------------------------------------------------------

int cmd_baseline(const BaselineOptions& opt, std::ostream& out, std::ostream& err) {
    const auto dataset = load_dataset_jsonl(opt.dataset);
    if (dataset.empty()) return fail(err, "dataset " + opt.dataset.string() + " is empty");
    const auto hist = compute_histograms(dataset);
    const auto sequences = sample_baseline(hist, opt.count, opt.seed);

    std::ostringstream ss;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        ss << json{{"source_id", "baseline-" + std::to_string(i)},
                   {"notes", triplets_to_json(sequences[i])}}
                  .dump()
           << '\n';
    }
    atomic_write(opt.output, ss.str());
    out << "wrote " << sequences.size() << " baseline sequences\n";
    return 0;
}

} // namespace lyromel
