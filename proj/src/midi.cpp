#include "lyromel/midi.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>

#include "lyromel/errors.hpp"

namespace lyromel {

namespace {

constexpr std::uint32_t kTicksPerBeat = 480;
constexpr double kDefaultUsPerBeat = 500000.0;  // 120 BPM

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint8_t peek() const {
        if (pos_ >= data_.size()) throw MidiError("unexpected end of file", pos_);
        return data_[pos_];
    }
    std::uint16_t u16be() {
        need(2);
        std::uint16_t v = (std::uint16_t(data_[pos_]) << 8) | data_[pos_ + 1];
        pos_ += 2;
        return v;
    }
    std::uint32_t u32be() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::uint32_t vlq() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw MidiError("variable-length quantity too long", pos_);
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void skip(std::size_t n) { need(n), pos_ += n; }
    void need(std::size_t n) const {
        if (remaining() < n) throw MidiError("unexpected end of file", pos_);
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

struct RawNote {
    std::uint64_t on_tick = 0, off_tick = 0;
    int midi = 0;
};

struct TrackData {
    std::vector<RawNote> notes;                    // in note-on order
    std::map<std::uint64_t, std::string> lyrics;   // tick -> first 0x05 text
    std::map<std::uint64_t, std::string> texts;    // tick -> first 0x01 text
    std::vector<std::pair<std::uint64_t, std::uint32_t>> tempos;  // tick, us per beat
};

bool ascii_english(const std::string& s) {
    bool has_letter = false;
    for (unsigned char c : s) {
        if (c > 0x7f) return false;
        if (std::isalpha(c)) has_letter = true;
    }
    return has_letter;
}

// Lowercase token of letters and interior apostrophes; returns empty when the
// event is not a usable English syllable.
std::string clean_syllable(const std::string& raw, bool* continues) {
    std::string s = raw;
    // karaoke-style line markers
    while (!s.empty() && (s.front() == '/' || s.front() == '\\')) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    *continues = false;
    if (!s.empty() && s.back() == '-') {
        *continues = true;
        s.pop_back();
    }
    if (!ascii_english(s)) return {};
    std::string out;
    for (char c : s) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (std::isalpha(u)) out.push_back(static_cast<char>(std::tolower(u)));
        else if (c == '\'' && !out.empty()) out.push_back(c);
    }
    while (!out.empty() && out.back() == '\'') out.pop_back();
    return out;
}

TrackData parse_track(ByteReader& r) {
    TrackData track;
    const std::uint32_t length = r.u32be();
    const std::size_t end = r.pos() + length;
    r.need(length);

    std::uint64_t tick = 0;
    std::uint8_t running_status = 0;
    // open note-ons per pitch, FIFO
    std::map<int, std::vector<std::size_t>> open;

    while (r.pos() < end) {
        tick += r.vlq();
        std::uint8_t status = r.peek();
        if (status < 0x80) {
            if (running_status == 0) throw MidiError("data byte without running status", r.pos());
            status = running_status;
        } else {
            r.u8();
            if (status < 0xf0) running_status = status;
        }

        const std::uint8_t type = status & 0xf0;
        if (type == 0x90 || type == 0x80) {
            const std::uint8_t key = r.u8();
            const std::uint8_t vel = r.u8();
            const bool is_on = (type == 0x90 && vel > 0);
            if (is_on) {
                open[key].push_back(track.notes.size());
                track.notes.push_back({tick, 0, key});
            } else {
                auto it = open.find(key);
                if (it != open.end() && !it->second.empty()) {
                    const std::size_t idx = it->second.front();
                    it->second.erase(it->second.begin());
                    track.notes[idx].off_tick = tick;
                }
            }
        } else if (type == 0xa0 || type == 0xb0 || type == 0xe0) {
            r.skip(2);
        } else if (type == 0xc0 || type == 0xd0) {
            r.skip(1);
        } else if (status == 0xf0 || status == 0xf7) {
            r.skip(r.vlq());
        } else if (status == 0xff) {
            const std::uint8_t meta = r.u8();
            const std::uint32_t len = r.vlq();
            auto data = r.bytes(len);
            if (meta == 0x51) {
                if (len != 3) throw MidiError("bad tempo event length", r.pos());
                const std::uint32_t us = (std::uint32_t(data[0]) << 16) |
                                         (std::uint32_t(data[1]) << 8) | data[2];
                track.tempos.emplace_back(tick, us);
            } else if (meta == 0x05 || meta == 0x01) {
                std::string text(reinterpret_cast<const char*>(data.data()), data.size());
                auto& dst = (meta == 0x05) ? track.lyrics : track.texts;
                dst.emplace(tick, std::move(text));  // keep the first at a tick
            } else if (meta == 0x2f) {
                break;
            }
        } else {
            throw MidiError("unsupported status byte", r.pos());
        }
    }
    return track;
}

} // namespace

ParsedSong parse_midi(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.u32be() != 0x4d546864u) throw MidiError("not a MIDI file (missing MThd)", 0);
    if (r.u32be() != 6) throw MidiError("bad MThd length", r.pos());
    const std::uint16_t format = r.u16be();
    if (format > 1) throw MidiError("unsupported MIDI format " + std::to_string(format), r.pos());
    const std::uint16_t ntrks = r.u16be();
    const std::uint16_t division = r.u16be();
    if (division & 0x8000) throw MidiError("SMPTE time division unsupported", r.pos());
    if (division == 0) throw MidiError("zero time division", r.pos());

    std::vector<TrackData> tracks;
    for (std::uint16_t t = 0; t < ntrks; ++t) {
        if (r.u32be() != 0x4d54726bu) throw MidiError("missing MTrk header", r.pos() - 4);
        tracks.push_back(parse_track(r));
    }

    // First tempo event in temporal order governs the whole file.
    double us_per_beat = kDefaultUsPerBeat;
    std::optional<std::uint64_t> best_tick;
    for (const auto& track : tracks) {
        for (const auto& [tick, us] : track.tempos) {
            if (!best_tick || tick < *best_tick) {
                best_tick = tick;
                us_per_beat = us;
            }
        }
    }

    ParsedSong song;
    song.bpm = 60e6 / us_per_beat;
    for (const auto& track : tracks) {
        if (!track.lyrics.empty() || !track.texts.empty()) song.lyric_events_present = true;
    }

    // Candidate track: the one whose own lyric events attach to the most notes.
    struct Attached {
        std::vector<ParsedNote> notes;
    };
    std::optional<Attached> best;
    const double sec_per_tick = us_per_beat / (1e6 * division);
    for (const auto& track : tracks) {
        const auto& events = track.lyrics.empty() ? track.texts : track.lyrics;
        if (events.empty() || track.notes.empty()) continue;
        Attached cur;
        std::uint64_t consumed_tick = ~std::uint64_t{0};
        for (const auto& note : track.notes) {
            if (note.off_tick <= note.on_tick) continue;  // unterminated or empty
            auto it = events.find(note.on_tick);
            if (it == events.end() || note.on_tick == consumed_tick) continue;
            ParsedNote pn;
            pn.syllable = clean_syllable(it->second, &pn.word_continues);
            if (pn.syllable.empty()) continue;
            consumed_tick = note.on_tick;  // one note per lyric event
            pn.midi = note.midi;
            pn.note_on = static_cast<double>(note.on_tick) * sec_per_tick;
            pn.note_off = static_cast<double>(note.off_tick) * sec_per_tick;
            cur.notes.push_back(std::move(pn));
        }
        if (!best || cur.notes.size() > best->notes.size()) best = std::move(cur);
    }
    if (best) song.notes = std::move(best->notes);
    return song;
}

SongTriplets song_to_triplets(const ParsedSong& song, const std::string& source_id) {
    SongTriplets out;
    out.source_id = source_id;
    const std::size_t n = song.notes.size();
    out.notes.reserve(n);
    out.syllables.resize(n);

    for (std::size_t k = 0; k < n; ++k) {
        const auto& pn = song.notes[k];
        NoteTriplet t;
        t.midi = std::clamp(pn.midi, kMidiMin, kMidiMax);
        t.duration = beats_from_seconds(pn.note_off - pn.note_on, song.bpm, AttributeKind::duration);
        t.rest = k == 0 ? 0.0
                        : beats_from_seconds(std::max(0.0, pn.note_on - song.notes[k - 1].note_off),
                                             song.bpm, AttributeKind::rest);
        out.notes.push_back(t);
    }

    // Rebuild words from hyphen continuations.
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::string word = song.notes[j].syllable;
        while (song.notes[j].word_continues && j + 1 < n) {
            ++j;
            word += song.notes[j].syllable;
        }
        for (std::size_t k = i; k <= j; ++k) out.syllables[k] = {word, song.notes[k].syllable};
        i = j + 1;
    }
    return out;
}

// ---- Writer -------------------------------------------------------------------

namespace {

void append_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
    std::uint8_t buf[4];
    int n = 0;
    do {
        buf[n++] = v & 0x7f;
        v >>= 7;
    } while (v);
    for (int i = n - 1; i >= 0; --i) out.push_back(buf[i] | (i ? 0x80 : 0x00));
}

void append_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

struct Event {
    std::uint64_t tick;
    int priority;  // stable order within a tick
    std::vector<std::uint8_t> bytes;
};

// '-' suffixes mark non-final syllables of a word so the parser can
// reassemble it; groups close as soon as the concatenation spells the word.
std::vector<bool> continuation_flags(std::span<const SyllablePair> syllables) {
    const std::size_t n = syllables.size();
    std::vector<bool> continues(n, false);
    std::size_t i = 0;
    while (i < n) {
        const std::string& word = syllables[i].word;
        std::string concat = syllables[i].syllable;
        std::size_t last = i;
        while (concat.size() < word.size() && last + 1 < n && syllables[last + 1].word == word) {
            ++last;
            concat += syllables[last].syllable;
        }
        for (std::size_t k = i; k < last; ++k) continues[k] = true;
        i = last + 1;
    }
    return continues;
}

} // namespace

std::vector<std::uint8_t> write_midi(std::span<const NoteTriplet> notes,
                                     std::span<const SyllablePair> syllables, double bpm) {
    if (notes.size() != syllables.size()) {
        throw std::invalid_argument("write_midi: notes and syllables must align 1:1");
    }
    if (!(bpm > 0.0)) throw std::invalid_argument("write_midi: BPM must be positive");

    std::vector<Event> events;
    const auto us_per_beat = static_cast<std::uint32_t>(std::llround(60e6 / bpm));
    events.push_back({0, 0,
                      {0xff, 0x51, 0x03, static_cast<std::uint8_t>((us_per_beat >> 16) & 0xff),
                       static_cast<std::uint8_t>((us_per_beat >> 8) & 0xff),
                       static_cast<std::uint8_t>(us_per_beat & 0xff)}});

    const std::vector<bool> continues = continuation_flags(syllables);
    std::uint64_t cursor = 0;
    for (std::size_t k = 0; k < notes.size(); ++k) {
        const auto& n = notes[k];
        const auto rest_ticks = static_cast<std::uint64_t>(std::llround(n.rest * kTicksPerBeat));
        const auto dur_ticks = static_cast<std::uint64_t>(std::llround(n.duration * kTicksPerBeat));
        const std::uint64_t on = cursor + rest_ticks;
        const std::uint64_t off = on + dur_ticks;
        cursor = off;

        std::string text = syllables[k].syllable;
        if (continues[k]) text.push_back('-');
        Event lyric{on, 2, {0xff, 0x05}};
        append_vlq(lyric.bytes, static_cast<std::uint32_t>(text.size()));
        lyric.bytes.insert(lyric.bytes.end(), text.begin(), text.end());
        events.push_back(std::move(lyric));

        const auto key = static_cast<std::uint8_t>(n.midi);
        events.push_back({on, 3, {0x90, key, 90}});
        events.push_back({off, 1, {0x80, key, 0}});
    }
    const std::uint64_t end_tick = cursor;
    events.push_back({end_tick, 9, {0xff, 0x2f, 0x00}});

    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.tick != b.tick ? a.tick < b.tick : a.priority < b.priority;
    });

    std::vector<std::uint8_t> track;
    std::uint64_t prev = 0;
    for (const auto& e : events) {
        append_vlq(track, static_cast<std::uint32_t>(e.tick - prev));
        prev = e.tick;
        track.insert(track.end(), e.bytes.begin(), e.bytes.end());
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    append_u32be(out, 6);
    out.insert(out.end(), {0x00, 0x00});  // format 0
    out.insert(out.end(), {0x00, 0x01});  // one track
    out.push_back((kTicksPerBeat >> 8) & 0xff);
    out.push_back(kTicksPerBeat & 0xff);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    append_u32be(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

} // namespace lyromel
