#include <doctest.h>

#include <vector>

#include "lyromel/errors.hpp"
#include "lyromel/midi.hpp"
#include "lyromel/rng.hpp"

using namespace lyromel;

namespace {

// Minimal hand-assembled SMF builder for parser edge cases.
struct RawBuilder {
    std::vector<std::uint8_t> track;

    void delta(std::uint32_t v) {
        std::uint8_t buf[4];
        int n = 0;
        do {
            buf[n++] = v & 0x7f;
            v >>= 7;
        } while (v);
        for (int i = n - 1; i >= 0; --i) track.push_back(buf[i] | (i ? 0x80 : 0x00));
    }
    void note_on(std::uint8_t key) { track.insert(track.end(), {0x90, key, 100}); }
    void note_off(std::uint8_t key) { track.insert(track.end(), {0x80, key, 0}); }
    void lyric(const std::string& text) {
        track.insert(track.end(), {0xff, 0x05, static_cast<std::uint8_t>(text.size())});
        track.insert(track.end(), text.begin(), text.end());
    }
    void tempo(std::uint32_t us) {
        track.insert(track.end(),
                     {0xff, 0x51, 0x03, static_cast<std::uint8_t>(us >> 16),
                      static_cast<std::uint8_t>(us >> 8), static_cast<std::uint8_t>(us)});
    }

    std::vector<std::uint8_t> file(std::uint16_t division = 480) {
        delta(0);
        track.insert(track.end(), {0xff, 0x2f, 0x00});
        std::vector<std::uint8_t> out{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1,
                                      static_cast<std::uint8_t>(division >> 8),
                                      static_cast<std::uint8_t>(division & 0xff),
                                      'M', 'T', 'r', 'k'};
        const auto len = static_cast<std::uint32_t>(track.size());
        out.push_back(len >> 24);
        out.push_back((len >> 16) & 0xff);
        out.push_back((len >> 8) & 0xff);
        out.push_back(len & 0xff);
        out.insert(out.end(), track.begin(), track.end());
        return out;
    }
};

std::vector<NoteTriplet> random_triplets(std::size_t n, Rng& rng) {
    std::vector<NoteTriplet> notes(n);
    for (std::size_t i = 0; i < n; ++i) {
        notes[i].midi = static_cast<int>(kMidiMin + rng.uniform_index(88));
        notes[i].duration = kDurationValues[rng.uniform_index(kDurationValues.size())];
        notes[i].rest = i == 0 ? 0.0 : kRestValues[rng.uniform_index(kRestValues.size())];
    }
    return notes;
}

} // namespace

TEST_CASE("parse_midi extracts syllable-attached notes with the right pitch") {
    RawBuilder b;
    b.delta(0);
    b.tempo(500000);  // 120 BPM
    b.delta(0);
    b.lyric("lis-");
    b.delta(0);
    b.note_on(74);  // D5
    b.delta(480);
    b.note_off(74);
    b.delta(0);
    b.lyric("ten");
    b.delta(0);
    b.note_on(72);
    b.delta(240);
    b.note_off(72);
    const auto song = parse_midi(b.file());
    CHECK(song.bpm == doctest::Approx(120.0));
    CHECK(song.lyric_events_present);
    REQUIRE(song.notes.size() == 2);
    CHECK(song.notes[0].midi == 74);
    CHECK(song.notes[0].syllable == "lis");
    CHECK(song.notes[0].word_continues);
    CHECK(song.notes[0].note_on == doctest::Approx(0.0));
    CHECK(song.notes[0].note_off == doctest::Approx(0.5));
    CHECK(song.notes[1].syllable == "ten");
    CHECK_FALSE(song.notes[1].word_continues);

    const auto triplets = song_to_triplets(song, "x");
    REQUIRE(triplets.notes.size() == 2);
    CHECK(triplets.syllables[0].word == "listen");
    CHECK(triplets.syllables[1].word == "listen");
    CHECK(triplets.notes[0].duration == 1.0);
    CHECK(triplets.notes[0].rest == 0.0);
    CHECK(triplets.notes[1].duration == 0.5);
}

TEST_CASE("notes without syllables are skipped; empty files flagged") {
    RawBuilder no_lyrics;
    no_lyrics.delta(0);
    no_lyrics.note_on(60);
    no_lyrics.delta(480);
    no_lyrics.note_off(60);
    const auto song = parse_midi(no_lyrics.file());
    CHECK(song.notes.empty());
    CHECK_FALSE(song.lyric_events_present);

    RawBuilder no_notes;
    no_notes.delta(0);
    no_notes.lyric("la");
    const auto song2 = parse_midi(no_notes.file());
    CHECK(song2.notes.empty());
    CHECK(song2.lyric_events_present);

    // non-ASCII lyric text is not an English syllable
    RawBuilder non_english;
    non_english.delta(0);
    non_english.lyric("\xe3\x81\x82");
    non_english.delta(0);
    non_english.note_on(60);
    non_english.delta(480);
    non_english.note_off(60);
    CHECK(parse_midi(non_english.file()).notes.empty());
}

TEST_CASE("malformed files throw MidiError with a byte offset") {
    std::vector<std::uint8_t> junk{'X', 'Y', 'Z', 'W', 0, 0, 0, 6};
    CHECK_THROWS_AS(parse_midi(junk), MidiError);
    try {
        parse_midi(junk);
    } catch (const MidiError& e) {
        CHECK(e.offset == 0);
    }

    RawBuilder b;
    b.delta(0);
    b.note_on(60);
    auto truncated = b.file();
    truncated.resize(truncated.size() - 3);  // chop the end-of-track event
    CHECK_THROWS_AS(parse_midi(truncated), MidiError);
}

TEST_CASE("first tempo event governs the whole file") {
    RawBuilder b;
    b.delta(0);
    b.tempo(1000000);  // 60 BPM
    b.delta(0);
    b.lyric("la");
    b.delta(0);
    b.note_on(60);
    b.delta(480);
    b.note_off(60);
    b.delta(0);
    b.tempo(250000);  // later tempo change is ignored
    const auto song = parse_midi(b.file());
    CHECK(song.bpm == doctest::Approx(60.0));
    REQUIRE(song.notes.size() == 1);
    CHECK(song.notes[0].note_off == doctest::Approx(1.0));
}

TEST_CASE("writer output parses back to the same triplets") {
    Rng rng(21);
    for (int iter = 0; iter < 50; ++iter) {
        const std::size_t n = 1 + rng.uniform_index(30);
        const auto notes = random_triplets(n, rng);
        std::vector<SyllablePair> syllables;
        for (std::size_t i = 0; i < n; ++i) {
            if (i + 1 < n && rng.uniform() < 0.3) {
                syllables.push_back({"listen", "lis"});
                syllables.push_back({"listen", "ten"});
                ++i;
                continue;
            }
            syllables.push_back({"la", "la"});
        }
        syllables.resize(n, {"la", "la"});

        const auto bytes = write_midi(notes, syllables, 120.0);
        const auto parsed = parse_midi(bytes);
        REQUIRE(parsed.notes.size() == n);
        const auto triplets = song_to_triplets(parsed, "roundtrip");
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(triplets.notes[i] == notes[i]);
            CHECK(triplets.syllables[i] == syllables[i]);
        }
    }
}

TEST_CASE("writer validates its inputs") {
    std::vector<NoteTriplet> notes(2);
    std::vector<SyllablePair> syllables(1);
    CHECK_THROWS_AS(write_midi(notes, syllables, 120.0), std::invalid_argument);
}
