#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lyromel/dataset.hpp"

namespace lyromel {

// One syllable-attached note from a Standard MIDI File, in seconds.
struct ParsedNote {
    std::string syllable;        // cleaned, lowercase token
    bool word_continues = false; // trailing '-' in the lyric event
    int midi = 0;
    double note_on = 0.0;
    double note_off = 0.0;
};

struct ParsedSong {
    std::vector<ParsedNote> notes;
    double bpm = 120.0;
    // Distinguishes "no lyric events at all" from "lyrics present but nothing
    // matched an English syllable".
    bool lyric_events_present = false;
};

// Parses SMF format 0/1 with lyric meta-events 0x05 (text 0x01 fallback).
// Only notes with an attached English syllable are emitted. Malformed input
// throws MidiError with the byte offset.
ParsedSong parse_midi(std::span<const std::uint8_t> bytes);

// Quantizes a parsed song (Tables of legal values, first-note rest = 0) and
// reassembles words from hyphen continuations.
SongTriplets song_to_triplets(const ParsedSong& song, const std::string& source_id);

// Format-0 SMF with one lyric event per note; division 480 ticks per beat.
// Parsing the result recovers the same triplets when the first rest is 0.
std::vector<std::uint8_t> write_midi(std::span<const NoteTriplet> notes,
                                     std::span<const SyllablePair> syllables, double bpm = 120.0);

} // namespace lyromel
