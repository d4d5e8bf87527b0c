#pragma once

#include <array>
#include <span>
#include <vector>

#include "lyromel/dataset.hpp"

namespace lyromel {

enum class ScaleMode { major, natural_minor };

// A 7-pitch-class standard scale.
struct Scale {
    int root = 0;  // pitch class 0-11
    ScaleMode mode = ScaleMode::major;

    std::array<bool, 12> member_classes() const;
    bool contains(int midi) const;

    friend bool operator==(const Scale&, const Scale&) = default;
};

// A continuous generator output before quantization.
struct ContinuousTriplet {
    double midi = 0.0;
    double duration = 0.0;
    double rest = 0.0;
};

// Nearest legal values; ties toward the smaller; MIDI clamped to [21,108].
NoteTriplet quantize_triplet(const ContinuousTriplet& t);

// The scale (out of 12 major + 12 natural minor) containing the most notes;
// ties broken by lower root, then major before minor.
Scale detect_scale(std::span<const NoteTriplet> notes);

// Out-of-scale notes move to the nearest in-scale MIDI number (ties toward
// the lower pitch); in-scale notes and all durations/rests are untouched.
std::vector<NoteTriplet> constrain_to_scale(std::span<const NoteTriplet> notes, const Scale& scale);

// quantize → detect → constrain, total for every finite input.
std::vector<NoteTriplet> tune_sequence(std::span<const ContinuousTriplet> raw);

} // namespace lyromel
