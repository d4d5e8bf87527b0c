#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lyromel {

// Dimension disagreement between containers that must be shape-matched.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Standard MIDI file could not be decoded; offset is the byte position.
struct MidiError : std::runtime_error {
    MidiError(const std::string& what, std::size_t at)
        : std::runtime_error(what + " (byte offset " + std::to_string(at) + ")"), offset(at) {}
    std::size_t offset;
};

} // namespace lyromel
