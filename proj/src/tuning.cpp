#include "lyromel/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lyromel {

namespace {

constexpr std::array<int, 7> kMajorIntervals{0, 2, 4, 5, 7, 9, 11};
constexpr std::array<int, 7> kMinorIntervals{0, 2, 3, 5, 7, 8, 10};

// Nearest integer with ties toward the smaller value.
int round_half_down(double x) { return static_cast<int>(std::ceil(x - 0.5)); }

} // namespace

std::array<bool, 12> Scale::member_classes() const {
    std::array<bool, 12> members{};
    const auto& intervals = mode == ScaleMode::major ? kMajorIntervals : kMinorIntervals;
    for (int iv : intervals) members[(root + iv) % 12] = true;
    return members;
}

bool Scale::contains(int midi) const { return member_classes()[((midi % 12) + 12) % 12]; }

NoteTriplet quantize_triplet(const ContinuousTriplet& t) {
    if (!std::isfinite(t.midi) || !std::isfinite(t.duration) || !std::isfinite(t.rest)) {
        throw std::invalid_argument("quantize_triplet: non-finite input");
    }
    NoteTriplet out;
    out.midi = std::clamp(round_half_down(t.midi), kMidiMin, kMidiMax);
    out.duration = quantize_to_set(t.duration, kDurationValues);
    out.rest = quantize_to_set(t.rest, kRestValues);
    return out;
}

Scale detect_scale(std::span<const NoteTriplet> notes) {
    if (notes.empty()) throw std::invalid_argument("detect_scale: empty sequence");
    std::array<int, 12> class_counts{};
    for (const auto& n : notes) ++class_counts[((n.midi % 12) + 12) % 12];

    Scale best;
    int best_count = -1;
    // Candidate order encodes the tie-break: lower root first, major before minor.
    for (int root = 0; root < 12; ++root) {
        for (ScaleMode mode : {ScaleMode::major, ScaleMode::natural_minor}) {
            const Scale candidate{root, mode};
            const auto members = candidate.member_classes();
            int count = 0;
            for (int pc = 0; pc < 12; ++pc) {
                if (members[pc]) count += class_counts[pc];
            }
            if (count > best_count) {
                best_count = count;
                best = candidate;
            }
        }
    }
    return best;
}

std::vector<NoteTriplet> constrain_to_scale(std::span<const NoteTriplet> notes, const Scale& scale) {
    const auto members = scale.member_classes();
    std::vector<NoteTriplet> out(notes.begin(), notes.end());
    for (auto& n : out) {
        if (members[((n.midi % 12) + 12) % 12]) continue;
        for (int d = 1; d <= 12; ++d) {
            const int down = n.midi - d;
            const int up = n.midi + d;
            if (down >= kMidiMin && members[((down % 12) + 12) % 12]) {
                n.midi = down;
                break;
            }
            if (up <= kMidiMax && members[((up % 12) + 12) % 12]) {
                n.midi = up;
                break;
            }
        }
    }
    return out;
}

std::vector<NoteTriplet> tune_sequence(std::span<const ContinuousTriplet> raw) {
    std::vector<NoteTriplet> quantized;
    quantized.reserve(raw.size());
    for (const auto& t : raw) quantized.push_back(quantize_triplet(t));
    return constrain_to_scale(quantized, detect_scale(quantized));
}

} // namespace lyromel
