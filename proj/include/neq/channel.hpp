#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neq {

// Discrete-time impulse response. taps[pre_cursors] is the main cursor.
struct Channel {
    std::vector<double> taps;
    int pre_cursors = 0;

    int length() const { return static_cast<int>(taps.size()); }
    double main_tap() const { return taps[static_cast<std::size_t>(pre_cursors)]; }
    int post_cursors() const { return length() - pre_cursors - 1; }
    // Sum of squared taps; the received-power factor in the SNR definition.
    double tap_power() const;

    // Throws std::invalid_argument on structural violations; soft issues
    // (main cursor not the largest tap) come back as warnings.
    std::vector<std::string> validate() const;
};

// Text format: first significant line is the pre-cursor count, every following
// line one tap. '#' starts a comment. Round-trips at 17 significant digits.
Channel parse_channel(std::istream& in);
Channel load_channel(const std::string& path);
void write_channel(std::ostream& out, const Channel& ch);
void save_channel(const std::string& path, const Channel& ch);

}  // namespace neq
