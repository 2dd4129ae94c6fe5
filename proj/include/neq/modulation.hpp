#pragma once

#include <cstdint>
#include <vector>

namespace neq {

// PAM constellation. Level index 0 is the most negative amplitude.
struct Modulation {
    int order = 2;
    std::vector<double> levels;

    static Modulation pam2();
    static Modulation pam4();
    static Modulation by_order(int order);

    int bits_per_symbol() const { return order == 2 ? 1 : 2; }
    // E[level^2] under uniform symbols.
    double mean_level_power() const;
};

// Reflected binary code across ascending levels: PAM4 maps to 00,01,11,10.
inline std::uint32_t gray_code(std::uint32_t i) { return i ^ (i >> 1); }

// Hamming distance between the Gray labels of two level indices.
int gray_bit_distance(int a, int b);

// Nearest-level decision; midpoint ties resolve to the lower index.
int slice_index(const Modulation& mod, double value);

}  // namespace neq
