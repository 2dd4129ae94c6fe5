#include "neq/modulation.hpp"

#include <bit>
#include <stdexcept>

namespace neq {

Modulation Modulation::pam2() { return Modulation{2, {-1.0, 1.0}}; }

Modulation Modulation::pam4() { return Modulation{4, {-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0}}; }

Modulation Modulation::by_order(int order) {
    if (order == 2) return pam2();
    if (order == 4) return pam4();
    throw std::invalid_argument("modulation order must be 2 or 4");
}

double Modulation::mean_level_power() const {
    double acc = 0.0;
    for (double l : levels) acc += l * l;
    return acc / static_cast<double>(levels.size());
}

int gray_bit_distance(int a, int b) {
    return std::popcount(gray_code(static_cast<std::uint32_t>(a)) ^
                         gray_code(static_cast<std::uint32_t>(b)));
}

int slice_index(const Modulation& mod, double value) {
    int best = 0;
    double best_dist = std::abs(value - mod.levels[0]);
    for (int i = 1; i < mod.order; ++i) {
        const double d = std::abs(value - mod.levels[static_cast<std::size_t>(i)]);
        if (d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    return best;
}

}  // namespace neq
