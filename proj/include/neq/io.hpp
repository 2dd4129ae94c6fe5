#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "neq/pruning.hpp"
#include "neq/trainer.hpp"

namespace neq {

// Write-to-temp-then-rename so readers never observe partial artifacts.
void atomic_write_file(const std::string& path, const std::string& content);

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t fnv1a64_file(const std::string& path);

std::string format_real(double v);  // shortest 17-significant-digit form

std::string ber_csv(const std::vector<BerPoint>& points);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string prune_layers_csv(const PruneReport& report);
std::string prune_ber_csv(const PruneReport& report);

struct SvgSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (x, y)
};

// Log-y line chart; non-positive y values are skipped.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series);

// Flat key=value manifest; keys are emitted in sorted order.
std::string manifest_text(const std::map<std::string, std::string>& entries);

}  // namespace neq
