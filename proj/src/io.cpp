#include "neq/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace neq {

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " into place");
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string ber_csv(const std::vector<BerPoint>& points) {
    std::string out = "snr_db,equalizer,bit_errors,total_bits,ber,ci_low,ci_high,seed\n";
    for (const BerPoint& p : points) {
        out += format_real(p.snr_db);
        out += ',' + p.equalizer_id;
        out += ',' + std::to_string(p.bit_errors);
        out += ',' + std::to_string(p.total_bits);
        out += ',' + format_real(p.ber);
        out += ',' + format_real(p.ci_low);
        out += ',' + format_real(p.ci_high);
        out += ',' + std::to_string(p.seed) + '\n';
    }
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = "step,loss,valid_ber\n";
    for (const TraceRow& r : rows) {
        out += std::to_string(r.step);
        out += ',' + format_real(r.loss);
        out += ',';
        if (r.has_valid) out += format_real(r.valid_ber);
        out += '\n';
    }
    return out;
}

std::string prune_layers_csv(const PruneReport& report) {
    std::string out = "iteration,global_sparsity,layer_index,layer_sparsity\n";
    for (std::size_t i = 0; i < report.iterations.size(); ++i) {
        const PruneIteration& it = report.iterations[i];
        for (std::size_t l = 0; l < it.layer_sparsity.size(); ++l) {
            out += std::to_string(i + 1);
            out += ',' + format_real(it.global_sparsity);
            out += ',' + std::to_string(l);
            out += ',' + format_real(it.layer_sparsity[l]);
            out += '\n';
        }
    }
    return out;
}

std::string prune_ber_csv(const PruneReport& report) {
    std::string out = "iteration,global_sparsity,normalized_ber\n";
    for (std::size_t i = 0; i < report.iterations.size(); ++i) {
        const PruneIteration& it = report.iterations[i];
        out += std::to_string(i + 1);
        out += ',' + format_real(it.global_sparsity);
        out += ',' + format_real(it.normalized_ber);
        out += '\n';
    }
    return out;
}

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                 "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series) {
    constexpr double width = 820, height = 560;
    constexpr double ml = 80, mr = 170, mt = 50, mb = 60;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const SvgSeries& s : series)
        for (auto [x, y] : s.points) {
            if (y <= 0.0) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 1e-6;
        ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    double ly_min = std::floor(std::log10(ymin));
    double ly_max = std::ceil(std::log10(ymax));
    if (ly_max == ly_min) ly_max += 1.0;

    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double y) {
        return mt + ph - (std::log10(y) - ly_min) / (ly_max - ly_min) * ph;
    };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' font-family='sans-serif' font-size='13'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";

    for (double e = ly_min; e <= ly_max + 0.5; e += 1.0) {
        const double y = py(std::pow(10.0, e));
        svg << "<line x1='" << ml << "' y1='" << y << "' x2='" << ml + pw << "' y2='" << y
            << "' stroke='#dddddd'/>\n";
        svg << "<text x='" << ml - 8 << "' y='" << y + 4 << "' text-anchor='end'>1e" << fmt(e)
            << "</text>\n";
    }
    const int x_ticks = 8;
    for (int i = 0; i <= x_ticks; ++i) {
        const double x = xmin + (xmax - xmin) * i / x_ticks;
        svg << "<line x1='" << px(x) << "' y1='" << mt + ph << "' x2='" << px(x) << "' y2='"
            << mt + ph + 5 << "' stroke='#333333'/>\n";
        svg << "<text x='" << px(x) << "' y='" << mt + ph + 20 << "' text-anchor='middle'>"
            << fmt(x) << "</text>\n";
    }
    svg << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='#333333'/>\n";
    svg << "<text x='" << ml + pw / 2 << "' y='" << height - 18
        << "' text-anchor='middle'>" << x_label << "</text>\n";
    svg << "<text x='22' y='" << mt + ph / 2 << "' text-anchor='middle' transform='rotate(-90 22 "
        << mt + ph / 2 << ")'>" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % kPalette.size()];
        std::ostringstream pts;
        for (auto [x, y] : series[si].points) {
            if (y <= 0.0) continue;
            pts << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
        }
        svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
            << "' stroke-width='2'/>\n";
        for (auto [x, y] : series[si].points) {
            if (y <= 0.0) continue;
            svg << "<circle cx='" << fmt(px(x)) << "' cy='" << fmt(py(y)) << "' r='3' fill='"
                << color << "'/>\n";
        }
        const double lx = ml + pw + 12, ly = mt + 16 + 22.0 * static_cast<double>(si);
        svg << "<line x1='" << lx << "' y1='" << ly - 4 << "' x2='" << lx + 24 << "' y2='" << ly - 4
            << "' stroke='" << color << "' stroke-width='2'/>\n";
        svg << "<text x='" << lx + 30 << "' y='" << ly << "'>" << series[si].name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string manifest_text(const std::map<std::string, std::string>& entries) {
    std::string out = "# neq run manifest\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    return out;
}

}  // namespace neq
