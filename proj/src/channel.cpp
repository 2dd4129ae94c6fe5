#include "neq/channel.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace neq {

double Channel::tap_power() const {
    double acc = 0.0;
    for (double t : taps) acc += t * t;
    return acc;
}

std::vector<std::string> Channel::validate() const {
    if (taps.empty()) throw std::invalid_argument("channel has no taps");
    if (pre_cursors < 0) throw std::invalid_argument("negative pre-cursor count");
    if (pre_cursors >= length())
        throw std::invalid_argument("pre-cursor count must be below the tap count");
    std::vector<std::string> warnings;
    double max_mag = 0.0;
    for (double t : taps) max_mag = std::max(max_mag, std::abs(t));
    if (std::abs(main_tap()) < max_mag)
        warnings.push_back("main cursor magnitude is not the maximum tap magnitude");
    return warnings;
}

namespace {

std::string strip(const std::string& line) {
    std::string s = line.substr(0, line.find('#'));
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& tok) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw std::invalid_argument("bad tap value: '" + tok + "'");
    return v;
}

}  // namespace

Channel parse_channel(std::istream& in) {
    Channel ch;
    std::string line;
    bool have_pre = false;
    while (std::getline(in, line)) {
        const std::string tok = strip(line);
        if (tok.empty()) continue;
        if (!have_pre) {
            int pre = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), pre);
            if (ec != std::errc{} || ptr != tok.data() + tok.size() || pre < 0)
                throw std::invalid_argument("bad pre-cursor count: '" + tok + "'");
            ch.pre_cursors = pre;
            have_pre = true;
        } else {
            ch.taps.push_back(parse_real(tok));
        }
    }
    if (!have_pre) throw std::invalid_argument("channel file has no pre-cursor line");
    ch.validate();
    return ch;
}

Channel load_channel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open channel file: " + path);
    try {
        return parse_channel(in);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_channel(std::ostream& out, const Channel& ch) {
    out << ch.pre_cursors << "\n";
    char buf[40];
    for (double t : ch.taps) {
        std::snprintf(buf, sizeof buf, "%.17g", t);
        out << buf << "\n";
    }
}

void save_channel(const std::string& path, const Channel& ch) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write channel file: " + path);
    write_channel(out, ch);
}

}  // namespace neq
