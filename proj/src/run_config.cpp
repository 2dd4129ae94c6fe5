#include "neq/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace neq {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = trim(line.substr(0, line.find('#')));
        if (s.empty()) continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        cfg.entries_[key] = value;
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

bool RunConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string RunConfig::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::string RunConfig::require_str(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("missing required config key: " + key);
    return it->second;
}

double RunConfig::get_real(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    double v = 0.0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size())
        throw std::invalid_argument("config key " + key + ": bad real '" + it->second + "'");
    return v;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    long long v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size())
        throw std::invalid_argument("config key " + key + ": bad integer '" + it->second + "'");
    return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size())
        throw std::invalid_argument("config key " + key + ": bad unsigned '" + it->second + "'");
    return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw std::invalid_argument("config key " + key + ": bad boolean '" + it->second + "'");
}

std::vector<double> RunConfig::get_real_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_commas(get_str(key, ""))) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size())
            throw std::invalid_argument("config key " + key + ": bad real '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<long long> RunConfig::get_int_list(const std::string& key) const {
    std::vector<long long> out;
    for (const std::string& tok : split_commas(get_str(key, ""))) {
        long long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size())
            throw std::invalid_argument("config key " + key + ": bad integer '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> RunConfig::get_str_list(const std::string& key) const {
    return split_commas(get_str(key, ""));
}

void RunConfig::require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : entries_)
        if (known.count(key) == 0)
            throw std::invalid_argument("unknown config key: " + key);
}

std::string RunConfig::resolved_text() const {
    std::string out;
    for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
    return out;
}

}  // namespace neq
