#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace neq {

// Flat key=value configuration. '[section]' headers prefix following keys
// with "section."; '#' starts a comment. Flag overrides replace file values.
class RunConfig {
  public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_real_list(const std::string& key) const;
    std::vector<long long> get_int_list(const std::string& key) const;
    std::vector<std::string> get_str_list(const std::string& key) const;

    // Throws naming the first key outside the allowed set.
    void require_known(const std::set<std::string>& known) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    // Canonical "key = value" dump of the resolved configuration.
    std::string resolved_text() const;

  private:
    std::map<std::string, std::string> entries_;
};

}  // namespace neq
