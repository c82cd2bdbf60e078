#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>

namespace noiselab {

// Plain-text `key = value` configuration with `[section]` headers.
// Keys are addressed as "section.key". Unknown and duplicate keys are hard
// errors so typos never silently fall back to defaults.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_text(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    // Missing key -> ConfigError naming it.
    std::string require_string(const std::string& key) const;
    std::uint64_t require_u64(const std::string& key) const;

    // First key not in `allowed` -> ConfigError naming it.
    void check_known(std::span<const std::string_view> allowed) const;

    void set(const std::string& key, const std::string& value);

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string origin_ = "<config>";
};

} // namespace noiselab
