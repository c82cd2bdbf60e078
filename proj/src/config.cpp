#include "noiselab/config.hpp"

#include <algorithm>

#include "noiselab/errors.hpp"
#include "noiselab/util.hpp"

namespace noiselab {

KvConfig KvConfig::parse_file(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IngestError& err) {
        throw ConfigError(err.what());
    }
    return parse_text(text, path);
}

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig config;
    config.origin_ = origin;
    std::string section;
    std::size_t line_no = 0;
    for (auto raw_line : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw_line);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        const std::string where = origin + ": line " + format_u64(line_no);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(where + ": malformed section header");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(where + ": empty key");
        }
        const std::string full_key =
            section.empty() ? std::string(key) : section + "." + std::string(key);
        if (config.entries_.contains(full_key)) {
            throw ConfigError(where + ": duplicate key '" + full_key + "'");
        }
        config.entries_[full_key] = std::string(value);
    }
    return config;
}

bool KvConfig::has(const std::string& key) const {
    return entries_.contains(key);
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return parse_double(it->second, origin_);
    } catch (const IngestError&) {
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: " +
                          it->second);
    }
}

std::uint64_t KvConfig::get_u64(const std::string& key,
                                std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return parse_u64(it->second, origin_);
    } catch (const IngestError&) {
        throw ConfigError(origin_ + ": key '" + key +
                          "' is not an unsigned integer: " + it->second);
    }
}

std::string KvConfig::require_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

std::uint64_t KvConfig::require_u64(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    try {
        return parse_u64(it->second, origin_);
    } catch (const IngestError&) {
        throw ConfigError(origin_ + ": key '" + key +
                          "' is not an unsigned integer: " + it->second);
    }
}

void KvConfig::check_known(std::span<const std::string_view> allowed) const {
    for (const auto& [key, value] : entries_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(origin_ + ": unknown key '" + key + "'");
        }
    }
}

void KvConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

} // namespace noiselab
