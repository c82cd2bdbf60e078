#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noiselab {

// Locale-independent number formatting and parsing. Shortest round-trip
// decimal text is used everywhere a value must survive save/load exactly;
// fixed-precision variants serve the human-facing tables and plots.
std::string format_double(double value);
std::string format_fixed(double value, int precision);
std::string format_u64(std::uint64_t value);

// Parsers throw IngestError naming `where` on malformed input.
double parse_double(std::string_view text, std::string_view where);
std::int64_t parse_int(std::string_view text, std::string_view where);
std::uint64_t parse_u64(std::string_view text, std::string_view where);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view line, char sep);

// Reads a whole file; throws IngestError when missing or unreadable.
std::string read_text_file(const std::string& path);
// Writes atomically enough for our purposes; throws IoError on failure.
void write_text_file(const std::string& path, std::string_view content);

} // namespace noiselab
