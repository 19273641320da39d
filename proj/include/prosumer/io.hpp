#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace prosumer {

// Shortest round-trip decimal rendering. Keeps every emitted file
// deterministic and exactly re-parseable.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& context);
long parse_long(std::string_view text, const std::string& context);

// Whole-file atomic write: temp file in the same directory, then rename.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a 64-bit, used to checksum agent artifacts.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace prosumer
