#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ntkreg {

// 17 significant digits: enough to round-trip any double exactly.
std::string fmt_g17(double v);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex16(std::uint64_t v);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ntkreg
