#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sankofa {

std::string_view trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

/// Lines of a UTF-8 text file without terminators (a trailing newline does not add an empty
/// line; CR before LF is dropped). Throws Error{UnreadableFile}.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Fixed-point decimal text, rounding half away from zero at `decimals` places.
/// The decision is made on the value printed to 12 decimals, so binary noise such as
/// 0.68749999999999996 (for 2.75 / 4 summed in floating point) still rounds to "0.688".
std::string format_half_up(double value, int decimals);
double round_half_up(double value, int decimals);

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform index in [0, n) by rejection; identical on every platform.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

}  // namespace sankofa
