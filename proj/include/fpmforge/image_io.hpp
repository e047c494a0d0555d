#pragma once

#include <filesystem>
#include <string_view>

#include "fpmforge/core.hpp"

namespace fpmforge {

/// Writes raw counts as a 16-bit grayscale PNG. Data with fewer bits is
/// left-shifted so the full scale maps to the top of the 16-bit range.
void save_png16(const std::filesystem::path& path, const Image2D& raw);

/// Reads a grayscale PNG (8 or 16 bit) and right-shifts it back to
/// `bit_depth` raw counts.
Image2D load_png16(const std::filesystem::path& path, int bit_depth);

/// 8-bit grayscale PNG of a [0, 1] image (values are clamped).
void save_png8(const std::filesystem::path& path, const Grid<double>& unit);

/// Writes `contents` to `path` through a sibling temporary and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace fpmforge
