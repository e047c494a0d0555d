#pragma once

#include <filesystem>
#include <iosfwd>

#include "fpmforge/core.hpp"

namespace fpmforge {

/// Raw complex-field dump: "CF2D", u32 width, u32 height, u32 layout, then
/// row-major interleaved (re, im) little-endian float32 pairs.
inline constexpr std::uint32_t kCf2dLayoutInterleaved = 1;

void write_cf2d(std::ostream& out, const ComplexField& field);
ComplexField read_cf2d(std::istream& in, Space space = Space::Spatial);

void save_cf2d(const std::filesystem::path& path, const ComplexField& field);
ComplexField load_cf2d(const std::filesystem::path& path, Space space = Space::Spatial);

}  // namespace fpmforge
