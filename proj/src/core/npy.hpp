#pragma once

#include <filesystem>

#include "core/tensor.hpp"

namespace lcam {

// NumPy .npy (format 1.0, little-endian float64, C order) for 2-D maps.
void write_npy(const std::filesystem::path& path, const Map2D& map);
Map2D read_npy(const std::filesystem::path& path);

}  // namespace lcam
