#pragma once

#include <filesystem>
#include <vector>

#include "csakd/array.hpp"

namespace csakd {

// The universal image carrier: reflectance cube plus its band-center grid.
// Storage is band-major (B, H, W), matching the on-disk raw layout; the
// logical shape reported in metadata is (H, W, B).
struct HyperCube {
  Array data;                     // (B, H, W)
  std::vector<double> wavelengths;  // nm, strictly increasing, size B

  HyperCube() = default;
  HyperCube(Array d, std::vector<double> wl);

  int bands() const { return data.channels(); }
  int height() const { return data.height(); }
  int width() const { return data.width(); }

  void validate() const;  // shape/wavelength/finite invariants
};

// Raw blob IO: little-endian float32, band-major C order.
void write_raw_f32(const std::filesystem::path& path, const Array& a);
Array read_raw_f32(const std::filesystem::path& path, const std::vector<int>& shape);

}  // namespace csakd
