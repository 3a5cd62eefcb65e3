#include "csakd/hypercube.hpp"

#include <cstdint>
#include <fstream>

#include "csakd/errors.hpp"

namespace csakd {

HyperCube::HyperCube(Array d, std::vector<double> wl)
    : data(std::move(d)), wavelengths(std::move(wl)) {
  validate();
}

void HyperCube::validate() const {
  if (data.rank() != 3) throw DataError("HyperCube: rank-3 data expected");
  if (static_cast<int>(wavelengths.size()) != bands())
    throw DataError("HyperCube: wavelength count != band count");
  for (std::size_t i = 1; i < wavelengths.size(); ++i)
    if (!(wavelengths[i] > wavelengths[i - 1]))
      throw DataError("HyperCube: wavelengths not strictly increasing");
  if (!data.all_finite()) throw DataError("HyperCube: non-finite values");
}

void write_raw_f32(const std::filesystem::path& path, const Array& a) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("write_raw_f32: cannot open " + path.string());
  std::vector<float> buf(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) buf[i] = static_cast<float>(a[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw DataError("write_raw_f32: write failed for " + path.string());
}

Array read_raw_f32(const std::filesystem::path& path, const std::vector<int>& shape) {
  Array a(shape);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("read_raw_f32: cannot open " + path.string());
  std::vector<float> buf(a.size());
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
    throw DataError("read_raw_f32: short read from " + path.string());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(buf[i]);
  return a;
}

}  // namespace csakd
