#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "csakd/datagen.hpp"
#include "csakd/errors.hpp"
#include "test_helpers.hpp"

using namespace csakd;
using namespace csakd::datagen;

namespace {

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return !sa.empty() && sa == sb;
}

}  // namespace

TEST_CASE("aviris wavelength grid: 172 increasing centers, first at 494.17") {
  auto grid = aviris_wavelength_grid();
  REQUIRE(grid.size() == 172);
  const double step = (2500.0 - 400.0) / 223.0;
  CHECK(grid.front() == doctest::Approx(400.0 + 10.0 * step).epsilon(1e-12));
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("procedural cubes: deterministic, bounded, seed-sensitive") {
  HyperCube a = generate_procedural_cube(7, 32, 32, 172, 5);
  HyperCube b = generate_procedural_cube(7, 32, 32, 172, 5);
  REQUIRE(a.data.shape() == std::vector<int>{172, 32, 32});
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(a.data[i] == b.data[i]);  // bit-exact
    CHECK(a.data[i] >= 0.0);
    CHECK(a.data[i] <= 1000.0);
  }

  HyperCube c = generate_procedural_cube(1, 16, 16, 8, 3);
  HyperCube d = generate_procedural_cube(2, 16, 16, 8, 3);
  bool differs = false;
  for (std::size_t i = 0; i < c.data.size() && !differs; ++i)
    differs = c.data[i] != d.data[i];
  CHECK(differs);

  CHECK_THROWS_AS(generate_procedural_cube(1, 0, 4, 4, 1), DataError);
}

TEST_CASE("procedural cube with one material is the bare signature") {
  HyperCube c = generate_procedural_cube(7, 8, 8, 1, 1);
  const double v0 = c.data.at(0, 0, 0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      CHECK(c.data.at(0, y, x) == doctest::Approx(v0).epsilon(1e-12));
}

TEST_CASE("spectral response: shapes, row sums, constant-spectrum fixpoint") {
  auto grid = aviris_wavelength_grid();
  for (MsiVariant v : {MsiVariant::bands4, MsiVariant::bands6}) {
    SpectralResponse sr = build_spectral_response(grid, v);
    const int mm = v == MsiVariant::bands4 ? 4 : 6;
    REQUIRE(sr.matrix.shape() == std::vector<int>{mm, 172});
    for (int m = 0; m < mm; ++m) {
      double row = 0.0;
      for (int i = 0; i < 172; ++i) row += sr.matrix[m * 172 + i];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  // constant spectrum maps to the same constant in every output band
  SpectralResponse sr = build_spectral_response(grid, MsiVariant::bands4);
  Array cd({172, 4, 4});
  cd.fill(7.5);
  HyperCube cube(std::move(cd), grid);
  HyperCube out = spectral_downsample(cube, sr);
  REQUIRE(out.data.shape() == std::vector<int>{4, 4, 4});
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("spectral_downsample hand case and full-size shape") {
  // 1x1 pixel, bands [2, 4], row (0.5, 0.5) -> 3
  SpectralResponse sr;
  sr.band_ranges = {{0.0, 2.0}};
  sr.matrix = Array({1, 2}, std::vector<double>{0.5, 0.5});
  HyperCube cube(Array({2, 1, 1}, std::vector<double>{2.0, 4.0}), {1.0, 2.0});
  HyperCube out = spectral_downsample(cube, sr);
  CHECK(out.data[0] == doctest::Approx(3.0));

  HyperCube big = generate_procedural_cube(3, 256, 256, 172, 5);
  SpectralResponse d4 = build_spectral_response(big.wavelengths, MsiVariant::bands4);
  HyperCube msi = spectral_downsample(big, d4);
  CHECK(msi.data.shape() == std::vector<int>{4, 256, 256});

  HyperCube bad(Array({3, 1, 1}), {1.0, 2.0, 3.0});
  CHECK_THROWS(spectral_downsample(bad, sr));
}

TEST_CASE("spatial degradation: kernel, shapes, constants, impulse") {
  SpatialDegradation sd = SpatialDegradation::make(3.0, 4);
  REQUIRE(sd.kernel.shape() == std::vector<int>{1, 19, 19});
  double sum = 0.0;
  for (std::size_t i = 0; i < sd.kernel.size(); ++i) sum += sd.kernel[i];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  // 180-degree symmetry
  for (int y = 0; y < 19; ++y)
    for (int x = 0; x < 19; ++x)
      CHECK(sd.kernel.at(0, y, x) ==
            doctest::Approx(sd.kernel.at(0, 18 - y, 18 - x)).epsilon(1e-12));

  // full-size shape contract
  HyperCube big = generate_procedural_cube(5, 256, 256, 172, 4);
  HyperCube lr = spatial_degrade(big, sd);
  CHECK(lr.data.shape() == std::vector<int>{172, 64, 64});

  // constants survive blur + decimation exactly
  Array cd({2, 32, 32});
  cd.fill(11.0);
  HyperCube small(std::move(cd), {1.0, 2.0});
  HyperCube out = spatial_degrade(small, sd);
  REQUIRE(out.data.shape() == std::vector<int>{2, 8, 8});
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(11.0).epsilon(1e-9));

  // unit impulse at the center of a 64x64 band samples the kernel
  Array imp({1, 64, 64});
  imp.at(0, 32, 32) = 1.0;
  HyperCube impulse(std::move(imp), {1.0});
  HyperCube dec = spatial_degrade(impulse, sd);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int sy = 2 + 4 * y, sx = 2 + 4 * x;  // decimation offsets
      const int dy = sy - 32, dx = sx - 32;
      const double expect = (std::abs(dy) <= 9 && std::abs(dx) <= 9)
                                ? sd.kernel.at(0, dy + 9, dx + 9)
                                : 0.0;
      CHECK(dec.data.at(0, y, x) == doctest::Approx(expect).epsilon(1e-9));
    }

  HyperCube odd(Array({1, 30, 32}), {1.0});
  CHECK_THROWS_AS(spatial_degrade(odd, sd), DataError);
}

TEST_CASE("spatial_degrade commutes with scalar multiplication") {
  Rng rng(77);
  HyperCube cube = generate_procedural_cube(9, 24, 24, 6, 3);
  SpatialDegradation sd = SpatialDegradation::make(3.0, 4);
  HyperCube base = spatial_degrade(cube, sd);
  const double c = 3.7;
  HyperCube scaled = cube;
  for (std::size_t i = 0; i < scaled.data.size(); ++i) scaled.data[i] *= c;
  HyperCube out = spatial_degrade(scaled, sd);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(out.data[i] == doctest::Approx(c * base.data[i]).epsilon(1e-6));
}

TEST_CASE("awgn: sigma formula, clean identity, empirical std") {
  Array ones({4, 10, 10});
  ones.fill(1.0);
  CHECK(awgn_sigma(ones, 10.0) == doctest::Approx(std::sqrt(0.1)).epsilon(1e-9));
  CHECK(awgn_sigma(ones, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  HyperCube cube(Array({4, 10, 10}, std::vector<double>(400, 1.0)),
                 {1.0, 2.0, 3.0, 4.0});
  HyperCube same = inject_awgn(cube, NoiseSpec::make_clean());
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    CHECK(same.data[i] == cube.data[i]);

  // large all-ones cube: sample std within 3% of sqrt(10^(-SNR/10))
  Array big({64, 64, 64});
  big.fill(1.0);
  HyperCube bigc(std::move(big), [] {
    std::vector<double> wl(64);
    for (int i = 0; i < 64; ++i) wl[i] = 400.0 + i;
    return wl;
  }());
  const double snr = 20.0;
  HyperCube noisy = inject_awgn(bigc, NoiseSpec::make(snr, NoiseTargets::lr_hsi_only, 42));
  double mean = 0.0;
  for (std::size_t i = 0; i < noisy.data.size(); ++i) mean += noisy.data[i] - 1.0;
  mean /= noisy.data.size();
  double var = 0.0;
  for (std::size_t i = 0; i < noisy.data.size(); ++i) {
    const double d = noisy.data[i] - 1.0 - mean;
    var += d * d;
  }
  var /= (noisy.data.size() - 1);
  const double expect = std::sqrt(std::pow(10.0, -snr / 10.0));
  CHECK(std::abs(std::sqrt(var) - expect) / expect < 0.03);
}

TEST_CASE("make_sample: Wald triplet shapes, noise routing, determinism") {
  HyperCube src = generate_procedural_cube(11, 32, 32, 172, 5);
  SpectralResponse d4 = build_spectral_response(src.wavelengths, MsiVariant::bands4);
  SpatialDegradation sd = SpatialDegradation::make(3.0, 4);

  FusionSample clean = make_sample(src, d4, sd, std::nullopt);
  CHECK(clean.lr_hsi.data.shape() == std::vector<int>{172, 8, 8});
  CHECK(clean.hr_msi.data.shape() == std::vector<int>{4, 32, 32});
  CHECK(clean.truth.data.shape() == std::vector<int>{172, 32, 32});

  FusionSample lr_only = make_sample(
      src, d4, sd, NoiseSpec::make(25.0, NoiseTargets::lr_hsi_only, 99));
  for (std::size_t i = 0; i < clean.hr_msi.data.size(); ++i)
    CHECK(lr_only.hr_msi.data[i] == clean.hr_msi.data[i]);  // untouched path
  bool lr_diff = false;
  for (std::size_t i = 0; i < clean.lr_hsi.data.size() && !lr_diff; ++i)
    lr_diff = lr_only.lr_hsi.data[i] != clean.lr_hsi.data[i];
  CHECK(lr_diff);

  FusionSample both = make_sample(src, d4, sd, NoiseSpec::make(25.0, NoiseTargets::both, 99));
  bool msi_diff = false;
  for (std::size_t i = 0; i < clean.hr_msi.data.size() && !msi_diff; ++i)
    msi_diff = both.hr_msi.data[i] != clean.hr_msi.data[i];
  CHECK(msi_diff);

  FusionSample again = make_sample(src, d4, sd, NoiseSpec::make(25.0, NoiseTargets::both, 99));
  for (std::size_t i = 0; i < both.lr_hsi.data.size(); ++i)
    CHECK(again.lr_hsi.data[i] == both.lr_hsi.data[i]);  // bit-identical
}

TEST_CASE("fusion sample shape invariant holds over random sizes") {
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const int hh = 2 + rng.uniform_int(6), ww = 2 + rng.uniform_int(6);
    HyperCube src = generate_procedural_cube(100 + trial, hh * 4, ww * 4, 6, 2);
    SpectralResponse sr = build_spectral_response(src.wavelengths, MsiVariant::bands4);
    SpatialDegradation sd = SpatialDegradation::make(3.0, 4);
    FusionSample s = make_sample(src, sr, sd, std::nullopt);
    CHECK(s.truth.height() == s.lr_hsi.height() * 4);
    CHECK(s.truth.width() == s.lr_hsi.width() * 4);
    s.validate(4);
  }
}

TEST_CASE("dataset directory round trip") {
  const auto tmp = std::filesystem::temp_directory_path() / "csakd_dg_test";
  std::filesystem::remove_all(tmp);
  HyperCube src = generate_procedural_cube(21, 16, 16, 172, 3);
  SpectralResponse d6 = build_spectral_response(src.wavelengths, MsiVariant::bands6);
  SpatialDegradation sd = SpatialDegradation::make(3.0, 4);
  FusionSample s = make_sample(src, d6, sd, NoiseSpec::make(30.0, NoiseTargets::both, 7));
  s.id = "train_0000";

  write_sample(tmp / "train" / "train_0000", s, 21, MsiVariant::bands6);
  FusionSample r = read_sample(tmp / "train" / "train_0000");
  CHECK(r.id == "train_0000");
  CHECK(r.truth.data.shape() == s.truth.data.shape());
  CHECK(r.hr_msi.bands() == 6);
  REQUIRE(r.noise.has_value());
  CHECK(r.noise->snr_db == doctest::Approx(30.0));
  CHECK(r.noise->targets == NoiseTargets::both);
  // f32 storage: values match to float precision
  for (std::size_t i = 0; i < s.truth.data.size(); ++i)
    CHECK(r.truth.data[i] ==
          doctest::Approx(s.truth.data[i]).epsilon(1e-6));

  // writing the reloaded sample again is byte-stable
  write_sample(tmp / "train2" / "train_0000", r, 21, MsiVariant::bands6);
  CHECK(files_identical(tmp / "train" / "train_0000" / "truth.raw",
                        tmp / "train2" / "train_0000" / "truth.raw"));

  auto split = load_split(tmp, "train");
  REQUIRE(split.size() == 1);
  std::filesystem::remove_all(tmp);
}
