#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csakd/hypercube.hpp"
#include "csakd/rng.hpp"

namespace csakd::datagen {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Spectral response of the MSI sensor: row b holds uniform weights over the
// HSI bands whose centers fall in band_ranges[b] (half-open [low, high)).
struct SpectralResponse {
  Array matrix;  // (M_m, B), rows sum to 1
  std::vector<std::pair<double, double>> band_ranges;  // nm

  int msi_bands() const { return matrix.dim(0); }
  int hsi_bands() const { return matrix.dim(1); }
  std::vector<double> output_wavelengths() const;  // range midpoints
};

// Gaussian PSF blur + decimation.
struct SpatialDegradation {
  double psf_sigma = 3.0;
  int blur_factor = 4;  // b_r
  Array kernel;         // (1, 2R+1, 2R+1), sums to 1

  static SpatialDegradation make(double sigma, int blur_factor);
};

enum class NoiseTargets { lr_hsi_only, both };

struct NoiseSpec {
  bool clean = true;  // when true, snr_db is ignored
  double snr_db = 0.0;
  NoiseTargets targets = NoiseTargets::lr_hsi_only;
  std::uint64_t rng_seed = 0;

  static NoiseSpec make_clean() { return {}; }
  static NoiseSpec make(double snr_db, NoiseTargets t, std::uint64_t seed) {
    return {false, snr_db, t, seed};
  }
};

struct FusionSample {
  HyperCube lr_hsi;  // (h_h, w_h, B)
  HyperCube hr_msi;  // (H, W, M_m)
  HyperCube truth;   // (H, W, B)
  std::optional<NoiseSpec> noise;
  std::string id;

  void validate(int blur_factor) const;  // H == h_h * b_r etc.
};

enum class MsiVariant { bands4, bands6 };

const char* to_string(MsiVariant v);
MsiVariant msi_variant_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// 224-point uniform grid over 400-2500 nm with the low-quality bands
// (1-indexed 1-10, 104-116, 152-170, 215-224) removed; 172 centers remain.
std::vector<double> aviris_wavelength_grid();

// Procedural stand-in for the source corpus: n_materials smooth random
// spectral signatures mixed by softmax-normalized smooth abundance fields.
// Values land in [0, 1000]; deterministic in seed.
HyperCube generate_procedural_cube(std::uint64_t seed, int h, int w, int b,
                                   int n_materials);

SpectralResponse build_spectral_response(const std::vector<double>& wavelengths,
                                         MsiVariant variant);

HyperCube spectral_downsample(const HyperCube& cube, const SpectralResponse& sr);

// Per-band Gaussian blur (reflect borders) then decimation keeping every
// b_r-th pixel starting at offset b_r / 2.
HyperCube spatial_degrade(const HyperCube& cube, const SpatialDegradation& sd);

// sigma = sqrt(mean(x^2) / 10^(SNR/10)) over the whole cube; additive i.i.d.
// zero-mean Gaussian, no clipping.
HyperCube inject_awgn(const HyperCube& cube, const NoiseSpec& spec);
double awgn_sigma(const Array& x, double snr_db);

FusionSample make_sample(const HyperCube& source, const SpectralResponse& sr,
                         const SpatialDegradation& sd,
                         const std::optional<NoiseSpec>& noise);

// ---------------------------------------------------------------------------
// Dataset directory layout
// ---------------------------------------------------------------------------
// <root>/<split>/<sample_id>/ with lr_hsi.raw, hr_msi.raw, truth.raw
// (little-endian f32, band-major) and meta.json.

void write_sample(const std::filesystem::path& dir, const FusionSample& sample,
                  std::uint64_t seed, MsiVariant variant);
FusionSample read_sample(const std::filesystem::path& dir);

std::vector<FusionSample> load_split(const std::filesystem::path& root,
                                     const std::string& split);

}  // namespace csakd::datagen
