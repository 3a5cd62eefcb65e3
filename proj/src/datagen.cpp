#include "csakd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "csakd/autograd.hpp"
#include "csakd/errors.hpp"

namespace csakd::datagen {

using nlohmann::json;

namespace {

const std::vector<std::pair<double, double>>& variant_ranges(MsiVariant v) {
  static const std::vector<std::pair<double, double>> b4 = {
      {450.0, 520.0}, {520.0, 600.0}, {630.0, 690.0}, {770.0, 900.0}};
  static const std::vector<std::pair<double, double>> b6 = {
      {450.0, 520.0},   {520.0, 600.0}, {630.0, 690.0},
      {770.0, 900.0},   {1550.0, 1750.0}, {2090.0, 2350.0}};
  return v == MsiVariant::bands4 ? b4 : b6;
}

constexpr double kMaxValue = 1000.0;

}  // namespace

const char* to_string(MsiVariant v) {
  return v == MsiVariant::bands4 ? "bands4" : "bands6";
}

MsiVariant msi_variant_from_string(const std::string& s) {
  if (s == "bands4") return MsiVariant::bands4;
  if (s == "bands6") return MsiVariant::bands6;
  throw ConfigError("unknown msi_variant: " + s);
}

std::vector<double> SpectralResponse::output_wavelengths() const {
  std::vector<double> out;
  out.reserve(band_ranges.size());
  for (auto [lo, hi] : band_ranges) out.push_back(0.5 * (lo + hi));
  return out;
}

// ---------------------------------------------------------------------------
// Wavelength grid
// ---------------------------------------------------------------------------

std::vector<double> aviris_wavelength_grid() {
  // 224 points, 400-2500 nm inclusive; drop 1-indexed bands 1-10, 104-116,
  // 152-170, 215-224 -> 172 survivors.
  const double step = (2500.0 - 400.0) / 223.0;
  auto removed = [](int band1) {
    return (band1 >= 1 && band1 <= 10) || (band1 >= 104 && band1 <= 116) ||
           (band1 >= 152 && band1 <= 170) || (band1 >= 215 && band1 <= 224);
  };
  std::vector<double> grid;
  grid.reserve(172);
  for (int i = 0; i < 224; ++i)
    if (!removed(i + 1)) grid.push_back(400.0 + i * step);
  return grid;
}

// ---------------------------------------------------------------------------
// Procedural source cubes
// ---------------------------------------------------------------------------

HyperCube generate_procedural_cube(std::uint64_t seed, int h, int w, int b,
                                   int n_materials) {
  if (h < 1 || w < 1 || b < 1 || n_materials < 1)
    throw DataError("generate_procedural_cube: non-positive dimension");

  std::vector<double> wl;
  if (b == 172) {
    wl = aviris_wavelength_grid();
  } else if (b == 1) {
    wl = {400.0};
  } else {
    wl.resize(b);
    for (int i = 0; i < b; ++i) wl[i] = 400.0 + i * (2500.0 - 400.0) / (b - 1);
  }

  Rng rng(seed);

  // Smooth spectral signatures in [0.02, 1]: baseline plus Gaussian bumps.
  std::vector<std::vector<double>> sig(n_materials, std::vector<double>(b));
  for (int m = 0; m < n_materials; ++m) {
    const double base = rng.uniform(0.1, 0.5);
    double amp[4], ctr[4], wid[4];
    for (int j = 0; j < 4; ++j) {
      amp[j] = rng.uniform(-0.35, 0.6);
      ctr[j] = rng.uniform(400.0, 2500.0);
      wid[j] = rng.uniform(80.0, 450.0);
    }
    for (int i = 0; i < b; ++i) {
      double v = base;
      for (int j = 0; j < 4; ++j) {
        const double t = (wl[i] - ctr[j]) / wid[j];
        v += amp[j] * std::exp(-0.5 * t * t);
      }
      sig[m][i] = std::clamp(v, 0.02, 1.0);
    }
  }

  // Smooth abundance logits: coarse white noise upsampled bicubically.
  const int ch = std::max(2, h / 8), cw = std::max(2, w / 8);
  Array logits({n_materials, h, w});
  for (int m = 0; m < n_materials; ++m) {
    Array coarse({1, ch, cw});
    for (std::size_t i = 0; i < coarse.size(); ++i) coarse[i] = rng.normal();
    Array up = resize_bicubic_array(coarse, h, w);
    std::copy(up.data(), up.data() + up.size(), logits.data() + m * logits.plane());
  }

  // Per-pixel softmax over materials (temperature fixed for varied mixtures).
  const double tau = 2.5;
  const std::size_t plane = logits.plane();
  Array cube({b, h, w});
  std::vector<double> abund(n_materials);
  for (std::size_t p = 0; p < plane; ++p) {
    double mx = -1e300;
    for (int m = 0; m < n_materials; ++m)
      mx = std::max(mx, logits[m * plane + p]);
    double sum = 0.0;
    for (int m = 0; m < n_materials; ++m) {
      abund[m] = std::exp(tau * (logits[m * plane + p] - mx));
      sum += abund[m];
    }
    for (int m = 0; m < n_materials; ++m) abund[m] /= sum;
    for (int i = 0; i < b; ++i) {
      double v = 0.0;
      for (int m = 0; m < n_materials; ++m) v += abund[m] * sig[m][i];
      cube[i * plane + p] = v * kMaxValue;
    }
  }
  return HyperCube(std::move(cube), std::move(wl));
}

// ---------------------------------------------------------------------------
// Spectral response / downsampling
// ---------------------------------------------------------------------------

SpectralResponse build_spectral_response(const std::vector<double>& wavelengths,
                                         MsiVariant variant) {
  for (std::size_t i = 1; i < wavelengths.size(); ++i)
    if (!(wavelengths[i] > wavelengths[i - 1]))
      throw DataError("build_spectral_response: wavelengths not increasing");

  const auto& ranges = variant_ranges(variant);
  const int mm = static_cast<int>(ranges.size());
  const int bb = static_cast<int>(wavelengths.size());
  SpectralResponse sr;
  sr.band_ranges = ranges;
  sr.matrix = Array({mm, bb});
  for (int m = 0; m < mm; ++m) {
    auto [lo, hi] = ranges[m];
    std::vector<int> in_band;
    for (int i = 0; i < bb; ++i)
      if (wavelengths[i] >= lo && wavelengths[i] < hi) in_band.push_back(i);
    if (in_band.empty())
      throw DataError("build_spectral_response: empty range " + std::to_string(lo) +
                      "-" + std::to_string(hi) + " nm");
    const double wgt = 1.0 / static_cast<double>(in_band.size());
    for (int i : in_band) sr.matrix[static_cast<std::size_t>(m) * bb + i] = wgt;
  }
  return sr;
}

HyperCube spectral_downsample(const HyperCube& cube, const SpectralResponse& sr) {
  if (cube.bands() != sr.hsi_bands())
    throw DataError("spectral_downsample: band count mismatch");
  const std::size_t plane = cube.data.plane();
  const int mm = sr.msi_bands(), bb = sr.hsi_bands();
  Array out({mm, cube.height(), cube.width()});
  for (int m = 0; m < mm; ++m) {
    double* o = out.data() + m * plane;
    for (int i = 0; i < bb; ++i) {
      const double w = sr.matrix[static_cast<std::size_t>(m) * bb + i];
      if (w == 0.0) continue;
      const double* src = cube.data.data() + i * plane;
      for (std::size_t p = 0; p < plane; ++p) o[p] += w * src[p];
    }
  }
  return HyperCube(std::move(out), sr.output_wavelengths());
}

// ---------------------------------------------------------------------------
// Spatial degradation
// ---------------------------------------------------------------------------

SpatialDegradation SpatialDegradation::make(double sigma, int blur_factor) {
  if (sigma <= 0.0 || blur_factor < 1)
    throw DataError("SpatialDegradation: bad sigma/blur_factor");
  SpatialDegradation sd;
  sd.psf_sigma = sigma;
  sd.blur_factor = blur_factor;
  const int rad = static_cast<int>(std::ceil(3.0 * sigma));
  const int n = 2 * rad + 1;
  sd.kernel = Array({1, n, n});
  double sum = 0.0;
  for (int y = -rad; y <= rad; ++y)
    for (int x = -rad; x <= rad; ++x) {
      const double v = std::exp(-(y * y + x * x) / (2.0 * sigma * sigma));
      sd.kernel.at(0, y + rad, x + rad) = v;
      sum += v;
    }
  for (std::size_t i = 0; i < sd.kernel.size(); ++i) sd.kernel[i] /= sum;
  return sd;
}

HyperCube spatial_degrade(const HyperCube& cube, const SpatialDegradation& sd) {
  const int h = cube.height(), w = cube.width(), br = sd.blur_factor;
  if (h % br != 0 || w % br != 0)
    throw DataError("spatial_degrade: dimensions not divisible by blur factor");

  // The 2-D Gaussian factorizes exactly, so blur separably.
  const int rad = (sd.kernel.dim(1) - 1) / 2;
  std::vector<double> k1(2 * rad + 1);
  double s1 = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    k1[i + rad] = std::exp(-(i * i) / (2.0 * sd.psf_sigma * sd.psf_sigma));
    s1 += k1[i + rad];
  }
  for (double& v : k1) v /= s1;

  const std::size_t plane = cube.data.plane();
  const int ho = h / br, wo = w / br, off = br / 2;
  Array out({cube.bands(), ho, wo});
  std::vector<double> rowblur(static_cast<std::size_t>(h) * w);
  std::vector<double> full(static_cast<std::size_t>(h) * w);
  for (int bidx = 0; bidx < cube.bands(); ++bidx) {
    const double* src = cube.data.data() + bidx * plane;
    // horizontal pass
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -rad; i <= rad; ++i)
          acc += k1[i + rad] * src[static_cast<std::size_t>(y) * w +
                                   reflect_index(x + i, w)];
        rowblur[static_cast<std::size_t>(y) * w + x] = acc;
      }
    // vertical pass
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -rad; i <= rad; ++i)
          acc += k1[i + rad] * rowblur[static_cast<std::size_t>(reflect_index(y + i, h)) * w + x];
        full[static_cast<std::size_t>(y) * w + x] = acc;
      }
    double* dst = out.data() + static_cast<std::size_t>(bidx) * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x)
        dst[static_cast<std::size_t>(y) * wo + x] =
            full[static_cast<std::size_t>(off + y * br) * w + (off + x * br)];
  }
  return HyperCube(std::move(out), cube.wavelengths);
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

double awgn_sigma(const Array& x, double snr_db) {
  double energy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) energy += x[i] * x[i];
  energy /= static_cast<double>(x.size());
  return std::sqrt(energy / std::pow(10.0, snr_db / 10.0));
}

HyperCube inject_awgn(const HyperCube& cube, const NoiseSpec& spec) {
  if (spec.clean) return cube;
  if (!std::isfinite(spec.snr_db)) throw DataError("inject_awgn: non-finite SNR");
  const double sigma = awgn_sigma(cube.data, spec.snr_db);
  Rng rng(spec.rng_seed);
  HyperCube out = cube;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += sigma * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Wald's protocol sample assembly
// ---------------------------------------------------------------------------

void FusionSample::validate(int blur_factor) const {
  lr_hsi.validate();
  hr_msi.validate();
  truth.validate();
  if (truth.height() != lr_hsi.height() * blur_factor ||
      truth.width() != lr_hsi.width() * blur_factor)
    throw DataError("FusionSample: H != h_h * b_r");
  if (hr_msi.height() != truth.height() || hr_msi.width() != truth.width())
    throw DataError("FusionSample: hr_msi grid != truth grid");
  if (lr_hsi.wavelengths != truth.wavelengths)
    throw DataError("FusionSample: lr/truth wavelength mismatch");
}

FusionSample make_sample(const HyperCube& source, const SpectralResponse& sr,
                         const SpatialDegradation& sd,
                         const std::optional<NoiseSpec>& noise) {
  FusionSample s;
  s.truth = source;
  s.hr_msi = spectral_downsample(source, sr);
  s.lr_hsi = spatial_degrade(source, sd);
  s.noise = noise;
  if (noise && !noise->clean) {
    // Independent streams per target, derived from the one spec seed.
    NoiseSpec lr = *noise;
    lr.rng_seed = Rng::mix(noise->rng_seed, 0x4C52);
    s.lr_hsi = inject_awgn(s.lr_hsi, lr);
    if (noise->targets == NoiseTargets::both) {
      NoiseSpec ms = *noise;
      ms.rng_seed = Rng::mix(noise->rng_seed, 0x4D53);
      s.hr_msi = inject_awgn(s.hr_msi, ms);
    }
  }
  s.validate(sd.blur_factor);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset directory IO
// ---------------------------------------------------------------------------

namespace {

json shape_hwb(const HyperCube& c) {
  return json::array({c.height(), c.width(), c.bands()});
}

}  // namespace

void write_sample(const std::filesystem::path& dir, const FusionSample& sample,
                  std::uint64_t seed, MsiVariant variant) {
  std::filesystem::create_directories(dir);
  write_raw_f32(dir / "lr_hsi.raw", sample.lr_hsi.data);
  write_raw_f32(dir / "hr_msi.raw", sample.hr_msi.data);
  write_raw_f32(dir / "truth.raw", sample.truth.data);

  json meta;
  meta["shape_lr"] = shape_hwb(sample.lr_hsi);
  meta["shape_msi"] = shape_hwb(sample.hr_msi);
  meta["shape_truth"] = shape_hwb(sample.truth);
  meta["wavelengths"] = sample.truth.wavelengths;
  if (sample.noise && !sample.noise->clean) {
    meta["snr_db"] = sample.noise->snr_db;
    meta["noise_targets"] =
        sample.noise->targets == NoiseTargets::both ? "both" : "lr_hsi_only";
  } else {
    meta["snr_db"] = "clean";
    meta["noise_targets"] = "lr_hsi_only";
  }
  meta["seed"] = seed;
  meta["msi_variant"] = to_string(variant);

  std::ofstream f(dir / "meta.json");
  if (!f) throw DataError("write_sample: cannot write meta.json in " + dir.string());
  f << meta.dump(2) << "\n";
}

FusionSample read_sample(const std::filesystem::path& dir) {
  std::ifstream f(dir / "meta.json");
  if (!f) throw DataError("read_sample: missing meta.json in " + dir.string());
  json meta = json::parse(f);

  auto shape_of = [&](const char* key) {
    auto v = meta.at(key);
    // stored (H, W, B); raw blobs are band-major
    return std::vector<int>{v.at(2).get<int>(), v.at(0).get<int>(), v.at(1).get<int>()};
  };
  std::vector<double> wl = meta.at("wavelengths").get<std::vector<double>>();
  const MsiVariant variant = msi_variant_from_string(meta.at("msi_variant").get<std::string>());

  FusionSample s;
  s.id = dir.filename().string();
  s.truth = HyperCube(read_raw_f32(dir / "truth.raw", shape_of("shape_truth")), wl);
  s.lr_hsi = HyperCube(read_raw_f32(dir / "lr_hsi.raw", shape_of("shape_lr")), wl);

  std::vector<double> msi_wl;
  for (auto [lo, hi] : variant_ranges(variant)) msi_wl.push_back(0.5 * (lo + hi));
  s.hr_msi = HyperCube(read_raw_f32(dir / "hr_msi.raw", shape_of("shape_msi")), msi_wl);

  if (meta.at("snr_db").is_string()) {
    s.noise.reset();
  } else {
    NoiseSpec n;
    n.clean = false;
    n.snr_db = meta.at("snr_db").get<double>();
    n.targets = meta.at("noise_targets").get<std::string>() == "both"
                    ? NoiseTargets::both
                    : NoiseTargets::lr_hsi_only;
    n.rng_seed = 0;
    s.noise = n;
  }
  return s;
}

std::vector<FusionSample> load_split(const std::filesystem::path& root,
                                     const std::string& split) {
  const auto dir = root / split;
  if (!std::filesystem::is_directory(dir))
    throw DataError("load_split: missing split directory " + dir.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<FusionSample> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(read_sample(d));
  return out;
}

}  // namespace csakd::datagen
