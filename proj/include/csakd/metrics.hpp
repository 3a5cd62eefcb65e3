#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csakd/array.hpp"

namespace csakd::metrics {

constexpr double kPsnrSaturation = 100.0;  // dB, exact-match bands

struct PsnrResult {
  double mean_db = 0.0;
  std::vector<double> per_band;  // NaN marks excluded zero-energy bands
  int saturated_bands = 0;
  int excluded_bands = 0;
};

// Per band m: 10 log10(max_n truth_mn^2 / mean squared error), peak from the
// ground-truth band; mean over bands. Exact matches saturate at 100 dB;
// zero-energy truth bands are excluded from the mean and flagged.
PsnrResult psnr(const Array& pred, const Array& truth);

// Mean per-pixel spectral angle in degrees; zero-spectrum pixels excluded.
double sam_metric(const Array& pred, const Array& truth, double eps = 1e-8,
                  int* excluded_pixels = nullptr);

// Root of the global mean squared error (identical to the per-band RMS
// aggregation form).
double rmse(const Array& pred, const Array& truth);

struct EvalReport {
  std::string sample_id;
  double psnr_db = 0.0;
  double sam_deg = 0.0;
  double rmse = 0.0;
  std::vector<double> per_band_psnr;
  int saturated_bands = 0;
  int excluded_bands = 0;
  int excluded_pixels = 0;
};

EvalReport evaluate(const std::string& sample_id, const Array& pred,
                    const Array& truth, double eps = 1e-8);

// One CSV row per sample (sample_id, psnr_db, sam_deg, rmse) plus a JSON
// sidecar with the per-band PSNR curves.
void write_report_csv(const std::filesystem::path& csv_path,
                      const std::vector<EvalReport>& reports);
void write_per_band_json(const std::filesystem::path& json_path,
                         const std::vector<EvalReport>& reports);

}  // namespace csakd::metrics
