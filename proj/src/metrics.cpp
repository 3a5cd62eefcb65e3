#include "csakd/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>

#include "csakd/errors.hpp"

namespace csakd::metrics {

PsnrResult psnr(const Array& pred, const Array& truth) {
  check_same_shape(pred, truth, "psnr");
  const int bands = truth.channels();
  const std::size_t plane = truth.plane();
  PsnrResult res;
  res.per_band.resize(bands);
  double sum = 0.0;
  int counted = 0;
  for (int b = 0; b < bands; ++b) {
    const double* t = truth.data() + b * plane;
    const double* p = pred.data() + b * plane;
    double peak = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      peak = std::max(peak, t[i] * t[i]);
      const double d = p[i] - t[i];
      mse += d * d;
    }
    mse /= static_cast<double>(plane);
    if (peak == 0.0) {
      res.per_band[b] = std::numeric_limits<double>::quiet_NaN();
      ++res.excluded_bands;
      continue;
    }
    double v;
    if (mse == 0.0) {
      v = kPsnrSaturation;
      ++res.saturated_bands;
    } else {
      v = 10.0 * std::log10(peak / mse);
    }
    res.per_band[b] = v;
    sum += v;
    ++counted;
  }
  if (counted == 0) throw DataError("psnr: all ground-truth bands have zero energy");
  res.mean_db = sum / counted;
  return res;
}

double sam_metric(const Array& pred, const Array& truth, double eps,
                  int* excluded_pixels) {
  check_same_shape(pred, truth, "sam_metric");
  const int bands = truth.channels();
  const std::size_t plane = truth.plane();
  double sum = 0.0;
  std::size_t counted = 0;
  int excluded = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int b = 0; b < bands; ++b) {
      const double pv = pred[b * plane + i], tv = truth[b * plane + i];
      dot += pv * tv;
      na2 += pv * pv;
      nb2 += tv * tv;
    }
    if (na2 == 0.0 || nb2 == 0.0) {
      ++excluded;
      continue;
    }
    const double c = std::clamp(dot / (std::sqrt(na2) * std::sqrt(nb2) + eps), -1.0, 1.0);
    sum += std::acos(c);
    ++counted;
  }
  if (excluded_pixels) *excluded_pixels = excluded;
  if (counted == 0) return 0.0;
  return (sum / counted) * (180.0 / M_PI);
}

double rmse(const Array& pred, const Array& truth) {
  check_same_shape(pred, truth, "rmse");
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    mse += d * d;
  }
  return std::sqrt(mse / static_cast<double>(pred.size()));
}

EvalReport evaluate(const std::string& sample_id, const Array& pred,
                    const Array& truth, double eps) {
  EvalReport r;
  r.sample_id = sample_id;
  PsnrResult pr = psnr(pred, truth);
  r.psnr_db = pr.mean_db;
  r.per_band_psnr = std::move(pr.per_band);
  r.saturated_bands = pr.saturated_bands;
  r.excluded_bands = pr.excluded_bands;
  r.sam_deg = sam_metric(pred, truth, eps, &r.excluded_pixels);
  r.rmse = rmse(pred, truth);
  return r;
}

void write_report_csv(const std::filesystem::path& csv_path,
                      const std::vector<EvalReport>& reports) {
  std::ofstream f(csv_path);
  if (!f) throw DataError("write_report_csv: cannot open " + csv_path.string());
  f << "sample_id,psnr_db,sam_deg,rmse\n" << std::fixed << std::setprecision(6);
  double ps = 0, ss = 0, rs = 0;
  for (const EvalReport& r : reports) {
    f << r.sample_id << ',' << r.psnr_db << ',' << r.sam_deg << ',' << r.rmse << '\n';
    ps += r.psnr_db;
    ss += r.sam_deg;
    rs += r.rmse;
  }
  if (!reports.empty()) {
    const double n = static_cast<double>(reports.size());
    f << "mean," << ps / n << ',' << ss / n << ',' << rs / n << '\n';
  }
}

void write_per_band_json(const std::filesystem::path& json_path,
                         const std::vector<EvalReport>& reports) {
  nlohmann::json j;
  for (const EvalReport& r : reports) {
    nlohmann::json e;
    e["per_band_psnr"] = r.per_band_psnr;  // NaNs serialize as null
    e["saturated_bands"] = r.saturated_bands;
    e["excluded_bands"] = r.excluded_bands;
    e["excluded_pixels"] = r.excluded_pixels;
    j[r.sample_id] = std::move(e);
  }
  std::ofstream f(json_path);
  if (!f) throw DataError("write_per_band_json: cannot open " + json_path.string());
  f << j.dump(2) << "\n";
}

}  // namespace csakd::metrics
