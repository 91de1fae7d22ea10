#include "sla/calibrate.hpp"

#include "sla/error.hpp"

namespace sla {

CalibrationParams fit_calibration(std::span<const double> dev_preds,
                                  std::span<const double> dev_refs,
                                  std::string fitted_on) {
  if (dev_preds.size() != dev_refs.size()) {
    throw DomainError("calibration prediction/reference length mismatch");
  }
  const std::size_t n = dev_preds.size();
  if (n < 2) throw DomainError("calibration needs at least 2 pairs");
  double mp = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += dev_preds[i];
    mr += dev_refs[i];
  }
  mp /= static_cast<double>(n);
  mr /= static_cast<double>(n);
  double spp = 0.0, spr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dp = dev_preds[i] - mp;
    spp += dp * dp;
    spr += dp * (dev_refs[i] - mr);
  }
  if (spp == 0.0) {
    throw DomainError("degenerate calibration fit: constant predictions");
  }
  CalibrationParams params;
  params.slope = spr / spp;
  params.intercept = mr - params.slope * mp;
  params.fitted_on = std::move(fitted_on);
  params.n_fit = n;
  return params;
}

std::vector<double> apply_calibration(const CalibrationParams& params,
                                      std::span<const double> preds) {
  std::vector<double> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out[i] = params.slope * preds[i] + params.intercept;
  }
  return out;
}

}  // namespace sla
