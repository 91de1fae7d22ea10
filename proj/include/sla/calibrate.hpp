#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sla {

/// Affine map fitted on development-set predictions. fitted_on records
/// data provenance so the harness can refuse in-sample evaluation.
struct CalibrationParams {
  double slope = 1.0;
  double intercept = 0.0;
  std::string fitted_on;
  std::size_t n_fit = 0;
};

/// Ordinary least squares (a, b) minimizing sum((a*p + b - r)^2).
/// Throws DomainError on n < 2 or constant predictions.
CalibrationParams fit_calibration(std::span<const double> dev_preds,
                                  std::span<const double> dev_refs,
                                  std::string fitted_on = {});

/// Elementwise a*p + b, unclamped.
std::vector<double> apply_calibration(const CalibrationParams& params,
                                      std::span<const double> preds);

}  // namespace sla
