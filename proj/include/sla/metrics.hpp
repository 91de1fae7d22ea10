#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sla {

enum class Granularity { Response, Part, Submission };

std::string granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

/// RMSE/PCC/SRC over n prediction-reference pairs at one granularity.
struct MetricReport {
  double rmse = 0.0;
  double pcc = 0.0;
  double src = 0.0;
  std::size_t n = 0;
  Granularity granularity = Granularity::Response;
};

/// sqrt(mean((p - r)^2)). Throws on empty or mismatched lengths.
double rmse(std::span<const double> preds, std::span<const double> refs);

/// Sample Pearson correlation. Throws UndefinedMetricError when either
/// input has zero variance (never silently 0).
double pcc(std::span<const double> preds, std::span<const double> refs);

/// Spearman rank correlation; ties receive the mean of their rank
/// positions.
double src(std::span<const double> preds, std::span<const double> refs);

/// Average ranks (1-based), with tied values sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace sla
