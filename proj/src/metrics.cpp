#include "sla/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sla/error.hpp"

namespace sla {

std::string granularity_name(Granularity g) {
  switch (g) {
    case Granularity::Response: return "response";
    case Granularity::Part: return "part";
    case Granularity::Submission: return "submission";
  }
  throw DomainError("invalid granularity");
}

Granularity granularity_from_name(const std::string& name) {
  if (name == "response") return Granularity::Response;
  if (name == "part") return Granularity::Part;
  if (name == "submission") return Granularity::Submission;
  throw DomainError("unknown granularity '" + name + "'");
}

namespace {

void check_pair_lengths(std::span<const double> preds,
                        std::span<const double> refs) {
  if (preds.size() != refs.size()) {
    throw DomainError("prediction/reference length mismatch (" +
                      std::to_string(preds.size()) + " vs " +
                      std::to_string(refs.size()) + ")");
  }
  if (preds.empty()) throw DomainError("metrics need at least one pair");
}

}  // namespace

double rmse(std::span<const double> preds, std::span<const double> refs) {
  check_pair_lengths(preds, refs);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - refs[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

double pcc(std::span<const double> preds, std::span<const double> refs) {
  check_pair_lengths(preds, refs);
  const std::size_t n = preds.size();
  if (n < 2) throw UndefinedMetricError("pcc needs at least 2 pairs");
  double mp = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += preds[i];
    mr += refs[i];
  }
  mp /= static_cast<double>(n);
  mr /= static_cast<double>(n);
  double spp = 0.0, srr = 0.0, spr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dp = preds[i] - mp;
    double dr = refs[i] - mr;
    spp += dp * dp;
    srr += dr * dr;
    spr += dp * dr;
  }
  if (spp == 0.0 || srr == 0.0) {
    throw UndefinedMetricError("pcc undefined: zero variance input");
  }
  return spr / std::sqrt(spp * srr);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return values[a] < values[b];
                   });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean of ranks i+1..j+1.
    double mean_rank = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double src(std::span<const double> preds, std::span<const double> refs) {
  check_pair_lengths(preds, refs);
  auto rp = average_ranks(preds);
  auto rr = average_ranks(refs);
  return pcc(rp, rr);
}

}  // namespace sla
