#include "sla/grade_scale.hpp"

#include <algorithm>
#include <cmath>

#include "sla/error.hpp"

namespace sla {

GradeScale::GradeScale(std::vector<std::string> labels,
                       std::vector<double> scores, double grid_step)
    : labels_(std::move(labels)), scores_(std::move(scores)),
      grid_step_(grid_step) {
  if (labels_.size() < 2) {
    throw DomainError("grade scale needs at least 2 classes");
  }
  if (labels_.size() != scores_.size()) {
    throw DomainError("grade scale labels and scores differ in length");
  }
  if (!(grid_step_ > 0.0)) {
    throw DomainError("grade scale grid_step must be positive");
  }
  for (std::size_t i = 0; i + 1 < scores_.size(); ++i) {
    if (!(scores_[i] > scores_[i + 1])) {
      throw DomainError("grade scale scores must strictly decrease");
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t j = i + 1; j < labels_.size(); ++j) {
      if (labels_[i] == labels_[j]) {
        throw DomainError("duplicate grade label '" + labels_[i] + "'");
      }
    }
  }
}

GradeScale GradeScale::six_level() {
  return GradeScale({"A", "B", "C", "D", "E", "F"},
                    {6.0, 5.0, 4.0, 3.0, 2.0, 1.0}, 0.5);
}

double GradeScale::score_of(const std::string& label) const {
  return scores_[index_of(label)];
}

std::size_t GradeScale::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw DomainError("unknown grade label '" + label + "'");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t GradeScale::nearest_index(double score) const {
  if (!(score >= min_score() && score <= max_score())) {
    throw DomainError("score " + std::to_string(score) +
                      " outside grade range [" + std::to_string(min_score()) +
                      ", " + std::to_string(max_score()) + "]");
  }
  // Scores decrease with index, so keeping the first strict minimum
  // resolves exact midpoints toward the higher score.
  std::size_t best = 0;
  double best_dist = std::abs(scores_[0] - score);
  for (std::size_t i = 1; i < scores_.size(); ++i) {
    double d = std::abs(scores_[i] - score);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

const std::string& GradeScale::nearest_class(double score) const {
  return labels_[nearest_index(score)];
}

std::vector<double> GradeScale::onehot_target(double score) const {
  if (!on_grid(score)) {
    throw DomainError("score " + std::to_string(score) +
                      " is not on the grade grid");
  }
  std::vector<double> target(num_classes(), 0.0);
  target[nearest_index(score)] = 1.0;
  return target;
}

bool GradeScale::on_grid(double score) const {
  if (score < min_score() || score > max_score()) return false;
  double k = (score - min_score()) / grid_step_;
  return std::abs(k - std::round(k)) < 1e-9;
}

double GradeScale::snap_to_grid(double score) const {
  double k = std::round((score - min_score()) / grid_step_);
  double n_steps = std::round((max_score() - min_score()) / grid_step_);
  k = std::clamp(k, 0.0, n_steps);
  return min_score() + k * grid_step_;
}

}  // namespace sla
