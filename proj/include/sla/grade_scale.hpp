#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sla {

// Bijective mapping between ordered class labels and numeric scores, plus
// the legal half-point grid. Scores strictly decrease along label order
// (first label = best grade). Immutable after construction.
class GradeScale {
 public:
  /// Throws DomainError unless labels/scores form a strictly decreasing
  /// bijection with at least two classes and grid_step > 0.
  GradeScale(std::vector<std::string> labels, std::vector<double> scores,
             double grid_step = 0.5);

  /// The default six-level scale: "A".."F" -> 6.0..1.0, half-point grid.
  static GradeScale six_level();

  std::size_t num_classes() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& scores() const { return scores_; }
  double grid_step() const { return grid_step_; }
  double min_score() const { return scores_.back(); }
  double max_score() const { return scores_.front(); }

  /// Numeric score of a label; DomainError naming the label if unknown.
  double score_of(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;

  /// Label whose score is nearest; exact midpoints round toward the
  /// higher score. DomainError if score is outside [min, max].
  const std::string& nearest_class(double score) const;
  std::size_t nearest_index(double score) const;

  /// One-hot vector over classes with the 1 at nearest_class(score).
  /// Requires score on the grid.
  std::vector<double> onehot_target(double score) const;

  /// True iff score lies on {min, min+step, ..., max}.
  bool on_grid(double score) const;

  /// Nearest grid point to an arbitrary in-range value (not class rounding).
  double snap_to_grid(double score) const;

  bool operator==(const GradeScale& other) const = default;

 private:
  std::vector<std::string> labels_;
  std::vector<double> scores_;
  double grid_step_;
};

}  // namespace sla
