#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sla/grade_scale.hpp"
#include "sla/matrix.hpp"

namespace sla {

enum class HeadKind { CE, FA, REG };

std::string head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

// The grader network: an optional tanh hidden layer over fixed input
// features, topped by a class-logit head (CE/FA) or a scalar head (REG).
// Immutable during inference; forward and the losses are pure.
struct GraderModel {
  HeadKind head = HeadKind::CE;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // 0 = linear head directly on the features
  Matrix w1;                   // hidden_dim x input_dim
  std::vector<double> b1;      // hidden_dim
  Matrix wout;                 // out_dim x head_input_dim
  std::vector<double> bout;    // out_dim
  GradeScale scale = GradeScale::six_level();

  std::size_t out_dim() const {
    return head == HeadKind::REG ? 1 : scale.num_classes();
  }
  std::size_t head_input_dim() const {
    return hidden_dim > 0 ? hidden_dim : input_dim;
  }
  /// Throws DomainError if weight shapes are mutually inconsistent.
  void check_shapes() const;
};

/// Probability vector over grade classes.
struct ClassDistribution {
  std::vector<double> probs;
};

/// Throws DomainError unless probs are >= 0 and sum to 1 within 1e-12.
void check_distribution(const ClassDistribution& dist);

/// Logits (CE/FA) or a single scalar (REG); length out_dim().
std::vector<double> forward(const GraderModel& model,
                            std::span<const double> x);

/// Max-subtracted stable softmax. Throws DomainError on non-finite input.
ClassDistribution softmax(std::span<const double> logits);

/// -log softmax(logits)[target], computed via log-sum-exp.
double ce_loss(std::span<const double> logits, std::size_t target_index);
double ce_loss(std::span<const double> logits, const std::string& target_label,
               const GradeScale& scale);

/// Probability-weighted mean of class scores.
double expected_score(const ClassDistribution& dist, const GradeScale& scale);

/// (expected_score(softmax(logits)) - ref)^2; ref must be on the grid.
double fa_loss(std::span<const double> logits, double ref_score,
               const GradeScale& scale);

/// (pred - ref)^2.
double reg_loss(double pred, double ref_score);

/// Mean loss of the model's head over a batch (rows of xs with refs).
double batch_loss(const GraderModel& model, const Matrix& xs,
                  std::span<const double> refs);

/// Mean-over-batch analytic gradients, shaped exactly like the model.
struct BatchGradient {
  Matrix w1;
  std::vector<double> b1;
  Matrix wout;
  std::vector<double> bout;
  double loss = 0.0;
};

BatchGradient backward(const GraderModel& model, const Matrix& xs,
                       std::span<const double> refs);

/// Central-difference audit of backward over every parameter; returns the
/// worst relative error |a-n| / max(1e-12, |a|+|n|).
double grad_check(const GraderModel& model, const Matrix& xs,
                  std::span<const double> refs, double step);

/// Model with weights uniform in +-1/sqrt(fan_in) from the seeded PRNG,
/// biases zero. The initializer used by the trainer.
GraderModel init_model(HeadKind head, std::size_t input_dim,
                       std::size_t hidden_dim, const GradeScale& scale,
                       std::uint64_t seed);

/// Fully randomized model (weights and biases); used by gradient audits.
GraderModel random_model(HeadKind head, std::size_t input_dim,
                         std::size_t hidden_dim, const GradeScale& scale,
                         std::uint64_t seed);

/// A random (model, batch) pair conditioned for finite-difference audits:
/// draws are rejected while any parameter's batch-mean gradient is within
/// ~3e-4 of zero, because central differences carry no signal there (the
/// difference quotient is pure roundoff). Deterministic in the seed.
struct AuditInstance {
  GraderModel model;
  Matrix inputs;
  std::vector<double> refs;
};

AuditInstance make_audit_instance(HeadKind head, std::size_t input_dim,
                                  std::size_t hidden_dim,
                                  std::size_t batch_size,
                                  const GradeScale& scale, std::uint64_t seed);

}  // namespace sla
