#pragma once

#include <cstdint>
#include <vector>

#include "sla/dataset.hpp"
#include "sla/model.hpp"

namespace sla {

/// Optimization settings. The defaults mirror the standard fine-tuning
/// recipe (2 epochs, batch 64, lr 1e-4, cosine schedule with warmup).
struct TrainConfig {
  HeadKind head = HeadKind::FA;
  int epochs = 2;
  std::size_t batch_size = 64;
  double base_lr = 1e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.1;
  std::size_t hidden_dim = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainLog {
  struct Step {
    std::size_t step;
    double lr;
    double loss;
  };
  std::vector<Step> steps;
  std::vector<double> epoch_mean_loss;  // mean of batch losses per epoch
};

/// Learning rate at an optimizer step: linear warmup from 0 to base_lr
/// over floor(warmup_fraction * total) steps, then a cosine decay that
/// reaches 0 at the final step. Throws DomainError if step >= total.
double lr_at(std::size_t step, std::size_t total_steps,
             const TrainConfig& config);

/// Fisher-Yates permutation of 0..n-1 keyed on (seed, epoch_index).
std::vector<std::size_t> shuffle_epoch(std::size_t n,
                                       std::uint64_t epoch_index,
                                       std::uint64_t seed);

struct TrainResult {
  GraderModel model;
  TrainLog log;
};

/// Deterministic mini-batch training. Every chunk row of every record is
/// an independent example carrying its response's reference score.
/// Identical (data, config, seed) produce a bit-identical model.
TrainResult train(const DatasetSplit& split, const FloatMatrix& features,
                  const TrainConfig& config,
                  const GradeScale& scale = GradeScale::six_level());

}  // namespace sla
