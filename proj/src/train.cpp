#include "sla/train.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "sla/error.hpp"
#include "sla/rng.hpp"

namespace sla {

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("epochs must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw DomainError("base_lr must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw DomainError("warmup_fraction must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
}

double lr_at(std::size_t step, std::size_t total_steps,
             const TrainConfig& config) {
  if (total_steps == 0 || step >= total_steps) {
    throw DomainError("lr_at step " + std::to_string(step) +
                      " outside 0.." + std::to_string(total_steps) + "-1");
  }
  const auto warmup = static_cast<std::size_t>(
      std::floor(config.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) {
    return config.base_lr * static_cast<double>(step) /
           static_cast<double>(warmup);
  }
  if (total_steps - 1 <= warmup) return config.base_lr;
  double progress = static_cast<double>(step - warmup) /
                    static_cast<double>(total_steps - 1 - warmup);
  return config.base_lr * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * progress));
}

namespace {
constexpr std::uint64_t kShuffleStream = 0x73687566ull;  // "shuf"
}

std::vector<std::size_t> shuffle_epoch(std::size_t n,
                                       std::uint64_t epoch_index,
                                       std::uint64_t seed) {
  if (n == 0) throw DomainError("cannot shuffle an empty index range");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(SplitMix64::mix(SplitMix64::mix(seed, kShuffleStream),
                                 epoch_index));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = rng.next_below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

namespace {

// AdamW moments, one pair of buffers per parameter array.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_update(std::vector<double>& params, AdamState& state,
                 const std::vector<double>& grad, double lr,
                 double bias1, double bias2, bool decay,
                 const TrainConfig& cfg) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bias1;
    double vhat = state.v[i] / bias2;
    double update = mhat / (std::sqrt(vhat) + cfg.adam_eps);
    if (decay) update += cfg.weight_decay * params[i];
    params[i] -= lr * update;
  }
}

}  // namespace

TrainResult train(const DatasetSplit& split, const FloatMatrix& features,
                  const TrainConfig& config, const GradeScale& scale) {
  config.validate();
  if (split.records.empty()) {
    throw DomainError("training split '" + split.name + "' is empty");
  }
  if (features.cols == 0) throw DomainError("feature dimension must be >= 1");

  // Chunk-level examples: each chunk row carries its response's reference.
  std::vector<std::pair<std::size_t, double>> examples;
  for (const auto& rec : split.records) {
    if (!rec.ref_score) {
      throw DomainError("record '" + rec.response_id +
                        "' has no reference score");
    }
    for (std::size_t row : rec.chunk_rows) {
      if (row >= features.rows) {
        throw DomainError("record '" + rec.response_id + "' chunk row " +
                          std::to_string(row) + " out of bounds");
      }
      examples.emplace_back(row, *rec.ref_score);
    }
  }

  const std::size_t n = examples.size();
  const std::size_t steps_per_epoch =
      (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps =
      static_cast<std::size_t>(config.epochs) * steps_per_epoch;

  GraderModel model = init_model(config.head, features.cols,
                                 config.hidden_dim, scale, config.seed);
  AdamState s_w1(model.w1.data.size());
  AdamState s_b1(model.b1.size());
  AdamState s_wout(model.wout.data.size());
  AdamState s_bout(model.bout.size());

  TrainLog log;
  std::size_t gstep = 0;
  double bias1 = 1.0, bias2 = 1.0;  // running 1 - beta^t
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto perm = shuffle_epoch(n, static_cast<std::uint64_t>(epoch),
                              config.seed);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, n);
      Matrix bx(hi - lo, features.cols);
      std::vector<double> brefs(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& [row, ref] = examples[perm[k]];
        auto src = features.row(row);
        auto dst = bx.row(k - lo);
        for (std::size_t j = 0; j < features.cols; ++j) {
          dst[j] = static_cast<double>(src[j]);
        }
        brefs[k - lo] = ref;
      }

      BatchGradient g = backward(model, bx, brefs);
      const double lr = lr_at(gstep, total_steps, config);
      bias1 *= config.beta1;
      bias2 *= config.beta2;
      // Decoupled weight decay on the weight matrices only.
      adam_update(model.w1.data, s_w1, g.w1.data, lr, 1.0 - bias1,
                  1.0 - bias2, true, config);
      adam_update(model.b1, s_b1, g.b1, lr, 1.0 - bias1, 1.0 - bias2, false,
                  config);
      adam_update(model.wout.data, s_wout, g.wout.data, lr, 1.0 - bias1,
                  1.0 - bias2, true, config);
      adam_update(model.bout, s_bout, g.bout, lr, 1.0 - bias1, 1.0 - bias2,
                  false, config);

      log.steps.push_back({gstep, lr, g.loss});
      epoch_loss += g.loss;
      ++gstep;
    }
    log.epoch_mean_loss.push_back(epoch_loss /
                                  static_cast<double>(steps_per_epoch));
  }
  return {std::move(model), std::move(log)};
}

}  // namespace sla
