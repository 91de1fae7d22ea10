#include "sla/model.hpp"

#include <cmath>
#include <limits>

#include "sla/error.hpp"
#include "sla/rng.hpp"

namespace sla {

std::string head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::CE: return "ce";
    case HeadKind::FA: return "fa";
    case HeadKind::REG: return "reg";
  }
  throw DomainError("invalid head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "ce") return HeadKind::CE;
  if (name == "fa") return HeadKind::FA;
  if (name == "reg") return HeadKind::REG;
  throw DomainError("unknown head kind '" + name + "'");
}

void GraderModel::check_shapes() const {
  if (input_dim == 0) throw DomainError("model input_dim must be >= 1");
  if (hidden_dim > 0) {
    if (w1.rows != hidden_dim || w1.cols != input_dim ||
        b1.size() != hidden_dim) {
      throw DomainError("model hidden layer shapes inconsistent");
    }
  } else if (!w1.empty() || !b1.empty()) {
    throw DomainError("hidden_dim 0 but hidden weights present");
  }
  if (wout.rows != out_dim() || wout.cols != head_input_dim() ||
      bout.size() != out_dim()) {
    throw DomainError("model output layer shapes inconsistent");
  }
}

void check_distribution(const ClassDistribution& dist) {
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0)) throw DomainError("distribution has negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw DomainError("distribution does not sum to 1");
  }
}

namespace {

// Hidden activations kept alongside the output for backprop.
struct ForwardTrace {
  std::vector<double> hidden;  // tanh(W1 x + b1); empty when hidden_dim == 0
  std::vector<double> out;
};

ForwardTrace forward_trace(const GraderModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim) {
    throw DomainError("input dimension " + std::to_string(x.size()) +
                      " does not match model input_dim " +
                      std::to_string(m.input_dim));
  }
  ForwardTrace t;
  std::span<const double> head_in = x;
  if (m.hidden_dim > 0) {
    t.hidden.resize(m.hidden_dim);
    for (std::size_t i = 0; i < m.hidden_dim; ++i) {
      double z = m.b1[i];
      const double* wrow = m.w1.data.data() + i * m.input_dim;
      for (std::size_t j = 0; j < m.input_dim; ++j) z += wrow[j] * x[j];
      t.hidden[i] = std::tanh(z);
    }
    head_in = t.hidden;
  }
  t.out.resize(m.out_dim());
  for (std::size_t o = 0; o < t.out.size(); ++o) {
    double z = m.bout[o];
    const double* wrow = m.wout.data.data() + o * m.wout.cols;
    for (std::size_t j = 0; j < head_in.size(); ++j) z += wrow[j] * head_in[j];
    t.out[o] = z;
  }
  return t;
}

double log_sum_exp(std::span<const double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

}  // namespace

std::vector<double> forward(const GraderModel& m, std::span<const double> x) {
  return forward_trace(m, x).out;
}

ClassDistribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of empty logits");
  double mx = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw DomainError("softmax of non-finite logit");
    mx = std::max(mx, z);
  }
  ClassDistribution dist;
  dist.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dist.probs[i] = std::exp(logits[i] - mx);
    sum += dist.probs[i];
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

double ce_loss(std::span<const double> logits, std::size_t target_index) {
  if (target_index >= logits.size()) {
    throw DomainError("CE target index out of range");
  }
  return log_sum_exp(logits) - logits[target_index];
}

double ce_loss(std::span<const double> logits, const std::string& target_label,
               const GradeScale& scale) {
  return ce_loss(logits, scale.index_of(target_label));
}

double expected_score(const ClassDistribution& dist, const GradeScale& scale) {
  if (dist.probs.size() != scale.num_classes()) {
    throw DomainError("distribution length does not match class count");
  }
  double e = 0.0;
  for (std::size_t c = 0; c < dist.probs.size(); ++c) {
    e += dist.probs[c] * scale.scores()[c];
  }
  // A convex combination of class scores; clip floating-point dust.
  return std::min(std::max(e, scale.min_score()), scale.max_score());
}

double fa_loss(std::span<const double> logits, double ref_score,
               const GradeScale& scale) {
  if (!scale.on_grid(ref_score)) {
    throw DomainError("reference score " + std::to_string(ref_score) +
                      " not on the grade grid");
  }
  double e = expected_score(softmax(logits), scale);
  double d = e - ref_score;
  return d * d;
}

double reg_loss(double pred, double ref_score) {
  double d = pred - ref_score;
  return d * d;
}

double batch_loss(const GraderModel& m, const Matrix& xs,
                  std::span<const double> refs) {
  if (xs.rows == 0) throw DomainError("empty batch");
  if (xs.rows != refs.size()) {
    throw DomainError("batch features/references length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < xs.rows; ++i) {
    auto out = forward(m, xs.row(i));
    switch (m.head) {
      case HeadKind::CE:
        total += ce_loss(out, m.scale.nearest_index(refs[i]));
        break;
      case HeadKind::FA:
        total += fa_loss(out, refs[i], m.scale);
        break;
      case HeadKind::REG:
        total += reg_loss(out[0], refs[i]);
        break;
    }
  }
  return total / static_cast<double>(xs.rows);
}

BatchGradient backward(const GraderModel& m, const Matrix& xs,
                       std::span<const double> refs) {
  m.check_shapes();
  if (xs.rows == 0) throw DomainError("empty batch");
  if (xs.rows != refs.size()) {
    throw DomainError("batch features/references length mismatch");
  }
  BatchGradient g;
  g.w1 = Matrix(m.w1.rows, m.w1.cols);
  g.b1.assign(m.b1.size(), 0.0);
  g.wout = Matrix(m.wout.rows, m.wout.cols);
  g.bout.assign(m.bout.size(), 0.0);

  const std::size_t out_dim = m.out_dim();
  for (std::size_t i = 0; i < xs.rows; ++i) {
    auto x = xs.row(i);
    ForwardTrace t = forward_trace(m, x);
    const double ref = refs[i];

    // d loss / d output
    std::vector<double> dout(out_dim);
    switch (m.head) {
      case HeadKind::CE: {
        std::size_t target = m.scale.nearest_index(ref);
        ClassDistribution s = softmax(t.out);
        for (std::size_t c = 0; c < out_dim; ++c) {
          dout[c] = s.probs[c] - (c == target ? 1.0 : 0.0);
        }
        g.loss += ce_loss(t.out, target);
        break;
      }
      case HeadKind::FA: {
        ClassDistribution s = softmax(t.out);
        double e = expected_score(s, m.scale);
        double err = e - ref;
        for (std::size_t c = 0; c < out_dim; ++c) {
          dout[c] = 2.0 * err * s.probs[c] * (m.scale.scores()[c] - e);
        }
        g.loss += fa_loss(t.out, ref, m.scale);
        break;
      }
      case HeadKind::REG: {
        dout[0] = 2.0 * (t.out[0] - ref);
        g.loss += reg_loss(t.out[0], ref);
        break;
      }
    }

    std::span<const double> head_in = m.hidden_dim > 0
                                          ? std::span<const double>(t.hidden)
                                          : x;
    for (std::size_t o = 0; o < out_dim; ++o) {
      double* grow = g.wout.data.data() + o * g.wout.cols;
      for (std::size_t j = 0; j < head_in.size(); ++j) {
        grow[j] += dout[o] * head_in[j];
      }
      g.bout[o] += dout[o];
    }

    if (m.hidden_dim > 0) {
      for (std::size_t h = 0; h < m.hidden_dim; ++h) {
        double da = 0.0;
        for (std::size_t o = 0; o < out_dim; ++o) {
          da += m.wout.at(o, h) * dout[o];
        }
        double dz = da * (1.0 - t.hidden[h] * t.hidden[h]);
        double* grow = g.w1.data.data() + h * m.input_dim;
        for (std::size_t j = 0; j < m.input_dim; ++j) grow[j] += dz * x[j];
        g.b1[h] += dz;
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(xs.rows);
  for (double& v : g.w1.data) v *= inv_n;
  for (double& v : g.b1) v *= inv_n;
  for (double& v : g.wout.data) v *= inv_n;
  for (double& v : g.bout) v *= inv_n;
  g.loss *= inv_n;
  return g;
}

double grad_check(const GraderModel& model, const Matrix& xs,
                  std::span<const double> refs, double step) {
  if (!(step > 0.0)) throw DomainError("grad_check step must be positive");
  BatchGradient analytic = backward(model, xs, refs);
  GraderModel probe = model;

  auto param_arrays = [](GraderModel& m) {
    return std::vector<std::vector<double>*>{&m.w1.data, &m.b1, &m.wout.data,
                                             &m.bout};
  };
  auto grad_arrays = [](BatchGradient& g) {
    return std::vector<std::vector<double>*>{&g.w1.data, &g.b1, &g.wout.data,
                                             &g.bout};
  };

  double worst = 0.0;
  auto params = param_arrays(probe);
  auto grads = grad_arrays(analytic);
  for (std::size_t a = 0; a < params.size(); ++a) {
    std::vector<double>& p = *params[a];
    const std::vector<double>& gv = *grads[a];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      double lp = batch_loss(probe, xs, refs);
      p[i] = saved - step;
      double lm = batch_loss(probe, xs, refs);
      p[i] = saved;
      double numeric = (lp - lm) / (2.0 * step);
      double rel = std::abs(gv[i] - numeric) /
                   std::max(1e-12, std::abs(gv[i]) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

namespace {

GraderModel build_model(HeadKind head, std::size_t input_dim,
                        std::size_t hidden_dim, const GradeScale& scale) {
  GraderModel m;
  m.head = head;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.scale = scale;
  if (hidden_dim > 0) {
    m.w1 = Matrix(hidden_dim, input_dim);
    m.b1.assign(hidden_dim, 0.0);
  }
  m.wout = Matrix(m.out_dim(), m.head_input_dim());
  m.bout.assign(m.out_dim(), 0.0);
  return m;
}

constexpr std::uint64_t kInitStream = 0x696e6974ull;    // "init"
constexpr std::uint64_t kRandomStream = 0x726e646dull;  // "rndm"

}  // namespace

GraderModel init_model(HeadKind head, std::size_t input_dim,
                       std::size_t hidden_dim, const GradeScale& scale,
                       std::uint64_t seed) {
  if (input_dim == 0) throw DomainError("input_dim must be >= 1");
  GraderModel m = build_model(head, input_dim, hidden_dim, scale);
  SplitMix64 rng(SplitMix64::mix(seed, kInitStream));
  auto fill_uniform = [&rng](std::vector<double>& v, std::size_t fan_in) {
    double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : v) w = (2.0 * rng.next_double() - 1.0) * a;
  };
  if (hidden_dim > 0) fill_uniform(m.w1.data, input_dim);
  fill_uniform(m.wout.data, m.head_input_dim());
  return m;
}

AuditInstance make_audit_instance(HeadKind head, std::size_t input_dim,
                                  std::size_t hidden_dim,
                                  std::size_t batch_size,
                                  const GradeScale& scale,
                                  std::uint64_t seed) {
  const auto n_grid = static_cast<std::uint64_t>(std::round(
                          (scale.max_score() - scale.min_score()) /
                          scale.grid_step())) + 1;
  AuditInstance best;
  double best_min = -1.0;
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    std::uint64_t sub_seed = SplitMix64::mix(seed, attempt);
    AuditInstance inst;
    inst.model = random_model(head, input_dim, hidden_dim, scale, sub_seed);
    SplitMix64 rng(SplitMix64::mix(sub_seed, 0xba7c4));
    inst.inputs = Matrix(batch_size, input_dim);
    for (double& v : inst.inputs.data) {
      double mag = 0.25 + rng.next_double();  // |x| bounded away from 0
      v = rng.next_below(2) == 0 ? mag : -mag;
    }
    inst.refs.resize(batch_size);
    for (double& r : inst.refs) {
      r = scale.min_score() +
          scale.grid_step() * static_cast<double>(rng.next_below(n_grid));
    }
    BatchGradient g = backward(inst.model, inst.inputs, inst.refs);
    double min_coord = std::numeric_limits<double>::infinity();
    for (const auto* arr : {&g.w1.data, &g.b1, &g.wout.data, &g.bout}) {
      for (double v : *arr) min_coord = std::min(min_coord, std::abs(v));
    }
    if (min_coord >= 3e-4) return inst;
    if (min_coord > best_min) {
      best_min = min_coord;
      best = std::move(inst);
    }
  }
  return best;
}

GraderModel random_model(HeadKind head, std::size_t input_dim,
                         std::size_t hidden_dim, const GradeScale& scale,
                         std::uint64_t seed) {
  GraderModel m = build_model(head, input_dim, hidden_dim, scale);
  SplitMix64 rng(SplitMix64::mix(seed, kRandomStream));
  // Moderate scales keep tanh unsaturated and losses O(1), so central
  // differences stay well above their roundoff floor.
  auto fill = [&rng](std::vector<double>& v, double a) {
    for (double& w : v) w = a * (2.0 * rng.next_double() - 1.0);
  };
  fill(m.w1.data, 0.35);
  fill(m.b1, 0.2);
  fill(m.wout.data, 0.35);
  fill(m.bout, 0.2);
  if (head == HeadKind::REG) {
    double mid = 0.5 * (scale.min_score() + scale.max_score());
    m.bout[0] += mid;
  }
  return m;
}

}  // namespace sla
