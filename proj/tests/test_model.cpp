#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sla/error.hpp"
#include "sla/model.hpp"
#include "sla/rng.hpp"
#include "test_util.hpp"

using namespace sla;

namespace {

GraderModel zero_model(HeadKind head, std::size_t d, std::size_t h) {
  GraderModel m;
  m.head = head;
  m.input_dim = d;
  m.hidden_dim = h;
  m.scale = GradeScale::six_level();
  if (h > 0) {
    m.w1 = Matrix(h, d);
    m.b1.assign(h, 0.0);
  }
  m.wout = Matrix(m.out_dim(), m.head_input_dim());
  m.bout.assign(m.out_dim(), 0.0);
  return m;
}

// Straight-line recomputation of the forward pass, accumulating in long
// double and iterating in reverse index order; independent of the
// library's loop structure.
std::vector<double> oracle_forward(const GraderModel& m,
                                   std::span<const double> x) {
  std::vector<double> head_in(x.begin(), x.end());
  if (m.hidden_dim > 0) {
    std::vector<double> hidden(m.hidden_dim);
    for (std::size_t i = m.hidden_dim; i-- > 0;) {
      long double z = m.b1[i];
      for (std::size_t j = m.input_dim; j-- > 0;) {
        z += static_cast<long double>(m.w1.at(i, j)) * x[j];
      }
      hidden[i] = std::tanh(static_cast<double>(z));
    }
    head_in = hidden;
  }
  std::vector<double> out(m.out_dim());
  for (std::size_t o = m.out_dim(); o-- > 0;) {
    long double z = m.bout[o];
    for (std::size_t j = head_in.size(); j-- > 0;) {
      z += static_cast<long double>(m.wout.at(o, j)) * head_in[j];
    }
    out[o] = static_cast<double>(z);
  }
  return out;
}

Matrix random_batch(SplitMix64& rng, std::size_t n, std::size_t d) {
  Matrix xs(n, d);
  for (double& v : xs.data) {
    double mag = 0.25 + rng.next_double();
    v = rng.next_below(2) == 0 ? mag : -mag;
  }
  return xs;
}

std::vector<double> random_grid_refs(SplitMix64& rng, std::size_t n) {
  std::vector<double> refs(n);
  for (double& r : refs) {
    r = 1.0 + 0.5 * static_cast<double>(rng.next_below(11));
  }
  return refs;
}

}  // namespace

TEST_CASE("forward of the zero model is zero") {
  auto m = zero_model(HeadKind::CE, 4, 3);
  std::vector<double> x = {0.3, -1.2, 0.7, 2.0};
  for (double v : forward(m, x)) CHECK(v == 0.0);
}

TEST_CASE("forward with no hidden layer is the affine head") {
  auto m = zero_model(HeadKind::CE, 6, 0);
  for (std::size_t o = 0; o < 6; ++o) {
    for (std::size_t j = 0; j < 6; ++j) m.wout.at(o, j) = 10.0 * o + j;
  }
  std::vector<double> e1 = {1, 0, 0, 0, 0, 0};
  auto out = forward(m, e1);
  for (std::size_t o = 0; o < 6; ++o) CHECK(out[o] == m.wout.at(o, 0));
}

TEST_CASE("forward matches an independent recomputation") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto head = trial % 3 == 0 ? HeadKind::CE
               : trial % 3 == 1 ? HeadKind::FA
                                : HeadKind::REG;
    auto m = random_model(head, 5, trial % 2 ? 7 : 0,
                          GradeScale::six_level(), 100 + trial);
    auto x = slatest::random_vector(rng, 5, -2.0, 2.0);
    auto got = forward(m, x);
    auto want = oracle_forward(m, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward is deterministic") {
  auto m = random_model(HeadKind::FA, 8, 4, GradeScale::six_level(), 3);
  std::vector<double> x = {1, -1, 0.5, 2, -0.3, 0.9, -2, 0.1};
  auto a = forward(m, x);
  auto b = forward(m, x);
  CHECK(a == b);
}

TEST_CASE("forward rejects dimension mismatch") {
  auto m = zero_model(HeadKind::REG, 4, 2);
  std::vector<double> x = {1, 2, 3};
  CHECK_THROWS_AS(forward(m, x), DomainError);
}

TEST_CASE("softmax of zeros is uniform") {
  std::vector<double> z(6, 0.0);
  auto dist = softmax(z);
  for (double p : dist.probs) CHECK(p == doctest::Approx(1.0 / 6).epsilon(1e-15));
  check_distribution(dist);
}

TEST_CASE("softmax is shift invariant") {
  std::vector<double> z = {0.4, -1.0, 2.2, 0.0, 1.5, -0.7};
  auto a = softmax(z);
  for (double& v : z) v += 123.25;
  auto b = softmax(z);
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    CHECK(a.probs[i] == doctest::Approx(b.probs[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax survives magnitude-1000 logits") {
  std::vector<double> z = {1000.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  auto dist = softmax(z);
  check_distribution(dist);
  CHECK(dist.probs[0] == doctest::Approx(1.0));
  std::vector<double> zn = {-1000.0, 0.0, 1000.0};
  check_distribution(softmax(zn));
  std::vector<double> inf = {std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS(softmax(inf), DomainError);
}

TEST_CASE("ce_loss of uniform logits is log C") {
  std::vector<double> z(6, 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(ce_loss(z, t) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
  }
}

TEST_CASE("ce_loss vanishes when the target logit dominates") {
  std::vector<double> z = {50.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(ce_loss(z, 0) < 1e-12);
}

TEST_CASE("ce_loss accepts labels and rejects unknown ones") {
  auto scale = GradeScale::six_level();
  std::vector<double> z(6, 0.0);
  CHECK(ce_loss(z, "B", scale) == ce_loss(z, std::size_t{1}));
  CHECK_THROWS_WITH_AS(ce_loss(z, "Q", scale), "unknown grade label 'Q'",
                       DomainError);
}

TEST_CASE("losses are non-negative everywhere") {
  SplitMix64 rng(22);
  auto scale = GradeScale::six_level();
  for (int trial = 0; trial < 100; ++trial) {
    auto z = slatest::random_vector(rng, 6, -10.0, 10.0);
    CHECK(ce_loss(z, rng.next_below(6)) >= 0.0);
    double ref = 1.0 + 0.5 * static_cast<double>(rng.next_below(11));
    CHECK(fa_loss(z, ref, scale) >= 0.0);
    CHECK(reg_loss(20.0 * rng.next_double() - 10.0, ref) >= 0.0);
  }
}

TEST_CASE("backward is deterministic") {
  auto inst = make_audit_instance(HeadKind::FA, 5, 4, 3,
                                  GradeScale::six_level(), 13);
  auto a = backward(inst.model, inst.inputs, inst.refs);
  auto b = backward(inst.model, inst.inputs, inst.refs);
  CHECK(a.w1.data == b.w1.data);
  CHECK(a.b1 == b.b1);
  CHECK(a.wout.data == b.wout.data);
  CHECK(a.bout == b.bout);
  CHECK(a.loss == b.loss);
}

TEST_CASE("ce_loss matches -log(softmax) on random logits") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = slatest::random_vector(rng, 6, -5.0, 5.0);
    auto target = rng.next_below(6);
    double direct = -std::log(softmax(z).probs[target]);
    CHECK(ce_loss(z, target) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("expected_score of the uniform distribution is the scale midpoint") {
  ClassDistribution dist{std::vector<double>(6, 1.0 / 6)};
  CHECK(expected_score(dist, GradeScale::six_level()) ==
        doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("expected_score of one-hot equals the class score exactly") {
  auto scale = GradeScale::six_level();
  ClassDistribution b{{0, 1, 0, 0, 0, 0}};
  CHECK(expected_score(b, scale) == 5.0);
}

TEST_CASE("expected_score of a midpoint mix") {
  ClassDistribution mix{{0.5, 0.5, 0, 0, 0, 0}};
  CHECK(expected_score(mix, GradeScale::six_level()) ==
        doctest::Approx(5.5).epsilon(1e-14));
}

TEST_CASE("expected_score stays in score bounds for random distributions") {
  SplitMix64 rng(31);
  auto scale = GradeScale::six_level();
  for (int trial = 0; trial < 200; ++trial) {
    auto z = slatest::random_vector(rng, 6, -30.0, 30.0);
    double e = expected_score(softmax(z), scale);
    CHECK(e >= scale.min_score());
    CHECK(e <= scale.max_score());
  }
}

TEST_CASE("fa_loss examples") {
  auto scale = GradeScale::six_level();
  std::vector<double> at_b = {0.0, 60.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(fa_loss(at_b, 5.0, scale) < 1e-20);
  std::vector<double> uniform(6, 0.0);
  CHECK(fa_loss(uniform, 3.5, scale) < 1e-24);
  CHECK(fa_loss(uniform, 4.5, scale) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(fa_loss(uniform, 3.3, scale), DomainError);
}

TEST_CASE("reg_loss is plain squared error") {
  CHECK(reg_loss(4.0, 4.0) == 0.0);
  CHECK(reg_loss(2.5, 4.0) == 2.25);
  CHECK(reg_loss(6.0, 1.0) == 25.0);
}

TEST_CASE("CE gradient w.r.t. logits is softmax minus onehot") {
  auto m = zero_model(HeadKind::CE, 3, 0);  // zero weights: logits all 0
  Matrix xs(1, 3);
  xs.at(0, 0) = 1.0;
  std::vector<double> refs = {6.0};  // class A = index 0
  auto g = backward(m, xs, refs);
  // d loss / d bout equals d loss / d logits for a single example.
  CHECK(g.bout[0] == doctest::Approx(1.0 / 6 - 1.0).epsilon(1e-14));
  for (std::size_t c = 1; c < 6; ++c) {
    CHECK(g.bout[c] == doctest::Approx(1.0 / 6).epsilon(1e-14));
  }
}

TEST_CASE("FA gradient vanishes at zero loss") {
  // Uniform logits give expected score 3.5; reference 3.5 is stationary.
  auto m = zero_model(HeadKind::FA, 3, 2);
  Matrix xs(2, 3);
  xs.at(0, 0) = 0.7;
  xs.at(1, 2) = -0.4;
  std::vector<double> refs = {3.5, 3.5};
  auto g = backward(m, xs, refs);
  for (double v : g.wout.data) CHECK(std::abs(v) < 1e-14);
  for (double v : g.bout) CHECK(std::abs(v) < 1e-14);
  CHECK(g.loss < 1e-24);
}

TEST_CASE("analytic gradients match finite differences for all heads") {
  for (HeadKind head : {HeadKind::CE, HeadKind::FA, HeadKind::REG}) {
    for (int trial = 0; trial < 3; ++trial) {
      auto inst = make_audit_instance(head, 6, trial == 2 ? 0 : 5, 4,
                                      GradeScale::six_level(),
                                      50 + static_cast<std::uint64_t>(trial));
      CHECK(grad_check(inst.model, inst.inputs, inst.refs, 1e-5) < 1e-6);
    }
  }
}


TEST_CASE("grad_check is defined at FA stationary points") {
  // Saturated one-hot at B with matching reference: zero loss, and both
  // analytic and finite-difference gradients are ~0.
  auto saturated = zero_model(HeadKind::FA, 3, 0);
  saturated.bout[1] = 60.0;
  Matrix xs(1, 3);
  xs.at(0, 1) = 0.5;
  std::vector<double> ref_b = {5.0};
  double err = grad_check(saturated, xs, ref_b, 1e-5);
  CHECK(std::isfinite(err));
  CHECK(err < 1e-6);

  // Uniform logits with reference 3.5 are also stationary, but softmax
  // curvature leaves O(step^2) noise in the differences; the error must
  // still be defined and the gradient magnitudes themselves ~0.
  auto uniform = zero_model(HeadKind::FA, 3, 0);
  CHECK(std::isfinite(grad_check(uniform, xs, {std::vector<double>{3.5}}, 1e-5)));
  auto g = backward(uniform, xs, std::vector<double>{3.5});
  for (double v : g.bout) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("backward rejects malformed batches") {
  auto m = zero_model(HeadKind::CE, 3, 2);
  Matrix empty(0, 3);
  std::vector<double> none;
  CHECK_THROWS_AS(backward(m, empty, none), DomainError);
  Matrix xs(2, 3);
  std::vector<double> one_ref = {4.0};
  CHECK_THROWS_AS(backward(m, xs, one_ref), DomainError);
}

TEST_CASE("init_model draws weights within +-1/sqrt(fan_in), biases zero") {
  auto m = init_model(HeadKind::FA, 16, 8, GradeScale::six_level(), 9);
  double bound1 = 1.0 / std::sqrt(16.0);
  for (double w : m.w1.data) CHECK(std::abs(w) <= bound1);
  double bound2 = 1.0 / std::sqrt(8.0);
  for (double w : m.wout.data) CHECK(std::abs(w) <= bound2);
  for (double b : m.b1) CHECK(b == 0.0);
  for (double b : m.bout) CHECK(b == 0.0);

  auto again = init_model(HeadKind::FA, 16, 8, GradeScale::six_level(), 9);
  CHECK(m.w1.data == again.w1.data);
  auto other = init_model(HeadKind::FA, 16, 8, GradeScale::six_level(), 10);
  CHECK(m.w1.data != other.w1.data);
}
