#include <catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace hypernb;
using Catch::Approx;

namespace {

ModelParams benchmark_model() {
  Vec w(2);
  w << 0.5, 0.25;
  return balanced_model(2, {{2, 2, 1}, {4, 4, 1}}, w);
}

// Two q=2 layers on three equal communities whose signal matrices do not commute.
ModelParams noncommuting_pair(double w1, double w2) {
  Mat Q1(3, 3), Q2(3, 3);
  Q1 << 7.0 / 6, 1.0 / 6, 2.0 / 3, 1.0 / 6, 7.0 / 6, 2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3;
  Q2 << 16.0 / 15, 7.0 / 15, 7.0 / 15, 7.0 / 15, 23.0 / 30, 23.0 / 30, 7.0 / 15, 23.0 / 30, 23.0 / 30;
  Vec pi = Vec::Constant(3, 1.0 / 3);
  std::vector<SymTensor> ts;
  for (const Mat* Q : {&Q1, &Q2}) {
    SymTensor t(2, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        Composition c(3, 0);
        ++c[i];
        ++c[j];
        t.set(c, (*Q)(i, j) * 3);
      }
    ts.push_back(t);
  }
  Vec w(2);
  w << w1, w2;
  return make_model(pi, ts, w);
}

}  // namespace

TEST_CASE("layer_from_tensor on the 2x2 graph case", "[model]") {
  Vec pi(2);
  pi << 0.5, 0.5;
  const auto L = layer_from_tensor(tensor_two_param(2, 2, 3, 1), pi);
  Mat D(2, 2), Q(2, 2);
  D << 3, 1, 1, 3;
  Q << 1.5, 0.5, 0.5, 1.5;
  CHECK((L.D - D).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((L.Q - Q).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(L.d == Approx(2).epsilon(1e-15));
}

TEST_CASE("layer_from_tensor matches the ordered-tuple oracle", "[model]") {
  Rng rng = Rng::stream(7, "test-model-tensors");
  for (int trial = 0; trial < 60; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(4));
    const int q = 2 + static_cast<int>(rng.below(4));
    const Vec pi = oracle::random_pi(rng, r);
    const auto t = oracle::random_tensor(rng, r, q, pi);
    const auto L = layer_from_tensor(t, pi);
    const Mat D = oracle::dense_D(t, pi);
    CHECK((L.D - D).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, D.cwiseAbs().maxCoeff()));
    CHECK((L.D - L.D.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    const Vec rows = L.Q.rowwise().sum();
    CHECK((rows.array() - L.d).abs().maxCoeff() <= 1e-10 * std::max(1.0, L.d));
  }
}

TEST_CASE("non-commuting pair has degree two per layer", "[model]") {
  const auto p = noncommuting_pair(1, 0.51);
  CHECK(p.layers[0].d == Approx(2).epsilon(1e-12));
  CHECK(p.layers[1].d == Approx(2).epsilon(1e-12));
}

TEST_CASE("single community gives a 1x1 signal matrix", "[model]") {
  Vec pi = Vec::Ones(1);
  SymTensor t(3, 1);
  t.set({3}, 5.0);
  const auto L = layer_from_tensor(t, pi);
  REQUIRE(L.Q.rows() == 1);
  CHECK(L.Q(0, 0) == Approx(5.0));
  CHECK(L.d == Approx(5.0));
}

TEST_CASE("layer_from_tensor rejects bad tensors", "[model]") {
  Vec pi(2);
  pi << 0.5, 0.5;
  SymTensor t(2, 2);
  CHECK_THROWS_AS(t.set({2, 0}, -1.0), Error);
  CHECK_THROWS_AS(t.set({1, 0}, 1.0), Error);
  t.set({2, 0}, 3);
  t.set({1, 1}, 1);
  t.set({0, 2}, 1);
  try {
    layer_from_tensor(t, pi);
    FAIL("expected AssumptionViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AssumptionViolation);
  }
}

TEST_CASE("weighted_signal on the two-layer benchmark", "[model]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  CHECK(c.mu(0) == Approx(4).epsilon(1e-12));
  CHECK(c.mu(1) == Approx(1.25).epsilon(1e-12));
  CHECK(c.d_w == Approx(4).epsilon(1e-12));
  CHECK(c.vartheta == Approx(1.25).epsilon(1e-12));
  CHECK(c.tau(1) == Approx(0.8).epsilon(1e-12));
  CHECK(c.r0 == 2);
}

TEST_CASE("weighted_signal on the non-commuting pair matches the quadratic formula", "[model]") {
  const double w1 = 1, w2 = 0.51;
  const auto c = weighted_signal(noncommuting_pair(w1, w2));
  const double disc = std::sqrt((w1 - 0.6 * w2) * (w1 - 0.6 * w2) + 1.8 * w1 * w2);
  const double lp = (w1 + 0.6 * w2 + disc) / 2, lm = (w1 + 0.6 * w2 - disc) / 2;
  CHECK(c.mu(0) == Approx(2 * (w1 + w2)).epsilon(1e-12));
  CHECK(c.mu(1) == Approx(lp).epsilon(1e-12));
  CHECK(c.mu(2) == Approx(lm).margin(1e-12));
  CHECK(c.vartheta == Approx(2 * (w1 * w1 + w2 * w2)).epsilon(1e-12));
}

TEST_CASE("zero weights are degenerate", "[model]") {
  auto p = benchmark_model();
  p.weights.setZero();
  try {
    weighted_signal(p);
    FAIL("expected DegenerateModel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateModel);
  }
}

TEST_CASE("gamma for graph layers is 1/(1-tau)", "[model]") {
  Vec w(2);
  w << 1.0, 0.7;
  const auto p = balanced_model(2, {{2, 3, 1.5}, {2, 2, 1}}, w);
  const auto c = weighted_signal(p);
  for (int i = 0; i < c.r0; ++i) CHECK(c.gamma(i) == Approx(1 / (1 - c.tau(i))).epsilon(1e-12));
}

TEST_CASE("gamma matches a dense tuple-sum evaluation", "[model]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  // Q_{(q-2) w^2 / vartheta} from ordered-tuple D matrices.
  Mat Qa = Mat::Zero(2, 2);
  for (int k = 0; k < p.K(); ++k) {
    const auto& L = p.layers[k];
    const double a = (L.q - 2) * p.weights(k) * p.weights(k) / c.vartheta;
    Qa += a * (L.q - 1) * oracle::dense_D(L.tensor, p.pi) * p.pi.asDiagonal();
  }
  for (int i = 0; i < c.r0; ++i) {
    double m = 0;
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) m += c.phi(x, i) * p.pi(x) * Qa(x, y) * c.phi(y, i);
    const double expect = (1 + c.tau(i) * m) / (1 - c.tau(i));
    CHECK(gamma_overlap(c, p, i) == Approx(expect).epsilon(1e-12));
    CHECK(gamma_overlap(c, p, i) >= 1.0);
  }
  CHECK(c.gamma(1) == Approx(6.2).epsilon(1e-12));
  CHECK_THROWS_AS(gamma_overlap(c, p, 2), Error);
}

TEST_CASE("gamma grows without bound as tau approaches one", "[model]") {
  double prev = 0;
  for (double mu : {2.5, 2.2, 2.0, 1.9, 1.8, 1.75, 1.735}) {
    // single graph layer, d=3: vartheta = 3 at w = 1, tau = 3 / mu^2
    const auto p = balanced_model(2, {{2, 3, mu}}, Vec::Ones(1));
    const auto c = weighted_signal(p);
    REQUIRE(c.r0 == 2);
    CHECK(c.gamma(1) > prev);
    prev = c.gamma(1);
  }
  CHECK(prev > 100);
}

TEST_CASE("cov_matrices at depth zero is the identity", "[model]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  const auto cov = cov_matrices(c, p, 0);
  CHECK((cov.C - Mat::Identity(c.r0, c.r0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cov_matrices for graph layers is a plain geometric sum", "[model]") {
  Vec w(1);
  w << 1.0;
  const auto p = balanced_model(2, {{2, 3, 2}}, w);
  const auto c = weighted_signal(p);
  const auto cov = cov_matrices(c, p, 3);
  for (int i = 0; i < c.r0; ++i) {
    const double t = c.tau(i);
    CHECK(cov.C(i, i) == Approx((1 - std::pow(t, 4)) / (1 - t)).epsilon(1e-12));
  }
}

TEST_CASE("cov_matrices agrees with term-by-term summation", "[model]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  const Vec a = coeff_q2_w2(c, p);
  const Mat M = phi_form(c, p, a, c.r0);
  for (int t = 0; t <= 10; ++t) {
    const auto cov = cov_matrices(c, p, t);
    for (int i = 0; i < c.r0; ++i)
      for (int j = 0; j < c.r0; ++j) {
        const double tij = c.vartheta / (c.mu(i) * c.mu(j));
        double s = 0;
        for (int u = 0; u <= t; ++u) s += (i == j ? std::pow(tij, u) : 0.0) + (u ? std::pow(tij, u) * M(i, j) : 0.0);
        CHECK(cov.C(i, j) == Approx(s).epsilon(1e-12).margin(1e-14));
      }
    if (t > 0) {
      const auto prev = cov_matrices(c, p, t - 1);
      for (int i = 0; i < c.r0; ++i) {
        const double tii = c.tau(i);
        const double added = std::pow(tii, t) * (1 + M(i, i));
        CHECK(cov.C(i, i) - prev.C(i, i) == Approx(added).epsilon(1e-10).margin(1e-14 * std::abs(cov.C(i, i))));
      }
    }
  }
}

TEST_CASE("cov_matrices respects the eigenvalue sandwich", "[model][property]") {
  Rng rng = Rng::stream(11, "test-model-cov");
  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 60; ++trial) {
    const int r = 2 + static_cast<int>(rng.below(2));
    const Vec pi = oracle::random_pi(rng, r);
    std::vector<SymTensor> ts;
    const int K = 1 + static_cast<int>(rng.below(3));
    Vec w(K);
    for (int k = 0; k < K; ++k) {
      ts.push_back(oracle::random_tensor(rng, r, 2 + static_cast<int>(rng.below(3)), pi, 3.0));
      w(k) = rng.uniform() * 2 - 0.5;
    }
    ModelParams p;
    SpectralConstants c;
    try {
      p = make_model(pi, ts, w);
      c = weighted_signal(p);
    } catch (const Error&) {
      continue;
    }
    ++tested;
    const double hi = cov_upper_bound(c, p);
    for (int t : {0, 1, 3, 8, 30}) {
      const auto cov = cov_matrices(c, p, t);
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov.C + cov.C.transpose()));
      CHECK(es.eigenvalues().minCoeff() >= 1 - 1e-8);
      CHECK(es.eigenvalues().maxCoeff() <= hi + 1e-8);
    }
  }
  CHECK(tested >= 20);
}

TEST_CASE("Q eigenvalues are bounded below by -d/(q-1)", "[model][property]") {
  Rng rng = Rng::stream(3, "test-model-lower-bound");
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(4));
    const int q = 2 + static_cast<int>(rng.below(4));
    const Vec pi = oracle::random_pi(rng, r);
    const auto L = layer_from_tensor(oracle::random_tensor(rng, r, q, pi), pi);
    const auto es = pi_eigensystem(L.D, pi);
    CHECK(es.mu.minCoeff() >= -L.d / (q - 1) - 1e-10);
  }
}

TEST_CASE("tau is invariant under weight rescaling", "[model][property]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  for (double s : {-3.0, 0.1, 7.0}) {
    auto p2 = p;
    p2.weights *= s;
    const auto c2 = weighted_signal(p2);
    for (int i = 0; i < p.r; ++i) CHECK(c2.tau(i) == Approx(c.tau(i)).epsilon(1e-12));
  }
}

TEST_CASE("ones is an eigenvector of Q_a and Phi is Pi-orthonormal", "[model][property]") {
  Rng rng = Rng::stream(5, "test-model-perron");
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 2 + static_cast<int>(rng.below(3));
    const Vec pi = oracle::random_pi(rng, r);
    std::vector<SymTensor> ts{oracle::random_tensor(rng, r, 2, pi, 2.0), oracle::random_tensor(rng, r, 3, pi, 2.0)};
    Vec w(2);
    w << 0.5 + rng.uniform(), 0.5 + rng.uniform();
    const auto p = make_model(pi, ts, w);
    const Vec a = w.cwiseAbs2();
    const Mat Qa = weighted_Q(p, a);
    const Vec ones = Vec::Ones(r);
    CHECK((Qa * ones - weighted_degree(p, a) * ones).cwiseAbs().maxCoeff() <= 1e-10 * weighted_degree(p, a));
    const auto es = pi_eigensystem(weighted_D(p, w), pi);
    const Mat G = es.phi.transpose() * pi.asDiagonal() * es.phi;
    CHECK((G - Mat::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-8);
    for (int i = 0; i + 1 < r; ++i) CHECK(std::abs(es.mu(i)) >= std::abs(es.mu(i + 1)) - 1e-12);
  }
}

TEST_CASE("two-parameter tensor with a equal to b has no signal", "[model]") {
  Vec pi(3);
  pi << 0.2, 0.3, 0.5;
  const auto L = layer_from_tensor(tensor_two_param(3, 3, 2, 2), pi);
  const auto es = pi_eigensystem(L.D, pi);
  CHECK(es.mu(0) == Approx(L.d));
  CHECK(std::abs(es.mu(1)) < 1e-12);
}

TEST_CASE("two-parameter tensor hits a prescribed degree and second eigenvalue", "[model]") {
  auto [a, b] = two_param_from_spectrum(2, 4, 4, 1);
  const Vec pi = Vec::Constant(2, 0.5);
  const auto L = layer_from_tensor(tensor_two_param(2, 4, a, b), pi);
  const auto es = pi_eigensystem(L.D, pi);
  CHECK(L.d == Approx(4));
  CHECK(es.mu(1) == Approx(1));
  CHECK(a == Approx(11));
  CHECK(b == Approx(3));
}

TEST_CASE("model JSON round trip is bit-exact", "[model]") {
  Rng rng = Rng::stream(9, "test-model-json");
  const Vec pi = oracle::random_pi(rng, 3);
  std::vector<SymTensor> ts{oracle::random_tensor(rng, 3, 2, pi), oracle::random_tensor(rng, 3, 4, pi)};
  Vec w(2);
  w << 0.3, -1.7;
  const auto p = make_model(pi, ts, w);
  const std::string s1 = model_to_json(p).dump();
  const std::string s2 = model_to_json(model_from_json(json::parse(s1))).dump();
  CHECK(s1 == s2);
  const std::string b1 = model_to_json(benchmark_model()).dump();
  CHECK(model_to_json(model_from_json(json::parse(b1))).dump() == b1);
}
