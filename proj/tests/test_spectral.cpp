#include <catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace hypernb;
using Catch::Approx;

namespace {

ModelParams benchmark_model(double w1 = 0.5, double w2 = 0.25) {
  Vec w(2);
  w << w1, w2;
  return balanced_model(2, {{2, 2, 1}, {4, 4, 1}}, w);
}

SpectralSummary spectrum_of(const ModelParams& p, std::int64_t n, std::uint64_t seed, int k = 8) {
  const auto s = sample_hsbm({p, n, seed, LabelMode::Blocks});
  ReducedNB R(s.graph, p.weights);
  EigOptions opt;
  opt.k = k;
  opt.seed = seed;
  const auto eig = compute_spectrum(R, opt);
  const auto c = weighted_signal(p);
  return detect_outliers(s.graph, p.weights, eig, c.vartheta, &c);
}

}  // namespace

TEST_CASE("diagonal operator", "[spectral]") {
  Vec d = Vec::LinSpaced(100, -0.9, 0.9);
  d(0) = 5;
  d(1) = -3;
  d(2) = 1;
  DenseOperator op{Mat(d.asDiagonal())};
  EigOptions opt;
  opt.k = 2;
  const auto r = top_eigs(op, opt);
  REQUIRE(r.values.size() >= 2);
  CHECK(r.values[0].real() == Approx(5).epsilon(1e-13));
  CHECK(r.values[1].real() == Approx(-3).epsilon(1e-13));
  CHECK(r.residuals[0] <= 1e-12);
  CHECK(r.residuals[1] <= 1e-12);
  CHECK(r.converged);
}

TEST_CASE("Arnoldi matches a dense eigensolver", "[spectral][property]") {
  Rng rng = Rng::stream(11, "test-spectral-dense");
  for (int trial = 0; trial < 15; ++trial) {
    const int N = 40 + static_cast<int>(rng.below(260));
    Mat M(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) M(i, j) = rng.uniform() - 0.5;
    // a few separated values on top of a circular-law bulk of radius ~ sqrt(N/12)
    for (int j = 0; j < 3; ++j) M(j, j) += (j + 2) * std::sqrt(N / 12.0) * (j % 2 ? -1 : 1);
    EigOptions opt;
    opt.k = 6;
    opt.seed = trial;
    const auto r = top_eigs(DenseOperator{M}, opt);
    REQUIRE(r.converged);
    const auto ev = oracle::eigenvalues(M);
    std::vector<cplx> dense(ev.data(), ev.data() + ev.size());
    std::sort(dense.begin(), dense.end(), [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      CHECK(oracle::count_near(ev, r.values[i], 1e-7) >= 1);
      CHECK(r.residuals[i] <= 1e-8);
    }
    // every dense value clearly inside the returned magnitude range is found
    const double floor_mag = std::abs(r.values.back()) + 1e-6;
    for (cplx z : dense) {
      if (std::abs(z) <= floor_mag) break;
      int hits = 0;
      for (cplx v : r.values) hits += std::abs(v - z) <= 1e-7;
      CHECK(hits >= 1);
    }
  }
}

TEST_CASE("conjugate pairs are returned together", "[spectral]") {
  Mat M = Mat::Zero(50, 50);
  M(0, 0) = 3;
  M(0, 1) = 4;
  M(1, 0) = -4;
  M(1, 1) = 3;
  for (int i = 2; i < 50; ++i) M(i, i) = 0.01 * i;
  EigOptions opt;
  opt.k = 1;
  const auto r = top_eigs(DenseOperator{M}, opt);
  REQUIRE(r.values.size() >= 2);
  CHECK(std::abs(r.values[0] - std::conj(r.values[1])) <= 1e-10);
  CHECK(std::abs(r.values[0]) == Approx(5).epsilon(1e-12));
}

TEST_CASE("plug-in variance parameter", "[spectral]") {
  LayeredHypergraph g(6, {2, 3}, {{{0, 1}, {2, 3}, {4, 5}}, {{0, 1, 2}, {3, 4, 5}}});
  Vec w(2);
  w << 2, -1;
  // d_1 = 2 * 3 / 6 = 1, d_2 = 3 * 2 / 6 = 1
  CHECK(vartheta_plugin(g, w) == Approx(4 * 1 * 1 + 1 * 2 * 1));
}

TEST_CASE("outlier classification on synthetic Ritz data", "[spectral]") {
  LayeredHypergraph g(2, {2}, {{{0, 1}}});
  EigResult eig;
  eig.values = {cplx(3, 0), cplx(1.2, 0.5), cplx(1.2, -0.5), cplx(-2.5, 0), cplx(1.0, 0)};
  eig.residuals = std::vector<double>(5, 0.0);
  eig.vectors = Eigen::MatrixXcd::Identity(4, 5);
  eig.converged = true;
  const auto s = detect_outliers(g, Vec::Ones(1), eig, 1.0);
  CHECK(s.outliers == std::vector<int>{0, 3});
  CHECK(s.bulk_radius_est == Approx(std::abs(cplx(1.2, 0.5))));
  CHECK(s.matched_mu == std::vector<int>{-1, -1});
  REQUIRE(s.y_vectors.size() == 2);
  // block layout: the out-coordinates of layer 0 sit at [n, 2n)
  CHECK(s.y_vectors[0].cwiseAbs().maxCoeff() == 0);

  eig.residuals[3] = 0.5;
  const auto loose = detect_outliers(g, Vec::Ones(1), eig, 1.0);
  CHECK(loose.outliers == std::vector<int>{0});
  CHECK(loose.unresolved == 1);
  CHECK(loose.bulk_radius_est == Approx(2.5));
  eig.residuals[3] = 0;

  // both outliers lie closest to mu_1 = 2.8; the farther one falls to mu_2
  SpectralConstants c;
  c.mu = Vec(2);
  c.mu << 2.8, 0.5;
  CHECK(detect_outliers(g, Vec::Ones(1), eig, 1.0, &c).matched_mu == std::vector<int>{0, 1});
  c.mu = Vec::Constant(1, 2.8);
  CHECK(detect_outliers(g, Vec::Ones(1), eig, 1.0, &c).matched_mu == std::vector<int>{0, -1});

  eig.vectors.col(0) = Eigen::VectorXcd::Zero(4);
  eig.vectors(0, 0) = cplx(1, 0) / std::sqrt(2.0);
  eig.vectors(1, 0) = cplx(0, 1) / std::sqrt(2.0);
  try {
    detect_outliers(g, Vec::Ones(1), eig, 1.0);
    FAIL("expected ComplexOutlier");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ComplexOutlier);
  }
}

TEST_CASE("single-community model has one outlier at the Perron value", "[spectral]") {
  SymTensor t2(2, 1), t3(3, 1);
  t2.set({2}, 3.0);
  t3.set({3}, 2.0);
  Vec w(2);
  w << 1.0, 0.5;
  const auto p = make_model(Vec::Ones(1), {t2, t3}, w);
  const auto c = weighted_signal(p);
  CHECK(c.mu(0) == Approx(1.0 * 3 + 0.5 * 2 * 2));
  const auto s = spectrum_of(p, 3000, 4);
  REQUIRE(s.outliers.size() == 1);
  CHECK(s.ritz[s.outliers[0]].value.real() == Approx(c.mu(0)).epsilon(0.05));
  CHECK(s.matched_mu[0] == 0);
}

TEST_CASE("two-layer benchmark: two outliers, aggregated vector orthogonal to ones", "[spectral][statistical]") {
  const auto p = benchmark_model();
  for (std::uint64_t seed : {1, 2}) {
    const auto s = spectrum_of(p, 5000, seed);
    REQUIRE(s.outliers.size() == 2);
    CHECK(std::abs(s.ritz[s.outliers[0]].value.real() - 4.0) <= 0.15);
    CHECK(std::abs(s.ritz[s.outliers[1]].value.real() - 1.25) <= 0.10);
    CHECK(s.matched_mu == std::vector<int>{0, 1});
    CHECK(ones_alignment(s.y_vectors[1]) <= 0.1);
    CHECK(ones_alignment(s.y_vectors[0]) >= 0.9);
    for (int i : s.outliers) CHECK(s.ritz[i].residual <= 1e-8);
  }
}

TEST_CASE("each benchmark layer alone is below threshold", "[spectral][statistical]") {
  for (auto [q, d] : {std::pair{2, 2}, std::pair{4, 4}}) {
    const auto p = balanced_model(2, {{q, static_cast<double>(d), 1}}, Vec::Ones(1));
    const auto s = spectrum_of(p, 5000, 3);
    REQUIRE(s.outliers.size() == 1);
    CHECK(s.ritz[s.outliers[0]].value.real() == Approx((q - 1) * d).epsilon(0.05));
  }
}

TEST_CASE("outlier classification is invariant under weight rescaling", "[spectral][property]") {
  std::vector<std::vector<bool>> flags;
  std::vector<double> base;
  for (double c : {1.0, 0.5, 2.0}) {
    const auto s = spectrum_of(benchmark_model(0.5 * c, 0.25 * c), 3000, 5);
    std::vector<bool> f(s.ritz.size(), false);
    for (int i : s.outliers) f[i] = true;
    flags.push_back(f);
    for (std::size_t i = 0; i < s.outliers.size(); ++i) {
      const double v = s.ritz[s.outliers[i]].value.real() / c;
      if (c == 1.0) base.push_back(v);
      else CHECK(v == Approx(base.at(i)).epsilon(1e-8));
    }
  }
  CHECK(flags[0] == flags[1]);
  CHECK(flags[0] == flags[2]);
}

TEST_CASE("pseudo-eigenvector Gram matrices by direct summation", "[spectral]") {
  // two communities of two vertices, one graph layer and one 3-uniform layer
  LayeredHypergraph g(4, {2, 3}, {{{0, 1}, {1, 2}, {2, 3}, {0, 3}}, {{0, 1, 2}, {1, 2, 3}}});
  Vec w(2);
  w << 1.0, 0.5;
  const auto p = balanced_model(2, {{2, 2, 1}, {3, 2, 1}}, w);
  const auto c = weighted_signal(p);
  Assignment truth({0, 0, 1, 1}, 2);
  const auto pe = build_pseudo_eigs(g, p, c, truth, 1);
  const Mat B = oracle::dense_B(g, w);
  const Mat J = oracle::dense_J(g);
  const auto o = oracle::oriented_list(g);
  const std::size_t m = o.size();
  for (int i = 0; i < c.r0; ++i)
    for (int j = 0; j < c.r0; ++j) {
      // <u_i, v_j> = sum_{a,b} (B J chi_i)(a) (B^T D_w chi_j)(a) / (n mu_i mu_j^2)
      double s = 0;
      for (std::size_t a = 0; a < m; ++a) {
        double ua = 0, va = 0;
        for (std::size_t b = 0; b < m; ++b) {
          double jchi = 0;
          for (std::size_t e = 0; e < m; ++e) jchi += J(b, e) * c.phi(truth[o[e].x], i);
          ua += B(a, b) * jchi;
          va += B(b, a) * w(o[b].layer) * c.phi(truth[o[b].x], j);
        }
        s += ua * va;
      }
      s /= 4 * c.mu(i) * c.mu(j) * c.mu(j);
      CHECK(pe.UtV(i, j) == Approx(s).epsilon(1e-12).margin(1e-13));
    }
  CHECK(pe.sigma_ell(0) == Approx(c.mu(0)));
  CHECK(pe.ell == 1);
}

TEST_CASE("pseudo-eigenvectors beyond the depth cap are flagged", "[spectral]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  const auto s = sample_hsbm({p, 400, 1, LabelMode::Blocks});
  const int cap = depth_cap(p, c, 400);
  CHECK(cap >= 0);
  const auto pe = build_pseudo_eigs(s.graph, p, c, s.labels, cap + 1);
  CHECK(pe.depth_too_large);
  CHECK((pe.U.array().isFinite()).all());
  CHECK((pe.V.array().isFinite()).all());
}

TEST_CASE("Perron pseudo-eigenvectors are nearly dual", "[spectral][statistical]") {
  const auto p = benchmark_model();
  const auto c = weighted_signal(p);
  double mean = 0;
  const int seeds = 3;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = sample_hsbm({p, 4000, static_cast<std::uint64_t>(seed), LabelMode::Blocks});
    mean += build_pseudo_eigs(s.graph, p, c, s.labels, 1).UtV(0, 0) / seeds;
  }
  CHECK(std::abs(mean - 1) <= 0.3);
}
