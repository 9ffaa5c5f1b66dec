#include <catch_amalgamated.hpp>

#include <numeric>

#include "oracles.hpp"

using namespace hypernb;
using Catch::Approx;

namespace {

Assignment random_labels(Rng& rng, std::size_t n, int r) {
  std::vector<int> lab(n);
  for (auto& l : lab) l = static_cast<int>(rng.below(r));
  return Assignment(std::move(lab), r);
}

double count_label(const Assignment& a, int l) {
  return static_cast<double>(std::count(a.labels.begin(), a.labels.end(), l));
}

// Best permutation by brute force over a square score matrix.
double brute_force_max(const std::vector<std::vector<double>>& w) {
  std::vector<int> perm(w.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i][perm[i]];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("informative vector selection", "[cluster]") {
  const int n = 1000;
  Vec alt(n);
  for (int x = 0; x < n; ++x) alt(x) = x % 2 ? 1.0 : -1.0;
  SECTION("y1 aligned with ones picks y2") {
    const auto s = select_informative(Vec::Ones(n), 3 * alt);
    CHECK(s.chose_second);
    CHECK(s.alignment == Approx(1));
    CHECK(s.u.squaredNorm() == Approx(n));
    CHECK((s.u - alt).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("y1 orthogonal to ones is kept") {
    const auto s = select_informative(0.1 * alt, Vec::Ones(n));
    CHECK_FALSE(s.chose_second);
    CHECK(s.alignment == 0);
    CHECK(s.u.squaredNorm() == Approx(n));
  }
  SECTION("the cut is 1/log n") {
    const double target = 1.0 / std::log(double(n));
    // y1 = alt + c 1 has alignment c / sqrt(1 + c^2)
    for (double f : {0.9, 1.1}) {
      const double a = f * target, c = a / std::sqrt(1 - a * a);
      const Vec y1 = alt + c * Vec::Ones(n);
      CHECK(select_informative(y1, Vec::Ones(n)).chose_second == (f > 1));
    }
  }
  SECTION("zero vectors") {
    try {
      select_informative(Vec::Zero(n), alt);
      FAIL("expected ZeroVector");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ZeroVector);
    }
    CHECK_THROWS_AS(select_informative(Vec::Ones(n), Vec::Zero(n)), Error);
    CHECK_THROWS_AS(select_informative(Vec::Ones(n), Vec::Ones(n + 1)), Error);
  }
}

TEST_CASE("randomized rounding", "[cluster]") {
  const int n = 10000;
  SECTION("zero vector rounds by fair coins") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto a = round_randomized(Vec::Zero(n), 1.0, seed);
      CHECK(std::abs(count_label(a, 0) - n / 2.0) <= 3 * std::sqrt(double(n)));
    }
  }
  SECTION("at the clamp the tilt is total; beyond it there is none") {
    const double T = 2.5;
    CHECK(count_label(round_randomized(Vec::Constant(n, T), T, 1), 0) == n);
    CHECK(count_label(round_randomized(Vec::Constant(n, -T), T, 1), 1) == n);
    CHECK(count_label(round_randomized(Vec::Constant(n, T * 1.001), T, 1), 0) / n == Approx(0.5).margin(0.02));
  }
  SECTION("interior tilt matches 1/2 + u / 2T") {
    const int N = 40000;
    const double T = 4, u = 1;
    const double p = 0.5 + u / (2 * T);
    const double got = count_label(round_randomized(Vec::Constant(N, u), T, 3), 0) / N;
    CHECK(std::abs(got - p) <= 4 * std::sqrt(p * (1 - p) / N));
  }
  SECTION("deterministic and thread-independent") {
    Rng rng = Rng::stream(4, "test-cluster-round");
    Vec u(n);
    for (int x = 0; x < n; ++x) u(x) = 4 * rng.uniform() - 2;
    set_num_threads(1);
    const auto a = round_randomized(u, 1.5, 9);
    set_num_threads(4);
    const auto b = round_randomized(u, 1.5, 9);
    set_num_threads(0);
    CHECK(a.labels == b.labels);
    CHECK(a.labels != round_randomized(u, 1.5, 10).labels);
  }
  SECTION("threshold must be positive") {
    try {
      round_randomized(Vec::Zero(4), 0.0, 1);
      FAIL("expected InvalidThreshold");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidThreshold);
    }
    CHECK_THROWS_AS(round_randomized(Vec::Zero(4), -1.0, 1), Error);
  }
  CHECK(default_threshold(2, 6.2) == Approx(2 * std::sqrt(2.0) * 2 * std::sqrt(6.2)));
}

TEST_CASE("sign rounding", "[cluster]") {
  Vec u(6);
  u << 1, -2, 0.5, -0.1, 3, -1;
  Assignment truth({0, 1, 0, 1, 0, 1}, 2);
  CHECK(round_sign(u).labels == truth.labels);
  CHECK(overlap(truth, round_sign(u), 2) == 1);
  CHECK(overlap(truth, round_sign(-u), 2) == 1);
  const auto z1 = round_sign(Vec::Zero(2000), 5);
  CHECK(z1.labels == round_sign(Vec::Zero(2000), 5).labels);
  CHECK(count_label(z1, 0) / 2000 == Approx(0.5).margin(0.05));
}

TEST_CASE("overlap", "[cluster]") {
  Rng rng = Rng::stream(5, "test-cluster-overlap");
  SECTION("identity and relabelling") {
    const auto t = random_labels(rng, 500, 3);
    CHECK(overlap(t, t, 3) == 1);
    std::vector<int> cyc(t.labels);
    for (int& l : cyc) l = (l + 1) % 3;
    CHECK(overlap(t, Assignment(cyc, 3), 3) == 1);
  }
  SECTION("random guess for two classes") {
    const auto t = random_labels(rng, 10000, 2);
    CHECK(overlap(t, random_labels(rng, 10000, 2), 2) == Approx(0.5).margin(0.02));
  }
  SECTION("constant estimator gets the largest class") {
    Assignment t({0, 0, 0, 1, 1, 2, 2, 2, 2, 2}, 3);
    CHECK(overlap(t, Assignment(std::vector<int>(10, 0), 1), 3) == Approx(0.5));
  }
  SECTION("symmetric and invariant in both arguments") {
    for (int trial = 0; trial < 30; ++trial) {
      const int r = 2 + static_cast<int>(rng.below(5));
      const auto a = random_labels(rng, 200, r), b = random_labels(rng, 200, r);
      std::vector<int> perm(r);
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = r - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      std::vector<int> pa(a.labels), pb(b.labels);
      for (int& l : pa) l = perm[l];
      for (int& l : pb) l = perm[(l + 1) % r];
      const double o = overlap(a, b, r);
      CHECK(overlap(b, a, r) == Approx(o).epsilon(1e-15));
      CHECK(overlap(Assignment(pa, r), b, r) == Approx(o).epsilon(1e-15));
      CHECK(overlap(a, Assignment(pb, r), r) == Approx(o).epsilon(1e-15));
      CHECK(o >= 1.0 / r - 1e-15);
    }
  }
  SECTION("Hungarian matching agrees with exhaustive search") {
    for (int trial = 0; trial < 20; ++trial) {
      const int r = 2 + static_cast<int>(rng.below(8));
      std::vector<std::vector<double>> w(r, std::vector<double>(r));
      for (auto& row : w)
        for (auto& x : row) x = static_cast<double>(rng.below(50));
      CHECK(detail::hungarian_max(w) == brute_force_max(w));
    }
    // r = 10 goes through the Hungarian branch
    const auto t = random_labels(rng, 3000, 10);
    std::vector<int> shifted(t.labels);
    for (int& l : shifted) l = (l + 3) % 10;
    CHECK(overlap(t, Assignment(shifted, 10), 10) == 1);
  }
  CHECK_THROWS_AS(overlap(Assignment({0, 1}, 2), Assignment({0}, 2), 2), Error);
}

TEST_CASE("two-layer benchmark picks the second aggregated vector", "[cluster][statistical]") {
  Vec w(2);
  w << 0.5, 0.25;
  PipelineConfig cfg;
  cfg.model = balanced_model(2, {{2, 2, 1}, {4, 4, 1}}, w);
  cfg.n = 5000;
  cfg.seed = 7;
  const auto rep = run_pipeline(cfg);
  CHECK(rep.chose_second);
  CHECK(rep.overlap_sign >= 0.6);
  CHECK(rep.overlap_alg1 > 0.5);
}
