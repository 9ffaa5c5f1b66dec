#ifndef HYPERNB_CLUSTER_HPP
#define HYPERNB_CLUSTER_HPP

// Two-community reconstruction from an aggregated vector (randomized
// rounding and sign rounding) and the permutation-maximized overlap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "hypergraph.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace hypernb {

struct Selection {
  Vec u;                  // rescaled so that ||u||^2 = n
  bool chose_second = false;
  double alignment = 0;  // |<y1, 1>| / (sqrt(n) ||y1||)
};

// Picks y2 when y1 is aligned with the all-ones vector beyond 1/log n.
inline Selection select_informative(const Vec& y1, const Vec& y2) {
  const Eigen::Index n = y1.size();
  if (y2.size() != n) fail(Errc::LengthMismatch, "y1 and y2 differ in length");
  const double n1 = y1.norm();
  if (n1 == 0) fail(Errc::ZeroVector, "y1 is zero");
  Selection s;
  s.alignment = std::abs(y1.sum()) / (std::sqrt(static_cast<double>(n)) * n1);
  s.chose_second = s.alignment > 1.0 / std::log(static_cast<double>(n));
  const Vec& u = s.chose_second ? y2 : y1;
  const double nu = u.norm();
  if (nu == 0) fail(Errc::ZeroVector, "selected vector is zero");
  s.u = u * (std::sqrt(static_cast<double>(n)) / nu);
  return s;
}

// Default threshold 2 sqrt(2) r sqrt(gamma).
inline double default_threshold(int r, double gamma) { return 2 * std::sqrt(2.0) * r * std::sqrt(gamma); }

// P(x in V+) = 1/2 + u(x) 1{|u(x)| <= T} / (2T); V+ gets label 0.
inline Assignment round_randomized(const Vec& u, double T, std::uint64_t seed) {
  if (!(T > 0)) fail(Errc::InvalidThreshold, "threshold must be positive");
  std::vector<int> lab(u.size());
  parallel_for(static_cast<std::size_t>(u.size()), [&](std::size_t x) {
    Rng rng = Rng::stream(seed, "round", x);
    const double ux = u(static_cast<Eigen::Index>(x));
    const double prob = 0.5 + (std::abs(ux) <= T ? ux / (2 * T) : 0.0);
    lab[x] = rng.uniform() < prob ? 0 : 1;
  });
  return Assignment(std::move(lab), 2);
}

// Label 0 where u > 0, 1 where u < 0, fair coin on exact zeros.
inline Assignment round_sign(const Vec& u, std::uint64_t seed = 0) {
  std::vector<int> lab(u.size());
  for (Eigen::Index x = 0; x < u.size(); ++x) {
    if (u(x) > 0) {
      lab[x] = 0;
    } else if (u(x) < 0) {
      lab[x] = 1;
    } else {
      Rng rng = Rng::stream(seed, "sign-tie", static_cast<std::uint64_t>(x));
      lab[x] = static_cast<int>(rng() >> 63);
    }
  }
  return Assignment(std::move(lab), 2);
}

namespace detail {

// Maximum-weight perfect matching on a square matrix (Hungarian method,
// O(r^3)); returns the total weight.
inline double hungarian_max(const std::vector<std::vector<double>>& w) {
  const int r = static_cast<int>(w.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(r + 1, 0), v(r + 1, 0), minv(r + 1);
  std::vector<int> p(r + 1, 0), way(r + 1, 0);
  std::vector<char> used(r + 1);
  for (int i = 1; i <= r; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= r; ++j) {
        if (used[j]) continue;
        const double cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= r; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0;
  for (int j = 1; j <= r; ++j) total += w[p[j] - 1][j - 1];
  return total;
}

}  // namespace detail

// max over permutations p of (1/n) sum_x 1{est(x) = p(truth(x))}.
inline double overlap(const Assignment& truth, const Assignment& est, int r) {
  if (truth.size() != est.size()) fail(Errc::LengthMismatch, "assignments differ in length");
  const std::size_t n = truth.size();
  if (n == 0) return 1.0;
  const int R = std::max({r, truth.r, est.r});
  std::vector<std::vector<double>> conf(R, std::vector<double>(R, 0.0));
  for (std::size_t x = 0; x < n; ++x) conf[truth[x]][est[x]] += 1;
  double best = 0;
  if (R <= 8) {
    std::vector<int> perm(R);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double s = 0;
      for (int i = 0; i < R; ++i) s += conf[i][perm[i]];
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best = detail::hungarian_max(conf);
  }
  return best / static_cast<double>(n);
}

}  // namespace hypernb

#endif
