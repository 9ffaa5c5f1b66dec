#ifndef HYPERNB_WEIGHTS_HPP
#define HYPERNB_WEIGHTS_HPP

// Layer weights: unweighted baseline, closed forms for r = 2 and for
// commuting signal matrices, and a Nelder-Mead search for the general case.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace hypernb {

struct WeightResult {
  Vec w;
  double achieved_snr = 0;
  bool above_ks = false;
  bool tie = false;
  bool no_improvement = false;
  double baseline_snr = 0;
  int best_restart = -1;
};

// Largest |eigenvalue| of Pi^1/2 D_w Pi^1/2 on the complement of sqrt(pi),
// squared, over vartheta(w). Invariant under w -> c w.
inline double snr_objective(const ModelParams& p, const Vec& w) {
  Vec w2 = w.array().square();
  const double vt = weighted_degree(p, w2);
  if (!(vt > 0) || p.r < 2) return 0.0;
  const Vec s = p.pi.array().sqrt();
  Mat S = s.asDiagonal() * weighted_D(p, w) * s.asDiagonal();
  const Mat P = Mat::Identity(p.r, p.r) - s * s.transpose();
  S = P * S * P;
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  const double lam = es.eigenvalues().cwiseAbs().maxCoeff();
  return lam * lam / vt;
}

// Scale to ||w||_inf = 1 with the largest-magnitude entry (first on ties) positive.
inline Vec normalize_weights(const Vec& w) {
  if (w.size() == 0) return w;
  Eigen::Index i;
  const double m = w.cwiseAbs().maxCoeff(&i);
  if (m == 0) return w;
  return w / (w(i) > 0 ? m : -m);
}

inline WeightResult finish_weights(const ModelParams& p, const Vec& w) {
  WeightResult r;
  r.w = normalize_weights(w);
  r.achieved_snr = snr_objective(p, r.w);
  r.above_ks = r.achieved_snr > 1;
  r.baseline_snr = snr_objective(p, Vec::Ones(p.K()));
  return r;
}

inline WeightResult weights_unit(const ModelParams& p) { return finish_weights(p, Vec::Ones(p.K())); }

// Second eigenvalue of each layer when r = 2: tr Q - d.
inline Vec second_eigenvalues_r2(const ModelParams& p) {
  if (p.r != 2) fail(Errc::NotApplicable, "closed form needs r = 2");
  Vec mu(p.K());
  for (int k = 0; k < p.K(); ++k) mu(k) = p.layers[k].Q.trace() - p.layers[k].d;
  return mu;
}

// w_k = mu2_k / d_k; achieves sum_k (q_k - 1) mu2_k^2 / d_k.
inline WeightResult weights_optimal_r2(const ModelParams& p) {
  const Vec mu = second_eigenvalues_r2(p);
  Vec w(p.K());
  for (int k = 0; k < p.K(); ++k) w(k) = p.layers[k].d > 0 ? mu(k) / p.layers[k].d : 0.0;
  return finish_weights(p, w);
}

inline double closed_form_r2(const ModelParams& p) {
  const Vec mu = second_eigenvalues_r2(p);
  double s = 0;
  for (int k = 0; k < p.K(); ++k)
    if (p.layers[k].d > 0) s += (p.layers[k].q - 1) * mu(k) * mu(k) / p.layers[k].d;
  return s;
}

// Commuting signal matrices: along each shared eigendirection i the best
// weight is w_k = mu_i^(k) / d_k with value sum_k (q_k - 1) (mu_i^(k))^2 / d_k.
inline WeightResult weights_shared_eigenbasis(const ModelParams& p) {
  const Vec s = p.pi.array().sqrt();
  std::vector<Mat> S;
  double scale = 0;
  for (auto& L : p.layers) {
    S.push_back(s.asDiagonal() * L.D * s.asDiagonal());
    scale = std::max(scale, S.back().norm());
  }
  for (std::size_t a = 0; a < S.size(); ++a)
    for (std::size_t b = a + 1; b < S.size(); ++b)
      if ((S[a] * S[b] - S[b] * S[a]).norm() > 1e-10 * std::max(1.0, scale * scale))
        fail(Errc::NotApplicable, "signal matrices do not commute");
  Mat comb = Mat::Zero(p.r, p.r);
  for (std::size_t a = 0; a < S.size(); ++a) comb += (1.0 + std::fmod(0.6180339887 * (a + 1), 1.0)) * S[a];
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (comb + comb.transpose()));
  double best = -1, second = -1;
  Vec best_w = Vec::Zero(p.K());
  for (int i = 0; i < p.r; ++i) {
    const Vec psi = es.eigenvectors().col(i);
    if (std::abs(psi.dot(s)) > 1 - 1e-8) continue;
    Vec w(p.K());
    double val = 0;
    for (int k = 0; k < p.K(); ++k) {
      const double mu = psi.dot(S[k] * psi);
      const double d = p.layers[k].d;
      w(k) = d > 0 ? mu / d : 0.0;
      if (d > 0) val += (p.layers[k].q - 1) * mu * mu / d;
    }
    if (val > best) {
      second = best;
      best = val;
      best_w = w;
    } else if (val > second) {
      second = val;
    }
  }
  WeightResult r = finish_weights(p, best_w);
  r.tie = second >= 0 && std::abs(best - second) <= 1e-9 * std::max(1.0, best);
  return r;
}

namespace detail {

// Hyperspherical angles <-> unit vector in R^K.
inline Vec sphere_point(const Vec& th, int K) {
  Vec w(K);
  double sprod = 1;
  for (int i = 0; i < K - 1; ++i) {
    w(i) = sprod * std::cos(th(i));
    sprod *= std::sin(th(i));
  }
  w(K - 1) = sprod;
  return w;
}

inline Vec sphere_angles(const Vec& w) {
  const int K = static_cast<int>(w.size());
  Vec th(K - 1);
  for (int i = 0; i < K - 1; ++i) {
    if (i == K - 2) {
      th(i) = std::atan2(w(K - 1), w(K - 2));
    } else {
      th(i) = std::atan2(w.tail(K - 1 - i).norm(), w(i));
    }
  }
  return th;
}

struct NmResult {
  Vec x;
  double f;
};

// Minimizes f by Nelder-Mead from x0 until the simplex diameter drops below tol.
template <class F>
NmResult nelder_mead(F&& f, const Vec& x0, double step, double tol, int max_iter) {
  const int d = static_cast<int>(x0.size());
  std::vector<Vec> X(d + 1, x0);
  std::vector<double> fx(d + 1);
  for (int i = 0; i < d; ++i) X[i + 1](i) += step;
  for (int i = 0; i <= d; ++i) fx[i] = f(X[i]);
  std::vector<int> ord(d + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    double diam = 0;
    for (int i = 1; i <= d; ++i) diam = std::max(diam, (X[ord[i]] - X[ord[0]]).norm());
    if (diam < tol) break;
    Vec c = Vec::Zero(d);
    for (int i = 0; i < d; ++i) c += X[ord[i]];
    c /= d;
    const int worst = ord[d];
    const Vec xr = c + (c - X[worst]);
    const double fr = f(xr);
    if (fr < fx[ord[0]]) {
      const Vec xe = c + 2.0 * (c - X[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        X[worst] = xe;
        fx[worst] = fe;
      } else {
        X[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[ord[d - 1]]) {
      X[worst] = xr;
      fx[worst] = fr;
    } else {
      const bool outside = fr < fx[worst];
      const Vec xc = outside ? Vec(c + 0.5 * (xr - c)) : Vec(c + 0.5 * (X[worst] - c));
      const double fc = f(xc);
      if (fc < (outside ? fr : fx[worst])) {
        X[worst] = xc;
        fx[worst] = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          X[ord[i]] = X[ord[0]] + 0.5 * (X[ord[i]] - X[ord[0]]);
          fx[ord[i]] = f(X[ord[i]]);
        }
      }
    }
  }
  int b = 0;
  for (int i = 1; i <= d; ++i)
    if (fx[i] < fx[b]) b = i;
  return {X[b], fx[b]};
}

}  // namespace detail

// Maximizes the scale-free objective over directions in R^K with restarts
// from 1, the closed forms when they apply, the coordinate axes, and seeded
// random directions.
inline WeightResult weights_numeric(const ModelParams& p, int restarts = 32, double tol = 1e-9,
                                    std::uint64_t seed = 0) {
  if (p.r < 2) fail(Errc::NotApplicable, "weight optimization needs r >= 2");
  const int K = p.K();
  if (K == 1) return finish_weights(p, Vec::Ones(1));
  std::vector<Vec> starts;
  starts.push_back(Vec::Ones(K));
  if (p.r == 2) starts.push_back(weights_optimal_r2(p).w);
  try {
    starts.push_back(weights_shared_eigenbasis(p).w);
  } catch (const Error&) {
  }
  for (int k = 0; k < K; ++k) starts.push_back(Vec::Unit(K, k));
  Rng rng = Rng::stream(seed, "weights-start");
  while (static_cast<int>(starts.size()) < restarts) {
    Vec v(K);
    for (int k = 0; k < K; ++k) {
      // Box-Muller normal deviate for an isotropic direction.
      const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
      v(k) = std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
    }
    starts.push_back(v);
  }
  for (auto& s : starts)
    if (s.norm() == 0) s = Vec::Ones(K);
  auto obj = [&](const Vec& th) { return -snr_objective(p, detail::sphere_point(th, K)); };
  std::vector<detail::NmResult> out(starts.size());
  parallel_chunks(starts.size(), [&](std::size_t i) {
    const Vec th0 = detail::sphere_angles(starts[i] / starts[i].norm());
    out[i] = detail::nelder_mead(obj, th0, 0.25, tol, 20000 * K);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].f < out[best].f) best = i;
  WeightResult r = finish_weights(p, detail::sphere_point(out[best].x, K));
  r.best_restart = static_cast<int>(best);
  if (r.achieved_snr < r.baseline_snr - 1e-12) {
    r = finish_weights(p, Vec::Ones(K));
    r.no_improvement = true;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i == best) continue;
    const Vec wi = normalize_weights(detail::sphere_point(out[i].x, K));
    if (std::abs(-out[i].f - r.achieved_snr) <= 1e-9 * std::max(1.0, r.achieved_snr) && (wi - r.w).norm() > 1e-3)
      r.tie = true;
  }
  return r;
}

}  // namespace hypernb

#endif
