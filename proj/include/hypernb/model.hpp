#ifndef HYPERNB_MODEL_HPP
#define HYPERNB_MODEL_HPP

// Model algebra for the non-uniform hypergraph SBM: probability tensors,
// degree and signal matrices, weighted combinations and the theoretical
// constants that govern detectability and overlap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace hypernb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Count vector l in N^r with sum q: how many of the q vertices of a
// hyperedge fall in each community.
using Composition = std::vector<int>;

// All compositions of q into r parts, lexicographically descending.
inline std::vector<Composition> compositions(int r, int q) {
  std::vector<Composition> out;
  if (r <= 0 || q < 0) return out;
  Composition c(r, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == r - 1) {
      c[pos] = left;
      out.push_back(c);
      return;
    }
    for (int v = left; v >= 0; --v) {
      c[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, q);
  return out;
}

// q! / prod c_i!, exact for the sizes used here.
inline double multinomial(const Composition& c) {
  double out = 1.0;
  int acc = 0;
  for (int ci : c) {
    for (int j = 1; j <= ci; ++j) {
      ++acc;
      out = out * acc / j;
    }
  }
  return out;
}

inline double binomial(std::int64_t n, int k) {
  if (k < 0 || n < k) return 0.0;
  double out = 1.0;
  for (int j = 1; j <= k; ++j) out = out * static_cast<double>(n - k + j) / j;
  return out;
}

inline double pi_power(const Vec& pi, const Composition& c) {
  double out = 1.0;
  for (std::size_t i = 0; i < c.size(); ++i) out *= std::pow(pi(static_cast<Eigen::Index>(i)), c[i]);
  return out;
}

struct SymTensor {
  int q = 2;
  int r = 1;
  std::map<Composition, double> entries;

  SymTensor() = default;
  SymTensor(int q_, int r_) : q(q_), r(r_) {}

  void check_key(const Composition& c) const {
    if (static_cast<int>(c.size()) != r) fail(Errc::InvalidTensor, "composition length differs from r");
    int s = 0;
    for (int v : c) {
      if (v < 0) fail(Errc::InvalidTensor, "negative composition count");
      s += v;
    }
    if (s != q) fail(Errc::InvalidTensor, "composition does not sum to q");
  }

  void set(const Composition& c, double p) {
    check_key(c);
    if (!std::isfinite(p) || p < 0) fail(Errc::InvalidTensor, "tensor entries must be finite and non-negative");
    entries[c] = p;
  }

  double at(const Composition& c) const {
    auto it = entries.find(c);
    return it == entries.end() ? 0.0 : it->second;
  }

  // Value for an ordered tuple of community labels.
  template <class It>
  double at_types(It first, It last) const {
    Composition c(r, 0);
    for (; first != last; ++first) ++c[*first];
    return at(c);
  }

  double max_entry() const {
    double m = 0;
    for (auto& [k, v] : entries) m = std::max(m, v);
    return m;
  }

  void validate() const {
    if (q < 2) fail(Errc::InvalidTensor, "hyperedge size must be at least 2");
    if (r < 1) fail(Errc::InvalidTensor, "need at least one community");
    for (auto& [k, v] : entries) {
      check_key(k);
      if (!std::isfinite(v) || v < 0) fail(Errc::InvalidTensor, "tensor entries must be finite and non-negative");
    }
  }
};

// a when all q vertices share one community, b otherwise.
inline SymTensor tensor_two_param(int r, int q, double a_in, double b_out) {
  if (!(a_in >= 0) || !(b_out >= 0)) fail(Errc::InvalidTensor, "two-parameter tensor needs a, b >= 0");
  SymTensor t(q, r);
  for (auto& c : compositions(r, q)) {
    bool pure = std::count(c.begin(), c.end(), q) == 1;
    t.set(c, pure ? a_in : b_out);
  }
  return t;
}

// (a, b) for a balanced two-parameter layer with degree d and second
// eigenvalue mu: d = (a-b)/r^(q-1) + b, mu = (a-b)/r^(q-1).
inline std::pair<double, double> two_param_from_spectrum(int r, int q, double d, double mu) {
  const double b = d - mu;
  const double a = b + mu * std::pow(static_cast<double>(r), q - 1);
  if (a < 0 || b < 0) fail(Errc::InvalidTensor, "no non-negative (a, b) for this (d, mu)");
  return {a, b};
}

struct LayerParams {
  SymTensor tensor;
  int q = 2;
  double d = 0;
  Mat D;
  Mat Q;
  // Set when the layer was declared through (a, b); kept for serialization.
  std::optional<std::pair<double, double>> two_param;
};

inline LayerParams layer_from_tensor(const SymTensor& tensor, const Vec& pi) {
  tensor.validate();
  const int r = tensor.r;
  if (pi.size() != r) fail(Errc::DimensionMismatch, "pi length differs from tensor r");
  LayerParams L;
  L.tensor = tensor;
  L.q = tensor.q;
  L.D = Mat::Zero(r, r);
  for (auto& c : compositions(r, tensor.q - 2)) {
    const double mult = multinomial(c) * pi_power(pi, c);
    if (mult == 0) continue;
    for (int i = 0; i < r; ++i) {
      for (int j = i; j < r; ++j) {
        Composition full = c;
        ++full[i];
        ++full[j];
        const double p = tensor.at(full);
        if (p == 0) continue;
        L.D(i, j) += mult * p;
      }
    }
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < i; ++j) L.D(i, j) = L.D(j, i);
  L.Q = L.D * pi.asDiagonal();
  const Vec rows = L.Q.rowwise().sum();
  const double hi = rows.maxCoeff(), lo = rows.minCoeff();
  const double scale = std::max(std::abs(hi), std::abs(lo));
  if (scale > 0 && (hi - lo) > 1e-8 * scale)
    fail(Errc::AssumptionViolation, "row sums of Q are not constant (constant-degree assumption)");
  L.d = rows.mean();
  return L;
}

struct ModelParams {
  int r = 1;
  Vec pi;
  std::vector<LayerParams> layers;
  Vec weights;

  int K() const { return static_cast<int>(layers.size()); }
  int q_max() const {
    int m = 0;
    for (auto& L : layers) m = std::max(m, L.q);
    return m;
  }
  double mean_degree() const {
    double s = 0;
    for (auto& L : layers) s += (L.q - 1) * L.d;
    return s;
  }
  bool assumption2() const { return mean_degree() > 1; }
};

inline void validate_pi(const Vec& pi) {
  if (pi.size() < 1) fail(Errc::InvalidInput, "pi is empty");
  for (Eigen::Index i = 0; i < pi.size(); ++i)
    if (!(pi(i) > 0) || !std::isfinite(pi(i))) fail(Errc::InvalidInput, "pi entries must be positive");
  if (std::abs(pi.sum() - 1.0) > 1e-12) fail(Errc::InvalidInput, "pi must sum to 1");
}

inline ModelParams make_model(const Vec& pi, std::vector<LayerParams> layers, const Vec& weights) {
  validate_pi(pi);
  ModelParams m;
  m.r = static_cast<int>(pi.size());
  m.pi = pi;
  if (weights.size() != static_cast<Eigen::Index>(layers.size()))
    fail(Errc::DimensionMismatch, "one weight per layer required");
  for (auto& L : layers)
    if (L.tensor.r != m.r) fail(Errc::DimensionMismatch, "layer tensor r differs from pi length");
  m.layers = std::move(layers);
  m.weights = weights;
  return m;
}

// Builds a model from raw tensors, computing each layer.
inline ModelParams make_model(const Vec& pi, const std::vector<SymTensor>& tensors, const Vec& weights) {
  std::vector<LayerParams> layers;
  for (auto& t : tensors) layers.push_back(layer_from_tensor(t, pi));
  return make_model(pi, std::move(layers), weights);
}

// Q_a = sum_k a_k (q_k - 1) Q^(k).
inline Mat weighted_Q(const ModelParams& p, const Vec& a) {
  Mat out = Mat::Zero(p.r, p.r);
  for (int k = 0; k < p.K(); ++k) out += a(k) * (p.layers[k].q - 1) * p.layers[k].Q;
  return out;
}

inline Mat weighted_D(const ModelParams& p, const Vec& a) {
  Mat out = Mat::Zero(p.r, p.r);
  for (int k = 0; k < p.K(); ++k) out += a(k) * (p.layers[k].q - 1) * p.layers[k].D;
  return out;
}

// d_a = sum_k a_k (q_k - 1) d_k.
inline double weighted_degree(const ModelParams& p, const Vec& a) {
  double s = 0;
  for (int k = 0; k < p.K(); ++k) s += a(k) * (p.layers[k].q - 1) * p.layers[k].d;
  return s;
}

// Per-layer vector a_k = f(q_k, w_k).
template <class F>
Vec layer_coeffs(const ModelParams& p, F&& f) {
  Vec a(p.K());
  for (int k = 0; k < p.K(); ++k) a(k) = f(p.layers[k].q, p.weights(k));
  return a;
}

struct EigenSystem {
  Vec mu;
  Mat phi;  // columns are Pi-orthonormal eigenvectors
};

// Eigenpairs of D_a Pi through the symmetric form Pi^1/2 D_a Pi^1/2.
// Sorted by |mu| descending then signed value descending; each phi has its
// first non-negligible coordinate positive.
inline EigenSystem pi_eigensystem(const Mat& D_a, const Vec& pi) {
  const Vec s = pi.array().sqrt();
  const Mat S = s.asDiagonal() * D_a * s.asDiagonal();
  const Mat Ssym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Ssym);
  const int r = static_cast<int>(pi.size());
  std::vector<int> idx(r);
  std::iota(idx.begin(), idx.end(), 0);
  const Vec& ev = es.eigenvalues();
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double fa = std::abs(ev(a)), fb = std::abs(ev(b));
    const double tol = 1e-12 * std::max({1.0, fa, fb});
    if (std::abs(fa - fb) > tol) return fa > fb;
    return ev(a) > ev(b);
  });
  EigenSystem out;
  out.mu.resize(r);
  out.phi.resize(r, r);
  for (int c = 0; c < r; ++c) {
    out.mu(c) = ev(idx[c]);
    Vec f = es.eigenvectors().col(idx[c]).cwiseQuotient(s);
    for (int i = 0; i < r; ++i) {
      if (std::abs(f(i)) > 1e-10) {
        if (f(i) < 0) f = -f;
        break;
      }
    }
    out.phi.col(c) = f;
  }
  return out;
}

struct SpectralConstants {
  Vec w;
  Mat Q_w;
  Mat K_mat;
  Vec mu;
  Mat phi;
  double vartheta = 0;
  Vec tau;
  int r0 = 0;
  double d_w = 0;
  Vec gamma;
};

inline double gamma_overlap(const SpectralConstants& c, const ModelParams& p, int i);

inline SpectralConstants weighted_signal(const ModelParams& p) {
  validate_pi(p.pi);
  if (!p.assumption2()) fail(Errc::AssumptionViolation, "mean degree sum (q-1)d must exceed 1");
  SpectralConstants c;
  c.w = p.weights;
  c.Q_w = weighted_Q(p, p.weights);
  const Vec w2 = p.weights.array().square();
  c.K_mat = weighted_Q(p, w2);
  auto es = pi_eigensystem(weighted_D(p, p.weights), p.pi);
  c.mu = es.mu;
  c.phi = es.phi;
  c.vartheta = weighted_degree(p, w2);
  c.d_w = weighted_degree(p, p.weights);
  if (!(c.vartheta > 0)) fail(Errc::DegenerateModel, "variance parameter is zero");
  c.tau.resize(p.r);
  for (int i = 0; i < p.r; ++i)
    c.tau(i) = c.mu(i) == 0 ? std::numeric_limits<double>::infinity() : c.vartheta / (c.mu(i) * c.mu(i));
  c.r0 = 0;
  while (c.r0 < p.r && c.tau(c.r0) < 1) ++c.r0;
  if (c.r0 == 0) fail(Errc::DegenerateModel, "no eigenvalue above the Kesten-Stigum threshold");
  c.gamma.resize(c.r0);
  for (int i = 0; i < c.r0; ++i) c.gamma(i) = gamma_overlap(c, p, i);
  return c;
}

// Matrix M_ij = phi_i^T Pi Q_a phi_j for the given per-layer coefficients.
inline Mat phi_form(const SpectralConstants& c, const ModelParams& p, const Vec& a, int dim) {
  const Mat Qa = weighted_Q(p, a);
  const Mat F = c.phi.leftCols(dim);
  return F.transpose() * p.pi.asDiagonal() * Qa * F;
}

// a_k = (q_k - 2) w_k^2 / vartheta.
inline Vec coeff_q2_w2(const SpectralConstants& c, const ModelParams& p) {
  return layer_coeffs(p, [&](int q, double w) { return (q - 2) * w * w / c.vartheta; });
}

// i is 0-based; valid for i < r0.
inline double gamma_overlap(const SpectralConstants& c, const ModelParams& p, int i) {
  if (i < 0 || i >= c.r0) fail(Errc::IndexOutOfRange, "gamma index must be below r0");
  const Vec a = coeff_q2_w2(c, p);
  const Vec f = c.phi.col(i);
  const double m = f.dot(p.pi.asDiagonal() * (weighted_Q(p, a) * f));
  return (1.0 + c.tau(i) * m) / (1.0 - c.tau(i));
}

struct CovTheory {
  int t = 0;
  Mat C;
  Mat Cu;
  Mat Cv;
  Mat tau_ij;
};

// sum_{s<n} tau^s, with the tau = 1 limit.
inline double geometric_sum(double tau, int n) {
  if (n <= 0) return 0.0;
  if (std::abs(1.0 - tau) < 1e-7) {
    double s = 0, pw = 1;
    for (int k = 0; k < n; ++k) {
      s += pw;
      pw *= tau;
    }
    return s;
  }
  return (1.0 - std::pow(tau, n)) / (1.0 - tau);
}

inline CovTheory cov_matrices(const SpectralConstants& c, const ModelParams& p, int t) {
  if (t < 0) fail(Errc::InvalidInput, "depth must be non-negative");
  const int r0 = c.r0;
  CovTheory out;
  out.t = t;
  out.tau_ij.resize(r0, r0);
  for (int i = 0; i < r0; ++i)
    for (int j = 0; j < r0; ++j) out.tau_ij(i, j) = c.vartheta / (c.mu(i) * c.mu(j));
  const Mat M = phi_form(c, p, coeff_q2_w2(c, p), r0);
  out.C.resize(r0, r0);
  for (int i = 0; i < r0; ++i)
    for (int j = 0; j < r0; ++j) {
      const double tij = out.tau_ij(i, j);
      out.C(i, j) = (i == j ? geometric_sum(tij, t + 1) : 0.0) + tij * geometric_sum(tij, t) * M(i, j);
    }
  const double d1 = p.mean_degree();
  const Vec aq2 = layer_coeffs(p, [](int q, double) { return static_cast<double>(q - 2); });
  out.Cu = d1 * out.C + phi_form(c, p, aq2, r0);
  const Vec av = layer_coeffs(p, [&](int q, double w) { return w * w / ((q - 1) * c.vartheta); });
  const Vec av2 = layer_coeffs(p, [&](int q, double w) { return w * w * (q - 2) / ((q - 1) * c.vartheta); });
  out.Cv = weighted_degree(p, av) * out.C + phi_form(c, p, av2, r0);
  return out;
}

// Upper eigenvalue bound on C^(t) valid for every t.
inline double cov_upper_bound(const SpectralConstants& c, const ModelParams& p) {
  const double tr0 = c.tau(c.r0 - 1);
  return 1.0 + tr0 * (p.q_max() - 1) / (1.0 - tr0);
}

}  // namespace hypernb

#endif
