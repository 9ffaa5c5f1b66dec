#ifndef HYPERNB_SPECTRAL_HPP
#define HYPERNB_SPECTRAL_HPP

// Top of the spectrum of the reduced matrix, outlier/bulk classification,
// aggregated vectors, and the pseudo-eigenvector Gram matrices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <tuple>
#include <vector>

#include "arnoldi.hpp"
#include "hypergraph.hpp"
#include "model.hpp"
#include "operators.hpp"

namespace hypernb {

struct RitzPair {
  cplx value;
  double residual = 0;
};

struct SpectralSummary {
  std::vector<RitzPair> ritz;
  std::vector<int> outliers;    // indices into ritz, |lambda| descending
  std::vector<int> matched_mu;  // nearest theoretical eigenvalue index, -1 if unknown
  std::vector<Vec> y_vectors;   // aggregated vector per outlier
  double sqrt_vartheta = 0;
  double delta_bulk = 0.05;
  double bulk_radius_est = 0;
  int unresolved = 0;  // real values beyond the cut left out for a large residual
  int restarts = 0;
  long matvecs = 0;
  std::uint64_t seed = 0;
  bool converged = false;
};

// Runs the eigensolver on the reduced matrix.
inline EigResult compute_spectrum(const ReducedNB& R, const EigOptions& opt) { return top_eigs(R, opt); }

// sum_k w_k^2 (q_k - 1) d_k with d_k estimated by q_k |E_k| / n.
inline double vartheta_plugin(const LayeredHypergraph& g, const Vec& w) {
  check_weights(g, w);
  double s = 0;
  for (int k = 0; k < g.K(); ++k) {
    const double dk = g.n() ? static_cast<double>(g.q(k)) * g.num_edges(k) / g.n() : 0.0;
    s += w(k) * w(k) * (g.q(k) - 1) * dk;
  }
  return s;
}

inline bool is_real_value(cplx z) { return std::abs(z.imag()) <= 1e-10 * std::max(1.0, std::abs(z)); }

// Classifies real Ritz values beyond (1 + delta) sqrt(vartheta) as outliers
// and extracts their aggregated vectors. Ritz values crowding the bulk edge
// often stay unconverged; one whose residual exceeds resid_tol is not an
// eigenvalue estimate and is never promoted.
inline SpectralSummary detect_outliers(const LayeredHypergraph& g, const Vec& w, const EigResult& eig,
                                       double vartheta, const SpectralConstants* consts = nullptr,
                                       double delta_bulk = 0.05, double resid_tol = 1e-6) {
  check_weights(g, w);
  SpectralSummary s;
  s.sqrt_vartheta = std::sqrt(vartheta);
  s.delta_bulk = delta_bulk;
  s.restarts = eig.restarts;
  s.matvecs = eig.matvecs;
  s.converged = eig.converged;
  const double cut = (1 + delta_bulk) * s.sqrt_vartheta;
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    s.ritz.push_back({eig.values[i], eig.residuals[i]});
    const cplx z = eig.values[i];
    if (is_real_value(z) && std::abs(z) > cut) {
      if (eig.residuals[i] <= resid_tol) {
        s.outliers.push_back(static_cast<int>(i));
        continue;
      }
      ++s.unresolved;
    }
    s.bulk_radius_est = std::max(s.bulk_radius_est, std::abs(z));
  }
  const Eigen::Index n = g.n();
  for (int i : s.outliers) {
    Eigen::VectorXcd x = eig.vectors.col(i);
    Eigen::Index piv;
    x.cwiseAbs().maxCoeff(&piv);
    if (std::abs(x(piv)) > 0) x *= std::conj(x(piv)) / std::abs(x(piv));
    const double re = x.real().norm(), im = x.imag().norm();
    if (im > 1e-6 * re) fail(Errc::ComplexOutlier, "outlier eigenvector has a non-negligible imaginary part");
    s.y_vectors.push_back(aggregate_reduced(Vec(x.real()), w, n));
  }
  // One-to-one matching to the model eigenvalues, closest pairs first.
  s.matched_mu.assign(s.outliers.size(), -1);
  if (consts) {
    std::vector<std::tuple<double, int, int>> pairs;
    for (std::size_t a = 0; a < s.outliers.size(); ++a)
      for (Eigen::Index j = 0; j < consts->mu.size(); ++j)
        pairs.emplace_back(std::abs(eig.values[s.outliers[a]].real() - consts->mu(j)), static_cast<int>(a),
                           static_cast<int>(j));
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> used(consts->mu.size(), false);
    for (auto [d, a, j] : pairs)
      if (s.matched_mu[a] < 0 && !used[j]) {
        s.matched_mu[a] = j;
        used[j] = true;
      }
  }
  return s;
}

// |<y, 1>| / (sqrt(n) ||y||).
inline double ones_alignment(const Vec& y) {
  const double nrm = y.norm();
  if (nrm == 0) fail(Errc::ZeroVector, "zero vector");
  return std::abs(y.sum()) / (std::sqrt(static_cast<double>(y.size())) * nrm);
}

// Depth cap floor(kappa log_R n) with R = R_g^2 R_w,
// R_g = (q_max - 1) sum_k max p^(k), R_w = ||w||_inf / sqrt(vartheta).
inline int depth_cap(const ModelParams& p, const SpectralConstants& c, std::int64_t n, double kappa = 1.0 / 12) {
  double sum_p = 0;
  for (auto& L : p.layers) sum_p += L.tensor.max_entry();
  const double Rg = (p.q_max() - 1) * sum_p;
  const double Rw = p.weights.cwiseAbs().maxCoeff() / std::sqrt(c.vartheta);
  const double R = Rg * Rg * Rw;
  if (!(R > 1)) return std::numeric_limits<int>::max();
  return static_cast<int>(std::floor(kappa * std::log(static_cast<double>(n)) / std::log(R)));
}

struct PseudoEig {
  int ell = 0;
  Mat U, V;  // m x r0
  Mat UtU, VtV, UtV, VtBU;
  Vec sigma_ell;  // mu_i^ell
  bool depth_too_large = false;
};

// u_i = B^l J chi_i / (sqrt(n) mu_i^l), v_i = (B^T)^l D_w chi_i / (sqrt(n) mu_i^(l+1)),
// chi_i(x -> e) = phi_i(sigma(x)). Needs the true labels.
inline PseudoEig build_pseudo_eigs(const LayeredHypergraph& g, const ModelParams& p, const SpectralConstants& c,
                                   const Assignment& truth, int ell) {
  if (ell < 0) fail(Errc::InvalidInput, "depth must be non-negative");
  if (truth.size() != static_cast<std::size_t>(g.n())) fail(Errc::LengthMismatch, "labels do not match n");
  NonBacktracking B(g, p.weights);
  const auto& idx = B.index();
  const Eigen::Index m = B.size();
  const int r0 = c.r0;
  const double sn = std::sqrt(static_cast<double>(g.n()));
  PseudoEig out;
  out.ell = ell;
  out.depth_too_large = ell > depth_cap(p, c, g.n());
  out.U.resize(m, r0);
  out.V.resize(m, r0);
  out.sigma_ell.resize(r0);
  Vec tmp;
  for (int i = 0; i < r0; ++i) {
    if (c.mu(i) == 0) fail(Errc::InvalidInput, "pseudo-eigenvector needs a non-zero eigenvalue");
    Vec chi(m);
    for (Eigen::Index id = 0; id < m; ++id) chi(id) = c.phi(truth[idx.vertex(id)], i);
    Vec u = reversal_apply(B, chi);
    Vec v = weight_apply(B, chi);
    for (int s = 0; s < ell; ++s) {
      B.apply(u, tmp);
      u.swap(tmp);
      B.apply_transpose(v, tmp);
      v.swap(tmp);
    }
    out.U.col(i) = u / (sn * std::pow(c.mu(i), ell));
    out.V.col(i) = v / (sn * std::pow(c.mu(i), ell + 1));
    out.sigma_ell(i) = std::pow(c.mu(i), ell);
  }
  out.UtU = out.U.transpose() * out.U;
  out.VtV = out.V.transpose() * out.V;
  out.UtV = out.U.transpose() * out.V;
  Mat BU(m, r0);
  for (int i = 0; i < r0; ++i) {
    Vec u = out.U.col(i);
    for (int s = 0; s < ell; ++s) {
      B.apply(u, tmp);
      u.swap(tmp);
    }
    BU.col(i) = u;
  }
  out.VtBU = out.V.transpose() * BU;
  return out;
}

}  // namespace hypernb

#endif
