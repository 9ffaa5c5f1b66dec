#ifndef HYPERNB_ARNOLDI_HPP
#define HYPERNB_ARNOLDI_HPP

// Implicitly restarted Arnoldi for the largest-magnitude eigenvalues of a
// real, matrix-free operator. Exact shifts are applied with single-shift
// Givens sweeps (real shifts) and Francis double-shift sweeps (conjugate
// pairs), so the iteration stays in real arithmetic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"

namespace hypernb {

template <class Op>
concept LinearOperator = requires(const Op& op, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  { op.size() } -> std::convertible_to<Eigen::Index>;
  op.apply(x, y);
};

struct DenseOperator {
  Eigen::MatrixXd M;
  Eigen::Index size() const { return M.rows(); }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const { y = M * x; }
};

struct EigOptions {
  int k = 6;
  double tol = 1e-8;
  int max_restarts = 300;
  std::uint64_t seed = 0;
  int ncv = 0;  // 0: max(30, 4k), capped at N
};

struct EigResult {
  std::vector<std::complex<double>> values;
  Eigen::MatrixXcd vectors;      // unit columns
  std::vector<double> residuals;  // ||A x - lambda x|| with ||x|| = 1
  bool converged = false;
  int restarts = 0;
  long matvecs = 0;
};

namespace detail {

// Order: |lambda| descending, then real part descending, then positive
// imaginary part first, so conjugate partners end up adjacent.
inline std::vector<int> magnitude_order(const Eigen::VectorXcd& ev) {
  std::vector<int> idx(ev.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double ma = std::abs(ev(a)), mb = std::abs(ev(b));
    const double tol = 1e-12 * std::max({1.0, ma, mb});
    if (std::abs(ma - mb) > tol) return ma > mb;
    if (std::abs(ev(a).real() - ev(b).real()) > tol) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  return idx;
}

inline bool is_conj_pair(std::complex<double> a, std::complex<double> b) {
  const double s = std::max({1.0, std::abs(a), std::abs(b)});
  return a.imag() != 0 && std::abs(a - std::conj(b)) <= 1e-10 * s;
}

inline void givens(double a, double b, double& c, double& s) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (std::abs(b) < std::numeric_limits<double>::min() || scale == 0) {
    c = 1;
    s = 0;
    return;
  }
  // Scaled so subnormal inputs still give an orthogonal rotation.
  a /= scale;
  b /= scale;
  const double r = std::hypot(a, b);
  c = a / r;
  s = b / r;
}

// One implicit single-shift QR sweep on upper Hessenberg H; Q accumulates.
inline void shift_single(Eigen::MatrixXd& H, Eigen::MatrixXd& Q, double mu) {
  const Eigen::Index m = H.rows();
  double x = H(0, 0) - mu, y = H(1, 0);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    double c, s;
    givens(x, y, c, s);
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j < m; ++j) {
      const double a = H(i, j), b = H(i + 1, j);
      H(i, j) = c * a + s * b;
      H(i + 1, j) = -s * a + c * b;
    }
    for (Eigen::Index j = 0; j <= std::min<Eigen::Index>(i + 2, m - 1); ++j) {
      const double a = H(j, i), b = H(j, i + 1);
      H(j, i) = c * a + s * b;
      H(j, i + 1) = -s * a + c * b;
    }
    for (Eigen::Index j = 0; j < Q.rows(); ++j) {
      const double a = Q(j, i), b = Q(j, i + 1);
      Q(j, i) = c * a + s * b;
      Q(j, i + 1) = -s * a + c * b;
    }
    if (i > 0) H(i + 1, i - 1) = 0;
    if (i + 2 < m) {
      x = H(i + 1, i);
      y = H(i + 2, i);
    }
  }
}

// Applies the 3x3 (or 2x2) reflector I - 2 v v^T to rows/cols lo..lo+len-1.
inline void reflect(Eigen::MatrixXd& H, Eigen::MatrixXd& Q, Eigen::Index lo, int len, const double* v) {
  const Eigen::Index m = H.rows();
  for (Eigen::Index j = std::max<Eigen::Index>(0, lo - 1); j < m; ++j) {
    double d = 0;
    for (int a = 0; a < len; ++a) d += v[a] * H(lo + a, j);
    for (int a = 0; a < len; ++a) H(lo + a, j) -= 2 * v[a] * d;
  }
  for (Eigen::Index j = 0; j <= std::min<Eigen::Index>(lo + len, m - 1); ++j) {
    double d = 0;
    for (int a = 0; a < len; ++a) d += v[a] * H(j, lo + a);
    for (int a = 0; a < len; ++a) H(j, lo + a) -= 2 * v[a] * d;
  }
  for (Eigen::Index j = 0; j < Q.rows(); ++j) {
    double d = 0;
    for (int a = 0; a < len; ++a) d += v[a] * Q(j, lo + a);
    for (int a = 0; a < len; ++a) Q(j, lo + a) -= 2 * v[a] * d;
  }
}

inline bool householder(const double* x, int len, double* v) {
  // Scale first: after deflation the bulge entries can be small enough for
  // their squares to underflow.
  double amax = 0;
  for (int a = 0; a < len; ++a) amax = std::max(amax, std::abs(x[a]));
  if (amax == 0) return false;
  double nrm = 0;
  for (int a = 0; a < len; ++a) {
    v[a] = x[a] / amax;
    nrm += v[a] * v[a];
  }
  nrm = std::sqrt(nrm);
  v[0] -= v[0] > 0 ? -nrm : nrm;
  double vn = 0;
  for (int a = 0; a < len; ++a) vn += v[a] * v[a];
  vn = std::sqrt(vn);
  if (vn == 0) return false;
  for (int a = 0; a < len; ++a) v[a] /= vn;
  return true;
}

// One Francis double-shift sweep with shifts mu, conj(mu).
inline void shift_double(Eigen::MatrixXd& H, Eigen::MatrixXd& Q, std::complex<double> mu) {
  const Eigen::Index m = H.rows();
  if (m < 3) {
    shift_single(H, Q, mu.real());
    return;
  }
  const double s = 2 * mu.real(), t = std::norm(mu);
  double x[3] = {H(0, 0) * H(0, 0) + H(0, 1) * H(1, 0) - s * H(0, 0) + t, H(1, 0) * (H(0, 0) + H(1, 1) - s),
                 H(1, 0) * H(2, 1)};
  for (Eigen::Index k = 0; k + 2 < m; ++k) {
    double v[3];
    if (householder(x, 3, v)) reflect(H, Q, k, 3, v);
    if (k > 0) {
      H(k + 1, k - 1) = 0;
      H(k + 2, k - 1) = 0;
    }
    x[0] = H(k + 1, k);
    x[1] = H(k + 2, k);
    x[2] = k + 3 < m ? H(k + 3, k) : 0.0;
  }
  double v[2];
  if (householder(x, 2, v)) reflect(H, Q, m - 2, 2, v);
  if (m >= 3) H(m - 1, m - 3) = 0;
}

}  // namespace detail

template <LinearOperator Op>
EigResult top_eigs(const Op& op, EigOptions opt = {}) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const Index N = op.size();
  EigResult res;
  if (opt.k < 1 || opt.k > N) fail(Errc::InvalidInput, "k must lie in [1, N]");
  Index m = opt.ncv > 0 ? opt.ncv : std::max<Index>(30, 4 * opt.k);
  m = std::min(m, N);

  auto finish = [&](const Eigen::VectorXcd& ev, const Eigen::MatrixXcd& Y, const MatrixXd* V, int want) {
    res.values.clear();
    res.residuals.clear();
    res.vectors.resize(N, want);
    VectorXd xr, xi, ar, ai;
    for (int c = 0; c < want; ++c) {
      Eigen::VectorXcd x = V ? Eigen::VectorXcd(V->cast<std::complex<double>>() * Y.col(c)) : Eigen::VectorXcd(Y.col(c));
      x /= x.norm();
      xr = x.real();
      xi = x.imag();
      op.apply(xr, ar);
      op.apply(xi, ai);
      res.matvecs += 2;
      Eigen::VectorXcd ax(N);
      ax.real() = ar;
      ax.imag() = ai;
      res.values.push_back(ev(c));
      res.residuals.push_back((ax - ev(c) * x).norm());
      res.vectors.col(c) = x;
    }
  };

  // Small problems: the Krylov space is the whole space.
  if (m >= N || N <= 2) {
    MatrixXd A(N, N);
    VectorXd e, col;
    for (Index c = 0; c < N; ++c) {
      e = VectorXd::Unit(N, c);
      op.apply(e, col);
      A.col(c) = col;
    }
    res.matvecs = N;
    Eigen::EigenSolver<MatrixXd> es(A);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const auto order = detail::magnitude_order(ev);
    int want = opt.k;
    if (want < N && detail::is_conj_pair(ev(order[want - 1]), ev(order[want]))) ++want;
    Eigen::VectorXcd sv(want);
    Eigen::MatrixXcd sy(N, want);
    for (int c = 0; c < want; ++c) {
      sv(c) = ev(order[c]);
      sy.col(c) = es.eigenvectors().col(order[c]);
    }
    finish(sv, sy, nullptr, want);
    res.converged = true;
    for (double r : res.residuals) res.converged = res.converged && r <= std::max(opt.tol, 1e-10);
    return res;
  }

  MatrixXd V = MatrixXd::Zero(N, m);
  MatrixXd H = MatrixXd::Zero(m, m);
  VectorXd f(N), w(N);
  Rng rng = Rng::stream(opt.seed, "arnoldi-start");

  auto random_unit = [&]() {
    VectorXd v(N);
    for (Index i = 0; i < N; ++i) v(i) = rng.uniform() - 0.5;
    return v;
  };

  // Orthogonalize x against V[:, 0..j] by modified Gram-Schmidt, repeating
  // the pass while the norm drops by more than a factor 1/sqrt(2). Returns
  // false when x is numerically inside the span.
  auto orthogonalize = [&](VectorXd& x, Index j, double* h) {
    for (int pass = 0; pass < 4; ++pass) {
      const double before = x.norm();
      if (before == 0) return false;
      for (Index i = 0; i <= j; ++i) {
        const double c = V.col(i).dot(x);
        if (h) h[i] += c;
        x -= c * V.col(i);
      }
      if (x.norm() >= 0.7071 * before) return true;
    }
    return false;
  };

  // Extends an Arnoldi factorization of length k to length m. On entry f is
  // the residual vector and f_ok says whether it is numerically independent
  // of the basis.
  bool f_ok = true;
  auto extend = [&](Index k0) {
    for (Index j = k0; j < m; ++j) {
      if (j > 0) {
        const double beta = f.norm();
        if (!f_ok || beta < 1e-13 * std::max(1.0, H.topLeftCorner(j, j).norm())) {
          // Invariant subspace: continue with a fresh orthogonal direction.
          VectorXd r = random_unit();
          while (!orthogonalize(r, j - 1, nullptr)) r = random_unit();
          V.col(j) = r / r.norm();
          H(j, j - 1) = 0;
        } else {
          V.col(j) = f / beta;
          H(j, j - 1) = beta;
        }
      } else {
        V.col(0) = f / f.norm();
      }
      const VectorXd vj = V.col(j);
      op.apply(vj, w);
      ++res.matvecs;
      std::vector<double> h(j + 1, 0.0);
      f_ok = orthogonalize(w, j, h.data());
      for (Index i = 0; i <= j; ++i) H(i, j) = h[i];
      f = w;
    }
  };

  f = random_unit();
  extend(0);
  int k_eff = opt.k;
  for (int it = 0;; ++it) {
    res.restarts = it;
    Eigen::EigenSolver<MatrixXd> es(H);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const auto order = detail::magnitude_order(ev);
    const double beta = f.norm();
    Eigen::VectorXcd sv(m);
    Eigen::MatrixXcd sy(m, m);
    std::vector<double> est(m);
    for (Index c = 0; c < m; ++c) {
      sv(c) = ev(order[c]);
      Eigen::VectorXcd y = es.eigenvectors().col(order[c]);
      y /= y.norm();
      sy.col(c) = y;
      est[c] = beta * std::abs(y(m - 1));
    }
    int want = opt.k;
    if (want < m && detail::is_conj_pair(sv(want - 1), sv(want))) ++want;
    int nconv = 0;
    for (int c = 0; c < want; ++c)
      if (est[c] <= opt.tol) ++nconv;
    if (nconv == want || it >= opt.max_restarts) {
      finish(sv.head(want), sy.leftCols(want), &V, want);
      res.converged = nconv == want;
      for (double r : res.residuals) res.converged = res.converged && r <= 10 * opt.tol;
      return res;
    }
    const int p = static_cast<int>(m) - want;
    k_eff = want + std::min(nconv, p / 2);
    if (k_eff >= m - 1) k_eff = static_cast<int>(m) - 2;
    if (detail::is_conj_pair(sv(k_eff - 1), sv(k_eff))) {
      if (k_eff + 1 <= m - 2)
        ++k_eff;
      else
        --k_eff;
    }
    MatrixXd Q = MatrixXd::Identity(m, m);
    for (Index c = k_eff; c < m; ++c) {
      const auto mu = sv(c);
      if (mu.imag() != 0 && c + 1 < m && detail::is_conj_pair(mu, sv(c + 1))) {
        detail::shift_double(H, Q, mu.imag() > 0 ? mu : std::conj(mu));
        ++c;
      } else {
        detail::shift_single(H, Q, mu.real());
      }
    }
    const double bk = H(k_eff, k_eff - 1);
    const double sigma = Q(m - 1, k_eff - 1);
    VectorXd fnew = V * Q.col(k_eff) * bk + f * sigma;
    const MatrixXd Vk = V * Q.leftCols(k_eff);
    V.leftCols(k_eff) = Vk;
    const MatrixXd Hk = H.topLeftCorner(k_eff, k_eff);
    H.setZero();
    H.topLeftCorner(k_eff, k_eff) = Hk;
    for (Index j = 0; j + 1 < k_eff; ++j)
      for (Index i = j + 2; i < k_eff; ++i) H(i, j) = 0;
    f = fnew;
    // Keep f orthogonal to the retained basis.
    f_ok = orthogonalize(f, k_eff - 1, nullptr);
    extend(k_eff);
  }
}

}  // namespace hypernb

#endif
