#ifndef HYPERNB_OPERATORS_HPP
#define HYPERNB_OPERATORS_HPP

// Weighted non-backtracking operator B on oriented hyperedges, the edge
// reversal J, the reduced 2Kn x 2Kn matrix, the Bethe-Hessian and the
// Ihara-Bass determinant check.

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "error.hpp"
#include "hypergraph.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace hypernb {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline void check_weights(const LayeredHypergraph& g, const Eigen::VectorXd& w) {
  if (w.size() != g.K()) fail(Errc::DimensionMismatch, "one weight per layer required");
}

class NonBacktracking {
 public:
  NonBacktracking(const LayeredHypergraph& g, Eigen::VectorXd w) : g_(&g), idx_(g), w_(std::move(w)) {
    check_weights(g, w_);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(idx_.size()); }
  const OrientedIndex& index() const { return idx_; }
  const LayeredHypergraph& graph() const { return *g_; }
  const Eigen::VectorXd& weights() const { return w_; }
  double weight(std::size_t id) const { return w_(idx_.layer(id)); }

  // (Bu)(x->e) = sum_{y in e\x} [t(y) - w_e u(y->e)], t(y) = sum_{f ni y} w_f u(y->f).
  template <class V>
  void apply(const V& u, V& out) const {
    using S = typename V::Scalar;
    check_dim(u);
    out.resize(size());
    std::vector<S> t(g_->n());
    parallel_for(static_cast<std::size_t>(g_->n()), [&](std::size_t y) {
      S acc(0);
      for (std::size_t id : idx_.incident(static_cast<int>(y))) acc += weight(id) * u(id);
      t[y] = acc;
    });
    for (int k = 0; k < g_->K(); ++k) {
      const int q = g_->q(k);
      const double wk = w_(k);
      const auto& fl = g_->layer_flat(k);
      const std::size_t off = idx_.offset(k);
      parallel_for(g_->num_edges(k), [&](std::size_t e) {
        const std::size_t b = off + e * q;
        S s(0);
        for (int j = 0; j < q; ++j) s += t[fl[e * q + j]] - wk * u(b + j);
        for (int j = 0; j < q; ++j) out(b + j) = s - (t[fl[e * q + j]] - wk * u(b + j));
      }, 1024);
    }
  }

  // (B^T u)(y->f) = w_f [r(y) - (s(f) - u(y->f))], with s(e) the sum of u over
  // the oriented copies of e and r(y) = sum_{e ni y} (s(e) - u(y->e)).
  template <class V>
  void apply_transpose(const V& u, V& out) const {
    using S = typename V::Scalar;
    check_dim(u);
    out.resize(size());
    std::vector<S> s(idx_.size());
    edge_sums(u, s);
    std::vector<S> rv(g_->n());
    parallel_for(static_cast<std::size_t>(g_->n()), [&](std::size_t y) {
      S acc(0);
      for (std::size_t id : idx_.incident(static_cast<int>(y))) acc += s[id] - u(id);
      rv[y] = acc;
    });
    parallel_for(idx_.size(), [&](std::size_t id) {
      out(id) = weight(id) * (rv[idx_.vertex(id)] - (s[id] - u(id)));
    });
  }

  // Dense B built from the incidence structure; intended for small m.
  Eigen::MatrixXd dense() const {
    const Eigen::Index m = size();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < g_->K(); ++k) {
      const int q = g_->q(k);
      for (std::size_t e = 0; e < g_->num_edges(k); ++e) {
        const std::size_t b = idx_.edge_base(k, e);
        for (int i = 0; i < q; ++i)
          for (int j = 0; j < q; ++j) {
            if (i == j) continue;
            const int y = g_->edge(k, e)[j];
            for (std::size_t f : idx_.incident(y)) {
              if (idx_.layer(f) == k && idx_.edge(f) == e) continue;
              B(b + i, f) = weight(f);
            }
          }
      }
    }
    return B;
  }

  // s[id] = sum of u over the oriented copies of the edge of id.
  template <class V, class S>
  void edge_sums(const V& u, std::vector<S>& s) const {
    for (int k = 0; k < g_->K(); ++k) {
      const int q = g_->q(k);
      const std::size_t off = idx_.offset(k);
      parallel_for(g_->num_edges(k), [&](std::size_t e) {
        const std::size_t b = off + e * q;
        S acc(0);
        for (int j = 0; j < q; ++j) acc += u(b + j);
        for (int j = 0; j < q; ++j) s[b + j] = acc;
      }, 1024);
    }
  }

 private:
  template <class V>
  void check_dim(const V& u) const {
    if (u.size() != size()) fail(Errc::DimensionMismatch, "vector length differs from the number of oriented edges");
  }

  const LayeredHypergraph* g_;
  OrientedIndex idx_;
  Eigen::VectorXd w_;
};

// [Ju](x->e) = sum_{y in e, y != x} u(y->e).
template <class V>
V reversal_apply(const NonBacktracking& B, const V& u) {
  if (u.size() != B.size()) fail(Errc::DimensionMismatch, "vector length differs from the number of oriented edges");
  std::vector<typename V::Scalar> s(u.size());
  B.edge_sums(u, s);
  V out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = s[i] - u(i);
  return out;
}

// J^{-1} via J_k^{-1} = (J_k - (q_k - 2) I) / (q_k - 1) on each layer block.
template <class V>
V reversal_inverse_apply(const NonBacktracking& B, const V& u) {
  V ju = reversal_apply(B, u);
  V out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const int q = B.graph().q(B.index().layer(i));
    out(i) = (ju(i) - static_cast<double>(q - 2) * u(i)) / static_cast<double>(q - 1);
  }
  return out;
}

template <class V>
V weight_apply(const NonBacktracking& B, const V& u) {
  V out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = B.weight(i) * u(i);
  return out;
}

// Eigenvalue multiplicities of J: q_k - 1 once per layer-k edge, -1 with
// multiplicity sum_k (q_k - 1)|E_k|.
inline std::map<int, long> j_spectrum_counts(const LayeredHypergraph& g) {
  std::map<int, long> out;
  for (int k = 0; k < g.K(); ++k) {
    const long m = static_cast<long>(g.num_edges(k));
    if (m == 0) continue;
    out[g.q(k) - 1] += m;
    out[-1] += (g.q(k) - 1) * m;
  }
  return out;
}

struct ParityTimeResult {
  double residual = 0;
  double bound = 0;
  bool dense = false;
};

// max-entry residual of D_w B^k J - J (B^T)^k D_w. Dense for m <= dense_max,
// otherwise measured on Rademacher probe vectors.
inline ParityTimeResult parity_time_residual(const LayeredHypergraph& g, const Eigen::VectorXd& w, int k,
                                             std::uint64_t seed = 0, int probes = 8,
                                             Eigen::Index dense_max = 600) {
  if (k < 0) fail(Errc::InvalidInput, "power must be non-negative");
  NonBacktracking B(g, w);
  const Eigen::Index m = B.size();
  ParityTimeResult res;
  res.bound = 1e-10 * std::pow(w.size() ? w.cwiseAbs().maxCoeff() : 0.0, k) * static_cast<double>(m);
  if (m == 0) return res;
  if (m <= dense_max) {
    res.dense = true;
    const Eigen::MatrixXd Bd = B.dense();
    Eigen::MatrixXd J(m, m), Dw = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(m, c);
      J.col(c) = reversal_apply(B, e);
      Dw(c, c) = B.weight(c);
    }
    Eigen::MatrixXd L = J, R = Dw;
    for (int i = 0; i < k; ++i) {
      L = Bd * L;
      R = Bd.transpose() * R;
    }
    L = Dw * L;
    R = J * R;
    res.residual = (L - R).cwiseAbs().maxCoeff();
    return res;
  }
  Rng rng = Rng::stream(seed, "parity-time-probe");
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = (rng() >> 63) ? 1.0 : -1.0;
    Eigen::VectorXd a = reversal_apply(B, z), tmp;
    for (int i = 0; i < k; ++i) {
      B.apply(a, tmp);
      a.swap(tmp);
    }
    a = weight_apply(B, a);
    Eigen::VectorXd b = weight_apply(B, z);
    for (int i = 0; i < k; ++i) {
      B.apply_transpose(b, tmp);
      b.swap(tmp);
    }
    b = reversal_apply(B, b);
    res.residual = std::max(res.residual, (a - b).cwiseAbs().maxCoeff());
  }
  return res;
}

// Per-layer adjacency and degree data shared by the reduced matrix and the
// Bethe-Hessian.
struct LayerMatrices {
  int n = 0;
  std::vector<SpMat> A;
  std::vector<Eigen::VectorXd> D;
  std::vector<int> q;
  Eigen::VectorXd w;
  std::vector<std::size_t> m;  // edges per layer

  LayerMatrices(const LayeredHypergraph& g, const Eigen::VectorXd& w_) : n(g.n()), w(w_) {
    check_weights(g, w_);
    for (int k = 0; k < g.K(); ++k) {
      A.push_back(adjacency(g, k));
      auto d = degrees(g, k);
      Eigen::VectorXd dv(g.n());
      for (int x = 0; x < g.n(); ++x) dv(x) = d[x];
      D.push_back(dv);
      q.push_back(g.q(k));
      m.push_back(g.num_edges(k));
    }
  }
  int K() const { return static_cast<int>(q.size()); }
};

// Reduced matrix. Block k occupies rows [2kn, 2kn + 2n): the first n are the
// "incoming" coordinates, the next n the "outgoing" ones. Block (k, l) is
// w_l [[0, D_k - d_kl I], [-(q_l - 1) d_kl I, A_k - (q_l - 2) d_kl I]].
class ReducedNB {
 public:
  ReducedNB(const LayeredHypergraph& g, const Eigen::VectorXd& w) : L_(g, w) {}

  Eigen::Index size() const { return 2 * static_cast<Eigen::Index>(L_.K()) * L_.n; }
  const LayerMatrices& layers() const { return L_; }

  template <class V>
  void apply(const V& x, V& out) const {
    using S = typename V::Scalar;
    if (x.size() != size()) fail(Errc::DimensionMismatch, "vector length differs from 2Kn");
    const Eigen::Index n = L_.n;
    Eigen::Matrix<S, Eigen::Dynamic, 1> y = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(n);
    for (int k = 0; k < L_.K(); ++k) y += L_.w(k) * x.segment(2 * k * n + n, n);
    out.resize(size());
    for (int k = 0; k < L_.K(); ++k) {
      const double wk = L_.w(k);
      const double qk = L_.q[k];
      auto xin = x.segment(2 * k * n, n);
      auto xout = x.segment(2 * k * n + n, n);
      out.segment(2 * k * n, n) = L_.D[k].cwiseProduct(y) - wk * xout;
      out.segment(2 * k * n + n, n) = L_.A[k] * y - (wk * (qk - 2)) * xout - (wk * (qk - 1)) * xin;
    }
  }

  Eigen::MatrixXd dense() const {
    const Eigen::Index n = L_.n, N = size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
    for (int k = 0; k < L_.K(); ++k)
      for (int l = 0; l < L_.K(); ++l) {
        const double wl = L_.w(l);
        const double dl = k == l ? 1.0 : 0.0;
        const Eigen::Index r0 = 2 * k * n, c0 = 2 * l * n;
        Eigen::MatrixXd Ak = Eigen::MatrixXd(L_.A[k]);
        M.block(r0, c0 + n, n, n) = wl * (Eigen::MatrixXd(L_.D[k].asDiagonal()) - dl * Eigen::MatrixXd::Identity(n, n));
        M.block(r0 + n, c0, n, n) = -wl * (L_.q[l] - 1) * dl * Eigen::MatrixXd::Identity(n, n);
        M.block(r0 + n, c0 + n, n, n) = wl * (Ak - (L_.q[l] - 2) * dl * Eigen::MatrixXd::Identity(n, n));
      }
    return M;
  }

 private:
  LayerMatrices L_;
};

inline ReducedNB build_reduced(const LayeredHypergraph& g, const Eigen::VectorXd& w) { return ReducedNB(g, w); }

// Delta_k(lambda) = (lambda - w_k)(lambda + w_k (q_k - 1)).
template <class S>
S pole_factor(S lambda, double w, int q) {
  return (lambda - w) * (lambda + w * (q - 1));
}

template <class S>
void check_pole(S lambda, const Eigen::VectorXd& w, const std::vector<int>& q) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    for (double pole : {w(k), -w(k) * (q[k] - 1)}) {
      if (std::abs(lambda - pole) <= 1e-9 * std::max(1.0, std::abs(pole)))
        fail(Errc::PoleError, "lambda coincides with a pole w_k or -w_k(q_k-1)");
    }
  }
}

struct BetheHessian {
  double lambda = 0;
  SpMat H;
};

// H(lambda) = I - sum_k w_k lambda / Delta_k A_k + sum_k w_k^2 (q_k - 1) / Delta_k D_k.
inline BetheHessian bethe_hessian(const LayerMatrices& L, double lambda) {
  check_pole(lambda, L.w, L.q);
  SpMat H(L.n, L.n);
  H.setIdentity();
  for (int k = 0; k < L.K(); ++k) {
    const double del = pole_factor(lambda, L.w(k), L.q[k]);
    H -= (L.w(k) * lambda / del) * L.A[k];
    SpMat Dk(L.n, L.n);
    std::vector<Eigen::Triplet<double>> trip;
    for (int x = 0; x < L.n; ++x)
      if (L.D[k](x) != 0) trip.emplace_back(x, x, L.D[k](x));
    Dk.setFromTriplets(trip.begin(), trip.end());
    H += (L.w(k) * L.w(k) * (L.q[k] - 1) / del) * Dk;
  }
  H.makeCompressed();
  return {lambda, H};
}

inline BetheHessian bethe_hessian(const LayeredHypergraph& g, const Eigen::VectorXd& w, double lambda) {
  return bethe_hessian(LayerMatrices(g, w), lambda);
}

// H(lambda) y for real or complex lambda, without assembling H.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> bethe_hessian_apply(const LayerMatrices& L, S lambda,
                                                       const Eigen::Matrix<S, Eigen::Dynamic, 1>& y) {
  check_pole(lambda, L.w, L.q);
  Eigen::Matrix<S, Eigen::Dynamic, 1> out = y;
  for (int k = 0; k < L.K(); ++k) {
    const S del = pole_factor(lambda, L.w(k), L.q[k]);
    const Eigen::Matrix<S, Eigen::Dynamic, 1> Ay = L.A[k] * y;
    out -= (L.w(k) * lambda / del) * Ay;
    out += (L.w(k) * L.w(k) * (L.q[k] - 1) / del) * L.D[k].cwiseProduct(y);
  }
  return out;
}

template <class S>
struct LiftResult {
  Eigen::Matrix<S, Eigen::Dynamic, 1> tilde;  // 2Kn, layout of ReducedNB
  Eigen::Matrix<S, Eigen::Dynamic, 1> y;      // n
};

// From an eigenvector v of B: v_k^in = S_k J_k^{-1} v, v_k^out = S_k v, and
// y = sum_k w_k v_k^out, where (S_k v)(x) sums v over layer-k edges leaving x.
template <class S>
LiftResult<S> eigvec_lift_and_aggregate(const NonBacktracking& B, S lambda,
                                        const Eigen::Matrix<S, Eigen::Dynamic, 1>& v) {
  using V = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const auto& g = B.graph();
  std::vector<int> q(g.q_sizes());
  check_pole(lambda, B.weights(), q);
  const Eigen::Index n = g.n();
  const V jinv = reversal_inverse_apply(B, v);
  LiftResult<S> out;
  out.tilde = V::Zero(2 * g.K() * n);
  out.y = V::Zero(n);
  const auto& idx = B.index();
  for (std::size_t id = 0; id < idx.size(); ++id) {
    const int k = idx.layer(id);
    const int x = idx.vertex(id);
    out.tilde(2 * k * n + x) += jinv(id);
    out.tilde(2 * k * n + n + x) += v(id);
  }
  for (int k = 0; k < g.K(); ++k) out.y += B.weights()(k) * out.tilde.segment(2 * k * n + n, n);
  return out;
}

// y = sum_k w_k x_k^out for a vector in the ReducedNB layout.
template <class V>
V aggregate_reduced(const V& x, const Eigen::VectorXd& w, Eigen::Index n) {
  V y = V::Zero(n);
  for (Eigen::Index k = 0; k < w.size(); ++k) y += w(k) * x.segment(2 * k * n + n, n);
  return y;
}

struct LogDet {
  double logabs = 0;
  double phase = 0;  // in (-pi, pi]
  bool singular = false;
};

inline double wrap_phase(double a) {
  a = std::remainder(a, 2 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

inline LogDet complex_logdet(const CMat& M) {
  LogDet out;
  if (M.rows() == 0) return out;
  Eigen::PartialPivLU<CMat> lu(M);
  const CMat& U = lu.matrixLU();
  double ph = lu.permutationP().determinant() < 0 ? std::numbers::pi : 0.0;
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const cplx u = U(i, i);
    if (u == cplx(0)) {
      out.singular = true;
      out.logabs = -std::numeric_limits<double>::infinity();
      return out;
    }
    out.logabs += std::log(std::abs(u));
    ph += std::arg(u);
  }
  out.phase = wrap_phase(ph);
  return out;
}

struct IharaBassReport {
  LogDet lhs;
  LogDet rhs;
  double logabs_rel_diff = 0;
  double phase_diff = 0;
  bool singular = false;
  bool agree = false;
};

// det(lambda I - B) against det(lambda I - B~) prod_k (lambda - w_k)^{(q_k-1)m_k - n}
// (lambda + w_k(q_k-1))^{m_k - n}, in log-modulus and phase.
inline IharaBassReport ihara_bass_verify(const LayeredHypergraph& g, const Eigen::VectorXd& w, cplx lambda,
                                         double tol = 1e-8) {
  NonBacktracking B(g, w);
  ReducedNB R(g, w);
  const auto& L = R.layers();
  check_pole(lambda, w, L.q);
  CMat Mb = -B.dense().cast<cplx>();
  Mb.diagonal().array() += lambda;
  CMat Mr = -R.dense().cast<cplx>();
  Mr.diagonal().array() += lambda;
  IharaBassReport rep;
  rep.lhs = complex_logdet(Mb);
  LogDet rd = complex_logdet(Mr);
  rep.singular = rep.lhs.singular || rd.singular;
  double la = rd.logabs, ph = rd.phase;
  for (int k = 0; k < L.K(); ++k) {
    const double e1 = static_cast<double>((L.q[k] - 1) * static_cast<long>(L.m[k]) - L.n);
    const double e2 = static_cast<double>(static_cast<long>(L.m[k]) - L.n);
    const cplx f1 = lambda - w(k), f2 = lambda + w(k) * (L.q[k] - 1);
    la += e1 * std::log(std::abs(f1)) + e2 * std::log(std::abs(f2));
    ph += e1 * std::arg(f1) + e2 * std::arg(f2);
  }
  rep.rhs.logabs = la;
  rep.rhs.phase = wrap_phase(ph);
  if (rep.singular) return rep;
  rep.logabs_rel_diff = std::abs(rep.lhs.logabs - rep.rhs.logabs) / std::max(1.0, std::abs(rep.lhs.logabs));
  rep.phase_diff = std::abs(wrap_phase(rep.lhs.phase - rep.rhs.phase));
  rep.agree = rep.logabs_rel_diff <= tol && rep.phase_diff <= tol;
  return rep;
}

struct EigRelationReport {
  int checked = 0;
  int skipped_near_pole = 0;
  double max_reduced_residual = 0;  // ||B~ v~ - lambda v~|| with ||v|| = 1
  double max_hessian_residual = 0;  // ||H(lambda) y||
  bool pass = false;
};

// Dense eigendecomposition of B; every eigenpair farther than pole_guard
// (relative) from a pole is lifted and checked against B~ and H(lambda).
inline EigRelationReport eig_relation_check(const LayeredHypergraph& g, const Eigen::VectorXd& w,
                                            double pole_guard = 1e-3, double tol = 1e-8,
                                            Eigen::Index dense_max = 2000) {
  NonBacktracking B(g, w);
  if (B.size() > dense_max) fail(Errc::InvalidInput, "instance too large for a dense eigendecomposition");
  EigRelationReport rep;
  if (B.size() == 0) {
    rep.pass = true;
    return rep;
  }
  ReducedNB R(g, w);
  const auto& L = R.layers();
  Eigen::EigenSolver<Eigen::MatrixXd> es(B.dense());
  for (Eigen::Index c = 0; c < es.eigenvalues().size(); ++c) {
    const cplx lambda = es.eigenvalues()(c);
    bool near = false;
    for (int k = 0; k < g.K(); ++k)
      for (double pole : {w(k), -w(k) * (g.q(k) - 1)})
        near = near || std::abs(lambda - pole) <= pole_guard * std::max(1.0, std::abs(pole));
    if (near) {
      ++rep.skipped_near_pole;
      continue;
    }
    CVec v = es.eigenvectors().col(c);
    v /= v.norm();
    const auto lift = eigvec_lift_and_aggregate<cplx>(B, lambda, v);
    CVec Rv;
    R.apply(lift.tilde, Rv);
    rep.max_reduced_residual = std::max(rep.max_reduced_residual, (Rv - lambda * lift.tilde).norm());
    rep.max_hessian_residual = std::max(rep.max_hessian_residual, bethe_hessian_apply<cplx>(L, lambda, lift.y).norm());
    ++rep.checked;
  }
  rep.pass = rep.max_reduced_residual <= tol && rep.max_hessian_residual <= tol;
  return rep;
}

}  // namespace hypernb

#endif
