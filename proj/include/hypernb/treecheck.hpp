#ifndef HYPERNB_TREECHECK_HPP
#define HYPERNB_TREECHECK_HPP

// Monte Carlo checks of Galton-Watson tree functionals: martingale property
// of Z_t = mu^-t f_t, the second-moment closed forms, and the third-order
// tensor contractions behind them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace hypernb {

// sum over depth-t vertices of the product of edge weights on the path
// from the root, times xi(type).
inline double eval_functional(const HyperTree& tree, const Vec& xi, int t) {
  if (t < 0 || t > tree.depth) fail(Errc::DepthExceeded, "tree is shallower than the requested depth");
  std::vector<double> pw(tree.nodes.size(), 1.0);
  double out = 0;
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    const auto& nd = tree.nodes[v];
    if (nd.parent_edge >= 0) {
      const auto& e = tree.edges[nd.parent_edge];
      pw[v] = pw[e.parent] * tree.layer_weights(e.layer);
    }
    if (nd.depth == t) out += pw[v] * xi(nd.type);
  }
  return out;
}

// Q3^(k)_{ijl} = pi_j pi_l sum_{m in [r]^(q-3)} p_{ijlm} prod pi_m, i the root
// index; stored as [i][j][l] in a flat r^3 array. Zero when q = 2.
struct QThree {
  int r = 1;
  std::vector<std::vector<double>> layer;
  std::vector<double> weighted;  // sum_k w_k^2 (q_k-1)(q_k-2) Q3^(k)

  double at(const std::vector<double>& T, int i, int j, int l) const { return T[(i * r + j) * r + l]; }
};

inline std::vector<double> q3_weighted(const ModelParams& p, const QThree& Q3, const Vec& a) {
  std::vector<double> out(static_cast<std::size_t>(p.r) * p.r * p.r, 0.0);
  for (int k = 0; k < p.K(); ++k) {
    const double c = a(k) * (p.layers[k].q - 1) * (p.layers[k].q - 2);
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += c * Q3.layer[k][x];
  }
  return out;
}

inline QThree q3_tensor(const ModelParams& p) {
  const int r = p.r;
  QThree out;
  out.r = r;
  for (auto& L : p.layers) {
    std::vector<double> T(static_cast<std::size_t>(r) * r * r, 0.0);
    if (L.q >= 3) {
      for (auto& c : compositions(r, L.q - 3)) {
        const double mult = multinomial(c) * pi_power(p.pi, c);
        if (mult == 0) continue;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < r; ++j)
            for (int l = 0; l < r; ++l) {
              Composition full = c;
              ++full[i];
              ++full[j];
              ++full[l];
              T[(i * r + j) * r + l] += p.pi(j) * p.pi(l) * mult * L.tensor.at(full);
            }
      }
    }
    out.layer.push_back(std::move(T));
  }
  out.weighted = q3_weighted(p, out, p.weights.array().square());
  return out;
}

// sum_i pi_i Q3^(k)_{ijl}; equals (Pi Q^(k))_{jl} under constant degree.
inline Mat q3_root_contraction(const QThree& Q3, const Vec& pi, int k) {
  Mat out = Mat::Zero(Q3.r, Q3.r);
  for (int i = 0; i < Q3.r; ++i)
    for (int j = 0; j < Q3.r; ++j)
      for (int l = 0; l < Q3.r; ++l) out(j, l) += pi(i) * Q3.at(Q3.layer[k], i, j, l);
  return out;
}

// y(i) = [K (phi o phi')](i) + sum_{j,l} Q3_{ijl} phi_j phi'_l.
inline Vec y_vec(const ModelParams& p, const QThree& Q3, const Vec& phi, const Vec& phi2) {
  const Mat K = weighted_Q(p, p.weights.array().square());
  Vec y = K * phi.cwiseProduct(phi2);
  for (int i = 0; i < p.r; ++i)
    for (int j = 0; j < p.r; ++j)
      for (int l = 0; l < p.r; ++l) y(i) += Q3.at(Q3.weighted, i, j, l) * phi(j) * phi2(l);
  return y;
}

struct StatLine {
  double mean = 0;
  double se = 0;
  double target = 0;
  bool pass = false;
};

struct RootReport {
  int root_type = 0;
  std::vector<StatLine> z_i, z_j;        // t = 0..t_max
  std::vector<StatLine> step_i, step_j;  // Z_{t+1} - Z_t, t < t_max, target 0
  std::vector<StatLine> cross;           // E[Z_t^i Z_t^j], t = 0..t_max
  std::vector<StatLine> second_i;        // E[(Z_t^i)^2], t = 0..t_max
  std::vector<StatLine> increment;       // E[(f_{t+1} - mu f_t)^2] for phi_i, t < t_max
  std::vector<double> var_i;             // empirical Var(Z_t^i)
  std::vector<double> var_i_se;
  std::vector<double> var_i_theory;
};

struct TreeFunctionalReport {
  int i = 0, j = 0;
  int t_max = 0;
  long M = 0;
  std::uint64_t seed = 0;
  double mu_i = 0, mu_j = 0;
  std::vector<RootReport> roots;
  bool all_pass = true;
};

// E[Z_t Z'_t] for root type a.
inline double second_moment_theory(const ModelParams& p, const QThree& Q3, const Vec& phi, const Vec& phi2,
                                   double mu, double mu2, int t, int a) {
  const Mat K = weighted_Q(p, p.weights.array().square());
  Vec ky = y_vec(p, Q3, phi, phi2);
  double out = phi(a) * phi2(a);
  double scale = 1.0 / (mu * mu2);
  for (int s = 0; s < t; ++s) {
    out += scale * ky(a);
    ky = K * ky;
    scale /= mu * mu2;
  }
  return out;
}

namespace detail {

// Inversion over a finite distribution with a guide table: states are kept
// in order of decreasing probability so frequent draws touch little memory.
struct GuideTable {
  std::vector<std::size_t> order;  // state index by rank
  std::vector<double> cdf;
  std::vector<std::uint32_t> guide;

  explicit GuideTable(const std::vector<double>& w) : order(w.size()), cdf(w.size()), guide(w.size() + 1) {
    for (std::size_t i = 0; i < w.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return w[x] > w[y]; });
    double total = 0;
    for (double x : w) total += x;
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) cdf[i] = (acc += w[order[i]] / total);
    cdf.back() = 1;
    const std::size_t g = guide.size();
    std::size_t j = 0;
    for (std::size_t b = 0; b < g; ++b) {
      while (cdf[j] <= static_cast<double>(b) / g) ++j;
      guide[b] = static_cast<std::uint32_t>(j);
    }
  }

  // Returns the rank of the drawn state; order[rank] is its index.
  std::size_t draw_rank(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t j = guide[static_cast<std::size_t>(u * guide.size())];
    while (cdf[j] <= u) ++j;
    return j;
  }
};

// Streaming evaluation of tree functionals. By Poisson thinning, the number
// of layer-k hyperedges with child composition c below a type-a vertex is an
// independent Poisson(d_k P(c | a)) count, drawn by inversion.
struct TreeWalker {
  struct Entry {
    std::size_t cdf_begin = 0;
    int cdf_len = 0;
    int layer = 0;
    int comp = 0;
    double w = 1;
    double s_i = 0, s_j = 0;  // w times the summed child values
  };
  const GwLaw& law;
  const Vec& phi_i;
  const Vec& phi_j;
  std::vector<double> cdf_pool;
  std::vector<Entry> entries;
  std::vector<std::size_t> type_begin;  // entries of type a: [type_begin[a], type_begin[a+1])
  std::vector<double> phi_i_v, phi_j_v;
  std::size_t cap;

  // Depth-one subtrees only need the child counts per (layer, type). Their
  // joint law is a finite convolution of the per-entry Poisson laws; when it
  // is small enough it is tabulated and sampled by inversion.
  struct Leaf {
    double fi1 = 0, fj1 = 0;
    std::size_t children = 0;
  };
  std::vector<std::vector<Leaf>> leaf;
  std::vector<GuideTable> leaf_guide;
  static constexpr std::size_t kLeafStates = 200000;
  static constexpr double kLeafPrune = 1e-18;

  TreeWalker(const GwLaw& l, const Vec& a, const Vec& b, std::size_t cap_) : law(l), phi_i(a), phi_j(b), cap(cap_) {
    for (int t = 0; t < law.r; ++t) {
      phi_i_v.push_back(phi_i(t));
      phi_j_v.push_back(phi_j(t));
    }
    for (int t = 0; t < law.r; ++t) {
      type_begin.push_back(entries.size());
      for (std::size_t k = 0; k < law.layers.size(); ++k) {
        const auto& L = law.layers[k];
        if (L.d <= 0) continue;
        for (std::size_t c = 0; c < L.comps.size(); ++c) {
          const double prob = std::max(0.0, L.cdf[t][c] - (c ? L.cdf[t][c - 1] : 0.0));
          if (prob == 0) continue;
          Entry e;
          e.layer = static_cast<int>(k);
          e.comp = static_cast<int>(c);
          e.w = L.w;
          for (int u = 0; u < law.r; ++u) {
            e.s_i += L.w * L.comps[c][u] * phi_i_v[u];
            e.s_j += L.w * L.comps[c][u] * phi_j_v[u];
          }
          e.cdf_begin = cdf_pool.size();
          const double mean = L.d * prob;
          double pk = std::exp(-mean), acc = 0;
          for (int n = 0; n < 10000; ++n) {
            acc += pk;
            cdf_pool.push_back(acc);
            pk *= mean / (n + 1);
            if (n > mean && pk < 1e-17) break;
          }
          e.cdf_len = static_cast<int>(cdf_pool.size() - e.cdf_begin);
          entries.push_back(e);
        }
      }
    }
    type_begin.push_back(entries.size());
    build_leaf_tables();
  }

  void build_leaf_tables() {
    const int K = static_cast<int>(law.layers.size());
    std::vector<std::vector<Leaf>> tables;
    std::vector<GuideTable> guides;
    for (int t = 0; t < law.r; ++t) {
      std::map<std::vector<int>, double> states{{std::vector<int>(K * law.r, 0), 1.0}};
      for (std::size_t x = type_begin[t]; x < type_begin[t + 1]; ++x) {
        const Entry& e = entries[x];
        const auto& comp = law.layers[e.layer].comps[e.comp];
        const double* pc = cdf_pool.data() + e.cdf_begin;
        std::map<std::vector<int>, double> next;
        for (const auto& [key, pr] : states)
          for (int m = 0; m < e.cdf_len; ++m) {
            const double pm = m ? pc[m] - pc[m - 1] : pc[0];
            if (pr * pm < kLeafPrune) continue;
            auto k2 = key;
            for (int u = 0; u < law.r; ++u) k2[e.layer * law.r + u] += m * comp[u];
            next[k2] += pr * pm;
          }
        if (next.size() > kLeafStates) return;
        states = std::move(next);
      }
      std::vector<Leaf> tab;
      std::vector<double> wts;
      for (const auto& [key, pr] : states) {
        Leaf l;
        for (int k = 0; k < K; ++k)
          for (int u = 0; u < law.r; ++u) {
            const int nku = key[k * law.r + u];
            l.fi1 += law.layers[k].w * nku * phi_i_v[u];
            l.fj1 += law.layers[k].w * nku * phi_j_v[u];
            l.children += nku;
          }
        tab.push_back(l);
        wts.push_back(pr);
      }
      guides.emplace_back(wts);
      std::vector<Leaf> ranked(tab.size());
      for (std::size_t rk = 0; rk < tab.size(); ++rk) ranked[rk] = tab[guides.back().order[rk]];
      tables.push_back(std::move(ranked));
    }
    leaf = std::move(tables);
    leaf_guide = std::move(guides);
  }

  // fi[s], fj[s] for s = 0..h: functionals of the subtree rooted at a
  // vertex of the given type, truncated at relative depth h.
  void grow(Rng& rng, int type, int h, double* fi, double* fj, std::size_t& nodes) const {
    fi[0] = phi_i_v[type];
    fj[0] = phi_j_v[type];
    for (int s = 1; s <= h; ++s) fi[s] = fj[s] = 0;
    if (h == 0) return;
    if (h == 1 && !leaf.empty()) {
      const Leaf& l = leaf[type][leaf_guide[type].draw_rank(rng)];
      nodes += l.children;
      if (nodes > cap) fail(Errc::PopulationCap, "Galton-Watson tree exceeded the node cap");
      fi[1] = l.fi1;
      fj[1] = l.fj1;
      return;
    }
    double ci[16], cj[16];
    for (std::size_t x = type_begin[type]; x < type_begin[type + 1]; ++x) {
      const Entry& e = entries[x];
      const double* pc = cdf_pool.data() + e.cdf_begin;
      const double u = rng.uniform();
      int m = 0;
      while (m + 1 < e.cdf_len && u >= pc[m]) ++m;
      if (m == 0) continue;
      const auto& L = law.layers[e.layer];
      nodes += static_cast<std::size_t>(m) * (L.q - 1);
      if (nodes > cap) fail(Errc::PopulationCap, "Galton-Watson tree exceeded the node cap");
      if (h == 1) {
        fi[1] += m * e.s_i;
        fj[1] += m * e.s_j;
        continue;
      }
      const auto& comp = L.comps[e.comp];
      for (int rep_e = 0; rep_e < m; ++rep_e)
        for (int a = 0; a < law.r; ++a)
          for (int rep = 0; rep < comp[a]; ++rep) {
            grow(rng, a, h - 1, ci, cj, nodes);
            for (int s = 0; s < h; ++s) {
              fi[s + 1] += e.w * ci[s];
              fj[s + 1] += e.w * cj[s];
            }
          }
    }
  }
};

}  // namespace detail

// Per root type, M trees of depth t_max. Checks (a) E Z_t = phi_i(root) and
// flat increments, (b) E[Z_t Z'_t] against its closed form, (c) the mean
// squared increment of f against K^t y, all within 4 standard errors.
inline TreeFunctionalReport martingale_check(const ModelParams& p, const SpectralConstants& c, int i, int j,
                                             int t_max, long M, std::uint64_t seed,
                                             std::size_t cap = 10'000'000, int depth_cap = 6) {
  if (i < 0 || j < 0 || i >= p.r || j >= p.r) fail(Errc::IndexOutOfRange, "eigen index out of range");
  if (t_max < 0 || t_max > depth_cap || t_max > 14) fail(Errc::DepthTooLarge, "depth above the configured cap");
  if (M < 1000) fail(Errc::InvalidInput, "need at least 1000 samples");
  const double mi = c.mu(i), mj = c.mu(j);
  if (mi == 0 || mj == 0) fail(Errc::InvalidInput, "eigenvalues must be non-zero");
  const Vec phi_i = c.phi.col(i), phi_j = c.phi.col(j);
  GwLaw law(p);
  QThree Q3 = q3_tensor(p);
  const Mat K = weighted_Q(p, p.weights.array().square());
  const Vec yii = y_vec(p, Q3, phi_i, phi_i);

  TreeFunctionalReport rep;
  rep.i = i;
  rep.j = j;
  rep.t_max = t_max;
  rep.M = M;
  rep.seed = seed;
  rep.mu_i = mi;
  rep.mu_j = mj;

  const int T = t_max + 1;
  // Per-sample quantities, indexed [slot][t]: Zi, Zj, ZiZj, Zi^2, dZi, dZj, F.
  enum { ZI, ZJ, ZIJ, ZII, DI, DJ, FI, NSLOT };
  const long chunk = 512;
  const long nchunks = (M + chunk - 1) / chunk;
  const detail::TreeWalker walker(law, phi_i, phi_j, cap);

  for (int a = 0; a < p.r; ++a) {
    // sums of x, x^2 per slot and t, plus x^3, x^4 for Zi (variance SE).
    std::vector<std::vector<double>> part(nchunks, std::vector<double>(NSLOT * T * 2 + 2 * T, 0.0));
    parallel_chunks(static_cast<std::size_t>(nchunks), [&](std::size_t ch) {
      auto& acc = part[ch];
      double fi[16], fj[16];
      const long lo = static_cast<long>(ch) * chunk, hi = std::min(M, lo + chunk);
      for (long s = lo; s < hi; ++s) {
        Rng rng = Rng::stream(seed, "gw-functional", static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(s));
        std::size_t nodes = 1;
        walker.grow(rng, a, t_max, fi, fj, nodes);
        double vals[NSLOT][16] = {};
        for (int t = 0; t < T; ++t) {
          vals[ZI][t] = fi[t] / std::pow(mi, t);
          vals[ZJ][t] = fj[t] / std::pow(mj, t);
          vals[ZIJ][t] = vals[ZI][t] * vals[ZJ][t];
          vals[ZII][t] = vals[ZI][t] * vals[ZI][t];
        }
        for (int t = 0; t + 1 < T; ++t) {
          vals[DI][t] = vals[ZI][t + 1] - vals[ZI][t];
          vals[DJ][t] = vals[ZJ][t + 1] - vals[ZJ][t];
          const double inc = fi[t + 1] - mi * fi[t];
          vals[FI][t] = inc * inc;
        }
        for (int sl = 0; sl < NSLOT; ++sl)
          for (int t = 0; t < T; ++t) {
            acc[(sl * T + t) * 2] += vals[sl][t];
            acc[(sl * T + t) * 2 + 1] += vals[sl][t] * vals[sl][t];
          }
        for (int t = 0; t < T; ++t) {
          const double z2 = vals[ZI][t] * vals[ZI][t];
          acc[NSLOT * T * 2 + 2 * t] += z2 * vals[ZI][t];
          acc[NSLOT * T * 2 + 2 * t + 1] += z2 * z2;
        }
      }
    });
    std::vector<double> tot(part[0].size(), 0.0);
    for (auto& pc : part)
      for (std::size_t x = 0; x < tot.size(); ++x) tot[x] += pc[x];
    const double Md = static_cast<double>(M);
    auto stat = [&](int sl, int t, double target) {
      StatLine st;
      const double s1 = tot[(sl * T + t) * 2], s2 = tot[(sl * T + t) * 2 + 1];
      st.mean = s1 / Md;
      const double var = std::max(0.0, (s2 - s1 * s1 / Md) / (Md - 1));
      st.se = std::sqrt(var / Md);
      st.target = target;
      st.pass = std::abs(st.mean - target) <= 4 * st.se + 1e-12 * std::max(1.0, std::abs(target));
      return st;
    };
    RootReport rr;
    rr.root_type = a;
    Vec ky = yii;
    for (int t = 0; t < T; ++t) {
      rr.z_i.push_back(stat(ZI, t, phi_i(a)));
      rr.z_j.push_back(stat(ZJ, t, phi_j(a)));
      rr.cross.push_back(stat(ZIJ, t, second_moment_theory(p, Q3, phi_i, phi_j, mi, mj, t, a)));
      rr.second_i.push_back(stat(ZII, t, second_moment_theory(p, Q3, phi_i, phi_i, mi, mi, t, a)));
      if (t + 1 < T) {
        rr.step_i.push_back(stat(DI, t, 0.0));
        rr.step_j.push_back(stat(DJ, t, 0.0));
        rr.increment.push_back(stat(FI, t, ky(a)));
        ky = K * ky;
      }
      const double m1 = tot[(ZI * T + t) * 2] / Md, m2 = tot[(ZI * T + t) * 2 + 1] / Md;
      const double m3 = tot[NSLOT * T * 2 + 2 * t] / Md, m4 = tot[NSLOT * T * 2 + 2 * t + 1] / Md;
      const double var = m2 - m1 * m1;
      // fourth central moment for the standard error of the variance
      const double c4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
      rr.var_i.push_back(var);
      rr.var_i_se.push_back(std::sqrt(std::max(0.0, c4 - var * var) / Md));
      rr.var_i_theory.push_back(second_moment_theory(p, Q3, phi_i, phi_i, mi, mi, t, a) - phi_i(a) * phi_i(a));
    }
    for (auto* v : {&rr.z_i, &rr.z_j, &rr.cross, &rr.second_i, &rr.step_i, &rr.step_j, &rr.increment})
      for (auto& st : *v) rep.all_pass = rep.all_pass && st.pass;
    rep.roots.push_back(std::move(rr));
  }
  return rep;
}

// sup over t of the closed-form Var(Z_t) for root type a (bounded when
// mu^2 > vartheta); evaluated up to t_limit.
inline double variance_sup_theory(const ModelParams& p, const SpectralConstants& c, int i, int a, int t_limit = 400) {
  QThree Q3 = q3_tensor(p);
  const Vec phi = c.phi.col(i);
  const Mat K = weighted_Q(p, p.weights.array().square());
  Vec ky = y_vec(p, Q3, phi, phi);
  const double mu2 = c.mu(i) * c.mu(i);
  double acc = 0, best = 0, scale = 1.0 / mu2;
  for (int s = 0; s < t_limit; ++s) {
    acc += scale * ky(a);
    best = std::max(best, acc);
    ky = K * ky;
    scale /= mu2;
  }
  return best;
}

}  // namespace hypernb

#endif
