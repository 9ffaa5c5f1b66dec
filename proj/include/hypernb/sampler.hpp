#ifndef HYPERNB_SAMPLER_HPP
#define HYPERNB_SAMPLER_HPP

// Random generation of non-uniform HSBM instances and of the Galton-Watson
// hypertrees that are their local limit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

#include "hypergraph.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace hypernb {

enum class LabelMode { Blocks, Shuffled };

struct SampleConfig {
  ModelParams params;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::Blocks;
};

struct HsbmSample {
  LayeredHypergraph graph;
  Assignment labels;
};

// Largest-remainder rounding of pi * n; ties go to the lower index.
inline std::vector<std::int64_t> community_sizes(const Vec& pi, std::int64_t n) {
  const int r = static_cast<int>(pi.size());
  std::vector<std::int64_t> sz(r);
  std::vector<std::pair<double, int>> frac(r);
  std::int64_t used = 0;
  for (int i = 0; i < r; ++i) {
    const double x = pi(i) * static_cast<double>(n);
    sz[i] = static_cast<std::int64_t>(std::floor(x));
    used += sz[i];
    frac[i] = {x - std::floor(x), i};
  }
  std::stable_sort(frac.begin(), frac.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::int64_t j = 0; used < n; ++j, ++used) ++sz[frac[j % r].second];
  return sz;
}

namespace detail {

// Exact count of candidate edges as a wide integer when it fits.
inline bool exact_candidates(const std::vector<std::int64_t>& sizes, const Composition& c, unsigned __int128& out) {
  unsigned __int128 acc = 1;
  const unsigned __int128 lim = ~static_cast<unsigned __int128>(0) >> 8;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int j = 1; j <= c[i]; ++j) {
      const std::int64_t top = sizes[i] - c[i] + j;
      if (top <= 0) {
        out = 0;
        return true;
      }
      if (acc > lim / static_cast<unsigned __int128>(top)) return false;
      acc = acc * static_cast<unsigned __int128>(top) / static_cast<unsigned __int128>(j);
    }
  }
  out = acc;
  return true;
}

// Binomial(N, p). Uses the library sampler when N fits in 63 bits, and
// geometric gap skipping over a long double position otherwise.
inline std::int64_t binomial_count(Rng& rng, long double N, double p) {
  if (N <= 0 || p <= 0) return 0;
  if (p >= 1) return static_cast<std::int64_t>(N);
  if (N < 4.0e18L) {
    std::binomial_distribution<std::int64_t> dist(static_cast<std::int64_t>(N), p);
    return dist(rng);
  }
  const long double lq = std::log1p(-static_cast<long double>(p));
  long double pos = -1;
  std::int64_t count = 0;
  for (;;) {
    const long double u = 1.0L - rng.uniform();
    pos += std::floor(std::log(u) / lq) + 1;
    if (pos >= N) return count;
    ++count;
  }
}

struct EdgeHash {
  std::size_t operator()(const std::vector<int>& e) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int v : e) h = mix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

// Every edge of composition c, enumerated community by community.
inline void enumerate_class(const std::vector<std::vector<int>>& members, const Composition& c,
                            std::vector<std::vector<int>>& out) {
  std::vector<int> cur;
  auto rec = [&](auto&& self, std::size_t comm, int start, int left) -> void {
    if (comm == c.size()) {
      out.push_back(cur);
      return;
    }
    if (left == 0) {
      self(self, comm + 1, 0, comm + 1 < c.size() ? c[comm + 1] : 0);
      return;
    }
    const auto& mem = members[comm];
    for (int i = start; i + left <= static_cast<int>(mem.size()); ++i) {
      cur.push_back(mem[i]);
      self(self, comm, i + 1, left - 1);
      cur.pop_back();
    }
  };
  if (c.empty()) return;
  rec(rec, 0, 0, c[0]);
}

}  // namespace detail

inline HsbmSample sample_hsbm(const SampleConfig& cfg) {
  const ModelParams& p = cfg.params;
  validate_pi(p.pi);
  const std::int64_t n = cfg.n;
  if (n < p.q_max() || n > std::numeric_limits<int>::max())
    fail(Errc::InvalidInput, "n must be at least the largest hyperedge size");
  const int r = p.r;
  auto sizes = community_sizes(p.pi, n);
  std::vector<int> labels;
  labels.reserve(n);
  for (int i = 0; i < r; ++i) labels.insert(labels.end(), sizes[i], i);
  if (cfg.label_mode == LabelMode::Shuffled) {
    Rng rl = Rng::stream(cfg.seed, "labels");
    for (std::int64_t i = n - 1; i > 0; --i) std::swap(labels[i], labels[rl.below(static_cast<std::uint64_t>(i + 1))]);
  }
  std::vector<std::vector<int>> members(r);
  for (int x = 0; x < static_cast<int>(n); ++x) members[labels[x]].push_back(x);

  struct Class {
    int layer;
    std::size_t index;
    Composition comp;
    double prob;
  };
  std::vector<Class> classes;
  for (int k = 0; k < p.K(); ++k) {
    const int q = p.layers[k].q;
    const double denom = binomial(n, q - 1);
    auto comps = compositions(r, q);
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      const double pe = p.layers[k].tensor.at(comps[ci]);
      if (pe == 0) continue;
      bool feasible = true;
      for (int i = 0; i < r; ++i) feasible = feasible && sizes[i] >= comps[ci][i];
      if (!feasible) continue;
      const double prob = pe / denom;
      if (prob > 1) fail(Errc::ProbabilityOverflow, "inclusion probability exceeds 1; increase n");
      classes.push_back({k, ci, comps[ci], prob});
    }
  }

  std::vector<std::vector<int>> class_edges(classes.size());
  parallel_chunks(classes.size(), [&](std::size_t c) {
    const Class& cl = classes[c];
    Rng rng = Rng::stream(cfg.seed, "hsbm", static_cast<std::uint64_t>(cl.layer), cl.index);
    unsigned __int128 exact = 0;
    long double N;
    if (detail::exact_candidates(sizes, cl.comp, exact)) {
      N = static_cast<long double>(exact);
    } else {
      N = 1;
      for (int i = 0; i < r; ++i) N *= binomial(sizes[i], cl.comp[i]);
    }
    const std::int64_t count = detail::binomial_count(rng, N, cl.prob);
    if (count == 0) return;
    auto& out = class_edges[c];
    const int q = p.layers[cl.layer].q;
    out.reserve(static_cast<std::size_t>(count) * q);
    if (N <= 2.0e6L && static_cast<long double>(count) * 4 > N) {
      // Dense class: choose a uniform subset of the enumerated candidates.
      std::vector<std::vector<int>> all;
      detail::enumerate_class(members, cl.comp, all);
      for (std::int64_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.below(all.size() - i);
        std::swap(all[i], all[j]);
        out.insert(out.end(), all[i].begin(), all[i].end());
      }
      return;
    }
    std::unordered_set<std::vector<int>, detail::EdgeHash> seen;
    seen.reserve(static_cast<std::size_t>(count) * 2);
    std::vector<int> e(q);
    while (static_cast<std::int64_t>(seen.size()) < count) {
      int pos = 0;
      for (int i = 0; i < r; ++i) {
        const auto& mem = members[i];
        const int start = pos;
        while (pos - start < cl.comp[i]) {
          const int v = mem[rng.below(mem.size())];
          if (std::find(e.begin() + start, e.begin() + pos, v) == e.begin() + pos) e[pos++] = v;
        }
      }
      std::sort(e.begin(), e.end());
      if (seen.insert(e).second) out.insert(out.end(), e.begin(), e.end());
    }
  });

  std::vector<std::vector<int>> flat(p.K());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto& dst = flat[classes[c].layer];
    dst.insert(dst.end(), class_edges[c].begin(), class_edges[c].end());
  }
  std::vector<int> qs;
  for (auto& L : p.layers) qs.push_back(L.q);
  HsbmSample s;
  s.graph = LayeredHypergraph::from_flat(static_cast<int>(n), qs, std::move(flat));
  s.labels = Assignment(std::move(labels), r);
  return s;
}

// Offspring law of the Galton-Watson hypertree: per layer, Poisson(d_k)
// hyperedges, each with q_k - 1 children whose type composition given the
// parent type a has probability multinomial(c) pi^c p(c + e_a) / d_k.
struct GwLaw {
  struct Layer {
    int q = 2;
    double d = 0;
    double w = 1;
    std::vector<Composition> comps;
    std::vector<std::vector<double>> cdf;  // [parent type][composition]
  };
  int r = 1;
  std::vector<Layer> layers;

  explicit GwLaw(const ModelParams& p) : r(p.r) {
    for (int k = 0; k < p.K(); ++k) {
      const auto& L = p.layers[k];
      Layer out;
      out.q = L.q;
      out.d = L.d;
      out.w = p.weights(k);
      out.comps = compositions(p.r, L.q - 1);
      out.cdf.assign(p.r, std::vector<double>(out.comps.size(), 0.0));
      for (int a = 0; a < p.r; ++a) {
        double acc = 0;
        for (std::size_t c = 0; c < out.comps.size(); ++c) {
          Composition full = out.comps[c];
          ++full[a];
          if (L.d > 0) acc += multinomial(out.comps[c]) * pi_power(p.pi, out.comps[c]) * L.tensor.at(full) / L.d;
          out.cdf[a][c] = acc;
        }
        // Assumption 1 makes acc = 1 up to rounding; pin the last bin.
        if (!out.comps.empty() && acc > 0) out.cdf[a].back() = std::max(acc, 1.0);
      }
      layers.push_back(std::move(out));
    }
  }

  std::size_t draw_composition(Rng& rng, int layer, int parent) const {
    const auto& cdf = layers[layer].cdf[parent];
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }
};

struct TreeNode {
  int type = 0;
  int depth = 0;
  int parent_edge = -1;  // -1 for the root
};

struct TreeEdge {
  int layer = 0;
  int parent = 0;
  int first_child = 0;
  int num_children = 0;
};

struct HyperTree {
  int root_type = 0;
  int depth = 0;  // truncation depth
  std::vector<TreeNode> nodes;
  std::vector<TreeEdge> edges;
  Vec layer_weights;
};

inline HyperTree sample_gw_tree(const ModelParams& p, int root_type, int depth, std::uint64_t seed,
                                std::size_t cap = 10'000'000) {
  if (depth < 0) fail(Errc::InvalidInput, "depth must be non-negative");
  if (root_type < 0 || root_type >= p.r) fail(Errc::IndexOutOfRange, "root type out of range");
  GwLaw law(p);
  Rng rng = Rng::stream(seed, "gw-tree", static_cast<std::uint64_t>(root_type));
  std::vector<std::poisson_distribution<int>> pois;
  for (auto& L : law.layers) pois.emplace_back(L.d > 0 ? L.d : 1.0);
  HyperTree t;
  t.root_type = root_type;
  t.depth = depth;
  t.layer_weights = p.weights;
  t.nodes.push_back({root_type, 0, -1});
  std::vector<int> kids;
  for (std::size_t head = 0; head < t.nodes.size(); ++head) {
    if (t.nodes[head].depth >= depth) break;  // BFS order: the rest are deeper
    const int type = t.nodes[head].type;
    const int dep = t.nodes[head].depth;
    for (int k = 0; k < static_cast<int>(law.layers.size()); ++k) {
      const auto& L = law.layers[k];
      if (L.d <= 0) continue;
      const int m = pois[k](rng);
      for (int e = 0; e < m; ++e) {
        const auto& c = L.comps[law.draw_composition(rng, k, type)];
        kids.clear();
        for (int a = 0; a < p.r; ++a) kids.insert(kids.end(), c[a], a);
        for (int i = static_cast<int>(kids.size()) - 1; i > 0; --i)
          std::swap(kids[i], kids[rng.below(static_cast<std::uint64_t>(i + 1))]);
        TreeEdge te{k, static_cast<int>(head), static_cast<int>(t.nodes.size()), static_cast<int>(kids.size())};
        const int eid = static_cast<int>(t.edges.size());
        t.edges.push_back(te);
        for (int a : kids) t.nodes.push_back({a, dep + 1, eid});
        if (t.nodes.size() > cap) fail(Errc::PopulationCap, "Galton-Watson tree exceeded the node cap");
      }
    }
  }
  return t;
}

}  // namespace hypernb

#endif
