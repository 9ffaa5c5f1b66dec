#ifndef HYPERNB_HYPERGRAPH_HPP
#define HYPERNB_HYPERGRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Sparse>

#include "error.hpp"

namespace hypernb {

using SpMat = Eigen::SparseMatrix<double>;

// Vertices 0..n-1 and K layers; layer k holds q_k-uniform hyperedges stored
// flat, each edge sorted, edges sorted lexicographically.
class LayeredHypergraph {
 public:
  LayeredHypergraph() = default;

  // edges[k] is a list of vertex tuples for layer k, in any order.
  LayeredHypergraph(int n, std::vector<int> q_sizes, const std::vector<std::vector<std::vector<int>>>& edges)
      : n_(n), q_(std::move(q_sizes)) {
    if (n < 0) fail(Errc::InvalidInput, "negative vertex count");
    if (edges.size() != q_.size()) fail(Errc::DimensionMismatch, "one edge list per layer required");
    flat_.resize(q_.size());
    for (std::size_t k = 0; k < q_.size(); ++k) {
      std::vector<int> flat;
      flat.reserve(edges[k].size() * q_[k]);
      for (auto e : edges[k]) {
        if (static_cast<int>(e.size()) != q_[k]) fail(Errc::InvalidInput, "hyperedge size differs from layer q");
        for (int v : e) flat.push_back(v);
      }
      set_layer(k, std::move(flat));
    }
  }

  // Takes ownership of flat edge storage per layer and canonicalizes it.
  static LayeredHypergraph from_flat(int n, std::vector<int> q_sizes, std::vector<std::vector<int>> flat) {
    LayeredHypergraph g;
    g.n_ = n;
    g.q_ = std::move(q_sizes);
    if (flat.size() != g.q_.size()) fail(Errc::DimensionMismatch, "one edge list per layer required");
    g.flat_.resize(g.q_.size());
    for (std::size_t k = 0; k < g.q_.size(); ++k) g.set_layer(k, std::move(flat[k]));
    return g;
  }

  int n() const { return n_; }
  int K() const { return static_cast<int>(q_.size()); }
  int q(int k) const { return q_[k]; }
  const std::vector<int>& q_sizes() const { return q_; }
  std::size_t num_edges(int k) const { return q_[k] == 0 ? 0 : flat_[k].size() / q_[k]; }
  std::span<const int> edge(int k, std::size_t e) const {
    return {flat_[k].data() + e * q_[k], static_cast<std::size_t>(q_[k])};
  }
  const std::vector<int>& layer_flat(int k) const { return flat_[k]; }
  std::size_t total_edges() const {
    std::size_t s = 0;
    for (int k = 0; k < K(); ++k) s += num_edges(k);
    return s;
  }
  std::size_t num_oriented() const {
    std::size_t s = 0;
    for (int k = 0; k < K(); ++k) s += flat_[k].size();
    return s;
  }

  bool operator==(const LayeredHypergraph& o) const { return n_ == o.n_ && q_ == o.q_ && flat_ == o.flat_; }

 private:
  void set_layer(std::size_t k, std::vector<int> flat) {
    const int q = q_[k];
    if (q < 2) fail(Errc::InvalidInput, "hyperedge size must be at least 2");
    if (flat.size() % q) fail(Errc::InvalidInput, "flat edge list not a multiple of q");
    const std::size_t m = flat.size() / q;
    for (std::size_t e = 0; e < m; ++e) {
      int* b = flat.data() + e * q;
      std::sort(b, b + q);
      for (int j = 0; j < q; ++j) {
        if (b[j] < 0 || b[j] >= n_) fail(Errc::InvalidInput, "vertex id out of range");
        if (j && b[j] == b[j - 1]) fail(Errc::InvalidInput, "repeated vertex inside a hyperedge");
      }
    }
    std::vector<std::size_t> order(m);
    for (std::size_t e = 0; e < m; ++e) order[e] = e;
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(flat.begin() + a * q, flat.begin() + (a + 1) * q, flat.begin() + b * q,
                                          flat.begin() + (b + 1) * q);
    };
    if (!std::is_sorted(order.begin(), order.end(), less)) std::sort(order.begin(), order.end(), less);
    std::vector<int> out(flat.size());
    for (std::size_t e = 0; e < m; ++e) {
      std::copy(flat.begin() + order[e] * q, flat.begin() + (order[e] + 1) * q, out.begin() + e * q);
      if (e && std::equal(out.begin() + e * q, out.begin() + (e + 1) * q, out.begin() + (e - 1) * q))
        fail(Errc::InvalidInput, "duplicate hyperedge within a layer");
    }
    flat_[k] = std::move(out);
  }

  int n_ = 0;
  std::vector<int> q_;
  std::vector<std::vector<int>> flat_;
};

struct Assignment {
  std::vector<int> labels;
  int r = 0;

  Assignment() = default;
  Assignment(std::vector<int> l, int r_) : labels(std::move(l)), r(r_) {
    for (int v : labels)
      if (v < 0 || v >= r) fail(Errc::InvalidInput, "label out of range");
  }
  std::size_t size() const { return labels.size(); }
  int operator[](std::size_t i) const { return labels[i]; }
};

// Oriented hyperedges (x -> e). Ids run layer by layer, edge by edge, and by
// position of x inside the sorted edge: id = offset_k + e*q_k + j.
class OrientedIndex {
 public:
  explicit OrientedIndex(const LayeredHypergraph& g) : g_(&g) {
    const int K = g.K();
    offset_.resize(K + 1, 0);
    for (int k = 0; k < K; ++k) offset_[k + 1] = offset_[k] + g.layer_flat(k).size();
    const std::size_t m = offset_[K];
    vertex_.resize(m);
    layer_.resize(m);
    std::vector<std::size_t> deg(g.n() + 1, 0);
    for (int k = 0; k < K; ++k) {
      auto& fl = g.layer_flat(k);
      for (std::size_t i = 0; i < fl.size(); ++i) {
        vertex_[offset_[k] + i] = fl[i];
        layer_[offset_[k] + i] = k;
        ++deg[fl[i] + 1];
      }
    }
    for (int v = 0; v < g.n(); ++v) deg[v + 1] += deg[v];
    inc_start_ = deg;
    inc_.resize(m);
    std::vector<std::size_t> pos(deg.begin(), deg.end() - 1);
    for (std::size_t id = 0; id < m; ++id) inc_[pos[vertex_[id]]++] = id;
  }

  std::size_t size() const { return vertex_.size(); }
  int vertex(std::size_t id) const { return vertex_[id]; }
  int layer(std::size_t id) const { return layer_[id]; }
  std::size_t edge(std::size_t id) const { return (id - offset_[layer_[id]]) / g_->q(layer_[id]); }
  std::size_t offset(int k) const { return offset_[k]; }
  // First id of the block belonging to edge e of layer k.
  std::size_t edge_base(int k, std::size_t e) const { return offset_[k] + e * g_->q(k); }
  std::span<const std::size_t> incident(int v) const {
    return {inc_.data() + inc_start_[v], inc_start_[v + 1] - inc_start_[v]};
  }
  const LayeredHypergraph& graph() const { return *g_; }

 private:
  const LayeredHypergraph* g_;
  std::vector<std::size_t> offset_;
  std::vector<int> vertex_;
  std::vector<int> layer_;
  std::vector<std::size_t> inc_start_;
  std::vector<std::size_t> inc_;
};

inline void check_layer(const LayeredHypergraph& g, int k) {
  if (k < 0 || k >= g.K()) fail(Errc::IndexOutOfRange, "layer index out of range");
}

// Number of layer-k hyperedges containing each vertex.
inline std::vector<int> degrees(const LayeredHypergraph& g, int k) {
  check_layer(g, k);
  std::vector<int> d(g.n(), 0);
  for (int v : g.layer_flat(k)) ++d[v];
  return d;
}

// A_k(x, y) = number of layer-k hyperedges containing both x and y.
inline SpMat adjacency(const LayeredHypergraph& g, int k) {
  check_layer(g, k);
  const int q = g.q(k);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.num_edges(k) * q * (q - 1));
  for (std::size_t e = 0; e < g.num_edges(k); ++e) {
    auto ed = g.edge(k, e);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        if (a != b) trip.emplace_back(ed[a], ed[b], 1.0);
  }
  SpMat A(g.n(), g.n());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Per-vertex list of (layer, edge) incidences.
class Incidence {
 public:
  explicit Incidence(const LayeredHypergraph& g) {
    start_.assign(g.n() + 1, 0);
    for (int k = 0; k < g.K(); ++k)
      for (int v : g.layer_flat(k)) ++start_[v + 1];
    for (int v = 0; v < g.n(); ++v) start_[v + 1] += start_[v];
    items_.resize(start_[g.n()]);
    std::vector<std::size_t> pos(start_.begin(), start_.end() - 1);
    for (int k = 0; k < g.K(); ++k)
      for (std::size_t e = 0; e < g.num_edges(k); ++e)
        for (int v : g.edge(k, e)) items_[pos[v]++] = {k, e};
  }
  struct Item {
    int layer;
    std::size_t edge;
  };
  std::span<const Item> of(int v) const { return {items_.data() + start_[v], start_[v + 1] - start_[v]}; }

 private:
  std::vector<std::size_t> start_;
  std::vector<Item> items_;
};

struct Ball {
  int center = 0;
  int radius = 0;
  std::vector<int> vertices;  // BFS order: by distance, then discovery
  std::vector<int> dist;      // parallel to vertices
  // (layer, edge) pairs whose vertices all lie in the ball, sorted.
  std::vector<std::pair<int, std::size_t>> edges;
  std::vector<std::size_t> layer_counts;
};

// (G, x)_t: the sub-hypergraph spanned by vertices at distance <= t.
inline Ball neighborhood(const LayeredHypergraph& g, const Incidence& inc, int x, int t) {
  if (x < 0 || x >= g.n()) fail(Errc::IndexOutOfRange, "vertex out of range");
  if (t < 0) fail(Errc::InvalidInput, "radius must be non-negative");
  Ball b;
  b.center = x;
  b.radius = t;
  b.layer_counts.assign(g.K(), 0);
  std::vector<int> seen_dist;
  std::unordered_set<int> in_ball;
  std::vector<std::pair<int, std::size_t>> cand;
  b.vertices.push_back(x);
  b.dist.push_back(0);
  in_ball.insert(x);
  for (std::size_t head = 0; head < b.vertices.size(); ++head) {
    const int v = b.vertices[head], dv = b.dist[head];
    for (auto& it : inc.of(v)) {
      cand.emplace_back(it.layer, it.edge);
      if (dv == t) continue;
      for (int y : g.edge(it.layer, it.edge)) {
        if (in_ball.insert(y).second) {
          b.vertices.push_back(y);
          b.dist.push_back(dv + 1);
        }
      }
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  for (auto& [k, e] : cand) {
    bool inside = true;
    for (int y : g.edge(k, e))
      if (!in_ball.count(y)) {
        inside = false;
        break;
      }
    if (inside) {
      b.edges.emplace_back(k, e);
      ++b.layer_counts[k];
    }
  }
  return b;
}

inline Ball neighborhood(const LayeredHypergraph& g, int x, int t) { return neighborhood(g, Incidence(g), x, t); }

// Excess of the vertex/hyperedge factor graph of a ball: incidences minus
// nodes plus one (the ball is connected).
inline long ball_excess(const LayeredHypergraph& g, const Ball& b) {
  long incid = 0;
  for (auto& [k, e] : b.edges) incid += g.q(k);
  const long nodes = static_cast<long>(b.vertices.size() + b.edges.size());
  return incid - nodes + 1;
}

struct TangleReport {
  std::vector<bool> per_vertex;
  bool all = true;
};

inline TangleReport is_tangle_free(const LayeredHypergraph& g, int ell) {
  if (ell < 1) fail(Errc::InvalidInput, "radius must be at least 1");
  Incidence inc(g);
  TangleReport rep;
  rep.per_vertex.assign(g.n(), true);
  for (int x = 0; x < g.n(); ++x) {
    const bool ok = ball_excess(g, neighborhood(g, inc, x, ell)) <= 1;
    rep.per_vertex[x] = ok;
    rep.all = rep.all && ok;
  }
  return rep;
}

// Text format: header "n K q_1 ... q_K", then "k v_1 ... v_q" per edge.
inline void write_hypergraph(std::ostream& out, const LayeredHypergraph& g) {
  out << g.n() << ' ' << g.K();
  for (int q : g.q_sizes()) out << ' ' << q;
  out << '\n';
  for (int k = 0; k < g.K(); ++k)
    for (std::size_t e = 0; e < g.num_edges(k); ++e) {
      out << k;
      for (int v : g.edge(k, e)) out << ' ' << v;
      out << '\n';
    }
}

inline LayeredHypergraph read_hypergraph(std::istream& in) {
  int n = 0, K = 0;
  if (!(in >> n >> K) || n < 0 || K < 0) fail(Errc::InvalidInput, "bad hypergraph header");
  std::vector<int> qs(K);
  for (auto& q : qs)
    if (!(in >> q) || q < 2) fail(Errc::InvalidInput, "bad layer size in header");
  std::vector<std::vector<int>> flat(K);
  int k;
  while (in >> k) {
    if (k < 0 || k >= K) fail(Errc::InvalidInput, "layer index out of range");
    for (int j = 0; j < qs[k]; ++j) {
      int v;
      if (!(in >> v)) fail(Errc::InvalidInput, "truncated hyperedge line");
      flat[k].push_back(v);
    }
  }
  if (!in.eof()) fail(Errc::InvalidInput, "trailing garbage in hypergraph file");
  return LayeredHypergraph::from_flat(n, std::move(qs), std::move(flat));
}

inline void save_hypergraph(const LayeredHypergraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::InvalidInput, "cannot write " + path);
  write_hypergraph(out, g);
}

inline LayeredHypergraph load_hypergraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidInput, "cannot open " + path);
  return read_hypergraph(in);
}

inline void write_assignment(std::ostream& out, const Assignment& a) {
  for (int l : a.labels) out << l << '\n';
}

// Labels are 0-based; r is inferred as max label + 1 unless given.
inline Assignment read_assignment(std::istream& in, int r = 0) {
  std::vector<int> labels;
  int v;
  while (in >> v) {
    if (v < 0) fail(Errc::InvalidInput, "negative label");
    labels.push_back(v);
  }
  if (!in.eof()) fail(Errc::InvalidInput, "non-integer label");
  int rr = r;
  for (int l : labels) rr = std::max(rr, l + 1);
  return Assignment(std::move(labels), rr);
}

inline void save_assignment(const Assignment& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::InvalidInput, "cannot write " + path);
  write_assignment(out, a);
}

inline Assignment load_assignment(const std::string& path, int r = 0) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidInput, "cannot open " + path);
  return read_assignment(in, r);
}

}  // namespace hypernb

#endif
