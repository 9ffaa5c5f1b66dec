#ifndef HYPERNB_PIPELINE_HPP
#define HYPERNB_PIPELINE_HPP

// End to end: sample, reduced operator, outliers, rounding, overlap.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "operators.hpp"
#include "sampler.hpp"
#include "spectral.hpp"

namespace hypernb {

struct PipelineConfig {
  ModelParams model;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::Blocks;
  int k = 0;  // 0: max(6, 2r + 2)
  double tol = 1e-8;
  double delta_bulk = 0.05;
};

struct PipelineReport {
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  SpectralConstants theory;
  double vartheta_plugin = 0;
  SpectralSummary spectrum;
  std::vector<double> outlier_values;
  bool chose_second = false;
  double alignment = 0;
  double overlap_sign = 0;
  double overlap_alg1 = 0;
  double threshold = 0;
  std::vector<std::string> warnings;
  std::size_t edges = 0;
};

inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  PipelineReport rep;
  rep.n = cfg.n;
  rep.seed = cfg.seed;
  rep.theory = weighted_signal(cfg.model);
  const auto& th = rep.theory;
  if (cfg.n < 4 * cfg.model.q_max()) rep.warnings.push_back("degenerate: n is too small for the spectral regime");

  HsbmSample smp = sample_hsbm({cfg.model, cfg.n, cfg.seed, cfg.label_mode});
  const auto& g = smp.graph;
  rep.edges = g.total_edges();
  const Vec& w = cfg.model.weights;
  rep.vartheta_plugin = vartheta_plugin(g, w);

  ReducedNB R(g, w);
  EigOptions opt;
  opt.k = cfg.k > 0 ? cfg.k : std::max(6, 2 * cfg.model.r + 2);
  opt.k = static_cast<int>(std::min<Eigen::Index>(opt.k, R.size()));
  opt.tol = cfg.tol;
  opt.seed = cfg.seed;
  const EigResult eig = compute_spectrum(R, opt);
  rep.spectrum = detect_outliers(g, w, eig, th.vartheta, &th, cfg.delta_bulk);
  rep.spectrum.seed = cfg.seed;
  // Bulk values at the edge converge slowly; only flag what can change the
  // classification.
  const double cut = (1 + cfg.delta_bulk) * rep.spectrum.sqrt_vartheta;
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    const bool is_out = std::find(rep.spectrum.outliers.begin(), rep.spectrum.outliers.end(), static_cast<int>(i)) !=
                        rep.spectrum.outliers.end();
    if (eig.residuals[i] <= cfg.tol) continue;
    if (is_out || std::abs(eig.values[i]) + eig.residuals[i] > cut) {
      rep.warnings.push_back("eigensolver did not resolve a value near the outlier cut");
      break;
    }
  }
  for (int i : rep.spectrum.outliers) rep.outlier_values.push_back(eig.values[i].real());
  if (static_cast<int>(rep.spectrum.outliers.size()) != th.r0)
    rep.warnings.push_back("outlier count differs from the number of eigenvalues above the threshold");

  const auto& ys = rep.spectrum.y_vectors;
  if (ys.empty()) {
    rep.warnings.push_back("no outliers: clustering skipped");
    return rep;
  }
  const Vec& y1 = ys[0];
  const Vec& y2 = ys.size() > 1 ? ys[1] : ys[0];
  if (ys.size() < 2) rep.warnings.push_back("single outlier: the informative vector is the Perron one");
  Selection sel = select_informative(y1, y2);
  rep.chose_second = sel.chose_second;
  rep.alignment = sel.alignment;
  rep.overlap_sign = overlap(smp.labels, round_sign(sel.u, cfg.seed), cfg.model.r);
  const int gi = sel.chose_second && th.r0 > 1 ? 1 : 0;
  rep.threshold = default_threshold(cfg.model.r, th.gamma(gi));
  rep.overlap_alg1 = overlap(smp.labels, round_randomized(sel.u, rep.threshold, cfg.seed), cfg.model.r);
  return rep;
}

inline json cplx_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json spectrum_json(const SpectralSummary& s, bool emit_vectors) {
  json j;
  json ritz = json::array();
  for (std::size_t i = 0; i < s.ritz.size(); ++i) {
    bool out = std::find(s.outliers.begin(), s.outliers.end(), static_cast<int>(i)) != s.outliers.end();
    ritz.push_back({{"re", s.ritz[i].value.real()},
                    {"im", s.ritz[i].value.imag()},
                    {"residual", s.ritz[i].residual},
                    {"outlier", out}});
  }
  j["ritz"] = ritz;
  j["outliers"] = s.outliers;
  j["matched_mu"] = s.matched_mu;
  j["sqrt_vartheta"] = s.sqrt_vartheta;
  j["delta_bulk"] = s.delta_bulk;
  j["bulk_radius_est"] = s.bulk_radius_est;
  j["unresolved"] = s.unresolved;
  j["restarts"] = s.restarts;
  j["matvecs"] = s.matvecs;
  j["converged"] = s.converged;
  j["seed"] = s.seed;
  if (emit_vectors) {
    json ys = json::array();
    for (auto& y : s.y_vectors) ys.push_back(vec_json(y));
    j["y_vectors"] = ys;
  }
  return j;
}

inline json pipeline_json(const PipelineReport& r) {
  json j;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["edges"] = r.edges;
  j["theory"] = {{"mu", vec_json(r.theory.mu)},
                 {"tau", vec_json(r.theory.tau)},
                 {"gamma", vec_json(r.theory.gamma)},
                 {"vartheta", r.theory.vartheta},
                 {"r0", r.theory.r0}};
  j["vartheta_plugin"] = r.vartheta_plugin;
  j["spectrum"] = spectrum_json(r.spectrum, false);
  j["observed_lambda"] = r.outlier_values;
  j["chose_second"] = r.chose_second;
  j["alignment"] = r.alignment;
  j["overlap_sign"] = r.overlap_sign;
  j["overlap_alg1"] = r.overlap_alg1;
  j["threshold"] = r.threshold;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace hypernb

#endif
