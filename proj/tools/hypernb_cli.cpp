// hypernb: sample / spectrum / cluster / weights / verify / tree / pipeline.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypernb/hypernb.hpp"

namespace fs = std::filesystem;
using namespace hypernb;

namespace {

constexpr const char* kVersion = "hypernb 0.1.0";

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  bool strict = false;
  std::string out_dir;
};

struct Run {
  std::string subcommand;
  json config = json::object();
  std::vector<std::string> outputs;
  std::vector<std::string> streams;
  std::vector<std::string> warnings;
};

std::string resolve(const Globals& g, const std::string& path) {
  if (path.empty() || g.out_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(g.out_dir) / path).string();
}

void write_text(Run& run, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::InvalidInput, "cannot write " + path);
  out << text;
  run.outputs.push_back(path);
}

void write_json(Run& run, const std::string& path, const json& j) { write_text(run, path, j.dump(2) + "\n"); }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Vec weights_or_ones(const std::vector<double>& w, const LayeredHypergraph& g) {
  if (w.empty()) return Vec::Ones(g.K());
  return to_vec(w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted non-backtracking spectral clustering for non-uniform hypergraph block models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  Globals G;
  app.add_option("--seed", G.seed, "root seed for every random stream");
  app.add_option("--threads", G.threads, "worker threads (default: HYPERNB_THREADS, then hardware)");
  app.add_flag("--strict", G.strict, "treat regime warnings as errors (exit 3)");
  app.add_option("--out-dir", G.out_dir, "directory for relative output paths and the run manifest");

  Run run;

  // sample
  std::string s_config, s_out, s_labels;
  std::int64_t s_n = 0;
  bool s_shuffle = false;
  auto* sample = app.add_subcommand("sample", "draw a layered hypergraph from a model file");
  sample->add_option("--config", s_config)->required();
  sample->add_option("--n", s_n)->required();
  sample->add_option("--out", s_out)->required();
  sample->add_option("--labels-out", s_labels);
  sample->add_flag("--shuffle", s_shuffle, "random label placement instead of contiguous blocks");

  // spectrum
  std::string sp_in, sp_out, sp_csv, sp_config;
  std::vector<double> sp_w;
  int sp_k = 6;
  double sp_tol = 1e-8, sp_delta = 0.05;
  bool sp_vectors = false;
  auto* spectrum = app.add_subcommand("spectrum", "top Ritz values of the reduced matrix and outliers");
  spectrum->add_option("--in", sp_in)->required();
  spectrum->add_option("--weights", sp_w)->delimiter(',');
  spectrum->add_option("--k", sp_k);
  spectrum->add_option("--tol", sp_tol);
  spectrum->add_option("--delta", sp_delta, "relative bulk margin");
  spectrum->add_option("--config", sp_config, "model file: use its vartheta and match eigenvalues");
  spectrum->add_option("--out", sp_out);
  spectrum->add_option("--csv", sp_csv, "write (re, im) pairs");
  spectrum->add_flag("--emit-vectors", sp_vectors);

  // cluster
  std::string c_in, c_mode = "sign", c_labels, c_out, c_config;
  std::vector<double> c_w;
  double c_threshold = 0;
  int c_k = 6;
  auto* cluster = app.add_subcommand("cluster", "two-community reconstruction from the top aggregated vectors");
  cluster->add_option("--in", c_in)->required();
  cluster->add_option("--weights", c_w)->delimiter(',');
  cluster->add_option("--mode", c_mode)->check(CLI::IsMember({"alg1", "sign"}));
  cluster->add_option("--labels", c_labels, "ground truth for the overlap");
  cluster->add_option("--out", c_out)->required();
  cluster->add_option("--threshold", c_threshold, "rounding threshold for alg1");
  cluster->add_option("--config", c_config, "model file: vartheta and the default threshold");
  cluster->add_option("--k", c_k);

  // weights
  std::string w_config, w_method = "numeric", w_out;
  int w_restarts = 32;
  auto* weights = app.add_subcommand("weights", "layer weights maximizing the signal-to-noise ratio");
  weights->add_option("--config", w_config)->required();
  weights->add_option("--method", w_method)->check(CLI::IsMember({"unit", "r2", "numeric"}));
  weights->add_option("--restarts", w_restarts);
  weights->add_option("--out", w_out);

  // verify
  std::string v_check, v_in, v_out;
  std::vector<double> v_w;
  auto* verify = app.add_subcommand("verify", "exact algebraic identities on a small instance");
  verify->add_option("--check", v_check)
      ->required()
      ->check(CLI::IsMember({"ihara-bass", "parity-time", "eig-relation", "j-spectrum"}));
  verify->add_option("--in", v_in)->required();
  verify->add_option("--weights", v_w)->delimiter(',');
  verify->add_option("--out", v_out);

  // tree
  std::string t_config, t_out;
  std::vector<int> t_eig{1, 1};
  int t_depth = 4;
  long t_samples = 100000;
  auto* tree = app.add_subcommand("tree", "Monte Carlo check of Galton-Watson tree functionals");
  tree->add_option("--config", t_config)->required();
  tree->add_option("--eig", t_eig, "1-based eigen indices i,j")->delimiter(',')->expected(2);
  tree->add_option("--depth", t_depth);
  tree->add_option("--samples", t_samples);
  tree->add_option("--out", t_out);

  // pipeline
  std::string p_config, p_out;
  std::int64_t p_n = 0;
  int p_k = 0;
  bool p_shuffle = false;
  auto* pipeline = app.add_subcommand("pipeline", "sample, spectrum, clustering and overlap in one run");
  pipeline->add_option("--config", p_config)->required();
  pipeline->add_option("--n", p_n)->required();
  pipeline->add_option("--k", p_k);
  pipeline->add_option("--out", p_out);
  pipeline->add_flag("--shuffle", p_shuffle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int regime = 0;
  try {
    if (G.threads > 0) set_num_threads(G.threads);
    run.subcommand = app.get_subcommands().front()->get_name();

    if (*sample) {
      ModelParams p = load_model(s_config);
      if (s_n < 1) fail(Errc::InvalidInput, "n must be positive");
      run.config = {{"model", model_to_json(p)}, {"n", s_n}, {"shuffle", s_shuffle}};
      run.streams = {"hsbm", "labels"};
      HsbmSample smp = sample_hsbm({p, s_n, G.seed, s_shuffle ? LabelMode::Shuffled : LabelMode::Blocks});
      std::ostringstream gs;
      write_hypergraph(gs, smp.graph);
      write_text(run, resolve(G, s_out), gs.str());
      if (!s_labels.empty()) {
        std::ostringstream ls;
        write_assignment(ls, smp.labels);
        write_text(run, resolve(G, s_labels), ls.str());
      }
    } else if (*spectrum) {
      LayeredHypergraph g = load_hypergraph(sp_in);
      const Vec w = weights_or_ones(sp_w, g);
      std::optional<ModelParams> p;
      std::optional<SpectralConstants> c;
      if (!sp_config.empty()) {
        p = load_model(sp_config);
        p->weights = w;
        c = weighted_signal(*p);
      }
      run.config = {{"in", sp_in}, {"weights", sp_w}, {"k", sp_k}, {"tol", sp_tol}, {"delta", sp_delta}};
      run.streams = {"arnoldi-start"};
      ReducedNB R(g, w);
      EigOptions opt;
      opt.k = static_cast<int>(std::min<Eigen::Index>(sp_k, R.size()));
      opt.tol = sp_tol;
      opt.seed = G.seed;
      const EigResult eig = compute_spectrum(R, opt);
      const double vt = c ? c->vartheta : vartheta_plugin(g, w);
      SpectralSummary s = detect_outliers(g, w, eig, vt, c ? &*c : nullptr, sp_delta);
      s.seed = G.seed;
      json j = spectrum_json(s, sp_vectors);
      j["vartheta_source"] = c ? "model" : "plugin";
      write_json(run, resolve(G, sp_out), j);
      if (!sp_csv.empty()) {
        std::ostringstream cs;
        cs.precision(17);
        cs << "re,im\n";
        for (auto& z : eig.values) cs << z.real() << "," << z.imag() << "\n";
        write_text(run, resolve(G, sp_csv), cs.str());
      }
    } else if (*cluster) {
      LayeredHypergraph g = load_hypergraph(c_in);
      const Vec w = weights_or_ones(c_w, g);
      std::optional<SpectralConstants> c;
      if (!c_config.empty()) {
        ModelParams p = load_model(c_config);
        p.weights = w;
        c = weighted_signal(p);
      }
      run.config = {{"in", c_in}, {"weights", c_w}, {"mode", c_mode}, {"threshold", c_threshold}, {"k", c_k}};
      run.streams = {"arnoldi-start", c_mode == "alg1" ? "round" : "sign-tie"};
      ReducedNB R(g, w);
      EigOptions opt;
      opt.k = static_cast<int>(std::min<Eigen::Index>(c_k, R.size()));
      opt.seed = G.seed;
      const EigResult eig = compute_spectrum(R, opt);
      const double vt = c ? c->vartheta : vartheta_plugin(g, w);
      SpectralSummary s = detect_outliers(g, w, eig, vt, c ? &*c : nullptr);
      if (s.y_vectors.empty()) fail(Errc::DegenerateModel, "no outlier eigenvalue: nothing to cluster");
      if (s.y_vectors.size() < 2) run.warnings.push_back("single outlier: the informative vector is the Perron one");
      const Vec& y1 = s.y_vectors[0];
      const Vec& y2 = s.y_vectors.size() > 1 ? s.y_vectors[1] : s.y_vectors[0];
      Selection sel = select_informative(y1, y2);
      Assignment est({}, 2);
      if (c_mode == "sign") {
        est = round_sign(sel.u, G.seed);
      } else {
        double T = c_threshold;
        if (!(T > 0)) {
          if (!c) fail(Errc::InvalidThreshold, "alg1 needs --threshold or --config");
          const int gi = sel.chose_second && c->r0 > 1 ? 1 : 0;
          T = default_threshold(2, c->gamma(gi));
        }
        est = round_randomized(sel.u, T, G.seed);
      }
      std::ostringstream ls;
      write_assignment(ls, est);
      write_text(run, resolve(G, c_out), ls.str());
      if (!c_labels.empty()) {
        Assignment truth = load_assignment(c_labels);
        std::cout << "overlap " << overlap(truth, est, std::max(2, truth.r)) << "\n";
      }
    } else if (*weights) {
      ModelParams p = load_model(w_config);
      run.config = {{"model", model_to_json(p)}, {"method", w_method}, {"restarts", w_restarts}};
      run.streams = {"weights-start"};
      WeightResult r;
      if (w_method == "unit") {
        r = weights_unit(p);
      } else if (w_method == "r2") {
        r = weights_optimal_r2(p);
      } else {
        r = weights_numeric(p, w_restarts, 1e-9, G.seed);
      }
      json j = {{"w", vec_json(r.w)},       {"achieved_snr", r.achieved_snr}, {"above_ks", r.above_ks},
                {"tie", r.tie},             {"no_improvement", r.no_improvement},
                {"baseline_snr", r.baseline_snr}, {"best_restart", r.best_restart}};
      write_json(run, resolve(G, w_out), j);
      if (r.no_improvement) run.warnings.push_back("no weighting beats the unit weights");
    } else if (*verify) {
      LayeredHypergraph g = load_hypergraph(v_in);
      const Vec w = weights_or_ones(v_w, g);
      run.config = {{"check", v_check}, {"in", v_in}, {"weights", v_w}};
      json j = {{"check", v_check}};
      bool ok = true;
      if (v_check == "ihara-bass") {
        run.streams = {"verify-lambda"};
        Rng rng = Rng::stream(G.seed, "verify-lambda");
        json cases = json::array();
        for (int t = 0; t < 5; ++t) {
          const double re = 4 * rng.uniform() - 2, im = t % 2 ? 4 * rng.uniform() - 2 : 0.0;
          const auto rep = ihara_bass_verify(g, w, cplx(re, im));
          cases.push_back({{"lambda", cplx_json(cplx(re, im))},
                           {"logabs_rel_diff", rep.logabs_rel_diff},
                           {"phase_diff", rep.phase_diff},
                           {"agree", rep.agree}});
          ok = ok && rep.agree;
        }
        j["cases"] = cases;
      } else if (v_check == "parity-time") {
        run.streams = {"parity-time-probe"};
        json cases = json::array();
        for (int k = 0; k <= 6; ++k) {
          const auto r = parity_time_residual(g, w, k, G.seed);
          cases.push_back({{"k", k}, {"residual", r.residual}, {"bound", r.bound}, {"dense", r.dense}});
          ok = ok && r.residual <= r.bound;
        }
        j["cases"] = cases;
      } else if (v_check == "eig-relation") {
        const auto r = eig_relation_check(g, w);
        j["checked"] = r.checked;
        j["skipped_near_pole"] = r.skipped_near_pole;
        j["max_reduced_residual"] = r.max_reduced_residual;
        j["max_hessian_residual"] = r.max_hessian_residual;
        ok = r.pass;
      } else {
        const auto counts = j_spectrum_counts(g);
        json mult = json::object();
        for (auto& [val, m] : counts) mult[std::to_string(val)] = m;
        j["multiplicities"] = mult;
        // Dense cross-check when small.
        NonBacktracking B(g, w);
        if (B.size() > 0 && B.size() <= 2000) {
          Eigen::MatrixXd J(B.size(), B.size());
          for (Eigen::Index c = 0; c < B.size(); ++c) J.col(c) = reversal_apply(B, Vec(Vec::Unit(B.size(), c)));
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
          std::map<int, long> dense;
          for (double ev : es.eigenvalues()) ++dense[static_cast<int>(std::lround(ev))];
          ok = dense == counts;
          j["dense_agrees"] = ok;
        }
      }
      j["pass"] = ok;
      write_json(run, resolve(G, v_out), j);
      if (!ok) {
        std::cerr << "error: identity check failed\n";
        regime = 2;
      }
    } else if (*tree) {
      ModelParams p = load_model(t_config);
      const SpectralConstants c = weighted_signal(p);
      run.config = {{"model", model_to_json(p)}, {"eig", t_eig}, {"depth", t_depth}, {"samples", t_samples}};
      run.streams = {"gw-functional"};
      const auto rep = martingale_check(p, c, t_eig[0] - 1, t_eig[1] - 1, t_depth, t_samples, G.seed);
      auto stats = [](const std::vector<StatLine>& v) {
        json a = json::array();
        for (auto& s : v) a.push_back({{"mean", s.mean}, {"se", s.se}, {"target", s.target}, {"pass", s.pass}});
        return a;
      };
      json roots = json::array();
      for (auto& rr : rep.roots)
        roots.push_back({{"root_type", rr.root_type},
                         {"z_i", stats(rr.z_i)},
                         {"z_j", stats(rr.z_j)},
                         {"step_i", stats(rr.step_i)},
                         {"step_j", stats(rr.step_j)},
                         {"cross", stats(rr.cross)},
                         {"second_i", stats(rr.second_i)},
                         {"increment", stats(rr.increment)},
                         {"var_i", rr.var_i},
                         {"var_i_theory", rr.var_i_theory}});
      json j = {{"i", t_eig[0]}, {"j", t_eig[1]},   {"depth", rep.t_max},       {"samples", rep.M},
                {"mu_i", rep.mu_i}, {"mu_j", rep.mu_j}, {"roots", roots}, {"all_pass", rep.all_pass}};
      write_json(run, resolve(G, t_out), j);
      if (!rep.all_pass) run.warnings.push_back("a tree statistic fell outside 4 standard errors");
    } else if (*pipeline) {
      PipelineConfig cfg;
      cfg.model = load_model(p_config);
      cfg.n = p_n;
      cfg.seed = G.seed;
      cfg.k = p_k;
      cfg.label_mode = p_shuffle ? LabelMode::Shuffled : LabelMode::Blocks;
      if (p_n < cfg.model.q_max()) fail(Errc::InvalidInput, "n must be at least the largest edge size");
      run.config = {{"model", model_to_json(cfg.model)}, {"n", p_n}, {"k", p_k}, {"shuffle", p_shuffle}};
      run.streams = {"hsbm", "labels", "arnoldi-start", "round", "sign-tie"};
      const PipelineReport rep = run_pipeline(cfg);
      run.warnings.insert(run.warnings.end(), rep.warnings.begin(), rep.warnings.end());
      write_json(run, resolve(G, p_out), pipeline_json(rep));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return errc_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  for (auto& wmsg : run.warnings) std::cerr << "warning: " << wmsg << "\n";
  if (G.strict && !run.warnings.empty() && regime == 0) regime = 3;

  if (!G.out_dir.empty()) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json m = {{"subcommand", run.subcommand},
              {"config", run.config},
              {"seed", G.seed},
              {"version", kVersion},
              {"threads", num_threads()},
              {"wall_time_s", wall},
              {"outputs", run.outputs},
              {"streams", run.streams},
              {"warnings", run.warnings}};
    fs::create_directories(G.out_dir);
    std::ofstream(fs::path(G.out_dir) / (run.subcommand + "_manifest.json")) << m.dump(2) << "\n";
  }
  return regime;
}
