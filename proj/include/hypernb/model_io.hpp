#ifndef HYPERNB_MODEL_IO_HPP
#define HYPERNB_MODEL_IO_HPP

// JSON model configuration:
//   {"r": 2, "pi": [0.5, 0.5], "weights": [0.5, 0.25],
//    "layers": [{"q": 2, "tensor": {"2,0": 3, "1,1": 1, "0,2": 3}},
//               {"q": 4, "two_param": {"a": 11, "b": 3}}]}

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "model.hpp"

namespace hypernb {

using json = nlohmann::json;

inline std::string composition_key(const Composition& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c[i]);
  }
  return s;
}

inline Composition parse_composition(const std::string& s) {
  Composition c;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      c.push_back(v);
    } catch (const std::exception&) {
      fail(Errc::InvalidInput, "bad composition key '" + s + "'");
    }
  }
  return c;
}

inline json model_to_json(const ModelParams& p) {
  json j;
  j["r"] = p.r;
  j["pi"] = std::vector<double>(p.pi.data(), p.pi.data() + p.pi.size());
  j["weights"] = std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size());
  json layers = json::array();
  for (auto& L : p.layers) {
    json l;
    l["q"] = L.q;
    if (L.two_param) {
      l["two_param"] = {{"a", L.two_param->first}, {"b", L.two_param->second}};
    } else {
      json t = json::object();
      for (auto& [c, v] : L.tensor.entries) t[composition_key(c)] = v;
      l["tensor"] = t;
    }
    layers.push_back(l);
  }
  j["layers"] = layers;
  return j;
}

inline ModelParams model_from_json(const json& j) {
  try {
    const int r = j.at("r").get<int>();
    const auto piv = j.at("pi").get<std::vector<double>>();
    if (static_cast<int>(piv.size()) != r) fail(Errc::InvalidInput, "pi length differs from r");
    Vec pi = Eigen::Map<const Vec>(piv.data(), r);
    validate_pi(pi);
    std::vector<LayerParams> layers;
    for (auto& l : j.at("layers")) {
      const int q = l.at("q").get<int>();
      if (l.contains("two_param")) {
        const double a = l["two_param"].at("a").get<double>();
        const double b = l["two_param"].at("b").get<double>();
        auto L = layer_from_tensor(tensor_two_param(r, q, a, b), pi);
        L.two_param = std::make_pair(a, b);
        layers.push_back(std::move(L));
      } else {
        SymTensor t(q, r);
        for (auto& [key, v] : l.at("tensor").items()) t.set(parse_composition(key), v.get<double>());
        layers.push_back(layer_from_tensor(t, pi));
      }
    }
    std::vector<double> wv;
    if (j.contains("weights")) {
      wv = j["weights"].get<std::vector<double>>();
    } else {
      wv.assign(layers.size(), 1.0);
    }
    Vec w = Eigen::Map<const Vec>(wv.data(), static_cast<Eigen::Index>(wv.size()));
    return make_model(pi, std::move(layers), w);
  } catch (const json::exception& e) {
    fail(Errc::InvalidInput, std::string("model config: ") + e.what());
  }
}

inline ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidInput, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::InvalidInput, path + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::InvalidInput, "cannot write " + path);
  out << model_to_json(p).dump(2) << '\n';
}

// A layer given by (q, d, mu2), balanced over r communities.
struct LayerSpec {
  int q;
  double d;
  double mu;
};

inline ModelParams balanced_model(int r, const std::vector<LayerSpec>& specs, const Vec& w) {
  Vec pi = Vec::Constant(r, 1.0 / r);
  std::vector<LayerParams> layers;
  for (auto& s : specs) {
    auto [a, b] = two_param_from_spectrum(r, s.q, s.d, s.mu);
    auto L = layer_from_tensor(tensor_two_param(r, s.q, a, b), pi);
    L.two_param = std::make_pair(a, b);
    layers.push_back(std::move(L));
  }
  return make_model(pi, std::move(layers), w);
}

}  // namespace hypernb

#endif
