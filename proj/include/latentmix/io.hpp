#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentmix/bipartite.hpp"
#include "latentmix/datagen.hpp"
#include "latentmix/eval.hpp"
#include "latentmix/latentdist.hpp"
#include "latentmix/mixoracle.hpp"
#include "latentmix/model.hpp"
#include "latentmix/structlearn.hpp"

namespace latentmix {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model JSON: n, m, d, dims, gamma (row-major 0/1), lambda (edge list),
// joint (flattened row-major), obs_law (per-variable list of {mean, cov}).
// ---------------------------------------------------------------------------

inline json model_to_json(const LatentCausalModel& model) {
  json j;
  j["n"] = model.n();
  j["m"] = model.m();
  j["d"] = model.obs_dim;
  j["dims"] = model.dims.dims;
  j["gamma"] = model.gamma.adj;
  json edges = json::array();
  for (const auto& [a, b] : model.lambda.edges) edges.push_back({a, b});
  j["lambda"] = edges;
  j["joint"] = model.joint.entries;
  json law = json::array();
  for (const auto& comps : model.obs_law) {
    json per_var = json::array();
    for (const auto& c : comps) {
      json comp;
      comp["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
      std::vector<std::vector<double>> cov(c.cov.rows(), std::vector<double>(c.cov.cols()));
      for (int r = 0; r < c.cov.rows(); ++r)
        for (int cc = 0; cc < c.cov.cols(); ++cc) cov[r][cc] = c.cov(r, cc);
      comp["cov"] = cov;
      per_var.push_back(comp);
    }
    law.push_back(per_var);
  }
  j["obs_law"] = law;
  return j;
}

inline LatentCausalModel model_from_json(const json& j) {
  LatentCausalModel model;
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  model.obs_dim = j.at("d").get<int>();
  model.dims.dims = j.at("dims").get<std::vector<int>>();
  model.gamma = BipartiteGraph(n, m);
  model.gamma.adj = j.at("gamma").get<std::vector<uint8_t>>();
  if (model.gamma.adj.size() != static_cast<size_t>(n) * m)
    throw IoError("model json: gamma has wrong size");
  model.lambda.m = m;
  for (const auto& e : j.at("lambda"))
    model.lambda.edges.insert({e.at(0).get<int>(), e.at(1).get<int>()});
  model.joint.dims = model.dims;
  model.joint.entries = j.at("joint").get<std::vector<double>>();
  model.joint.validate();
  for (const auto& per_var : j.at("obs_law")) {
    std::vector<GaussianComponent> comps;
    for (const auto& cj : per_var) {
      GaussianComponent c;
      const auto mean = cj.at("mean").get<std::vector<double>>();
      c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
      const auto cov = cj.at("cov").get<std::vector<std::vector<double>>>();
      c.cov.resize(cov.size(), cov.size());
      for (size_t r = 0; r < cov.size(); ++r)
        for (size_t cc = 0; cc < cov[r].size(); ++cc) c.cov(r, cc) = cov[r][cc];
      comps.push_back(std::move(c));
    }
    model.obs_law.push_back(std::move(comps));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Samples CSV: header x0_0,...,x{n-1}_{d-1}; labels in a sibling file.
// ---------------------------------------------------------------------------

inline void write_samples_csv(const SampleSet& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (int i = 0; i < samples.n; ++i)
    for (int c = 0; c < samples.d; ++c)
      out << (i + c ? "," : "") << "x" << i << "_" << c;
  out << "\n";
  char buf[32];
  for (int64_t r = 0; r < samples.data.rows(); ++r) {
    for (int64_t c = 0; c < samples.data.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", samples.data(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

inline void write_labels_csv(const SampleSet& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "label\n";
  for (int64_t lab : samples.truth_labels) out << lab << "\n";
}

inline SampleSet read_samples_csv(const std::string& path, int n, int d) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("samples csv is empty: " + path);
  std::vector<std::vector<double>> rows;
  const int64_t cols = static_cast<int64_t>(n) * d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("samples csv: cannot parse value '" + cell + "'");
      }
    }
    if (static_cast<int64_t>(row.size()) != cols)
      throw IoError("samples csv: row has " + std::to_string(row.size()) + " columns, expected " +
                    std::to_string(cols));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("samples csv has no data rows: " + path);
  SampleSet out;
  out.n = n;
  out.d = d;
  out.data.resize(rows.size(), cols);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int64_t c = 0; c < cols; ++c) out.data(r, c) = rows[r][c];
  return out;
}

// ---------------------------------------------------------------------------
// Stage artifacts
// ---------------------------------------------------------------------------

inline json ktable_to_json(const KTable& table) {
  json j;
  j["n"] = table.n;
  json entries = json::array();
  std::vector<std::pair<uint64_t, int64_t>> ordered(table.counts.begin(), table.counts.end());
  std::sort(ordered.begin(), ordered.end());
  for (const auto& [mask, k] : ordered)
    entries.push_back({{"s", mask_to_indices(mask)}, {"k", k}});
  j["subsets"] = entries;
  return j;
}

inline KTable ktable_from_json(const json& j) {
  KTable table;
  table.n = j.at("n").get<int>();
  for (const auto& e : j.at("subsets"))
    table.counts[indices_to_mask(e.at("s").get<std::vector<int>>())] = e.at("k").get<int64_t>();
  return table;
}

inline json kestimate_to_json(const KEstimate& est) {
  json j;
  j["subset"] = est.subset;
  json cands = json::array();
  for (const auto& [k, sil] : est.candidates) cands.push_back({{"k", k}, {"silhouette", sil}});
  j["candidates"] = cands;
  j["chosen_k"] = est.chosen_k;
  json votes = json::object();
  for (const auto& [k, v] : est.votes) votes[std::to_string(k)] = v;
  j["votes"] = votes;
  j["low_confidence"] = est.low_confidence;
  return j;
}

inline json bipartite_to_json(const RecoveredBipartite& rb) {
  json j;
  j["n"] = rb.gamma.n;
  j["m"] = rb.gamma.m;
  j["gamma"] = rb.gamma.adj;
  j["dims"] = rb.dims.dims;
  std::vector<double> raw(rb.raw_columns.data(), rb.raw_columns.data() + rb.raw_columns.size());
  j["raw_columns"] = raw;  // column-major n*m
  j["raw_weights"] = std::vector<double>(rb.raw_weights.data(),
                                         rb.raw_weights.data() + rb.raw_weights.size());
  j["method"] = rb.method;
  j["residual_rel"] = rb.residual_rel;
  return j;
}

inline RecoveredBipartite bipartite_from_json(const json& j) {
  RecoveredBipartite rb;
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  rb.gamma = BipartiteGraph(n, m);
  rb.gamma.adj = j.at("gamma").get<std::vector<uint8_t>>();
  rb.dims.dims = j.at("dims").get<std::vector<int>>();
  const auto raw = j.at("raw_columns").get<std::vector<double>>();
  rb.raw_columns = Eigen::Map<const Eigen::MatrixXd>(raw.data(), n, m);
  const auto w = j.at("raw_weights").get<std::vector<double>>();
  rb.raw_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
  rb.method = j.at("method").get<std::string>();
  rb.residual_rel = j.at("residual_rel").get<double>();
  return rb;
}

inline json joint_to_json(const JointProbTable& joint, const Correspondence& corr) {
  json j;
  j["dims"] = joint.dims.dims;
  j["entries"] = joint.entries;
  j["component_of_state"] = corr.component_of_state;
  return j;
}

inline std::pair<JointProbTable, Correspondence> joint_from_json(const json& j) {
  JointProbTable joint;
  joint.dims.dims = j.at("dims").get<std::vector<int>>();
  joint.entries = j.at("entries").get<std::vector<double>>();
  Correspondence corr;
  corr.dims = joint.dims;
  corr.component_of_state = j.at("component_of_state").get<std::vector<int>>();
  corr.state_of_component.assign(corr.component_of_state.size(), {});
  for (size_t s = 0; s < corr.component_of_state.size(); ++s)
    corr.state_of_component[corr.component_of_state[s]] =
        unflatten_index(static_cast<int64_t>(s), joint.dims.dims);
  return {joint, corr};
}

inline json cpdag_to_json(const Cpdag& g) {
  json j;
  j["m"] = g.m;
  json dir = json::array();
  for (const auto& [a, b] : g.directed) dir.push_back({a, b});
  json und = json::array();
  for (const auto& [a, b] : g.undirected) und.push_back({a, b});
  j["directed"] = dir;
  j["undirected"] = und;
  j["dot"] = to_dot(g);
  return j;
}

inline Cpdag cpdag_from_json(const json& j) {
  Cpdag g;
  g.m = j.at("m").get<int>();
  for (const auto& e : j.at("directed")) g.directed.insert({e.at(0).get<int>(), e.at(1).get<int>()});
  for (const auto& e : j.at("undirected"))
    g.undirected.insert({e.at(0).get<int>(), e.at(1).get<int>()});
  return g;
}

// Flat binary dump of M3: int64 n then n^3 doubles, row-major.
inline void write_m3_binary(const SymmetricTensor3& t3, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int64_t n = t3.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(t3.e.data()),
            static_cast<std::streamsize>(t3.e.size() * sizeof(double)));
}

inline SymmetricTensor3 read_m3_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  int64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  SymmetricTensor3 t3(static_cast<int>(n));
  in.read(reinterpret_cast<char*>(t3.e.data()),
          static_cast<std::streamsize>(t3.e.size() * sizeof(double)));
  if (!in) throw IoError("m3 binary truncated: " + path);
  return t3;
}

// ---------------------------------------------------------------------------
// Trial results CSV
// ---------------------------------------------------------------------------

inline std::string trial_csv_header() {
  return "seed,m,n,N,shd,uce,gamma_exact,dims_exact,joint_tv,method,"
         "t_oracle,t_bipartite,t_latent,t_struct,failure_stage";
}

inline std::string trial_csv_row(const TrialResult& r) {
  std::ostringstream out;
  out << r.seed << ',' << r.m << ',' << r.n << ',' << r.N << ',' << r.shd << ',' << r.uce << ','
      << (r.gamma_exact ? 1 : 0) << ',' << (r.dims_exact ? 1 : 0) << ',';
  if (std::isnan(r.joint_tv))
    out << "nan";
  else
    out << r.joint_tv;
  out << ',' << r.method << ',' << r.t_oracle << ',' << r.t_bipartite << ',' << r.t_latent << ','
      << r.t_struct << ',' << r.failure_stage;
  return out.str();
}

inline json trial_to_json(const TrialResult& r) {
  json j;
  j["seed"] = r.seed;
  j["m"] = r.m;
  j["n"] = r.n;
  j["N"] = r.N;
  j["shd"] = r.shd;
  j["uce"] = r.uce;
  j["gamma_exact"] = r.gamma_exact;
  j["dims_exact"] = r.dims_exact;
  j["joint_tv"] = r.joint_tv;
  j["method"] = r.method;
  j["t_oracle"] = r.t_oracle;
  j["t_bipartite"] = r.t_bipartite;
  j["t_latent"] = r.t_latent;
  j["t_struct"] = r.t_struct;
  j["failure_stage"] = r.failure_stage;
  return j;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  return j;
}

inline bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

}  // namespace latentmix
