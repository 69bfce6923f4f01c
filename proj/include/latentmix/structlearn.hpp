#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "latentmix/latentdist.hpp"
#include "latentmix/model.hpp"
#include "latentmix/rng.hpp"

namespace latentmix {

struct DiscreteDataset {
  std::vector<int> dims;
  std::vector<int> rows;  // N x m row-major
  int64_t N = 0;

  int m() const { return static_cast<int>(dims.size()); }
  int at(int64_t r, int i) const { return rows[r * m() + i]; }
};

inline DiscreteDataset dataset_from_pipeline(const std::vector<int>& labels,
                                             const Correspondence& corr) {
  DiscreteDataset data;
  data.dims = corr.dims.dims;
  data.N = static_cast<int64_t>(labels.size());
  const int m = data.m();
  data.rows.resize(data.N * m);
  for (int64_t r = 0; r < data.N; ++r) {
    const std::vector<int>& state = corr.state_of_component.at(labels[r]);
    for (int i = 0; i < m; ++i) data.rows[r * m + i] = state[i];
  }
  return data;
}

inline DiscreteDataset dataset_from_table(const JointProbTable& joint, int64_t N, uint64_t seed) {
  DiscreteDataset data;
  data.dims = joint.dims.dims;
  data.N = N;
  const int m = data.m();
  data.rows.resize(N * m);
  Rng rng(seed);
  for (int64_t r = 0; r < N; ++r) {
    const std::vector<int> h = unflatten_index(rng.categorical(joint.entries), joint.dims.dims);
    for (int i = 0; i < m; ++i) data.rows[r * m + i] = h[i];
  }
  return data;
}

// Local discrete BIC term for one node given a parent set:
// sum_{c,v} N_icv ln(N_icv / N_ic) - (ln N / 2) * q_i (r_i - 1).
inline double bic_local(const DiscreteDataset& data, int node, const std::vector<int>& parents) {
  const int r = data.dims[node];
  int64_t q = 1;
  for (int p : parents) q *= data.dims[p];
  std::vector<int64_t> counts(q * r, 0);
  std::vector<int64_t> totals(q, 0);
  for (int64_t row = 0; row < data.N; ++row) {
    int64_t cfg = 0;
    for (int p : parents) cfg = cfg * data.dims[p] + data.at(row, p);
    counts[cfg * r + data.at(row, node)]++;
    totals[cfg]++;
  }
  double ll = 0.0;
  for (int64_t cfg = 0; cfg < q; ++cfg) {
    if (totals[cfg] == 0) continue;
    const double log_total = std::log(static_cast<double>(totals[cfg]));
    for (int v = 0; v < r; ++v) {
      const int64_t c = counts[cfg * r + v];
      if (c == 0) continue;
      ll += c * (std::log(static_cast<double>(c)) - log_total);
    }
  }
  return ll - 0.5 * std::log(static_cast<double>(data.N)) * q * (r - 1);
}

inline double bic_score(const DiscreteDataset& data, const LatentDag& dag) {
  double total = 0.0;
  for (int i = 0; i < dag.m; ++i) {
    std::vector<int> pa = dag.parents_of(i);
    std::sort(pa.begin(), pa.end());
    total += bic_local(data, i, pa);
  }
  return total;
}

struct Cpdag {
  int m = 0;
  std::set<std::pair<int, int>> directed;
  std::set<std::pair<int, int>> undirected;  // stored with first < second

  bool operator==(const Cpdag& other) const {
    return m == other.m && directed == other.directed && undirected == other.undirected;
  }
};

namespace detail {

inline bool adjacent(const Cpdag& g, int a, int b) {
  return g.directed.count({a, b}) || g.directed.count({b, a}) ||
         g.undirected.count({std::min(a, b), std::max(a, b)});
}

// Meek rules R1-R3, complete for the pattern of a DAG (R4 is only needed
// with background knowledge).
inline void meek_closure(Cpdag& g) {
  bool changed = true;
  auto orient = [&](int x, int y) {
    g.undirected.erase({std::min(x, y), std::max(x, y)});
    g.directed.insert({x, y});
    changed = true;
  };
  while (changed) {
    changed = false;
    std::vector<std::pair<int, int>> und(g.undirected.begin(), g.undirected.end());
    for (const auto& [a, b] : und) {
      for (int dir = 0; dir < 2; ++dir) {
        const int x = dir ? b : a;
        const int y = dir ? a : b;
        if (!g.undirected.count({std::min(x, y), std::max(x, y)})) break;
        // R1: z -> x, z and y nonadjacent  =>  x -> y
        bool fire = false;
        for (int z = 0; z < g.m && !fire; ++z)
          if (g.directed.count({z, x}) && z != y && !adjacent(g, z, y)) fire = true;
        // R2: x -> z -> y  =>  x -> y
        for (int z = 0; z < g.m && !fire; ++z)
          if (g.directed.count({x, z}) && g.directed.count({z, y})) fire = true;
        // R3: x - z, x - w, z -> y, w -> y, z and w nonadjacent  =>  x -> y
        for (int z = 0; z < g.m && !fire; ++z) {
          if (!g.undirected.count({std::min(x, z), std::max(x, z)}) || !g.directed.count({z, y}))
            continue;
          for (int w = z + 1; w < g.m && !fire; ++w)
            if (g.undirected.count({std::min(x, w), std::max(x, w)}) &&
                g.directed.count({w, y}) && !adjacent(g, z, w))
              fire = true;
        }
        if (fire) {
          orient(x, y);
          break;
        }
      }
    }
  }
}

}  // namespace detail

// Completed PDAG of the Markov equivalence class of a DAG: v-structure edges
// plus Meek-compelled edges directed, everything else undirected.
inline Cpdag dag_to_cpdag(const LatentDag& dag) {
  Cpdag g;
  g.m = dag.m;
  auto dag_adjacent = [&](int a, int b) {
    return dag.edges.count({a, b}) || dag.edges.count({b, a});
  };
  std::set<std::pair<int, int>> compelled;
  for (int j = 0; j < dag.m; ++j) {
    const std::vector<int> pa = dag.parents_of(j);
    for (size_t a = 0; a < pa.size(); ++a)
      for (size_t b = a + 1; b < pa.size(); ++b)
        if (!dag_adjacent(pa[a], pa[b])) {
          compelled.insert({pa[a], j});
          compelled.insert({pa[b], j});
        }
  }
  for (const auto& e : dag.edges) {
    if (compelled.count(e))
      g.directed.insert(e);
    else
      g.undirected.insert({std::min(e.first, e.second), std::max(e.first, e.second)});
  }
  detail::meek_closure(g);
  return g;
}

// Two-phase greedy DAG search under the decomposable BIC score: forward
// single-edge additions with the best positive gain, then backward deletions;
// the result is reported as its CPDAG. Deterministic: equal gains break
// toward the lexicographically smallest (i, j).
inline Cpdag greedy_search(const DiscreteDataset& data) {
  const int m = data.m();
  LatentDag dag;
  dag.m = m;
  if (m <= 1) return dag_to_cpdag(dag);

  std::map<std::pair<int, uint64_t>, double> cache;
  auto local = [&](int node, const std::vector<int>& parents) {
    uint64_t mask = 0;
    for (int p : parents) mask |= (uint64_t{1} << p);
    const auto key = std::make_pair(node, mask);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double val = bic_local(data, node, parents);
    cache.emplace(key, val);
    return val;
  };
  auto sorted_parents = [&](int node) {
    std::vector<int> pa = dag.parents_of(node);
    std::sort(pa.begin(), pa.end());
    return pa;
  };
  auto creates_cycle = [&](int from, int to) {
    // path to -> ... -> from?
    std::vector<int> stack = {to};
    std::vector<bool> seen(m, false);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (v == from) return true;
      if (seen[v]) continue;
      seen[v] = true;
      for (const auto& e : dag.edges)
        if (e.first == v) stack.push_back(e.second);
    }
    return false;
  };

  constexpr double kGainEps = 1e-9;

  for (;;) {  // forward
    double best_gain = kGainEps;
    std::pair<int, int> best_edge{-1, -1};
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        if (i == j || dag.edges.count({i, j}) || dag.edges.count({j, i})) continue;
        if (creates_cycle(i, j)) continue;
        std::vector<int> pa = sorted_parents(j);
        const double before = local(j, pa);
        pa.insert(std::lower_bound(pa.begin(), pa.end(), i), i);
        const double gain = local(j, pa) - before;
        if (gain > best_gain) {
          best_gain = gain;
          best_edge = {i, j};
        }
      }
    }
    if (best_edge.first < 0) break;
    dag.edges.insert(best_edge);
  }

  for (;;) {  // backward
    double best_gain = kGainEps;
    std::pair<int, int> best_edge{-1, -1};
    for (const auto& [i, j] : dag.edges) {
      std::vector<int> pa = sorted_parents(j);
      const double before = local(j, pa);
      pa.erase(std::find(pa.begin(), pa.end(), i));
      const double gain = local(j, pa) - before;
      if (gain > best_gain) {
        best_gain = gain;
        best_edge = {i, j};
      }
    }
    if (best_edge.first < 0) break;
    dag.edges.erase(best_edge);
  }

  return dag_to_cpdag(dag);
}

// Graphviz-compatible text rendering; undirected edges use dir=none.
inline std::string to_dot(const Cpdag& g, const std::string& name = "latent") {
  std::string out = "digraph " + name + " {\n";
  for (int i = 0; i < g.m; ++i) out += "  H" + std::to_string(i) + ";\n";
  for (const auto& [a, b] : g.directed)
    out += "  H" + std::to_string(a) + " -> H" + std::to_string(b) + ";\n";
  for (const auto& [a, b] : g.undirected)
    out += "  H" + std::to_string(a) + " -> H" + std::to_string(b) + " [dir=none];\n";
  out += "}\n";
  return out;
}

}  // namespace latentmix
