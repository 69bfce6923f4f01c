#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentmix/model.hpp"
#include "latentmix/subsets.hpp"

namespace latentmix {

// Raised when (L, Gamma, dims) are mutually inconsistent, e.g. when a
// direction group has the wrong size or a phase-3 intersection is ambiguous.
class InconsistentInput : public std::runtime_error {
 public:
  InconsistentInput(const std::string& msg, int hidden_index = -1, int64_t state_flat = -1)
      : std::runtime_error(msg), hidden(hidden_index), state(state_flat) {}
  int hidden;
  int64_t state;
};

// Bijection between hidden states and full-mixture components.
struct Correspondence {
  DomainSpec dims;
  std::vector<int> component_of_state;        // flat state index -> component
  std::vector<std::vector<int>> state_of_component;  // component -> state tuple
};

// For each hidden variable, the partition of components into groups that agree
// on every coordinate outside nbhd(H_i); each group enumerates the values of
// H_i.
struct DirectionClasses {
  std::vector<std::vector<std::vector<int>>> groups;  // [hidden][group] -> sorted members
  std::vector<std::vector<int>> group_of;             // [hidden][component] -> group index
};

inline DirectionClasses direction_classes(const ComponentMap& lmap, const BipartiteGraph& gamma,
                                          const DomainSpec& dims) {
  const int m = gamma.m;
  const int64_t K = lmap.K;
  if (dims.total() != K)
    throw InconsistentInput("direction_classes: K does not match the domain sizes");
  if (static_cast<int64_t>(lmap.rows.size()) != K)
    throw InconsistentInput("direction_classes: component map has wrong row count");

  DirectionClasses dc;
  dc.groups.resize(m);
  dc.group_of.assign(m, std::vector<int>(K, -1));

  for (int i = 0; i < m; ++i) {
    std::vector<int> outside;  // observed variables that are not children of H_i
    for (int x = 0; x < gamma.n; ++x)
      if (!gamma.edge(x, i)) outside.push_back(x);

    std::map<std::vector<int>, int> key_to_group;
    for (int64_t c = 0; c < K; ++c) {
      std::vector<int> key(outside.size());
      for (size_t t = 0; t < outside.size(); ++t) key[t] = lmap.rows[c][outside[t]];
      auto [it, inserted] = key_to_group.try_emplace(key, static_cast<int>(dc.groups[i].size()));
      if (inserted) dc.groups[i].emplace_back();
      dc.groups[i][it->second].push_back(static_cast<int>(c));
      dc.group_of[i][c] = it->second;
    }
    for (const auto& g : dc.groups[i]) {
      if (static_cast<int>(g.size()) != dims.dims[i])
        throw InconsistentInput("direction_classes: group size " + std::to_string(g.size()) +
                                    " does not match dim(H_" + std::to_string(i) + ") = " +
                                    std::to_string(dims.dims[i]),
                                i);
    }
  }
  return dc;
}

// Reconstruct the joint probability table and the state<->component
// correspondence from (L, Gamma, dims, full-mixture weights).
//
// Phase 2 anchors `anchor` at the all-zero state and labels the values along
// each direction group in ascending component-index order; phase 3 fills the
// remaining states by increasing Hamming weight, lexicographic within weight,
// intersecting the two direction groups through the two already-assigned
// neighbors of each state.
inline std::pair<JointProbTable, Correspondence> reconstruct(const ComponentMap& lmap,
                                                             const BipartiteGraph& gamma,
                                                             const DomainSpec& dims,
                                                             const std::vector<double>& weights,
                                                             int anchor = 0) {
  const int m = gamma.m;
  const int64_t K = dims.total();
  if (static_cast<int64_t>(weights.size()) != K)
    throw InconsistentInput("reconstruct: weight vector length does not match K");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InconsistentInput("reconstruct: negative mixture weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-6)
    throw InconsistentInput("reconstruct: mixture weights do not sum to 1");
  if (anchor < 0 || anchor >= K) throw InconsistentInput("reconstruct: anchor out of range");

  JointProbTable joint;
  joint.dims = dims;
  joint.entries.assign(K, 0.0);
  Correspondence corr;
  corr.dims = dims;
  corr.component_of_state.assign(K, -1);
  corr.state_of_component.assign(K, {});

  if (m == 0) {
    joint.entries = {1.0};
    corr.component_of_state = {0};
    corr.state_of_component = {{}};
    return {joint, corr};
  }

  const DirectionClasses dc = direction_classes(lmap, gamma, dims);

  std::vector<int> comp_of_state(K, -1);
  auto assign = [&](int64_t state_flat, int comp) {
    if (comp_of_state[state_flat] != -1 || !corr.state_of_component[comp].empty())
      throw InconsistentInput("reconstruct: component assigned twice", -1, state_flat);
    comp_of_state[state_flat] = comp;
    corr.state_of_component[comp] = unflatten_index(state_flat, dims.dims);
    joint.entries[state_flat] = weights[comp];
  };

  // Phase 2: anchor plus Hamming-weight-1 states along every direction group.
  assign(0, anchor);
  for (int i = 0; i < m; ++i) {
    const std::vector<int>& group = dc.groups[i][dc.group_of[i][anchor]];
    std::vector<int> h(m, 0);
    int value = 1;
    for (int comp : group) {
      if (comp == anchor) continue;
      h[i] = value++;
      assign(flatten_index(h, dims.dims), comp);
    }
  }

  // Phase 3: extend by increasing Hamming weight. Flat-index order already
  // enumerates lexicographically; bucket by weight to respect the induction.
  std::vector<std::vector<int64_t>> by_weight(m + 1);
  for (int64_t s = 0; s < K; ++s) {
    const std::vector<int> h = unflatten_index(s, dims.dims);
    int wgt = 0;
    for (int v : h) wgt += (v != 0);
    by_weight[wgt].push_back(s);
  }
  for (int wgt = 2; wgt <= m; ++wgt) {
    for (int64_t s : by_weight[wgt]) {
      const std::vector<int> h = unflatten_index(s, dims.dims);
      int i = -1, j = -1;
      for (int t = 0; t < m; ++t)
        if (h[t] != 0) {
          if (i < 0) i = t;
          j = t;
        }
      std::vector<int> hi = h, hj = h;
      hi[i] = 0;
      hj[j] = 0;
      const int comp_i = comp_of_state[flatten_index(hi, dims.dims)];
      const int comp_j = comp_of_state[flatten_index(hj, dims.dims)];
      // comp(h) lies in the direction-i class of comp(h with i zeroed) and the
      // direction-j class of comp(h with j zeroed); the intersection is unique.
      const std::vector<int>& gi = dc.groups[i][dc.group_of[i][comp_i]];
      const std::vector<int>& gj = dc.groups[j][dc.group_of[j][comp_j]];
      std::vector<int> inter;
      std::set_intersection(gi.begin(), gi.end(), gj.begin(), gj.end(), std::back_inserter(inter));
      if (inter.size() != 1)
        throw InconsistentInput("reconstruct: direction-group intersection has size " +
                                    std::to_string(inter.size()) + " at hidden variable " +
                                    std::to_string(i),
                                i, s);
      assign(s, inter[0]);
    }
  }

  corr.component_of_state = comp_of_state;
  return {joint, corr};
}

}  // namespace latentmix
