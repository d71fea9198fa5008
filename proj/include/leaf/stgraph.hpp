#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leaf/tensor.hpp"

namespace leaf {

struct SensorMeta {
  std::string id;
  std::optional<double> lat;
  std::optional<double> lon;
  std::string description;
};

// Spatial road graph: undirected, no self-edges, vertices 0..N-1.
struct RoadNetwork {
  int64_t n_vertices = 0;
  std::vector<std::pair<int64_t, int64_t>> edges;  // stored with first < second
  std::vector<SensorMeta> sensors;                 // size N (may carry empty meta)

  void add_edge(int64_t i, int64_t j);
  bool has_edge(int64_t i, int64_t j) const;
};

// The road graph unrolled over T timesteps. Node (t, i) sits at row t*N + i.
// Edges: same vertex at adjacent timesteps, plus spatial edges within each
// timestep.
struct STGraph {
  int64_t t_steps = 0;
  int64_t n_vertices = 0;
  bool self_loops = true;
  Tensor adjacency;   // TN x TN, symmetric 0/1, zero diagonal
  Tensor normalized;  // D^{-1/2} (A + S) D^{-1/2}

  int64_t n_nodes() const { return t_steps * n_vertices; }
  static int64_t flatten(int64_t t, int64_t i, int64_t n_vertices) {
    return t * n_vertices + i;
  }
  static std::pair<int64_t, int64_t> unflatten(int64_t node, int64_t n_vertices) {
    return {node / n_vertices, node % n_vertices};
  }
};

// D^{-1/2} (A + S) D^{-1/2} with S = I when self_loops, else 0. Rows whose
// degree is zero (possible only without self-loops) come out as zero rows.
Tensor normalize_adjacency(const Tensor& a, bool self_loops);

STGraph build_st_graph(const RoadNetwork& network, int64_t t_steps,
                       bool self_loops = true);

}  // namespace leaf
