#include "leaf/stgraph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leaf {

void RoadNetwork::add_edge(int64_t i, int64_t j) {
  if (i == j) throw std::invalid_argument("RoadNetwork: self-edges are not allowed");
  if (i < 0 || j < 0 || i >= n_vertices || j >= n_vertices)
    throw std::invalid_argument("RoadNetwork: vertex index out of range");
  auto e = std::minmax(i, j);
  std::pair<int64_t, int64_t> edge{e.first, e.second};
  if (!has_edge(edge.first, edge.second)) edges.push_back(edge);
}

bool RoadNetwork::has_edge(int64_t i, int64_t j) const {
  auto e = std::minmax(i, j);
  return std::find(edges.begin(), edges.end(),
                   std::make_pair(e.first, e.second)) != edges.end();
}

Tensor normalize_adjacency(const Tensor& a, bool self_loops) {
  if (a.rank() != 2 || a.rows() != a.cols())
    throw std::invalid_argument("normalize_adjacency: square matrix required");
  const int64_t n = a.rows();
  Tensor work = a;
  if (self_loops)
    for (int64_t i = 0; i < n; ++i) work.at(i, i) += 1.0;

  std::vector<double> dinv_sqrt(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      if (work.at(i, j) < 0.0)
        throw std::invalid_argument("normalize_adjacency: negative entry");
      deg += work.at(i, j);
    }
    dinv_sqrt[static_cast<size_t>(i)] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }

  Tensor out({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      out.at(i, j) = dinv_sqrt[static_cast<size_t>(i)] * work.at(i, j) *
                     dinv_sqrt[static_cast<size_t>(j)];
  return out;
}

STGraph build_st_graph(const RoadNetwork& network, int64_t t_steps,
                       bool self_loops) {
  if (t_steps < 1) throw std::invalid_argument("build_st_graph: T must be >= 1");
  if (network.n_vertices < 1)
    throw std::invalid_argument("build_st_graph: N must be >= 1");

  STGraph st;
  st.t_steps = t_steps;
  st.n_vertices = network.n_vertices;
  st.self_loops = self_loops;
  const int64_t tn = st.n_nodes();
  st.adjacency = Tensor({tn, tn});

  auto connect = [&](int64_t u, int64_t v) {
    st.adjacency.at(u, v) = 1.0;
    st.adjacency.at(v, u) = 1.0;
  };

  const int64_t n = network.n_vertices;
  for (int64_t t = 0; t < t_steps; ++t) {
    // spatial edges within the timestep
    for (const auto& [i, j] : network.edges)
      connect(STGraph::flatten(t, i, n), STGraph::flatten(t, j, n));
    // temporal edge to the same vertex at the next timestep
    if (t + 1 < t_steps)
      for (int64_t i = 0; i < n; ++i)
        connect(STGraph::flatten(t, i, n), STGraph::flatten(t + 1, i, n));
  }

  st.normalized = normalize_adjacency(st.adjacency, self_loops);
  return st;
}

}  // namespace leaf
