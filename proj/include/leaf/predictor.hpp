#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leaf/autodiff.hpp"
#include "leaf/data.hpp"
#include "leaf/stgraph.hpp"

namespace leaf {

struct BranchConfig {
  int64_t hidden = 64;      // d
  int64_t layers = 7;       // L
  int64_t hyperedges = 8;   // m
  int64_t t_in = 12;        // T
  int64_t t_out = 12;       // T'
  int64_t features = 1;     // F
  bool self_loops = true;
  bool residual = false;

  std::vector<std::string> validate() const;  // all violations, empty when ok
};

// Two-layer MLP head: N x (T*d) -> N x d -> N x T_out.
struct HeadParams {
  Parameter w1, b1, w2, b2;
};

struct GraphBranchParams {
  Parameter embed;                        // d x F
  std::vector<Parameter> layer_weights;   // L matrices, d x d
  HeadParams head;
  std::vector<Parameter*> parameters();
};

struct HypergraphBranchParams {
  Parameter embed;                            // d x F
  std::vector<Parameter> incidence_weights;   // L matrices, d x m
  std::vector<Parameter> edge_weights;        // L matrices, m x m
  HeadParams head;
  std::vector<Parameter*> parameters();
};

// All learnable weights of both branches. The branches share nothing.
struct PredictorParams {
  GraphBranchParams graph;
  HypergraphBranchParams hyper;

  static PredictorParams init(const BranchConfig& cfg, uint64_t seed);
  std::vector<Parameter*> parameters();
  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& snapshot);
};

// Linear embedding of the flattened window: row t*N+i of the result is
// embed applied to X[t,i,:].
Tape::Id embed_inputs(Tape& tape, Tape::Id x_flat, Parameter& embed);

// L graph-convolution layers over the normalized ST adjacency, then the MLP
// head over each vertex's gathered timestep features.
Tape::Id graph_branch_forward(Tape& tape, Tape::Id hidden, const STGraph& st,
                              GraphBranchParams& params, const BranchConfig& cfg);

// One hypergraph layer; returns (new hidden, incidence matrix).
std::pair<Tape::Id, Tape::Id> hypergraph_layer(Tape& tape, Tape::Id hidden,
                                               Parameter& w_incidence,
                                               Parameter& w_edges,
                                               const BranchConfig& cfg);

Tape::Id hypergraph_branch_forward(Tape& tape, Tape::Id hidden,
                                   HypergraphBranchParams& params,
                                   const BranchConfig& cfg);

enum class BranchKind { Graph, Hypergraph };

// Untaped convenience forward: normalized window in, normalized N x T_out out.
Tensor forecast(BranchKind kind, const Tensor& window_norm, const STGraph& st,
                PredictorParams& params, const BranchConfig& cfg);

// Taped forward from a normalized window (T x N x F).
Tape::Id forecast_taped(Tape& tape, BranchKind kind, const Tensor& window_norm,
                        const STGraph& st, PredictorParams& params,
                        const BranchConfig& cfg);

struct PretrainConfig {
  int batch_size = 16;
  int max_epochs = 300;
  int patience = 30;  // epochs without val-MAE improvement before stopping
  double lr = 1e-3;
  double huber_delta = 1.0;
  int val_stride = 1;  // evaluate every k-th validation window
};

struct EpochLog {
  int epoch;
  double train_loss;  // mean Huber over windows, normalized space
  double val_mae;     // original flow units
};

struct PretrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_mae = 0.0;
};

// Trains one branch by Huber regression on normalized targets; restores the
// weights from the best validation epoch before returning.
PretrainResult pretrain_branch(BranchKind kind, PredictorParams& params,
                               const STGraph& st, std::span<const Window> train,
                               std::span<const Window> val,
                               const NormStats& stats, const BranchConfig& cfg,
                               const PretrainConfig& pcfg, uint64_t seed);

}  // namespace leaf
