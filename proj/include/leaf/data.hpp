#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leaf/stgraph.hpp"
#include "leaf/tensor.hpp"

namespace leaf {

// Flow records at a fixed 5-minute cadence plus the road network they came
// from. Immutable after construction.
struct Dataset {
  Tensor flows;                     // T_total x N x F, vehicles per 5-minute bin
  std::vector<int64_t> timestamps;  // unix seconds, strictly increasing, 300 s apart
  RoadNetwork network;

  int64_t t_total() const { return flows.dim(0); }
  int64_t n_vertices() const { return flows.dim(1); }
  int64_t n_features() const { return flows.dim(2); }
  double flow(int64_t t, int64_t i, int64_t f = 0) const {
    return flows[(t * n_vertices() + i) * n_features() + f];
  }
};

struct SplitSpec {
  double train_fraction = 0.10;
  double val_fraction = 0.10;
};

// Contiguous chronological ranges: [0, train_end) / [train_end, val_end) /
// [val_end, t_total).
struct SplitRanges {
  int64_t train_end = 0;
  int64_t val_end = 0;
  int64_t t_total = 0;
};

SplitRanges split_ranges(int64_t t_total, const SplitSpec& spec);

// Per-channel z-score statistics, computed on the training range only.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;  // guarded: max(std, 1e-6)
};

NormStats compute_norm_stats(const Dataset& ds, int64_t train_end);
Tensor normalize(const Tensor& t, const NormStats& stats);    // last dim = channel
Tensor denormalize(const Tensor& t, const NormStats& stats);
double normalize_flow(double v, const NormStats& stats);      // channel 0
double denormalize_flow(double v, const NormStats& stats);

// One forecasting instance: T input steps (all channels, original units) and
// T_out target steps (flow channel).
struct Window {
  Tensor input;   // T x N x F
  Tensor target;  // T_out x N
  int64_t start = 0;
};

// Windows whose full [start, start+T+T_out) span lies inside [begin, end).
std::vector<Window> make_windows(const Dataset& ds, int64_t t_in, int64_t t_out,
                                 int64_t stride, int64_t begin, int64_t end);

// Multiplicative distortion applied to the tail of a synthetic dataset.
// factor(t) = scale * (1 + trend * progress) for t past start_fraction,
// with progress running 0 -> 1 across the shifted range.
struct ShiftSpec {
  double scale = 1.0;
  double trend = 0.0;
  double start_fraction = 0.20;
};

// Ring-road network with two daily rush-hour bumps per vertex, vertex phase
// offsets, and seeded noise. Deterministic for a fixed seed.
Dataset synth_generate(int64_t n_vertices, int64_t days, const ShiftSpec& shift,
                       uint64_t seed);

Dataset load_dataset(const std::string& flow_path,
                     const std::string& adjacency_path,
                     const std::string& meta_path);

void write_dataset(const Dataset& ds, const std::string& flow_path,
                   const std::string& adjacency_path,
                   const std::string& meta_path);

// "YYYY-MM-DDTHH:MM:SS" (UTC) <-> unix seconds.
int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(int64_t unix_seconds);
std::string format_human_time(int64_t unix_seconds);  // "YYYY-MM-DD HH:MM"

}  // namespace leaf
