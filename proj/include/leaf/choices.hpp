#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace leaf {

enum class TransformKind {
  Smoothing,
  UpwardTrend,
  DownwardTrend,
  Overestimate,
  Underestimate,
  Identity,
};

enum class BranchSource { GraphBranch, HypergraphBranch };

// One candidate forecast for one vertex, in original flow units.
struct Choice {
  int label = 0;  // 1-based position in the choice set
  BranchSource source = BranchSource::GraphBranch;
  TransformKind transform = TransformKind::Identity;
  std::vector<double> values;  // T_out, clamped at 0
};

struct ChoiceSet {
  int64_t vertex = 0;
  std::vector<Choice> choices;
};

// The five non-identity transformations, in fixed label order.
const std::vector<TransformKind>& default_transforms();

std::string transform_name(TransformKind kind);
std::string source_name(BranchSource source);
// e.g. "graph branch + upward trend"; identity renders as just the branch.
std::string choice_provenance(const Choice& c);

// Smoothing: centered window-3 moving average with edge replication.
// Up/down trend: +-1% per timestep, linearly increasing (1%..T_out%).
// Over/under estimate: +-5% flat. Identity: unchanged. Results clamp at 0.
std::vector<double> apply_transform(std::span<const double> y, TransformKind kind);

// [yG, yH] ++ [t(yG) for t in transforms] ++ [t(yH) ...], labels 1..k.
// Duplicates are kept so labels map back to (source, transform).
ChoiceSet build_choice_set(std::span<const double> y_graph,
                           std::span<const double> y_hyper, int64_t vertex,
                           std::span<const TransformKind> transforms);

// Single-branch variant used when the other branch is disabled.
ChoiceSet build_choice_set_single(BranchSource source, std::span<const double> y,
                                  int64_t vertex,
                                  std::span<const TransformKind> transforms);

}  // namespace leaf
