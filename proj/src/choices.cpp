#include "leaf/choices.hpp"

#include <algorithm>
#include <stdexcept>

namespace leaf {

const std::vector<TransformKind>& default_transforms() {
  static const std::vector<TransformKind> kAll{
      TransformKind::Smoothing,     TransformKind::UpwardTrend,
      TransformKind::DownwardTrend, TransformKind::Overestimate,
      TransformKind::Underestimate,
  };
  return kAll;
}

std::string transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::Smoothing: return "smoothing";
    case TransformKind::UpwardTrend: return "upward trend";
    case TransformKind::DownwardTrend: return "downward trend";
    case TransformKind::Overestimate: return "overestimate";
    case TransformKind::Underestimate: return "underestimate";
    case TransformKind::Identity: return "identity";
  }
  return "unknown";
}

std::string source_name(BranchSource source) {
  return source == BranchSource::GraphBranch ? "graph branch" : "hypergraph branch";
}

std::string choice_provenance(const Choice& c) {
  if (c.transform == TransformKind::Identity) return source_name(c.source);
  return source_name(c.source) + " + " + transform_name(c.transform);
}

std::vector<double> apply_transform(std::span<const double> y, TransformKind kind) {
  const size_t n = y.size();
  std::vector<double> out(n);
  switch (kind) {
    case TransformKind::Identity:
      std::copy(y.begin(), y.end(), out.begin());
      break;
    case TransformKind::Smoothing:
      for (size_t t = 0; t < n; ++t) {
        const double prev = y[t == 0 ? 0 : t - 1];
        const double next = y[t + 1 >= n ? n - 1 : t + 1];
        out[t] = (prev + y[t] + next) / 3.0;
      }
      break;
    // percentages as integer-scaled ratios so e.g. 100 * 109 / 100 is exact
    case TransformKind::UpwardTrend:
      for (size_t t = 0; t < n; ++t)
        out[t] = y[t] * (100.0 + static_cast<double>(t + 1)) / 100.0;
      break;
    case TransformKind::DownwardTrend:
      for (size_t t = 0; t < n; ++t)
        out[t] = y[t] * (100.0 - static_cast<double>(t + 1)) / 100.0;
      break;
    case TransformKind::Overestimate:
      for (size_t t = 0; t < n; ++t) out[t] = y[t] * 105.0 / 100.0;
      break;
    case TransformKind::Underestimate:
      for (size_t t = 0; t < n; ++t) out[t] = y[t] * 95.0 / 100.0;
      break;
  }
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

namespace {

void append_choices(ChoiceSet& cs, BranchSource source, std::span<const double> y,
                    TransformKind kind) {
  Choice c;
  c.label = static_cast<int>(cs.choices.size()) + 1;
  c.source = source;
  c.transform = kind;
  c.values = apply_transform(y, kind);
  cs.choices.push_back(std::move(c));
}

}  // namespace

ChoiceSet build_choice_set(std::span<const double> y_graph,
                           std::span<const double> y_hyper, int64_t vertex,
                           std::span<const TransformKind> transforms) {
  if (y_graph.size() != y_hyper.size())
    throw std::invalid_argument("build_choice_set: branch horizons differ");
  ChoiceSet cs;
  cs.vertex = vertex;
  append_choices(cs, BranchSource::GraphBranch, y_graph, TransformKind::Identity);
  append_choices(cs, BranchSource::HypergraphBranch, y_hyper, TransformKind::Identity);
  for (TransformKind t : transforms)
    append_choices(cs, BranchSource::GraphBranch, y_graph, t);
  for (TransformKind t : transforms)
    append_choices(cs, BranchSource::HypergraphBranch, y_hyper, t);
  return cs;
}

ChoiceSet build_choice_set_single(BranchSource source, std::span<const double> y,
                                  int64_t vertex,
                                  std::span<const TransformKind> transforms) {
  ChoiceSet cs;
  cs.vertex = vertex;
  append_choices(cs, source, y, TransformKind::Identity);
  for (TransformKind t : transforms) append_choices(cs, source, y, t);
  return cs;
}

}  // namespace leaf
