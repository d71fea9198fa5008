#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaf/choices.hpp"
#include "leaf/data.hpp"
#include "leaf/optim.hpp"
#include "leaf/predictor.hpp"
#include "leaf/selector.hpp"

namespace leaf {

struct AdaptConfig {
  int iterations = 2;                 // K: predict-select-adapt rounds
  int grad_steps = 5;                 // M: optimizer steps per round
  double epsilon = 0.0;               // hinge margin
  double delta = 1.0;                 // Huber delta for the distance measure
  double lr = 1e-4;
  bool persist_across_windows = true; // keep adapted weights between windows

  std::vector<std::string> validate() const;
};

// Hinge ranking loss for one vertex and one branch, computed in normalized
// space: [ Delta(y, selected) - min_{c in others} Delta(y, c) + eps ]_+ .
// Gradients flow only through y_branch_row; the choices are constants.
Tape::Id ranking_loss(Tape& tape, Tape::Id y_branch_row, const Choice& selected,
                      std::span<const Choice> others, const NormStats& stats,
                      const AdaptConfig& cfg);

struct VertexAudit {
  int64_t vertex = 0;
  int iteration = 0;            // 1-based
  std::vector<int> labels;      // labels available in the choice set
  int chosen = 0;               // 0 = fallback
  bool fallback = false;
  int attempts = 0;
  std::optional<double> loss_graph;  // first-step ranking losses (when M > 0)
  std::optional<double> loss_hyper;
};

struct WindowResult {
  Tensor forecast;  // N x T_out, original flow units
  std::vector<VertexAudit> audits;
  bool rolled_back = false;
  int64_t fallbacks = 0;
  int64_t selector_attempts = 0;
};

struct BranchesEnabled {
  bool graph = true;
  bool hyper = true;
};

// Drives the per-window predict -> select -> adapt loop. Owns the adaptation
// optimizer; when persist_across_windows is off, weights and optimizer state
// reset to the pretrained snapshot at the start of every window.
class AdaptRunner {
 public:
  AdaptRunner(PredictorParams& params, const BranchConfig& cfg, const STGraph& st,
              const NormStats& stats, const AdaptConfig& acfg,
              BranchesEnabled enabled, std::vector<TransformKind> transforms);

  // contexts: one per vertex, used by prompt-driven selectors. The window's
  // target is attached to requests for the oracle.
  WindowResult run_window(const Window& window, Selector& selector,
                          std::span<const PromptContext> contexts);

 private:
  struct IterationState {
    std::vector<ChoiceSet> choice_sets;
    std::vector<SelectionResult> selections;
  };

  IterationState predict_and_select(const Window& window, Selector& selector,
                                    std::span<const PromptContext> contexts);
  void adapt_steps(const Window& window, IterationState& state,
                   std::span<VertexAudit> audits);

  PredictorParams& params_;
  const BranchConfig& cfg_;
  const STGraph& st_;
  const NormStats& stats_;
  AdaptConfig acfg_;
  BranchesEnabled enabled_;
  std::vector<TransformKind> transforms_;
  Adam optimizer_;
  std::vector<Tensor> pretrained_values_;
};

}  // namespace leaf
