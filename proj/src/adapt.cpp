#include "leaf/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leaf {

std::vector<std::string> AdaptConfig::validate() const {
  std::vector<std::string> errs;
  if (iterations < 1) errs.push_back("adapt.K must be >= 1");
  if (grad_steps < 0) errs.push_back("adapt.M must be >= 0");
  if (epsilon < 0.0) errs.push_back("adapt.epsilon must be >= 0");
  if (!(delta > 0.0)) errs.push_back("adapt.delta must be > 0");
  if (!(lr > 0.0)) errs.push_back("adapt.lr must be > 0");
  return errs;
}

namespace {

Tensor normalized_choice(const std::vector<double>& values, const NormStats& stats) {
  Tensor t({1, static_cast<int64_t>(values.size())});
  for (size_t i = 0; i < values.size(); ++i)
    t[static_cast<int64_t>(i)] = normalize_flow(values[i], stats);
  return t;
}

}  // namespace

Tape::Id ranking_loss(Tape& tape, Tape::Id y_branch_row, const Choice& selected,
                      std::span<const Choice> others, const NormStats& stats,
                      const AdaptConfig& cfg) {
  if (others.empty())
    throw std::invalid_argument("ranking_loss: others must be nonempty");

  Tape::Id d_selected = tape.huber(
      y_branch_row, tape.constant(normalized_choice(selected.values, stats)),
      cfg.delta);

  // hard minimum over the unselected candidates; ties keep the first index
  Tape::Id d_min = 0;
  double d_min_value = 0.0;
  bool first = true;
  for (const Choice& other : others) {
    Tape::Id d = tape.huber(
        y_branch_row, tape.constant(normalized_choice(other.values, stats)),
        cfg.delta);
    const double v = tape.value(d)[0];
    if (first || v < d_min_value) {
      d_min = d;
      d_min_value = v;
      first = false;
    }
  }

  return tape.relu(tape.add_scalar(tape.sub(d_selected, d_min), cfg.epsilon));
}

AdaptRunner::AdaptRunner(PredictorParams& params, const BranchConfig& cfg,
                         const STGraph& st, const NormStats& stats,
                         const AdaptConfig& acfg, BranchesEnabled enabled,
                         std::vector<TransformKind> transforms)
    : params_(params),
      cfg_(cfg),
      st_(st),
      stats_(stats),
      acfg_(acfg),
      enabled_(enabled),
      transforms_(std::move(transforms)),
      optimizer_(
          [&] {
            std::vector<Parameter*> ps;
            if (enabled.graph) {
              auto g = params.graph.parameters();
              ps.insert(ps.end(), g.begin(), g.end());
            }
            if (enabled.hyper) {
              auto h = params.hyper.parameters();
              ps.insert(ps.end(), h.begin(), h.end());
            }
            return ps;
          }(),
          Adam::Config{acfg.lr, 0.9, 0.999, 1e-8}) {
  auto errs = acfg_.validate();
  if (!errs.empty()) {
    std::string msg = "invalid adapt config:";
    for (const auto& e : errs) msg += " " + e + ";";
    throw std::invalid_argument(msg);
  }
  if (!enabled_.graph && !enabled_.hyper)
    throw std::invalid_argument("AdaptRunner: at least one branch must be enabled");
  pretrained_values_ = params_.snapshot_values();
}

AdaptRunner::IterationState AdaptRunner::predict_and_select(
    const Window& window, Selector& selector,
    std::span<const PromptContext> contexts) {
  const int64_t n = st_.n_vertices;
  const Tensor window_norm = normalize(window.input, stats_);

  Tensor y_graph, y_hyper;  // N x T_out, normalized
  if (enabled_.graph)
    y_graph = forecast(BranchKind::Graph, window_norm, st_, params_, cfg_);
  if (enabled_.hyper)
    y_hyper = forecast(BranchKind::Hypergraph, window_norm, st_, params_, cfg_);

  auto denorm_row = [&](const Tensor& y, int64_t i) {
    std::vector<double> row(static_cast<size_t>(cfg_.t_out));
    for (int64_t s = 0; s < cfg_.t_out; ++s)
      row[static_cast<size_t>(s)] = denormalize_flow(y.at(i, s), stats_);
    return row;
  };

  IterationState state;
  state.choice_sets.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    if (enabled_.graph && enabled_.hyper) {
      state.choice_sets.push_back(build_choice_set(
          denorm_row(y_graph, i), denorm_row(y_hyper, i), i, transforms_));
    } else if (enabled_.graph) {
      state.choice_sets.push_back(build_choice_set_single(
          BranchSource::GraphBranch, denorm_row(y_graph, i), i, transforms_));
    } else {
      state.choice_sets.push_back(build_choice_set_single(
          BranchSource::HypergraphBranch, denorm_row(y_hyper, i), i, transforms_));
    }
  }

  std::vector<std::vector<double>> truths(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    auto& t = truths[static_cast<size_t>(i)];
    t.resize(static_cast<size_t>(cfg_.t_out));
    for (int64_t s = 0; s < cfg_.t_out; ++s)
      t[static_cast<size_t>(s)] = window.target[s * n + i];
  }

  std::vector<SelectionRequest> requests(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    auto& req = requests[static_cast<size_t>(i)];
    req.vertex = i;
    req.choices = &state.choice_sets[static_cast<size_t>(i)];
    req.context = contexts.empty() ? nullptr : &contexts[static_cast<size_t>(i)];
    req.truth = &truths[static_cast<size_t>(i)];
  }
  state.selections = selector.select(requests);
  if (state.selections.size() != static_cast<size_t>(n))
    throw std::logic_error("selector returned wrong result count");
  return state;
}

void AdaptRunner::adapt_steps(const Window& window, IterationState& state,
                              std::span<VertexAudit> audits) {
  const int64_t n = st_.n_vertices;
  const Tensor window_norm = normalize(window.input, stats_);

  // unselected candidates per vertex, fixed across the M steps
  std::vector<std::vector<Choice>> others(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const auto& sel = state.selections[static_cast<size_t>(i)];
    if (sel.fallback_used) continue;
    const auto& cs = state.choice_sets[static_cast<size_t>(i)];
    for (const Choice& c : cs.choices)
      if (c.label != sel.chosen_label) others[static_cast<size_t>(i)].push_back(c);
  }

  for (int step = 0; step < acfg_.grad_steps; ++step) {
    Tape tape;
    Tape::Id y_graph = -1, y_hyper = -1;
    if (enabled_.graph)
      y_graph = forecast_taped(tape, BranchKind::Graph, window_norm, st_, params_, cfg_);
    if (enabled_.hyper)
      y_hyper =
          forecast_taped(tape, BranchKind::Hypergraph, window_norm, st_, params_, cfg_);

    Tape::Id total = -1;
    int64_t contributing = 0;
    for (int64_t i = 0; i < n; ++i) {
      const auto& sel = state.selections[static_cast<size_t>(i)];
      if (sel.fallback_used) continue;
      const auto& cs = state.choice_sets[static_cast<size_t>(i)];
      const Choice& chosen = cs.choices[static_cast<size_t>(sel.chosen_label - 1)];
      const auto& rest = others[static_cast<size_t>(i)];
      if (rest.empty()) continue;  // nothing to rank against
      ++contributing;
      Tape::Id vertex_loss = -1;
      if (enabled_.graph) {
        Tape::Id lg = ranking_loss(tape, tape.row(y_graph, i), chosen, rest,
                                   stats_, acfg_);
        if (step == 0) audits[static_cast<size_t>(i)].loss_graph = tape.value(lg)[0];
        vertex_loss = lg;
      }
      if (enabled_.hyper) {
        Tape::Id lh = ranking_loss(tape, tape.row(y_hyper, i), chosen, rest,
                                   stats_, acfg_);
        if (step == 0) audits[static_cast<size_t>(i)].loss_hyper = tape.value(lh)[0];
        vertex_loss = vertex_loss < 0 ? lh : tape.add(vertex_loss, lh);
      }
      total = total < 0 ? vertex_loss : tape.add(total, vertex_loss);
    }
    if (total < 0 || contributing == 0) return;
    tape.backward(tape.scale(total, 1.0 / static_cast<double>(contributing)));
    optimizer_.step();
  }
}

WindowResult AdaptRunner::run_window(const Window& window, Selector& selector,
                                     std::span<const PromptContext> contexts) {
  const int64_t n = st_.n_vertices;
  if (!acfg_.persist_across_windows) {
    params_.restore_values(pretrained_values_);
    optimizer_.reset_state();
  }

  const std::vector<Tensor> rollback_values = params_.snapshot_values();
  const Adam::State rollback_opt = optimizer_.save_state();

  WindowResult result;
  auto finalize = [&](const IterationState& state) {
    result.forecast = Tensor({n, cfg_.t_out});
    for (int64_t i = 0; i < n; ++i) {
      const auto& sel = state.selections[static_cast<size_t>(i)];
      for (int64_t s = 0; s < cfg_.t_out; ++s)
        result.forecast.at(i, s) = sel.values[static_cast<size_t>(s)];
    }
  };

  try {
    for (int iteration = 1; iteration <= acfg_.iterations; ++iteration) {
      IterationState state = predict_and_select(window, selector, contexts);

      const size_t audit_base = result.audits.size();
      for (int64_t i = 0; i < n; ++i) {
        const auto& sel = state.selections[static_cast<size_t>(i)];
        VertexAudit audit;
        audit.vertex = i;
        audit.iteration = iteration;
        for (const Choice& c : state.choice_sets[static_cast<size_t>(i)].choices)
          audit.labels.push_back(c.label);
        audit.chosen = sel.chosen_label;
        audit.fallback = sel.fallback_used;
        audit.attempts = sel.attempts;
        result.audits.push_back(std::move(audit));
        if (sel.fallback_used) ++result.fallbacks;
        result.selector_attempts += sel.attempts;
      }

      if (acfg_.grad_steps > 0)
        adapt_steps(window, state,
                    std::span<VertexAudit>(result.audits.data() + audit_base,
                                           static_cast<size_t>(n)));

      if (iteration == acfg_.iterations) finalize(state);
    }
  } catch (const NonFiniteError&) {
    // roll back and emit an unadapted predict-select pass for this window
    params_.restore_values(rollback_values);
    optimizer_.load_state(rollback_opt);
    result.rolled_back = true;
    IterationState state = predict_and_select(window, selector, contexts);
    finalize(state);
  }
  return result;
}

}  // namespace leaf
