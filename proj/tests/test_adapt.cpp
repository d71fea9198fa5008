#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "leaf/adapt.hpp"
#include "support.hpp"

using namespace leaf;
using leaf::test::gradcheck_max_rel_error;
using leaf::test::make_rng;
using leaf::test::random_tensor;
using leaf::test::random_values;

namespace {

NormStats identity_stats() { return NormStats{{0.0}, {1.0}}; }

Choice make_choice(int label, std::vector<double> values) {
  Choice c;
  c.label = label;
  c.values = std::move(values);
  return c;
}

BranchConfig toy_config() {
  BranchConfig cfg;
  cfg.hidden = 4;
  cfg.layers = 2;
  cfg.hyperedges = 3;
  cfg.t_in = 3;
  cfg.t_out = 4;
  return cfg;
}

RoadNetwork line_network(int64_t n) {
  RoadNetwork net;
  net.n_vertices = n;
  for (int64_t i = 0; i + 1 < n; ++i) net.add_edge(i, i + 1);
  return net;
}

struct Toy {
  BranchConfig cfg = toy_config();
  RoadNetwork net = line_network(2);
  STGraph st;
  NormStats stats;
  Dataset ds;
  Window window;

  explicit Toy(uint64_t seed) {
    ShiftSpec none;
    ds = synth_generate(2, 1, none, seed);
    st = build_st_graph(ds.network, cfg.t_in, true);
    stats = compute_norm_stats(ds, 60);
    window = make_windows(ds, cfg.t_in, cfg.t_out, 1, 60, 100)[0];
  }
};

// An intentionally broken selector: every vertex falls back.
struct AlwaysFallback final : Selector {
  SelectorKind kind() const override { return SelectorKind::LLM; }
  std::vector<SelectionResult> select(
      std::span<const SelectionRequest> requests) override {
    std::vector<SelectionResult> out;
    for (const auto& req : requests) {
      SelectionResult r;
      r.vertex = req.vertex;
      r.fallback_used = true;
      r.chosen_label = 0;
      r.attempts = 3;
      r.selector_kind = SelectorKind::LLM;
      r.values = fallback_values(*req.choices);
      out.push_back(std::move(r));
    }
    return out;
  }
};

}  // namespace

TEST_CASE("ranking loss is zero when the branch equals the selected choice") {
  Parameter y("y", Tensor({1, 4}, {10.0, 11.0, 12.0, 13.0}));
  AdaptConfig cfg;
  Tape tape;
  std::vector<Choice> others{make_choice(2, {20, 20, 20, 20})};
  Tape::Id loss =
      ranking_loss(tape, tape.param(y), make_choice(1, {10, 11, 12, 13}), others,
                   identity_stats(), cfg);
  CHECK(tape.value(loss)[0] == 0.0);
}

TEST_CASE("ranking loss matches the analytic hinge value") {
  // Delta(y, selected) = 0.4 and min-other = 0.1 in the quadratic regime
  Parameter y("y", Tensor({1, 1}, {0.0}));
  AdaptConfig cfg;  // epsilon 0, delta 1
  const double r_sel = std::sqrt(0.8);
  const double r_other = std::sqrt(0.2);
  std::vector<Choice> others{make_choice(2, {r_other}), make_choice(3, {0.9})};
  Tape tape;
  Tape::Id loss = ranking_loss(tape, tape.param(y), make_choice(1, {r_sel}),
                               others, identity_stats(), cfg);
  CHECK(tape.value(loss)[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("ranking loss min-other agrees with an exhaustive scan") {
  auto rng = make_rng(101);
  AdaptConfig cfg;
  NormStats stats = identity_stats();
  for (int trial = 0; trial < 200; ++trial) {
    auto yv = random_values(4, rng, 0.0, 10.0);
    Parameter y("y", Tensor({1, 4}, std::vector<double>(yv.begin(), yv.end())));
    Choice selected = make_choice(1, random_values(4, rng, 0.0, 10.0));
    std::vector<Choice> others;
    for (int i = 0; i < 11; ++i)
      others.push_back(make_choice(i + 2, random_values(4, rng, 0.0, 10.0)));

    Tape tape;
    Tape::Id loss =
        ranking_loss(tape, tape.param(y), selected, others, stats, cfg);
    const double got = tape.value(loss)[0];

    // straight-line oracle
    const double d_sel = huber_distance(yv, selected.values, cfg.delta);
    double d_min = huber_distance(yv, others[0].values, cfg.delta);
    for (const Choice& c : others)
      d_min = std::min(d_min, huber_distance(yv, c.values, cfg.delta));
    const double want = std::max(d_sel - d_min + cfg.epsilon, 0.0);
    CHECK(std::abs(got - want) < 1e-12);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("ranking loss is invariant to permutations of the others") {
  auto rng = make_rng(102);
  AdaptConfig cfg;
  auto yv = random_values(4, rng);
  Parameter y("y", Tensor({1, 4}, std::vector<double>(yv.begin(), yv.end())));
  Choice selected = make_choice(1, random_values(4, rng));
  std::vector<Choice> others;
  for (int i = 0; i < 8; ++i) others.push_back(make_choice(i + 2, random_values(4, rng)));

  Tape tape;
  const double base =
      tape.value(ranking_loss(tape, tape.param(y), selected, others,
                              identity_stats(), cfg))[0];
  std::mt19937_64 shuffle_rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(others.begin(), others.end(), shuffle_rng);
    Tape t2;
    const double v =
        t2.value(ranking_loss(t2, t2.param(y), selected, others,
                              identity_stats(), cfg))[0];
    CHECK(v == base);
  }
}

TEST_CASE("ranking loss rejects an empty competitor set") {
  Parameter y("y", Tensor({1, 2}, {1.0, 2.0}));
  AdaptConfig cfg;
  Tape tape;
  CHECK_THROWS_AS(ranking_loss(tape, tape.param(y), make_choice(1, {1.0, 2.0}),
                               {}, identity_stats(), cfg),
                  std::invalid_argument);
}

TEST_CASE("ranking loss gradient passes finite differences away from ties") {
  auto rng = make_rng(103);
  AdaptConfig cfg;
  Parameter y("y", random_tensor({1, 4}, rng, 2.0, 3.0));
  Choice selected = make_choice(1, {2.2, 2.4, 2.6, 2.8});
  std::vector<Choice> others{make_choice(2, {5.0, 5.5, 6.0, 6.5}),
                             make_choice(3, {0.1, 0.2, 0.1, 0.2})};
  std::vector<Parameter*> params{&y};
  const double err = gradcheck_max_rel_error(params, [&](Tape& t) {
    return ranking_loss(t, t.param(y), selected, others, identity_stats(), cfg);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("full-branch ranking objective descends under a small learning rate") {
  Toy toy(201);
  PredictorParams params = PredictorParams::init(toy.cfg, 202);
  AdaptConfig acfg;
  acfg.lr = 1e-5;

  const Tensor window_norm = normalize(toy.window.input, toy.stats);
  const int64_t n = toy.st.n_vertices;

  // fixed selections from one oracle pass
  Tensor yg = forecast(BranchKind::Graph, window_norm, toy.st, params, toy.cfg);
  Tensor yh = forecast(BranchKind::Hypergraph, window_norm, toy.st, params, toy.cfg);
  std::vector<ChoiceSet> sets;
  std::vector<SelectionResult> picks;
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> gi, hi, truth;
    for (int64_t s = 0; s < toy.cfg.t_out; ++s) {
      gi.push_back(denormalize_flow(yg.at(i, s), toy.stats));
      hi.push_back(denormalize_flow(yh.at(i, s), toy.stats));
      truth.push_back(toy.window.target[s * n + i]);
    }
    sets.push_back(build_choice_set(gi, hi, i, default_transforms()));
    picks.push_back(oracle_select(sets.back(), truth, acfg.delta));
  }

  auto total_loss = [&](bool step, Adam* opt) {
    Tape tape;
    Tape::Id ygid = forecast_taped(tape, BranchKind::Graph, window_norm, toy.st,
                                   params, toy.cfg);
    Tape::Id yhid = forecast_taped(tape, BranchKind::Hypergraph, window_norm,
                                   toy.st, params, toy.cfg);
    Tape::Id total = -1;
    for (int64_t i = 0; i < n; ++i) {
      const Choice& chosen =
          sets[static_cast<size_t>(i)].choices[static_cast<size_t>(picks[static_cast<size_t>(i)].chosen_label - 1)];
      std::vector<Choice> others;
      for (const Choice& c : sets[static_cast<size_t>(i)].choices)
        if (c.label != chosen.label) others.push_back(c);
      Tape::Id lg = ranking_loss(tape, tape.row(ygid, i), chosen, others,
                                 toy.stats, acfg);
      Tape::Id lh = ranking_loss(tape, tape.row(yhid, i), chosen, others,
                                 toy.stats, acfg);
      Tape::Id vertex = tape.add(lg, lh);
      total = total < 0 ? vertex : tape.add(total, vertex);
    }
    Tape::Id scaled = tape.scale(total, 1.0 / static_cast<double>(n));
    const double value = tape.value(scaled)[0];
    if (step) {
      tape.backward(scaled);
      opt->step();
    }
    return value;
  };

  Adam opt(params.parameters(), Adam::Config{acfg.lr, 0.9, 0.999, 1e-8});
  const double before = total_loss(true, &opt);
  const double after = total_loss(false, nullptr);
  CHECK(after <= before + 1e-12);
}

TEST_CASE("M=0 leaves parameters untouched") {
  Toy toy(203);
  PredictorParams params = PredictorParams::init(toy.cfg, 204);
  const auto snapshot = params.snapshot_values();

  AdaptConfig acfg;
  acfg.iterations = 2;
  acfg.grad_steps = 0;
  AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {}, default_transforms());
  OracleSelector oracle(acfg.delta);
  auto contexts = std::vector<PromptContext>(2);
  for (auto& c : contexts) c.history.assign(3, 100.0);
  WindowResult wr = runner.run_window(toy.window, oracle, contexts);
  CHECK_FALSE(wr.rolled_back);

  const auto now = params.snapshot_values();
  for (size_t i = 0; i < now.size(); ++i) CHECK(now[i].storage() == snapshot[i].storage());
}

TEST_CASE("K=1 output equals the first-pass selections") {
  Toy toy(205);
  PredictorParams params = PredictorParams::init(toy.cfg, 206);
  const int64_t n = toy.st.n_vertices;

  // expected: oracle-selected choices of the untouched forecasts
  const Tensor window_norm = normalize(toy.window.input, toy.stats);
  Tensor yg = forecast(BranchKind::Graph, window_norm, toy.st, params, toy.cfg);
  Tensor yh = forecast(BranchKind::Hypergraph, window_norm, toy.st, params, toy.cfg);
  std::vector<std::vector<double>> expected;
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> gi, hi, truth;
    for (int64_t s = 0; s < toy.cfg.t_out; ++s) {
      gi.push_back(denormalize_flow(yg.at(i, s), toy.stats));
      hi.push_back(denormalize_flow(yh.at(i, s), toy.stats));
      truth.push_back(toy.window.target[s * n + i]);
    }
    ChoiceSet cs = build_choice_set(gi, hi, i, default_transforms());
    expected.push_back(oracle_select(cs, truth, 1.0).values);
  }

  AdaptConfig acfg;
  acfg.iterations = 1;
  acfg.grad_steps = 5;  // adaptation still runs, but cannot affect the output
  AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {}, default_transforms());
  OracleSelector oracle(acfg.delta);
  auto contexts = std::vector<PromptContext>(2);
  WindowResult wr = runner.run_window(toy.window, oracle, contexts);

  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < toy.cfg.t_out; ++s)
      CHECK(wr.forecast.at(i, s) == expected[static_cast<size_t>(i)][static_cast<size_t>(s)]);
}

TEST_CASE("oracle picks an in-set truth exactly") {
  Toy toy(207);
  PredictorParams params = PredictorParams::init(toy.cfg, 208);
  const int64_t n = toy.st.n_vertices;

  // plant the truth: choice 1 (graph identity) for every vertex
  const Tensor window_norm = normalize(toy.window.input, toy.stats);
  Tensor yg = forecast(BranchKind::Graph, window_norm, toy.st, params, toy.cfg);
  Window planted = toy.window;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < toy.cfg.t_out; ++s)
      planted.target[s * n + i] =
          std::max(denormalize_flow(yg.at(i, s), toy.stats), 0.0);

  AdaptConfig acfg;
  acfg.iterations = 1;
  acfg.grad_steps = 0;
  AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {}, default_transforms());
  OracleSelector oracle(acfg.delta);
  auto contexts = std::vector<PromptContext>(2);
  WindowResult wr = runner.run_window(planted, oracle, contexts);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t s = 0; s < toy.cfg.t_out; ++s)
      CHECK(wr.forecast.at(i, s) == planted.target[s * n + i]);
}

TEST_CASE("deterministic selector gives bit-identical forecasts across runs") {
  auto run = [] {
    Toy toy(209);
    PredictorParams params = PredictorParams::init(toy.cfg, 210);
    AdaptConfig acfg;  // K=2, M=5
    AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {},
                       default_transforms());
    HeuristicSelector heuristic;
    std::vector<PromptContext> contexts(2);
    for (int64_t i = 0; i < 2; ++i)
      for (int64_t t = 0; t < toy.cfg.t_in; ++t)
        contexts[static_cast<size_t>(i)].history.push_back(
            toy.window.input[(t * 2 + i)]);
    return runner.run_window(toy.window, heuristic, contexts).forecast.storage();
  };
  CHECK(run() == run());
}

TEST_CASE("fallback selections skip adaptation and surface in the audit") {
  Toy toy(211);
  PredictorParams params = PredictorParams::init(toy.cfg, 212);
  const auto snapshot = params.snapshot_values();

  AdaptConfig acfg;  // K=2, M=5
  AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {}, default_transforms());
  AlwaysFallback broken;
  auto contexts = std::vector<PromptContext>(2);
  WindowResult wr = runner.run_window(toy.window, broken, contexts);

  CHECK(wr.fallbacks == 2 * 2);  // every vertex, both iterations
  for (const auto& audit : wr.audits) {
    CHECK(audit.fallback);
    CHECK_FALSE(audit.loss_graph.has_value());
    CHECK_FALSE(audit.loss_hyper.has_value());
  }
  // nothing to learn from: parameters stay at the snapshot
  const auto now = params.snapshot_values();
  for (size_t i = 0; i < now.size(); ++i)
    CHECK(now[i].storage() == snapshot[i].storage());
  CHECK(wr.forecast.all_finite());
}

TEST_CASE("non-finite adaptation rolls parameters back and keeps the run alive") {
  Toy toy(213);
  PredictorParams params = PredictorParams::init(toy.cfg, 214);
  const auto snapshot = params.snapshot_values();

  AdaptConfig acfg;
  acfg.iterations = 1;
  acfg.grad_steps = 5;
  // A huge step blows the head bias up to ~1e160; with delta this large the
  // Huber residual stays quadratic, so the next evaluation squares it to Inf.
  acfg.lr = 1e160;
  acfg.delta = 1e300;
  AdaptRunner runner(params, toy.cfg, toy.st, toy.stats, acfg, {}, default_transforms());
  OracleSelector oracle(acfg.delta);
  auto contexts = std::vector<PromptContext>(2);
  WindowResult wr = runner.run_window(toy.window, oracle, contexts);

  CHECK(wr.rolled_back);
  CHECK(wr.forecast.all_finite());
  const auto now = params.snapshot_values();
  for (size_t i = 0; i < now.size(); ++i)
    CHECK(now[i].storage() == snapshot[i].storage());
}

TEST_CASE("per-window reset replays identically; persistence adapts") {
  auto make_contexts = [](int64_t n) {
    std::vector<PromptContext> ctxs(static_cast<size_t>(n));
    for (auto& c : ctxs) c.history.assign(3, 100.0);
    return ctxs;
  };

  Toy toy(215);
  AdaptConfig reset_cfg;
  reset_cfg.persist_across_windows = false;
  PredictorParams p1 = PredictorParams::init(toy.cfg, 216);
  AdaptRunner r1(p1, toy.cfg, toy.st, toy.stats, reset_cfg, {}, default_transforms());
  OracleSelector oracle(reset_cfg.delta);
  auto ctxs = make_contexts(2);
  auto first = r1.run_window(toy.window, oracle, ctxs).forecast.storage();
  auto second = r1.run_window(toy.window, oracle, ctxs).forecast.storage();
  CHECK(first == second);

  AdaptConfig persist_cfg;  // default: persist
  PredictorParams p2 = PredictorParams::init(toy.cfg, 216);
  AdaptRunner r2(p2, toy.cfg, toy.st, toy.stats, persist_cfg, {}, default_transforms());
  const auto before = p2.snapshot_values();
  r2.run_window(toy.window, oracle, ctxs);
  const auto after = p2.snapshot_values();
  bool changed = false;
  for (size_t i = 0; i < after.size(); ++i)
    if (after[i].storage() != before[i].storage()) changed = true;
  CHECK(changed);
}

TEST_CASE("adapt config validation lists violations") {
  AdaptConfig bad;
  bad.iterations = 0;
  bad.grad_steps = -1;
  bad.epsilon = -0.5;
  CHECK(bad.validate().size() == 3);
}
