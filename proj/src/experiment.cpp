#include "leaf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>

#include "leaf/checkpoint.hpp"
#include "leaf/stgraph.hpp"

namespace fs = std::filesystem;

namespace leaf {

std::string transform_token(TransformKind kind) {
  switch (kind) {
    case TransformKind::Smoothing: return "smoothing";
    case TransformKind::UpwardTrend: return "upward_trend";
    case TransformKind::DownwardTrend: return "downward_trend";
    case TransformKind::Overestimate: return "overestimate";
    case TransformKind::Underestimate: return "underestimate";
    case TransformKind::Identity: return "identity";
  }
  return "unknown";
}

TransformKind parse_transform_token(const std::string& s) {
  for (TransformKind k :
       {TransformKind::Smoothing, TransformKind::UpwardTrend,
        TransformKind::DownwardTrend, TransformKind::Overestimate,
        TransformKind::Underestimate, TransformKind::Identity})
    if (transform_token(k) == s) return k;
  throw std::invalid_argument("unknown transform '" + s + "'");
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["data"] = {
      {"kind", cfg.data.kind},
      {"synth",
       {{"vertices", cfg.data.synth_vertices},
        {"days", cfg.data.synth_days},
        {"seed", cfg.data.synth_seed},
        {"shift",
         {{"scale", cfg.data.shift.scale},
          {"trend", cfg.data.shift.trend},
          {"start_fraction", cfg.data.shift.start_fraction}}}}},
      {"files",
       {{"flow", cfg.data.flow_path},
        {"adjacency", cfg.data.adjacency_path},
        {"meta", cfg.data.meta_path}}},
      {"split",
       {{"train_fraction", cfg.data.split.train_fraction},
        {"val_fraction", cfg.data.split.val_fraction}}},
      {"max_test_windows", cfg.data.max_test_windows},
      {"events_text", cfg.data.events_text},
  };
  j["branch"] = {
      {"hidden", cfg.branch.hidden},       {"layers", cfg.branch.layers},
      {"hyperedges", cfg.branch.hyperedges}, {"t_in", cfg.branch.t_in},
      {"t_out", cfg.branch.t_out},         {"features", cfg.branch.features},
      {"self_loops", cfg.branch.self_loops}, {"residual", cfg.branch.residual},
  };
  j["branches"] = {{"graph", cfg.graph_enabled}, {"hypergraph", cfg.hyper_enabled}};
  j["pretrain"] = {
      {"batch_size", cfg.pretrain.batch_size},
      {"max_epochs", cfg.pretrain.max_epochs},
      {"patience", cfg.pretrain.patience},
      {"lr", cfg.pretrain.lr},
      {"huber_delta", cfg.pretrain.huber_delta},
      {"val_stride", cfg.pretrain.val_stride},
  };
  j["adapt"] = {
      {"K", cfg.adapt.iterations},
      {"M", cfg.adapt.grad_steps},
      {"epsilon", cfg.adapt.epsilon},
      {"delta", cfg.adapt.delta},
      {"lr", cfg.adapt.lr},
      {"persist_across_windows", cfg.adapt.persist_across_windows},
  };
  j["transforms"] = nlohmann::json::array();
  for (TransformKind t : cfg.transforms) j["transforms"].push_back(transform_token(t));
  j["selector"] = {
      {"kind", cfg.selector.kind},
      {"llm",
       {{"base_url", cfg.selector.llm.base_url},
        {"model", cfg.selector.llm.model_name},
        {"api_key_env", cfg.selector.llm.api_key_env},
        {"temperature", cfg.selector.llm.temperature},
        {"max_concurrent_requests", cfg.selector.llm.max_concurrent_requests},
        {"request_timeout_s", cfg.selector.llm.request_timeout_s},
        {"retry_limit", cfg.selector.llm.retry_limit},
        {"backoff_base_ms", cfg.selector.llm.backoff_base_ms}}},
  };
  j["load_checkpoint"] = cfg.load_checkpoint;
  j["save_predictions"] = cfg.save_predictions;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    cfg.data.kind = d.value("kind", cfg.data.kind);
    if (d.contains("synth")) {
      const auto& s = d.at("synth");
      cfg.data.synth_vertices = s.value("vertices", cfg.data.synth_vertices);
      cfg.data.synth_days = s.value("days", cfg.data.synth_days);
      cfg.data.synth_seed = s.value("seed", cfg.data.synth_seed);
      if (s.contains("shift")) {
        const auto& sh = s.at("shift");
        cfg.data.shift.scale = sh.value("scale", cfg.data.shift.scale);
        cfg.data.shift.trend = sh.value("trend", cfg.data.shift.trend);
        cfg.data.shift.start_fraction =
            sh.value("start_fraction", cfg.data.shift.start_fraction);
      }
    }
    if (d.contains("files")) {
      const auto& f = d.at("files");
      cfg.data.flow_path = f.value("flow", cfg.data.flow_path);
      cfg.data.adjacency_path = f.value("adjacency", cfg.data.adjacency_path);
      cfg.data.meta_path = f.value("meta", cfg.data.meta_path);
    }
    if (d.contains("split")) {
      const auto& s = d.at("split");
      cfg.data.split.train_fraction =
          s.value("train_fraction", cfg.data.split.train_fraction);
      cfg.data.split.val_fraction = s.value("val_fraction", cfg.data.split.val_fraction);
    }
    cfg.data.max_test_windows = d.value("max_test_windows", cfg.data.max_test_windows);
    cfg.data.events_text = d.value("events_text", cfg.data.events_text);
  }
  if (j.contains("branch")) {
    const auto& b = j.at("branch");
    cfg.branch.hidden = b.value("hidden", cfg.branch.hidden);
    cfg.branch.layers = b.value("layers", cfg.branch.layers);
    cfg.branch.hyperedges = b.value("hyperedges", cfg.branch.hyperedges);
    cfg.branch.t_in = b.value("t_in", cfg.branch.t_in);
    cfg.branch.t_out = b.value("t_out", cfg.branch.t_out);
    cfg.branch.features = b.value("features", cfg.branch.features);
    cfg.branch.self_loops = b.value("self_loops", cfg.branch.self_loops);
    cfg.branch.residual = b.value("residual", cfg.branch.residual);
  }
  if (j.contains("branches")) {
    cfg.graph_enabled = j.at("branches").value("graph", cfg.graph_enabled);
    cfg.hyper_enabled = j.at("branches").value("hypergraph", cfg.hyper_enabled);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    cfg.pretrain.batch_size = p.value("batch_size", cfg.pretrain.batch_size);
    cfg.pretrain.max_epochs = p.value("max_epochs", cfg.pretrain.max_epochs);
    cfg.pretrain.patience = p.value("patience", cfg.pretrain.patience);
    cfg.pretrain.lr = p.value("lr", cfg.pretrain.lr);
    cfg.pretrain.huber_delta = p.value("huber_delta", cfg.pretrain.huber_delta);
    cfg.pretrain.val_stride = p.value("val_stride", cfg.pretrain.val_stride);
  }
  if (j.contains("adapt")) {
    const auto& a = j.at("adapt");
    cfg.adapt.iterations = a.value("K", cfg.adapt.iterations);
    cfg.adapt.grad_steps = a.value("M", cfg.adapt.grad_steps);
    cfg.adapt.epsilon = a.value("epsilon", cfg.adapt.epsilon);
    cfg.adapt.delta = a.value("delta", cfg.adapt.delta);
    cfg.adapt.lr = a.value("lr", cfg.adapt.lr);
    cfg.adapt.persist_across_windows =
        a.value("persist_across_windows", cfg.adapt.persist_across_windows);
  }
  if (j.contains("transforms")) {
    cfg.transforms.clear();
    for (const auto& t : j.at("transforms"))
      cfg.transforms.push_back(parse_transform_token(t.get<std::string>()));
  }
  if (j.contains("selector")) {
    const auto& s = j.at("selector");
    cfg.selector.kind = s.value("kind", cfg.selector.kind);
    if (s.contains("llm")) {
      const auto& l = s.at("llm");
      cfg.selector.llm.base_url = l.value("base_url", cfg.selector.llm.base_url);
      cfg.selector.llm.model_name = l.value("model", cfg.selector.llm.model_name);
      cfg.selector.llm.api_key_env = l.value("api_key_env", cfg.selector.llm.api_key_env);
      cfg.selector.llm.temperature = l.value("temperature", cfg.selector.llm.temperature);
      cfg.selector.llm.max_concurrent_requests =
          l.value("max_concurrent_requests", cfg.selector.llm.max_concurrent_requests);
      cfg.selector.llm.request_timeout_s =
          l.value("request_timeout_s", cfg.selector.llm.request_timeout_s);
      cfg.selector.llm.retry_limit = l.value("retry_limit", cfg.selector.llm.retry_limit);
      cfg.selector.llm.backoff_base_ms =
          l.value("backoff_base_ms", cfg.selector.llm.backoff_base_ms);
    }
  }
  cfg.load_checkpoint = j.value("load_checkpoint", cfg.load_checkpoint);
  cfg.save_predictions = j.value("save_predictions", cfg.save_predictions);
  return cfg;
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> errs;
  for (const auto& e : cfg.branch.validate()) errs.push_back("branch." + e);
  for (const auto& e : cfg.adapt.validate()) errs.push_back(e);
  if (cfg.data.kind != "synth" && cfg.data.kind != "files")
    errs.push_back("data.kind must be 'synth' or 'files'");
  if (cfg.data.kind == "files") {
    if (cfg.data.flow_path.empty()) errs.push_back("data.files.flow is required");
    if (cfg.data.adjacency_path.empty())
      errs.push_back("data.files.adjacency is required");
    if (cfg.data.meta_path.empty()) errs.push_back("data.files.meta is required");
  }
  if (cfg.data.kind == "synth") {
    if (cfg.data.synth_vertices < 1) errs.push_back("data.synth.vertices must be >= 1");
    if (cfg.data.synth_days < 1) errs.push_back("data.synth.days must be >= 1");
  }
  if (!(cfg.data.split.train_fraction > 0.0 && cfg.data.split.train_fraction < 1.0))
    errs.push_back("data.split.train_fraction must lie in (0,1)");
  if (!(cfg.data.split.val_fraction > 0.0 && cfg.data.split.val_fraction < 1.0))
    errs.push_back("data.split.val_fraction must lie in (0,1)");
  if (cfg.data.split.train_fraction + cfg.data.split.val_fraction >= 1.0)
    errs.push_back("data.split fractions must sum below 1");
  if (cfg.data.max_test_windows < 0)
    errs.push_back("data.max_test_windows must be >= 0");
  if (!cfg.graph_enabled && !cfg.hyper_enabled)
    errs.push_back("branches: at least one of graph/hypergraph must be enabled");
  if (cfg.selector.kind != "llm" && cfg.selector.kind != "oracle" &&
      cfg.selector.kind != "heuristic" && cfg.selector.kind != "none")
    errs.push_back("selector.kind must be llm, oracle, heuristic, or none");
  if (cfg.selector.kind == "llm") {
    if (cfg.selector.llm.base_url.empty())
      errs.push_back("selector.llm.base_url is required");
    if (cfg.selector.llm.model_name.empty())
      errs.push_back("selector.llm.model is required");
    if (cfg.selector.llm.max_concurrent_requests < 1)
      errs.push_back("selector.llm.max_concurrent_requests must be >= 1");
    if (cfg.selector.llm.retry_limit < 0)
      errs.push_back("selector.llm.retry_limit must be >= 0");
  }
  if (cfg.pretrain.batch_size < 1) errs.push_back("pretrain.batch_size must be >= 1");
  if (cfg.pretrain.max_epochs < 0) errs.push_back("pretrain.max_epochs must be >= 0");
  if (cfg.pretrain.patience < 1) errs.push_back("pretrain.patience must be >= 1");
  if (!(cfg.pretrain.lr > 0.0)) errs.push_back("pretrain.lr must be > 0");
  if (!(cfg.pretrain.huber_delta > 0.0))
    errs.push_back("pretrain.huber_delta must be > 0");
  if (cfg.pretrain.val_stride < 1) errs.push_back("pretrain.val_stride must be >= 1");
  return errs;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  auto errs = validate_config(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid config " + path + ":";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
  return cfg;
}

std::vector<PromptContext> build_prompt_contexts(const Dataset& ds,
                                                 const Window& window,
                                                 const BranchConfig& branch,
                                                 const std::string& events_text) {
  const int64_t n = ds.n_vertices();
  std::vector<PromptContext> contexts(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    PromptContext& ctx = contexts[static_cast<size_t>(i)];
    const SensorMeta& meta = ds.network.sensors[static_cast<size_t>(i)];
    ctx.sensor_id = meta.id.empty() ? "V" + std::to_string(i) : meta.id;
    if (!meta.description.empty()) ctx.location_text = meta.description;
    if (meta.lat && meta.lon) ctx.lat_lon = std::make_pair(*meta.lat, *meta.lon);
    ctx.history.resize(static_cast<size_t>(branch.t_in));
    ctx.history_times.resize(static_cast<size_t>(branch.t_in));
    for (int64_t t = 0; t < branch.t_in; ++t) {
      ctx.history[static_cast<size_t>(t)] =
          window.input[(t * n + i) * ds.n_features()];
      ctx.history_times[static_cast<size_t>(t)] =
          ds.timestamps[static_cast<size_t>(window.start + t)];
    }
    ctx.forecast_begin =
        ds.timestamps[static_cast<size_t>(window.start + branch.t_in)];
    ctx.forecast_end = ds.timestamps[static_cast<size_t>(
        window.start + branch.t_in + branch.t_out - 1)];
    if (!events_text.empty()) ctx.events_text = events_text;
    ctx.dataset_blurb = default_dataset_blurb();
  }
  return contexts;
}

namespace {

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.data.kind == "synth")
    return synth_generate(cfg.data.synth_vertices, cfg.data.synth_days,
                          cfg.data.shift, cfg.data.synth_seed);
  return load_dataset(cfg.data.flow_path, cfg.data.adjacency_path,
                      cfg.data.meta_path);
}

std::vector<Window> subsample_windows(std::vector<Window> windows, int64_t max_count) {
  if (max_count <= 0 || static_cast<int64_t>(windows.size()) <= max_count)
    return windows;
  std::vector<Window> picked;
  picked.reserve(static_cast<size_t>(max_count));
  const int64_t total = static_cast<int64_t>(windows.size());
  for (int64_t i = 0; i < max_count; ++i)
    picked.push_back(std::move(windows[static_cast<size_t>(i * total / max_count)]));
  return picked;
}

std::unique_ptr<Selector> build_selector(const ExperimentConfig& cfg,
                                         std::ostream* llm_log) {
  if (cfg.selector.kind == "oracle")
    return std::make_unique<OracleSelector>(cfg.adapt.delta);
  if (cfg.selector.kind == "heuristic") return std::make_unique<HeuristicSelector>();
  if (cfg.selector.kind == "llm")
    return std::make_unique<LlmSelector>(cfg.selector.llm, llm_log);
  return nullptr;  // "none"
}

void write_training_log(const std::string& path,
                        const std::vector<std::pair<std::string, PretrainResult>>& logs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "branch,epoch,train_loss,val_mae\n";
  for (const auto& [branch, result] : logs)
    for (const auto& e : result.log)
      out << branch << "," << e.epoch << "," << e.train_loss << "," << e.val_mae
          << "\n";
}

nlohmann::json audit_line(int64_t window_index, int64_t window_start,
                          const VertexAudit& a) {
  nlohmann::json j;
  j["window"] = window_index;
  j["start"] = window_start;
  j["vertex"] = a.vertex;
  j["iteration"] = a.iteration;
  j["labels"] = a.labels;
  j["chosen"] = a.chosen;
  j["fallback"] = a.fallback;
  j["attempts"] = a.attempts;
  j["loss_graph"] = a.loss_graph ? nlohmann::json(*a.loss_graph) : nlohmann::json();
  j["loss_hyper"] = a.loss_hyper ? nlohmann::json(*a.loss_hyper) : nlohmann::json();
  return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  auto errs = validate_config(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }

  fs::create_directories(cfg.out_dir);
  const Dataset ds = build_dataset(cfg);
  const SplitRanges ranges = split_ranges(ds.t_total(), cfg.data.split);
  const NormStats stats = compute_norm_stats(ds, ranges.train_end);
  const STGraph st = build_st_graph(ds.network, cfg.branch.t_in, cfg.branch.self_loops);

  PredictorParams params = PredictorParams::init(cfg.branch, cfg.seed);
  if (!cfg.load_checkpoint.empty()) {
    load_checkpoint(cfg.load_checkpoint, params);
  } else {
    const auto train = make_windows(ds, cfg.branch.t_in, cfg.branch.t_out, 1, 0,
                                    ranges.train_end);
    const auto val = make_windows(ds, cfg.branch.t_in, cfg.branch.t_out, 1,
                                  ranges.train_end, ranges.val_end);
    std::vector<std::pair<std::string, PretrainResult>> logs;
    if (cfg.graph_enabled)
      logs.emplace_back("graph",
                        pretrain_branch(BranchKind::Graph, params, st, train, val,
                                        stats, cfg.branch, cfg.pretrain, cfg.seed));
    if (cfg.hyper_enabled)
      logs.emplace_back("hypergraph",
                        pretrain_branch(BranchKind::Hypergraph, params, st, train,
                                        val, stats, cfg.branch, cfg.pretrain,
                                        cfg.seed));
    write_training_log(cfg.out_dir + "/training_log.csv", logs);
    save_checkpoint(cfg.out_dir + "/pretrained.leaf", params, config_to_json(cfg));
  }

  auto test_windows =
      subsample_windows(make_windows(ds, cfg.branch.t_in, cfg.branch.t_out,
                                     cfg.branch.t_in + cfg.branch.t_out,
                                     ranges.val_end, ds.t_total()),
                        cfg.data.max_test_windows);
  const int64_t n_windows = static_cast<int64_t>(test_windows.size());
  const int64_t n = ds.n_vertices();

  std::ofstream llm_log;
  if (cfg.selector.kind == "llm")
    llm_log.open(cfg.out_dir + "/selector_log.ndjson");
  std::unique_ptr<Selector> selector =
      build_selector(cfg, llm_log.is_open() ? &llm_log : nullptr);

  std::ofstream audit(cfg.out_dir + "/audit.ndjson");
  if (!audit) throw std::runtime_error("cannot write audit trail");

  ExperimentResult result;
  result.predictions = Tensor({n_windows, n, cfg.branch.t_out});
  result.truths = Tensor({n_windows, n, cfg.branch.t_out});

  SelectorStats sel_stats;
  if (selector == nullptr) {
    // no selector: report the raw (clamped) mean of the enabled branches
    for (int64_t w = 0; w < n_windows; ++w) {
      const Window& window = test_windows[static_cast<size_t>(w)];
      const Tensor window_norm = normalize(window.input, stats);
      std::vector<Tensor> outs;
      if (cfg.graph_enabled)
        outs.push_back(forecast(BranchKind::Graph, window_norm, st, params, cfg.branch));
      if (cfg.hyper_enabled)
        outs.push_back(
            forecast(BranchKind::Hypergraph, window_norm, st, params, cfg.branch));
      for (int64_t i = 0; i < n; ++i)
        for (int64_t s = 0; s < cfg.branch.t_out; ++s) {
          double v = 0.0;
          for (const Tensor& y : outs) v += denormalize_flow(y.at(i, s), stats);
          v = std::max(v / static_cast<double>(outs.size()), 0.0);
          result.predictions[(w * n + i) * cfg.branch.t_out + s] = v;
        }
    }
  } else {
    AdaptRunner runner(params, cfg.branch, st, stats, cfg.adapt,
                       BranchesEnabled{cfg.graph_enabled, cfg.hyper_enabled},
                       cfg.transforms);
    for (int64_t w = 0; w < n_windows; ++w) {
      const Window& window = test_windows[static_cast<size_t>(w)];
      const auto contexts =
          build_prompt_contexts(ds, window, cfg.branch, cfg.data.events_text);
      WindowResult wr = runner.run_window(window, *selector, contexts);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t s = 0; s < cfg.branch.t_out; ++s)
          result.predictions[(w * n + i) * cfg.branch.t_out + s] =
              wr.forecast.at(i, s);
      for (const VertexAudit& a : wr.audits)
        audit << audit_line(w, window.start, a).dump() << "\n";
      if (wr.rolled_back) {
        ++result.rolled_back_windows;
        audit << nlohmann::json{{"window", w}, {"rolled_back", true}}.dump() << "\n";
      }
      sel_stats.selections +=
          static_cast<int64_t>(wr.audits.size());
      sel_stats.fallbacks += wr.fallbacks;
      sel_stats.attempts += wr.selector_attempts;
    }
  }

  for (int64_t w = 0; w < n_windows; ++w) {
    const Window& window = test_windows[static_cast<size_t>(w)];
    for (int64_t i = 0; i < n; ++i)
      for (int64_t s = 0; s < cfg.branch.t_out; ++s)
        result.truths[(w * n + i) * cfg.branch.t_out + s] = window.target[s * n + i];
  }

  result.report = compute_metrics(result.predictions, result.truths);
  result.report.selector = sel_stats;
  result.report.config_echo = config_to_json(cfg);

  {
    std::ofstream out(cfg.out_dir + "/report.json");
    if (!out) throw std::runtime_error("cannot write report.json");
    out << report_to_json(result.report).dump(2) << "\n";
    result.report_path = cfg.out_dir + "/report.json";
  }
  {
    std::ofstream out(cfg.out_dir + "/per_step_mae.csv");
    out << "step,mae\n";
    for (size_t s = 0; s < result.report.per_step_mae.size(); ++s)
      out << (s + 1) << "," << result.report.per_step_mae[s] << "\n";
  }
  if (cfg.save_predictions)
    save_tensors(cfg.out_dir + "/predictions.bin",
                 {{"predictions", &result.predictions}, {"truth", &result.truths}});
  return result;
}

std::vector<AblationArm> ablation_arms(const ExperimentConfig& base) {
  std::vector<AblationArm> arms;
  arms.push_back({"full", "dual branch + selector + transforms + ranking loss",
                  base, {}});

  AblationArm e1{"E1", "graph branch alone, no selector", base,
                 {"branches.hypergraph", "selector.kind"}};
  e1.config.hyper_enabled = false;
  e1.config.selector.kind = "none";
  arms.push_back(std::move(e1));

  AblationArm e2{"E2", "hypergraph branch alone, no selector", base,
                 {"branches.graph", "selector.kind"}};
  e2.config.graph_enabled = false;
  e2.config.selector.kind = "none";
  arms.push_back(std::move(e2));

  AblationArm e3{"E3", "without the hypergraph branch", base,
                 {"branches.hypergraph"}};
  e3.config.hyper_enabled = false;
  arms.push_back(std::move(e3));

  AblationArm e4{"E4", "without the graph branch", base, {"branches.graph"}};
  e4.config.graph_enabled = false;
  arms.push_back(std::move(e4));

  AblationArm e5{"E5", "without transformations", base, {"transforms"}};
  e5.config.transforms.clear();
  arms.push_back(std::move(e5));

  AblationArm e6{"E6", "without the ranking loss (K=1)", base, {"adapt.K"}};
  e6.config.adapt.iterations = 1;
  arms.push_back(std::move(e6));

  return arms;
}

namespace {

void collect_diffs(const nlohmann::json& a, const nlohmann::json& b,
                   const std::string& prefix, std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    std::vector<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.push_back(it.key());
    for (auto it = b.begin(); it != b.end(); ++it)
      if (!a.contains(it.key())) keys.push_back(it.key());
    for (const auto& key : keys) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (!a.contains(key) || !b.contains(key))
        out.push_back(path);
      else
        collect_diffs(a.at(key), b.at(key), path, out);
    }
    return;
  }
  if (a != b) out.push_back(prefix);
}

}  // namespace

std::vector<std::string> config_diff_paths(const nlohmann::json& a,
                                           const nlohmann::json& b) {
  std::vector<std::string> out;
  collect_diffs(a, b, "", out);
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json run_ablation_suite(const ExperimentConfig& base) {
  auto errs = validate_config(base);
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }

  const auto arms = ablation_arms(base);
  const nlohmann::json base_json = config_to_json(base);
  fs::create_directories(base.out_dir);

  nlohmann::json summary;
  summary["arms"] = nlohmann::json::array();
  std::string checkpoint = base.load_checkpoint;

  for (const AblationArm& arm : arms) {
    ExperimentConfig exec = arm.config;
    exec.out_dir = base.out_dir + "/" + arm.name;
    exec.load_checkpoint = checkpoint;  // empty for the first (full) arm
    ExperimentResult res = run_experiment(exec);
    if (checkpoint.empty()) checkpoint = exec.out_dir + "/pretrained.leaf";

    nlohmann::json entry;
    entry["name"] = arm.name;
    entry["description"] = arm.description;
    entry["diff_vs_full"] = config_diff_paths(base_json, config_to_json(arm.config));
    entry["mae"] = res.report.mae;
    entry["rmse"] = res.report.rmse;
    entry["mape"] = res.report.mape ? nlohmann::json(*res.report.mape)
                                    : nlohmann::json();
    entry["report"] = res.report_path;
    summary["arms"].push_back(std::move(entry));
  }

  std::ofstream out(base.out_dir + "/ablation_summary.json");
  if (!out) throw std::runtime_error("cannot write ablation_summary.json");
  out << summary.dump(2) << "\n";
  return summary;
}

}  // namespace leaf
