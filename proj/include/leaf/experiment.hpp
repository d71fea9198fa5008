#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "leaf/adapt.hpp"
#include "leaf/choices.hpp"
#include "leaf/data.hpp"
#include "leaf/metrics.hpp"
#include "leaf/predictor.hpp"
#include "leaf/selector.hpp"

namespace leaf {

struct DataConfig {
  std::string kind = "synth";  // synth | files
  int64_t synth_vertices = 20;
  int64_t synth_days = 14;
  uint64_t synth_seed = 42;
  ShiftSpec shift;
  std::string flow_path;
  std::string adjacency_path;
  std::string meta_path;
  SplitSpec split;
  int64_t max_test_windows = 0;  // 0 = all non-overlapping test windows
  std::string events_text;       // optional prompt context
};

struct SelectorConfig {
  std::string kind = "heuristic";  // llm | oracle | heuristic | none
  LlmEndpointConfig llm;
};

struct ExperimentConfig {
  uint64_t seed = 42;
  std::string out_dir = "runs/out";
  DataConfig data;
  BranchConfig branch;
  bool graph_enabled = true;
  bool hyper_enabled = true;
  PretrainConfig pretrain;
  AdaptConfig adapt;
  std::vector<TransformKind> transforms = default_transforms();
  SelectorConfig selector;
  std::string load_checkpoint;  // skip pretraining when set
  bool save_predictions = true;
};

std::string transform_token(TransformKind kind);           // snake_case config token
TransformKind parse_transform_token(const std::string& s); // throws on unknown

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
// Every violated field, one message each; empty when the config is valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);  // parse + validate

struct ExperimentResult {
  MetricsReport report;
  Tensor predictions;  // W x N x T_out, original units
  Tensor truths;       // same shape
  std::string report_path;
  int64_t rolled_back_windows = 0;
};

// Full pipeline: data -> (pretrain | load checkpoint) -> test loop with the
// configured selector -> report.json / per_step_mae.csv / predictions.bin /
// audit.ndjson under cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Per-vertex prompt contexts for one window.
std::vector<PromptContext> build_prompt_contexts(const Dataset& ds,
                                                 const Window& window,
                                                 const BranchConfig& branch,
                                                 const std::string& events_text);

struct AblationArm {
  std::string name;         // full, E1..E6
  std::string description;
  ExperimentConfig config;  // differs from base only in the documented fields
  std::vector<std::string> expected_diff;  // dot paths into the config JSON
};

std::vector<AblationArm> ablation_arms(const ExperimentConfig& base);

// Dot paths at which two config JSON documents disagree.
std::vector<std::string> config_diff_paths(const nlohmann::json& a,
                                           const nlohmann::json& b);

// Runs full + E1..E6 sharing one pretrained checkpoint; writes per-arm
// artifacts under <out_dir>/<arm> and a comparative ablation_summary.json.
nlohmann::json run_ablation_suite(const ExperimentConfig& base);

}  // namespace leaf
