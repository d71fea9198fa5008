#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leaf/choices.hpp"

namespace leaf {

// Everything a prompt needs to describe one vertex's situation.
struct PromptContext {
  std::string sensor_id;
  std::optional<std::string> location_text;
  std::optional<std::pair<double, double>> lat_lon;
  std::vector<double> history;        // T values, original flow units
  std::vector<int64_t> history_times; // matching unix timestamps
  int64_t forecast_begin = 0;
  int64_t forecast_end = 0;
  std::optional<std::string> events_text;
  std::string dataset_blurb;
};

const std::string& default_dataset_blurb();

// Deterministic prompt with fixed section order: general info, spatial info,
// temporal info, history (rounded to integers), task instruction, enumerated
// options with provenance, closing instruction.
std::string build_prompt(const PromptContext& ctx, const ChoiceSet& cs);

// First integer token in [1, k]; nullopt when none exists (ParseFailure).
std::optional<int> parse_selection(const std::string& response, int k);

enum class SelectorKind { LLM, Oracle, Heuristic };
std::string selector_kind_name(SelectorKind kind);

struct SelectionResult {
  int64_t vertex = 0;
  int chosen_label = 0;  // 0 when fallback_used
  std::string raw_response;
  SelectorKind selector_kind = SelectorKind::Heuristic;
  bool fallback_used = false;
  int attempts = 0;
  std::vector<double> values;  // chosen forecast, original units
};

struct SelectionRequest {
  int64_t vertex = 0;
  const ChoiceSet* choices = nullptr;
  const PromptContext* context = nullptr;
  const std::vector<double>* truth = nullptr;  // oracle only (test harness)
};

class Selector {
 public:
  virtual ~Selector() = default;
  virtual SelectorKind kind() const = 0;
  virtual std::vector<SelectionResult> select(
      std::span<const SelectionRequest> requests) = 0;
};

// Mean elementwise Huber distance, the Delta used for selection and ranking.
double huber_distance(std::span<const double> a, std::span<const double> b,
                      double delta);

// argmin over choices of Delta(choice, truth); first label wins ties.
SelectionResult oracle_select(const ChoiceSet& cs, std::span<const double> truth,
                              double delta);

// Continuity heuristic: the choice whose first value is closest to the last
// observed history value; first label wins ties.
SelectionResult heuristic_select(const ChoiceSet& cs,
                                 std::span<const double> history);

class OracleSelector final : public Selector {
 public:
  explicit OracleSelector(double delta = 1.0) : delta_(delta) {}
  SelectorKind kind() const override { return SelectorKind::Oracle; }
  std::vector<SelectionResult> select(
      std::span<const SelectionRequest> requests) override;

 private:
  double delta_;
};

class HeuristicSelector final : public Selector {
 public:
  SelectorKind kind() const override { return SelectorKind::Heuristic; }
  std::vector<SelectionResult> select(
      std::span<const SelectionRequest> requests) override;
};

struct LlmEndpointConfig {
  std::string base_url;        // e.g. http://localhost:8000 or .../v1
  std::string model_name;
  std::string api_key_env;     // env var holding the bearer token; empty = none
  double temperature = 0.0;
  int max_concurrent_requests = 4;
  double request_timeout_s = 30.0;
  int retry_limit = 2;         // re-asks on unparseable replies, and transport retries
  int backoff_base_ms = 1000;  // transport backoff: base * 2^attempt
};

// OpenAI-compatible chat-completions client. One request per vertex, retried
// per config; a vertex that never yields a usable label falls back to the
// mean of the base choices. Never throws out of select().
class LlmSelector final : public Selector {
 public:
  explicit LlmSelector(LlmEndpointConfig cfg, std::ostream* audit_log = nullptr);
  SelectorKind kind() const override { return SelectorKind::LLM; }
  std::vector<SelectionResult> select(
      std::span<const SelectionRequest> requests) override;

 private:
  SelectionResult select_one(const SelectionRequest& request);
  void log_event(const std::string& line);

  LlmEndpointConfig cfg_;
  std::string host_;         // scheme://authority
  std::string path_prefix_;  // any path baked into base_url
  std::ostream* audit_log_;
  std::mutex log_mutex_;
};

// Mean of the base (identity) choices — the fallback forecast.
std::vector<double> fallback_values(const ChoiceSet& cs);

}  // namespace leaf
