#include "leaf/selector.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "leaf/data.hpp"

namespace leaf {

const std::string& default_dataset_blurb() {
  static const std::string kBlurb =
      "The data comes from road traffic sensors that count passing vehicles "
      "in five-minute intervals. Each number is the vehicle count observed "
      "during one interval. Counts typically rise during morning and evening "
      "rush hours and fall overnight; weather, incidents, and special events "
      "can change the usual pattern.";
  return kBlurb;
}

namespace {

long long rounded(double v) { return std::llround(v); }

std::string join_rounded(std::span<const double> values) {
  std::ostringstream os;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) os << ", ";
    os << rounded(values[i]);
  }
  return os.str();
}

}  // namespace

std::string build_prompt(const PromptContext& ctx, const ChoiceSet& cs) {
  std::ostringstream os;
  os << "General information:\n" << ctx.dataset_blurb << "\n\n";

  os << "Spatial information:\n";
  os << "- Sensor ID: " << ctx.sensor_id << "\n";
  if (ctx.location_text && !ctx.location_text->empty())
    os << "- Location: " << *ctx.location_text << "\n";
  if (ctx.lat_lon)
    os << "- Coordinates: " << ctx.lat_lon->first << " latitude, "
       << ctx.lat_lon->second << " longitude\n";
  os << "\n";

  os << "Temporal information:\n";
  if (!ctx.history_times.empty())
    os << "- Historical data collected from "
       << format_human_time(ctx.history_times.front()) << " to "
       << format_human_time(ctx.history_times.back())
       << " at 5-minute intervals.\n";
  os << "- Forecast window: " << format_human_time(ctx.forecast_begin) << " to "
     << format_human_time(ctx.forecast_end) << ".\n";
  os << "- Special events: "
     << (ctx.events_text && !ctx.events_text->empty()
             ? *ctx.events_text
             : std::string("no special events reported"))
     << "\n\n";

  os << "Historical data (vehicles per 5 minutes):\n";
  for (size_t t = 0; t < ctx.history.size(); ++t) {
    if (t) os << ", ";
    os << "t-" << (ctx.history.size() - t) << ": " << rounded(ctx.history[t]);
  }
  os << "\n\n";

  os << "Task: candidate forecasts for the next " << cs.choices.size()
     << " options are listed below, each covering the forecast window in "
        "5-minute steps. Considering the historical data and the local "
        "context, select the option most likely to match the real future "
        "traffic flow.\n\n";

  for (const Choice& c : cs.choices)
    os << "Option " << c.label << ": " << join_rounded(c.values) << " ("
       << choice_provenance(c) << ")\n";

  os << "\nRespond with the single option number.";
  return os.str();
}

std::optional<int> parse_selection(const std::string& response, int k) {
  if (k < 1) throw std::invalid_argument("parse_selection: k must be >= 1");
  const size_t n = response.size();
  size_t i = 0;
  while (i < n) {
    if (std::isdigit(static_cast<unsigned char>(response[i]))) {
      size_t j = i;
      while (j < n && std::isdigit(static_cast<unsigned char>(response[j]))) ++j;
      if (j - i <= 9) {
        const int value = std::stoi(response.substr(i, j - i));
        if (value >= 1 && value <= k) return value;
      }
      i = j;
    } else {
      ++i;
    }
  }
  return std::nullopt;
}

std::string selector_kind_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::LLM: return "llm";
    case SelectorKind::Oracle: return "oracle";
    case SelectorKind::Heuristic: return "heuristic";
  }
  return "unknown";
}

double huber_distance(std::span<const double> a, std::span<const double> b,
                      double delta) {
  if (a.size() != b.size())
    throw std::invalid_argument("huber_distance: length mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("huber_distance: delta <= 0");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    const double ar = std::abs(r);
    acc += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
  }
  return acc / static_cast<double>(a.size());
}

std::vector<double> fallback_values(const ChoiceSet& cs) {
  std::vector<double> mean;
  int count = 0;
  for (const Choice& c : cs.choices) {
    if (c.transform != TransformKind::Identity) continue;
    if (mean.empty()) mean.assign(c.values.size(), 0.0);
    for (size_t i = 0; i < c.values.size(); ++i) mean[i] += c.values[i];
    ++count;
  }
  if (count == 0) throw std::invalid_argument("fallback_values: no base choices");
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

SelectionResult oracle_select(const ChoiceSet& cs, std::span<const double> truth,
                              double delta) {
  if (cs.choices.empty())
    throw std::invalid_argument("oracle_select: empty choice set");
  int best = 0;
  double best_d = huber_distance(cs.choices[0].values, truth, delta);
  for (size_t i = 1; i < cs.choices.size(); ++i) {
    const double d = huber_distance(cs.choices[i].values, truth, delta);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  SelectionResult r;
  r.vertex = cs.vertex;
  r.chosen_label = cs.choices[static_cast<size_t>(best)].label;
  r.selector_kind = SelectorKind::Oracle;
  r.attempts = 1;
  r.values = cs.choices[static_cast<size_t>(best)].values;
  return r;
}

SelectionResult heuristic_select(const ChoiceSet& cs,
                                 std::span<const double> history) {
  if (cs.choices.empty())
    throw std::invalid_argument("heuristic_select: empty choice set");
  if (history.empty())
    throw std::invalid_argument("heuristic_select: empty history");
  const double anchor = history.back();
  int best = 0;
  double best_d = std::abs(cs.choices[0].values.at(0) - anchor);
  for (size_t i = 1; i < cs.choices.size(); ++i) {
    const double d = std::abs(cs.choices[i].values.at(0) - anchor);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  SelectionResult r;
  r.vertex = cs.vertex;
  r.chosen_label = cs.choices[static_cast<size_t>(best)].label;
  r.selector_kind = SelectorKind::Heuristic;
  r.attempts = 1;
  r.values = cs.choices[static_cast<size_t>(best)].values;
  return r;
}

std::vector<SelectionResult> OracleSelector::select(
    std::span<const SelectionRequest> requests) {
  std::vector<SelectionResult> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    if (req.truth == nullptr)
      throw std::logic_error("OracleSelector: request carries no ground truth");
    out.push_back(oracle_select(*req.choices, *req.truth, delta_));
  }
  return out;
}

std::vector<SelectionResult> HeuristicSelector::select(
    std::span<const SelectionRequest> requests) {
  std::vector<SelectionResult> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    if (req.context == nullptr)
      throw std::logic_error("HeuristicSelector: request carries no context");
    out.push_back(heuristic_select(*req.choices, req.context->history));
  }
  return out;
}

namespace {

constexpr const char* kSystemPrompt =
    "You are a traffic forecasting expert. You are shown historical traffic "
    "flow readings for one road sensor and a numbered list of candidate "
    "forecasts. Select the single most plausible candidate. Always answer "
    "with the option number.";

constexpr const char* kClarification =
    "Your previous reply could not be interpreted. Respond with only the "
    "number of the chosen option.";

struct UrlParts {
  std::string host;  // scheme://authority
  std::string path_prefix;
};

UrlParts split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("llm base_url must start with http:// or https://");
  const auto path_start = base_url.find('/', scheme_end + 3);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.host = base_url;
  } else {
    parts.host = base_url.substr(0, path_start);
    parts.path_prefix = base_url.substr(path_start);
    while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/')
      parts.path_prefix.pop_back();
  }
  return parts;
}

}  // namespace

LlmSelector::LlmSelector(LlmEndpointConfig cfg, std::ostream* audit_log)
    : cfg_(std::move(cfg)), audit_log_(audit_log) {
  if (cfg_.retry_limit < 0)
    throw std::invalid_argument("llm retry_limit must be >= 0");
  if (cfg_.max_concurrent_requests < 1)
    throw std::invalid_argument("llm max_concurrent_requests must be >= 1");
  auto parts = split_base_url(cfg_.base_url);
  host_ = parts.host;
  path_prefix_ = parts.path_prefix;
}

void LlmSelector::log_event(const std::string& line) {
  if (audit_log_ == nullptr) return;
  std::lock_guard<std::mutex> lock(log_mutex_);
  (*audit_log_) << line << "\n";
}

SelectionResult LlmSelector::select_one(const SelectionRequest& request) {
  const ChoiceSet& cs = *request.choices;
  const int k = static_cast<int>(cs.choices.size());

  SelectionResult result;
  result.vertex = request.vertex;
  result.selector_kind = SelectorKind::LLM;

  httplib::Client client(host_);
  client.set_connection_timeout(static_cast<time_t>(cfg_.request_timeout_s), 0);
  client.set_read_timeout(static_cast<time_t>(cfg_.request_timeout_s), 0);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string path = path_prefix_ + "/v1/chat/completions";

  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", kSystemPrompt}});
  messages.push_back(
      {{"role", "user"}, {"content", build_prompt(*request.context, cs)}});

  for (int ask = 0; ask <= cfg_.retry_limit; ++ask) {
    nlohmann::json payload{{"model", cfg_.model_name},
                           {"messages", messages},
                           {"temperature", cfg_.temperature}};
    const std::string body = payload.dump();

    std::string content;
    bool got_content = false;
    for (int attempt = 0; attempt <= cfg_.retry_limit; ++attempt) {
      ++result.attempts;
      auto res = client.Post(path, headers, body, "application/json");
      nlohmann::json log{{"vertex", request.vertex},
                         {"attempt", result.attempts},
                         {"path", path}};
      if (res) {
        log["status"] = res->status;
        log["response"] = res->body;
      } else {
        log["transport_error"] = httplib::to_string(res.error());
      }
      log_event(log.dump());

      if (res && res->status == 200) {
        try {
          auto parsed = nlohmann::json::parse(res->body);
          content = parsed.at("choices").at(0).at("message").at("content")
                        .get<std::string>();
          got_content = true;
          break;
        } catch (const std::exception&) {
          // malformed completion body; treat like a transport fault
        }
      }
      if (attempt < cfg_.retry_limit)
        std::this_thread::sleep_for(std::chrono::milliseconds(
            static_cast<int64_t>(cfg_.backoff_base_ms) * (int64_t{1} << attempt)));
    }

    if (!got_content) break;  // endpoint unusable; fall back

    result.raw_response = content;
    if (auto label = parse_selection(content, k)) {
      result.chosen_label = *label;
      result.values = cs.choices[static_cast<size_t>(*label - 1)].values;
      return result;
    }
    messages.push_back({{"role", "assistant"}, {"content", content}});
    messages.push_back({{"role", "user"}, {"content", kClarification}});
  }

  result.fallback_used = true;
  result.chosen_label = 0;
  result.values = fallback_values(cs);
  return result;
}

std::vector<SelectionResult> LlmSelector::select(
    std::span<const SelectionRequest> requests) {
  std::vector<SelectionResult> results(requests.size());
  if (requests.empty()) return results;
  const size_t workers = std::min<size_t>(
      static_cast<size_t>(cfg_.max_concurrent_requests), requests.size());
  std::atomic<size_t> next{0};
  auto run = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      results[i] = select_one(requests[i]);
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace leaf
