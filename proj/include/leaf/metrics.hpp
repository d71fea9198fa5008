#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leaf/tensor.hpp"

namespace leaf {

struct SelectorStats {
  int64_t selections = 0;
  int64_t fallbacks = 0;
  int64_t attempts = 0;

  double fallback_rate() const {
    return selections > 0 ? static_cast<double>(fallbacks) / static_cast<double>(selections) : 0.0;
  }
  double mean_attempts() const {
    return selections > 0 ? static_cast<double>(attempts) / static_cast<double>(selections) : 0.0;
  }
};

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;        // percent; absent when every entry is masked
  std::vector<double> per_step_mae;  // length T_out
  int64_t n_windows = 0;
  SelectorStats selector;
  nlohmann::json config_echo;
};

// pred and truth are W x N x T_out. MAPE masks entries with truth below
// mape_threshold (vehicles).
MetricsReport compute_metrics(const Tensor& pred, const Tensor& truth,
                              double mape_threshold = 1.0);

nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace leaf
