#include "leaf/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace leaf {

MetricsReport compute_metrics(const Tensor& pred, const Tensor& truth,
                              double mape_threshold) {
  if (!pred.same_shape(truth))
    throw std::invalid_argument("compute_metrics: shape mismatch");
  if (pred.rank() != 3)
    throw std::invalid_argument("compute_metrics: expected W x N x T_out");

  const int64_t windows = pred.dim(0), n = pred.dim(1), t_out = pred.dim(2);
  MetricsReport report;
  report.n_windows = windows;
  report.per_step_mae.assign(static_cast<size_t>(t_out), 0.0);

  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  int64_t ape_count = 0;
  const int64_t total = pred.numel();
  for (int64_t w = 0; w < windows; ++w)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t s = 0; s < t_out; ++s) {
        const int64_t idx = (w * n + i) * t_out + s;
        const double p = pred[idx], t = truth[idx];
        const double err = p - t;
        abs_sum += std::abs(err);
        sq_sum += err * err;
        report.per_step_mae[static_cast<size_t>(s)] += std::abs(err);
        if (t > mape_threshold) {
          ape_sum += std::abs(err) / t;
          ++ape_count;
        }
      }

  report.mae = abs_sum / static_cast<double>(total);
  report.rmse = std::sqrt(sq_sum / static_cast<double>(total));
  if (ape_count > 0)
    report.mape = ape_sum / static_cast<double>(ape_count) * 100.0;
  const double per_step_count = static_cast<double>(windows * n);
  for (double& v : report.per_step_mae) v /= per_step_count;
  return report;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mae"] = report.mae;
  j["rmse"] = report.rmse;
  if (report.mape)
    j["mape"] = *report.mape;
  else
    j["mape"] = nullptr;
  j["per_step_mae"] = report.per_step_mae;
  j["n_windows"] = report.n_windows;
  j["selector"] = {
      {"selections", report.selector.selections},
      {"fallbacks", report.selector.fallbacks},
      {"attempts", report.selector.attempts},
      {"fallback_rate", report.selector.fallback_rate()},
      {"mean_attempts", report.selector.mean_attempts()},
  };
  j["config"] = report.config_echo;
  return j;
}

}  // namespace leaf
