#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "leaf/metrics.hpp"
#include "support.hpp"

using namespace leaf;
using leaf::test::make_rng;
using leaf::test::random_tensor;

TEST_CASE("perfect predictions give zero errors") {
  auto rng = make_rng(121);
  Tensor truth = random_tensor({3, 4, 5}, rng, 5.0, 100.0);
  MetricsReport r = compute_metrics(truth, truth);
  CHECK(r.mae == 0.0);
  CHECK(r.rmse == 0.0);
  REQUIRE(r.mape.has_value());
  CHECK(*r.mape == 0.0);
  CHECK(r.n_windows == 3);
  REQUIRE(r.per_step_mae.size() == 5);
  for (double v : r.per_step_mae) CHECK(v == 0.0);
}

TEST_CASE("constant offset on constant truth gives the analytic metrics") {
  Tensor truth = Tensor::full({2, 3, 4}, 10.0);
  Tensor pred = Tensor::full({2, 3, 4}, 11.0);
  MetricsReport r = compute_metrics(pred, truth);
  CHECK(r.mae == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.rmse == doctest::Approx(1.0).epsilon(1e-15));
  REQUIRE(r.mape.has_value());
  CHECK(*r.mape == doctest::Approx(10.0).epsilon(1e-13));
  for (double v : r.per_step_mae) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("MAPE masks truths at or below the threshold") {
  Tensor truth({1, 1, 4}, {0.0, 0.5, 1.0, 10.0});
  Tensor pred({1, 1, 4}, {5.0, 5.0, 5.0, 11.0});
  MetricsReport r = compute_metrics(pred, truth, 1.0);
  // only the t=10 entry passes the mask (1.0 is not strictly above threshold)
  REQUIRE(r.mape.has_value());
  CHECK(*r.mape == doctest::Approx(10.0).epsilon(1e-13));

  Tensor zeros({1, 1, 2}, {0.0, 0.0});
  Tensor p2({1, 1, 2}, {1.0, 2.0});
  MetricsReport r2 = compute_metrics(p2, zeros, 1.0);
  CHECK_FALSE(r2.mape.has_value());
}

TEST_CASE("per-step curve isolates the step that carries the error") {
  Tensor truth({2, 2, 3});
  Tensor pred = truth;
  // inject error only at step 1
  pred[0 * 6 + 0 * 3 + 1] = 2.0;
  pred[1 * 6 + 1 * 3 + 1] = -2.0;
  MetricsReport r = compute_metrics(pred, truth);
  CHECK(r.per_step_mae[0] == 0.0);
  CHECK(r.per_step_mae[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.per_step_mae[2] == 0.0);
}

TEST_CASE("shape mismatch is a contract violation") {
  Tensor a({1, 2, 3});
  Tensor b({1, 3, 2});
  CHECK_THROWS_AS(compute_metrics(a, b), std::invalid_argument);
}

TEST_CASE("report JSON carries the metrics and selector stats") {
  Tensor truth = Tensor::full({1, 2, 2}, 10.0);
  Tensor pred = Tensor::full({1, 2, 2}, 12.0);
  MetricsReport r = compute_metrics(pred, truth);
  r.selector.selections = 10;
  r.selector.fallbacks = 2;
  r.selector.attempts = 14;
  auto j = report_to_json(r);
  CHECK(j["mae"] == doctest::Approx(2.0));
  CHECK(j["selector"]["fallback_rate"] == doctest::Approx(0.2));
  CHECK(j["selector"]["mean_attempts"] == doctest::Approx(1.4));
  CHECK(j["per_step_mae"].size() == 2);
}
