#pragma once

#include <cstdint>
#include <vector>

#include "leaf/autodiff.hpp"

namespace leaf {

// Adam with bias correction. Moment state persists across step() calls;
// step() consumes and zeroes the parameter gradients.
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  struct State {
    std::vector<Tensor> m, v;
    int64_t t = 0;
  };

  Adam(std::vector<Parameter*> params, Config cfg);

  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t steps_taken() const { return state_.t; }

  State save_state() const { return state_; }
  void load_state(State s);
  void reset_state();

 private:
  std::vector<Parameter*> params_;
  Config cfg_;
  State state_;
};

}  // namespace leaf
