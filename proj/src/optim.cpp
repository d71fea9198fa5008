#include "leaf/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "leaf/kernels.hpp"

namespace leaf {

Adam::Adam(std::vector<Parameter*> params, Config cfg)
    : params_(std::move(params)), cfg_(cfg) {
  reset_state();
}

void Adam::reset_state() {
  state_.t = 0;
  state_.m.clear();
  state_.v.clear();
  for (const Parameter* p : params_) {
    state_.m.emplace_back(p->value.shape());
    state_.v.emplace_back(p->value.shape());
  }
}

void Adam::load_state(State s) {
  if (s.m.size() != params_.size() || s.v.size() != params_.size())
    throw std::invalid_argument("Adam::load_state: state does not match parameter list");
  state_ = std::move(s);
}

void Adam::step() {
  ++state_.t;
  const double bias1 = 1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(state_.t)));
  const double bias2 = 1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(state_.t)));
  const auto& k = kernels::active();
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    k.adam_update(p.value.data(), state_.m[i].data(), state_.v[i].data(),
                  p.grad.data(), p.value.storage().size(), cfg_.lr, cfg_.beta1,
                  cfg_.beta2, cfg_.eps, bias1, bias2);
    p.zero_grad();
  }
}

}  // namespace leaf
