#pragma once

// Single-state environments with known optima, shared by tests.

#include <vector>

#include "vrgym/envs.hpp"

namespace toy {

using vrgym::SceneGraph;
using vrgym::envs::ActionSpace;
using vrgym::envs::Environment;
using vrgym::envs::StepResult;

inline const SceneGraph& empty_scene() {
  static const SceneGraph s;
  return s;
}

/// One pull per episode; success means pulling the best arm.
class Bandit : public Environment {
 public:
  explicit Bandit(std::vector<double> rewards) : rewards_(std::move(rewards)) {
    for (std::size_t i = 1; i < rewards_.size(); ++i)
      if (rewards_[i] > rewards_[best_]) best_ = static_cast<int>(i);
  }
  std::vector<double> reset(std::uint64_t) override {
    begin_episode();
    return {1.0};
  }
  StepResult step(int a) override {
    check_running();
    StepResult r{{1.0}, rewards_.at(a), true, {}};
    r.info.success = a == best_;
    account(r);
    return r;
  }
  int obs_dim() const override { return 1; }
  ActionSpace action_space() const override { return {static_cast<int>(rewards_.size()), {}, {}}; }
  int step_limit() const override { return 10; }
  std::optional<int> state_index() const override { return 0; }
  int n_states() const override { return 1; }
  const SceneGraph& scene() const override { return empty_scene(); }

 private:
  std::vector<double> rewards_;
  int best_ = 0;
};

/// One continuous action a in [-1, 1] with reward a - a^2, maximised at 0.5.
class Parabola : public Environment {
 public:
  std::vector<double> reset(std::uint64_t) override {
    begin_episode();
    return {1.0};
  }
  StepResult step(const std::vector<double>& a) override {
    check_running();
    StepResult r{{1.0}, a.at(0) - a[0] * a[0], true, {}};
    r.info.success = std::abs(a[0] - 0.5) < 0.1;
    account(r);
    return r;
  }
  int obs_dim() const override { return 1; }
  ActionSpace action_space() const override { return {0, {-1.0}, {1.0}}; }
  int step_limit() const override { return 10; }
  const SceneGraph& scene() const override { return empty_scene(); }
};

}  // namespace toy
