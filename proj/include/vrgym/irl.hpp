#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vrgym/mdp.hpp"

namespace vrgym::irl {

using Vec = std::vector<double>;

class IrlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Demo {
  std::vector<std::pair<int, int>> steps;  // (state, action)
  bool operator==(const Demo&) const = default;
};
using Demos = std::vector<Demo>;

/// Throws IrlError unless every (s, a) indexes into the MDP.
void validate_demos(const GridMDP& mdp, const Demos& demos);
/// Average over demos of sum_t discount^t phi(s_t) over the recorded states.
Vec feature_expectation(const GridMDP& mdp, const Demos& demos, double discount = 1.0);
std::string demos_to_jsonl(const Demos& demos);
Demos demos_from_jsonl(const std::string& text);

struct LinearReward {
  Vec theta;
  Vec state_reward(const GridMDP& mdp) const;
  nlohmann::json to_json(const GridMDP& mdp) const;
};

/// Per-state action distribution, row-major [s * n_actions + a].
struct SoftPolicy {
  int n_states = 0;
  int n_actions = 0;
  Vec prob;
  double p(int s, int a) const { return prob[static_cast<std::size_t>(s) * n_actions + a]; }
};

struct SoftVI {
  Vec value;
  Vec q;
  SoftPolicy policy;
};

/// `horizon` log-sum-exp backups from V = 0:
/// Q(s,a) = r(s') + gamma V(s'), V(s) = log sum_a exp Q(s,a). Terminal states
/// are absorbing like any other.
SoftVI soft_value_iteration(const GridMDP& mdp, const Vec& reward, int horizon);

/// D = sum_{t < horizon} D_t with D_0 = start and D_{t+1} pushed through
/// the policy and transitions.
Vec expected_visitation(const GridMDP& mdp, const SoftPolicy& policy, const Vec& start, int horizon);

struct ValueResult {
  Vec value;
  Vec q;
  std::vector<int> policy;  // greedy, ties to the lowest action index
  int iterations = 0;
  double residual = 0.0;  // max |T V - V| of the returned values
};

/// Exact planner. Q(s,a) = r(s') + gamma V(s'), terminal states have value 0
/// (the episode ends on entering them). Starts from the pessimistic bound
/// min(r) / (1 - gamma) unless `init` is given, and stops at residual <= tol.
ValueResult value_iteration(const GridMDP& mdp, const Vec& reward, double tol = 1e-9,
                            const Vec* init = nullptr);
/// Value of a fixed deterministic policy under `reward`.
Vec policy_value(const GridMDP& mdp, const Vec& reward, const std::vector<int>& policy, double tol = 1e-12);
/// Actions within `tol` of the best Q in state s.
std::vector<int> argmax_set(const ValueResult& v, int n_actions, int s, double tol = 1e-9);

/// Expected value difference under the true reward between the true optimal
/// policy and the learned reward's greedy policy, weighted by mdp.start.
double evd(const GridMDP& mdp, const Vec& true_reward, const Vec& learned_reward);
/// Optimal start value sum_s start(s) V*(s).
double start_value(const GridMDP& mdp, const Vec& reward);
/// Share of `states` where the learned greedy action is in the true argmax set.
double action_agreement(const GridMDP& mdp, const Vec& true_reward, const Vec& learned_reward,
                        const std::vector<int>& states);
/// Distinct states appearing in the demos, ascending.
std::vector<int> visited_states(const Demos& demos);

struct MaxEntConfig {
  int iterations = 200;
  double lr = 0.1;
  double lr_decay = 0.99;
  double grad_tol = 1e-4;
  std::optional<int> horizon;  // default 2 * (width + height - 2)
  double theta_bound = 1e3;
  bool operator==(const MaxEntConfig&) const = default;
};

struct MaxEntDiagnostics {
  std::vector<double> grad_norms;  // one per evaluated theta, the last is the returned one
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  int horizon = 0;
  nlohmann::json to_json() const;
};

struct MaxEntResult {
  LinearReward reward;
  MaxEntDiagnostics diagnostics;
};

int default_horizon(const GridMDP& mdp);
/// Empirical minus expected feature counts at theta. Demos shorter than the
/// horizon are padded with the state their last action leads to.
Vec maxent_gradient(const GridMDP& mdp, const Demos& demos, const Vec& theta, int horizon);
MaxEntResult maxent_irl(const GridMDP& mdp, const Demos& demos, const MaxEntConfig& config = {});

struct PolicyWalkConfig {
  double delta = 0.05;
  double alpha = 10.0;
  int samples = 5000;  // chain length, burn-in included
  int burn_in = 1000;
  double low = -1.0;
  double high = 1.0;
  int thin = 1;
  std::uint64_t seed = 1;
};

struct PosteriorSamples {
  std::vector<Vec> rewards;  // kept samples, per-state
  std::vector<double> log_likelihood;
  int burn_in = 0;
  double acceptance_rate = 0.0;
  Vec mean;  // posterior mean, or the initial reward when nothing was kept
  nlohmann::json to_json() const;
};

/// Normalized Boltzmann log-likelihood sum_(s,a) [alpha Q*(s,a) - log sum_b exp(alpha Q*(s,b))].
double boltzmann_log_likelihood(const ValueResult& v, int n_actions, const Demos& demos, double alpha);
/// PolicyWalk over per-state rewards on the delta grid inside [low, high],
/// starting from the all-zero reward.
PosteriorSamples bayesian_irl_policywalk(const GridMDP& mdp, const Demos& demos, const PolicyWalkConfig& config = {});

// ------------------------------------------------------------- demo sources

/// Trajectories of exactly `horizon` steps sampled from a soft policy.
Demos sample_soft_demos(const GridMDP& mdp, const SoftPolicy& policy, int n, int horizon, std::mt19937_64& rng);
/// Greedy optimal trajectories under `reward` from start-distribution draws,
/// ending on entering a terminal state or after max_len steps.
Demos sample_optimal_demos(const GridMDP& mdp, const Vec& reward, int n, int max_len, std::mt19937_64& rng);

/// Snaps (x, y) samples to MDP cells and infers moves between consecutive
/// distinct cells; gaps are filled one cell at a time, the axis with the larger
/// displacement first. Samples outside every state are skipped.
Demo demo_from_footprint(const GridMDP& mdp, const std::vector<std::pair<double, double>>& xy);

}  // namespace vrgym::irl
