#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrgym/envs.hpp"
#include "vrgym/mdp.hpp"

namespace vrgym::rl {

using Vec = std::vector<double>;

class RlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation { linear, tanh };

/// Fully connected net, tanh hidden layers. Parameters live in one flat
/// vector, layer by layer: W (out x in, row-major) then b.
class MLP {
 public:
  struct Cache {
    std::vector<Vec> act;  // act[0] = input, act[l + 1] = output of layer l
  };

  MLP() = default;
  /// He-style normal init from the seed; biases start at zero.
  MLP(std::vector<int> sizes, std::uint64_t seed, Activation output = Activation::linear);
  static MLP zeros(std::vector<int> sizes, Activation output = Activation::linear);

  const std::vector<int>& sizes() const { return sizes_; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  Activation output_activation() const { return output_; }
  std::size_t n_params() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, Cache& cache) const;
  /// Adds dL/dparams into `grad` (size n_params) and returns dL/dx.
  Vec backward(const Cache& cache, const Vec& dy, Vec& grad) const;

  nlohmann::json to_json() const;
  static MLP from_json(const nlohmann::json& j);

 private:
  std::vector<int> sizes_;
  Activation output_ = Activation::linear;
  Vec params_;
  std::vector<std::size_t> offsets_;  // start of each layer's W
};

class Adam {
 public:
  explicit Adam(std::size_t n = 0, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vec& params, const Vec& grad);
  double lr;

 private:
  double beta1_, beta2_, eps_;
  Vec m_, v_;
  std::uint64_t t_ = 0;
};

/// Scales `grad` down to at most `max_norm` (no-op when max_norm <= 0).
void clip_norm(Vec& grad, double max_norm);
/// target = tau * source + (1 - tau) * target.
void soft_update(MLP& target, const MLP& source, double tau);

/// Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a') over a shared tanh trunk.
class DuelingNet {
 public:
  struct Cache {
    MLP::Cache trunk, value, adv;
  };

  DuelingNet() = default;
  DuelingNet(int in_dim, int n_actions, const std::vector<int>& hidden, std::uint64_t seed);

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, Cache& cache) const;
  /// Advantage stream output, before aggregation.
  Vec advantages(const Vec& x) const;
  double value(const Vec& x) const;
  void backward(const Cache& cache, const Vec& dq, std::vector<Vec>& grads) const;

  std::vector<MLP*> parts() { return {&trunk, &value_head, &adv_head}; }
  std::vector<const MLP*> parts() const { return {&trunk, &value_head, &adv_head}; }
  nlohmann::json to_json() const;

  MLP trunk, value_head, adv_head;
};

/// Softmax of logits, numerically stable.
Vec softmax(const Vec& logits);
/// Gradient of -(adv * log pi(a) + beta * H(pi)) with respect to the logits.
Vec policy_logit_grad(const Vec& logits, int action, double advantage, double entropy_beta);

struct ActorCritic {
  MLP policy;  // logits
  MLP value;
  Vec probabilities(const Vec& x) const { return softmax(policy.forward(x)); }
};

/// Deterministic actor with outputs tanh-squashed into [low, high].
struct Ddpg {
  MLP actor;   // tanh output in [-1, 1]
  MLP critic;  // input (observation, action)
  Vec low, high;

  Vec act(const Vec& x) const;
  double q(const Vec& x, const Vec& a) const;
};

struct ReplayBuffer {
  struct Item {
    Vec s;
    int a = 0;
    Vec a_cont;
    double r = 0.0;
    Vec s2;
    bool terminal = false;
  };

  explicit ReplayBuffer(std::size_t capacity = 50000) : capacity(capacity) {}
  void push(Item item);
  std::size_t size() const { return items.size(); }
  /// Uniform sample with replacement.
  std::vector<const Item*> sample(std::size_t n, std::mt19937_64& rng) const;

  std::size_t capacity;
  std::vector<Item> items;
  std::size_t head = 0;  // next slot to overwrite once full
};

struct TrainConfig {
  int episodes = 1000;
  double gamma = 0.99;
  double lr = 1e-3;
  double tabular_lr = 0.1;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.3;     // of `episodes`
  std::optional<int> eps_decay_episodes;  // overrides the fraction
  int batch_size = 64;
  int target_sync = 500;  // steps
  std::uint64_t seed = 1;
  double noise_sigma = 0.1;  // DDPG, as a fraction of the action half-range
  double tau = 0.005;
  std::vector<int> hidden{64, 64};
  std::size_t replay_capacity = 50000;
  int warmup_steps = 1000;
  int train_every = 1;
  double entropy_beta = 0.01;
  double critic_lr = 1e-3;  // A2C / DDPG critic
  double grad_clip = 10.0;
  double q_init = 0.0;  // tabular
  /// Stop once the success rate over the last `stop_window` episodes reaches
  /// this value.
  std::optional<double> stop_at_success;
  int stop_window = 100;

  double epsilon(int episode) const;
  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainReport {
  Vec returns;
  std::vector<std::uint8_t> success;
  std::vector<int> steps;

  std::size_t episodes() const { return returns.size(); }
  void add(double ret, bool ok, int n);
  /// Trailing mean of returns over up to `window` episodes.
  Vec moving_average(int window = 100) const;
  double success_rate_last(int n = 100) const;
  std::string to_csv() const;
  bool operator==(const TrainReport&) const = default;
};

// ------------------------------------------------------------- tabular

struct TabularStep {
  int state = 0;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool terminal = false;  // done for a reason other than the step limit
};

class TabularTask {
 public:
  virtual ~TabularTask() = default;
  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  virtual int reset(std::uint64_t seed) = 0;
  virtual TabularStep step(int action) = 0;
};

/// Tabular view of a grid environment (state = its state_index()).
class EnvTask : public TabularTask {
 public:
  explicit EnvTask(envs::Environment& env);
  int n_states() const override { return env_.n_states(); }
  int n_actions() const override { return env_.action_space().n; }
  int reset(std::uint64_t seed) override;
  TabularStep step(int action) override;

 private:
  envs::Environment& env_;
};

/// Episodic task over a GridMDP: reward r(s') on entering s', episodes end on
/// terminal states or after step_limit steps. Starts are drawn from mdp.start.
class MdpTask : public TabularTask {
 public:
  MdpTask(GridMDP mdp, int step_limit, double step_reward = 0.0);
  int n_states() const override { return mdp_.n_states; }
  int n_actions() const override { return mdp_.n_actions; }
  int reset(std::uint64_t seed) override;
  TabularStep step(int action) override;
  const GridMDP& mdp() const { return mdp_; }

 private:
  GridMDP mdp_;
  int step_limit_;
  double step_reward_;
  int state_ = 0;
  int steps_ = 0;
};

struct QTable {
  int n_states = 0;
  int n_actions = 0;
  Vec q;
  double& at(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  /// Argmax with ties to the lowest action index.
  int greedy(int s) const;
  nlohmann::json to_json() const;
};

struct QResult {
  QTable table;
  TrainReport report;
};
QResult q_learning_train(TabularTask& task, const TrainConfig& config);

// ------------------------------------------------------------- deep

struct DqnResult {
  MLP net;
  TrainReport report;
};
struct DuelingResult {
  DuelingNet net;
  TrainReport report;
};
struct ActorCriticResult {
  ActorCritic model;
  TrainReport report;
};
struct DdpgResult {
  Ddpg model;
  TrainReport report;
};

DqnResult dqn_train(envs::Environment& env, const TrainConfig& config);
DuelingResult dueling_dqn_train(envs::Environment& env, const TrainConfig& config);
ActorCriticResult actor_critic_train(envs::Environment& env, const TrainConfig& config);
DdpgResult ddpg_train(envs::Environment& env, const TrainConfig& config);

/// Argmax with ties to the lowest index.
int argmax(const Vec& v);

// ------------------------------------------------------------- gradient checks

struct GradCheck {
  std::string name;
  std::size_t n_params = 0;
  double max_rel_error = 0.0;
};

/// |a - n| / max(|a| + |n|, floor) for analytic a and numeric n.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central finite-difference check of every trainable architecture's
/// analytic gradients on a random net and input drawn from `seed`.
std::vector<GradCheck> gradient_checks(std::uint64_t seed, double h = 1e-5);

}  // namespace vrgym::rl
