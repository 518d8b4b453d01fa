#include <algorithm>
#include <cmath>
#include <sstream>

#include "vrgym/rl.hpp"

namespace vrgym::rl {

using nlohmann::json;

namespace {

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(episode) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool should_stop(const TrainConfig& cfg, const TrainReport& report) {
  return cfg.stop_at_success && static_cast<int>(report.episodes()) >= cfg.stop_window &&
         report.success_rate_last(cfg.stop_window) >= *cfg.stop_at_success;
}

// Done before the step limit means a true terminal state; done at the limit
// is a truncation and still bootstraps.
bool is_terminal(const envs::Environment& env, const envs::StepResult& r) {
  return r.done && (r.info.success || env.steps() < env.step_limit());
}

void require_discrete(const envs::Environment& env) {
  if (!env.action_space().discrete()) throw RlError("algorithm needs a discrete action space");
}

void check_obs(const envs::Environment& env, const Vec& obs) {
  if (static_cast<int>(obs.size()) != env.obs_dim()) throw RlError("observation dimension mismatch");
}

void clip_global(std::vector<Vec>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Vec& g : grads)
    for (double v : g) sq += v * v;
  double n = std::sqrt(sq);
  if (n <= max_norm) return;
  for (Vec& g : grads)
    for (double& v : g) v *= max_norm / n;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

// Adapts a plain MLP to the DuelingNet interface used by the DQN loop.
struct PlainQ {
  MLP net;
  using Cache = MLP::Cache;
  Vec forward(const Vec& x) const { return net.forward(x); }
  Vec forward(const Vec& x, Cache& c) const { return net.forward(x, c); }
  void backward(const Cache& c, const Vec& dq, std::vector<Vec>& grads) const {
    grads.resize(1);
    net.backward(c, dq, grads[0]);
  }
  std::vector<MLP*> parts() { return {&net}; }
};

template <class Net>
TrainReport train_q_network(envs::Environment& env, const TrainConfig& cfg, Net& online) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_actions = env.action_space().n;
  std::uniform_int_distribution<int> any_action(0, n_actions - 1);
  Net target = online;
  std::vector<Adam> opt;
  for (MLP* p : online.parts()) opt.emplace_back(p->n_params(), cfg.lr);
  ReplayBuffer buffer(cfg.replay_capacity);
  TrainReport report;
  std::vector<Vec> grads;
  typename Net::Cache cache;
  long long total_steps = 0;
  const std::size_t ready = std::max<std::size_t>(cfg.batch_size, cfg.warmup_steps);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon(ep);
    Vec obs = env.reset(episode_seed(cfg.seed, ep));
    check_obs(env, obs);
    envs::StepResult r;
    while (!env.done()) {
      int a = unit(rng) < eps ? any_action(rng) : argmax(online.forward(obs));
      r = env.step(a);
      buffer.push({obs, a, {}, r.reward, r.observation, is_terminal(env, r)});
      obs = r.observation;
      ++total_steps;

      if (buffer.size() >= ready && total_steps % cfg.train_every == 0) {
        grads.assign(online.parts().size(), Vec{});
        auto parts = online.parts();
        for (std::size_t i = 0; i < parts.size(); ++i) grads[i].assign(parts[i]->n_params(), 0.0);
        const double scale = 1.0 / cfg.batch_size;
        for (const auto* item : buffer.sample(cfg.batch_size, rng)) {
          double y = item->r;
          if (!item->terminal) {
            Vec q2 = target.forward(item->s2);
            y += cfg.gamma * *std::max_element(q2.begin(), q2.end());
          }
          Vec q = online.forward(item->s, cache);
          Vec dq(q.size(), 0.0);
          dq[item->a] = (q[item->a] - y) * scale;
          online.backward(cache, dq, grads);
        }
        clip_global(grads, cfg.grad_clip);
        for (std::size_t i = 0; i < parts.size(); ++i) opt[i].step(parts[i]->params(), grads[i]);
      }
      if (total_steps % cfg.target_sync == 0) target = online;
    }
    report.add(env.episode_return(), r.info.success, env.steps());
    if (should_stop(cfg, report)) break;
  }
  return report;
}

}  // namespace

double TrainConfig::epsilon(int episode) const {
  int decay = eps_decay_episodes.value_or(
      std::max(1, static_cast<int>(std::lround(eps_decay_fraction * episodes))));
  if (decay <= 0 || episode >= decay) return eps_end;
  return eps_start + (eps_end - eps_start) * static_cast<double>(episode) / decay;
}

void TrainConfig::validate() const {
  if (episodes <= 0) throw RlError("episodes must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw RlError("gamma must lie in (0, 1)");
  if (!(lr > 0.0) || !(critic_lr > 0.0)) throw RlError("learning rates must be positive");
  if (!(tabular_lr >= 0.0 && tabular_lr <= 1.0)) throw RlError("tabular learning rate must lie in [0, 1]");
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0)
    throw RlError("epsilon must lie in [0, 1]");
  if (eps_decay_episodes && *eps_decay_episodes < 0) throw RlError("epsilon decay must be non-negative");
  if (batch_size <= 0 || target_sync <= 0 || train_every <= 0) throw RlError("batch, sync and train intervals must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw RlError("tau must lie in (0, 1]");
  if (noise_sigma < 0.0 || entropy_beta < 0.0) throw RlError("noise and entropy weights must be non-negative");
  if (replay_capacity == 0) throw RlError("replay capacity must be positive");
  if (hidden.empty()) throw RlError("at least one hidden layer is required");
  if (stop_window <= 0) throw RlError("stop window must be positive");
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.episodes = j.value("episodes", c.episodes);
    c.gamma = j.value("gamma", c.gamma);
    c.lr = j.value("lr", c.lr);
    c.tabular_lr = j.value("tabular_lr", c.tabular_lr);
    c.eps_start = j.value("eps_start", c.eps_start);
    c.eps_end = j.value("eps_end", c.eps_end);
    c.eps_decay_fraction = j.value("eps_decay_fraction", c.eps_decay_fraction);
    if (j.contains("eps_decay_episodes")) c.eps_decay_episodes = j["eps_decay_episodes"].get<int>();
    c.batch_size = j.value("batch_size", c.batch_size);
    c.target_sync = j.value("target_sync", c.target_sync);
    c.seed = j.value("seed", c.seed);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.tau = j.value("tau", c.tau);
    c.hidden = j.value("hidden", c.hidden);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.train_every = j.value("train_every", c.train_every);
    c.entropy_beta = j.value("entropy_beta", c.entropy_beta);
    c.critic_lr = j.value("critic_lr", c.critic_lr);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.q_init = j.value("q_init", c.q_init);
    if (j.contains("stop_at_success")) c.stop_at_success = j["stop_at_success"].get<double>();
    c.stop_window = j.value("stop_window", c.stop_window);
  } catch (const json::exception& e) {
    throw RlError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

void TrainReport::add(double ret, bool ok, int n) {
  returns.push_back(ret);
  success.push_back(ok ? 1 : 0);
  steps.push_back(n);
}

Vec TrainReport::moving_average(int window) const {
  Vec out(returns.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i];
    if (i >= static_cast<std::size_t>(window)) sum -= returns[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

double TrainReport::success_rate_last(int n) const {
  if (success.empty() || n <= 0) return 0.0;
  std::size_t k = std::min<std::size_t>(n, success.size());
  int hits = 0;
  for (std::size_t i = success.size() - k; i < success.size(); ++i) hits += success[i];
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "episode,return,success,steps,ma100\n";
  Vec ma = moving_average(100);
  for (std::size_t i = 0; i < returns.size(); ++i)
    out << i << ',' << returns[i] << ',' << int(success[i]) << ',' << steps[i] << ',' << ma[i] << '\n';
  return out.str();
}

// ------------------------------------------------------------- tabular

EnvTask::EnvTask(envs::Environment& env) : env_(env) {
  require_discrete(env);
  if (env.n_states() <= 0) throw RlError("environment has no tabular state");
}

int EnvTask::reset(std::uint64_t seed) {
  env_.reset(seed);
  return env_.state_index().value();
}

TabularStep EnvTask::step(int action) {
  auto r = env_.step(action);
  auto s = env_.state_index();
  if (!s) throw RlError("environment left its tabular state space");
  return {*s, r.reward, r.done, r.info.success, is_terminal(env_, r)};
}

MdpTask::MdpTask(GridMDP mdp, int step_limit, double step_reward)
    : mdp_(std::move(mdp)), step_limit_(step_limit), step_reward_(step_reward) {
  mdp_.validate();
  if (step_limit_ <= 0) throw RlError("step limit must be positive");
}

int MdpTask::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(mdp_.start.begin(), mdp_.start.end());
  state_ = pick(rng);
  steps_ = 0;
  return state_;
}

TabularStep MdpTask::step(int action) {
  if (action < 0 || action >= mdp_.n_actions) throw RlError("action out of range");
  state_ = mdp_.succ(state_, action);
  ++steps_;
  bool terminal = mdp_.terminal[state_] != 0;
  return {state_, mdp_.reward[state_] + step_reward_, terminal || steps_ >= step_limit_, terminal, terminal};
}

int QTable::greedy(int s) const {
  const double* row = q.data() + static_cast<std::size_t>(s) * n_actions;
  return static_cast<int>(std::max_element(row, row + n_actions) - row);
}

json QTable::to_json() const { return {{"n_states", n_states}, {"n_actions", n_actions}, {"q", q}}; }

QResult q_learning_train(TabularTask& task, const TrainConfig& cfg) {
  cfg.validate();
  QResult out;
  QTable& t = out.table;
  t.n_states = task.n_states();
  t.n_actions = task.n_actions();
  t.q.assign(static_cast<std::size_t>(t.n_states) * t.n_actions, cfg.q_init);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, t.n_actions - 1);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon(ep);
    int s = task.reset(episode_seed(cfg.seed, ep));
    double ret = 0.0;
    int n = 0;
    TabularStep st;
    do {
      int a = unit(rng) < eps ? any_action(rng) : t.greedy(s);
      st = task.step(a);
      double target = st.reward;
      if (!st.terminal) target += cfg.gamma * t.at(st.state, t.greedy(st.state));
      t.at(s, a) += cfg.tabular_lr * (target - t.at(s, a));
      ret += st.reward;
      ++n;
      s = st.state;
    } while (!st.done);
    out.report.add(ret, st.success, n);
    if (should_stop(cfg, out.report)) break;
  }
  return out;
}

// ------------------------------------------------------------- deep

DqnResult dqn_train(envs::Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  require_discrete(env);
  PlainQ q{MLP(layer_sizes(env.obs_dim(), cfg.hidden, env.action_space().n), cfg.seed)};
  TrainReport report = train_q_network(env, cfg, q);
  return {std::move(q.net), std::move(report)};
}

DuelingResult dueling_dqn_train(envs::Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  require_discrete(env);
  DuelingNet net(env.obs_dim(), env.action_space().n, cfg.hidden, cfg.seed);
  TrainReport report = train_q_network(env, cfg, net);
  return {std::move(net), std::move(report)};
}

ActorCriticResult actor_critic_train(envs::Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  require_discrete(env);
  const int n_actions = env.action_space().n;
  ActorCriticResult out;
  MLP& policy = out.model.policy;
  MLP& value = out.model.value;
  policy = MLP(layer_sizes(env.obs_dim(), cfg.hidden, n_actions), cfg.seed);
  value = MLP(layer_sizes(env.obs_dim(), cfg.hidden, 1), cfg.seed + 1);
  Adam popt(policy.n_params(), cfg.lr), vopt(value.n_params(), cfg.critic_lr);
  std::mt19937_64 rng(cfg.seed);
  MLP::Cache pc, vc;
  Vec pg, vg;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Vec obs = env.reset(episode_seed(cfg.seed, ep));
    check_obs(env, obs);
    envs::StepResult r;
    while (!env.done()) {
      Vec logits = policy.forward(obs, pc);
      Vec p = softmax(logits);
      int a = std::discrete_distribution<int>(p.begin(), p.end())(rng);
      r = env.step(a);
      double v = value.forward(obs, vc)[0];
      double y = r.reward;
      if (!is_terminal(env, r)) y += cfg.gamma * value.forward(r.observation)[0];
      double delta = y - v;

      vg.assign(value.n_params(), 0.0);
      value.backward(vc, {-delta}, vg);
      clip_norm(vg, cfg.grad_clip);
      vopt.step(value.params(), vg);

      pg.assign(policy.n_params(), 0.0);
      policy.backward(pc, policy_logit_grad(logits, a, delta, cfg.entropy_beta), pg);
      clip_norm(pg, cfg.grad_clip);
      popt.step(policy.params(), pg);
      obs = r.observation;
    }
    out.report.add(env.episode_return(), r.info.success, env.steps());
    if (should_stop(cfg, out.report)) break;
  }
  return out;
}

DdpgResult ddpg_train(envs::Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  auto space = env.action_space();
  if (space.discrete() || space.low.empty() || space.low.size() != space.high.size())
    throw RlError("DDPG needs a bounded continuous action space");
  const int obs_dim = env.obs_dim();
  const int adim = static_cast<int>(space.low.size());
  DdpgResult out;
  Ddpg& m = out.model;
  m.low = space.low;
  m.high = space.high;
  m.actor = MLP(layer_sizes(obs_dim, cfg.hidden, adim), cfg.seed, Activation::tanh);
  m.critic = MLP(layer_sizes(obs_dim + adim, cfg.hidden, 1), cfg.seed + 1);
  Ddpg target = m;
  Adam aopt(m.actor.n_params(), cfg.lr), copt(m.critic.n_params(), cfg.critic_lr);
  ReplayBuffer buffer(cfg.replay_capacity);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t ready = std::max<std::size_t>(cfg.batch_size, cfg.warmup_steps);
  MLP::Cache ac, cc;
  Vec ag, cg, scratch;
  Vec half(adim);
  for (int i = 0; i < adim; ++i) half[i] = 0.5 * (m.high[i] - m.low[i]);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Vec obs = env.reset(episode_seed(cfg.seed, ep));
    check_obs(env, obs);
    envs::StepResult r;
    while (!env.done()) {
      Vec a = m.act(obs);
      for (int i = 0; i < adim; ++i)
        a[i] = std::clamp(a[i] + cfg.noise_sigma * half[i] * noise(rng), m.low[i], m.high[i]);
      r = env.step(a);
      buffer.push({obs, 0, a, r.reward, r.observation, is_terminal(env, r)});
      obs = r.observation;
      if (buffer.size() < ready) continue;

      const auto batch = buffer.sample(cfg.batch_size, rng);
      const double scale = 1.0 / cfg.batch_size;
      cg.assign(m.critic.n_params(), 0.0);
      for (const auto* item : batch) {
        double y = item->r;
        if (!item->terminal) y += cfg.gamma * target.q(item->s2, target.act(item->s2));
        Vec in = item->s;
        in.insert(in.end(), item->a_cont.begin(), item->a_cont.end());
        double q = m.critic.forward(in, cc)[0];
        m.critic.backward(cc, {(q - y) * scale}, cg);
      }
      clip_norm(cg, cfg.grad_clip);
      copt.step(m.critic.params(), cg);

      ag.assign(m.actor.n_params(), 0.0);
      for (const auto* item : batch) {
        Vec u = m.actor.forward(item->s, ac);
        Vec in = item->s;
        for (int i = 0; i < adim; ++i) in.push_back(0.5 * (m.high[i] + m.low[i]) + half[i] * u[i]);
        m.critic.forward(in, cc);
        scratch.assign(m.critic.n_params(), 0.0);
        Vec dx = m.critic.backward(cc, {-scale}, scratch);
        Vec du(adim);
        for (int i = 0; i < adim; ++i) du[i] = dx[obs_dim + i] * half[i];
        m.actor.backward(ac, du, ag);
      }
      clip_norm(ag, cfg.grad_clip);
      aopt.step(m.actor.params(), ag);

      soft_update(target.actor, m.actor, cfg.tau);
      soft_update(target.critic, m.critic, cfg.tau);
    }
    out.report.add(env.episode_return(), r.info.success, env.steps());
    if (should_stop(cfg, out.report)) break;
  }
  return out;
}

}  // namespace vrgym::rl
