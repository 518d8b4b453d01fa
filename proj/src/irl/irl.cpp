#include "vrgym/irl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vrgym::irl {

using nlohmann::json;

namespace {

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Below this the iteration only shuffles rounding error.
bool at_rounding_floor(double residual, const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return residual <= 16 * std::numeric_limits<double>::epsilon() * m;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_reward(const GridMDP& mdp, const Vec& reward) {
  if (static_cast<int>(reward.size()) != mdp.n_states) throw IrlError("reward has the wrong length");
  for (double r : reward)
    if (!std::isfinite(r)) throw IrlError("reward is not finite");
}

// Q(s, a) = r(s') + gamma V(s') over the whole table.
void backup(const GridMDP& mdp, const Vec& reward, const Vec& value, Vec& q) {
  q.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      int t = mdp.succ(s, a);
      q[static_cast<std::size_t>(s) * mdp.n_actions + a] = reward[t] + mdp.gamma * value[t];
    }
}

int greedy_action(const double* row, int n) {
  double best = *std::max_element(row, row + n);
  double tol = 1e-12 * std::max(1.0, std::abs(best));
  for (int a = 0; a < n; ++a)
    if (row[a] >= best - tol) return a;
  return 0;
}

// Recorded states of a demo, padded to `horizon` with the state its last
// action leads to.
std::vector<int> padded_states(const GridMDP& mdp, const Demo& d, int horizon) {
  std::vector<int> out;
  out.reserve(horizon);
  for (const auto& [s, a] : d.steps) {
    if (static_cast<int>(out.size()) == horizon) break;
    out.push_back(s);
  }
  const auto& [s_last, a_last] = d.steps.back();
  const int pad = mdp.succ(s_last, a_last);
  while (static_cast<int>(out.size()) < horizon) out.push_back(pad);
  return out;
}

}  // namespace

void validate_demos(const GridMDP& mdp, const Demos& demos) {
  for (const Demo& d : demos)
    for (const auto& [s, a] : d.steps)
      if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
        throw IrlError("demo step (" + std::to_string(s) + ", " + std::to_string(a) + ") is outside the MDP");
}

Vec feature_expectation(const GridMDP& mdp, const Demos& demos, double discount) {
  validate_demos(mdp, demos);
  Vec mu(mdp.feature_dim, 0.0);
  if (demos.empty()) return mu;
  for (const Demo& d : demos) {
    double w = 1.0;
    for (const auto& [s, a] : d.steps) {
      const double* f = mdp.phi(s);
      for (int k = 0; k < mdp.feature_dim; ++k) mu[k] += w * f[k];
      w *= discount;
    }
  }
  for (double& m : mu) m /= static_cast<double>(demos.size());
  return mu;
}

std::string demos_to_jsonl(const Demos& demos) {
  std::string out;
  for (const Demo& d : demos) {
    json steps = json::array();
    for (const auto& [s, a] : d.steps) steps.push_back({s, a});
    out += json{{"traj", steps}}.dump();
    out += '\n';
  }
  return out;
}

Demos demos_from_jsonl(const std::string& text) {
  Demos demos;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Demo d;
      for (const auto& p : j.at("traj")) d.steps.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
      demos.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw IrlError("demos line " + std::to_string(n) + ": " + e.what());
    }
  }
  return demos;
}

Vec LinearReward::state_reward(const GridMDP& mdp) const {
  if (static_cast<int>(theta.size()) != mdp.feature_dim) throw IrlError("theta does not match the feature dimension");
  Vec r(mdp.n_states, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    const double* f = mdp.phi(s);
    for (int k = 0; k < mdp.feature_dim; ++k) r[s] += theta[k] * f[k];
  }
  return r;
}

json LinearReward::to_json(const GridMDP& mdp) const { return {{"theta", theta}, {"reward", state_reward(mdp)}}; }

SoftVI soft_value_iteration(const GridMDP& mdp, const Vec& reward, int horizon) {
  check_reward(mdp, reward);
  if (horizon < 1) throw IrlError("horizon must be at least 1");
  const int A = mdp.n_actions;
  SoftVI out;
  out.value.assign(mdp.n_states, 0.0);
  for (int k = 0; k < horizon; ++k) {
    backup(mdp, reward, out.value, out.q);
    for (int s = 0; s < mdp.n_states; ++s) {
      const double* row = out.q.data() + static_cast<std::size_t>(s) * A;
      double m = *std::max_element(row, row + A);
      double z = 0.0;
      for (int a = 0; a < A; ++a) z += std::exp(row[a] - m);
      out.value[s] = m + std::log(z);
    }
  }
  SoftPolicy& p = out.policy;
  p.n_states = mdp.n_states;
  p.n_actions = A;
  p.prob.resize(out.q.size());
  for (int s = 0; s < mdp.n_states; ++s) {
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      std::size_t i = static_cast<std::size_t>(s) * A + a;
      z += p.prob[i] = std::exp(out.q[i] - out.value[s]);
    }
    for (int a = 0; a < A; ++a) p.prob[static_cast<std::size_t>(s) * A + a] /= z;  // absorbs rounding
  }
  return out;
}

Vec expected_visitation(const GridMDP& mdp, const SoftPolicy& policy, const Vec& start, int horizon) {
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw IrlError("policy does not match the MDP");
  if (static_cast<int>(start.size()) != mdp.n_states) throw IrlError("start distribution has the wrong length");
  if (horizon < 1) throw IrlError("horizon must be at least 1");
  Vec d = start, total = start, next(mdp.n_states);
  for (int t = 1; t < horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (d[s] == 0.0) continue;
      for (int a = 0; a < mdp.n_actions; ++a) next[mdp.succ(s, a)] += d[s] * policy.p(s, a);
    }
    d.swap(next);
    for (int s = 0; s < mdp.n_states; ++s) total[s] += d[s];
  }
  return total;
}

ValueResult value_iteration(const GridMDP& mdp, const Vec& reward, double tol, const Vec* init) {
  check_reward(mdp, reward);
  if (!(mdp.gamma < 1.0)) throw IrlError("value iteration needs gamma < 1");
  const int A = mdp.n_actions;
  ValueResult out;
  if (init) {
    if (static_cast<int>(init->size()) != mdp.n_states) throw IrlError("initial values have the wrong length");
    out.value = *init;
  } else {
    double lo = std::min(0.0, *std::min_element(reward.begin(), reward.end()));
    out.value.assign(mdp.n_states, lo / (1.0 - mdp.gamma));
  }
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.terminal[s]) out.value[s] = 0.0;
  Vec next(mdp.n_states);
  for (;;) {
    backup(mdp, reward, out.value, out.q);
    for (int s = 0; s < mdp.n_states; ++s) {
      const double* row = out.q.data() + static_cast<std::size_t>(s) * A;
      next[s] = mdp.terminal[s] ? 0.0 : *std::max_element(row, row + A);
    }
    out.residual = max_abs_diff(next, out.value);
    out.value.swap(next);
    ++out.iterations;
    // The residual of the returned values is at most gamma times this step.
    if (out.residual * mdp.gamma <= tol || at_rounding_floor(out.residual, out.value)) break;
  }
  backup(mdp, reward, out.value, out.q);
  out.residual = 0.0;
  out.policy.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const double* row = out.q.data() + static_cast<std::size_t>(s) * A;
    double tv = mdp.terminal[s] ? 0.0 : *std::max_element(row, row + A);
    out.residual = std::max(out.residual, std::abs(tv - out.value[s]));
    out.policy[s] = greedy_action(row, A);
  }
  return out;
}

Vec policy_value(const GridMDP& mdp, const Vec& reward, const std::vector<int>& policy, double tol) {
  check_reward(mdp, reward);
  if (static_cast<int>(policy.size()) != mdp.n_states) throw IrlError("policy has the wrong length");
  Vec v(mdp.n_states, 0.0), next(mdp.n_states);
  for (;;) {
    for (int s = 0; s < mdp.n_states; ++s) {
      int t = mdp.succ(s, policy[s]);
      next[s] = mdp.terminal[s] ? 0.0 : reward[t] + mdp.gamma * v[t];
    }
    double r = max_abs_diff(next, v);
    v.swap(next);
    if (r * mdp.gamma <= tol || at_rounding_floor(r, v)) break;
  }
  return v;
}

std::vector<int> argmax_set(const ValueResult& v, int n_actions, int s, double tol) {
  const double* row = v.q.data() + static_cast<std::size_t>(s) * n_actions;
  double best = *std::max_element(row, row + n_actions);
  std::vector<int> out;
  for (int a = 0; a < n_actions; ++a)
    if (row[a] >= best - tol * std::max(1.0, std::abs(best))) out.push_back(a);
  return out;
}

// Metrics plan tighter than the default so their own error stays far below
// the 1e-9 scale at which they are compared.
constexpr double kMetricTol = 1e-13;

double start_value(const GridMDP& mdp, const Vec& reward) {
  ValueResult v = value_iteration(mdp, reward, kMetricTol);
  return std::inner_product(mdp.start.begin(), mdp.start.end(), v.value.begin(), 0.0);
}

double evd(const GridMDP& mdp, const Vec& true_reward, const Vec& learned_reward) {
  ValueResult opt = value_iteration(mdp, true_reward, kMetricTol);
  ValueResult learned = value_iteration(mdp, learned_reward);
  Vec v = policy_value(mdp, true_reward, learned.policy, kMetricTol);
  double gap = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) gap += mdp.start[s] * (opt.value[s] - v[s]);
  return gap;
}

double action_agreement(const GridMDP& mdp, const Vec& true_reward, const Vec& learned_reward,
                        const std::vector<int>& states) {
  if (states.empty()) return 0.0;
  ValueResult truth = value_iteration(mdp, true_reward);
  ValueResult learned = value_iteration(mdp, learned_reward);
  int agree = 0;
  for (int s : states) {
    auto best = argmax_set(truth, mdp.n_actions, s);
    if (std::find(best.begin(), best.end(), learned.policy[s]) != best.end()) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(states.size());
}

std::vector<int> visited_states(const Demos& demos) {
  std::vector<int> out;
  for (const Demo& d : demos)
    for (const auto& [s, a] : d.steps) out.push_back(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ------------------------------------------------------------- MaxEnt

json MaxEntDiagnostics::to_json() const {
  return {{"grad_norms", grad_norms}, {"iterations", iterations}, {"converged", converged},
          {"diverged", diverged},     {"horizon", horizon}};
}

int default_horizon(const GridMDP& mdp) { return std::max(1, 2 * (mdp.width + mdp.height - 2)); }

Vec maxent_gradient(const GridMDP& mdp, const Demos& demos, const Vec& theta, int horizon) {
  if (demos.empty()) throw IrlError("MaxEnt IRL needs at least one demonstration");
  validate_demos(mdp, demos);
  const int F = mdp.feature_dim;
  Vec grad(F, 0.0);
  Vec start(mdp.n_states, 0.0);
  const double w = 1.0 / static_cast<double>(demos.size());
  for (const Demo& d : demos) {
    if (d.steps.empty()) throw IrlError("empty demonstration");
    start[d.steps.front().first] += w;
    for (int s : padded_states(mdp, d, horizon)) {
      const double* f = mdp.phi(s);
      for (int k = 0; k < F; ++k) grad[k] += w * f[k];
    }
  }
  LinearReward lr{theta};
  SoftVI soft = soft_value_iteration(mdp, lr.state_reward(mdp), horizon);
  Vec D = expected_visitation(mdp, soft.policy, start, horizon);
  for (int s = 0; s < mdp.n_states; ++s) {
    const double* f = mdp.phi(s);
    for (int k = 0; k < F; ++k) grad[k] -= D[s] * f[k];
  }
  return grad;
}

MaxEntResult maxent_irl(const GridMDP& mdp, const Demos& demos, const MaxEntConfig& cfg) {
  if (cfg.iterations < 0 || !(cfg.lr > 0.0) || !(cfg.lr_decay > 0.0) || !(cfg.grad_tol >= 0.0))
    throw IrlError("bad MaxEnt configuration");
  MaxEntResult out;
  auto& diag = out.diagnostics;
  diag.horizon = cfg.horizon.value_or(default_horizon(mdp));
  Vec& theta = out.reward.theta;
  theta.assign(mdp.feature_dim, 0.0);
  double step = cfg.lr;
  Vec g = maxent_gradient(mdp, demos, theta, diag.horizon);
  diag.grad_norms.push_back(norm(g));
  for (int it = 0; it < cfg.iterations; ++it) {
    if (diag.grad_norms.back() <= cfg.grad_tol) break;
    for (int k = 0; k < mdp.feature_dim; ++k) theta[k] += step * g[k];
    step *= cfg.lr_decay;
    ++diag.iterations;
    if (norm(theta) > cfg.theta_bound || !std::isfinite(norm(theta))) {
      diag.diverged = true;
      break;
    }
    g = maxent_gradient(mdp, demos, theta, diag.horizon);
    diag.grad_norms.push_back(norm(g));
  }
  diag.converged = !diag.diverged && diag.grad_norms.back() <= cfg.grad_tol;
  return out;
}

// ------------------------------------------------------------- PolicyWalk

json PosteriorSamples::to_json() const {
  return {{"samples", rewards.size()},
          {"burn_in", burn_in},
          {"acceptance_rate", acceptance_rate},
          {"mean", mean},
          {"log_likelihood", log_likelihood}};
}

double boltzmann_log_likelihood(const ValueResult& v, int n_actions, const Demos& demos, double alpha) {
  double ll = 0.0;
  for (const Demo& d : demos)
    for (const auto& [s, a] : d.steps) {
      const double* row = v.q.data() + static_cast<std::size_t>(s) * n_actions;
      double m = alpha * *std::max_element(row, row + n_actions);
      double z = 0.0;
      for (int b = 0; b < n_actions; ++b) z += std::exp(alpha * row[b] - m);
      ll += alpha * row[a] - m - std::log(z);
    }
  if (!std::isfinite(ll)) throw IrlError("non-finite likelihood");
  return ll;
}

PosteriorSamples bayesian_irl_policywalk(const GridMDP& mdp, const Demos& demos, const PolicyWalkConfig& cfg) {
  if (demos.empty()) throw IrlError("Bayesian IRL needs at least one demonstration");
  validate_demos(mdp, demos);
  if (!(cfg.delta > 0.0) || cfg.samples < 0 || cfg.burn_in < 0 || cfg.thin < 1 || !(cfg.low <= 0.0 && cfg.high >= 0.0))
    throw IrlError("bad PolicyWalk configuration");
  const int n = mdp.n_states;
  // Rewards live on the grid k * delta; integer steps avoid drift.
  const long k_lo = static_cast<long>(std::ceil(cfg.low / cfg.delta - 1e-9));
  const long k_hi = static_cast<long>(std::floor(cfg.high / cfg.delta + 1e-9));
  std::vector<long> k(n, 0);
  auto reward_of = [&](const std::vector<long>& kk) {
    Vec r(n);
    for (int s = 0; s < n; ++s) r[s] = static_cast<double>(kk[s]) * cfg.delta;
    return r;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick_state(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flat = cfg.alpha == 0.0;
  ValueResult v;
  double ll = 0.0;
  if (!flat) {
    v = value_iteration(mdp, reward_of(k));
    ll = boltzmann_log_likelihood(v, mdp.n_actions, demos, cfg.alpha);
  }

  PosteriorSamples out;
  out.burn_in = cfg.burn_in;
  long accepted = 0;
  for (int it = 0; it < cfg.samples; ++it) {
    int s = pick_state(rng);
    long step = unit(rng) < 0.5 ? -1 : 1;
    long proposal = k[s] + step;
    if (proposal >= k_lo && proposal <= k_hi) {
      if (flat) {
        k[s] = proposal;
        ++accepted;
      } else {
        std::vector<long> k2 = k;
        k2[s] = proposal;
        ValueResult v2 = value_iteration(mdp, reward_of(k2), 1e-9, &v.value);
        double ll2 = boltzmann_log_likelihood(v2, mdp.n_actions, demos, cfg.alpha);
        if (std::log(unit(rng)) < ll2 - ll) {
          k.swap(k2);
          v = std::move(v2);
          ll = ll2;
          ++accepted;
        }
      }
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.rewards.push_back(reward_of(k));
      out.log_likelihood.push_back(ll);
    }
  }
  out.acceptance_rate = cfg.samples > 0 ? static_cast<double>(accepted) / cfg.samples : 0.0;
  out.mean.assign(n, 0.0);
  if (out.rewards.empty()) {
    out.mean = reward_of(k);
  } else {
    for (const Vec& r : out.rewards)
      for (int s = 0; s < n; ++s) out.mean[s] += r[s];
    for (double& m : out.mean) m /= static_cast<double>(out.rewards.size());
  }
  return out;
}

// ------------------------------------------------------------- demo sources

Demos sample_soft_demos(const GridMDP& mdp, const SoftPolicy& policy, int n, int horizon, std::mt19937_64& rng) {
  if (horizon < 1) throw IrlError("horizon must be at least 1");
  std::discrete_distribution<int> start(mdp.start.begin(), mdp.start.end());
  Demos out;
  for (int i = 0; i < n; ++i) {
    Demo d;
    int s = start(rng);
    for (int t = 0; t < horizon; ++t) {
      const double* row = policy.prob.data() + static_cast<std::size_t>(s) * policy.n_actions;
      int a = std::discrete_distribution<int>(row, row + policy.n_actions)(rng);
      d.steps.emplace_back(s, a);
      s = mdp.succ(s, a);
    }
    out.push_back(std::move(d));
  }
  return out;
}

Demos sample_optimal_demos(const GridMDP& mdp, const Vec& reward, int n, int max_len, std::mt19937_64& rng) {
  Vec mass = mdp.start;
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.terminal[s]) mass[s] = 0.0;
  if (std::accumulate(mass.begin(), mass.end(), 0.0) <= 0.0) throw IrlError("every start state is terminal");
  std::discrete_distribution<int> start(mass.begin(), mass.end());
  ValueResult v = value_iteration(mdp, reward);
  Demos out;
  for (int i = 0; i < n; ++i) {
    Demo d;
    int s = start(rng);
    for (int t = 0; t < max_len && !mdp.terminal[s]; ++t) {
      d.steps.emplace_back(s, v.policy[s]);
      s = mdp.succ(s, v.policy[s]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

Demo demo_from_footprint(const GridMDP& mdp, const std::vector<std::pair<double, double>>& xy) {
  std::vector<std::pair<int, int>> cells;
  for (const auto& [x, y] : xy) {
    int col = static_cast<int>(std::floor((x - mdp.origin_x) / mdp.resolution));
    int row = static_cast<int>(std::floor((y - mdp.origin_y) / mdp.resolution));
    if (mdp.state_of(col, row) < 0) continue;
    if (cells.empty() || cells.back() != std::make_pair(col, row)) cells.emplace_back(col, row);
  }
  auto action_for = [&](int dx, int dy, bool x_axis) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      int ax = kMoveDx[a], ay = kMoveDy[a];
      if (dx != 0 && dy != 0 && mdp.n_actions == 8) {
        if (ax == (dx > 0 ? 1 : -1) && ay == (dy > 0 ? 1 : -1)) return a;
      } else if (x_axis ? (ay == 0 && ax == (dx > 0 ? 1 : -1)) : (ax == 0 && ay == (dy > 0 ? 1 : -1))) {
        return a;
      }
    }
    return -1;
  };
  Demo d;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    auto cur = cells[i - 1];
    const auto target = cells[i];
    while (cur != target) {
      int dx = target.first - cur.first, dy = target.second - cur.second;
      bool x_first = std::abs(dx) >= std::abs(dy);
      int a = -1, s_next = -1;
      for (bool x_axis : {x_first, !x_first}) {
        if ((x_axis ? dx : dy) == 0 && !(dx != 0 && dy != 0 && mdp.n_actions == 8)) continue;
        a = action_for(dx, dy, x_axis);
        if (a < 0) continue;
        s_next = mdp.state_of(cur.first + kMoveDx[a], cur.second + kMoveDy[a]);
        if (s_next >= 0) break;
      }
      if (s_next < 0) break;  // blocked gap: resume from the next sample
      d.steps.emplace_back(mdp.state_of(cur.first, cur.second), a);
      cur = {cur.first + kMoveDx[a], cur.second + kMoveDy[a]};
    }
  }
  return d;
}

}  // namespace vrgym::irl
