#include <cmath>
#include <functional>

#include "vrgym/rl.hpp"

namespace vrgym::rl {

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Compares `analytic` with central differences of `loss` over every entry
// of every parameter vector in `params`.
GradCheck compare(std::string name, const std::vector<Vec*>& params, const std::vector<Vec>& analytic,
                  const std::function<double()>& loss, double h) {
  GradCheck out{std::move(name), 0, 0.0};
  for (std::size_t k = 0; k < params.size(); ++k) {
    Vec& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss();
      p[i] = saved - h;
      const double down = loss();
      p[i] = saved;
      out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[k][i], (up - down) / (2 * h)));
      ++out.n_params;
    }
  }
  return out;
}

double quad_loss(const Vec& y, const Vec& c) {
  double l = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) l += c[i] * y[i] + 0.5 * y[i] * y[i];
  return l;
}

Vec quad_grad(const Vec& y, const Vec& c) {
  Vec g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = c[i] + y[i];
  return g;
}

double policy_loss(const Vec& logits, int a, double adv, double beta) {
  Vec p = softmax(logits);
  double h = 0.0;
  for (double q : p) h -= q * std::log(q);
  return -(adv * std::log(p[a]) + beta * h);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

std::vector<GradCheck> gradient_checks(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheck> out;
  const int in = 5, n_actions = 4, adim = 2;
  const std::vector<int> hidden{7, 6};

  for (Activation act : {Activation::linear, Activation::tanh}) {
    MLP net({in, 7, 6, 3}, rng(), act);
    Vec x = random_vec(rng, in), c = random_vec(rng, 3);
    MLP::Cache cache;
    Vec g(net.n_params(), 0.0);
    net.backward(cache, quad_grad(net.forward(x, cache), c), g);
    out.push_back(compare(act == Activation::tanh ? "mlp_tanh_output" : "mlp_linear_output", {&net.params()}, {g},
                          [&] { return quad_loss(net.forward(x), c); }, h));
  }

  {
    DuelingNet net(in, n_actions, hidden, rng());
    Vec x = random_vec(rng, in), c = random_vec(rng, n_actions);
    DuelingNet::Cache cache;
    std::vector<Vec> g;
    for (const MLP* p : net.parts()) g.emplace_back(p->n_params(), 0.0);
    net.backward(cache, quad_grad(net.forward(x, cache), c), g);
    std::vector<Vec*> params;
    for (MLP* p : net.parts()) params.push_back(&p->params());
    out.push_back(compare("dueling_q", params, g, [&] { return quad_loss(net.forward(x), c); }, h));
  }

  {
    MLP policy({in, 7, 6, n_actions}, rng());
    Vec x = random_vec(rng, in);
    const int a = static_cast<int>(rng() % n_actions);
    const double adv = random_vec(rng, 1)[0], beta = 0.05;
    MLP::Cache cache;
    Vec g(policy.n_params(), 0.0);
    Vec logits = policy.forward(x, cache);
    policy.backward(cache, policy_logit_grad(logits, a, adv, beta), g);
    out.push_back(compare("actor_critic_policy", {&policy.params()}, {g},
                          [&] { return policy_loss(policy.forward(x), a, adv, beta); }, h));
  }

  {
    MLP value({in, 7, 6, 1}, rng());
    Vec x = random_vec(rng, in);
    const double y = random_vec(rng, 1)[0];
    MLP::Cache cache;
    Vec g(value.n_params(), 0.0);
    double v = value.forward(x, cache)[0];
    value.backward(cache, {v - y}, g);
    out.push_back(compare("actor_critic_value", {&value.params()}, {g}, [&] {
      double d = value.forward(x)[0] - y;
      return 0.5 * d * d;
    }, h));
  }

  {
    Ddpg m;
    m.low = {-0.5, -2.0};
    m.high = {1.5, 2.0};
    m.actor = MLP({in, 7, 6, adim}, rng(), Activation::tanh);
    m.critic = MLP({in + adim, 7, 6, 1}, rng());
    Vec x = random_vec(rng, in);
    Vec a = random_vec(rng, adim, 0.5);
    const double y = random_vec(rng, 1)[0];

    MLP::Cache cc, ac;
    Vec in_vec = x;
    in_vec.insert(in_vec.end(), a.begin(), a.end());
    Vec cg(m.critic.n_params(), 0.0);
    double q = m.critic.forward(in_vec, cc)[0];
    m.critic.backward(cc, {q - y}, cg);
    out.push_back(compare("ddpg_critic", {&m.critic.params()}, {cg}, [&] {
      double d = m.q(x, a) - y;
      return 0.5 * d * d;
    }, h));

    // Actor loss -Q(s, mu(s)), differentiated through the critic's input.
    Vec u = m.actor.forward(x, ac);
    Vec act = m.act(x);
    Vec cin = x;
    cin.insert(cin.end(), act.begin(), act.end());
    m.critic.forward(cin, cc);
    Vec scratch(m.critic.n_params(), 0.0);
    Vec dx = m.critic.backward(cc, {-1.0}, scratch);
    Vec du(adim);
    for (int i = 0; i < adim; ++i) du[i] = dx[in + i] * 0.5 * (m.high[i] - m.low[i]);
    Vec ag(m.actor.n_params(), 0.0);
    m.actor.backward(ac, du, ag);
    out.push_back(compare("ddpg_actor", {&m.actor.params()}, {ag}, [&] { return -m.q(x, m.act(x)); }, h));
  }
  return out;
}

}  // namespace vrgym::rl
