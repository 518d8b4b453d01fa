#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrgym/rl.hpp"

namespace vrgym::rl {

using nlohmann::json;

namespace {

void init_layout(const std::vector<int>& sizes, Vec& params, std::vector<std::size_t>& offsets) {
  if (sizes.size() < 2) throw RlError("an MLP needs at least an input and an output size");
  for (int n : sizes)
    if (n <= 0) throw RlError("layer sizes must be positive");
  std::size_t total = 0;
  offsets.clear();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    offsets.push_back(total);
    total += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
  }
  params.assign(total, 0.0);
}

// Four partial sums break the serial add chain; the order is fixed, so
// results stay deterministic.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "linear"; }

}  // namespace

MLP::MLP(std::vector<int> sizes, std::uint64_t seed, Activation output) : sizes_(std::move(sizes)), output_(output) {
  init_layout(sizes_, params_, offsets_);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / sizes_[l]));
    std::size_t n_w = static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l];
    for (std::size_t i = 0; i < n_w; ++i) params_[offsets_[l] + i] = dist(rng);
  }
}

MLP MLP::zeros(std::vector<int> sizes, Activation output) {
  MLP m;
  m.sizes_ = std::move(sizes);
  m.output_ = output;
  init_layout(m.sizes_, m.params_, m.offsets_);
  return m;
}

Vec MLP::forward(const Vec& x) const {
  Cache c;
  return forward(x, c);
}

Vec MLP::forward(const Vec& x, Cache& cache) const {
  if (sizes_.empty()) throw RlError("MLP is empty");
  if (static_cast<int>(x.size()) != in_dim())
    throw RlError("input has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(in_dim()));
  const std::size_t L = sizes_.size() - 1;
  cache.act.resize(L + 1);
  cache.act[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    const int n_in = sizes_[l], n_out = sizes_[l + 1];
    const double* W = params_.data() + offsets_[l];
    const double* b = W + static_cast<std::size_t>(n_out) * n_in;
    const Vec& in = cache.act[l];
    Vec& out = cache.act[l + 1];
    out.resize(n_out);
    const bool squash = l + 1 < L || output_ == Activation::tanh;
    for (int o = 0; o < n_out; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * n_in;
      double z = b[o] + dot(row, in.data(), n_in);
      out[o] = squash ? std::tanh(z) : z;
    }
  }
  return cache.act[L];
}

Vec MLP::backward(const Cache& cache, const Vec& dy, Vec& grad) const {
  const std::size_t L = sizes_.size() - 1;
  if (cache.act.size() != L + 1) throw RlError("cache does not belong to this MLP");
  if (static_cast<int>(dy.size()) != out_dim()) throw RlError("upstream gradient has the wrong dimension");
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  Vec delta = dy;
  for (std::size_t l = L; l-- > 0;) {
    const int n_in = sizes_[l], n_out = sizes_[l + 1];
    const bool squash = l + 1 < L || output_ == Activation::tanh;
    const Vec& out = cache.act[l + 1];
    if (squash)
      for (int o = 0; o < n_out; ++o) delta[o] *= 1.0 - out[o] * out[o];
    const double* W = params_.data() + offsets_[l];
    double* gW = grad.data() + offsets_[l];
    double* gb = gW + static_cast<std::size_t>(n_out) * n_in;
    const Vec& in = cache.act[l];
    Vec dx(n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = W + static_cast<std::size_t>(o) * n_in;
      double* grow = gW + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) {
        grow[i] += d * in[i];
        dx[i] += d * row[i];
      }
      gb[o] += d;
    }
    delta = std::move(dx);
  }
  return delta;
}

json MLP::to_json() const {
  return {{"sizes", sizes_}, {"output", activation_name(output_)}, {"params", params_}};
}

MLP MLP::from_json(const json& j) {
  try {
    std::string out = j.value("output", "linear");
    if (out != "linear" && out != "tanh") throw RlError("unknown output activation '" + out + "'");
    MLP m = zeros(j.at("sizes").get<std::vector<int>>(), out == "tanh" ? Activation::tanh : Activation::linear);
    Vec p = j.at("params").get<Vec>();
    if (p.size() != m.params_.size()) throw RlError("checkpoint has the wrong number of parameters");
    for (double v : p)
      if (!std::isfinite(v)) throw RlError("checkpoint has a non-finite parameter");
    m.params_ = std::move(p);
    return m;
  } catch (const json::exception& e) {
    throw RlError(std::string("bad MLP checkpoint: ") + e.what());
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(Vec& params, const Vec& grad) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void clip_norm(Vec& grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  double n = std::sqrt(sq);
  if (n > max_norm)
    for (double& g : grad) g *= max_norm / n;
}

void soft_update(MLP& target, const MLP& source, double tau) {
  if (target.sizes() != source.sizes()) throw RlError("soft update between different architectures");
  Vec& t = target.params();
  const Vec& s = source.params();
  if (tau == 1.0) {
    t = s;
    return;
  }
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
}

DuelingNet::DuelingNet(int in_dim, int n_actions, const std::vector<int>& hidden, std::uint64_t seed) {
  if (hidden.empty()) throw RlError("dueling net needs at least one hidden layer");
  std::vector<int> t{in_dim};
  t.insert(t.end(), hidden.begin(), hidden.end());
  trunk = MLP(t, seed, Activation::tanh);
  value_head = MLP({hidden.back(), 1}, seed + 1);
  adv_head = MLP({hidden.back(), n_actions}, seed + 2);
}

Vec DuelingNet::forward(const Vec& x) const {
  Cache c;
  return forward(x, c);
}

Vec DuelingNet::forward(const Vec& x, Cache& cache) const {
  Vec h = trunk.forward(x, cache.trunk);
  double v = value_head.forward(h, cache.value)[0];
  Vec a = adv_head.forward(h, cache.adv);
  double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  for (double& q : a) q = v + q - mean;
  return a;
}

Vec DuelingNet::advantages(const Vec& x) const { return adv_head.forward(trunk.forward(x)); }

double DuelingNet::value(const Vec& x) const { return value_head.forward(trunk.forward(x))[0]; }

void DuelingNet::backward(const Cache& cache, const Vec& dq, std::vector<Vec>& grads) const {
  grads.resize(3);
  double dv = std::accumulate(dq.begin(), dq.end(), 0.0);
  double mean = dv / static_cast<double>(dq.size());
  Vec da(dq.size());
  for (std::size_t i = 0; i < dq.size(); ++i) da[i] = dq[i] - mean;
  Vec dh = value_head.backward(cache.value, {dv}, grads[1]);
  Vec dh2 = adv_head.backward(cache.adv, da, grads[2]);
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
  trunk.backward(cache.trunk, dh, grads[0]);
}

json DuelingNet::to_json() const {
  return {{"trunk", trunk.to_json()}, {"value", value_head.to_json()}, {"advantage", adv_head.to_json()}};
}

Vec softmax(const Vec& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - m);
  for (double& v : p) v /= z;
  return p;
}

Vec policy_logit_grad(const Vec& logits, int action, double advantage, double entropy_beta) {
  Vec p = softmax(logits);
  double h = 0.0;
  Vec logp(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    logp[i] = std::log(std::max(p[i], 1e-300));
    h -= p[i] * logp[i];
  }
  Vec g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double onehot = static_cast<int>(i) == action ? 1.0 : 0.0;
    g[i] = -advantage * (onehot - p[i]) + entropy_beta * p[i] * (logp[i] + h);
  }
  return g;
}

Vec Ddpg::act(const Vec& x) const {
  Vec a = actor.forward(x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (high[i] + low[i]) + 0.5 * (high[i] - low[i]) * a[i];
  return a;
}

double Ddpg::q(const Vec& x, const Vec& a) const {
  Vec in = x;
  in.insert(in.end(), a.begin(), a.end());
  return critic.forward(in)[0];
}

void ReplayBuffer::push(Item item) {
  if (capacity == 0) throw RlError("replay capacity must be positive");
  if (items.size() < capacity) {
    items.push_back(std::move(item));
    return;
  }
  items[head] = std::move(item);
  head = (head + 1) % capacity;
}

std::vector<const ReplayBuffer::Item*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (items.empty()) throw RlError("cannot sample an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  std::vector<const Item*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items[pick(rng)]);
  return out;
}

int argmax(const Vec& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace vrgym::rl
