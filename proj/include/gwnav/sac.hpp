#pragma once

// Soft Actor-Critic for the 1-D roll action: squashed-Gaussian policy, twin
// critics with Polyak-averaged targets, automatic entropy temperature, and a
// uniform FIFO replay buffer. Loss heads are free functions returning both
// value and gradient so they can be checked against finite differences.

#include <array>
#include <type_traits>
#include <cmath>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "gwnav/env.hpp"
#include "gwnav/mlp.hpp"

namespace gwnav {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kHalfLog2Pi = 0.9189385332046727; // 0.5 log(2 pi)
constexpr double kLn2 = 0.6931471805599453;

struct SacConfig {
  double lr = 1e-4;
  int batch = 256;
  double gamma = 0.98;
  double tau = 0.005;
  int warmup = 1000; // env steps on uniform random actions before updates
  int updates_per_step = 1;
  double target_entropy = -1.0; // minus the action dimension
  int buffer_capacity = 10000;
  std::vector<int> hidden{256, 256, 256};

  void validate() const {
    require(lr > 0 && batch > 0 && gamma > 0 && gamma < 1 && tau > 0 &&
                tau <= 1 && warmup >= 0 && updates_per_step >= 0 &&
                buffer_capacity > 0 && !hidden.empty(),
            ErrorKind::config, "invalid training configuration");
    for (int h : hidden)
      require(h > 0, ErrorKind::config, "hidden sizes must be positive");
  }

  void save(std::ostream& os) const {
    bin::write(os, lr);
    bin::write<std::int32_t>(os, batch);
    bin::write(os, gamma);
    bin::write(os, tau);
    bin::write<std::int32_t>(os, warmup);
    bin::write<std::int32_t>(os, updates_per_step);
    bin::write(os, target_entropy);
    bin::write<std::int32_t>(os, buffer_capacity);
    bin::write<std::uint64_t>(os, hidden.size());
    for (int h : hidden) bin::write<std::int32_t>(os, h);
  }

  static SacConfig load(std::istream& is) {
    SacConfig c;
    c.lr = bin::read<double>(is);
    c.batch = bin::read<std::int32_t>(is);
    c.gamma = bin::read<double>(is);
    c.tau = bin::read<double>(is);
    c.warmup = bin::read<std::int32_t>(is);
    c.updates_per_step = bin::read<std::int32_t>(is);
    c.target_entropy = bin::read<double>(is);
    c.buffer_capacity = bin::read<std::int32_t>(is);
    auto n = bin::read<std::uint64_t>(is);
    require(n >= 1 && n <= 16, ErrorKind::parse, "implausible hidden layers");
    c.hidden.resize(n);
    for (auto& h : c.hidden) h = bin::read<std::int32_t>(is);
    c.validate();
    return c;
  }
};

struct Transition {
  std::array<double, Observation::kSize> obs{};
  double action = 0.0;
  double reward = 0.0;
  double done = 0.0; // 1 cuts the bootstrap (true termination, not timeout)
  std::array<double, Observation::kSize> next{};
};

template <typename T>
struct Batch {
  MatT<T> obs;  // kSize x B
  MatT<T> act;  // 1 x B
  MatT<T> rew;  // 1 x B
  MatT<T> done; // 1 x B
  MatT<T> next; // kSize x B
};

/// Ring buffer with FIFO eviction and uniform with-replacement sampling.
class ReplayBuffer {
public:
  explicit ReplayBuffer(int capacity) : cap_(capacity) {
    require(capacity > 0, ErrorKind::config, "buffer capacity must be > 0");
    data_.reserve(capacity);
  }

  void push(const Transition& t) {
    if (static_cast<int>(data_.size()) < cap_)
      data_.push_back(t);
    else
      data_[next_] = t;
    next_ = (next_ + 1) % cap_;
  }

  int size() const { return static_cast<int>(data_.size()); }
  int capacity() const { return cap_; }

  /// i-th surviving transition in age order, 0 = oldest.
  const Transition& ordered(int i) const {
    require(i >= 0 && i < size(), ErrorKind::usage, "buffer index range");
    int start = size() == cap_ ? next_ : 0;
    return data_[(start + i) % size()];
  }

  template <typename T>
  Batch<T> sample(int batch, Rng& rng) const {
    require(size() > 0 && batch > 0, ErrorKind::usage,
            "cannot sample an empty buffer");
    Batch<T> b;
    b.obs.resize(Observation::kSize, batch);
    b.act.resize(1, batch);
    b.rew.resize(1, batch);
    b.done.resize(1, batch);
    b.next.resize(Observation::kSize, batch);
    for (int k = 0; k < batch; ++k) {
      const Transition& t = data_[rng.uniform_index(data_.size())];
      for (int i = 0; i < Observation::kSize; ++i) {
        b.obs(i, k) = static_cast<T>(t.obs[i]);
        b.next(i, k) = static_cast<T>(t.next[i]);
      }
      b.act(0, k) = static_cast<T>(t.action);
      b.rew(0, k) = static_cast<T>(t.reward);
      b.done(0, k) = static_cast<T>(t.done);
    }
    return b;
  }

  void save(std::ostream& os) const {
    bin::write<std::int32_t>(os, cap_);
    bin::write<std::int32_t>(os, next_);
    bin::write<std::uint64_t>(os, data_.size());
    for (const Transition& t : data_) {
      for (double v : t.obs) bin::write(os, v);
      bin::write(os, t.action);
      bin::write(os, t.reward);
      bin::write(os, t.done);
      for (double v : t.next) bin::write(os, v);
    }
  }

  static ReplayBuffer load(std::istream& is) {
    ReplayBuffer b(bin::read<std::int32_t>(is));
    b.next_ = bin::read<std::int32_t>(is);
    auto n = bin::read<std::uint64_t>(is);
    require(n <= static_cast<std::uint64_t>(b.cap_) &&
                b.next_ >= 0 && b.next_ < b.cap_,
            ErrorKind::parse, "buffer contents exceed its capacity");
    b.data_.resize(n);
    for (Transition& t : b.data_) {
      for (double& v : t.obs) v = bin::read<double>(is);
      t.action = bin::read<double>(is);
      t.reward = bin::read<double>(is);
      t.done = bin::read<double>(is);
      for (double& v : t.next) v = bin::read<double>(is);
    }
    return b;
  }

private:
  int cap_;
  int next_ = 0;
  std::vector<Transition> data_;
};

/// Numerically stable log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2z)).
template <typename T>
T log1m_tanh2(T z) {
  const T u = T(-2) * z;
  const T sp =
      u > T(0) ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  return T(2) * (T(kLn2) - z - sp);
}

/// Squashed-Gaussian head evaluated at given noise: the reparameterized
/// action, its log density, and everything backward needs.
template <typename T>
struct PolicyEval {
  std::vector<MatT<T>> tape;
  MatT<T> raw;     // 2 x B actor output: mean row, unclamped log-std row
  MatT<T> mean;    // 1 x B
  MatT<T> log_std; // 1 x B, clamped
  MatT<T> stdev;   // 1 x B
  MatT<T> xi;      // 1 x B noise
  MatT<T> action;  // 1 x B in (-1, 1)
  MatT<T> logp;    // 1 x B
};

template <typename T>
PolicyEval<T> policy_eval(const Mlp<T>& actor, const MatT<T>& obs,
                          const MatT<T>& xi, bool with_tape) {
  PolicyEval<T> ev;
  ev.raw = actor.forward(obs, with_tape ? &ev.tape : nullptr);
  require(ev.raw.rows() == 2, ErrorKind::usage,
          "actor must output mean and log std");
  require(ev.raw.allFinite(), ErrorKind::numerical,
          "actor produced non-finite outputs");
  ev.mean = ev.raw.row(0);
  ev.log_std = ev.raw.row(1).cwiseMax(T(kLogStdMin)).cwiseMin(T(kLogStdMax));
  ev.stdev = ev.log_std.array().exp().matrix();
  ev.xi = xi;
  MatT<T> z = ev.mean + ev.stdev.cwiseProduct(xi);
  ev.action = z.array().tanh().matrix();
  ev.logp.resize(1, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    ev.logp(0, j) = T(-0.5) * xi(0, j) * xi(0, j) - ev.log_std(0, j) -
                    T(kHalfLog2Pi) - log1m_tanh2(z(0, j));
  return ev;
}

/// Push dLoss/daction and dLoss/dlogp back through the squashing into actor
/// parameter gradients. The log-std clamp gates its gradient.
template <typename T>
void policy_backward(const Mlp<T>& actor, const PolicyEval<T>& ev,
                     const MatT<T>& d_action, const MatT<T>& d_logp,
                     Mlp<T>& grad) {
  const Eigen::Index n = ev.action.cols();
  // action reaches z through 1 - a^2; the tanh correction in the log
  // density contributes +2a per unit z
  MatT<T> dz = d_action.cwiseProduct(
                   (T(1) - ev.action.array().square()).matrix()) +
               T(2) * d_logp.cwiseProduct(ev.action);
  MatT<T> dout(2, n);
  dout.row(0) = dz;
  // z = mean + exp(log_std) xi, and the density carries -log_std directly
  dout.row(1) = dz.cwiseProduct(ev.stdev.cwiseProduct(ev.xi)) - d_logp;
  for (Eigen::Index j = 0; j < n; ++j)
    if (ev.raw(1, j) < T(kLogStdMin) || ev.raw(1, j) > T(kLogStdMax))
      dout(1, j) = T(0);
  actor.backward(ev.tape, dout, &grad, nullptr);
}

template <typename T>
MatT<T> critic_input(const MatT<T>& obs, const MatT<T>& act) {
  MatT<T> u(obs.rows() + 1, obs.cols());
  u.topRows(obs.rows()) = obs;
  u.bottomRows(1) = act;
  return u;
}

/// y = r + gamma (1 - done) (min(Q'1, Q'2)(s', a') - alpha log pi(a'|s'))
/// with a' reparameterized from the given noise.
template <typename T>
MatT<T> td_targets(const Mlp<T>& target_q1, const Mlp<T>& target_q2,
                   const Mlp<T>& actor, const Batch<T>& batch,
                   const MatT<T>& xi_next, T alpha, T gamma) {
  PolicyEval<T> next = policy_eval(actor, batch.next, xi_next, false);
  MatT<T> u = critic_input(batch.next, next.action);
  MatT<T> soft = target_q1.forward(u).cwiseMin(target_q2.forward(u)) -
                 alpha * next.logp;
  return (batch.rew.array() +
          gamma * (T(1) - batch.done.array()) * soft.array())
      .matrix();
}

/// Mean squared TD error; parameter gradients accumulate into `grad`.
template <typename T>
T critic_loss_grad(const Mlp<T>& critic, const MatT<T>& obs,
                   const MatT<T>& act, const MatT<T>& y,
                   std::type_identity_t<Mlp<T>*> grad) {
  MatT<T> u = critic_input(obs, act);
  std::vector<MatT<T>> tape;
  MatT<T> q = critic.forward(u, grad ? &tape : nullptr);
  require(q.rows() == 1, ErrorKind::usage, "critic must output one value");
  MatT<T> err = q - y;
  T loss = err.squaredNorm() / T(err.cols());
  require(std::isfinite(static_cast<double>(loss)), ErrorKind::numerical,
          "critic loss not finite");
  if (grad) {
    MatT<T> dout = (T(2) / T(err.cols())) * err;
    critic.backward(tape, dout, grad, nullptr);
  }
  return loss;
}

/// Reparameterized policy objective mean(alpha log pi(a|s) - min(Q1,Q2));
/// the critics are held fixed, gradients flow only into the actor.
template <typename T>
T actor_loss_grad(const Mlp<T>& actor, const Mlp<T>& q1, const Mlp<T>& q2,
                  const MatT<T>& obs, const MatT<T>& xi, T alpha,
                  std::type_identity_t<Mlp<T>*> grad,
                  std::type_identity_t<T*> mean_logp = nullptr) {
  const Eigen::Index n = obs.cols();
  PolicyEval<T> ev = policy_eval(actor, obs, xi, grad != nullptr);
  MatT<T> u = critic_input(obs, ev.action);
  std::vector<MatT<T>> tape1, tape2;
  MatT<T> v1 = q1.forward(u, grad ? &tape1 : nullptr);
  MatT<T> v2 = q2.forward(u, grad ? &tape2 : nullptr);
  T loss = (alpha * ev.logp - v1.cwiseMin(v2)).sum() / T(n);
  if (mean_logp) *mean_logp = ev.logp.sum() / T(n);
  require(std::isfinite(static_cast<double>(loss)), ErrorKind::numerical,
          "actor loss not finite");
  if (grad) {
    // route -1/n into whichever critic holds the minimum, and recover
    // dLoss/daction from the critics' input gradients (last input row)
    MatT<T> d1 = MatT<T>::Zero(1, n), d2 = MatT<T>::Zero(1, n);
    for (Eigen::Index j = 0; j < n; ++j)
      (v1(0, j) <= v2(0, j) ? d1 : d2)(0, j) = T(-1) / T(n);
    MatT<T> du1(u.rows(), n), du2(u.rows(), n);
    q1.backward(tape1, d1, nullptr, &du1);
    q2.backward(tape2, d2, nullptr, &du2);
    MatT<T> d_action = du1.bottomRows(1) + du2.bottomRows(1);
    MatT<T> d_logp = MatT<T>::Constant(1, n, alpha / T(n));
    policy_backward(actor, ev, d_action, d_logp, *grad);
  }
  return loss;
}

/// Temperature objective -log_alpha (mean log pi + target entropy), taken
/// directly on the log parameter.
template <typename T>
T alpha_loss_grad(T log_alpha, T mean_logp, T target_entropy,
                  std::type_identity_t<T*> grad) {
  T drive = mean_logp + target_entropy;
  if (grad) *grad = -drive;
  return -log_alpha * drive;
}

template <typename T>
class SacAgent {
public:
  SacAgent(const SacConfig& cfg, Rng& init) : cfg_(cfg) {
    cfg_.validate();
    std::vector<int> a_sizes{Observation::kSize};
    std::vector<int> q_sizes{Observation::kSize + 1};
    for (int h : cfg_.hidden) {
      a_sizes.push_back(h);
      q_sizes.push_back(h);
    }
    a_sizes.push_back(2);
    q_sizes.push_back(1);
    actor_ = Mlp<T>(a_sizes, init);
    q1_ = Mlp<T>(q_sizes, init);
    q2_ = Mlp<T>(q_sizes, init);
    tq1_ = q1_; // targets start as copies of the online critics
    tq2_ = q2_;
    opt_actor_ = Adam<T>(T(cfg_.lr), actor_.param_count());
    opt_q1_ = Adam<T>(T(cfg_.lr), q1_.param_count());
    opt_q2_ = Adam<T>(T(cfg_.lr), q2_.param_count());
    opt_alpha_ = Adam<T>(T(cfg_.lr), 1);
    ga_ = Mlp<T>::zeros_like(actor_);
    gq1_ = Mlp<T>::zeros_like(q1_);
    gq2_ = Mlp<T>::zeros_like(q2_);
  }

  struct Losses {
    T q1 = 0, q2 = 0, actor = 0, alpha = 0;
    T alpha_value = 0;
    T mean_logp = 0;
  };

  /// One gradient step on every head from one batch. Noise order is fixed:
  /// next-state noise first, then policy noise.
  Losses update(const Batch<T>& batch, Rng& rng) {
    MatT<T> xi_next = draw_noise(batch.obs.cols(), rng);
    MatT<T> xi_pi = draw_noise(batch.obs.cols(), rng);
    const T alpha = std::exp(log_alpha_);
    MatT<T> y = td_targets(tq1_, tq2_, actor_, batch, xi_next, alpha,
                           T(cfg_.gamma));
    Losses out;
    out.alpha_value = alpha;
    gq1_.set_zero();
    out.q1 = critic_loss_grad(q1_, batch.obs, batch.act, y, &gq1_);
    opt_step_(q1_, opt_q1_, gq1_);
    gq2_.set_zero();
    out.q2 = critic_loss_grad(q2_, batch.obs, batch.act, y, &gq2_);
    opt_step_(q2_, opt_q2_, gq2_);
    ga_.set_zero();
    out.actor = actor_loss_grad(actor_, q1_, q2_, batch.obs, xi_pi, alpha,
                                &ga_, &out.mean_logp);
    opt_step_(actor_, opt_actor_, ga_);
    T dalpha = 0;
    out.alpha = alpha_loss_grad(log_alpha_, out.mean_logp,
                                T(cfg_.target_entropy), &dalpha);
    VecT<T> la(1), gla(1);
    la(0) = log_alpha_;
    gla(0) = dalpha;
    opt_alpha_.step(la, gla);
    log_alpha_ = la(0);
    tq1_.track(q1_, T(cfg_.tau));
    tq2_.track(q2_, T(cfg_.tau));
    return out;
  }

  /// Exploration action: one squashed-Gaussian draw (one normal from rng).
  double act_stochastic(const Observation& obs, Rng& rng) const {
    MatT<T> xi(1, 1);
    xi(0, 0) = static_cast<T>(rng.normal());
    PolicyEval<T> ev = policy_eval(actor_, obs_column(obs), xi, false);
    return static_cast<double>(ev.action(0, 0));
  }

  /// Evaluation action tanh(mean): pure function of parameters and obs.
  double act_deterministic(const Observation& obs) const {
    MatT<T> xi = MatT<T>::Zero(1, 1);
    PolicyEval<T> ev = policy_eval(actor_, obs_column(obs), xi, false);
    return static_cast<double>(ev.action(0, 0));
  }

  static MatT<T> draw_noise(Eigen::Index n, Rng& rng) {
    MatT<T> xi(1, n);
    for (Eigen::Index j = 0; j < n; ++j)
      xi(0, j) = static_cast<T>(rng.normal());
    return xi;
  }

  static MatT<T> obs_column(const Observation& obs) {
    auto f = obs.flatten();
    MatT<T> x(Observation::kSize, 1);
    for (int i = 0; i < Observation::kSize; ++i)
      x(i, 0) = static_cast<T>(f[i]);
    return x;
  }

  const SacConfig& config() const { return cfg_; }
  const Mlp<T>& actor() const { return actor_; }
  const Mlp<T>& q1() const { return q1_; }
  const Mlp<T>& q2() const { return q2_; }
  const Mlp<T>& target_q1() const { return tq1_; }
  const Mlp<T>& target_q2() const { return tq2_; }
  T log_alpha() const { return log_alpha_; }
  T alpha() const { return std::exp(log_alpha_); }

  void save(std::ostream& os) const {
    cfg_.save(os);
    actor_.save(os);
    q1_.save(os);
    q2_.save(os);
    tq1_.save(os);
    tq2_.save(os);
    opt_actor_.save(os);
    opt_q1_.save(os);
    opt_q2_.save(os);
    opt_alpha_.save(os);
    bin::write(os, static_cast<double>(log_alpha_));
  }

  static SacAgent load(std::istream& is) {
    SacAgent a;
    a.cfg_ = SacConfig::load(is);
    a.actor_.load(is);
    a.q1_.load(is);
    a.q2_.load(is);
    a.tq1_.load(is);
    a.tq2_.load(is);
    a.opt_actor_.load(is);
    a.opt_q1_.load(is);
    a.opt_q2_.load(is);
    a.opt_alpha_.load(is);
    a.log_alpha_ = static_cast<T>(bin::read<double>(is));
    a.ga_ = Mlp<T>::zeros_like(a.actor_);
    a.gq1_ = Mlp<T>::zeros_like(a.q1_);
    a.gq2_ = Mlp<T>::zeros_like(a.q2_);
    return a;
  }

private:
  SacAgent() = default;

  static void opt_step_(Mlp<T>& net, Adam<T>& opt, const Mlp<T>& grad) {
    VecT<T> p = net.pack();
    VecT<T> g = grad.pack();
    opt.step(p, g);
    net.unpack(p);
  }

  SacConfig cfg_;
  Mlp<T> actor_, q1_, q2_, tq1_, tq2_;
  Adam<T> opt_actor_, opt_q1_, opt_q2_, opt_alpha_;
  Mlp<T> ga_, gq1_, gq2_; // gradient accumulators, reused across updates
  T log_alpha_ = 0;
};

} // namespace gwnav
