#pragma once

// Training loop: drives episodes on the training anatomies, fills the replay
// buffer, takes one gradient update per control step after warmup, runs
// periodic deterministic evaluations, and writes checkpoints that resume
// bit-identically. During training the agent acts on every control step;
// evaluations use the junction-region autopilot, matching deployment.

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gwnav/env.hpp"
#include "gwnav/fingerprint.hpp"
#include "gwnav/sac.hpp"
#include "gwnav/serialize.hpp"

namespace gwnav {

struct TrainConfig {
  long long total_steps = 120000; // environment control steps
  int eval_every = 5000;          // steps between deterministic evaluations
  int eval_episodes = 20;
  std::uint64_t seed = 1;

  void validate() const {
    require(total_steps >= 0 && eval_every > 0 && eval_episodes >= 0,
            ErrorKind::config, "invalid train configuration");
  }
};

/// One line of the training log: either a finished training episode or a
/// periodic evaluation. Unused fields stay empty in the CSV.
struct MetricRow {
  std::string kind; // "episode" or "eval"
  long long step = 0;
  long long episode = 0;
  double ret = 0.0;
  int length = 0;
  std::string outcome;
  double success_rate = 0.0;
  double alpha = 0.0;
  double q1_loss = 0.0, q2_loss = 0.0, actor_loss = 0.0, alpha_loss = 0.0;
};

inline constexpr std::string_view kCheckpointMagic = "gwnav-train-ckpt v1";

/// Common prefix of every checkpoint file. `has_train_state` distinguishes a
/// full resumable snapshot from a policy-only file. `config_hash` covers the
/// wire and episode rules (the observation space), `tree_hash` the training
/// anatomies: evaluation requires only the former to match, resuming all.
struct CheckpointHeader {
  std::string version = kVersion;
  bool has_train_state = false;
  std::uint64_t config_hash = 0;
  std::uint64_t sac_hash = 0;
  std::uint64_t tree_hash = 0;
  std::uint64_t seed = 0;
  long long step = 0;

  void save(std::ostream& os) const {
    bin::write_string(os, std::string(kCheckpointMagic));
    bin::write_string(os, version);
    bin::write<std::uint8_t>(os, has_train_state ? 1 : 0);
    bin::write(os, config_hash);
    bin::write(os, sac_hash);
    bin::write(os, tree_hash);
    bin::write(os, seed);
    bin::write<std::int64_t>(os, step);
  }

  static CheckpointHeader load(std::istream& is) {
    require(bin::read_string(is) == kCheckpointMagic, ErrorKind::parse,
            "not a training checkpoint");
    CheckpointHeader h;
    h.version = bin::read_string(is);
    h.has_train_state = bin::read<std::uint8_t>(is) != 0;
    h.config_hash = bin::read<std::uint64_t>(is);
    h.sac_hash = bin::read<std::uint64_t>(is);
    h.tree_hash = bin::read<std::uint64_t>(is);
    h.seed = bin::read<std::uint64_t>(is);
    h.step = bin::read<std::int64_t>(is);
    return h;
  }
};

/// A checkpoint opened for evaluation only: header plus agent, ignoring any
/// training state stored behind them.
template <typename T>
struct PolicySnapshot {
  CheckpointHeader header;
  SacAgent<T> agent;

  static PolicySnapshot load(std::istream& is) {
    CheckpointHeader h = CheckpointHeader::load(is);
    return {h, SacAgent<T>::load(is)};
  }
};

template <typename T>
class Trainer {
public:
  Trainer(const GuidewireConfig& wire, const EpisodeConfig& episode,
          const SacConfig& sac, const TrainConfig& train,
          const std::vector<VesselTree>& trees)
      : tc_(train),
        env_(wire, episode, trees),
        eval_env_(wire, episode, trees),
        agent_(make_agent_(sac, train.seed)),
        buffer_(sac.buffer_capacity),
        env_rng_(substream(train.seed, "env")),
        explore_rng_(substream(train.seed, "explore")),
        update_rng_(substream(train.seed, "update")) {
    tc_.validate();
    config_hash_ = fingerprint(wire, episode);
    sac_hash_ = fingerprint(sac);
    tree_hash_ = fingerprint(trees);
    env_.reset(env_rng_);
  }

  /// Run up to `max_steps` control steps (stopping at total_steps). Returns
  /// the number actually taken.
  long long advance(long long max_steps) {
    const SacConfig& cfg = agent_.config();
    long long taken = 0;
    while (taken < max_steps && env_steps_ < tc_.total_steps) {
      if (!env_.active()) {
        env_.reset(env_rng_);
        ep_return_ = 0.0;
        ep_len_ = 0;
      }
      Observation obs = env_.observation();
      double a = env_steps_ < cfg.warmup
                     ? explore_rng_.uniform(-1.0, 1.0)
                     : agent_.act_stochastic(obs, explore_rng_);
      StepResult r = env_.step(a);
      ++env_steps_;
      ++taken;
      ep_return_ += r.reward;
      ++ep_len_;

      Transition t;
      t.obs = obs.flatten();
      t.action = a;
      t.reward = r.reward;
      t.done = r.terminated != Termination::none ? 1.0 : 0.0;
      t.next = r.observation.flatten();
      buffer_.push(t);

      if (!env_.active()) {
        MetricRow row;
        row.kind = "episode";
        row.step = env_steps_;
        row.episode = episodes_;
        row.ret = ep_return_;
        row.length = ep_len_;
        row.outcome = r.truncated ? "truncated" : to_string(r.terminated);
        metrics_.push_back(row);
        ++episodes_;
      }

      if (env_steps_ >= cfg.warmup && buffer_.size() >= cfg.batch)
        for (int u = 0; u < cfg.updates_per_step; ++u)
          last_losses_ = agent_.update(buffer_.sample<T>(cfg.batch, update_rng_),
                                       update_rng_);

      if (env_steps_ % tc_.eval_every == 0) run_eval_();
    }
    return taken;
  }

  void run() {
    if (env_steps_ < tc_.total_steps) advance(tc_.total_steps - env_steps_);
  }

  bool finished() const { return env_steps_ >= tc_.total_steps; }

  /// Full snapshot: everything needed to continue the run bit-identically.
  void save_checkpoint(std::ostream& os) const {
    CheckpointHeader h;
    h.has_train_state = true;
    h.config_hash = config_hash_;
    h.sac_hash = sac_hash_;
    h.tree_hash = tree_hash_;
    h.seed = tc_.seed;
    h.step = env_steps_;
    h.save(os);
    agent_.save(os);
    bin::write_string(os, env_rng_.save_state());
    bin::write_string(os, explore_rng_.save_state());
    bin::write_string(os, update_rng_.save_state());
    buffer_.save(os);
    env_.save_episode(os);
    bin::write<std::int64_t>(os, episodes_);
    bin::write<std::int32_t>(os, ep_len_);
    bin::write(os, ep_return_);
    bin::write(os, best_success_);
    bin::write<std::int64_t>(os, best_step_);
    bin::write_string(os, best_blob_);
    write_losses_(os, last_losses_);
  }

  /// Policy-only file holding the best agent seen by evaluation (the current
  /// agent if no evaluation has run yet).
  void save_policy(std::ostream& os) const {
    CheckpointHeader h;
    h.has_train_state = false;
    h.config_hash = config_hash_;
    h.sac_hash = sac_hash_;
    h.tree_hash = tree_hash_;
    h.seed = tc_.seed;
    h.step = best_blob_.empty() ? env_steps_ : best_step_;
    h.save(os);
    if (best_blob_.empty())
      agent_.save(os);
    else
      os.write(best_blob_.data(),
               static_cast<std::streamsize>(best_blob_.size()));
  }

  /// Restore a full snapshot. The trainer must have been constructed with
  /// the same configs, trees and seed as the run that wrote it.
  void load_checkpoint(std::istream& is) {
    CheckpointHeader h = CheckpointHeader::load(is);
    require(h.has_train_state, ErrorKind::state,
            "checkpoint has no training state to resume");
    require(h.config_hash == config_hash_ && h.sac_hash == sac_hash_ &&
                h.tree_hash == tree_hash_ && h.seed == tc_.seed,
            ErrorKind::hash_mismatch,
            "checkpoint was produced under a different configuration");
    agent_ = SacAgent<T>::load(is);
    env_rng_.load_state(bin::read_string(is));
    explore_rng_.load_state(bin::read_string(is));
    update_rng_.load_state(bin::read_string(is));
    buffer_ = ReplayBuffer::load(is);
    env_.load_episode(is);
    episodes_ = bin::read<std::int64_t>(is);
    ep_len_ = bin::read<std::int32_t>(is);
    ep_return_ = bin::read<double>(is);
    best_success_ = bin::read<double>(is);
    best_step_ = bin::read<std::int64_t>(is);
    best_blob_ = bin::read_string(is);
    read_losses_(is, last_losses_);
    env_steps_ = h.step;
    metrics_.clear();
  }

  void write_metrics(std::ostream& os) const {
    os << "kind,step,episode,return,length,outcome,success_rate,alpha,"
          "q1_loss,q2_loss,actor_loss,alpha_loss\n";
    for (const MetricRow& m : metrics_) {
      os << m.kind << ',' << m.step << ',';
      if (m.kind == "episode")
        os << m.episode << ',' << fmt_csv(m.ret) << ',' << m.length << ','
           << m.outcome << ",,,,,,\n";
      else
        os << ",,,," << fmt_csv(m.success_rate) << ',' << fmt_csv(m.alpha)
           << ',' << fmt_csv(m.q1_loss) << ',' << fmt_csv(m.q2_loss) << ','
           << fmt_csv(m.actor_loss) << ',' << fmt_csv(m.alpha_loss) << '\n';
    }
  }

  const SacAgent<T>& agent() const { return agent_; }
  const Environment& env() const { return env_; }
  const TrainConfig& config() const { return tc_; }
  const std::vector<MetricRow>& metrics() const { return metrics_; }
  long long steps() const { return env_steps_; }
  long long episodes() const { return episodes_; }
  double best_success() const { return best_success_; }
  long long best_step() const { return best_step_; }
  std::uint64_t config_hash() const { return config_hash_; }
  std::uint64_t sac_hash() const { return sac_hash_; }
  std::uint64_t tree_hash() const { return tree_hash_; }

private:
  static SacAgent<T> make_agent_(const SacConfig& sac, std::uint64_t seed) {
    Rng init = substream(seed, "policy-init");
    return SacAgent<T>(sac, init);
  }

  // Each evaluation draws from a stream derived from (seed, step) alone, so
  // a resumed run reproduces exactly the evaluations of an uninterrupted one.
  Rng eval_rng_() const {
    std::uint64_t base = fnv1a("eval", fnv1a_mix(tc_.seed, kFnvOffset));
    return Rng(fnv1a_mix(static_cast<std::uint64_t>(env_steps_), base));
  }

  void run_eval_() {
    Rng rng = eval_rng_();
    int successes = 0;
    for (int e = 0; e < tc_.eval_episodes; ++e) {
      int tree = static_cast<int>(rng.uniform_index(eval_env_.num_trees()));
      int target = static_cast<int>(
          rng.uniform_index(eval_env_.tree_at(tree).targets.size()));
      auto policy = [this](const Observation& o) {
        return agent_.act_deterministic(o);
      };
      successes +=
          navigate_tree(eval_env_, policy, tree, target, rng).success ? 1 : 0;
    }
    double rate = tc_.eval_episodes > 0
                      ? static_cast<double>(successes) / tc_.eval_episodes
                      : 0.0;
    MetricRow row;
    row.kind = "eval";
    row.step = env_steps_;
    row.success_rate = rate;
    row.alpha = static_cast<double>(agent_.alpha());
    row.q1_loss = static_cast<double>(last_losses_.q1);
    row.q2_loss = static_cast<double>(last_losses_.q2);
    row.actor_loss = static_cast<double>(last_losses_.actor);
    row.alpha_loss = static_cast<double>(last_losses_.alpha);
    metrics_.push_back(row);
    if (rate >= best_success_ || best_blob_.empty()) {
      best_success_ = rate;
      best_step_ = env_steps_;
      std::ostringstream blob;
      agent_.save(blob);
      best_blob_ = blob.str();
    }
  }

  using Losses = typename SacAgent<T>::Losses;

  static void write_losses_(std::ostream& os, const Losses& l) {
    bin::write(os, static_cast<double>(l.q1));
    bin::write(os, static_cast<double>(l.q2));
    bin::write(os, static_cast<double>(l.actor));
    bin::write(os, static_cast<double>(l.alpha));
    bin::write(os, static_cast<double>(l.alpha_value));
    bin::write(os, static_cast<double>(l.mean_logp));
  }

  static void read_losses_(std::istream& is, Losses& l) {
    l.q1 = static_cast<T>(bin::read<double>(is));
    l.q2 = static_cast<T>(bin::read<double>(is));
    l.actor = static_cast<T>(bin::read<double>(is));
    l.alpha = static_cast<T>(bin::read<double>(is));
    l.alpha_value = static_cast<T>(bin::read<double>(is));
    l.mean_logp = static_cast<T>(bin::read<double>(is));
  }

  TrainConfig tc_;
  Environment env_;
  Environment eval_env_;
  SacAgent<T> agent_;
  ReplayBuffer buffer_;
  Rng env_rng_, explore_rng_, update_rng_;
  std::uint64_t config_hash_ = 0, sac_hash_ = 0, tree_hash_ = 0;

  long long env_steps_ = 0;
  long long episodes_ = 0;
  double ep_return_ = 0.0;
  int ep_len_ = 0;
  double best_success_ = -1.0;
  long long best_step_ = 0;
  std::string best_blob_;
  Losses last_losses_{};
  std::vector<MetricRow> metrics_;
};

} // namespace gwnav
