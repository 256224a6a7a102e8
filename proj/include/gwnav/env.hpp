#pragma once

// Episode environment for navigation control: seats a guidewire in a sampled
// anatomy, advances the physics under a scalar roll action at constant push
// speed, and emits a shape-invariant observation plus shaped reward. Every
// observation component is a dot product or ratio of co-rotating quantities,
// so rigidly moving anatomy and wire together leaves it unchanged.

#include <algorithm>
#include <array>
#include <cmath>
#include <iosfwd>
#include <utility>
#include <vector>

#include "gwnav/beam.hpp"
#include "gwnav/contact.hpp"
#include "gwnav/serialize.hpp"
#include "gwnav/vessel.hpp"

namespace gwnav {

// Intermediate goal placed this far past a junction along the path while the
// tip works through the junction's region.
constexpr double kIntermediateAdvance = 30.0; // mm
// Free-node speed beyond which the state counts as diverged (two orders
// above anything the wire reaches in a contained episode).
constexpr double kDivergedSpeed = 1e4; // mm/s
// Floor for the distance reference so lambda stays finite when a segment
// activates on top of its own target.
constexpr double kMinReference = 1e-6; // mm

struct EpisodeConfig {
  double dt = 0.01;                // s, physics step
  double control_period = 0.1;     // s, one action held this long
  double push_speed = 10.0;        // mm/s, constant advance
  double max_roll_rate = kPi;      // rad/s at |action| = 1
  double success_radius = 3.0;     // mm around the target
  double wrong_branch_depth = 5.0; // mm into an off-path child
  int max_control_steps = 600;
  double region_radius = 20.0;      // mm, junction sphere where the agent acts
  double initial_insertion = 10.0;  // mm of wire inside the vessel at reset
  double max_tilt = 15.0 * kPi / 180.0; // rad, seating cone half-angle

  int substeps() const {
    return static_cast<int>(std::lround(control_period / dt));
  }

  void validate() const {
    require(dt > 0.0 && control_period > 0.0 && push_speed > 0.0 &&
                max_roll_rate > 0.0 && success_radius > 0.0 &&
                wrong_branch_depth > 0.0 && max_control_steps > 0 &&
                region_radius > 0.0 && initial_insertion > 0.0 &&
                max_tilt >= 0.0,
            ErrorKind::config, "episode parameters must be positive");
    require(std::abs(substeps() * dt - control_period) <= 1e-9,
            ErrorKind::config,
            "control period must be an integer multiple of dt");
  }
};

enum class Termination { none, success, wrong_branch, escaped, diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::success: return "success";
    case Termination::wrong_branch: return "wrong_branch";
    case Termination::escaped: return "escaped";
    case Termination::diverged: return "diverged";
  }
  return "none";
}

/// Eleven shape-invariant components. theta are tip/centerline tangent
/// alignments at three samples, lambda the target distance normalized by its
/// value at segment activation, omega the curvature-vs-wrong-branch coupling
/// at the active junction, s_speed the axial tip speed over the push speed.
struct Observation {
  std::array<double, 3> theta_now{};
  std::array<double, 3> theta_prev{};
  double lambda_now = 0.0;
  double lambda_prev = 0.0;
  double prev_action = 0.0;
  double omega = 0.0;
  double s_speed = 0.0;

  static constexpr int kSize = 11;

  std::array<double, kSize> flatten() const {
    return {theta_now[0], theta_now[1], theta_now[2],
            theta_prev[0], theta_prev[1], theta_prev[2],
            lambda_now, lambda_prev, prev_action, omega, s_speed};
  }

  static Observation unflatten(const std::array<double, kSize>& v) {
    Observation o;
    o.theta_now = {v[0], v[1], v[2]};
    o.theta_prev = {v[3], v[4], v[5]};
    o.lambda_now = v[6];
    o.lambda_prev = v[7];
    o.prev_action = v[8];
    o.omega = v[9];
    o.s_speed = v[10];
    return o;
  }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  Termination terminated = Termination::none;
  bool truncated = false;
};

/// Shaped step reward: a sigmoid bonus for curving away from the wrong
/// branch, progress toward the segment target, and an action magnitude cost.
/// Zero exactly at (omega = 0.1, lambda at its reference, no action).
inline double reward(double omega, double lambda_now, double lambda_ref,
                     double action) {
  double align = 2.0 / (1.0 + std::exp(5.0 * (omega - 0.1))) - 1.0;
  double progress = 0.5 * (1.0 - lambda_now / lambda_ref);
  return align + progress - 0.2 * std::abs(action);
}

/// Point on a path at a cumulative arc from the insertion (clamped to the
/// path's ends).
inline Vec3 path_point_at(const VesselTree& tree, const Path& path,
                          double cum_arc) {
  for (size_t i = 0; i < path.branch_ids.size(); ++i) {
    int b = path.branch_ids[i];
    double len = tree.branches[b].length();
    if (cum_arc <= path.entry_arc[i] + len || i + 1 == path.branch_ids.size())
      return tree.point_at(b,
                           std::clamp(cum_arc - path.entry_arc[i], 0.0, len));
  }
  fail(ErrorKind::state, "path has no branches");
}

/// Which goal the distance feature refers to right now: the active junction's
/// intermediate point (junction >= 0) or the final target (junction = -1),
/// with the distance recorded when the segment activated.
struct SegmentContext {
  Vec3 target{0, 0, 0};
  double reference = 1.0;
  int junction = -1;
};

/// Build the observation for a state. `prev` supplies the previous control
/// step's values; pass nullptr right after reset (history collapses onto the
/// present).
inline Observation observe(const GuidewireModel& model,
                           const GuidewireState& state, const VesselTree& tree,
                           const Path& path, const SegmentContext& seg,
                           double push_speed, const Observation* prev,
                           double prev_action) {
  auto frames = tip_frames(model, state, 3, 2.0);
  Observation o;
  NearestPoint tip_np;
  for (int i = 0; i < 3; ++i) {
    NearestPoint np = tree.nearest(frames[i].first, path.branch_ids);
    if (i == 0) tip_np = np;
    o.theta_now[i] = frames[i].second.dot(np.tangent);
    require(std::abs(o.theta_now[i]) <= 1.0 + 1e-9, ErrorKind::numerical,
            "tangent alignment left the unit interval");
  }
  o.lambda_now = (frames[0].first - seg.target).norm() / seg.reference;
  if (seg.junction >= 0) {
    const PathJunction& jn = path.junctions[seg.junction];
    const Vec3& t = jn.correct_tangent;
    Vec3 kv = tip_curvature_vector(model, state);
    Vec3 k_p = kv - t * t.dot(kv);
    Vec3 w_p = jn.wrong_direction - t * t.dot(jn.wrong_direction);
    o.omega = k_p.dot(w_p);
  }
  o.s_speed = state.vel[0].head<3>().dot(tip_np.tangent) / push_speed;
  o.prev_action = prev ? prev_action : 0.0;
  o.theta_prev = prev ? prev->theta_now : o.theta_now;
  o.lambda_prev = prev ? prev->lambda_now : o.lambda_now;
  return o;
}

class Environment {
public:
  Environment(const GuidewireConfig& wire, const EpisodeConfig& episode,
              std::vector<VesselTree> trees)
      : model_(wire), ep_(episode), trees_(std::move(trees)) {
    ep_.validate();
    require(!trees_.empty(), ErrorKind::config, "environment needs trees");
    for (const VesselTree& t : trees_)
      require(!t.targets.empty(), ErrorKind::config,
              "every tree needs at least one target");
  }

  /// Sample (tree, target) uniformly and seat the wire with a random roll
  /// and a random tilt inside the vessel cone.
  const Observation& reset(Rng& rng) {
    int tree = static_cast<int>(rng.uniform_index(trees_.size()));
    int target =
        static_cast<int>(rng.uniform_index(trees_[tree].targets.size()));
    return reset_to(tree, target, rng);
  }

  const Observation& reset_to(int tree_index, int target_index, Rng& rng) {
    require(tree_index >= 0 && tree_index < static_cast<int>(trees_.size()),
            ErrorKind::usage, "tree index out of range");
    tree_idx_ = tree_index;
    const VesselTree& t = tree();
    require(target_index >= 0 &&
                target_index < static_cast<int>(t.targets.size()),
            ErrorKind::usage, "target index out of range");
    target_idx_ = target_index;
    path_ = path_to_target(t, target_index);

    // Seating randomness: three draws in fixed order so matched seeds see
    // matched episodes on geometrically equivalent trees.
    double roll = 2.0 * kPi * rng.uniform();
    double azimuth = 2.0 * kPi * rng.uniform();
    double tilt_draw = rng.uniform();

    const VesselInsertion& ins = t.insertion;
    Vec3 point = t.point_at(ins.branch, ins.arc);
    Vec3 tangent = t.tangent_at(ins.branch, ins.arc);
    Vec3 normal = ins.normal;
    // keep the seated straight segment clear of the wall at full tilt
    double clearance =
        t.radius_at(ins.branch, ins.arc) - model_.config().radius;
    double cap = std::asin(
        std::clamp(0.9 * clearance / ep_.initial_insertion, 0.0, 1.0));
    double tilt = tilt_draw * std::min(ep_.max_tilt, cap);
    Quat rot = quat_about(quat_about(tangent, azimuth) * normal, tilt);
    InsertionPose pose{point, rot * tangent, rot * normal};
    state_ = seated_state(model_, pose, ep_.initial_insertion, roll);

    cache_ = ContactCache{};
    steps_ = 0;
    done_ = Termination::none;
    truncated_ = false;
    prev_action_ = 0.0;
    resolved_.assign(path_.junctions.size(), 0);
    segment_junction_ = -2; // forces the first segment activation
    update_segment_();
    observe_(true);
    return obs_;
  }

  /// Hold the action for one control period, then observe, reward and check
  /// termination: success, then wrong branch, then escape/divergence, then
  /// the step limit.
  StepResult step(double action) {
    require(done_ == Termination::none && !truncated_, ErrorKind::usage,
            "episode already finished");
    double a = std::clamp(action, -1.0, 1.0);
    Controls u{ep_.push_speed, a * ep_.max_roll_rate};
    for (int k = 0; k < ep_.substeps(); ++k)
      state_ = corrected_step(model_, state_, tree(), u, ep_.dt, {}, nullptr,
                              &cache_);
    ++steps_;

    double r = 0.0;
    if (state_.all_finite()) {
      update_segment_();
      prev_action_ = a;
      observe_(false);
      r = reward(obs_.omega, obs_.lambda_now, 1.0, a);
      double ratio = obs_.lambda_now;
      require(r <= 1.5 + 1e-9 &&
                  r >= -1.2 - 0.5 * std::max(0.0, ratio - 1.0) - 1e-9,
              ErrorKind::numerical, "reward left its guaranteed range");
      done_ = check_termination_();
    } else {
      // state is unusable; keep the last observation and record divergence
      done_ = Termination::diverged;
    }
    truncated_ =
        done_ == Termination::none && steps_ >= ep_.max_control_steps;
    return {obs_, r, done_, truncated_};
  }

  bool active() const {
    return done_ == Termination::none && !truncated_;
  }
  const VesselTree& tree() const { return trees_[tree_idx_]; }
  const Path& path() const { return path_; }
  const GuidewireModel& wire() const { return model_; }
  const GuidewireState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  const EpisodeConfig& episode() const { return ep_; }
  int tree_index() const { return tree_idx_; }
  int target_index() const { return target_idx_; }
  int control_steps() const { return steps_; }
  Termination terminated() const { return done_; }
  bool truncated() const { return truncated_; }
  int num_trees() const { return static_cast<int>(trees_.size()); }
  const VesselTree& tree_at(int i) const { return trees_.at(i); }

  /// Index of the junction the tip is currently working through (inside its
  /// region, not yet committed past it), or -1.
  int active_junction() const {
    return segment_junction_ >= 0 ? segment_junction_ : -1;
  }
  bool junction_resolved(int j) const { return resolved_[j] != 0; }
  const Vec3& segment_target() const { return segment_target_; }
  double distance_reference() const { return d0_; }
  SegmentContext segment_context() const {
    return {segment_target_, d0_, segment_junction_};
  }

  /// Snapshot of the in-flight episode, field by field. Configs and trees are
  /// not included; the loading environment must be built identically (the
  /// path is recomputed from the stored indices).
  void save_episode(std::ostream& os) const {
    bin::write<std::int32_t>(os, tree_idx_);
    bin::write<std::int32_t>(os, target_idx_);
    bin::write<std::int32_t>(os, steps_);
    bin::write<std::int32_t>(os, static_cast<std::int32_t>(done_));
    bin::write<std::uint8_t>(os, truncated_ ? 1 : 0);
    bin::write(os, prev_action_);
    bin::write<std::int32_t>(os, segment_junction_);
    for (int i = 0; i < 3; ++i) bin::write(os, segment_target_(i));
    bin::write(os, d0_);
    bin::write_vector(os, resolved_);
    for (double v : obs_.flatten()) bin::write(os, v);
    bin::write<std::uint64_t>(os, state_.pos.size());
    for (const Vec3& p : state_.pos)
      for (int i = 0; i < 3; ++i) bin::write(os, p(i));
    for (const Quat& q : state_.frame)
      for (int i = 0; i < 4; ++i) bin::write(os, q.coeffs()(i));
    for (const Vec6& v : state_.vel)
      for (int i = 0; i < 6; ++i) bin::write(os, v(i));
    for (int i = 0; i < 3; ++i) bin::write(os, state_.insertion.point(i));
    for (int i = 0; i < 3; ++i) bin::write(os, state_.insertion.tangent(i));
    for (int i = 0; i < 3; ++i) bin::write(os, state_.insertion.normal(i));
    bin::write(os, state_.inserted_length);
    bin::write(os, state_.proximal_roll);
    bin::write(os, state_.time);
    bin::write_vector(os, cache_.lambda_by_node);
  }

  void load_episode(std::istream& is) {
    tree_idx_ = bin::read<std::int32_t>(is);
    require(tree_idx_ >= 0 && tree_idx_ < num_trees(), ErrorKind::parse,
            "episode snapshot tree index out of range");
    target_idx_ = bin::read<std::int32_t>(is);
    require(target_idx_ >= 0 &&
                target_idx_ < static_cast<int>(tree().targets.size()),
            ErrorKind::parse, "episode snapshot target index out of range");
    path_ = path_to_target(tree(), target_idx_);
    steps_ = bin::read<std::int32_t>(is);
    int done = bin::read<std::int32_t>(is);
    require(done >= 0 && done <= 4, ErrorKind::parse,
            "episode snapshot has an unknown termination");
    done_ = static_cast<Termination>(done);
    truncated_ = bin::read<std::uint8_t>(is) != 0;
    prev_action_ = bin::read<double>(is);
    segment_junction_ = bin::read<std::int32_t>(is);
    for (int i = 0; i < 3; ++i) segment_target_(i) = bin::read<double>(is);
    d0_ = bin::read<double>(is);
    resolved_ = bin::read_vector<char>(is);
    require(resolved_.size() == path_.junctions.size(), ErrorKind::parse,
            "episode snapshot junction count mismatch");
    std::array<double, Observation::kSize> flat;
    for (double& v : flat) v = bin::read<double>(is);
    obs_ = Observation::unflatten(flat);
    auto n = bin::read<std::uint64_t>(is);
    require(n == static_cast<std::uint64_t>(model_.num_nodes()),
            ErrorKind::parse, "episode snapshot node count mismatch");
    state_.pos.resize(n);
    state_.frame.resize(n);
    state_.vel.resize(n);
    for (Vec3& p : state_.pos)
      for (int i = 0; i < 3; ++i) p(i) = bin::read<double>(is);
    for (Quat& q : state_.frame)
      for (int i = 0; i < 4; ++i) q.coeffs()(i) = bin::read<double>(is);
    for (Vec6& v : state_.vel)
      for (int i = 0; i < 6; ++i) v(i) = bin::read<double>(is);
    for (int i = 0; i < 3; ++i) state_.insertion.point(i) = bin::read<double>(is);
    for (int i = 0; i < 3; ++i)
      state_.insertion.tangent(i) = bin::read<double>(is);
    for (int i = 0; i < 3; ++i)
      state_.insertion.normal(i) = bin::read<double>(is);
    state_.inserted_length = bin::read<double>(is);
    state_.proximal_roll = bin::read<double>(is);
    state_.time = bin::read<double>(is);
    cache_.lambda_by_node = bin::read_vector<double>(is);
  }

private:
  const Vec3& final_target_() const {
    return tree().targets[target_idx_].position;
  }

  Vec3 intermediate_(int j) const {
    double arc = path_.junctions[j].path_arc + kIntermediateAdvance;
    if (arc >= path_.total_arc) return final_target_();
    return path_point_at(tree(), path_, arc);
  }

  // The control segment follows the tip: entering an unresolved junction's
  // region switches the goal to a point past that junction and re-references
  // the distance normalization; committing past the junction (or leaving the
  // region) switches back toward the final target.
  void update_segment_() {
    Vec3 tip = state_.pos[0];
    NearestPoint np = tree().nearest(tip, path_.branch_ids);
    double tip_arc = path_.arc_of(np.branch, np.arc);
    for (size_t j = 0; j < path_.junctions.size(); ++j)
      if (!resolved_[j] &&
          tip_arc >= path_.junctions[j].path_arc + ep_.wrong_branch_depth)
        resolved_[j] = 1;

    int active = -1;
    for (size_t j = 0; j < path_.junctions.size(); ++j)
      if (!resolved_[j] &&
          (tip - path_.junctions[j].center).norm() <= ep_.region_radius) {
        active = static_cast<int>(j);
        break;
      }
    if (active != segment_junction_) {
      segment_junction_ = active;
      segment_target_ = active >= 0 ? intermediate_(active) : final_target_();
      d0_ = std::max(kMinReference, (tip - segment_target_).norm());
    }
  }

  void observe_(bool first) {
    SegmentContext seg{segment_target_, d0_, segment_junction_};
    obs_ = observe(model_, state_, tree(), path_, seg, ep_.push_speed,
                   first ? nullptr : &obs_, prev_action_);
  }

  // Depth of the tip into off-path anatomy: local arc inside the containing
  // branch plus every full off-path branch above it.
  double wrong_depth_() const {
    LumenQuery q = tree().lumen(state_.pos[0]);
    int b = q.best.branch;
    if (path_.contains(b)) return 0.0;
    double depth = q.best.arc;
    for (int p = tree().branches[b].parent;
         p >= 0 && !path_.contains(p); p = tree().branches[p].parent)
      depth += tree().branches[p].length();
    return depth;
  }

  Termination check_termination_() const {
    if ((state_.pos[0] - final_target_()).norm() <= ep_.success_radius)
      return Termination::success;
    if (wrong_depth_() >= ep_.wrong_branch_depth)
      return Termination::wrong_branch;
    if (escaped(tree(), model_, state_)) return Termination::escaped;
    int m = first_driven_node(model_, state_.inserted_length);
    for (int i = 0; i < m; ++i)
      if (state_.vel[i].head<3>().norm() > kDivergedSpeed)
        return Termination::diverged;
    return Termination::none;
  }

  GuidewireModel model_;
  EpisodeConfig ep_;
  std::vector<VesselTree> trees_;

  int tree_idx_ = 0;
  int target_idx_ = 0;
  Path path_;
  GuidewireState state_;
  ContactCache cache_;
  Observation obs_;
  double prev_action_ = 0.0;
  int steps_ = 0;
  Termination done_ = Termination::none;
  bool truncated_ = false;
  std::vector<char> resolved_;
  int segment_junction_ = -1;
  Vec3 segment_target_{0, 0, 0};
  double d0_ = 1.0;
};

struct JunctionOutcome {
  int junction = -1;
  bool entered = false;
  bool passed = false;
};

struct EpisodeReport {
  bool success = false;
  Termination terminated = Termination::none;
  bool truncated = false;
  int control_steps = 0;
  double path_length = 0.0;
  int policy_invocations = 0;
  std::vector<JunctionOutcome> junctions;
};

/// Play out an already-seated episode: the wire is pushed on autopilot
/// (action 0) outside junction regions and the policy steers inside them.
/// `on_step` sees the environment after each control step (for tracing).
/// The report lists per-junction outcomes, so a failed cascade shows where
/// it broke.
template <typename Policy, typename OnStep>
EpisodeReport run_episode(Environment& env, Policy&& policy,
                          OnStep&& on_step) {
  EpisodeReport report;
  report.path_length = env.path().total_arc;
  report.junctions.resize(env.path().junctions.size());
  for (size_t j = 0; j < report.junctions.size(); ++j)
    report.junctions[j].junction = static_cast<int>(j);

  while (env.active()) {
    double action = 0.0;
    int j = env.active_junction();
    if (j >= 0) {
      report.junctions[j].entered = true;
      action = std::clamp(policy(env.observation()), -1.0, 1.0);
      ++report.policy_invocations;
    }
    StepResult r = env.step(action);
    on_step(env, action, r);
    report.terminated = r.terminated;
    report.truncated = r.truncated;
  }
  report.success = report.terminated == Termination::success;
  report.control_steps = env.control_steps();
  for (size_t j = 0; j < report.junctions.size(); ++j)
    report.junctions[j].passed = env.junction_resolved(static_cast<int>(j));
  return report;
}

/// Seat a fresh episode on the chosen tree/target and play it out.
template <typename Policy>
EpisodeReport navigate_tree(Environment& env, Policy&& policy, int tree_index,
                            int target_index, Rng& rng) {
  env.reset_to(tree_index, target_index, rng);
  return run_episode(env, policy,
                     [](const Environment&, double, const StepResult&) {});
}

} // namespace gwnav
