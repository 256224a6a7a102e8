#pragma once

// FNV-1a fingerprints of everything that defines a run: physics config,
// episode rules, controller hyperparameters, anatomy geometry down to exact
// coordinate bits. Checkpoints embed these so artifacts refuse to run under
// a silently different setup.

#include <bit>
#include <cstdint>
#include <vector>

#include "gwnav/beam.hpp"
#include "gwnav/env.hpp"
#include "gwnav/sac.hpp"
#include "gwnav/vessel.hpp"

namespace gwnav {
namespace detail {

inline std::uint64_t mixd(std::uint64_t h, double v) {
  return fnv1a_mix(std::bit_cast<std::uint64_t>(v), h);
}

inline std::uint64_t mixi(std::uint64_t h, std::int64_t v) {
  return fnv1a_mix(static_cast<std::uint64_t>(v), h);
}

} // namespace detail

inline std::uint64_t fingerprint(const GuidewireConfig& c) {
  using detail::mixd;
  std::uint64_t h = fnv1a("guidewire");
  h = mixd(h, c.total_length);
  h = mixd(h, c.tip_length);
  h = mixd(h, c.tip_curvature);
  h = mixd(h, c.element_length);
  h = mixd(h, c.radius);
  h = mixd(h, c.young_modulus);
  h = mixd(h, c.poisson_ratio);
  h = mixd(h, c.density);
  h = mixd(h, c.rayleigh_mass);
  h = mixd(h, c.rayleigh_stiffness);
  for (int i = 0; i < 3; ++i) h = mixd(h, c.gravity(i));
  return h;
}

inline std::uint64_t fingerprint(const EpisodeConfig& e) {
  using detail::mixd;
  using detail::mixi;
  std::uint64_t h = fnv1a("episode");
  h = mixd(h, e.dt);
  h = mixd(h, e.control_period);
  h = mixd(h, e.push_speed);
  h = mixd(h, e.max_roll_rate);
  h = mixd(h, e.success_radius);
  h = mixd(h, e.wrong_branch_depth);
  h = mixi(h, e.max_control_steps);
  h = mixd(h, e.region_radius);
  h = mixd(h, e.initial_insertion);
  h = mixd(h, e.max_tilt);
  return h;
}

inline std::uint64_t fingerprint(const SacConfig& s) {
  using detail::mixd;
  using detail::mixi;
  std::uint64_t h = fnv1a("sac");
  h = mixd(h, s.lr);
  h = mixi(h, s.batch);
  h = mixd(h, s.gamma);
  h = mixd(h, s.tau);
  h = mixi(h, s.warmup);
  h = mixi(h, s.updates_per_step);
  h = mixd(h, s.target_entropy);
  h = mixi(h, s.buffer_capacity);
  for (int v : s.hidden) h = mixi(h, v);
  return h;
}

inline std::uint64_t fingerprint(const VesselTree& t) {
  using detail::mixd;
  using detail::mixi;
  std::uint64_t h = fnv1a("tree");
  for (const VesselBranch& b : t.branches) {
    h = mixi(h, b.parent);
    h = mixi(h, static_cast<std::int64_t>(b.points.size()));
    for (size_t k = 0; k < b.points.size(); ++k) {
      for (int i = 0; i < 3; ++i) h = mixd(h, b.points[k](i));
      h = mixd(h, b.radii[k]);
    }
  }
  h = mixi(h, t.insertion.branch);
  h = mixd(h, t.insertion.arc);
  for (int i = 0; i < 3; ++i) h = mixd(h, t.insertion.normal(i));
  for (const VesselTarget& tg : t.targets) {
    h = mixi(h, tg.branch);
    h = mixd(h, tg.arc);
  }
  return h;
}

/// Identity of the observation/physics setup a policy was trained under.
/// Anatomy is hashed separately: zero-shot evaluation deliberately runs a
/// policy on trees it was not trained on, but never under a different wire
/// or episode rule set.
inline std::uint64_t fingerprint(const GuidewireConfig& wire,
                                 const EpisodeConfig& episode) {
  std::uint64_t h = fnv1a("environment");
  h = fnv1a_mix(fingerprint(wire), h);
  h = fnv1a_mix(fingerprint(episode), h);
  return h;
}

inline std::uint64_t fingerprint(const std::vector<VesselTree>& trees) {
  std::uint64_t h = fnv1a("tree-set");
  for (const VesselTree& t : trees) h = fnv1a_mix(fingerprint(t), h);
  return h;
}

} // namespace gwnav
