#pragma once

// Builtin anatomy catalog: the four training bifurcations, the five
// sensitivity variants, and two larger evaluation trees (a composed
// three-level cascade and a seeded coronary-like tree with tapering radii).

#include "gwnav/vessel.hpp"

namespace gwnav {

/// Training pattern i of 4: straight/curved entry crossed with
/// narrow/wide exit splits, constant 2 mm radius.
inline BifurcationSpec training_spec(int i) {
  require(i >= 0 && i < 4, ErrorKind::config, "training pattern index 0..3");
  BifurcationSpec s;
  s.entry_length = 50.0;
  s.radius = 2.0;
  s.entry_curvature = (i >= 2) ? 0.012 : 0.0; // curved entry for patterns 2,3
  const bool wide = (i % 2) == 1;
  const double up = wide ? 0.90 : 0.40;
  const double down = wide ? -0.70 : -0.30;
  s.exits[0] = ExitSpec{up, 0.0, 45.0, wide ? 0.015 : 0.0, 1.0};
  s.exits[1] = ExitSpec{down, 0.0, 45.0, wide ? -0.010 : 0.0, 1.0};
  if (i >= 2) {
    s.exits[0].out_of_plane = 0.15;
    s.exits[1].out_of_plane = -0.10;
  }
  return s;
}

inline std::vector<VesselTree> builtin_training_set() {
  std::vector<VesselTree> out;
  for (int i = 0; i < 4; ++i) out.push_back(generate_bifurcation(training_spec(i)));
  return out;
}

/// Sensitivity variants of training pattern 0:
///   0: rigidly rotated 45 degrees about a skew axis
///   1: rigidly translated by 50 mm
///   2..4: re-generated with altered takeoffs/curvatures/tilts
inline std::vector<VesselTree> builtin_sensitivity_set() {
  std::vector<VesselTree> out;
  const VesselTree base = generate_bifurcation(training_spec(0));
  out.push_back(rigid_transform(
      base, quat_about(Vec3(1, 1, 1).normalized(), kPi / 4), Vec3::Zero()));
  out.push_back(rigid_transform(base, Quat::Identity(), Vec3(30, 40, 0)));

  BifurcationSpec v1 = training_spec(0);
  v1.exits[0] = ExitSpec{0.61, 0.10, 45.0, 0.020, 1.0};
  v1.exits[1] = ExitSpec{-0.52, -0.05, 45.0, 0.010, 1.0};
  out.push_back(generate_bifurcation(v1));

  BifurcationSpec v2 = training_spec(0);
  v2.entry_curvature = 0.015;
  v2.exits[0] = ExitSpec{0.35, -0.12, 45.0, -0.015, 1.0};
  v2.exits[1] = ExitSpec{-0.60, 0.08, 45.0, 0.0, 1.0};
  out.push_back(generate_bifurcation(v2));

  BifurcationSpec v3 = training_spec(0);
  v3.exits[0] = ExitSpec{0.96, 0.20, 45.0, 0.025, 1.0};
  v3.exits[1] = ExitSpec{-0.35, 0.0, 45.0, -0.012, 1.0};
  out.push_back(generate_bifurcation(v3));
  return out;
}

/// Three-level cascade of four bifurcation units; five terminals, up to
/// three junction decisions on a single path.
inline VesselTree builtin_composed_tree() {
  std::vector<ComposeUnit> units;
  units.push_back({generate_bifurcation(training_spec(0)), -1, 0.0});
  // second level on both exits of the base unit, third level on the upper
  // exit of the second unit (branch 4 of the grown tree)
  units.push_back({generate_bifurcation(training_spec(1)), 1,
                   units[0].tree.branches[1].length()});
  units.push_back({generate_bifurcation(training_spec(2)), 2,
                   units[0].tree.branches[2].length()});
  units.push_back({generate_bifurcation(training_spec(3)), 4,
                   units[1].tree.branches[1].length()});
  return compose_tree(units);
}

/// Seeded cascade with coronary-like proportions: radii taper from 2.0 mm
/// at the root to about 1.2 mm at depth three, alternating turn directions.
inline VesselTree builtin_coronary_tree(std::uint64_t seed = 20260825ull) {
  Rng rng(seed);
  const int levels = 4;
  // taper 2.0 -> 1.2 mm over the first three levels, constant after
  std::vector<double> level_radius(levels + 1);
  for (int l = 0; l <= levels; ++l)
    level_radius[l] = std::max(
        1.2, 2.0 * std::pow(1.2 / 2.0, static_cast<double>(l) / (levels - 1)));

  std::vector<ComposeUnit> units;
  for (int l = 0; l < levels; ++l) {
    BifurcationSpec s;
    s.radius = level_radius[l];
    s.entry_length = rng.uniform(35.0, 50.0);
    s.entry_curvature = rng.uniform(0.005, 0.018);
    s.entry_plane = rng.uniform(0.0, 2.0 * kPi);
    const double sign = (l % 2 == 0) ? 1.0 : -1.0;
    const double taper = level_radius[l + 1] / level_radius[l];
    s.exits[0] = ExitSpec{sign * rng.uniform(0.35, 0.60),
                          rng.uniform(-0.20, 0.20), rng.uniform(38.0, 50.0),
                          rng.uniform(-0.015, 0.015), taper};
    s.exits[1] = ExitSpec{-sign * rng.uniform(0.45, 0.85),
                          rng.uniform(-0.20, 0.20), rng.uniform(38.0, 50.0),
                          rng.uniform(-0.015, 0.015), taper};
    units.push_back({generate_bifurcation(s), -1, 0.0});
  }
  // chain: unit 1 on unit 0's first exit, unit 2 on unit 1's first exit,
  // unit 3 on unit 2's second exit (branch ids in the grown tree)
  units[1].attach_branch = 1;
  units[1].attach_arc = units[0].tree.branches[1].length();
  units[2].attach_branch = 4;
  units[2].attach_arc = units[1].tree.branches[1].length();
  units[3].attach_branch = 8;
  units[3].attach_arc = units[2].tree.branches[2].length();
  return compose_tree(units);
}

/// The coronary-like tree warped by a fixed smooth displacement field.
inline VesselTree builtin_coronary_deformed() {
  VesselTree base = builtin_coronary_tree();
  Vec3 lo = base.branches[0].box_lo, hi = base.branches[0].box_hi;
  for (const auto& b : base.branches) {
    lo = lo.cwiseMin(b.box_lo);
    hi = hi.cwiseMax(b.box_hi);
  }
  const Vec3 mid = 0.5 * (lo + hi);
  RbfField field;
  field.bumps.push_back({mid + Vec3(20, 10, 0), 30.0, Vec3(0, 4, 5)});
  field.bumps.push_back({mid - Vec3(25, 0, 10), 28.0, Vec3(3, -4, 0)});
  field.bumps.push_back({mid + Vec3(0, -20, 15), 32.0, Vec3(-4, 0, 4)});
  return deform_tree(base, field);
}

/// Named lookup used by the command-line tools.
inline std::vector<VesselTree> anatomy_set(const std::string& name) {
  if (name == "training4") return builtin_training_set();
  if (name == "sensitivity5") return builtin_sensitivity_set();
  if (name == "composed") return {builtin_composed_tree()};
  if (name == "coronary_like") return {builtin_coronary_tree()};
  if (name == "coronary_deformed") return {builtin_coronary_deformed()};
  fail(ErrorKind::usage,
       "unknown anatomy set '" + name +
           "' (training4, sensitivity5, composed, coronary_like, "
           "coronary_deformed)");
}

} // namespace gwnav
