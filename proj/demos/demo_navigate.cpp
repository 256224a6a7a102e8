// Build a small forked vessel by hand, push a guidewire through it, and let
// a ten-line reactive policy steer at the junction. Shows the pieces a
// custom experiment needs: tree construction, Environment, the observation
// features, and run_episode. No training involved.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gwnav/env.hpp"

using namespace gwnav;

namespace {

VesselTree forked_vessel() {
  VesselTree t;
  VesselBranch trunk;
  trunk.id = 0;
  trunk.parent = -1;
  for (int k = 0; k <= 25; ++k) {
    trunk.points.emplace_back(k, 0.0, 0.0);
    trunk.radii.push_back(2.0);
  }
  t.branches.push_back(trunk);

  // Children take off smoothly - the heading turns toward its final
  // direction over the first few millimetres, as a real ostium would.
  auto child = [&](int id, const Vec3& dir) {
    VesselBranch b;
    b.id = id;
    b.parent = 0;
    Vec3 p = t.branches[0].points.back();
    Vec3 u1 = dir.normalized();
    for (int k = 0; k <= 30; ++k) {
      b.points.push_back(p);
      b.radii.push_back(2.0);
      double blend = std::min(1.0, k / 12.0);
      p += ((1.0 - blend) * Vec3(1, 0, 0) + blend * u1).normalized();
    }
    t.branches.push_back(b);
  };
  child(1, Vec3(1, 0, 0));  // straight continuation
  child(2, Vec3(std::sqrt(3.0), 1, 0));  // 30-degree side branch
  t.insertion = VesselInsertion{0, 0.0, Vec3(0, 1, 0)};
  t.targets.push_back(VesselTarget{0, 1, 20.0, Vec3::Zero()});
  t.targets.push_back(VesselTarget{1, 2, 20.0, Vec3::Zero()});
  t.rebuild();
  return t;
}

} // namespace

int main() {
  GuidewireConfig wire; // stock 310 mm wire with a curved 6 mm tip
  EpisodeConfig rules;
  Environment env(wire, rules, {forked_vessel()});

  // The curvature coupling (omega) reads how the pre-curved tip is oriented
  // relative to the junction: negative is toward the chosen branch. The
  // policy rolls the wire in one direction and reverses whenever a step
  // stopped improving the coupling - a bang-bang gradient seeker.
  double direction = 1.0, last_omega = 1.0;
  auto seek = [&](const Observation& o) {
    if (o.omega > last_omega + 1e-6) direction = -direction;
    last_omega = o.omega;
    return 0.8 * direction;
  };

  for (int target = 0; target < 2; ++target) {
    Rng rng(7);
    direction = 1.0;
    last_omega = 1.0;
    std::printf("target %d (%s branch)\n", target,
                target == 0 ? "straight" : "side");
    env.reset_to(0, target, rng);
    EpisodeReport rep = run_episode(
        env,
        [&](const Observation& o) { return seek(o); },
        [&](const Environment& e, double action, const StepResult& r) {
          if (e.control_steps() % 10 == 0)
            std::printf("  step %3d  tip (%6.2f, %6.2f, %6.2f)  omega %+.3f  "
                        "action %+.2f  reward %+.3f\n",
                        e.control_steps(), e.state().pos[0].x(),
                        e.state().pos[0].y(), e.state().pos[0].z(),
                        r.observation.omega, action, r.reward);
        });
    std::printf("  -> %s after %d steps, %d policy calls\n\n",
                rep.truncated ? "truncated" : to_string(rep.terminated),
                rep.control_steps, rep.policy_invocations);
  }
  return 0;
}
