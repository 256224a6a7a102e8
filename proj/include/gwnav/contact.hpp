#pragma once

// Wire-vessel contact: detection against the union of branch tubes, a
// velocity-level complementarity solve for normal impulses, and the
// contact-corrected time step. Without active contacts the corrected step
// reproduces the unconstrained step bit for bit.

#include <algorithm>
#include <limits>
#include <vector>

#include "gwnav/beam.hpp"
#include "gwnav/btd.hpp"
#include "gwnav/vessel.hpp"

namespace gwnav {

constexpr double kContactClearance = 0.1; // mm, activation band outside touch
constexpr double kContactBiasGain = 0.2;  // violation recovered per step
// Cap on the outward bias speed. Unclamped, a deep transient violation turns
// the bias into a restitution-like kick (0.2 * 2mm / 10ms = 40 mm/s) that
// pumps energy into a bounce cycle instead of settling. The cap equals the
// approach-side limit the clearance band already implies at dt = 0.01, and
// leaves shallow-violation behavior (bias below 2 mm/s) untouched.
constexpr double kContactBiasMaxSpeed = 2.0; // mm/s
constexpr int kPgsMaxIterations = 200;
constexpr double kPgsTolerance = 1e-4; // mm/s complementarity residual

struct Contact {
  int node = -1;
  Vec3 normal{0, 0, 0}; // unit, from the node toward the centerline
  double violation = 0.0; // node distance + wire radius - local vessel radius
};

/// Candidate contacts for the simulated nodes [0, free_nodes). A node is a
/// candidate when its surface is within `clearance` of the nearest wall of
/// the containing tube (violation > -clearance); positive violation means
/// actual penetration.
inline std::vector<Contact> detect_contacts(const VesselTree& tree,
                                            const GuidewireModel& model,
                                            const GuidewireState& state,
                                            int free_nodes,
                                            double clearance =
                                                kContactClearance) {
  std::vector<Contact> out;
  const double wire_r = model.config().radius;
  for (int i = 0; i < free_nodes; ++i) {
    LumenQuery q = tree.lumen(state.pos[i]);
    double violation = q.clearance_deficit + wire_r;
    if (violation <= -clearance) continue;
    double dist = q.best.distance;
    if (dist < 1e-9) continue; // on the axis: every direction is free
    Contact c;
    c.node = i;
    c.normal = (q.best.point - state.pos[i]) / dist;
    c.violation = violation;
    out.push_back(c);
  }
  return out;
}

/// True when any simulated node is farther than twice the local radius from
/// every centerline: the wire has left the vasculature beyond recovery.
inline bool escaped(const VesselTree& tree, const GuidewireModel& model,
                    const GuidewireState& state) {
  const int m = first_driven_node(model, state.inserted_length);
  for (int i = 0; i < m; ++i)
    if (tree.lumen(state.pos[i]).escape_margin > 0.0) return true;
  return false;
}

struct PgsResult {
  VecX lambda;
  double residual = 0.0;
  int iterations = 0;
};

/// Projected Gauss-Seidel for the LCP  w = W lambda + q,  0 <= lambda
/// perpendicular to w >= 0, with W symmetric positive definite. Fixed sweep
/// order keeps the result deterministic; an optional warm start carries the
/// impulses of persistent contacts across steps.
inline PgsResult pgs_solve(const MatX& w, const VecX& q,
                           int max_iter = kPgsMaxIterations,
                           double tol = kPgsTolerance,
                           const VecX* warm = nullptr) {
  const int m = static_cast<int>(q.size());
  PgsResult res;
  res.lambda = warm ? VecX(warm->cwiseMax(0.0)) : VecX(VecX::Zero(m));
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < m; ++i) {
      double wi = q[i] + w.row(i).dot(res.lambda);
      double diag = w(i, i);
      require(diag > 0.0, ErrorKind::numerical,
              "contact system lost definiteness");
      res.lambda[i] = std::max(0.0, res.lambda[i] - wi / diag);
    }
    res.iterations = it + 1;
    res.residual = 0.0;
    for (int i = 0; i < m; ++i) {
      double wi = q[i] + w.row(i).dot(res.lambda);
      res.residual = std::max(res.residual, std::abs(std::min(res.lambda[i], wi)));
    }
    if (res.residual <= tol) break;
  }
  return res;
}

/// Direct active-set solve of the same LCP, used to polish a Gauss-Seidel
/// iterate that ran out of iterations (tens of contacts coupled through a
/// near-inextensible wire can condition W beyond what 200 sweeps resolve).
/// Seeds the active set from the iterate, then adds violated / drops
/// negative constraints until the complementarity conditions hold.
inline PgsResult active_set_polish(const MatX& w, const VecX& q,
                                   const VecX& seed,
                                   double tol = kPgsTolerance) {
  const int m = static_cast<int>(q.size());
  std::vector<bool> active(m);
  for (int i = 0; i < m; ++i) active[i] = seed[i] > 0.0;
  PgsResult best;
  best.lambda = seed.cwiseMax(0.0);
  best.residual = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 20 + 4 * m; ++round) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (active[i]) idx.push_back(i);
    const int s = static_cast<int>(idx.size());
    MatX ws(s, s);
    VecX qs(s);
    for (int a = 0; a < s; ++a) {
      qs[a] = q[idx[a]];
      for (int b = 0; b < s; ++b) ws(a, b) = w(idx[a], idx[b]);
    }
    // tiny ridge keeps redundant (rank-deficient) contact sets solvable
    ws.diagonal().array() += 1e-12 * (1.0 + ws.diagonal().maxCoeff());
    VecX ls = s > 0 ? VecX(ws.ldlt().solve(-qs)) : VecX(0);

    int most_negative = -1;
    double worst_l = -1e-12;
    for (int a = 0; a < s; ++a)
      if (ls[a] < worst_l) worst_l = ls[a], most_negative = idx[a];
    if (most_negative >= 0) {
      active[most_negative] = false;
      continue;
    }
    VecX lambda = VecX::Zero(m);
    for (int a = 0; a < s; ++a) lambda[idx[a]] = std::max(0.0, ls[a]);
    VecX slack = w * lambda + q;
    double residual = 0.0;
    int most_violated = -1;
    double worst_w = -tol;
    for (int i = 0; i < m; ++i) {
      residual = std::max(residual, std::abs(std::min(lambda[i], slack[i])));
      if (!active[i] && slack[i] < worst_w)
        worst_w = slack[i], most_violated = i;
    }
    if (residual < best.residual) {
      best.lambda = lambda;
      best.residual = residual;
    }
    if (most_violated < 0) break;
    active[most_violated] = true;
  }
  return best;
}

struct ContactStepInfo {
  std::vector<Contact> contacts;
  VecX lambda;        // impulse magnitudes, one per contact
  int pgs_iterations = 0;
  double pgs_residual = 0.0;
  bool polished = false; // Gauss-Seidel needed the active-set fallback
};

/// Impulses of the previous step keyed by node, used to warm-start the
/// Gauss-Seidel sweeps: persistent contacts (a wire resting on a wall)
/// converge in a few iterations instead of re-solving from scratch.
struct ContactCache {
  std::vector<double> lambda_by_node;
};

/// One time step inside the vessel. Active set: every node whose surface is
/// within the clearance band right now, plus nodes the unconstrained
/// velocities would carry into the band this step (covers approaches faster
/// than band / dt, which single-point detection would tunnel through).
/// Impulses then bound each node's approach rate via the violation bias.
inline GuidewireState corrected_step(const GuidewireModel& model,
                                     const GuidewireState& state,
                                     const VesselTree& tree,
                                     const Controls& controls, double dt,
                                     ExternalForces ext = {},
                                     ContactStepInfo* info = nullptr,
                                     ContactCache* cache = nullptr) {
  BtdSystem sys = assemble_system(model, state, controls, dt, ext);
  BtdFactorization fact(sys.matrix);
  VecX dv = fact.solve(sys.rhs);
  VecX v_free(6 * sys.free_nodes);
  for (int i = 0; i < sys.free_nodes; ++i)
    v_free.segment<6>(6 * i) = state.vel[i] + dv.segment<6>(6 * i);

  const double wire_r = model.config().radius;
  std::vector<Contact> contacts;
  for (int i = 0; i < sys.free_nodes; ++i) {
    LumenQuery cur = tree.lumen(state.pos[i]);
    double violation = cur.clearance_deficit + wire_r;
    Vec3 anchor = state.pos[i];
    LumenQuery geo = cur;
    if (violation <= -kContactClearance) {
      // not in the band yet: check where the free motion would end up
      Vec3 predicted = state.pos[i] + dt * v_free.segment<3>(6 * i);
      LumenQuery pred = tree.lumen(predicted);
      if (pred.clearance_deficit + wire_r <= -kContactClearance) continue;
      anchor = predicted;
      geo = pred;
    }
    if (geo.best.distance < 1e-9) continue; // on the axis: all directions free
    Contact c;
    c.node = i;
    c.normal = (geo.best.point - anchor) / geo.best.distance;
    c.violation = violation;
    contacts.push_back(c);
  }
  if (contacts.empty()) {
    if (info) *info = ContactStepInfo{};
    if (cache) cache->lambda_by_node.assign(model.num_nodes(), 0.0);
    return finalize_step(model, state, sys, v_free);
  }

  // Delassus operator W = J A^-1 J^T, one tridiagonal solve per contact;
  // the solve vectors double as impulse responses when applying lambda.
  const int m = static_cast<int>(contacts.size());
  std::vector<VecX> response(m);
  for (int i = 0; i < m; ++i) {
    VecX rhs = VecX::Zero(6 * sys.free_nodes);
    rhs.segment<3>(6 * contacts[i].node) = contacts[i].normal;
    response[i] = fact.solve(rhs);
  }
  MatX w(m, m);
  VecX q(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j)
      w(i, j) =
          contacts[j].normal.dot(response[i].segment<3>(6 * contacts[j].node));
    double bias = std::min(kContactBiasMaxSpeed,
                           kContactBiasGain * contacts[i].violation / dt);
    q[i] = contacts[i].normal.dot(v_free.segment<3>(6 * contacts[i].node)) -
           bias;
  }

  VecX warm = VecX::Zero(m);
  if (cache && !cache->lambda_by_node.empty())
    for (int i = 0; i < m; ++i)
      warm[i] = cache->lambda_by_node[contacts[i].node];
  PgsResult pgs = pgs_solve(w, q, kPgsMaxIterations, kPgsTolerance, &warm);
  bool polished = false;
  if (pgs.residual > kPgsTolerance) {
    PgsResult exact = active_set_polish(w, q, pgs.lambda);
    if (exact.residual < pgs.residual) {
      pgs.lambda = exact.lambda;
      pgs.residual = exact.residual;
      polished = true;
    }
  }
  VecX v_corr = v_free;
  for (int i = 0; i < m; ++i)
    if (pgs.lambda[i] != 0.0) v_corr += pgs.lambda[i] * response[i];

  if (cache) {
    cache->lambda_by_node.assign(model.num_nodes(), 0.0);
    for (int i = 0; i < m; ++i)
      cache->lambda_by_node[contacts[i].node] = pgs.lambda[i];
  }
  if (info) {
    info->contacts = std::move(contacts);
    info->lambda = pgs.lambda;
    info->pgs_iterations = pgs.iterations;
    info->pgs_residual = pgs.residual;
    info->polished = polished;
  }
  return finalize_step(model, state, sys, v_corr);
}

} // namespace gwnav
