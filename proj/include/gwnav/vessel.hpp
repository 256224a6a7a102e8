#pragma once

// Rigid tubular vasculature: trees of centerline polylines with per-point
// radii, a parametric bifurcation generator, composition of units into
// larger anatomies, smooth deformation, proximity queries and file I/O.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gwnav/common.hpp"
#include "gwnav/geom.hpp"

namespace gwnav {

struct VesselBranch {
  int id = 0;
  int parent = -1; // -1 for the root
  std::vector<Vec3> points;
  std::vector<double> radii; // one per point, linear in between

  // derived by VesselTree::rebuild()
  std::vector<int> children;
  std::vector<double> cum_arc;
  Vec3 box_lo, box_hi;
  double max_radius = 0.0;

  double length() const { return cum_arc.empty() ? 0.0 : cum_arc.back(); }
};

struct VesselTarget {
  int id = 0;
  int branch = 0;
  double arc = 0.0;
  Vec3 position{0, 0, 0}; // derived
};

struct VesselInsertion {
  int branch = 0;
  double arc = 0.0;
  Vec3 normal{0, 1, 0}; // roll reference, kept orthonormal to the tangent
};

struct NearestPoint {
  int branch = -1;
  double arc = 0.0;
  Vec3 point{0, 0, 0};
  Vec3 tangent{1, 0, 0};
  double radius = 0.0;
  double distance = 0.0;
};

/// Union-of-tubes containment query result: the branch minimizing the wall
/// clearance deficit (distance minus local radius), plus an escape margin
/// that is positive only when the point is far outside every tube.
struct LumenQuery {
  NearestPoint best;           // minimizes distance - radius
  double clearance_deficit = 0; // distance - radius at `best`
  double escape_margin = 0;     // min over branches of distance - 2 radius
};

class VesselTree {
public:
  std::vector<VesselBranch> branches;
  VesselInsertion insertion;
  std::vector<VesselTarget> targets;

  /// Recompute derived data and validate structural invariants. Must be
  /// called after any mutation before queries are used.
  void rebuild() {
    require(!branches.empty(), ErrorKind::config, "tree has no branches");
    int root_count = 0;
    for (int i = 0; i < static_cast<int>(branches.size()); ++i) {
      VesselBranch& b = branches[i];
      require(b.id == i, ErrorKind::config,
              "branch ids must be dense and ordered");
      if (b.parent < 0)
        ++root_count;
      else
        require(b.parent < i, ErrorKind::config,
                "branch " + std::to_string(i) + " has a forward parent");
      require(b.points.size() >= 2, ErrorKind::config,
              "branch " + std::to_string(i) + " needs at least two points");
      require(b.points.size() == b.radii.size(), ErrorKind::config,
              "branch " + std::to_string(i) + " radii/point count mismatch");
      b.children.clear();
      b.cum_arc.assign(b.points.size(), 0.0);
      b.box_lo = b.box_hi = b.points[0];
      b.max_radius = 0.0;
      for (size_t k = 0; k < b.points.size(); ++k) {
        require(finite(b.points[k]) && std::isfinite(b.radii[k]) &&
                    b.radii[k] > 0.0,
                ErrorKind::config,
                "branch " + std::to_string(i) + " has invalid geometry");
        b.box_lo = b.box_lo.cwiseMin(b.points[k]);
        b.box_hi = b.box_hi.cwiseMax(b.points[k]);
        b.max_radius = std::max(b.max_radius, b.radii[k]);
        if (k > 0) {
          double seg = (b.points[k] - b.points[k - 1]).norm();
          require(seg > 1e-9 && seg <= 1.0 + 1e-9, ErrorKind::config,
                  "branch " + std::to_string(i) +
                      " centerline spacing must be positive and <= 1 mm");
          b.cum_arc[k] = b.cum_arc[k - 1] + seg;
        }
      }
    }
    require(root_count == 1 && branches[0].parent < 0, ErrorKind::config,
            "exactly one root branch (id 0) is required");
    for (auto& b : branches)
      if (b.parent >= 0) {
        branches[b.parent].children.push_back(b.id);
        require((b.points.front() - branches[b.parent].points.back()).norm() <
                    1e-6,
                ErrorKind::config,
                "branch " + std::to_string(b.id) +
                    " does not start at its parent's end");
      }

    require(insertion.branch >= 0 &&
                insertion.branch < static_cast<int>(branches.size()),
            ErrorKind::config, "insertion references a missing branch");
    require(insertion.arc >= 0.0 &&
                insertion.arc <= branches[insertion.branch].length() + 1e-9,
            ErrorKind::config, "insertion arc outside its branch");
    Vec3 t = tangent_at(insertion.branch, insertion.arc);
    Vec3 n = insertion.normal - insertion.normal.dot(t) * t;
    require(n.norm() > 1e-6, ErrorKind::config,
            "insertion normal parallel to the tangent");
    insertion.normal = n.normalized();

    for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
      VesselTarget& tg = targets[i];
      require(tg.id == i, ErrorKind::config, "target ids must be dense");
      require(tg.branch >= 0 && tg.branch < static_cast<int>(branches.size()),
              ErrorKind::config, "target references a missing branch");
      require(tg.arc >= 0.0 && tg.arc <= branches[tg.branch].length() + 1e-9,
              ErrorKind::config, "target arc outside its branch");
      tg.position = point_at(tg.branch, tg.arc);
    }
  }

  Vec3 point_at(int branch, double arc) const {
    const VesselBranch& b = branches.at(branch);
    auto [k, t] = locate(b, arc);
    return (1.0 - t) * b.points[k] + t * b.points[k + 1];
  }

  double radius_at(int branch, double arc) const {
    const VesselBranch& b = branches.at(branch);
    auto [k, t] = locate(b, arc);
    return (1.0 - t) * b.radii[k] + t * b.radii[k + 1];
  }

  /// Central-difference tangent, oriented root-to-leaf.
  Vec3 tangent_at(int branch, double arc) const {
    const VesselBranch& b = branches.at(branch);
    double lo = std::max(0.0, arc - 0.5);
    double hi = std::min(b.length(), arc + 0.5);
    Vec3 d = point_at(branch, hi) - point_at(branch, lo);
    require(d.norm() > 1e-12, ErrorKind::numerical, "degenerate tangent");
    return d.normalized();
  }

  Vec3 insertion_point() const {
    return point_at(insertion.branch, insertion.arc);
  }
  Vec3 insertion_tangent() const {
    return tangent_at(insertion.branch, insertion.arc);
  }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (const auto& b : branches)
      if (b.children.empty()) out.push_back(b.id);
    return out;
  }

  /// Nearest centerline point over a subset of branches (all when empty).
  /// Exact ties resolve to the lowest branch id.
  NearestPoint nearest(const Vec3& p,
                       std::span<const int> subset = {}) const {
    NearestPoint best;
    double best_d2 = std::numeric_limits<double>::infinity();
    auto scan = [&](const VesselBranch& b) {
      if (box_distance2(b, p) >= best_d2) return;
      for (size_t k = 0; k + 1 < b.points.size(); ++k) {
        Vec3 a = b.points[k], d = b.points[k + 1] - b.points[k];
        double t = d.squaredNorm() > 0 ? (p - a).dot(d) / d.squaredNorm() : 0;
        t = std::clamp(t, 0.0, 1.0);
        Vec3 q = a + t * d;
        double d2 = (p - q).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best.branch = b.id;
          best.arc = b.cum_arc[k] + t * (b.cum_arc[k + 1] - b.cum_arc[k]);
          best.point = q;
        }
      }
    };
    if (subset.empty())
      for (const auto& b : branches) scan(b);
    else
      for (int id : subset) scan(branches.at(id));
    require(best.branch >= 0, ErrorKind::state, "nearest query found nothing");
    best.distance = std::sqrt(best_d2);
    best.radius = radius_at(best.branch, best.arc);
    best.tangent = tangent_at(best.branch, best.arc);
    return best;
  }

  /// Union-of-tubes query; see LumenQuery.
  LumenQuery lumen(const Vec3& p) const {
    LumenQuery out;
    double best_deficit = std::numeric_limits<double>::infinity();
    double best_escape = std::numeric_limits<double>::infinity();
    for (const auto& b : branches) {
      double lower = std::sqrt(box_distance2(b, p));
      if (lower - b.max_radius >= best_deficit &&
          lower - 2.0 * b.max_radius >= best_escape)
        continue;
      for (size_t k = 0; k + 1 < b.points.size(); ++k) {
        Vec3 a = b.points[k], d = b.points[k + 1] - b.points[k];
        double t = d.squaredNorm() > 0 ? (p - a).dot(d) / d.squaredNorm() : 0;
        t = std::clamp(t, 0.0, 1.0);
        Vec3 q = a + t * d;
        double dist = (p - q).norm();
        double radius = (1.0 - t) * b.radii[k] + t * b.radii[k + 1];
        best_escape = std::min(best_escape, dist - 2.0 * radius);
        double deficit = dist - radius;
        if (deficit < best_deficit) {
          best_deficit = deficit;
          out.best.branch = b.id;
          out.best.arc = b.cum_arc[k] + t * (b.cum_arc[k + 1] - b.cum_arc[k]);
          out.best.point = q;
          out.best.distance = dist;
          out.best.radius = radius;
        }
      }
    }
    require(out.best.branch >= 0, ErrorKind::state, "lumen query found nothing");
    out.best.tangent = tangent_at(out.best.branch, out.best.arc);
    out.clearance_deficit = best_deficit;
    out.escape_margin = best_escape;
    return out;
  }

  /// Roll reference at (branch, arc): the insertion normal parallel-
  /// transported along the centerline from the insertion point.
  Vec3 transported_normal(int branch, double arc) const {
    std::vector<int> chain;
    for (int b = branch; b >= 0; b = branches[b].parent) chain.push_back(b);
    std::reverse(chain.begin(), chain.end());
    require(chain.front() == insertion.branch, ErrorKind::state,
            "normal transport must start at the insertion branch");
    Vec3 n = insertion.normal;
    Vec3 t_prev = insertion_tangent();
    for (int b : chain) {
      const VesselBranch& br = branches[b];
      double stop = (b == branch) ? arc : br.length();
      for (size_t k = 0; k + 1 < br.points.size(); ++k) {
        if (br.cum_arc[k] >= stop) break;
        Vec3 t_next = (br.points[k + 1] - br.points[k]).normalized();
        n = rotation_between(t_prev, t_next) * n;
        t_prev = t_next;
      }
    }
    Vec3 t_final = tangent_at(branch, arc);
    n = rotation_between(t_prev, t_final) * n;
    n -= n.dot(t_final) * t_final;
    return n.normalized();
  }

private:
  static std::pair<size_t, double> locate(const VesselBranch& b, double arc) {
    require(arc >= -1e-9 && arc <= b.length() + 1e-9, ErrorKind::config,
            "arc outside branch");
    arc = std::clamp(arc, 0.0, b.length());
    size_t k = std::upper_bound(b.cum_arc.begin(), b.cum_arc.end(), arc) -
               b.cum_arc.begin();
    k = std::clamp<size_t>(k, 1, b.cum_arc.size() - 1) - 1;
    double seg = b.cum_arc[k + 1] - b.cum_arc[k];
    return {k, seg > 0 ? (arc - b.cum_arc[k]) / seg : 0.0};
  }

  static double box_distance2(const VesselBranch& b, const Vec3& p) {
    Vec3 d = (b.box_lo - p).cwiseMax(p - b.box_hi).cwiseMax(0.0);
    return d.squaredNorm();
  }
};

// ---------------------------------------------------------------------------
// Geometry validation shared by generation, composition and deformation.

namespace detail {

/// Reject trees whose tubes overlap away from their connecting junctions.
inline void check_tube_overlap(const VesselTree& tree, ErrorKind kind) {
  const auto& bs = tree.branches;
  for (size_t i = 0; i < bs.size(); ++i) {
    for (size_t j = i + 1; j < bs.size(); ++j) {
      const VesselBranch& a = bs[i];
      const VesselBranch& b = bs[j];
      // shared junction point, if the branches are related
      const Vec3* shared = nullptr;
      if (b.parent == a.id)
        shared = &b.points.front();
      else if (a.parent == b.id)
        shared = &a.points.front();
      else if (a.parent >= 0 && a.parent == b.parent)
        shared = &a.points.front();
      double pad = 0.9;
      Vec3 lo = a.box_lo.cwiseMax(b.box_lo) -
                Vec3::Constant(a.max_radius + b.max_radius);
      Vec3 hi = a.box_hi.cwiseMin(b.box_hi) +
                Vec3::Constant(a.max_radius + b.max_radius);
      if ((lo.array() > hi.array()).any()) continue;
      double exclude =
          shared ? 4.0 * std::max(a.max_radius, b.max_radius) : 0.0;
      for (size_t ka = 0; ka < a.points.size(); ++ka) {
        if (shared && (a.points[ka] - *shared).norm() < exclude) continue;
        for (size_t kb = 0; kb < b.points.size(); ++kb) {
          if (shared && (b.points[kb] - *shared).norm() < exclude) continue;
          double gap = (a.points[ka] - b.points[kb]).norm();
          require(gap >= pad * (a.radii[ka] + b.radii[kb]), kind,
                  "tubes of branches " + std::to_string(a.id) + " and " +
                      std::to_string(b.id) + " overlap");
        }
      }
    }
  }
}

/// Marching frame along arcs of piecewise-constant curvature.
struct CurveCursor {
  Vec3 p;
  Vec3 t;
  Vec3 n; // bending direction for positive curvature

  Vec3 binormal() const { return t.cross(n); }

  void rotate(const Quat& q) {
    t = (q * t).normalized();
    n = (q * n).normalized();
  }
};

/// Append an arc of the given length/curvature to `points`, sampling at
/// most `ds` apart. The cursor ends at the arc end.
inline void sweep_arc(CurveCursor& c, double length, double curvature,
                      double ds, std::vector<Vec3>& points,
                      bool include_start) {
  int steps = std::max(1, static_cast<int>(std::ceil(length / ds)));
  double h = length / steps;
  if (include_start) points.push_back(c.p);
  for (int k = 0; k < steps; ++k) {
    if (curvature == 0.0) {
      c.p += h * c.t;
    } else {
      Quat q = quat_about(c.binormal(), curvature * h);
      // chord of the arc segment, exact for constant curvature
      double ang = curvature * h;
      Vec3 chord = (std::sin(ang) / curvature) * c.t +
                   ((1.0 - std::cos(ang)) / curvature) * c.n;
      c.p += chord;
      c.rotate(q);
    }
    points.push_back(c.p);
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Generation

struct ExitSpec {
  double takeoff = 0.5;      // rad, in the junction plane; sign picks the side
  double out_of_plane = 0.0; // rad, tilt out of the junction plane
  double length = 45.0;      // mm
  double curvature = 0.0;    // 1/mm, bends toward the transported normal
  double end_radius_scale = 1.0; // taper factor applied linearly along arc
};

struct BifurcationSpec {
  double entry_length = 50.0;
  double entry_curvature = 0.0;
  double entry_plane = 0.0; // rotation of the bending plane about the entry
  double radius = 2.0;
  double entry_end_radius_scale = 1.0;
  std::array<ExitSpec, 2> exits{ExitSpec{0.45, 0.0, 45.0, 0.0, 1.0},
                                ExitSpec{-0.45, 0.0, 45.0, 0.0, 1.0}};

  void validate() const {
    require(entry_length >= 20.0, ErrorKind::config, "entry shorter than 20 mm");
    require(radius > 0.3, ErrorKind::config, "vessel radius too small");
    require(std::abs(entry_curvature) <= 0.05, ErrorKind::config,
            "entry curvature out of range");
    for (const auto& e : exits) {
      require(e.length >= 20.0, ErrorKind::config, "exit shorter than 20 mm");
      require(std::abs(e.takeoff) <= 1.45, ErrorKind::config,
              "takeoff angle out of range");
      require(std::abs(e.out_of_plane) <= 0.6, ErrorKind::config,
              "out-of-plane angle out of range");
      require(std::abs(e.curvature) <= 0.05, ErrorKind::config,
              "exit curvature out of range");
      require(e.end_radius_scale > 0.1 && e.end_radius_scale <= 1.5,
              ErrorKind::config, "taper factor out of range");
    }
    require(std::abs(exits[0].takeoff - exits[1].takeoff) >= 0.1745,
            ErrorKind::config, "exit takeoffs closer than 10 degrees");
  }
};

constexpr double kTargetSetback = 10.0; // mm before a leaf end
constexpr double kGenerationSampling = 0.8; // mm between centerline samples

inline void fill_radii(VesselBranch& b, double start, double end) {
  b.radii.resize(b.points.size());
  double total = 0.0;
  std::vector<double> arc(b.points.size(), 0.0);
  for (size_t k = 1; k < b.points.size(); ++k) {
    total += (b.points[k] - b.points[k - 1]).norm();
    arc[k] = total;
  }
  for (size_t k = 0; k < b.points.size(); ++k) {
    double t = total > 0 ? arc[k] / total : 0.0;
    b.radii[k] = (1.0 - t) * start + t * end;
  }
}

/// One Y-shaped unit in canonical pose: entry starts at the origin heading
/// +x, junction plane normal derived from entry_plane. Deterministic; the
/// seed parameter is reserved for randomized generators layered on top.
inline VesselTree generate_bifurcation(const BifurcationSpec& spec,
                                       std::uint64_t /*seed*/ = 0) {
  spec.validate();
  VesselTree tree;

  detail::CurveCursor c{Vec3(0, 0, 0), Vec3(1, 0, 0),
                        quat_about(Vec3(1, 0, 0), spec.entry_plane) *
                            Vec3(0, 1, 0)};
  tree.insertion = VesselInsertion{0, 0.0, c.n};

  VesselBranch entry;
  entry.id = 0;
  detail::sweep_arc(c, spec.entry_length, spec.entry_curvature,
                    kGenerationSampling, entry.points, true);
  fill_radii(entry, spec.radius, spec.radius * spec.entry_end_radius_scale);
  tree.branches.push_back(std::move(entry));

  const detail::CurveCursor junction = c;
  const double junction_radius = spec.radius * spec.entry_end_radius_scale;
  for (int k = 0; k < 2; ++k) {
    const ExitSpec& ex = spec.exits[k];
    detail::CurveCursor e = junction;
    e.rotate(quat_about(junction.binormal(), ex.takeoff));
    Vec3 tilt_axis = e.binormal().cross(e.t).normalized(); // in-plane, perp
    e.rotate(quat_about(tilt_axis, ex.out_of_plane));

    VesselBranch b;
    b.id = k + 1;
    b.parent = 0;
    detail::sweep_arc(e, ex.length, ex.curvature, kGenerationSampling,
                      b.points, true);
    fill_radii(b, junction_radius, junction_radius * ex.end_radius_scale);
    tree.branches.push_back(std::move(b));

    VesselTarget tg;
    tg.id = k;
    tg.branch = k + 1;
    tg.arc = ex.length - kTargetSetback;
    require(tg.arc > 5.0, ErrorKind::generation, "exit too short for a target");
    tree.targets.push_back(tg);
  }

  tree.rebuild();
  detail::check_tube_overlap(tree, ErrorKind::generation);
  return tree;
}

// ---------------------------------------------------------------------------
// Transforms

inline VesselTree rigid_transform(const VesselTree& tree, const Quat& rot,
                                  const Vec3& shift) {
  VesselTree out = tree;
  for (auto& b : out.branches)
    for (auto& p : b.points) p = rot * p + shift;
  out.insertion.normal = rot * tree.insertion.normal;
  out.rebuild();
  return out;
}

/// Smooth displacement field: a sum of at most five Gaussian bumps.
struct RbfBump {
  Vec3 center{0, 0, 0};
  double sigma = 25.0;
  Vec3 amplitude{0, 0, 0};
};

struct RbfField {
  std::vector<RbfBump> bumps;
  double amp_max = 10.0;

  Vec3 displacement(const Vec3& p) const {
    Vec3 u = Vec3::Zero();
    for (const auto& b : bumps)
      u += b.amplitude * std::exp(-(p - b.center).squaredNorm() /
                                  (2.0 * b.sigma * b.sigma));
    return u;
  }

  void validate() const {
    require(bumps.size() <= 5, ErrorKind::config, "at most 5 bumps");
    for (const auto& b : bumps) {
      require(b.sigma > 1.0, ErrorKind::config, "bump sigma too small");
      require(b.amplitude.norm() <= amp_max, ErrorKind::config,
              "bump amplitude above the limit");
    }
  }
};

/// Displace centerlines; radii are untouched. Rejects fields that stretch
/// the sampling beyond 1 mm or cause tube overlap.
inline VesselTree deform_tree(const VesselTree& tree, const RbfField& field) {
  field.validate();
  VesselTree out = tree;
  for (auto& b : out.branches)
    for (auto& p : b.points) p += field.displacement(p);
  try {
    out.rebuild();
    detail::check_tube_overlap(out, ErrorKind::deformation);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config)
      fail(ErrorKind::deformation, e.what());
    throw;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition

struct ComposeUnit {
  VesselTree tree;
  int attach_branch = -1; // index in the grown tree; ignored for the first
  double attach_arc = 0.0;
};

/// Chain units end-to-end: every attach point must be the end of a branch
/// that is currently a leaf; the unit is rotated so its entry frame matches
/// the host frame there (tangent and transported roll reference).
inline VesselTree compose_tree(const std::vector<ComposeUnit>& units) {
  require(!units.empty(), ErrorKind::composition, "no units to compose");
  VesselTree tree = units[0].tree;
  tree.rebuild();
  for (size_t u = 1; u < units.size(); ++u) {
    const ComposeUnit& unit = units[u];
    require(unit.attach_branch >= 0 &&
                unit.attach_branch < static_cast<int>(tree.branches.size()),
            ErrorKind::composition, "attach branch does not exist");
    const VesselBranch& host = tree.branches[unit.attach_branch];
    require(host.children.empty(), ErrorKind::composition,
            "attach branch is not a leaf");
    require(std::abs(unit.attach_arc - host.length()) <= 1e-6,
            ErrorKind::composition,
            "units attach only at the end of a terminal branch");

    Vec3 th = tree.tangent_at(unit.attach_branch, host.length());
    Vec3 nh = tree.transported_normal(unit.attach_branch, host.length());
    VesselTree sub = unit.tree;
    sub.rebuild();
    Vec3 tu = sub.insertion_tangent();
    Vec3 nu = sub.insertion.normal;
    Mat3 rh, ru;
    rh.col(0) = th, rh.col(1) = nh, rh.col(2) = th.cross(nh);
    ru.col(0) = tu, ru.col(1) = nu, ru.col(2) = tu.cross(nu);
    Quat rot(rh * ru.transpose());
    Vec3 shift = host.points.back() - rot * sub.insertion_point();

    int offset = static_cast<int>(tree.branches.size());
    for (VesselBranch b : sub.branches) {
      b.id += offset;
      b.parent = b.parent < 0 ? unit.attach_branch : b.parent + offset;
      for (auto& p : b.points) p = rot * p + shift;
      // weld the unit root onto the host end exactly
      if (b.parent == unit.attach_branch) b.points.front() = host.points.back();
      tree.branches.push_back(std::move(b));
    }
    tree.targets.clear(); // recomputed below
    tree.rebuild();
  }

  // targets sit a fixed setback before every terminal end
  tree.targets.clear();
  for (int leaf : tree.leaves()) {
    double len = tree.branches[leaf].length();
    require(len > kTargetSetback + 5.0, ErrorKind::composition,
            "terminal branch too short for a target");
    VesselTarget tg;
    tg.id = static_cast<int>(tree.targets.size());
    tg.branch = leaf;
    tg.arc = len - kTargetSetback;
    tree.targets.push_back(tg);
  }
  tree.rebuild();
  detail::check_tube_overlap(tree, ErrorKind::composition);
  return tree;
}

// ---------------------------------------------------------------------------
// Navigation paths

struct PathJunction {
  Vec3 center{0, 0, 0};
  int parent_branch = -1;
  int correct_child = -1;
  int wrong_child = -1;
  Vec3 correct_tangent{1, 0, 0}; // chord of the correct child's first 5 mm
  Vec3 wrong_direction{1, 0, 0}; // chord of the wrong child's first 5 mm
  double path_arc = 0.0;         // cumulative arc at the junction
};

struct Path {
  int target_id = -1;
  std::vector<int> branch_ids;   // root ... target branch
  std::vector<double> entry_arc; // cumulative arc at each branch start
  double total_arc = 0.0;        // insertion to target
  std::vector<PathJunction> junctions;

  bool contains(int branch) const {
    return std::find(branch_ids.begin(), branch_ids.end(), branch) !=
           branch_ids.end();
  }

  double arc_of(int branch, double local_arc) const {
    for (size_t i = 0; i < branch_ids.size(); ++i)
      if (branch_ids[i] == branch) return entry_arc[i] + local_arc;
    fail(ErrorKind::state, "branch not on the path");
  }
};

inline Vec3 initial_direction(const VesselTree& tree, int branch) {
  const VesselBranch& b = tree.branches[branch];
  double probe = std::min(5.0, b.length());
  return (tree.point_at(branch, probe) - b.points.front()).normalized();
}

inline Path path_to_target(const VesselTree& tree, int target_id) {
  require(target_id >= 0 && target_id < static_cast<int>(tree.targets.size()),
          ErrorKind::config, "unknown target");
  const VesselTarget& tg = tree.targets[target_id];
  Path path;
  path.target_id = target_id;
  for (int b = tg.branch; b >= 0; b = tree.branches[b].parent)
    path.branch_ids.push_back(b);
  std::reverse(path.branch_ids.begin(), path.branch_ids.end());
  require(path.branch_ids.front() == tree.insertion.branch, ErrorKind::config,
          "path does not start at the insertion branch");

  path.entry_arc.resize(path.branch_ids.size());
  double acc = -tree.insertion.arc;
  for (size_t i = 0; i < path.branch_ids.size(); ++i) {
    path.entry_arc[i] = acc;
    acc += tree.branches[path.branch_ids[i]].length();
  }
  path.total_arc = path.entry_arc.back() + tg.arc;

  for (size_t i = 0; i + 1 < path.branch_ids.size(); ++i) {
    const VesselBranch& parent = tree.branches[path.branch_ids[i]];
    if (parent.children.size() < 2) continue;
    require(parent.children.size() == 2, ErrorKind::config,
            "only binary junctions are supported");
    PathJunction j;
    j.parent_branch = parent.id;
    j.correct_child = path.branch_ids[i + 1];
    j.wrong_child = parent.children[0] == j.correct_child ? parent.children[1]
                                                          : parent.children[0];
    j.center = parent.points.back();
    j.correct_tangent = initial_direction(tree, j.correct_child);
    j.wrong_direction = initial_direction(tree, j.wrong_child);
    j.path_arc = path.entry_arc[i + 1];
    path.junctions.push_back(j);
  }
  return path;
}

// ---------------------------------------------------------------------------
// File format

inline void save_tree(const VesselTree& tree, std::ostream& os,
                      const std::string& annotation = {}) {
  os << "gwnav-anatomy v1\n";
  if (!annotation.empty()) os << "# " << annotation << "\n";
  os << "units mm\n";
  os << "branches " << tree.branches.size() << "\n";
  for (const auto& b : tree.branches) {
    os << "branch " << b.id << " parent " << b.parent << " points "
       << b.points.size() << "\n";
    for (size_t k = 0; k < b.points.size(); ++k)
      os << fmt_full(b.points[k].x()) << " " << fmt_full(b.points[k].y())
         << " " << fmt_full(b.points[k].z()) << " " << fmt_full(b.radii[k])
         << "\n";
  }
  os << "insertion branch " << tree.insertion.branch << " arc "
     << fmt_full(tree.insertion.arc) << " normal "
     << fmt_full(tree.insertion.normal.x()) << " "
     << fmt_full(tree.insertion.normal.y()) << " "
     << fmt_full(tree.insertion.normal.z()) << "\n";
  os << "targets " << tree.targets.size() << "\n";
  for (const auto& t : tree.targets)
    os << "target " << t.id << " branch " << t.branch << " arc "
       << fmt_full(t.arc) << "\n";
}

inline void save_tree(const VesselTree& tree, const std::string& path,
                      const std::string& annotation = {}) {
  std::ofstream os(path);
  require(os.good(), ErrorKind::io, "cannot write " + path);
  save_tree(tree, os, annotation);
  require(os.good(), ErrorKind::io, "write failed for " + path);
}

namespace detail {

struct LineReader {
  std::istream& is;
  int line_no = 0;
  std::vector<std::string> tokens;

  bool next() {
    std::string line;
    while (std::getline(is, line)) {
      ++line_no;
      tokens.clear();
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (!tokens.empty() && tokens[0][0] == '#') continue; // annotation
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail_here(const std::string& msg) const {
    fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + msg);
  }

  void expect(const std::string& msg) {
    if (!next()) fail(ErrorKind::parse, "unexpected end of file: " + msg);
  }

  double number(size_t idx, const std::string& what) const {
    if (idx >= tokens.size()) fail_here("missing " + what);
    char* end = nullptr;
    double v = std::strtod(tokens[idx].c_str(), &end);
    if (end == tokens[idx].c_str() || *end != '\0')
      fail_here("bad " + what + " '" + tokens[idx] + "'");
    return v;
  }

  long integer(size_t idx, const std::string& what) const {
    double v = number(idx, what);
    long i = static_cast<long>(v);
    if (static_cast<double>(i) != v) fail_here(what + " must be an integer");
    return i;
  }
};

} // namespace detail

inline VesselTree load_tree(std::istream& is) {
  detail::LineReader r{is};
  r.expect("header");
  if (r.tokens.size() != 2 || r.tokens[0] != "gwnav-anatomy")
    r.fail_here("not a gwnav anatomy file");
  if (r.tokens[1] != "v1")
    r.fail_here("unsupported anatomy version '" + r.tokens[1] +
                "'; this build reads v1 only, regenerate the file or upgrade");
  r.expect("units");
  if (r.tokens.size() != 2 || r.tokens[0] != "units" || r.tokens[1] != "mm")
    r.fail_here("expected 'units mm'");

  VesselTree tree;
  r.expect("branch count");
  if (r.tokens.size() != 2 || r.tokens[0] != "branches")
    r.fail_here("expected 'branches <count>'");
  long nb = r.integer(1, "branch count");
  for (long i = 0; i < nb; ++i) {
    r.expect("branch header");
    if (r.tokens.size() != 6 || r.tokens[0] != "branch" ||
        r.tokens[2] != "parent" || r.tokens[4] != "points")
      r.fail_here("expected 'branch <id> parent <id> points <count>'");
    VesselBranch b;
    b.id = static_cast<int>(r.integer(1, "branch id"));
    b.parent = static_cast<int>(r.integer(3, "parent id"));
    long np = r.integer(5, "point count");
    for (long k = 0; k < np; ++k) {
      r.expect("point of branch " + std::to_string(b.id));
      if (r.tokens.size() < 4)
        r.fail_here("branch " + std::to_string(b.id) +
                    ": point needs x y z radius");
      if (r.tokens.size() > 4)
        r.fail_here("branch " + std::to_string(b.id) + ": too many fields");
      b.points.emplace_back(r.number(0, "x"), r.number(1, "y"),
                            r.number(2, "z"));
      b.radii.push_back(r.number(3, "radius of branch " + std::to_string(b.id)));
    }
    tree.branches.push_back(std::move(b));
  }

  r.expect("insertion");
  if (r.tokens.size() != 9 || r.tokens[0] != "insertion" ||
      r.tokens[1] != "branch" || r.tokens[3] != "arc" ||
      r.tokens[5] != "normal")
    r.fail_here("expected 'insertion branch <id> arc <a> normal <x y z>'");
  tree.insertion.branch = static_cast<int>(r.integer(2, "insertion branch"));
  tree.insertion.arc = r.number(4, "insertion arc");
  tree.insertion.normal =
      Vec3(r.number(6, "nx"), r.number(7, "ny"), r.number(8, "nz"));

  r.expect("target count");
  if (r.tokens.size() != 2 || r.tokens[0] != "targets")
    r.fail_here("expected 'targets <count>'");
  long nt = r.integer(1, "target count");
  for (long i = 0; i < nt; ++i) {
    r.expect("target");
    if (r.tokens.size() != 6 || r.tokens[0] != "target" ||
        r.tokens[2] != "branch" || r.tokens[4] != "arc")
      r.fail_here("expected 'target <id> branch <id> arc <a>'");
    VesselTarget t;
    t.id = static_cast<int>(r.integer(1, "target id"));
    t.branch = static_cast<int>(r.integer(3, "target branch"));
    t.arc = r.number(5, "target arc");
    tree.targets.push_back(t);
  }

  try {
    tree.rebuild();
  } catch (const Error& e) {
    fail(ErrorKind::parse, std::string("invalid anatomy: ") + e.what());
  }
  return tree;
}

inline VesselTree load_tree_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), ErrorKind::io, "cannot read " + path);
  return load_tree(is);
}

} // namespace gwnav
