#pragma once

// Guidewire mechanics: a chain of Timoshenko beam elements with 6-DOF nodes
// (position + quaternion frame), pre-curved distal tip, and a node-reservoir
// insertion boundary. Time stepping is implicit Euler linearized about the
// current state,
//   (M - dt D - dt^2 K) dv = dt f(x,v) + dt^2 K v,   K = df/dx, D = df/dv,
// which yields one symmetric block-tridiagonal solve per step.

#include <cmath>
#include <span>
#include <vector>

#include "gwnav/btd.hpp"
#include "gwnav/common.hpp"
#include "gwnav/geom.hpp"

namespace gwnav {

struct GuidewireConfig {
  double total_length = 310.0;  // mm
  double tip_length = 6.0;      // mm of pre-curved distal tip
  double tip_curvature = 0.2;   // 1/mm
  double element_length = 2.5;  // mm
  double radius = 0.18;         // mm, wire cross-section
  double young_modulus = 80000; // MPa
  double poisson_ratio = 0.3;
  double density = 6.45e-6;          // kg/mm^3
  double rayleigh_mass = 0.1;        // 1/s
  double rayleigh_stiffness = 0.005; // s
  Vec3 gravity{0.0, 0.0, 0.0};       // mm/s^2, disabled by default

  void validate() const {
    require(total_length > 0 && tip_length > 0 && element_length > 0 &&
                radius > 0 && young_modulus > 0 && density > 0,
            ErrorKind::config, "guidewire dimensions must be positive");
    require(element_length <= 5.0, ErrorKind::config,
            "element length must be <= 5 mm");
    require(tip_length <= total_length, ErrorKind::config,
            "tip longer than the wire");
    require(poisson_ratio > 0.0 && poisson_ratio < 0.5, ErrorKind::config,
            "poisson ratio out of range");
    require(tip_curvature >= 0.0 && rayleigh_mass >= 0.0 &&
                rayleigh_stiffness >= 0.0,
            ErrorKind::config, "negative material parameter");
    int n = num_elements();
    require(n >= 4, ErrorKind::config, "need at least 4 elements");
  }

  int num_elements() const {
    return static_cast<int>(std::ceil(total_length / element_length - 1e-9));
  }
};

/// Insertion axis: anchor point, direction of advance and a roll reference.
struct InsertionPose {
  Vec3 point{0, 0, 0};
  Vec3 tangent{1, 0, 0};
  Vec3 normal{0, 1, 0};

  void validate() const {
    require(std::abs(tangent.norm() - 1.0) < 1e-9 &&
                std::abs(normal.norm() - 1.0) < 1e-9 &&
                std::abs(tangent.dot(normal)) < 1e-9,
            ErrorKind::config, "insertion frame must be orthonormal");
  }

  Quat frame() const {
    Mat3 r;
    r.col(0) = tangent;
    r.col(1) = normal;
    r.col(2) = tangent.cross(normal);
    return Quat(r);
  }
};

struct Controls {
  double push_speed = 0.0; // mm/s along the insertion tangent
  double roll_rate = 0.0;  // rad/s about the insertion tangent
};

/// Immutable discretization: element lengths, rest kinks encoding the tip
/// curve, per-element stiffness and lumped nodal inertia.
class GuidewireModel {
public:
  explicit GuidewireModel(const GuidewireConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int ne = cfg.num_elements();
    elem_len_.resize(ne);
    for (int j = 0; j < ne; ++j) elem_len_[j] = cfg.element_length;
    elem_len_[ne - 1] = cfg.total_length - (ne - 1) * cfg.element_length;
    node_arc_.resize(ne + 1);
    node_arc_[0] = 0.0;
    for (int j = 0; j < ne; ++j) node_arc_[j + 1] = node_arc_[j] + elem_len_[j];

    // Rest curvature: elements overlapping the distal tip_length carry a
    // kink about local z whose angle integrates the constant curvature over
    // the covered arc. Node j is distal to node j+1; local +x points distal.
    kink_angle_.resize(ne);
    kink_.resize(ne);
    half_kink_.resize(ne);
    for (int j = 0; j < ne; ++j) {
      double covered = std::max(
          0.0, std::min(node_arc_[j + 1], cfg.tip_length) - node_arc_[j]);
      kink_angle_[j] = cfg.tip_curvature * covered;
      kink_[j] = quat_about(Vec3::UnitZ(), kink_angle_[j]);
      half_kink_[j] = quat_about(Vec3::UnitZ(), 0.5 * kink_angle_[j]);
    }

    // Section constants in mN/mm units (1 MPa = 1e3 mN/mm^2).
    const double e_mod = cfg.young_modulus * 1e3;
    const double g_mod = e_mod / (2.0 * (1.0 + cfg.poisson_ratio));
    const double r2 = cfg.radius * cfg.radius;
    const double area = 3.141592653589793238462643383279502884 * r2;
    const double iy = area * r2 / 4.0;
    const double jx = 2.0 * iy;
    const double shear_k =
        6.0 * (1.0 + cfg.poisson_ratio) / (7.0 + 6.0 * cfg.poisson_ratio);
    axial_rigidity_ = e_mod * area;
    bending_rigidity_ = e_mod * iy;
    stiffness_.resize(ne);
    for (int j = 0; j < ne; ++j)
      stiffness_[j] = timoshenko_stiffness(e_mod, g_mod, area, iy, jx,
                                           shear_k * area, elem_len_[j]);

    node_mass_.assign(ne + 1, 0.0);
    node_inertia_.assign(ne + 1, 0.0);
    for (int j = 0; j < ne; ++j) {
      double len = elem_len_[j];
      double m_half = cfg.density * area * len / 2.0;
      double i_half =
          cfg.density * (jx * len / 2.0 + area * len * len * len / 24.0);
      node_mass_[j] += m_half;
      node_mass_[j + 1] += m_half;
      node_inertia_[j] += i_half;
      node_inertia_[j + 1] += i_half;
    }
  }

  const GuidewireConfig& config() const { return cfg_; }
  int num_elements() const { return static_cast<int>(elem_len_.size()); }
  int num_nodes() const { return num_elements() + 1; }
  double element_length(int j) const { return elem_len_[j]; }
  double node_arc(int i) const { return node_arc_[i]; } // arc from the tip
  double kink_angle(int j) const { return kink_angle_[j]; }
  const Quat& kink(int j) const { return kink_[j]; }
  const Quat& half_kink(int j) const { return half_kink_[j]; }
  const Mat12& element_stiffness(int j) const { return stiffness_[j]; }
  double node_mass(int i) const { return node_mass_[i]; }
  double node_inertia(int i) const { return node_inertia_[i]; }
  double axial_rigidity() const { return axial_rigidity_; }
  double bending_rigidity() const { return bending_rigidity_; }

  int curved_elements() const {
    int c = 0;
    for (double a : kink_angle_)
      if (a > 0.0) ++c;
    return c;
  }

  double total_rest_bend() const {
    double b = 0.0;
    for (double a : kink_angle_) b += a;
    return b;
  }

private:
  // Standard 12x12 Timoshenko element, local x along the element, node a
  // DOFs first. Circular section so both bending planes share constants.
  static Mat12 timoshenko_stiffness(double e, double g, double area, double i2,
                                    double jx, double a_s, double len) {
    Mat12 k = Mat12::Zero();
    const double l2 = len * len;
    const double phi = 12.0 * e * i2 / (g * a_s * l2);
    const double kb = e * i2 / (l2 * len * (1.0 + phi));

    auto sym = [&k](int r, int c, double v) {
      k(r, c) = v;
      k(c, r) = v;
    };
    double ka = e * area / len;
    sym(0, 0, ka), sym(6, 6, ka), sym(0, 6, -ka);
    double kt = g * jx / len;
    sym(3, 3, kt), sym(9, 9, kt), sym(3, 9, -kt);
    // bending about z: translations y, rotations z
    sym(1, 1, 12 * kb), sym(7, 7, 12 * kb), sym(1, 7, -12 * kb);
    sym(1, 5, 6 * kb * len), sym(1, 11, 6 * kb * len);
    sym(5, 7, -6 * kb * len), sym(7, 11, -6 * kb * len);
    sym(5, 5, (4 + phi) * kb * l2), sym(11, 11, (4 + phi) * kb * l2);
    sym(5, 11, (2 - phi) * kb * l2);
    // bending about y: translations z, rotations y (sign-flipped couplings)
    sym(2, 2, 12 * kb), sym(8, 8, 12 * kb), sym(2, 8, -12 * kb);
    sym(2, 4, -6 * kb * len), sym(2, 10, -6 * kb * len);
    sym(4, 8, 6 * kb * len), sym(8, 10, 6 * kb * len);
    sym(4, 4, (4 + phi) * kb * l2), sym(10, 10, (4 + phi) * kb * l2);
    sym(4, 10, (2 - phi) * kb * l2);
    return k;
  }

  GuidewireConfig cfg_;
  std::vector<double> elem_len_, node_arc_, kink_angle_;
  std::vector<Quat> kink_, half_kink_;
  std::vector<Mat12> stiffness_;
  std::vector<double> node_mass_, node_inertia_;
  double axial_rigidity_ = 0, bending_rigidity_ = 0;
};

/// Dynamic state. Node 0 is the distal tip. Nodes whose arc distance from
/// the tip exceeds inserted_length are kinematically driven: parked on the
/// insertion axis behind the anchor and advanced/rolled with the controls.
struct GuidewireState {
  std::vector<Vec3> pos;
  std::vector<Quat> frame;   // local +x points distally
  std::vector<Vec6> vel;     // linear mm/s, angular rad/s (world)
  InsertionPose insertion;
  double inserted_length = 0.0;
  double proximal_roll = 0.0;
  double time = 0.0;

  bool all_finite() const {
    for (const auto& p : pos)
      if (!finite(p)) return false;
    for (const auto& q : frame)
      if (!finite(q)) return false;
    for (const auto& v : vel)
      if (!v.allFinite()) return false;
    return std::isfinite(inserted_length) && std::isfinite(proximal_roll);
  }
};

/// Index of the first driven node given an inserted length: nodes
/// [0, first_driven) are simulated, the rest follow the insertion axis.
/// The most proximal node is always driven (it models the operator's grip).
inline int first_driven_node(const GuidewireModel& model, double inserted) {
  const int n = model.num_nodes();
  for (int i = 0; i < n - 1; ++i)
    if (model.node_arc(i) >= inserted) return i;
  return n - 1;
}

inline Quat driven_frame(const InsertionPose& ins, double roll) {
  return quat_about(ins.tangent, roll) * ins.frame();
}

/// All nodes parked on the insertion axis (free ones included; a pre-curved
/// tip relaxes toward its rest curve over the next few steps).
inline GuidewireState seated_state(const GuidewireModel& model,
                                   const InsertionPose& ins,
                                   double inserted_length, double roll) {
  ins.validate();
  require(inserted_length > model.node_arc(2) &&
              inserted_length <= model.config().total_length,
          ErrorKind::state, "inserted length outside the simulable range");
  GuidewireState s;
  const int n = model.num_nodes();
  s.pos.resize(n);
  s.frame.assign(n, driven_frame(ins, roll));
  s.vel.assign(n, Vec6::Zero());
  for (int i = 0; i < n; ++i)
    s.pos[i] = ins.point + (inserted_length - model.node_arc(i)) * ins.tangent;
  s.insertion = ins;
  s.inserted_length = inserted_length;
  s.proximal_roll = roll;
  return s;
}

/// Fully inserted wire laid out in its stress-free shape, base at the anchor.
inline GuidewireState posed_rest_state(const GuidewireModel& model,
                                       const InsertionPose& ins, double roll) {
  ins.validate();
  GuidewireState s;
  const int n = model.num_nodes();
  s.pos.resize(n);
  s.frame.resize(n);
  s.vel.assign(n, Vec6::Zero());
  s.pos[n - 1] = ins.point;
  s.frame[n - 1] = driven_frame(ins, roll);
  for (int j = n - 2; j >= 0; --j) {
    const Quat& qa = s.frame[j + 1];
    s.pos[j] = s.pos[j + 1] + (qa * model.half_kink(j)) *
                                  Vec3(model.element_length(j), 0, 0);
    s.frame[j] = qa * model.kink(j);
  }
  s.insertion = ins;
  s.inserted_length = model.config().total_length;
  s.proximal_roll = roll;
  return s;
}

namespace detail {

// Per-element corotational force/stiffness evaluation. The element frame is
// the proximal node's frame composed with half the rest kink; deviation from
// the rest transform maps through the linear element stiffness.
struct ElementEval {
  Vec6 force_a, force_b; // world forces on proximal (a) / distal (b) node
  Mat12 k_world;         // corotated stiffness, a-DOFs first
};

inline ElementEval eval_element(const GuidewireModel& model, int j,
                                const Vec3& xa, const Quat& qa, const Vec3& xb,
                                const Quat& qb, bool with_stiffness) {
  ElementEval out;
  const Quat elem_q = qa * model.half_kink(j);
  const Mat3 r = elem_q.toRotationMatrix();
  Eigen::Matrix<double, 12, 1> u = Eigen::Matrix<double, 12, 1>::Zero();
  u.segment<3>(6) =
      r.transpose() * (xb - xa) - Vec3(model.element_length(j), 0, 0);
  const Quat err = qb * (qa * model.kink(j)).inverse();
  u.segment<3>(9) = r.transpose() * quat_log(err);

  const Mat12& ke = model.element_stiffness(j);
  Eigen::Matrix<double, 12, 1> f_local = -(ke * u);
  out.force_a.head<3>() = r * f_local.segment<3>(0);
  out.force_a.tail<3>() = r * f_local.segment<3>(3);
  out.force_b.head<3>() = r * f_local.segment<3>(6);
  out.force_b.tail<3>() = r * f_local.segment<3>(9);

  if (with_stiffness) {
    Mat12 rot = Mat12::Zero();
    for (int blk = 0; blk < 4; ++blk) rot.block<3, 3>(3 * blk, 3 * blk) = r;
    out.k_world = rot * ke * rot.transpose();
  }
  return out;
}

} // namespace detail

/// Elastic forces on every node for the current shape (no damping, no
/// gravity). Rows are 6 per node, ordered [force, torque].
inline VecX elastic_forces(const GuidewireModel& model,
                           const GuidewireState& state) {
  const int n = model.num_nodes();
  VecX f = VecX::Zero(6 * n);
  for (int j = 0; j < model.num_elements(); ++j) {
    auto ev = detail::eval_element(model, j, state.pos[j + 1],
                                   state.frame[j + 1], state.pos[j],
                                   state.frame[j], false);
    f.segment<6>(6 * (j + 1)) += ev.force_a;
    f.segment<6>(6 * j) += ev.force_b;
  }
  return f;
}

/// Implicit-Euler system over the free nodes plus everything needed to
/// finish (or contact-correct) the step.
struct BtdSystem {
  BtdMatrix matrix;  // free-node blocks of M - dt D - dt^2 K
  VecX rhs;          // dt f + dt^2 K v restricted to free rows
  int free_nodes = 0;
  double dt = 0.0;
  double new_inserted = 0.0;
  double new_roll = 0.0;
  std::vector<Vec6> driven_vel; // prescribed velocity for nodes >= free_nodes
};

using ExternalForces = std::span<const Vec6>; // one wrench per node, optional

/// Assemble the step system. Driven-node kinematics for the coming step are
/// derived from the controls; their coupling enters the free rows through
/// the shared elements.
inline BtdSystem assemble_system(const GuidewireModel& model,
                                 const GuidewireState& state,
                                 const Controls& controls, double dt,
                                 ExternalForces ext = {}) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::config,
          "time step must be positive");
  require(std::isfinite(controls.push_speed) &&
              std::isfinite(controls.roll_rate),
          ErrorKind::config, "controls must be finite");
  const int n = model.num_nodes();
  require(static_cast<int>(state.pos.size()) == n, ErrorKind::state,
          "state size does not match the model");
  require(ext.empty() || static_cast<int>(ext.size()) == n, ErrorKind::config,
          "external force span must cover every node");

  BtdSystem sys;
  sys.dt = dt;
  sys.new_inserted =
      std::min(std::max(state.inserted_length + controls.push_speed * dt,
                        model.node_arc(2) + 1e-9),
               model.config().total_length);
  sys.new_roll = state.proximal_roll + controls.roll_rate * dt;
  const int m = first_driven_node(model, sys.new_inserted);
  require(m >= 2, ErrorKind::state, "fewer than two simulated nodes");
  sys.free_nodes = m;

  Vec6 driven;
  driven.head<3>() = controls.push_speed * state.insertion.tangent;
  driven.tail<3>() = controls.roll_rate * state.insertion.tangent;
  sys.driven_vel.assign(n - m, driven);

  // Chain of the free nodes plus the first driven one: the extra trailing
  // block carries the boundary coupling into the products below.
  const int chain = std::min(m + 1, n);
  BtdMatrix stiff = BtdMatrix::zero(chain);
  VecX force = VecX::Zero(6 * chain);
  VecX vel(6 * chain);
  for (int i = 0; i < chain; ++i)
    vel.segment<6>(6 * i) = i < m ? state.vel[i] : driven;

  const int elems = std::min(m, model.num_elements());
  for (int j = 0; j < elems; ++j) {
    auto ev = detail::eval_element(model, j, state.pos[j + 1],
                                   state.frame[j + 1], state.pos[j],
                                   state.frame[j], true);
    force.segment<6>(6 * j) += ev.force_b;
    if (j + 1 < chain) force.segment<6>(6 * (j + 1)) += ev.force_a;
    stiff.diag[j] += ev.k_world.block<6, 6>(6, 6);
    if (j + 1 < chain) {
      stiff.diag[j + 1] += ev.k_world.block<6, 6>(0, 0);
      stiff.upper[j] += ev.k_world.block<6, 6>(6, 0); // block (j, j+1)
      stiff.lower[j] += ev.k_world.block<6, 6>(0, 6); // block (j+1, j)
    }
  }

  const double alpha = model.config().rayleigh_mass;
  const double beta = model.config().rayleigh_stiffness;
  VecX stiff_v = stiff.multiply(vel);

  sys.matrix = BtdMatrix::zero(m);
  sys.rhs.resize(6 * m);
  for (int i = 0; i < m; ++i) {
    Vec6 mass;
    mass << model.node_mass(i), model.node_mass(i), model.node_mass(i),
        model.node_inertia(i), model.node_inertia(i), model.node_inertia(i);
    sys.matrix.diag[i] =
        stiff.diag[i] * (dt * beta + dt * dt) +
        ((1.0 + dt * alpha) * mass).asDiagonal().toDenseMatrix();
    if (i + 1 < m) {
      sys.matrix.upper[i] = stiff.upper[i] * (dt * beta + dt * dt);
      sys.matrix.lower[i] = stiff.lower[i] * (dt * beta + dt * dt);
    }
    Vec6 f = force.segment<6>(6 * i);
    f.head<3>() += model.node_mass(i) * model.config().gravity;
    if (!ext.empty()) f += ext[i];
    f -= alpha * mass.cwiseProduct(state.vel[i]);
    f -= beta * stiff_v.segment<6>(6 * i);
    sys.rhs.segment<6>(6 * i) =
        dt * f - dt * dt * stiff_v.segment<6>(6 * i);
  }
  return sys;
}

/// Apply solved free velocities and prescribed driven motion: symplectic
/// position update, frame integration with renormalization.
inline GuidewireState finalize_step(const GuidewireModel& model,
                                    const GuidewireState& state,
                                    const BtdSystem& sys,
                                    const VecX& free_vel) {
  const int n = model.num_nodes();
  const int m = sys.free_nodes;
  GuidewireState next = state;
  for (int i = 0; i < n; ++i) {
    Vec6 v = i < m ? Vec6(free_vel.segment<6>(6 * i)) : sys.driven_vel[i - m];
    next.vel[i] = v;
    next.pos[i] += sys.dt * v.head<3>();
    next.frame[i] = quat_exp(sys.dt * v.tail<3>()) * state.frame[i];
    next.frame[i].normalize();
  }
  next.inserted_length = sys.new_inserted;
  next.proximal_roll = sys.new_roll;
  next.time = state.time + sys.dt;
  require(next.all_finite(), ErrorKind::divergence,
          "non-finite state after step");
  return next;
}

/// One unconstrained step (no vessel).
inline GuidewireState step_free(const GuidewireModel& model,
                                const GuidewireState& state,
                                const Controls& controls, double dt,
                                ExternalForces ext = {}) {
  BtdSystem sys = assemble_system(model, state, controls, dt, ext);
  BtdFactorization fact(sys.matrix);
  VecX dv = fact.solve(sys.rhs);
  VecX v_new(6 * sys.free_nodes);
  for (int i = 0; i < sys.free_nodes; ++i)
    v_new.segment<6>(6 * i) = state.vel[i] + dv.segment<6>(6 * i);
  return finalize_step(model, state, sys, v_new);
}

/// Points and unit tangents sampled along the deformed wire at arc distances
/// 0, spacing, ..., (k-1) spacing from the distal end. Positions interpolate
/// the node polyline; tangents come from slerped node frames.
inline std::vector<std::pair<Vec3, Vec3>> tip_frames(
    const GuidewireModel& model, const GuidewireState& state, int k,
    double spacing) {
  require(k >= 1 && spacing > 0.0, ErrorKind::config,
          "need k >= 1 samples with positive spacing");
  require((k - 1) * spacing <= state.inserted_length, ErrorKind::state,
          "fewer inserted nodes than requested samples");
  std::vector<std::pair<Vec3, Vec3>> out;
  out.reserve(k);
  int j = 0;
  for (int i = 0; i < k; ++i) {
    double s = i * spacing;
    while (j + 1 < model.num_elements() && model.node_arc(j + 1) < s) ++j;
    double t = (s - model.node_arc(j)) / model.element_length(j);
    t = std::clamp(t, 0.0, 1.0);
    Vec3 p = (1.0 - t) * state.pos[j] + t * state.pos[j + 1];
    Quat q = state.frame[j].slerp(t, state.frame[j + 1]);
    out.emplace_back(p, q * Vec3::UnitX());
  }
  return out;
}

/// Discrete curvature at the distal tip: Menger curvature of the three
/// distal nodes, directed from the tip tangent toward the bending center.
inline Vec3 tip_curvature_vector(const GuidewireModel& model,
                                 const GuidewireState& state) {
  require(first_driven_node(model, state.inserted_length) >= 3,
          ErrorKind::state, "need at least three inserted nodes");
  const Vec3& p0 = state.pos[0];
  const Vec3& p1 = state.pos[1];
  const Vec3& p2 = state.pos[2];
  Vec3 e1 = p1 - p2, e2 = p0 - p1; // walking toward the tip
  Vec3 cr = e1.cross(e2);
  double denom = e1.norm() * e2.norm() * (p0 - p2).norm();
  if (denom < 1e-12 || cr.norm() < 1e-10 * e1.norm() * e2.norm())
    return Vec3::Zero();
  double curvature = 2.0 * cr.norm() / denom;
  Vec3 tangent = state.frame[0] * Vec3::UnitX();
  Vec3 normal = cr.normalized().cross(tangent);
  double nn = normal.norm();
  if (nn < 1e-9) return Vec3::Zero();
  return curvature * normal / nn;
}

inline double kinetic_energy(const GuidewireModel& model,
                             const GuidewireState& state) {
  double e = 0.0;
  for (int i = 0; i < model.num_nodes(); ++i)
    e += 0.5 * model.node_mass(i) * state.vel[i].head<3>().squaredNorm() +
         0.5 * model.node_inertia(i) * state.vel[i].tail<3>().squaredNorm();
  return e;
}

/// Rigidly transform a state (used by invariance checks).
inline GuidewireState transform_state(const GuidewireState& state,
                                      const Quat& rot, const Vec3& shift) {
  GuidewireState out = state;
  for (auto& p : out.pos) p = rot * p + shift;
  for (auto& q : out.frame) q = rot * q;
  for (auto& v : out.vel) {
    v.head<3>() = rot * v.head<3>();
    v.tail<3>() = rot * v.tail<3>();
  }
  out.insertion.point = rot * state.insertion.point + shift;
  out.insertion.tangent = rot * state.insertion.tangent;
  out.insertion.normal = rot * state.insertion.normal;
  return out;
}

} // namespace gwnav
