#pragma once

// Device physics of the overlap-varying harvester: clamped capacitance laws,
// stopper force, Couette damping, transducer force, port voltages, the DC
// operating point and the small-signal model around it.
//
// Every function is templated on the scalar type so tests can evaluate the
// same expressions in extended precision. Piecewise laws come in two forms:
// one that picks the branch from x, and one that takes the branch explicitly.
// The integrator uses the explicit form to hold a branch fixed across a step.

#include <Eigen/Core>

#include "harvester/params.hpp"

namespace harvester {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Position of a displacement relative to a symmetric pair of thresholds +-d.
enum class Side : int { Negative = -1, Inside = 0, Positive = 1 };

template <typename Scalar>
Side side_of(const Scalar& x, double threshold) {
  if (x > Scalar(threshold)) return Side::Positive;
  if (x < Scalar(-threshold)) return Side::Negative;
  return Side::Inside;
}

// ---------------------------------------------------------------------------
// Variable capacitors

template <typename Scalar>
Vec2<Scalar> capacitance_pair(const Scalar& x, const DeviceGeometry& g, const CapClamp& c,
                              Side branch) {
  switch (branch) {
    case Side::Positive: return {Scalar(c.cap_min), Scalar(c.cap_max)};
    case Side::Negative: return {Scalar(c.cap_max), Scalar(c.cap_min)};
    case Side::Inside: break;
  }
  const Scalar k(overlap_capacitance_gradient(g));
  const Scalar x0(g.nominal_overlap);
  return {k * (x0 - x), k * (x0 + x)};
}

template <typename Scalar>
Vec2<Scalar> capacitance_pair(const Scalar& x, const DeviceGeometry& g, const CapClamp& c) {
  return capacitance_pair(x, g, c, side_of(x, c.clamp_displacement));
}

/// d(1/C_i)/dx. Zero on the clamped branches.
template <typename Scalar>
Vec2<Scalar> inv_cap_gradient(const Scalar& x, const DeviceGeometry& g, const CapClamp&,
                              Side branch) {
  if (branch != Side::Inside) return Vec2<Scalar>::Zero();
  const Scalar k(overlap_capacitance_gradient(g));
  const Scalar x0(g.nominal_overlap);
  const Scalar d1 = x0 - x;
  const Scalar d2 = x0 + x;
  return {Scalar(1) / (k * d1 * d1), Scalar(-1) / (k * d2 * d2)};
}

template <typename Scalar>
Vec2<Scalar> inv_cap_gradient(const Scalar& x, const DeviceGeometry& g, const CapClamp& c) {
  return inv_cap_gradient(x, g, c, side_of(x, c.clamp_displacement));
}

// ---------------------------------------------------------------------------
// Stoppers

/// Restoring force of the end stops; opposes penetration beyond +-x_s.
template <typename Scalar>
Scalar stopper_force(const Scalar& x, const StopperParams& s, Side branch) {
  switch (branch) {
    case Side::Positive: return -Scalar(s.stiffness) * (x - Scalar(s.engage_displacement));
    case Side::Negative: return -Scalar(s.stiffness) * (x + Scalar(s.engage_displacement));
    case Side::Inside: break;
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar stopper_force(const Scalar& x, const StopperParams& s) {
  return stopper_force(x, s, side_of(x, s.engage_displacement));
}

template <typename Scalar>
Scalar stopper_energy(const Scalar& x, const StopperParams& s, Side branch) {
  const Scalar f = stopper_force(x, s, branch);
  return f * f / (Scalar(2) * Scalar(s.stiffness));
}

template <typename Scalar>
Scalar stopper_energy(const Scalar& x, const StopperParams& s) {
  return stopper_energy(x, s, side_of(x, s.engage_displacement));
}

// ---------------------------------------------------------------------------
// Damping

/// Couette-flow estimate 2 eta (N_g t_f l_f / g_0 + A_m / d).
inline double couette_damping(const DampingGeometry& d, const DeviceGeometry& g) {
  return 2.0 * d.viscosity *
         (g.finger_pairs * g.finger_thickness * g.finger_length / g.gap + d.mass_area / d.cap_gap);
}

// ---------------------------------------------------------------------------
// Transducer

/// Branch selection for the two piecewise laws of the nonlinear model.
struct Branches {
  Side clamp = Side::Inside;
  Side stopper = Side::Inside;

  friend bool operator==(const Branches&, const Branches&) = default;
};

template <typename Scalar>
Branches branches_of(const Scalar& x, const DeviceParams& p) {
  return {side_of(x, p.clamp.clamp_displacement), side_of(x, p.stoppers.engage_displacement)};
}

/// Spring plus electrostatic force on the transducer, k x + sum_i q_i^2/2 d(1/C_i)/dx.
template <typename Scalar>
Scalar transducer_force(const Scalar& x, const Vec2<Scalar>& q, const DeviceParams& p,
                        Side clamp_branch) {
  const Vec2<Scalar> du = inv_cap_gradient(x, p.geometry, p.clamp, clamp_branch);
  return Scalar(p.mechanical.spring_constant) * x + Scalar(0.5) * q.cwiseAbs2().dot(du);
}

template <typename Scalar>
Scalar transducer_force(const Scalar& x, const Vec2<Scalar>& q, const DeviceParams& p) {
  return transducer_force(x, q, p, side_of(x, p.clamp.clamp_displacement));
}

/// Voltages across both electrical ports, V_e + (q1 + q2)/C_e + q_i/C_i(x).
template <typename Scalar>
Vec2<Scalar> port_voltages(const Scalar& x, const Vec2<Scalar>& q, const DeviceParams& p,
                           Side clamp_branch) {
  const Vec2<Scalar> c = capacitance_pair(x, p.geometry, p.clamp, clamp_branch);
  const Scalar common = Scalar(p.electret.voltage) + q.sum() / Scalar(p.electret.capacitance);
  return (q.cwiseQuotient(c).array() + common).matrix();
}

template <typename Scalar>
Vec2<Scalar> port_voltages(const Scalar& x, const Vec2<Scalar>& q, const DeviceParams& p) {
  return port_voltages(x, q, p, side_of(x, p.clamp.clamp_displacement));
}

/// Energy held by the variable capacitors and the electret capacitance.
template <typename Scalar>
Scalar capacitor_energy(const Scalar& x, const Vec2<Scalar>& q, const DeviceParams& p,
                        Side clamp_branch) {
  const Vec2<Scalar> c = capacitance_pair(x, p.geometry, p.clamp, clamp_branch);
  const Scalar total = q.sum();
  return Scalar(0.5) * q.cwiseAbs2().cwiseQuotient(c).sum() +
         total * total / (Scalar(2) * Scalar(p.electret.capacitance));
}

// ---------------------------------------------------------------------------
// Operating point and small-signal model

/// Charge on each variable capacitor when both port voltages are zero at x = 0.
inline double dc_equilibrium_charge(const DeviceParams& p) {
  const double c0 = nominal_capacitance(p.geometry);
  return -p.electret.voltage / (2.0 / p.electret.capacitance + 1.0 / c0);
}

struct LinearModel {
  Vec2<double> coupling = Vec2<double>::Zero();  // alpha_i [V/m]
  double nominal_cap = 0.0;                       // C_0
  double equilibrium_charge = 0.0;                // q_0
  /// q_0^2/2 * sum_i d^2(1/C_i)/dx^2 at x = 0; the curvature of the
  /// electrostatic co-energy seen by the mass at the operating point.
  double electrostatic_stiffness = 0.0;
  MechanicalParams mechanical;
  ElectretBias electret;

  double total_stiffness() const { return mechanical.spring_constant + electrostatic_stiffness; }
};

inline LinearModel linearize(const DeviceParams& p) {
  LinearModel lm;
  lm.nominal_cap = nominal_capacitance(p.geometry);
  lm.equilibrium_charge = dc_equilibrium_charge(p);
  const double x0 = p.geometry.nominal_overlap;
  const double alpha = lm.equilibrium_charge / (lm.nominal_cap * x0);
  lm.coupling = {alpha, -alpha};
  lm.electrostatic_stiffness =
      2.0 * lm.equilibrium_charge * lm.equilibrium_charge / (lm.nominal_cap * x0 * x0);
  lm.mechanical = p.mechanical;
  lm.electret = p.electret;
  return lm;
}

/// Small-signal force for displacement x and charge offsets dq from q_0.
template <typename Scalar>
Scalar linear_transducer_force(const Scalar& x, const Vec2<Scalar>& dq, const LinearModel& lm) {
  return Scalar(lm.total_stiffness()) * x + lm.coupling.cast<Scalar>().dot(dq);
}

template <typename Scalar>
Vec2<Scalar> linear_port_voltages(const Scalar& x, const Vec2<Scalar>& dq, const LinearModel& lm) {
  const Scalar common = dq.sum() / Scalar(lm.electret.capacitance);
  return ((lm.coupling.cast<Scalar>() * x + dq / Scalar(lm.nominal_cap)).array() + common).matrix();
}

/// Stored energy of the small-signal transducer (spring included).
template <typename Scalar>
Scalar linear_transducer_energy(const Scalar& x, const Vec2<Scalar>& dq, const LinearModel& lm) {
  const Scalar total = dq.sum();
  return Scalar(0.5 * lm.total_stiffness()) * x * x + x * lm.coupling.cast<Scalar>().dot(dq) +
         total * total / Scalar(2 * lm.electret.capacitance) +
         dq.squaredNorm() / Scalar(2 * lm.nominal_cap);
}

}  // namespace harvester
