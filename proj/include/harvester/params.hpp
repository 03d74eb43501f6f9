#pragma once

// Parameter records for the in-plane overlap harvester. All values are SI.
// Defaults reproduce the reference device (60 um SOI device layer, 524 finger
// pairs, 5.78 mg proof mass).

#include <cmath>
#include <string>

#include "harvester/error.hpp"

namespace harvester {

inline constexpr double kStandardGravity = 9.81;       // m/s^2 per g
inline constexpr double kVacuumPermittivity = 8.854e-12;  // F/m
inline constexpr double kAirViscosity = 1.81e-5;       // Pa s, room temperature

struct DeviceGeometry {
  double finger_length = 30e-6;
  double finger_width = 4e-6;  // stored only; no equation uses it
  double finger_thickness = 60e-6;
  double gap = 3e-6;
  int finger_pairs = 524;
  double nominal_overlap = 15e-6;
  double permittivity = kVacuumPermittivity;
};

struct MechanicalParams {
  double mass = 5.78e-6;
  double spring_constant = 326.0;
  double damping = 8.45e-4;
};

/// Inputs of the Couette-flow damping estimate.
struct DampingGeometry {
  double mass_area = 0.0;
  double cap_gap = 1.0;
  double viscosity = kAirViscosity;
};

struct ElectretBias {
  double voltage = 20.0;
  double capacitance = 5e-12;
};

struct StopperParams {
  double engage_displacement = 14e-6;
  double stiffness = 326e3;
};

/// Saturation of the variable capacitances beyond +-clamp_displacement.
/// cap_max/cap_min are fixed by continuity; build with make_clamp().
struct CapClamp {
  double clamp_displacement = 14.5e-6;
  double cap_max = 0.0;
  double cap_min = 0.0;
};

struct DeviceParams {
  DeviceGeometry geometry;
  MechanicalParams mechanical;
  ElectretBias electret;
  StopperParams stoppers;
  CapClamp clamp;
};

/// Resistive loads on both output ports plus the per-node parasitic capacitance.
struct LoadNetwork {
  double resistance1 = 28e6;
  double resistance2 = 28e6;
  double parasitic_cap = 1.94e-12;
};

/// Capacitance per metre of finger overlap, 2 N_g eps t_f / g_0.
inline double overlap_capacitance_gradient(const DeviceGeometry& g) {
  return 2.0 * g.finger_pairs * g.permittivity * g.finger_thickness / g.gap;
}

/// Unclamped capacitance of either variable capacitor at x = 0.
inline double nominal_capacitance(const DeviceGeometry& g) {
  return overlap_capacitance_gradient(g) * g.nominal_overlap;
}

inline CapClamp make_clamp(const DeviceGeometry& g, double clamp_displacement) {
  const double k = overlap_capacitance_gradient(g);
  return {clamp_displacement, k * (g.nominal_overlap + clamp_displacement),
          k * (g.nominal_overlap - clamp_displacement)};
}

inline DeviceParams default_device() {
  DeviceParams p;
  p.clamp = make_clamp(p.geometry, p.clamp.clamp_displacement);
  return p;
}

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Validation, what);
}
}  // namespace detail

inline void validate(const DeviceGeometry& g) {
  using detail::require;
  require(g.finger_length > 0, "finger length must be > 0");
  require(g.finger_width > 0, "finger width must be > 0");
  require(g.finger_thickness > 0, "finger thickness must be > 0");
  require(g.gap > 0, "finger gap must be > 0");
  require(g.finger_pairs >= 1, "finger pair count must be >= 1");
  require(g.nominal_overlap > 0, "nominal overlap must be > 0");
  require(g.permittivity > 0, "permittivity must be > 0");
}

inline void validate(const MechanicalParams& m) {
  detail::require(m.mass > 0, "mass must be > 0");
  detail::require(m.spring_constant > 0, "spring constant must be > 0");
  detail::require(m.damping >= 0, "damping must be >= 0");
}

inline void validate(const LoadNetwork& l) {
  detail::require(l.resistance1 > 0 && l.resistance2 > 0, "load resistances must be > 0");
  detail::require(l.parasitic_cap >= 0, "parasitic capacitance must be >= 0");
}

inline void validate(const DeviceParams& p) {
  using detail::require;
  validate(p.geometry);
  validate(p.mechanical);
  require(p.electret.capacitance > 0, "electret capacitance must be > 0");
  require(std::isfinite(p.electret.voltage), "electret voltage must be finite");
  require(p.stoppers.engage_displacement > 0, "stopper engage displacement must be > 0");
  require(p.stoppers.stiffness > 0, "stopper stiffness must be > 0");
  const double xc = p.clamp.clamp_displacement;
  require(p.stoppers.engage_displacement < xc, "clamp displacement must exceed stopper engage displacement");
  require(xc < p.geometry.nominal_overlap, "clamp displacement must be below nominal overlap");
  const CapClamp expected = make_clamp(p.geometry, xc);
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b); };
  require(close(p.clamp.cap_max, expected.cap_max) && close(p.clamp.cap_min, expected.cap_min),
          "clamp capacitances must match the overlap law at the clamp displacement");
  require(p.clamp.cap_min > 0, "minimum capacitance must be > 0");
}

}  // namespace harvester
