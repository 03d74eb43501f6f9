#include "harvester/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "harvester/dopri5.hpp"
#include "harvester/error.hpp"

namespace harvester {

const char* to_string(ModelVariant v) {
  return v == ModelVariant::Linear ? "linear" : "nonlinear";
}

void validate(const IntegratorConfig& c) {
  if (!(c.rel_tol > 0) || !(c.abs_tol.array() > 0).all())
    throw Error(ErrorKind::Validation, "integrator tolerances must be > 0");
  if (!(c.max_step > 0)) throw Error(ErrorKind::Validation, "integrator max step must be > 0");
  if (!(c.event_tol > 0)) throw Error(ErrorKind::Validation, "integrator event tolerance must be > 0");
  if (!(c.sample_interval > 0))
    throw Error(ErrorKind::Validation, "integrator sample interval must be > 0");
}

HarvesterSystem::HarvesterSystem(ModelVariant variant, const DeviceParams& params,
                                 const LoadNetwork& loads)
    : variant_(variant), params_(params), loads_(loads), linear_(linearize(params)) {}

Branches HarvesterSystem::branches_at(const StateVector& y) const {
  if (variant_ == ModelVariant::Linear) return {};
  return branches_of(y[0], params_);
}

Vec2<double> HarvesterSystem::node_voltages(const StateVector& y, Branches b) const {
  const Vec2<double> q = y.tail<2>();
  if (variant_ == ModelVariant::Linear) return linear_port_voltages(y[0], q, linear_);
  return port_voltages(y[0], q, params_, b.clamp);
}

Vec2<double> HarvesterSystem::electrical_rates(const StateVector& y, Branches b) const {
  const double v = y[1];
  const double cp = loads_.parasitic_cap;
  const double inv_ce = 1.0 / params_.electret.capacitance;

  Vec2<double> inv_c;
  Vec2<double> motional;  // d/dt of the q_i/C_i(x) term at fixed charge
  if (variant_ == ModelVariant::Linear) {
    inv_c.setConstant(1.0 / linear_.nominal_cap);
    motional = linear_.coupling * v;
  } else {
    inv_c = capacitance_pair(y[0], params_.geometry, params_.clamp, b.clamp).cwiseInverse();
    motional = y.tail<2>().cwiseProduct(
                   inv_cap_gradient(y[0], params_.geometry, params_.clamp, b.clamp)) *
               v;
  }
  const Vec2<double> vn = node_voltages(y, b);

  // Node i: -dq_i/dt = V_i/R_i + C_p dV_i/dt, with
  // dV_i/dt = (dq1 + dq2)/C_e + (dq_i)/C_i + motional_i.
  const double m00 = 1.0 + cp * (inv_ce + inv_c[0]);
  const double m11 = 1.0 + cp * (inv_ce + inv_c[1]);
  const double m01 = cp * inv_ce;
  const double r0 = -(vn[0] / loads_.resistance1 + cp * motional[0]);
  const double r1 = -(vn[1] / loads_.resistance2 + cp * motional[1]);
  const double det = m00 * m11 - m01 * m01;
  return {(m11 * r0 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det};
}

double HarvesterSystem::mechanical_rate(const StateVector& y, double accel, Branches b) const {
  const MechanicalParams& mech = params_.mechanical;
  const Vec2<double> q = y.tail<2>();
  double force;
  if (variant_ == ModelVariant::Linear) {
    force = -linear_transducer_force(y[0], q, linear_);
  } else {
    force = -transducer_force(y[0], q, params_, b.clamp) +
            stopper_force(y[0], params_.stoppers, b.stopper);
  }
  return (force - mech.damping * y[1]) / mech.mass + accel;
}

StateVector HarvesterSystem::derivative(const StateVector& y, double accel, Branches b) const {
  StateVector dy;
  dy[0] = y[1];
  dy[1] = mechanical_rate(y, accel, b);
  dy.tail<2>() = electrical_rates(y, b);
  return dy;
}

double HarvesterSystem::stored_energy(const StateVector& y, Branches b) const {
  const double x = y[0];
  const Vec2<double> q = y.tail<2>();
  const double kinetic = 0.5 * params_.mechanical.mass * y[1] * y[1];
  const double parasitic = 0.5 * loads_.parasitic_cap * node_voltages(y, b).squaredNorm();
  if (variant_ == ModelVariant::Linear)
    return kinetic + linear_transducer_energy(x, q, linear_) + parasitic;
  return kinetic + 0.5 * params_.mechanical.spring_constant * x * x +
         stopper_energy(x, params_.stoppers, b.stopper) +
         capacitor_energy(x, q, params_, b.clamp) + parasitic;
}

TrajectorySample HarvesterSystem::observe(double t, const StateVector& y, double accel,
                                          Branches b) const {
  const Vec2<double> vn = node_voltages(y, b);
  const double p = vn[0] * vn[0] / loads_.resistance1 + vn[1] * vn[1] / loads_.resistance2;
  return {t, y[0], y[1], y[2], y[3], vn[0], vn[1], accel, p};
}

Vec2<double> electrical_rates(const SimState& state, ModelVariant variant,
                              const DeviceParams& params, const LoadNetwork& loads) {
  const HarvesterSystem sys(variant, params, loads);
  return sys.electrical_rates(state.y, sys.branches_at(state.y));
}

double mechanical_rate(const SimState& state, ModelVariant variant, const DeviceParams& params,
                       double accel) {
  const HarvesterSystem sys(variant, params, LoadNetwork{});
  return sys.mechanical_rate(state.y, accel, sys.branches_at(state.y));
}

SimState default_initial(const DeviceParams& params, ModelVariant variant) {
  SimState s;
  if (variant == ModelVariant::Nonlinear) s.y.tail<2>().setConstant(dc_equilibrium_charge(params));
  return s;
}

namespace {

using Stepper = DormandPrince<double, 4>;

/// A threshold crossing that changes one branch. The event fires when
/// `sign * (x - level)` becomes positive.
struct Watch {
  double level;
  double sign;
  bool is_clamp;
  Side next;
};

int watches_for(Side side, double threshold, bool is_clamp, std::array<Watch, 4>& out, int n) {
  switch (side) {
    case Side::Inside:
      out[n++] = {threshold, 1.0, is_clamp, Side::Positive};
      out[n++] = {-threshold, -1.0, is_clamp, Side::Negative};
      break;
    case Side::Positive: out[n++] = {threshold, -1.0, is_clamp, Side::Inside}; break;
    case Side::Negative: out[n++] = {-threshold, 1.0, is_clamp, Side::Inside}; break;
  }
  return n;
}

struct EventHit {
  double theta;
  Branches next;
};

/// Earliest branch change inside an accepted step, located on the dense
/// output to within `tol` in x. The returned theta lies just past the
/// crossing so the state there already belongs to the new branch.
std::optional<EventHit> locate_event(const Stepper::Step& s, Branches current,
                                     const DeviceParams& p, double tol) {
  std::array<Watch, 4> watches{};
  int n = watches_for(current.clamp, p.clamp.clamp_displacement, true, watches, 0);
  n = watches_for(current.stopper, p.stoppers.engage_displacement, false, watches, n);

  constexpr int kScan = 8;
  std::array<double, kScan + 1> xs{}, vs{};
  xs[0] = s.y0[0];
  vs[0] = s.y0[1];
  for (int k = 1; k < kScan; ++k) {
    const auto y = s.at(static_cast<double>(k) / kScan);
    xs[k] = y[0];
    vs[k] = y[1];
  }
  xs[kScan] = s.y1[0];
  vs[kScan] = s.y1[1];

  std::optional<EventHit> best;
  for (int w = 0; w < n; ++w) {
    const Watch& watch = watches[w];
    const auto g = [&](double x) { return watch.sign * (x - watch.level); };
    int k = 1;
    while (k <= kScan && !(g(xs[k]) > 0)) ++k;
    double lo, hi, g_hi;
    if (k <= kScan) {
      lo = static_cast<double>(k - 1) / kScan;
      hi = static_cast<double>(k) / kScan;
      g_hi = g(xs[k]);
    } else {
      // No scan point is past the threshold, but a shallow graze can still
      // peak between two of them: look for an interior maximum of g.
      const auto rate = [&](double th) { return watch.sign * s.at(th)[1]; };
      std::optional<double> peak;
      for (int j = 1; j <= kScan && !peak; ++j) {
        if (!(watch.sign * vs[j - 1] > 0 && watch.sign * vs[j] < 0)) continue;
        double a = static_cast<double>(j - 1) / kScan, b = static_cast<double>(j) / kScan;
        for (int it = 0; it < 60 && b - a > 1e-15; ++it) {
          const double mid = 0.5 * (a + b);
          (rate(mid) > 0 ? a : b) = mid;
        }
        if (g(s.at(b)[0]) > 0) {
          peak = b;
          lo = static_cast<double>(j - 1) / kScan;
        }
      }
      if (!peak) continue;
      hi = *peak;
      g_hi = g(s.at(hi)[0]);
    }
    if (best && lo >= best->theta) continue;
    for (int it = 0; it < 200 && g_hi > tol && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double g_mid = g(s.at(mid)[0]);
      if (g_mid > 0) {
        hi = mid;
        g_hi = g_mid;
      } else {
        lo = mid;
      }
    }
    if (!best || hi < best->theta) {
      Branches next = current;
      (watch.is_clamp ? next.clamp : next.stopper) = watch.next;
      best = EventHit{hi, next};
    }
  }
  return best;
}

}  // namespace

IntegrationStats integrate(ModelVariant variant, const DeviceParams& params,
                           const LoadNetwork& loads, const Excitation& excitation,
                           const SimState& initial, double t_end, const IntegratorConfig& config,
                           const SampleSink& sink) {
  validate(params);
  validate(loads);
  validate(config);
  if (!(t_end > initial.t)) throw Error(ErrorKind::Validation, "time span must be positive");
  if (!initial.y.allFinite() || !std::isfinite(initial.t))
    throw Error(ErrorKind::Validation, "initial state must be finite");
  if (excitation.end_time() < t_end)
    throw Error(ErrorKind::OutOfRange, "excitation does not cover the integration span");

  const HarvesterSystem sys(variant, params, loads);
  IntegrationStats stats;

  Branches branch = sys.branches_at(initial.y);
  const auto rhs = [&](double t, const StateVector& y) {
    ++stats.rhs_evaluations;
    return sys.derivative(y, excitation(t), branch);
  };

  double t = initial.t;
  StateVector y = initial.y;
  StateVector k1 = rhs(t, y);

  const double t0 = initial.t;
  const double dt = config.sample_interval;
  long next_sample = 0;
  const auto sample_time = [&](long i) { return t0 + static_cast<double>(i) * dt; };
  const double sample_slack = 1e-9 * dt;

  sink(sys.observe(t, y, excitation(t), branch));
  next_sample = 1;

  const double span = t_end - t0;
  double h = std::min({config.max_step, 1e-6, span});
  int nonfinite_attempts = 0;
  bool last_rejected = false;

  while (t < t_end) {
    const double target = std::min(t_end, excitation.next_breakpoint(t));
    double h_try = std::min(h, config.max_step);
    bool reaches_target = false;
    if (t + 1.01 * h_try >= target) {
      h_try = target - t;
      reaches_target = true;
    }
    const double h_min = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), span);
    if (h_try < h_min) {
      if (reaches_target) {
        // Breakpoint closer than the step floor: jump onto it.
        t = target;
        continue;
      }
      throw Error(ErrorKind::StepUnderflow, "step size underflow at t = " + std::to_string(t));
    }

    const Stepper::Step s =
        Stepper::step(rhs, t, y, k1, h_try, config.rel_tol, config.abs_tol);

    if (!s.y1.allFinite() || !std::isfinite(s.error)) {
      if (++nonfinite_attempts > 40) throw NonFiniteError(t);
      h = 0.1 * h_try;
      ++stats.rejected;
      last_rejected = true;
      continue;
    }
    nonfinite_attempts = 0;

    if (s.error > 1.0) {
      h = h_try * std::max(0.2, std::min(1.0, Stepper::step_factor(s.error)));
      ++stats.rejected;
      last_rejected = true;
      continue;
    }

    std::optional<EventHit> event;
    if (variant == ModelVariant::Nonlinear) event = locate_event(s, branch, params, config.event_tol);

    double t_new;
    StateVector y_new;
    if (event) {
      t_new = t + event->theta * h_try;
      y_new = s.at(event->theta);
    } else {
      t_new = reaches_target ? target : s.t1();
      y_new = s.y1;
    }

    for (double ts = sample_time(next_sample); ts <= t_new + sample_slack;
         ts = sample_time(++next_sample)) {
      const double theta = std::min(1.0, (ts - t) / h_try);
      sink(sys.observe(ts, s.at(theta), excitation(ts), branch));
    }

    ++stats.accepted;
    double factor = Stepper::step_factor(s.error);
    if (last_rejected) factor = std::min(factor, 1.0);
    last_rejected = false;

    if (event) {
      branch = event->next;
      ++stats.events;
      k1 = rhs(t_new, y_new);
      h = h_try * factor;
    } else {
      k1 = s.k7;
      h = (reaches_target && factor >= 1.0) ? std::max(h, h_try * factor) : h_try * factor;
    }
    t = t_new;
    y = y_new;
  }
  return stats;
}

Trajectory integrate(ModelVariant variant, const DeviceParams& params, const LoadNetwork& loads,
                     const Excitation& excitation, const SimState& initial, double t_end,
                     const IntegratorConfig& config) {
  Trajectory traj;
  traj.variant = variant;
  traj.samples.reserve(
      static_cast<std::size_t>((t_end - initial.t) / config.sample_interval) + 2);
  integrate(variant, params, loads, excitation, initial, t_end, config,
            [&](const TrajectorySample& s) { traj.samples.push_back(s); });
  return traj;
}

}  // namespace harvester
