#pragma once

// Coupled mechanical/electrical equations of motion and their integration.
//
// State layout is (x, v, q1, q2). For the Linear variant the charges are
// offsets from the DC operating point q_0; for the Nonlinear variant they are
// the absolute charges on the variable capacitors.

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "harvester/excitation.hpp"
#include "harvester/model.hpp"
#include "harvester/params.hpp"

namespace harvester {

enum class ModelVariant { Linear, Nonlinear };

const char* to_string(ModelVariant v);

using StateVector = Eigen::Matrix<double, 4, 1>;

struct SimState {
  double t = 0.0;
  StateVector y = StateVector::Zero();

  double x() const { return y[0]; }
  double v() const { return y[1]; }
  Vec2<double> q() const { return y.tail<2>(); }
};

struct IntegratorConfig {
  double rel_tol = 1e-7;
  StateVector abs_tol = (StateVector() << 1e-12, 1e-8, 1e-18, 1e-18).finished();
  double max_step = 1e-4;         // s
  double event_tol = 1e-12;       // m, crossing localization of +-x_s and +-x_c
  double sample_interval = 5e-6;  // s
};

void validate(const IntegratorConfig& c);

/// One row of a trajectory; vn are the output-node (port) voltages and p the
/// instantaneous load power vn1^2/R_L1 + vn2^2/R_L2.
struct TrajectorySample {
  double t, x, v, q1, q2, vn1, vn2, a, p;
};

struct Trajectory {
  ModelVariant variant = ModelVariant::Nonlinear;
  std::vector<TrajectorySample> samples;
};

struct IntegrationStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  long events = 0;
};

using SampleSink = std::function<void(const TrajectorySample&)>;

/// Right-hand side of the harvester ODE with parameters resolved once.
class HarvesterSystem {
 public:
  HarvesterSystem(ModelVariant variant, const DeviceParams& params, const LoadNetwork& loads);

  ModelVariant variant() const { return variant_; }
  const DeviceParams& params() const { return params_; }
  const LoadNetwork& loads() const { return loads_; }
  const LinearModel& linear_model() const { return linear_; }

  Vec2<double> node_voltages(const StateVector& y, Branches b) const;
  Vec2<double> electrical_rates(const StateVector& y, Branches b) const;
  double mechanical_rate(const StateVector& y, double accel, Branches b) const;
  StateVector derivative(const StateVector& y, double accel, Branches b) const;

  /// Total stored energy: kinetic, spring, stopper, capacitors and parasitics.
  double stored_energy(const StateVector& y, Branches b) const;

  TrajectorySample observe(double t, const StateVector& y, double accel, Branches b) const;

  Branches branches_at(const StateVector& y) const;

 private:
  ModelVariant variant_;
  DeviceParams params_;
  LoadNetwork loads_;
  LinearModel linear_;
};

Vec2<double> electrical_rates(const SimState& state, ModelVariant variant,
                              const DeviceParams& params, const LoadNetwork& loads);

double mechanical_rate(const SimState& state, ModelVariant variant, const DeviceParams& params,
                       double accel);

/// DC operating point: mass at rest at x = 0, both capacitors at q_0
/// (zero offsets for the Linear variant).
SimState default_initial(const DeviceParams& params, ModelVariant variant);

/// Adaptive Dormand-Prince integration from `initial.t` to `t_end`. Samples
/// at initial.t + k * sample_interval are delivered to `sink` in order.
IntegrationStats integrate(ModelVariant variant, const DeviceParams& params,
                           const LoadNetwork& loads, const Excitation& excitation,
                           const SimState& initial, double t_end, const IntegratorConfig& config,
                           const SampleSink& sink);

Trajectory integrate(ModelVariant variant, const DeviceParams& params, const LoadNetwork& loads,
                     const Excitation& excitation, const SimState& initial, double t_end,
                     const IntegratorConfig& config);

}  // namespace harvester
