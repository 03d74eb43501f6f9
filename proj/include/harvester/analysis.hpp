#pragma once

// Observables computed from trajectories: average load power, mean-square
// displacement, Welch PSD estimates, phase-space export and the energy audit.
// Time integrals use the trapezoidal rule on the uniform sample grid. The
// accumulator classes let long runs be reduced while they are integrated.

#include <Eigen/Core>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "harvester/dynamics.hpp"

namespace harvester {

struct WelchConfig {
  std::size_t segment_length = 4096;
  double overlap_fraction = 0.5;
  // Hann is the only window shape.
};

struct PsdEstimate {
  std::vector<double> frequency;  // Hz
  std::vector<double> density;    // one-sided, units^2/Hz
  std::size_t segments = 0;

  double bin_width() const { return frequency.size() > 1 ? frequency[1] - frequency[0] : 0.0; }
  /// Rectangle-rule integral of the density over [f_lo, f_hi].
  double band_power(double f_lo, double f_hi) const;
};

/// One-sided Welch estimate with a Hann window; each segment has its mean
/// removed. The density integrates to the series variance.
PsdEstimate welch_psd(std::span<const double> series, double sample_rate,
                      const WelchConfig& config = {});

struct PowerReport {
  double average_power = 0.0;                         // W
  Vec2<double> port_power = Vec2<double>::Zero();     // W per port
  double mean_square_displacement = 0.0;              // m^2
  double peak_displacement = 0.0;                     // m
  double contact_fraction = 0.0;  // share of samples with |x| > contact threshold
  double standard_error = 0.0;    // W, from the scatter of batch means
  double settle_discard = 0.0;    // s
  double observation_window = 0.0;  // s
};

/// Streaming form of average_power(); feed samples in time order.
class PowerAccumulator {
 public:
  PowerAccumulator(const LoadNetwork& loads, double settle_discard,
                   double contact_threshold = std::numeric_limits<double>::infinity(),
                   int batches = 20);

  void add(const TrajectorySample& s);
  /// Throws WindowEmpty when fewer than two samples fell after the discard.
  PowerReport report() const;

 private:
  struct Point {
    double t, p1, p2, x2;
  };

  LoadNetwork loads_;
  double settle_;
  double contact_threshold_;
  int batches_;
  bool have_prev_ = false;
  Point prev_{};
  double first_t_ = 0.0;
  double integral_p1_ = 0.0, integral_p2_ = 0.0, integral_x2_ = 0.0;
  double peak_ = 0.0;
  long samples_ = 0, contact_samples_ = 0;
  // Energy per fixed-length chunk of the window; pairs of chunks merge (and
  // chunk_length_ doubles) whenever the count reaches kMaxChunks.
  static constexpr std::size_t kMaxChunks = 4096;
  double chunk_length_ = 1e-4;
  std::vector<double> chunks_;
};

PowerReport average_power(const Trajectory& traj, const LoadNetwork& loads, double settle_discard,
                          double contact_threshold = std::numeric_limits<double>::infinity());

/// (x, v) pairs in time order, one row per sample.
Eigen::Matrix<double, Eigen::Dynamic, 2> phase_space_export(const Trajectory& traj);

/// Terms of the energy balance
///   input + bias_work = stored_change + damping_loss + load_loss.
/// bias_work is -V_e * (change of q1 + q2) for the Nonlinear variant and zero
/// for the Linear one (its charges are offsets and the bias is folded in).
struct EnergyAudit {
  double input = 0.0;            // integral of m a v
  double gross_input = 0.0;      // integral of |m a v|
  double bias_work = 0.0;
  double stored_change = 0.0;
  double damping_loss = 0.0;     // integral of b v^2
  double load_loss = 0.0;        // integral of sum V_i^2 / R_i
  double residual = 0.0;
  double relative_residual = 0.0;  // residual / max(gross input, losses, |stored change|)
};

class EnergyAuditAccumulator {
 public:
  EnergyAuditAccumulator(ModelVariant variant, const DeviceParams& params,
                         const LoadNetwork& loads);

  void add(const TrajectorySample& s);
  EnergyAudit report() const;

 private:
  HarvesterSystem sys_;
  bool have_prev_ = false;
  TrajectorySample first_{}, prev_{};
  double input_ = 0.0, gross_ = 0.0, damping_ = 0.0, load_ = 0.0;
  double first_energy_ = 0.0, last_energy_ = 0.0;
};

EnergyAudit energy_audit(const Trajectory& traj, const DeviceParams& params,
                         const LoadNetwork& loads);

/// Comment line carried at the top of every output file.
std::string provenance_comment(const std::string& config_hash, std::uint64_t seed);

inline constexpr const char* kToolVersion = "harvester-sim 1.0.0";

/// Trajectory CSV: `t_s,x_m,v_mps,q1_C,q2_C,vn1_V,vn2_V,a_mps2,p_W`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::string& comment = {});

/// Shortest-safe decimal text of a double (17 significant digits).
std::string format_double(double v);

}  // namespace harvester
