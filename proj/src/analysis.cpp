#include "harvester/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <unsupported/Eigen/FFT>

#include "harvester/error.hpp"

namespace harvester {

// ---------------------------------------------------------------------------
// Welch

double PsdEstimate::band_power(double f_lo, double f_hi) const {
  const double df = bin_width();
  double sum = 0.0;
  for (std::size_t k = 0; k < frequency.size(); ++k)
    if (frequency[k] >= f_lo && frequency[k] <= f_hi) sum += density[k] * df;
  return sum;
}

PsdEstimate welch_psd(std::span<const double> series, double sample_rate,
                      const WelchConfig& config) {
  const std::size_t n = config.segment_length;
  if (n < 64) throw Error(ErrorKind::Validation, "Welch segment length must be >= 64");
  if (!(config.overlap_fraction >= 0.0 && config.overlap_fraction < 1.0))
    throw Error(ErrorKind::Validation, "Welch overlap must lie in [0, 1)");
  if (!(sample_rate > 0)) throw Error(ErrorKind::Validation, "sample rate must be > 0");
  if (series.size() < 2 * n)
    throw Error(ErrorKind::TooShort, "series shorter than two Welch segments");

  const auto overlap = static_cast<std::size_t>(std::floor(config.overlap_fraction * n));
  const std::size_t hop = std::max<std::size_t>(1, n - overlap);

  std::vector<double> window(n);
  double window_power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n));
    window_power += window[i] * window[i];
  }

  const std::size_t bins = n / 2 + 1;
  PsdEstimate out;
  out.frequency.resize(bins);
  out.density.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k)
    out.frequency[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);

  Eigen::FFT<double> fft;
  std::vector<double> segment(n);
  std::vector<std::complex<double>> spectrum;
  const double scale = 1.0 / (sample_rate * window_power);

  for (std::size_t start = 0; start + n <= series.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += series[start + i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) segment[i] = (series[start + i] - mean) * window[i];
    fft.fwd(spectrum, segment);
    for (std::size_t k = 0; k < bins; ++k) {
      double p = std::norm(spectrum[k]) * scale;
      if (k != 0 && !(n % 2 == 0 && k == n / 2)) p *= 2.0;
      out.density[k] += p;
    }
    ++out.segments;
  }
  for (double& d : out.density) d /= static_cast<double>(out.segments);
  return out;
}

// ---------------------------------------------------------------------------
// Power

PowerAccumulator::PowerAccumulator(const LoadNetwork& loads, double settle_discard,
                                   double contact_threshold, int batches)
    : loads_(loads), settle_(settle_discard), contact_threshold_(contact_threshold),
      batches_(batches) {}

void PowerAccumulator::add(const TrajectorySample& s) {
  if (s.t < settle_) return;
  const Point cur{s.t, s.vn1 * s.vn1 / loads_.resistance1, s.vn2 * s.vn2 / loads_.resistance2,
                  s.x * s.x};
  ++samples_;
  if (std::abs(s.x) > contact_threshold_) ++contact_samples_;
  peak_ = std::max(peak_, std::abs(s.x));
  if (!have_prev_) {
    have_prev_ = true;
    first_t_ = s.t;
    prev_ = cur;
    return;
  }
  const double dt = cur.t - prev_.t;
  const double e1 = 0.5 * (prev_.p1 + cur.p1) * dt;
  const double e2 = 0.5 * (prev_.p2 + cur.p2) * dt;
  integral_p1_ += e1;
  integral_p2_ += e2;
  integral_x2_ += 0.5 * (prev_.x2 + cur.x2) * dt;

  const double mid = 0.5 * (prev_.t + cur.t) - first_t_;
  auto index = static_cast<std::size_t>(mid / chunk_length_);
  while (index >= kMaxChunks) {
    for (std::size_t i = 0; i < chunks_.size() / 2; ++i) chunks_[i] = chunks_[2 * i] + chunks_[2 * i + 1];
    if (chunks_.size() % 2) chunks_[chunks_.size() / 2] = chunks_.back();
    chunks_.resize((chunks_.size() + 1) / 2);
    chunk_length_ *= 2.0;
    index = static_cast<std::size_t>(mid / chunk_length_);
  }
  if (chunks_.size() <= index) chunks_.resize(index + 1, 0.0);
  chunks_[index] += e1 + e2;
  prev_ = cur;
}

PowerReport PowerAccumulator::report() const {
  const double window = have_prev_ ? prev_.t - first_t_ : 0.0;
  if (samples_ < 2 || !(window > 0))
    throw Error(ErrorKind::WindowEmpty, "no samples after the settle discard");
  PowerReport r;
  r.port_power = {integral_p1_ / window, integral_p2_ / window};
  r.average_power = r.port_power.sum();
  r.mean_square_displacement = integral_x2_ / window;
  r.peak_displacement = peak_;
  r.contact_fraction = static_cast<double>(contact_samples_) / static_cast<double>(samples_);
  r.settle_discard = settle_;
  r.observation_window = window;

  // Batch means over whole chunks; the trailing partial chunk is left out.
  const std::size_t full = static_cast<std::size_t>(window / chunk_length_);
  const std::size_t batches = std::min<std::size_t>(static_cast<std::size_t>(batches_), full);
  if (batches >= 2) {
    const std::size_t per = full / batches;
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) {
      double e = 0.0;
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) e += chunks_[i];
      means[b] = e / (static_cast<double>(per) * chunk_length_);
    }
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / batches;
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(batches - 1);
    r.standard_error = std::sqrt(var / static_cast<double>(batches));
  }
  return r;
}

PowerReport average_power(const Trajectory& traj, const LoadNetwork& loads, double settle_discard,
                          double contact_threshold) {
  PowerAccumulator acc(loads, settle_discard, contact_threshold);
  for (const auto& s : traj.samples) acc.add(s);
  return acc.report();
}

Eigen::Matrix<double, Eigen::Dynamic, 2> phase_space_export(const Trajectory& traj) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> out(static_cast<Eigen::Index>(traj.samples.size()), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out(i, 0) = traj.samples[static_cast<std::size_t>(i)].x;
    out(i, 1) = traj.samples[static_cast<std::size_t>(i)].v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Energy audit

EnergyAuditAccumulator::EnergyAuditAccumulator(ModelVariant variant, const DeviceParams& params,
                                               const LoadNetwork& loads)
    : sys_(variant, params, loads) {}

void EnergyAuditAccumulator::add(const TrajectorySample& s) {
  StateVector y;
  y << s.x, s.v, s.q1, s.q2;
  last_energy_ = sys_.stored_energy(y, sys_.branches_at(y));
  if (!have_prev_) {
    have_prev_ = true;
    first_ = s;
    prev_ = s;
    first_energy_ = last_energy_;
    return;
  }
  const double m = sys_.params().mechanical.mass;
  const double b = sys_.params().mechanical.damping;
  const double dt = s.t - prev_.t;
  const double in0 = m * prev_.a * prev_.v;
  const double in1 = m * s.a * s.v;
  input_ += 0.5 * (in0 + in1) * dt;
  gross_ += 0.5 * (std::abs(in0) + std::abs(in1)) * dt;
  damping_ += 0.5 * b * (prev_.v * prev_.v + s.v * s.v) * dt;
  load_ += 0.5 * (prev_.p + s.p) * dt;
  prev_ = s;
}

EnergyAudit EnergyAuditAccumulator::report() const {
  EnergyAudit a;
  a.input = input_;
  a.gross_input = gross_;
  if (sys_.variant() == ModelVariant::Nonlinear)
    a.bias_work = -sys_.params().electret.voltage * ((prev_.q1 + prev_.q2) - (first_.q1 + first_.q2));
  a.stored_change = last_energy_ - first_energy_;
  a.damping_loss = damping_;
  a.load_loss = load_;
  a.residual = a.input + a.bias_work - a.stored_change - a.damping_loss - a.load_loss;
  const double scale = std::max({a.gross_input, a.damping_loss + a.load_loss,
                                 std::abs(a.stored_change), std::abs(a.bias_work)});
  a.relative_residual = scale > 0 ? std::abs(a.residual) / scale : 0.0;
  return a;
}

EnergyAudit energy_audit(const Trajectory& traj, const DeviceParams& params,
                         const LoadNetwork& loads) {
  EnergyAuditAccumulator acc(traj.variant, params, loads);
  for (const auto& s : traj.samples) acc.add(s);
  return acc.report();
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string provenance_comment(const std::string& config_hash, std::uint64_t seed) {
  return std::string("# ") + kToolVersion + " config_hash=" + config_hash +
         " seed=" + std::to_string(seed);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::string& comment) {
  if (!comment.empty()) out << comment << '\n';
  out << "t_s,x_m,v_mps,q1_C,q2_C,vn1_V,vn2_V,a_mps2,p_W\n";
  for (const auto& s : traj.samples) {
    out << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.v) << ','
        << format_double(s.q1) << ',' << format_double(s.q2) << ',' << format_double(s.vn1)
        << ',' << format_double(s.vn2) << ',' << format_double(s.a) << ','
        << format_double(s.p) << '\n';
  }
}

}  // namespace harvester
