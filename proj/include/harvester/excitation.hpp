#pragma once

// Base acceleration signals: sinusoids, seeded flat-PSD Gaussian noise and
// file-backed traces, evaluated in continuous time for the integrator.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace harvester {

struct WelchConfig;

struct SineSpec {
  double amplitude = 0.0;  // m/s^2
  double frequency = 1.0;  // Hz
  double phase = 0.0;      // rad
};

/// Band-limited Gaussian noise with a flat one-sided PSD.
struct NoiseSpec {
  double psd_level = 0.0;      // g^2/Hz
  double bandwidth = 5000.0;   // Hz
  double sample_rate = 1e4;    // Hz
  std::uint64_t seed = 0;
  double duration = 1.0;       // s
};

/// Name of the noise synthesis algorithm. Traces generated under the same
/// name and seed are identical on any platform with IEEE-754 doubles.
inline constexpr const char* kNoiseAlgorithm = "mt19937_64+box-muller/v1";

struct SampledSignal {
  double start_time = 0.0;
  double sample_rate = 1.0;
  std::vector<double> samples;  // m/s^2

  double end_time() const {
    return start_time + static_cast<double>(samples.size() - 1) / sample_rate;
  }
};

enum class AccelUnit { MetresPerSecond2, StandardGravity };

double sine_eval(const SineSpec& spec, double t);

SampledSignal noise_generate(const NoiseSpec& spec);

/// Linear interpolation; throws OutOfRange outside [start_time, end_time()].
double signal_interpolate(const SampledSignal& sig, double t);

SampledSignal signal_from_file(const std::filesystem::path& path);
SampledSignal read_signal_csv(std::istream& in);

/// Writes the signal CSV. `comment`, when nonempty, goes on a leading '#' line.
void write_signal_csv(std::ostream& out, const SampledSignal& sig,
                      AccelUnit unit = AccelUnit::MetresPerSecond2,
                      const std::string& comment = {});

struct PsdCheck {
  double passband_mean_psd = 0.0;      // g^2/Hz
  double flatness_deviation_db = 0.0;  // worst band deviation from the passband mean
  bool passed = false;
};

/// Welch estimate of a generated trace against its target level. The passband
/// (f_max/50, 0.9 f_max) is split into ten equal-width bands; the mean must be
/// within +-10% of the target and every band within +-1 dB of the mean.
PsdCheck psd_verify(const SampledSignal& sig, const NoiseSpec& spec);
PsdCheck psd_verify(const SampledSignal& sig, const NoiseSpec& spec, const WelchConfig& welch);

/// Continuous-time acceleration source consumed by the integrator.
class Excitation {
 public:
  Excitation() = default;
  Excitation(SineSpec sine) : source_(sine) {}
  Excitation(SampledSignal signal) : source_(std::move(signal)) {}

  double operator()(double t) const;

  /// Next instant after `t` where the signal has a kink (sample instants of
  /// a sampled trace); +inf for smooth sources.
  double next_breakpoint(double t) const;

  /// Latest time the source is defined at.
  double end_time() const;

  bool is_sampled() const { return std::holds_alternative<SampledSignal>(source_); }

 private:
  std::variant<std::monostate, SineSpec, SampledSignal> source_;
};

}  // namespace harvester
