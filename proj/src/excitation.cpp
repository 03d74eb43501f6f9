#include "harvester/excitation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "harvester/analysis.hpp"
#include "harvester/error.hpp"
#include "harvester/params.hpp"

namespace harvester {

double sine_eval(const SineSpec& spec, double t) {
  return spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency * t + spec.phase);
}

namespace {

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t smooth_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Zero-phase brick-wall low-pass applied through one whole-signal FFT.
void lowpass_in_place(std::vector<double>& x, double sample_rate, double cutoff) {
  const std::size_t n = smooth_size(x.size());
  std::vector<double> padded(n, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  const double df = sample_rate / static_cast<double>(n);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    if (static_cast<double>(k) * df > cutoff) {
      spectrum[k] = 0.0;
      spectrum[n - k] = 0.0;
    }
  }
  fft.inv(padded, spectrum);
  std::copy_n(padded.begin(), x.size(), x.begin());
}

}  // namespace

SampledSignal noise_generate(const NoiseSpec& spec) {
  if (!(spec.sample_rate > 0) || !(spec.bandwidth > 0))
    throw Error(ErrorKind::InvalidSpec, "sample rate and bandwidth must be > 0");
  if (spec.sample_rate < 2.0 * spec.bandwidth)
    throw Error(ErrorKind::InvalidSpec, "sample rate must be at least twice the bandwidth");
  if (!(spec.psd_level >= 0)) throw Error(ErrorKind::InvalidSpec, "PSD level must be >= 0");
  if (!(spec.duration > 0)) throw Error(ErrorKind::InvalidSpec, "duration must be > 0");

  const auto n = static_cast<std::size_t>(std::ceil(spec.duration * spec.sample_rate)) + 1;
  std::vector<double> z(n);

  // Box-Muller on 53-bit uniforms drawn from mt19937_64.
  std::mt19937_64 rng(spec.seed);
  constexpr double kUnit = 1.0 / 9007199254740992.0;  // 2^-53
  for (std::size_t i = 0; i < n; i += 2) {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * kUnit;
    const double u2 = static_cast<double>(rng() >> 11) * kUnit;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    z[i] = r * std::cos(phi);
    if (i + 1 < n) z[i + 1] = r * std::sin(phi);
  }

  if (spec.bandwidth < 0.5 * spec.sample_rate * (1.0 - 1e-12))
    lowpass_in_place(z, spec.sample_rate, spec.bandwidth);

  const double psd_si = spec.psd_level * kStandardGravity * kStandardGravity;
  const double sigma = std::sqrt(psd_si * spec.sample_rate / 2.0);
  for (double& v : z) v *= sigma;
  return {0.0, spec.sample_rate, std::move(z)};
}

double signal_interpolate(const SampledSignal& sig, double t) {
  const std::size_t n = sig.samples.size();
  if (n == 0) throw Error(ErrorKind::EmptySignal, "signal has no samples");
  const double pos = (t - sig.start_time) * sig.sample_rate;
  const double last = static_cast<double>(n - 1);
  if (!(pos >= -1e-9 && pos <= last + 1e-9))
    throw Error(ErrorKind::OutOfRange, "t = " + std::to_string(t) + " s outside signal support");
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) return sig.samples[static_cast<std::size_t>(nearest)];
  const auto i = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), n - 2);
  const double frac = pos - static_cast<double>(i);
  return sig.samples[i] + frac * (sig.samples[i + 1] - sig.samples[i]);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

double parse_number(const std::string& text, int line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + t + "'", line);
  return v;
}

}  // namespace

SampledSignal read_signal_csv(std::istream& in) {
  std::string raw;
  int line = 0;
  bool have_header = false;
  double unit_scale = 1.0;
  std::vector<double> times, values;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    if (!have_header) {
      if (text == "t_s,a_mps2") {
        unit_scale = 1.0;
      } else if (text == "t_s,a_g") {
        unit_scale = kStandardGravity;
      } else {
        throw ParseError("expected header 't_s,a_mps2' or 't_s,a_g'", line);
      }
      have_header = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos)
      throw ParseError("expected two comma-separated columns", line);
    times.push_back(parse_number(text.substr(0, comma), line));
    values.push_back(parse_number(text.substr(comma + 1), line) * unit_scale);
    if (times.size() >= 2) {
      const std::size_t i = times.size() - 1;
      const double dt0 = times[1] - times[0];
      if (!(dt0 > 0)) throw ParseError("time column must be strictly increasing", line);
      const double dti = times[i] - times[i - 1];
      if (std::abs(dti - dt0) > 1e-9 * dt0) throw ParseError("non-uniform sample spacing", line);
    }
  }
  if (!have_header) throw ParseError("missing header line", line);
  if (values.empty()) throw Error(ErrorKind::EmptySignal, "signal file has no samples");

  SampledSignal sig;
  sig.start_time = times.front();
  sig.sample_rate =
      times.size() >= 2 ? static_cast<double>(times.size() - 1) / (times.back() - times.front())
                        : 1.0;
  sig.samples = std::move(values);
  return sig;
}

SampledSignal signal_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return read_signal_csv(in);
}

void write_signal_csv(std::ostream& out, const SampledSignal& sig, AccelUnit unit,
                      const std::string& comment) {
  if (!comment.empty()) out << comment << '\n';
  const bool in_g = unit == AccelUnit::StandardGravity;
  out << (in_g ? "t_s,a_g\n" : "t_s,a_mps2\n");
  for (std::size_t i = 0; i < sig.samples.size(); ++i) {
    const double t = sig.start_time + static_cast<double>(i) / sig.sample_rate;
    const double a = in_g ? sig.samples[i] / kStandardGravity : sig.samples[i];
    out << format_double(t) << ',' << format_double(a) << '\n';
  }
}

// ---------------------------------------------------------------------------
// PSD check

PsdCheck psd_verify(const SampledSignal& sig, const NoiseSpec& spec) {
  return psd_verify(sig, spec, WelchConfig{});
}

PsdCheck psd_verify(const SampledSignal& sig, const NoiseSpec& spec, const WelchConfig& welch) {
  const std::size_t len = welch.segment_length;
  const auto hop = std::max<std::size_t>(
      1, len - static_cast<std::size_t>(std::floor(welch.overlap_fraction * len)));
  const std::size_t segments = sig.samples.size() >= len ? (sig.samples.size() - len) / hop + 1 : 0;
  if (segments < 20) throw Error(ErrorKind::TooShort, "psd_verify needs at least 20 Welch segments");

  std::vector<double> in_g(sig.samples.size());
  std::transform(sig.samples.begin(), sig.samples.end(), in_g.begin(),
                 [](double a) { return a / kStandardGravity; });
  const PsdEstimate est = welch_psd(in_g, sig.sample_rate, welch);

  const double lo = spec.bandwidth / 50.0;
  const double hi = 0.9 * spec.bandwidth;
  constexpr int kBands = 10;
  std::vector<double> band_sum(kBands, 0.0);
  std::vector<int> band_count(kBands, 0);
  double total = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < est.frequency.size(); ++k) {
    const double f = est.frequency[k];
    if (f <= lo || f >= hi) continue;
    const int b = std::min(kBands - 1, static_cast<int>((f - lo) / (hi - lo) * kBands));
    band_sum[b] += est.density[k];
    ++band_count[b];
    total += est.density[k];
    ++count;
  }
  PsdCheck check;
  check.passband_mean_psd = count > 0 ? total / count : 0.0;
  for (int b = 0; b < kBands; ++b) {
    if (band_count[b] == 0 || check.passband_mean_psd <= 0) continue;
    const double band_mean = band_sum[b] / band_count[b];
    const double dev = band_mean > 0 ? std::abs(10.0 * std::log10(band_mean / check.passband_mean_psd))
                                     : std::numeric_limits<double>::infinity();
    check.flatness_deviation_db = std::max(check.flatness_deviation_db, dev);
  }
  check.passed = std::abs(check.passband_mean_psd - spec.psd_level) <= 0.1 * spec.psd_level &&
                 check.flatness_deviation_db <= 1.0;
  return check;
}

// ---------------------------------------------------------------------------
// Excitation

double Excitation::operator()(double t) const {
  if (const auto* s = std::get_if<SineSpec>(&source_)) return sine_eval(*s, t);
  if (const auto* sig = std::get_if<SampledSignal>(&source_)) return signal_interpolate(*sig, t);
  return 0.0;
}

double Excitation::next_breakpoint(double t) const {
  const auto* sig = std::get_if<SampledSignal>(&source_);
  if (!sig) return std::numeric_limits<double>::infinity();
  const double pos = (t - sig->start_time) * sig->sample_rate;
  const double next = std::floor(pos + 1e-7) + 1.0;
  return sig->start_time + next / sig->sample_rate;
}

double Excitation::end_time() const {
  if (const auto* sig = std::get_if<SampledSignal>(&source_)) return sig->end_time();
  return std::numeric_limits<double>::infinity();
}

}  // namespace harvester
