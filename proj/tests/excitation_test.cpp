#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "harvester/analysis.hpp"
#include "harvester/error.hpp"
#include "harvester/excitation.hpp"

using namespace harvester;

namespace {

double variance(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / (x.size() - 1);
}

}  // namespace

TEST_CASE("sine evaluation") {
  const SineSpec s{9.81, 1190.0, 0.0};
  CHECK(sine_eval(s, 0.0) == 0.0);
  CHECK(sine_eval(s, 0.25 / 1190.0) == doctest::Approx(9.81).epsilon(1e-14));
  for (double t : {1e-4, 3.3e-3, 0.0123})
    CHECK(sine_eval(s, t + 1 / 1190.0) == doctest::Approx(sine_eval(s, t)).epsilon(1e-9));
  CHECK(Excitation(s)(0.25 / 1190.0) == sine_eval(s, 0.25 / 1190.0));
  CHECK(Excitation()(1.0) == 0.0);
}

TEST_CASE("noise: zero level, variance, determinism, scaling") {
  NoiseSpec spec;
  spec.duration = 10.0;
  spec.seed = 42;
  spec.psd_level = 0.0;
  const auto zero = noise_generate(spec);
  CHECK(std::all_of(zero.samples.begin(), zero.samples.end(), [](double v) { return v == 0.0; }));

  spec.psd_level = 0.015;
  const auto a = noise_generate(spec);
  CHECK(a.samples.size() == 100001);
  CHECK(a.end_time() == doctest::Approx(10.0));
  const double target = 0.015 * 9.81 * 9.81 * 1e4 / 2;
  CHECK(variance(a.samples) == doctest::Approx(target).epsilon(0.05));

  CHECK(noise_generate(spec).samples == a.samples);
  spec.seed = 43;
  CHECK(noise_generate(spec).samples != a.samples);

  spec.seed = 42;
  spec.psd_level = 0.015 * 4;
  const auto b = noise_generate(spec);
  for (std::size_t i = 0; i < a.samples.size(); i += 997)
    CHECK(b.samples[i] == doctest::Approx(2 * a.samples[i]).epsilon(1e-14));
}

TEST_CASE("noise: spec validation") {
  NoiseSpec spec;
  spec.bandwidth = 6000;
  CHECK_THROWS_AS(noise_generate(spec), Error);
  try {
    noise_generate(spec);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
  }
  spec = {};
  spec.duration = 0;
  CHECK_THROWS_AS(noise_generate(spec), Error);
}

TEST_CASE("band-limited noise keeps the passband and removes the stopband") {
  NoiseSpec spec;
  spec.psd_level = 0.01;
  spec.bandwidth = 1000;
  spec.sample_rate = 1e4;
  spec.duration = 30;
  spec.seed = 5;
  const auto sig = noise_generate(spec);
  std::vector<double> in_g(sig.samples.size());
  for (std::size_t i = 0; i < in_g.size(); ++i) in_g[i] = sig.samples[i] / 9.81;
  const PsdEstimate est = welch_psd(in_g, 1e4, {});
  CHECK(est.band_power(100, 900) / 800 == doctest::Approx(0.01).epsilon(0.1));
  CHECK(est.band_power(1500, 4900) / 3400 < 1e-3 * 0.01);
  CHECK(psd_verify(sig, spec).passed);
}

TEST_CASE("psd_verify: generated noise passes, zeros and tones fail, short input rejected") {
  NoiseSpec spec;
  spec.psd_level = 0.015;
  spec.duration = 60;
  spec.seed = 11;
  const auto sig = noise_generate(spec);
  const PsdCheck ok = psd_verify(sig, spec);
  CHECK(ok.passed);
  CHECK(ok.passband_mean_psd == doctest::Approx(0.015).epsilon(0.1));
  CHECK(ok.flatness_deviation_db < 1.0);

  SampledSignal zero{0.0, 1e4, std::vector<double>(sig.samples.size(), 0.0)};
  const PsdCheck z = psd_verify(zero, spec);
  CHECK(z.passband_mean_psd == 0.0);
  CHECK_FALSE(z.passed);

  SampledSignal tone{0.0, 1e4, std::vector<double>(sig.samples.size())};
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 9.81 * std::sin(2 * std::numbers::pi * 1190.0 * i / 1e4);
  CHECK_FALSE(psd_verify(tone, spec).passed);

  SampledSignal short_sig{0.0, 1e4, std::vector<double>(4096 * 10, 1.0)};
  try {
    psd_verify(short_sig, spec);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }
}

TEST_CASE("interpolation: exact at samples, midpoints, constant, support") {
  const SampledSignal sig{0.5, 10.0, {1.0, 3.0, -2.0, 4.0}};
  CHECK(signal_interpolate(sig, 0.5) == 1.0);
  CHECK(signal_interpolate(sig, 0.7) == -2.0);
  CHECK(signal_interpolate(sig, 0.8) == 4.0);
  CHECK(signal_interpolate(sig, 0.55) == doctest::Approx(2.0));
  CHECK(signal_interpolate(sig, 0.65) == doctest::Approx(0.5));

  const SampledSignal flat{0.0, 100.0, std::vector<double>(50, 2.5)};
  for (double t = 0; t <= 0.49; t += 0.00731) CHECK(signal_interpolate(flat, t) == doctest::Approx(2.5));

  for (double t : {0.49, 0.81}) {
    try {
      signal_interpolate(sig, t);
      FAIL("expected OutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::OutOfRange);
    }
  }
  try {
    signal_interpolate(SampledSignal{}, 0.0);
    FAIL("expected EmptySignal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySignal);
  }
}

TEST_CASE("interpolation error of a sampled sine shrinks with oversampling") {
  const double f = 500.0;
  double previous = std::numeric_limits<double>::infinity();
  for (double fs : {4e3, 8e3, 16e3, 32e3}) {
    SampledSignal sig{0.0, fs, {}};
    for (int i = 0; i <= static_cast<int>(fs * 0.02); ++i)
      sig.samples.push_back(std::sin(2 * std::numbers::pi * f * i / fs));
    double worst = 0.0;
    for (double t = 0.0; t < 0.0199; t += 1.37e-6)
      worst = std::max(worst, std::abs(signal_interpolate(sig, t) - std::sin(2 * std::numbers::pi * f * t)));
    const double bound = std::pow(std::numbers::pi * f / fs, 2) / 2;  // h^2 max|f''| / 8
    CHECK(worst <= bound * 1.001);
    CHECK(worst < previous);
    previous = worst;
  }
}

TEST_CASE("excitation breakpoints are the sample instants") {
  const Excitation ex(SampledSignal{0.0, 1e4, std::vector<double>(11, 0.0)});
  CHECK(ex.is_sampled());
  CHECK(ex.next_breakpoint(0.0) == doctest::Approx(1e-4));
  CHECK(ex.next_breakpoint(1e-4) == doctest::Approx(2e-4));
  CHECK(ex.next_breakpoint(1.5e-4) == doctest::Approx(2e-4));
  CHECK(ex.end_time() == doctest::Approx(1e-3));
  CHECK(std::isinf(Excitation(SineSpec{}).next_breakpoint(0.0)));
}

TEST_CASE("signal CSV: reading, units, round trip, errors") {
  {
    std::istringstream in("t_s,a_mps2\n0,1.0\n1e-4,2.0\n");
    const auto sig = read_signal_csv(in);
    CHECK(sig.samples == std::vector<double>{1.0, 2.0});
    CHECK(sig.sample_rate == doctest::Approx(1e4));
  }
  {
    std::istringstream in("# comment\nt_s,a_g\n0,1.0\n");
    CHECK(read_signal_csv(in).samples.at(0) == doctest::Approx(9.81));
  }
  NoiseSpec spec;
  spec.psd_level = 0.02;
  spec.duration = 0.5;
  spec.seed = 3;
  const auto sig = noise_generate(spec);
  for (auto unit : {AccelUnit::MetresPerSecond2, AccelUnit::StandardGravity}) {
    std::stringstream io;
    write_signal_csv(io, sig, unit, "# header");
    const auto back = read_signal_csv(io);
    REQUIRE(back.samples.size() == sig.samples.size());
    CHECK(back.sample_rate == doctest::Approx(sig.sample_rate).epsilon(1e-12));
    if (unit == AccelUnit::MetresPerSecond2) {
      CHECK(back.samples == sig.samples);
    } else {
      for (std::size_t i = 0; i < sig.samples.size(); ++i)
        CHECK(back.samples[i] == doctest::Approx(sig.samples[i]).epsilon(1e-15));
    }
  }

  const auto parse_error_line = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_signal_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(parse_error_line("t,a\n0,1\n") == 1);
  CHECK(parse_error_line("t_s,a_g\n0,1\n1e-4,x\n") == 3);
  CHECK(parse_error_line("t_s,a_g\n0,1\n1e-4,1\n3e-4,1\n") == 4);
  CHECK(parse_error_line("t_s,a_g\n0,1,2\n") == 2);
  std::istringstream empty("t_s,a_g\n");
  try {
    read_signal_csv(empty);
    FAIL("expected EmptySignal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySignal);
  }
}
