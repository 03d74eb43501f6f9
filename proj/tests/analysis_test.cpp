#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "harvester/analysis.hpp"
#include "harvester/error.hpp"
#include "harvester/excitation.hpp"

using namespace harvester;

namespace {

std::vector<double> white(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

TrajectorySample sample(double t, double x, double vn1, double vn2, const LoadNetwork& l) {
  return {t, x, 0.0, 0.0, 0.0, vn1, vn2, 0.0, vn1 * vn1 / l.resistance1 + vn2 * vn2 / l.resistance2};
}

}  // namespace

TEST_CASE("Welch: white noise is flat at 2 sigma^2 / fs and integrates to the variance") {
  const double fs = 1e4;
  const auto x = white(4096 * 120, 1, 1.0);
  const PsdEstimate est = welch_psd(x, fs);
  CHECK(est.segments >= 100);
  double integral = 0.0;
  for (double d : est.density) integral += d * est.bin_width();
  CHECK(integral == doctest::Approx(1.0).epsilon(0.03));
  CHECK(est.band_power(500, 4500) / 4000 == doctest::Approx(2.0 / fs).epsilon(0.03));
}

TEST_CASE("Welch: tone power and zero series") {
  const double fs = 1e4, a = 3.0;
  std::vector<double> x(4096 * 8);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * std::sin(2 * std::numbers::pi * 1190.0 * i / fs);
  const PsdEstimate est = welch_psd(x, fs);
  CHECK(est.band_power(1150, 1230) == doctest::Approx(a * a / 2).epsilon(0.01));

  const PsdEstimate zero = welch_psd(std::vector<double>(4096 * 3, 0.0), fs);
  for (double d : zero.density) CHECK(d == 0.0);
}

TEST_CASE("Welch: configuration and length errors") {
  const std::vector<double> x(1000, 1.0);
  try {
    welch_psd(x, 1e4);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }
  CHECK_THROWS_AS(welch_psd(x, 1e4, WelchConfig{32, 0.5}), Error);
  CHECK_THROWS_AS(welch_psd(x, 1e4, WelchConfig{128, 1.0}), Error);
}

TEST_CASE("average power: Ohm's law, discard, mean square, contact") {
  LoadNetwork l;
  l.resistance1 = 1e6;
  PowerAccumulator acc(l, 0.5, 14e-6);
  for (int i = 0; i <= 1000; ++i) {
    const double t = i * 1e-3;
    const double x = i % 4 == 0 ? 15e-6 : 2e-6;
    acc.add(sample(t, t < 0.5 ? 1.0 : x, t < 0.5 ? 100.0 : 1.0, 0.0, l));
  }
  const PowerReport r = acc.report();
  CHECK(r.average_power == doctest::Approx(1e-6));
  CHECK(r.port_power[0] == doctest::Approx(1e-6));
  CHECK(r.port_power[1] == 0.0);
  CHECK(r.average_power == r.port_power.sum());
  CHECK(r.observation_window == doctest::Approx(0.5));
  CHECK(r.peak_displacement == 15e-6);
  CHECK(r.contact_fraction == doctest::Approx(126.0 / 501.0));
  CHECK(r.mean_square_displacement > 4e-12);
  CHECK(r.standard_error < 1e-15);

  PowerAccumulator empty(l, 2.0);
  empty.add(sample(0.0, 0, 1, 1, l));
  try {
    empty.report();
    FAIL("expected WindowEmpty");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WindowEmpty);
  }
}

TEST_CASE("average power from a trajectory matches the streaming form") {
  LoadNetwork l;
  Trajectory traj;
  for (int i = 0; i < 5000; ++i) {
    const double t = i * 1e-5;
    traj.samples.push_back(sample(t, 1e-6 * std::sin(7000 * t), std::sin(7000 * t), std::cos(7000 * t), l));
  }
  const PowerReport r = average_power(traj, l, 0.0);
  CHECK(r.average_power == doctest::Approx(1.0 / 28e6).epsilon(1e-3));
  CHECK(r.mean_square_displacement == doctest::Approx(0.5e-12).epsilon(2e-3));
}

TEST_CASE("batch standard error reflects the scatter of a noisy power series") {
  // Independent per-sample powers: the standard error of the mean is sigma / sqrt(n).
  LoadNetwork l;
  l.resistance1 = l.resistance2 = 1.0;
  const auto v = white(200000, 9);
  PowerAccumulator acc(l, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) acc.add(sample(i * 1e-4, 0, v[i], 0, l));
  const PowerReport r = acc.report();
  CHECK(r.average_power == doctest::Approx(1.0).epsilon(0.02));
  const double expected = std::sqrt(2.0 / v.size());  // var(v^2) = 2 for unit normals
  CHECK(r.standard_error > 0.5 * expected);
  CHECK(r.standard_error < 2.0 * expected);
}

TEST_CASE("phase-space export keeps (x, v) in order") {
  Trajectory traj;
  for (int i = 0; i < 10; ++i) traj.samples.push_back({i * 1.0, i * 2.0, i * 3.0, 0, 0, 0, 0, 0, 0});
  const auto m = phase_space_export(traj);
  REQUIRE(m.rows() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(m(i, 0) == i * 2.0);
    CHECK(m(i, 1) == i * 3.0);
  }
}

TEST_CASE("energy audit of the fixed point is zero") {
  const DeviceParams p = default_device();
  LoadNetwork l;
  const auto traj = integrate(ModelVariant::Nonlinear, p, l, Excitation(SineSpec{}),
                              default_initial(p, ModelVariant::Nonlinear), 0.01, IntegratorConfig{});
  const EnergyAudit a = energy_audit(traj, p, l);
  CHECK(a.input == 0.0);
  // Only round-off flows through the loads at rest.
  CHECK(std::abs(a.residual) < 1e-25);
  CHECK(a.load_loss < 1e-25);
}

TEST_CASE("trajectory CSV: header, provenance and full precision") {
  Trajectory traj;
  traj.samples.push_back({0.1, 1.0 / 3.0, -2e-3, -2.6e-11, -2.7e-11, 0.5, -0.5, 9.81, 1e-8});
  std::ostringstream out;
  write_trajectory_csv(out, traj, provenance_comment("abc123", 42));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# harvester-sim 1.0.0 config_hash=abc123 seed=42");
  std::getline(in, line);
  CHECK(line == "t_s,x_m,v_mps,q1_C,q2_C,vn1_V,vn2_V,a_mps2,p_W");
  std::getline(in, line);
  CHECK(std::stod(line.substr(line.find(',') + 1)) == 1.0 / 3.0);
  CHECK(format_double(0.1) == "0.10000000000000001");
}
