#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "harvester/config.hpp"
#include "harvester/error.hpp"
#include "harvester/sweep.hpp"

using namespace harvester;

namespace {

int parse_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

ErrorKind error_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Parse;
}

const char* kSine =
    "excitation.type = sine\nexcitation.amplitude_g = 1\nexcitation.frequency_Hz = 1190\n"
    "load.R_MOhm = 28\nanalysis.duration_s = 0.18\n";

}  // namespace

TEST_CASE("config: empty file keeps reference defaults and needs an excitation") {
  CHECK(error_kind("") == ErrorKind::Validation);
  const RunConfig c = parse_config("", false);
  CHECK(c.device.mechanical.mass == 5.78e-6);
  CHECK(c.device.stoppers.engage_displacement == 14e-6);
  CHECK(c.device.clamp.cap_min == doctest::Approx(0.0928e-12).epsilon(1e-3));
  CHECK(c.loads.parasitic_cap == 1.94e-12);
  CHECK(c.settle_discard == doctest::Approx(0.1368).epsilon(1e-3));
  CHECK(c.variant == ModelVariant::Nonlinear);
}

TEST_CASE("config: unit suffixes scale values") {
  const RunConfig a = parse_config("stopper.x_s_um = 14\n", false);
  const RunConfig b = parse_config("stopper.x_s_m = 14e-6\n", false);
  CHECK(a.device.stoppers.engage_displacement == doctest::Approx(14e-6));
  CHECK(b.device.stoppers.engage_displacement == 14e-6);

  const RunConfig r = parse_config("load.R_MOhm = 28\n", false);
  CHECK(r.loads.resistance1 == 28e6);
  CHECK(r.loads.resistance2 == 28e6);

  const RunConfig s = parse_config(kSine);
  CHECK(s.excitation.kind == ExcitationKind::Sine);
  CHECK(s.excitation.sine.amplitude == doctest::Approx(9.81));
  CHECK(s.duration == 0.18);

  const RunConfig n = parse_config(
      "excitation.type = noise\nexcitation.psd_g2Hz = 0.015\nexcitation.seed = 18446744073709551615\n"
      "excitation.f_max_kHz = 2\nmechanical.m_mg = 5.78\nelectret.C_e_pF = 5\n");
  CHECK(n.seed == 18446744073709551615ULL);
  CHECK(n.excitation.noise.bandwidth == 2000.0);
  CHECK(n.device.mechanical.mass == doctest::Approx(5.78e-6));
  CHECK(n.duration == doctest::Approx(n.settle_discard + 60.0));
}

TEST_CASE("config: parse errors carry the line number") {
  CHECK(parse_error_line("excitation.type = sine\n\nbogus.key_m = 1\n") == 3);
  CHECK(parse_error_line("# c\nstopper.x_s_um = 14\nstopper.x_s_m = 1e-5\n") == 3);
  CHECK(parse_error_line("stopper.x_s_V = 14\n") == 1);
  CHECK(parse_error_line("stopper.x_s = 14\n") == 1);
  CHECK(parse_error_line("load.R_MOhm = abc\n") == 1);
  CHECK(parse_error_line("load.R_MOhm 28\n") == 1);
  CHECK(parse_error_line("load.R_MOhm = 28\nload.R1_MOhm = 1\n") == 2);
  CHECK(parse_error_line("excitation.type = square\n") == 1);
}

TEST_CASE("config: invariant violations name the problem") {
  CHECK(error_kind("clamp.x_c_um = 13\n") == ErrorKind::Validation);
  CHECK(error_kind(std::string(kSine) + "analysis.settle_s = 0.2\n") == ErrorKind::Validation);
  CHECK(error_kind("excitation.type = noise\nexcitation.f_s_Hz = 8000\n") == ErrorKind::Validation);
  CHECK(error_kind("excitation.type = sine\nload.R_Ohm = 0\n") == ErrorKind::Validation);
}

TEST_CASE("config: the hash ignores layout but not content") {
  const RunConfig a = parse_config("load.R_MOhm = 28\n# x\nexcitation.type = sine\n");
  const RunConfig b = parse_config("excitation.type   =   sine\n\nload.R_MOhm=28\n");
  const RunConfig c = parse_config("excitation.type = sine\nload.R_MOhm = 27\n");
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK(a.hash.size() == 16);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("config: file excitation resolves relative to the config") {
  const auto dir = std::filesystem::temp_directory_path() / "harvester_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "trace.csv") << "t_s,a_g\n0,0\n1e-4,1\n2e-4,0\n3e-4,-1\n";
    std::ofstream(dir / "run.cfg") << "excitation.type = file\nexcitation.file = trace.csv\n"
                                      "analysis.settle_s = 1e-4\n";
  }
  const RunConfig c = load_config(dir / "run.cfg");
  CHECK(c.duration == doctest::Approx(3e-4));
  const Excitation ex = build_excitation(c, 0);
  CHECK(ex(1e-4) == doctest::Approx(9.81));
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), ParseError);
}

TEST_CASE("sweep axes: ranges, lists and errors") {
  const SweepAxis lin = parse_axis("driveFrequency=lin:900:1500:61");
  CHECK(lin.parameter == SweepParameter::DriveFrequency);
  REQUIRE(lin.values.size() == 61);
  CHECK(lin.values[1] == doctest::Approx(910));
  CHECK(lin.values.back() == 1500);

  const SweepAxis log = parse_axis("loadResistance=log:1e6:3e8:31");
  CHECK(log.values.front() == 1e6);
  CHECK(log.values.back() == 3e8);
  CHECK(log.values[1] / log.values[0] == doctest::Approx(log.values[30] / log.values[29]));

  const SweepAxis list = parse_axis("noisePsdLevel=0.001,0.002,0.05");
  CHECK(list.values == std::vector<double>{0.001, 0.002, 0.05});

  CHECK_THROWS_AS(parse_axis("bogus=1,2"), ParseError);
  CHECK_THROWS_AS(parse_axis("sineAmplitude=log:0:1:3"), ParseError);
  CHECK_THROWS_AS(parse_axis("sineAmplitude=lin:1:2"), ParseError);
  CHECK_THROWS_AS(parse_axis("loadResistance=-1"), Error);
  CHECK(std::string(column_name(SweepParameter::NoisePsdLevel)) == "noisePsdLevel_g2Hz");
}

TEST_CASE("point seeds are deterministic and decorrelated") {
  CHECK(point_seed(1, 0) == point_seed(1, 0));
  CHECK(point_seed(1, 0) != point_seed(1, 1));
  CHECK(point_seed(1, 0) != point_seed(2, 0));
}

TEST_CASE("run_single: stopper-free at 1 g, contact at 10 g, silent without drive") {
  RunConfig c = parse_config(kSine);
  RunOptions opts;
  opts.energy_audit = true;
  const SimulationResult one = run_single(c, opts);
  CHECK(one.report.peak_displacement < 14e-6);
  CHECK(one.report.contact_fraction == 0.0);
  CHECK(one.report.average_power > 0);
  CHECK(one.audit->relative_residual < 1e-3);
  CHECK(one.trajectory.samples.size() == 20001);

  apply(c, SweepParameter::SineAmplitude, 10.0);
  CHECK(run_single(c).report.contact_fraction > 0);

  apply(c, SweepParameter::SineAmplitude, 0.0);
  CHECK(run_single(c).report.average_power < 1e-30);
}

TEST_CASE("sweep: degenerate grid equals run_single, grid order, failures recorded") {
  const RunConfig c = parse_config(kSine);
  const SweepResult single = sweep_grid(c, {parse_axis("driveFrequency=1190")});
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].outcomes[0].report->average_power == run_single(c).report.average_power);

  SweepOptions opts;
  opts.jobs = 3;
  opts.variants = {ModelVariant::Linear, ModelVariant::Nonlinear};
  const SweepResult grid = sweep_grid(
      c, {parse_axis("driveFrequency=1100,1190"), parse_axis("sineAmplitude=1,1e307")}, opts);
  REQUIRE(grid.rows.size() == 4);
  CHECK(grid.rows[1].values == std::vector<double>{1100, 1e307});
  CHECK(grid.rows[2].values == std::vector<double>{1190, 1});
  // The absurd drive overflows the stopper force; that point fails, the rest still run.
  CHECK_FALSE(grid.rows[3].outcomes[1].report);
  CHECK_FALSE(grid.rows[3].outcomes[1].error.empty());
  CHECK(grid.rows[2].outcomes[1].report);
  CHECK(grid.argmax(1).value() == 2);

  std::ostringstream csv;
  write_sweep_csv(csv, grid, "# test");
  const std::string text = csv.str();
  CHECK(text.find("linear_averagePower_W") != std::string::npos);
  CHECK(text.find("nonlinear_error") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("sweep: serial and parallel runs give byte-identical CSV") {
  RunConfig c = parse_config(
      "excitation.type = noise\nexcitation.psd_g2Hz = 0.01\nexcitation.seed = 99\n"
      "analysis.duration_s = 0.4\n");
  const std::vector<SweepAxis> axes{parse_axis("noisePsdLevel=0.005,0.01"),
                                    parse_axis("loadResistance=1e7,2.8e7")};
  SweepOptions serial;
  serial.jobs = 1;
  SweepOptions parallel;
  parallel.jobs = 4;
  std::ostringstream a, b;
  const SweepResult ra = sweep_grid(c, axes, serial);
  write_sweep_csv(a, ra, "#");
  write_sweep_csv(b, sweep_grid(c, axes, parallel), "#");
  CHECK(a.str() == b.str());

  // Load points share the realization of their excitation point.
  CHECK(ra.rows[0].seed == ra.rows[1].seed);
  CHECK(ra.rows[0].seed != ra.rows[2].seed);
  CHECK(ra.rows[0].seed == point_seed(99, 0));
}

TEST_CASE("sweep series only accepts excitation-level axes") {
  const RunConfig c = parse_config(kSine);
  CHECK_THROWS_AS(sweep_series(c, parse_axis("loadResistance=1e6")), Error);
  const SweepResult r = sweep_series(c, parse_axis("sineAmplitude=0.5,1"));
  CHECK(r.rows.size() == 2);
  CHECK(r.rows[1].outcomes[0].report->average_power >
        3.5 * r.rows[0].outcomes[0].report->average_power);
}
