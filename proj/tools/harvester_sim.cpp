// harvester-sim: single runs, sweeps, noise files and linearization reports.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "harvester/analysis.hpp"
#include "harvester/config.hpp"
#include "harvester/error.hpp"
#include "harvester/excitation.hpp"
#include "harvester/model.hpp"
#include "harvester/sweep.hpp"

namespace fs = std::filesystem;
using namespace harvester;

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
  std::string out = ".";
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Validation, "cannot write '" + path.string() + "'");
  return f;
}

RunConfig load_with_flags(const std::string& path, const CommonFlags& flags,
                          bool require_excitation = true) {
  RunConfig c = load_config(path, require_excitation);
  if (flags.seed) c.seed = *flags.seed;
  return c;
}

void print_report(std::ostream& out, const PowerReport& r, const std::optional<EnergyAudit>& audit) {
  out << "averagePower_W=" << format_double(r.average_power) << '\n'
      << "port1Power_W=" << format_double(r.port_power[0]) << '\n'
      << "port2Power_W=" << format_double(r.port_power[1]) << '\n'
      << "standardError_W=" << format_double(r.standard_error) << '\n'
      << "meanSquareDisplacement_m2=" << format_double(r.mean_square_displacement) << '\n'
      << "peakDisplacement_m=" << format_double(r.peak_displacement) << '\n'
      << "stopperContactFraction=" << format_double(r.contact_fraction) << '\n'
      << "settleDiscard_s=" << format_double(r.settle_discard) << '\n'
      << "observationWindow_s=" << format_double(r.observation_window) << '\n';
  if (audit) out << "energyResidual=" << format_double(audit->relative_residual) << '\n';
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags) {
  const RunConfig c = load_with_flags(config_path, flags);
  RunOptions opts;
  opts.energy_audit = true;
  const SimulationResult sim = run_single(c, c.seed, opts);
  const std::string comment = provenance_comment(c.hash, c.seed);
  auto traj = open_output(fs::path(flags.out) / "trajectory.csv");
  write_trajectory_csv(traj, sim.trajectory, comment);
  auto rep = open_output(fs::path(flags.out) / "report.txt");
  rep << comment << '\n';
  print_report(rep, sim.report, sim.audit);
  print_report(std::cout, sim.report, sim.audit);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& axis_specs,
              const std::string& variants, bool audit, const CommonFlags& flags) {
  const RunConfig c = load_with_flags(config_path, flags);
  std::vector<SweepAxis> axes;
  for (const auto& s : axis_specs) axes.push_back(parse_axis(s));
  SweepOptions opts;
  opts.jobs = flags.jobs;
  opts.energy_audit = audit;
  if (variants == "both") {
    opts.variants = {ModelVariant::Linear, ModelVariant::Nonlinear};
  } else if (variants == "linear") {
    opts.variants = {ModelVariant::Linear};
  } else if (variants == "nonlinear") {
    opts.variants = {ModelVariant::Nonlinear};
  } else if (!variants.empty()) {
    throw Error(ErrorKind::Validation, "--variants must be linear, nonlinear or both");
  }
  const SweepResult r = axes.size() == 1 && axes[0].parameter != SweepParameter::DriveFrequency &&
                                axes[0].parameter != SweepParameter::LoadResistance
                            ? sweep_series(c, axes[0], opts)
                            : sweep_grid(c, axes, opts);
  auto out = open_output(fs::path(flags.out) / "sweep.csv");
  write_sweep_csv(out, r, provenance_comment(c.hash, c.seed));

  std::size_t failed = 0;
  for (const auto& row : r.rows)
    for (const auto& o : row.outcomes) failed += o.report ? 0 : 1;
  for (std::size_t v = 0; v < r.variants.size(); ++v) {
    const auto best = r.argmax(v);
    std::cout << to_string(r.variants[v]) << " argmax:";
    if (!best) {
      std::cout << " none\n";
      continue;
    }
    for (std::size_t k = 0; k < r.axes.size(); ++k)
      std::cout << ' ' << column_name(r.axes[k].parameter) << '='
                << format_double(r.rows[*best].values[k]);
    std::cout << " averagePower_W=" << format_double(r.rows[*best].outcomes[v].report->average_power)
              << '\n';
  }
  if (failed) std::cerr << failed << " sweep point(s) failed; see the error column\n";
  return failed == r.rows.size() * r.variants.size() ? 2 : 0;
}

int cmd_gen_noise(const std::string& config_path, const std::string& output, bool verify,
                  const CommonFlags& flags) {
  const RunConfig c = load_with_flags(config_path, flags);
  if (c.excitation.kind != ExcitationKind::Noise)
    throw Error(ErrorKind::Validation, "gen-noise needs excitation.type = noise");
  NoiseSpec spec = c.excitation.noise;
  spec.seed = c.seed;
  spec.duration = c.duration;
  const SampledSignal sig = noise_generate(spec);
  auto out = open_output(output);
  write_signal_csv(out, sig, AccelUnit::StandardGravity,
                   provenance_comment(c.hash, c.seed) + " generator=" + kNoiseAlgorithm);
  if (verify) {
    const PsdCheck check = psd_verify(sig, spec);
    std::cout << "passbandMeanPsd_g2Hz=" << format_double(check.passband_mean_psd) << '\n'
              << "flatnessDeviation_dB=" << format_double(check.flatness_deviation_db) << '\n'
              << "passed=" << (check.passed ? "true" : "false") << '\n';
    if (!check.passed) return 2;
  }
  return 0;
}

int cmd_linearize(const std::string& config_path, const CommonFlags& flags) {
  const RunConfig c = load_with_flags(config_path, flags, false);
  const auto& mech = c.device.mechanical;
  const LinearModel lin = linearize(c.device);
  const double f0 = std::sqrt(mech.spring_constant / mech.mass) / (2.0 * std::numbers::pi);
  const double f0_loaded = std::sqrt(lin.total_stiffness() / mech.mass) / (2.0 * std::numbers::pi);
  std::cout << "f0_Hz=" << format_double(f0) << '\n'
            << "f0_with_electrostatic_stiffness_Hz=" << format_double(f0_loaded) << '\n'
            << "C0_F=" << format_double(lin.nominal_cap) << '\n'
            << "q0_C=" << format_double(lin.equilibrium_charge) << '\n'
            << "alpha1_Vpm=" << format_double(lin.coupling[0]) << '\n'
            << "alpha2_Vpm=" << format_double(lin.coupling[1]) << '\n'
            << "electrostatic_stiffness_Npm=" << format_double(lin.electrostatic_stiffness) << '\n'
            << "Q=" << format_double(std::sqrt(mech.spring_constant * mech.mass) / mech.damping)
            << '\n'
            << "Cmin_F=" << format_double(c.device.clamp.cap_min) << '\n'
            << "Cmax_F=" << format_double(c.device.clamp.cap_max) << '\n';
  return 0;
}

bool is_config_error(const Error& e) {
  return e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Validation ||
         e.kind() == ErrorKind::InvalidSpec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electret MEMS vibration harvester simulator"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  std::string config_path;
  app.add_option("--seed", flags.seed, "Base noise seed (overrides excitation.seed)");
  app.add_option("--jobs", flags.jobs, "Parallel sweep points (0 = all hardware threads)");
  app.add_option("--out", flags.out, "Output directory")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Run one simulation, write trajectory and report");
  simulate->add_option("config", config_path, "Config file")->required();

  auto* sweep = app.add_subcommand("sweep", "Exhaustive sweep over one or two axes");
  std::vector<std::string> axes;
  std::string variants;
  bool audit = false;
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--axis", axes, "name=lin:a:b:n | name=log:a:b:n | name=v1,v2,...")
      ->required();
  sweep->add_option("--variants", variants, "linear, nonlinear or both (default: config)");
  sweep->add_flag("--audit", audit, "Add the relative energy-balance residual column");

  auto* gen = app.add_subcommand("gen-noise", "Write a band-limited noise excitation file");
  std::string noise_out;
  bool verify = false;
  gen->add_option("config", config_path, "Config file with a noise excitation")->required();
  gen->add_option("-o,--output", noise_out, "Output CSV")->required();
  gen->add_flag("--verify", verify, "Check the generated PSD against the target");

  auto* lin = app.add_subcommand("linearize", "Print the small-signal constants");
  lin->add_option("config", config_path, "Config file")->required();

  // Global flags are accepted after the subcommand as well.
  for (auto* sub : {simulate, sweep, gen, lin}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, flags);
    if (*sweep) return cmd_sweep(config_path, axes, variants, audit, flags);
    if (*gen) return cmd_gen_noise(config_path, noise_out, verify, flags);
    if (*lin) return cmd_linearize(config_path, flags);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return is_config_error(e) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
