#include "harvester/sweep.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include "harvester/error.hpp"

namespace harvester {

const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::DriveFrequency: return "driveFrequency";
    case SweepParameter::LoadResistance: return "loadResistance";
    case SweepParameter::SineAmplitude: return "sineAmplitude";
    case SweepParameter::NoisePsdLevel: return "noisePsdLevel";
  }
  return "?";
}

const char* column_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::DriveFrequency: return "driveFrequency_Hz";
    case SweepParameter::LoadResistance: return "loadResistance_Ohm";
    case SweepParameter::SineAmplitude: return "sineAmplitude_g";
    case SweepParameter::NoisePsdLevel: return "noisePsdLevel_g2Hz";
  }
  return "?";
}

bool changes_excitation(SweepParameter p) { return p != SweepParameter::LoadResistance; }

namespace {

double to_number(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError("invalid axis value '" + std::string(text) + "'", 0);
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

SweepAxis parse_axis(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw ParseError("axis must look like name=values", 0);
  const std::string_view name = spec.substr(0, eq);
  const std::string_view body = spec.substr(eq + 1);

  SweepAxis axis;
  bool known = false;
  for (auto p : {SweepParameter::DriveFrequency, SweepParameter::LoadResistance,
                 SweepParameter::SineAmplitude, SweepParameter::NoisePsdLevel}) {
    if (name == to_string(p)) {
      axis.parameter = p;
      known = true;
    }
  }
  if (!known) throw ParseError("unknown sweep parameter '" + std::string(name) + "'", 0);

  if (body.starts_with("lin:") || body.starts_with("log:")) {
    const auto parts = split(body.substr(4), ':');
    if (parts.size() != 3) throw ParseError("range must be lin:a:b:n or log:a:b:n", 0);
    const double a = to_number(parts[0]);
    const double b = to_number(parts[1]);
    const double nd = to_number(parts[2]);
    if (!(nd >= 1) || nd != std::floor(nd)) throw ParseError("range point count must be >= 1", 0);
    const auto n = static_cast<std::size_t>(nd);
    const bool log = body.starts_with("log:");
    if (log && !(a > 0 && b > 0)) throw ParseError("log range needs positive end points", 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      axis.values.push_back(log ? a * std::pow(b / a, f) : a + (b - a) * f);
    }
    if (n > 1) axis.values.back() = b;
  } else {
    for (auto part : split(body, ',')) axis.values.push_back(to_number(part));
  }
  validate(axis);
  return axis;
}

void validate(const SweepAxis& axis) {
  using detail::require;
  require(!axis.values.empty(), "sweep axis has no values");
  for (double v : axis.values) {
    require(std::isfinite(v), "sweep values must be finite");
    switch (axis.parameter) {
      case SweepParameter::DriveFrequency: require(v > 0, "drive frequency must be > 0"); break;
      case SweepParameter::LoadResistance: require(v > 0, "load resistance must be > 0"); break;
      case SweepParameter::SineAmplitude: require(v >= 0, "sine amplitude must be >= 0"); break;
      case SweepParameter::NoisePsdLevel: require(v >= 0, "noise PSD must be >= 0"); break;
    }
  }
}

void apply(RunConfig& config, SweepParameter p, double value) {
  using detail::require;
  auto& ex = config.excitation;
  switch (p) {
    case SweepParameter::DriveFrequency:
      require(ex.kind == ExcitationKind::Sine, "driveFrequency axis needs a sine excitation");
      ex.sine.frequency = value;
      break;
    case SweepParameter::LoadResistance:
      config.loads.resistance1 = config.loads.resistance2 = value;
      break;
    case SweepParameter::SineAmplitude:
      require(ex.kind == ExcitationKind::Sine, "sineAmplitude axis needs a sine excitation");
      ex.sine.amplitude = value * kStandardGravity;
      break;
    case SweepParameter::NoisePsdLevel:
      require(ex.kind == ExcitationKind::Noise, "noisePsdLevel axis needs a noise excitation");
      ex.noise.psd_level = value;
      break;
  }
}

SimulationResult run_single(const RunConfig& config, std::uint64_t seed, const RunOptions& options) {
  validate(config);
  const Excitation excitation = build_excitation(config, seed);
  const SimState initial = default_initial(config.device, config.variant);

  SimulationResult result;
  result.seed = seed;
  result.trajectory.variant = config.variant;
  PowerAccumulator power(config.loads, config.settle_discard,
                         config.device.stoppers.engage_displacement);
  std::optional<EnergyAuditAccumulator> audit;
  if (options.energy_audit) audit.emplace(config.variant, config.device, config.loads);
  const double keep_from = config.export_window > 0 ? config.duration - config.export_window
                                                    : -std::numeric_limits<double>::infinity();

  result.stats = integrate(config.variant, config.device, config.loads, excitation, initial,
                           config.duration, config.integrator, [&](const TrajectorySample& s) {
                             power.add(s);
                             if (audit) audit->add(s);
                             if (options.keep_trajectory && s.t >= keep_from)
                               result.trajectory.samples.push_back(s);
                           });
  result.report = power.report();
  if (audit) result.audit = audit->report();
  return result;
}

std::uint64_t point_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<std::size_t> SweepResult::argmax(std::size_t v) const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].outcomes.at(v).report;
    if (!r) continue;
    if (!best || r->average_power > rows[*best].outcomes[v].report->average_power) best = i;
  }
  return best;
}

SweepResult sweep_grid(const RunConfig& config, const std::vector<SweepAxis>& axes,
                       const SweepOptions& options) {
  detail::require(axes.size() == 1 || axes.size() == 2, "a sweep takes one or two axes");
  for (const auto& a : axes) validate(a);
  if (axes.size() == 2)
    detail::require(axes[0].parameter != axes[1].parameter, "sweep axes must differ");

  SweepResult result;
  result.axes = axes;
  result.variants = options.variants.empty() ? std::vector{config.variant} : options.variants;
  result.energy_audit = options.energy_audit;

  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  result.rows.resize(total);

  // Grid order is row-major; the excitation index only counts excitation axes
  // so that load-only changes see the same noise realization.
  for (std::size_t i = 0; i < total; ++i) {
    SweepRow& row = result.rows[i];
    std::size_t rest = i;
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      idx[k] = rest % axes[k].values.size();
      rest /= axes[k].values.size();
    }
    std::uint64_t excitation_index = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      row.values.push_back(axes[k].values[idx[k]]);
      if (changes_excitation(axes[k].parameter))
        excitation_index = excitation_index * axes[k].values.size() + idx[k];
    }
    row.seed = point_seed(config.seed, excitation_index);
    row.outcomes.resize(result.variants.size());
  }

  const std::size_t tasks = total * result.variants.size();
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t task = next++; task < tasks; task = next++) {
      SweepRow& row = result.rows[task / result.variants.size()];
      const std::size_t v = task % result.variants.size();
      SweepOutcome& out = row.outcomes[v];
      try {
        RunConfig point = config;
        point.variant = result.variants[v];
        for (std::size_t k = 0; k < axes.size(); ++k) apply(point, axes[k].parameter, row.values[k]);
        RunOptions ro;
        ro.keep_trajectory = false;
        ro.energy_audit = options.energy_audit;
        SimulationResult sim = run_single(point, row.seed, ro);
        out.report = sim.report;
        out.audit = sim.audit;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };

  unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, tasks));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return result;
}

SweepResult sweep_series(const RunConfig& config, const SweepAxis& axis,
                         const SweepOptions& options) {
  detail::require(axis.parameter == SweepParameter::SineAmplitude ||
                      axis.parameter == SweepParameter::NoisePsdLevel,
                  "a series sweeps sineAmplitude or noisePsdLevel");
  return sweep_grid(config, {axis}, options);
}

namespace {

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result, const std::string& comment) {
  if (!comment.empty()) out << comment << '\n';
  const bool paired = result.variants.size() > 1;
  for (const auto& a : result.axes) out << column_name(a.parameter) << ',';
  for (ModelVariant v : result.variants) {
    const std::string pre = paired ? std::string(to_string(v)) + "_" : std::string();
    out << pre << "averagePower_W," << pre << "meanSquareDisplacement_m2," << pre
        << "peakDisplacement_m," << pre << "stopperContactFraction,";
    if (result.energy_audit) out << pre << "energyResidual,";
    out << pre << "error,";
  }
  out << "seed\n";

  for (const auto& row : result.rows) {
    for (double v : row.values) out << format_double(v) << ',';
    for (const auto& o : row.outcomes) {
      if (o.report) {
        out << format_double(o.report->average_power) << ','
            << format_double(o.report->mean_square_displacement) << ','
            << format_double(o.report->peak_displacement) << ','
            << format_double(o.report->contact_fraction) << ',';
      } else {
        out << ",,,,";
      }
      if (result.energy_audit) out << (o.audit ? format_double(o.audit->relative_residual) : "") << ',';
      out << csv_text(o.error) << ',';
    }
    out << row.seed << '\n';
  }
}

}  // namespace harvester
