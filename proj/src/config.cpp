#include "harvester/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "harvester/error.hpp"

namespace harvester {

double default_settle_discard(const MechanicalParams& m) {
  return 10.0 * 2.0 * m.mass / m.damping;
}

double default_observation(ExcitationKind kind) {
  return kind == ExcitationKind::Noise ? 60.0 : 0.1;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

enum class Dim {
  Length, Capacitance, Resistance, Frequency, Accel, Psd, Time, Voltage, Mass, Stiffness,
  Damping, Permittivity, Angle, Charge, Velocity, Count, Text,
};

struct Unit {
  std::string_view suffix;
  Dim dim;
  double scale;
};

constexpr std::array kUnits{
    Unit{"m", Dim::Length, 1.0},         Unit{"mm", Dim::Length, 1e-3},
    Unit{"um", Dim::Length, 1e-6},       Unit{"F", Dim::Capacitance, 1.0},
    Unit{"pF", Dim::Capacitance, 1e-12}, Unit{"Ohm", Dim::Resistance, 1.0},
    Unit{"kOhm", Dim::Resistance, 1e3},  Unit{"MOhm", Dim::Resistance, 1e6},
    Unit{"Hz", Dim::Frequency, 1.0},     Unit{"kHz", Dim::Frequency, 1e3},
    Unit{"mps2", Dim::Accel, 1.0},       Unit{"g", Dim::Accel, kStandardGravity},
    Unit{"g2Hz", Dim::Psd, 1.0},         Unit{"s", Dim::Time, 1.0},
    Unit{"ms", Dim::Time, 1e-3},         Unit{"us", Dim::Time, 1e-6},
    Unit{"V", Dim::Voltage, 1.0},        Unit{"kg", Dim::Mass, 1.0},
    Unit{"mg", Dim::Mass, 1e-6},         Unit{"Npm", Dim::Stiffness, 1.0},
    Unit{"Nspm", Dim::Damping, 1.0},     Unit{"Fpm", Dim::Permittivity, 1.0},
    Unit{"rad", Dim::Angle, 1.0},        Unit{"C", Dim::Charge, 1.0},
    Unit{"mps", Dim::Velocity, 1.0},
};

struct KeySpec {
  std::string_view section;
  std::string_view name;
  Dim dim;
};

constexpr std::array kKeys{
    KeySpec{"device", "l_f", Dim::Length},        KeySpec{"device", "w_f", Dim::Length},
    KeySpec{"device", "t_f", Dim::Length},        KeySpec{"device", "g0", Dim::Length},
    KeySpec{"device", "x0", Dim::Length},         KeySpec{"device", "N_g", Dim::Count},
    KeySpec{"device", "eps", Dim::Permittivity},  KeySpec{"mechanical", "m", Dim::Mass},
    KeySpec{"mechanical", "k", Dim::Stiffness},   KeySpec{"mechanical", "b", Dim::Damping},
    KeySpec{"electret", "V_e", Dim::Voltage},     KeySpec{"electret", "C_e", Dim::Capacitance},
    KeySpec{"stopper", "x_s", Dim::Length},       KeySpec{"stopper", "k_s", Dim::Stiffness},
    KeySpec{"clamp", "x_c", Dim::Length},         KeySpec{"load", "R", Dim::Resistance},
    KeySpec{"load", "R1", Dim::Resistance},       KeySpec{"load", "R2", Dim::Resistance},
    KeySpec{"load", "C_p", Dim::Capacitance},     KeySpec{"excitation", "type", Dim::Text},
    KeySpec{"excitation", "amplitude", Dim::Accel},
    KeySpec{"excitation", "frequency", Dim::Frequency},
    KeySpec{"excitation", "phase", Dim::Angle},   KeySpec{"excitation", "psd", Dim::Psd},
    KeySpec{"excitation", "f_max", Dim::Frequency},
    KeySpec{"excitation", "f_s", Dim::Frequency}, KeySpec{"excitation", "seed", Dim::Count},
    KeySpec{"excitation", "file", Dim::Text},     KeySpec{"integrator", "rtol", Dim::Count},
    KeySpec{"integrator", "atol_x", Dim::Length}, KeySpec{"integrator", "atol_v", Dim::Velocity},
    KeySpec{"integrator", "atol_q", Dim::Charge}, KeySpec{"integrator", "max_step", Dim::Time},
    KeySpec{"integrator", "event_tol", Dim::Length},
    KeySpec{"integrator", "sample_interval", Dim::Time},
    KeySpec{"analysis", "variant", Dim::Text},    KeySpec{"analysis", "settle", Dim::Time},
    KeySpec{"analysis", "duration", Dim::Time},   KeySpec{"analysis", "export", Dim::Time},
};

struct Entry {
  std::string id;  // section.name, unit stripped
  Dim dim;
  double value = 0.0;  // SI, for numeric keys
  std::string text;    // raw value
  int line = 0;
};

std::string trim(std::string_view s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = std::find_if_not(s.begin(), s.end(), ws);
  auto e = std::find_if_not(s.rbegin(), s.rend(), ws).base();
  return b < e ? std::string(b, e) : std::string();
}

/// Resolves `section.name_unit` (or `section.name` for unitless keys).
std::pair<const KeySpec*, double> resolve_key(const std::string& key, int line) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ParseError("key '" + key + "' has no section", line);
  const std::string_view section(key.data(), dot);
  const std::string_view rest(key.data() + dot + 1, key.size() - dot - 1);
  bool section_known = false;
  for (const KeySpec& spec : kKeys) {
    if (spec.section != section) continue;
    section_known = true;
    if (spec.dim == Dim::Count || spec.dim == Dim::Text) {
      if (rest == spec.name) return {&spec, 1.0};
      continue;
    }
    if (rest.size() <= spec.name.size() + 1 || rest.substr(0, spec.name.size()) != spec.name ||
        rest[spec.name.size()] != '_')
      continue;
    const std::string_view suffix = rest.substr(spec.name.size() + 1);
    for (const Unit& u : kUnits)
      if (u.suffix == suffix && u.dim == spec.dim) return {&spec, u.scale};
    throw ParseError("unit '" + std::string(suffix) + "' not valid for " + std::string(section) +
                         "." + std::string(spec.name),
                     line);
  }
  if (!section_known) throw ParseError("unknown section '" + std::string(section) + "'", line);
  throw ParseError("unknown key '" + key + "'", line);
}

double parse_double(const std::string& text, int line) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + text + "'", line);
  return v;
}

std::uint64_t parse_u64(const std::string& text, int line) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError("invalid unsigned integer '" + text + "'", line);
  return v;
}

std::map<std::string, Entry> read_entries(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError("expected 'key = value'", line);

    const auto [spec, scale] = resolve_key(key, line);
    Entry e;
    e.id = std::string(spec->section) + "." + std::string(spec->name);
    e.dim = spec->dim;
    e.text = value;
    e.line = line;
    if (spec->dim == Dim::Count && spec->name != "seed") e.value = parse_double(value, line);
    if (spec->dim != Dim::Count && spec->dim != Dim::Text) e.value = parse_double(value, line) * scale;
    if (spec->name == "seed") parse_u64(value, line);
    if (entries.contains(e.id)) throw ParseError("duplicate setting '" + e.id + "'", line);
    entries.emplace(e.id, std::move(e));
  }
  return entries;
}

}  // namespace

void validate(const RunConfig& c, bool require_excitation) {
  using detail::require;
  validate(c.device);
  validate(c.loads);
  validate(c.integrator);
  const auto& ex = c.excitation;
  if (require_excitation) require(ex.kind != ExcitationKind::None, "missing excitation block (excitation.type)");
  if (ex.kind == ExcitationKind::Sine) require(ex.sine.frequency > 0, "sine frequency must be > 0");
  if (ex.kind == ExcitationKind::Noise) {
    require(ex.noise.sample_rate >= 2.0 * ex.noise.bandwidth, "noise f_s must be >= 2 f_max");
    require(ex.noise.psd_level >= 0, "noise PSD must be >= 0");
    require(ex.noise.bandwidth > 0, "noise f_max must be > 0");
  }
  if (ex.kind == ExcitationKind::File) require(!ex.file.empty(), "excitation.file is required");
  require(c.settle_discard >= 0, "settle discard must be >= 0");
  require(c.duration > c.settle_discard, "duration must exceed the settle discard");
  require(c.export_window >= 0, "export window must be >= 0");
}

RunConfig parse_config(std::string_view text, bool require_excitation) {
  const auto entries = read_entries(text);
  RunConfig c;
  const auto num = [&](const char* id, double& target) {
    if (auto it = entries.find(id); it != entries.end()) target = it->second.value;
  };

  DeviceParams& d = c.device;
  num("device.l_f", d.geometry.finger_length);
  num("device.w_f", d.geometry.finger_width);
  num("device.t_f", d.geometry.finger_thickness);
  num("device.g0", d.geometry.gap);
  num("device.x0", d.geometry.nominal_overlap);
  num("device.eps", d.geometry.permittivity);
  if (auto it = entries.find("device.N_g"); it != entries.end()) {
    const double n = it->second.value;
    if (n != std::floor(n)) throw ParseError("device.N_g must be an integer", it->second.line);
    d.geometry.finger_pairs = static_cast<int>(n);
  }
  num("mechanical.m", d.mechanical.mass);
  num("mechanical.k", d.mechanical.spring_constant);
  num("mechanical.b", d.mechanical.damping);
  num("electret.V_e", d.electret.voltage);
  num("electret.C_e", d.electret.capacitance);
  num("stopper.x_s", d.stoppers.engage_displacement);
  num("stopper.k_s", d.stoppers.stiffness);
  double xc = d.clamp.clamp_displacement;
  num("clamp.x_c", xc);
  d.clamp = make_clamp(d.geometry, xc);

  if (auto it = entries.find("load.R"); it != entries.end()) {
    int line = 0;
    for (const char* port : {"load.R1", "load.R2"})
      if (auto other = entries.find(port); other != entries.end())
        line = std::max({line, it->second.line, other->second.line});
    if (line > 0) throw ParseError("load.R conflicts with load.R1/load.R2", line);
    c.loads.resistance1 = c.loads.resistance2 = it->second.value;
  }
  num("load.R1", c.loads.resistance1);
  num("load.R2", c.loads.resistance2);
  num("load.C_p", c.loads.parasitic_cap);

  ExcitationConfig& ex = c.excitation;
  if (auto it = entries.find("excitation.type"); it != entries.end()) {
    const std::string& t = it->second.text;
    if (t == "sine") ex.kind = ExcitationKind::Sine;
    else if (t == "noise") ex.kind = ExcitationKind::Noise;
    else if (t == "file") ex.kind = ExcitationKind::File;
    else if (t == "none") ex.kind = ExcitationKind::None;
    else throw ParseError("excitation.type must be sine, noise, file or none", it->second.line);
  }
  num("excitation.amplitude", ex.sine.amplitude);
  num("excitation.frequency", ex.sine.frequency);
  num("excitation.phase", ex.sine.phase);
  num("excitation.psd", ex.noise.psd_level);
  num("excitation.f_max", ex.noise.bandwidth);
  num("excitation.f_s", ex.noise.sample_rate);
  if (auto it = entries.find("excitation.seed"); it != entries.end())
    c.seed = parse_u64(it->second.text, it->second.line);
  if (auto it = entries.find("excitation.file"); it != entries.end()) ex.file = it->second.text;

  num("integrator.rtol", c.integrator.rel_tol);
  num("integrator.atol_x", c.integrator.abs_tol[0]);
  num("integrator.atol_v", c.integrator.abs_tol[1]);
  if (auto it = entries.find("integrator.atol_q"); it != entries.end())
    c.integrator.abs_tol.tail<2>().setConstant(it->second.value);
  num("integrator.max_step", c.integrator.max_step);
  num("integrator.event_tol", c.integrator.event_tol);
  num("integrator.sample_interval", c.integrator.sample_interval);

  if (auto it = entries.find("analysis.variant"); it != entries.end()) {
    const std::string& v = it->second.text;
    if (v == "linear") c.variant = ModelVariant::Linear;
    else if (v == "nonlinear") c.variant = ModelVariant::Nonlinear;
    else throw ParseError("analysis.variant must be linear or nonlinear", it->second.line);
  }
  c.settle_discard = default_settle_discard(d.mechanical);
  num("analysis.settle", c.settle_discard);
  c.duration = c.settle_discard + default_observation(ex.kind);
  num("analysis.duration", c.duration);
  num("analysis.export", c.export_window);

  std::string canonical;
  for (const auto& [id, e] : entries) canonical += id + "=" + e.text + "\n";
  c.hash = fnv1a_hex(canonical);

  validate(c, require_excitation);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, bool require_excitation) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path.string() + "'", 0);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c = parse_config(buf.str(), require_excitation);
  if (c.excitation.kind == ExcitationKind::File) {
    std::filesystem::path file(c.excitation.file);
    if (file.is_relative()) file = path.parent_path() / file;
    c.excitation.file = file.string();
    if (buf.str().find("analysis.duration") == std::string::npos) {
      c.duration = signal_from_file(file).end_time();
      validate(c, require_excitation);
    }
  }
  return c;
}

Excitation build_excitation(const RunConfig& config, std::uint64_t seed) {
  switch (config.excitation.kind) {
    case ExcitationKind::Sine: return Excitation(config.excitation.sine);
    case ExcitationKind::Noise: {
      NoiseSpec spec = config.excitation.noise;
      spec.seed = seed;
      spec.duration = config.duration;
      return Excitation(noise_generate(spec));
    }
    case ExcitationKind::File: return Excitation(signal_from_file(config.excitation.file));
    case ExcitationKind::None: break;
  }
  return Excitation();
}

}  // namespace harvester
