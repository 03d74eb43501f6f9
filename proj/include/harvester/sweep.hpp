#pragma once

// Single runs and exhaustive parameter sweeps.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "harvester/analysis.hpp"
#include "harvester/config.hpp"

namespace harvester {

enum class SweepParameter {
  DriveFrequency,  // Hz
  LoadResistance,  // Ohm, applied to both ports
  SineAmplitude,   // g
  NoisePsdLevel,   // g^2/Hz
};

const char* to_string(SweepParameter p);
/// CSV column heading with unit, e.g. `loadResistance_Ohm`.
const char* column_name(SweepParameter p);
/// True for axes that change the excitation (and therefore the noise realization).
bool changes_excitation(SweepParameter p);

struct SweepAxis {
  SweepParameter parameter = SweepParameter::DriveFrequency;
  std::vector<double> values;
};

/// `name=lin:a:b:n`, `name=log:a:b:n` or `name=v1,v2,...`; values in the
/// parameter's unit listed above.
SweepAxis parse_axis(std::string_view spec);

void validate(const SweepAxis& axis);

/// Writes one axis value into a copy of the run configuration.
void apply(RunConfig& config, SweepParameter p, double value);

struct RunOptions {
  bool keep_trajectory = true;  // the trailing export window
  bool energy_audit = false;
};

struct SimulationResult {
  Trajectory trajectory;
  PowerReport report;
  std::optional<EnergyAudit> audit;
  IntegrationStats stats;
  std::uint64_t seed = 0;
};

/// Integrates `config` (noise drawn with `seed`) and analyses everything after
/// the settle discard. Contact is counted beyond the stopper engage distance.
SimulationResult run_single(const RunConfig& config, std::uint64_t seed,
                            const RunOptions& options = {});
inline SimulationResult run_single(const RunConfig& config, const RunOptions& options = {}) {
  return run_single(config, config.seed, options);
}

/// splitmix64 finalizer over (base seed, index).
std::uint64_t point_seed(std::uint64_t base, std::uint64_t index);

struct SweepOutcome {
  std::optional<PowerReport> report;
  std::optional<EnergyAudit> audit;
  std::string error;
};

struct SweepRow {
  std::vector<double> values;          // one per axis
  std::uint64_t seed = 0;
  std::vector<SweepOutcome> outcomes;  // one per variant
};

struct SweepOptions {
  std::vector<ModelVariant> variants;  // empty = the config's variant
  unsigned jobs = 0;                   // 0 = hardware concurrency
  bool energy_audit = false;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<ModelVariant> variants;
  bool energy_audit = false;
  std::vector<SweepRow> rows;  // grid order, last axis fastest

  /// Row with the largest average power for variant `v`; empty when every point failed.
  std::optional<std::size_t> argmax(std::size_t v = 0) const;
};

/// Every point of the 1- or 2-axis grid. Noise seeds are derived from the
/// config seed and the index of the point's excitation (load and other
/// non-excitation axes reuse the same realization). Per-point failures are
/// recorded in the row and the sweep continues.
SweepResult sweep_grid(const RunConfig& config, const std::vector<SweepAxis>& axes,
                       const SweepOptions& options = {});

/// One-dimensional amplitude or PSD series, optionally for both variants.
SweepResult sweep_series(const RunConfig& config, const SweepAxis& axis,
                         const SweepOptions& options = {});

void write_sweep_csv(std::ostream& out, const SweepResult& result, const std::string& comment);

}  // namespace harvester
