#pragma once

// Run configuration and its flat text format.
//
// One `section.key_unit = value` assignment per line; '#' starts a comment.
// The unit suffix selects the scale (x_s_um = 14 and x_s_m = 14e-6 are the
// same setting). Keys that are not given keep the reference-device defaults.
//
//   section      keys (accepted unit suffixes)
//   device       l_f w_f t_f g0 x0 (_m _mm _um), N_g, eps (_Fpm)
//   mechanical   m (_kg _mg), k (_Npm), b (_Nspm)
//   electret     V_e (_V), C_e (_F _pF)
//   stopper      x_s (_m _mm _um), k_s (_Npm)
//   clamp        x_c (_m _mm _um)
//   load         R R1 R2 (_Ohm _kOhm _MOhm), C_p (_F _pF)
//   excitation   type (sine|noise|file|none), amplitude (_mps2 _g),
//                frequency f_max f_s (_Hz _kHz), phase (_rad), psd (_g2Hz),
//                seed, file
//   integrator   rtol, atol_x (_m _um), atol_v (_mps), atol_q (_C),
//                max_step sample_interval (_s _ms _us), event_tol (_m _um)
//   analysis     variant (linear|nonlinear), settle duration export (_s _ms)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "harvester/dynamics.hpp"
#include "harvester/excitation.hpp"
#include "harvester/params.hpp"

namespace harvester {

enum class ExcitationKind { None, Sine, Noise, File };

struct ExcitationConfig {
  ExcitationKind kind = ExcitationKind::None;
  SineSpec sine;
  NoiseSpec noise;
  std::string file;
};

struct RunConfig {
  DeviceParams device = default_device();
  LoadNetwork loads;
  ModelVariant variant = ModelVariant::Nonlinear;
  ExcitationConfig excitation;
  IntegratorConfig integrator;
  double settle_discard = 0.0;  // s
  double duration = 0.0;        // s, total simulated time
  double export_window = 0.1;   // s of trailing trajectory written by `simulate`; 0 = all
  std::uint64_t seed = 0;
  std::string hash;             // FNV-1a of the canonical key/value listing
};

/// Ring-down based discard, 10 * 2m/b.
double default_settle_discard(const MechanicalParams& m);

/// Observation time appended to the discard when `analysis.duration` is absent.
double default_observation(ExcitationKind kind);

RunConfig parse_config(std::string_view text, bool require_excitation = true);
RunConfig load_config(const std::filesystem::path& path, bool require_excitation = true);

/// Re-validates every invariant (after programmatic edits such as sweeps).
void validate(const RunConfig& config, bool require_excitation = true);

/// Excitation over [0, config.duration]; noise is generated with `seed`.
Excitation build_excitation(const RunConfig& config, std::uint64_t seed);

std::string fnv1a_hex(std::string_view text);

}  // namespace harvester
