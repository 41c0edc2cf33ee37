#pragma once

// Baseband signal synthesis, channel impairments and lane combining.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "spamlab/codegen.hpp"
#include "spamlab/iq.hpp"

namespace spamlab::synth {

inline constexpr double kMuted = -std::numeric_limits<double>::infinity();

/// Parameters of one spread-spectrum lane over a buffer.
///
/// `code_offset_ms` is the code delay in the scenario-time convention: at
/// scenario time t the code chip arriving is (t * chip_rate - delay) mod L.
/// For a buffer starting at t = 0 this is the sample position of chip 0.
struct SignalParams {
  int svid = 1;
  Band band = Band::E1;
  double code_offset_ms = 0.0;
  double doppler_hz = 0.0;
  double carrier_phase_cycles = 0.0;  // at buffer epoch
  bool code_doppler_coupled = true;
  double power_db = 0.0;  // relative to the reference signal; kMuted silences the lane
  int symbol_rate_sps = kSymbolRateSps;
  /// symbols[0] is the symbol in progress at the buffer epoch. Missing
  /// entries are taken as +1.
  std::vector<std::int8_t> symbols;
  /// Whole code periods of symbols[0] already elapsed at the epoch (E5B
  /// carries four code periods per symbol; always 0 for E1).
  int symbol_period_offset = 0;
};

/// Throws DomainError when parameters break the SignalParams invariants.
void validate(const SignalParams& params);

/// Throws DomainError when the rate cannot carry the band.
void check_sample_rate(Band band, double sample_rate_hz);

/// Spread signal for `duration_s` at `sample_rate_hz`, starting at `epoch_s`.
IqBuffer synthesize(const SignalParams& params, const codegen::PrnCode& code, double duration_s,
                    double sample_rate_hz, double epoch_s = 0.0);

/// Adds the lane to `out` in place (out[0] is at `epoch_s`).
void accumulate(const SignalParams& params, const codegen::PrnCode& code, double sample_rate_hz, double epoch_s,
                std::span<Sample> out);

/// Per-sample noise variance for a density given relative to the reference
/// signal power (dB re 1/Hz). Commanded C/N0 of a lane = power_db - density.
double noise_variance(double noise_density_relative_db, double sample_rate_hz);

/// Adds zero-mean circular Gaussian noise. A density of -inf leaves the
/// buffer untouched.
IqBuffer add_noise(IqBuffer buffer, double noise_density_relative_db, std::uint64_t seed);
void add_noise_in_place(IqBuffer& buffer, double noise_density_relative_db, std::uint64_t seed);

/// Rotates every sample by exp(j 2 pi bias t), t in absolute scenario time.
IqBuffer apply_hardware_bias(IqBuffer buffer, double bias_hz);
void apply_hardware_bias_in_place(IqBuffer& buffer, double bias_hz);

/// Element-wise sum. Inputs must share rate, epoch, length and band.
IqBuffer combine(std::span<const IqBuffer> buffers);

/// Chip-level modulation table: BOC(1,1) at half-chip resolution for E1,
/// one entry per chip for BPSK.
struct ModulationTable {
  std::vector<std::int8_t> values;
  int per_chip = 1;
  int code_length = 0;
};
ModulationTable modulation_table(const codegen::PrnCode& code);

/// Same as the PrnCode overload, for callers that cache the table.
void accumulate(const SignalParams& params, const ModulationTable& table, double sample_rate_hz, double epoch_s,
                std::span<Sample> out);

}  // namespace spamlab::synth
