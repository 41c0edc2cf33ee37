#pragma once

// One tracking channel: early/prompt/late code correlation with a
// carrier-aided DLL, a Costas PLL with FLL assist during pull-in, symbol
// assembly, C/N0 estimation and lock detection.

#include <array>
#include <complex>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "spamlab/iq.hpp"
#include "spamlab/rx/cn0.hpp"
#include "spamlab/rx/navdecode.hpp"
#include "spamlab/sigsynth.hpp"

namespace spamlab::rx {

enum class ChannelStatus : std::uint8_t { IDLE, ACQUIRING, TRACKING, LOST };

std::string_view to_string(ChannelStatus s);

struct TrackingConfig {
  double dll_spacing_chips = 0.5;
  double dll_bandwidth_hz = 2.0;
  double dll_pull_in_bandwidth_hz = 10.0;
  double pll_bandwidth_hz = 15.0;
  double pll_damping = 0.707;
  double fll_bandwidth_hz = 10.0;
  double fll_pull_in_s = 0.25;
  double cn0_threshold_dbhz = 28.0;
  double loss_hysteresis_s = 0.05;
  double bit_sync_timeout_s = 0.5;
  Cn0Config cn0;
  NavDecoderConfig nav;
  std::size_t history_limit = 500;  // C/N0 history entries kept per channel
};

/// Loop internals carried between integrations.
struct TrackingLoop {
  long long next_sample = 0;  // absolute sample index where the next integration starts
  double chip_pos = 0.0;      // replica chip position at next_sample, [0, L)
  long long period_count = 0; // local code period counter
  double code_rate_cps = 0.0;
  double carrier_freq_hz = 0.0;
  double freq_integrator_hz = 0.0;
  double carrier_phase_cycles = 0.0;  // replica phase at next_sample, [0, 1)
  double start_time_s = 0.0;
  double below_since_s = std::numeric_limits<double>::quiet_NaN();
  std::complex<double> prev_prompt = 0.0;
  bool have_prev = false;

  int sync_phase = -1;  // block index mod 4 at which symbols start; -1 until bit sync
  std::array<int, 4> transitions{};
  int transition_total = 0;
  std::array<std::complex<double>, 4> symbol_prompts{};
  int symbol_fill = 0;
  long long symbol_start_period = 0;

  Cn0Estimator cn0;
  NavDecoder nav;
};

struct ChannelState {
  int svid = 0;
  Band band = Band::E1;
  ChannelStatus state = ChannelStatus::IDLE;
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;  // scenario-time delay convention
  double carrier_phase_cycles = 0.0;
  double cn0_dbhz = std::numeric_limits<double>::quiet_NaN();  // NaN while unavailable
  std::deque<std::pair<double, double>> cn0_history;           // (t_s, fast C/N0)
  std::optional<double> doppler_cache;
  double lock_age_s = 0.0;
  TrackingLoop loop;
};

/// Puts a channel into TRACKING from an acquisition estimate. `start_sample`
/// is the absolute sample index (scenario time * fs) where tracking begins.
void start_tracking(ChannelState& ch, double doppler_hz, double delay_chips, long long start_sample, double fs,
                    const TrackingConfig& config, std::uint64_t nav_seed);

/// Samples the next integration needs (it starts at loop.next_sample).
std::size_t samples_needed(const ChannelState& ch, double fs);

/// One integration (a code quarter for E1, a code period for E5B, both
/// ~1 ms). `samples` must start at ch.loop.next_sample. Returns the number of
/// samples consumed, 0 if `samples` is too short. No-op unless TRACKING.
std::size_t track_step(ChannelState& ch, std::span<const Sample> samples, const synth::ModulationTable& table,
                       const TrackingConfig& config, double fs);

/// Buffer form: `block` must contain ch.loop.next_sample.
ChannelState track_step(ChannelState ch, const IqBuffer& block, const synth::ModulationTable& table,
                        const TrackingConfig& config);

/// Smoothed C/N0; empty until enough epochs were integrated.
std::optional<double> estimate_cn0(const ChannelState& ch);

/// Replica code chip position (absolute, may be negative or beyond L) at
/// scenario time t relative to the position at loop.next_sample.
double chip_position_at(const ChannelState& ch, double t, double fs);

}  // namespace spamlab::rx
