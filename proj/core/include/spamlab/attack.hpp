#pragma once

// Attacker lanes: the SpAmming signal (same PRN as the target, chosen
// Doppler and code offset, power advantage, random symbols), wideband
// jamming, and meaconing (delayed replay), with timing gates, linear ramps
// and live patches.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spamlab/constellation.hpp"
#include "spamlab/iq.hpp"
#include "spamlab/sigsynth.hpp"

namespace spamlab::attack {

enum class DopplerMode : std::uint8_t { FALSE_FIXED, MATCHED, MATCHED_PLUS_BIAS };
enum class CodeOffsetMode : std::uint8_t { ARBITRARY, MATCHED, MATCHED_PLUS_ERROR };
enum class Style : std::uint8_t { STATIC, DYNAMIC };

std::string_view to_string(DopplerMode m);
std::string_view to_string(CodeOffsetMode m);
std::string_view to_string(Style s);
std::optional<DopplerMode> parse_doppler_mode(std::string_view s);
std::optional<CodeOffsetMode> parse_code_offset_mode(std::string_view s);
std::optional<Style> parse_style(std::string_view s);

inline constexpr double kForever = std::numeric_limits<double>::infinity();

/// CONTINUOUS, or INTERMITTENT: on during [k*period, k*period + duty*period).
struct Timing {
  bool intermittent = false;
  double period_s = 1.0;
  double duty = 0.5;
};

bool gate(const Timing& timing, double t_s);

/// A field moving linearly from `from` to `to` over [t0, t1).
struct Ramp {
  std::string field;
  double from = 0.0;
  double to = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;
  double value_at(double t) const;
};

struct AttackProfile {
  int target_svid = 13;
  Band band = Band::E1;
  DopplerMode doppler_mode = DopplerMode::FALSE_FIXED;
  double doppler_hz = 0.0;  // FALSE_FIXED value or MATCHED_PLUS_BIAS bias
  CodeOffsetMode code_offset_mode = CodeOffsetMode::ARBITRARY;
  double code_offset_ms = 0.0;     // ARBITRARY
  double code_error_chips = 0.0;   // MATCHED_PLUS_ERROR
  double power_advantage_db = 6.0;
  Timing timing;
  Style style = Style::STATIC;
  double ramp_s = 10.0;              // DYNAMIC: duration of every change
  double ramp_start_advantage_db = -20.0;  // DYNAMIC: advantage when the window opens
  bool active = true;
  bool code_doppler_coupled = true;
  double hardware_bias_hz = 0.0;     // attacker front-end frequency offset
  bool multitransmitter = false;     // rejected by validate()
  double window_start_s = 0.0;
  double window_end_s = kForever;
  std::uint64_t symbol_seed = 0;
  std::vector<Ramp> ramps;
};

/// Throws ConfigError naming the first broken invariant.
void validate(const AttackProfile& p);

bool requires_truth(const AttackProfile& p);

/// True when the lane emits at t (window, active flag and timing gate).
bool emitting(const AttackProfile& p, double t_s);

/// Value of a numeric field at t, ramps applied.
double field_at(const AttackProfile& p, std::string_view field, double t_s);

/// Geometry the synchronous attacker reads (monitor receiver stand-in).
struct TruthAccess {
  const pvt::SatelliteTruth* satellite = nullptr;
  const ReceiverTruth* receiver = nullptr;
  double time_base_s = 0.0;
};

/// Free-running emitter state for asynchronous parts of the lane.
struct SpammerState {
  bool started = false;
  double delay_chips = 0.0;
  double carrier_phase_cycles = 0.0;
  double last_t = 0.0;
};

/// Lane parameters for the block starting at t (duration block_s). The
/// state is advanced to t + block_s. Throws ConfigError when a MATCHED mode
/// is used without truth access.
synth::SignalParams spamming_lane(const AttackProfile& p, SpammerState& state, const TruthAccess* truth, double t_s,
                                  double block_s, double legit_power_db);

/// Stateless form for a single epoch.
synth::SignalParams spamming_lane(const AttackProfile& p, const TruthAccess* truth, double t_s,
                                  double legit_power_db);

struct JammingProfile {
  Band band = Band::E1;
  double power_db = 15.0;  // noise density above the thermal floor
  Timing timing;
  double window_start_s = 0.0;
  double window_end_s = kForever;
  bool active = true;
};

void validate(const JammingProfile& p);

/// Noise lane descriptor at t: density relative to the reference signal,
/// or nullopt when silent.
struct NoiseLane {
  bool active = false;
  double density_db = synth::kMuted;
};
NoiseLane jamming_lane(const JammingProfile& p, double t_s, double thermal_density_db);

/// Adds the gated jamming noise to `buffer` (gate evaluated per sample).
void add_jamming(IqBuffer& buffer, const JammingProfile& p, double thermal_density_db, std::uint64_t seed);

struct MeaconProfile {
  double delay_s = 2.0;
  double power_advantage_db = 6.0;
  double recording_start_s = 0.0;
  double window_start_s = 0.0;
  double window_end_s = kForever;
  std::vector<Band> bands{Band::E1};
  bool active = true;
};

void validate(const MeaconProfile& p);

/// Re-emits `recording` shifted by delay_s at boosted power over the same
/// span. Samples whose source precedes the recording are silent. Throws
/// DomainError when rates differ; `warning` is set when nothing is emitted.
IqBuffer meacon_lane(const IqBuffer& recording, double delay_s, double power_advantage_db,
                     double scenario_rate_hz, std::string* warning = nullptr);

/// One applied change, for the patch log.
struct PatchRecord {
  double t_s = 0.0;
  std::string field;
  std::string old_value;
  std::string new_value;
};

using Patch = std::map<std::string, std::string>;

/// Applies a patch effective at t. Throws ConfigError (profile untouched)
/// when a field is unknown or a value breaks an invariant. In DYNAMIC style
/// numeric changes become ramps.
AttackProfile update_profile(const AttackProfile& p, const Patch& patch, double t_s,
                             std::vector<PatchRecord>* log = nullptr);

JammingProfile update_jamming(const JammingProfile& p, const Patch& patch, double t_s,
                              std::vector<PatchRecord>* log = nullptr);

/// Current value of a profile field rendered as patch text.
std::string field_text(const AttackProfile& p, std::string_view field);

}  // namespace spamlab::attack
