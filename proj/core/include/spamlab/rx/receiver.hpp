#pragma once

// Receiver manager: allocates one channel per configured (svid, band),
// drives acquisition according to the start mode and the reacquisition
// policy, feeds tracking, and produces snapshots and observables.

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "spamlab/codegen.hpp"
#include "spamlab/observables.hpp"
#include "spamlab/rx/acquisition.hpp"
#include "spamlab/rx/channel.hpp"

namespace spamlab::rx {

enum class StartMode : std::uint8_t { COLD, WARM, HOT };
std::string_view to_string(StartMode m);
std::optional<StartMode> parse_start_mode(std::string_view s);

using ChannelKey = std::pair<int, Band>;

struct StartAiding {
  StartMode mode = StartMode::COLD;
  double time_error_s = 0.0;
  bool almanac_available = false;
  bool ephemeris_available = false;
  std::map<ChannelKey, double> predicted_doppler_hz;
  std::map<ChannelKey, double> predicted_code_phase_chips;  // at scenario time 0
};

/// Throws ConfigError when the aiding breaks the start-mode invariants.
void validate(const StartAiding& aiding);

struct ReacquisitionPolicy {
  double narrow_halfwidth_hz = 300.0;
  bool widen_enabled = false;
  double widen_timeout_s = 30.0;
};

struct ReceiverConfig {
  std::vector<ChannelKey> channels;
  std::map<Band, double> sample_rate_hz;
  AcquisitionConfig acquisition;
  TrackingConfig tracking;
  ReacquisitionPolicy reacquisition;
  double cold_halfwidth_hz = 5000.0;
  double warm_halfwidth_hz = 500.0;
  double hot_halfwidth_hz = 100.0;
  double hot_code_margin_chips = 2.0;
  double retry_interval_s = 0.25;
  std::uint64_t nav_seed = 0;
  double time_base_s = 100000.0;   // receiver clock reading at scenario time 0, before bias
  double clock_bias_s = 0.0;       // receiver clock error
  double decode_uncertainty_s = 10.0;
  double nominal_propagation_s = 0.08;
};

struct ChannelSnapshot {
  int svid = 0;
  Band band = Band::E1;
  ChannelStatus state = ChannelStatus::IDLE;
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;
  double carrier_phase_cycles = 0.0;
  double cn0_dbhz = 0.0;  // NaN while unavailable
  double lock_age_s = 0.0;
  std::optional<double> doppler_cache;
  bool nav_decoded = false;
};

using spamlab::Observables;


struct AcquisitionRecord {
  double t_s = 0.0;
  DopplerWindow window;
  AcquisitionResult result;
};

class Receiver {
 public:
  Receiver(ReceiverConfig config, const codegen::CodeBook& codes, StartAiding aiding = {});

  /// Consumes the next contiguous block of one band (blocks of a band must
  /// start at scenario time 0 and follow each other without gaps).
  void process(const IqBuffer& block);

  /// Drops all channel state and starts over with new aiding.
  void restart(const StartAiding& aiding);

  std::vector<ChannelSnapshot> snapshot() const;
  std::vector<Observables> observables(double t_s) const;
  const std::vector<ChannelState>& channels() const { return channels_; }
  const ChannelState* channel(int svid, Band band) const;

  /// Acquisition attempts since the last call.
  std::vector<AcquisitionRecord> take_acquisitions();

  double receiver_clock(double t_s) const { return config_.time_base_s + t_s + config_.clock_bias_s; }
  const ReceiverConfig& config() const { return config_; }
  const StartAiding& aiding() const { return aiding_; }

 private:
  struct Stream {
    double fs = 0.0;
    std::vector<Sample> history;
    long long history_start = 0;
    long long end = 0;
  };
  struct Control {
    double next_attempt_s = 0.0;
    bool reacquiring = false;
    double lost_at_s = 0.0;
    synth::ModulationTable table;
  };

  void attempt(std::size_t index, Stream& stream);
  void track(std::size_t index, Stream& stream);
  DopplerWindow window_for(std::size_t index, double t_s, std::optional<CodeWindow>& code_window) const;

  ReceiverConfig config_;
  const codegen::CodeBook& codes_;
  StartAiding aiding_;
  Acquirer acquirer_;
  std::map<Band, Stream> streams_;
  std::vector<ChannelState> channels_;
  std::vector<Control> control_;
  std::vector<AcquisitionRecord> acquisitions_;
};

}  // namespace spamlab::rx
