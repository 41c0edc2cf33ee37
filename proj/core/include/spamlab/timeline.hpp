#pragma once

// Telemetry recorded by a scenario run: per-channel state against truth at a
// fixed cadence, PVT, and every acquisition attempt.

#include <optional>
#include <string>
#include <vector>

#include "spamlab/rx/receiver.hpp"

namespace spamlab::scenario {

struct ChannelPoint {
  int svid = 0;
  Band band = Band::E1;
  rx::ChannelStatus state = rx::ChannelStatus::IDLE;
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;
  double cn0_dbhz = 0.0;  // NaN unless TRACKING with an estimate
  bool nav_decoded = false;
  double truth_doppler_hz = 0.0;
  double truth_delay_chips = 0.0;
};

struct PvtPoint {
  bool valid = false;
  double time_s = 0.0;  // receiver time after bias correction
  Vec3 position_ecef_m = Vec3::Zero();
  double position_error_m = 0.0;
  double authenticated_fraction = 0.0;
  std::vector<int> used_svids;
};

struct TimelinePoint {
  double t_s = 0.0;
  std::vector<ChannelPoint> channels;
  PvtPoint pvt;
  bool attack_active = false;  // a SpAmming profile on the scoring target is switched on
};

struct AcquisitionEvent {
  double t_s = 0.0;
  rx::DopplerWindow window;
  rx::AcquisitionResult result;
};

struct Timeline {
  double cadence_hz = 10.0;
  double duration_s = 0.0;
  double time_base_s = 0.0;
  std::vector<TimelinePoint> points;
  std::vector<AcquisitionEvent> acquisitions;
};

}  // namespace spamlab::scenario
