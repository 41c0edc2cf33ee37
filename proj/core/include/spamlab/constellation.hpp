#pragma once

// Truth geometry: constant-velocity satellites and receiver in ECEF, light-time
// solved per epoch, and the signal parameters a legitimate lane carries.

#include <cstdint>
#include <vector>

#include "spamlab/pvt.hpp"

namespace spamlab {

struct ReceiverTruth {
  Vec3 position_ecef_m = Vec3::Zero();
  Vec3 velocity_ecef_mps = Vec3::Zero();
  double clock_bias_s = 0.0;
};

/// Satellite state at scenario time t (position at t = 0 plus velocity * t).
pvt::SatelliteTruth propagate(const pvt::SatelliteTruth& at_zero, double t_s);
Vec3 receiver_position(const ReceiverTruth& rx, double t_s);

/// What a satellite's signal looks like at the receiver at scenario time t.
struct LaneGeometry {
  double emission_time_s = 0.0;   // scenario time of emission
  double sat_clock_s = 0.0;       // satellite clock reading at emission, time base included
  double range_m = 0.0;
  double delay_chips = 0.0;       // scenario-time delay convention, [0, L)
  double doppler_hz = 0.0;
  double carrier_phase_cycles = 0.0;  // baseband phase, [0, 1)
  long long period_index = 0;     // absolute code period being received
  int period_in_symbol = 0;
  long long symbol_index = 0;
};

/// `time_base_s` is the GNSS time at scenario time 0.
LaneGeometry lane_geometry(const pvt::SatelliteTruth& at_zero, const ReceiverTruth& rx, Band band, double t_s,
                           double time_base_s);

/// Scenario time at which a satellite clock reading was emitted.
double emission_time_from_clock(const pvt::SatelliteTruth& at_zero, double sat_clock_s, double time_base_s);

Vec3 geodetic_to_ecef(double lat_deg, double lon_deg, double height_m);

/// Satellite at the given azimuth/elevation seen from `receiver`, placed on
/// a sphere of `orbit_radius_m`.
Vec3 position_from_azel(const Vec3& receiver, double az_deg, double el_deg, double orbit_radius_m);

/// Geometric dilution of precision for a static receiver.
double gdop(const Vec3& receiver, const std::vector<pvt::SatelliteTruth>& sats);

/// Six-satellite desk constellation around `receiver`: svids 13, 4, 9, 19,
/// 24, 30; svids 13 and 24 are authenticated; both bands.
std::vector<pvt::SatelliteTruth> desk6_constellation(const Vec3& receiver);

/// Default receiver location used by presets.
Vec3 default_receiver_position();

}  // namespace spamlab
