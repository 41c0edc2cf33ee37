#include "spamlab/constellation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace spamlab {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kWgsA = 6378137.0;
constexpr double kWgsE2 = 6.69437999014e-3;
constexpr double kOrbitRadius = 29600e3;
constexpr double kOrbitSpeed = 3670.0;

Eigen::Matrix3d enu_basis(const Vec3& receiver) {
  const double lon = std::atan2(receiver.y(), receiver.x());
  const double lat = std::atan2(receiver.z(), std::hypot(receiver.x(), receiver.y()));
  Eigen::Matrix3d m;
  m.col(0) << -std::sin(lon), std::cos(lon), 0.0;
  m.col(1) << -std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon), std::cos(lat);
  m.col(2) << std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat);
  return m;
}

}  // namespace

pvt::SatelliteTruth propagate(const pvt::SatelliteTruth& s, double t) {
  pvt::SatelliteTruth out = s;
  out.position_ecef_m = s.position_ecef_m + s.velocity_ecef_mps * t;
  return out;
}

Vec3 receiver_position(const ReceiverTruth& rx, double t) { return rx.position_ecef_m + rx.velocity_ecef_mps * t; }

LaneGeometry lane_geometry(const pvt::SatelliteTruth& sat, const ReceiverTruth& rx, Band band, double t,
                           double time_base) {
  const auto& info = band_info(band);
  const Vec3 prx = receiver_position(rx, t);
  double T = t;
  double range = 0.0;
  for (int i = 0; i < 4; ++i) {
    range = (sat.position_ecef_m + sat.velocity_ecef_mps * T - prx).norm();
    T = t - range / kSpeedOfLight;
  }
  const Vec3 u = (sat.position_ecef_m + sat.velocity_ecef_mps * T - prx) / range;
  const double dTdt = (1.0 + u.dot(rx.velocity_ecef_mps) / kSpeedOfLight) /
                      (1.0 + u.dot(sat.velocity_ecef_mps) / kSpeedOfLight);

  LaneGeometry g;
  g.emission_time_s = T;
  g.range_m = range;
  g.sat_clock_s = time_base + T + sat.clock_bias_s;
  g.doppler_hz = info.carrier_hz * (dTdt - 1.0);

  // Chip count since the satellite clock origin, split to keep precision.
  const double length = info.code_length;
  const double base_chips = std::fmod(time_base * info.chip_rate_hz, length);
  const double rel = (T + sat.clock_bias_s) * info.chip_rate_hz;
  double within = std::fmod(base_chips + rel, length);
  if (within < 0) within += length;
  const double period_f = std::floor((time_base * info.chip_rate_hz + rel) / length);
  g.period_index = static_cast<long long>(period_f);
  // Guard the floor against rounding at a period edge.
  const double approx = time_base * info.chip_rate_hz + rel - period_f * length;
  if (approx < 0.0 || approx >= length) g.period_index += approx < 0.0 ? -1 : 1;

  const int pps = static_cast<int>(std::lround(info.chip_rate_hz / (kSymbolRateSps * length)));
  g.period_in_symbol = static_cast<int>(((g.period_index % pps) + pps) % pps);
  g.symbol_index = (g.period_index - g.period_in_symbol) / pps;

  double delay = std::fmod(std::fmod(t * info.chip_rate_hz, length) - within, length);
  if (delay < 0) delay += length;
  g.delay_chips = delay;

  const double phase = info.carrier_hz * (T - t + sat.clock_bias_s);
  g.carrier_phase_cycles = phase - std::floor(phase);
  return g;
}

double emission_time_from_clock(const pvt::SatelliteTruth& sat, double sat_clock_s, double time_base) {
  return sat_clock_s - time_base - sat.clock_bias_s;
}

Vec3 geodetic_to_ecef(double lat_deg, double lon_deg, double h) {
  const double lat = lat_deg * kDeg, lon = lon_deg * kDeg;
  const double n = kWgsA / std::sqrt(1.0 - kWgsE2 * std::sin(lat) * std::sin(lat));
  return {(n + h) * std::cos(lat) * std::cos(lon), (n + h) * std::cos(lat) * std::sin(lon),
          (n * (1.0 - kWgsE2) + h) * std::sin(lat)};
}

Vec3 position_from_azel(const Vec3& receiver, double az_deg, double el_deg, double radius) {
  const Eigen::Matrix3d b = enu_basis(receiver);
  const double az = az_deg * kDeg, el = el_deg * kDeg;
  const Vec3 u = b * Vec3(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
  // Solve |receiver + s u| = radius for s > 0.
  const double bq = receiver.dot(u);
  const double c = receiver.squaredNorm() - radius * radius;
  const double s = -bq + std::sqrt(bq * bq - c);
  return receiver + s * u;
}

double gdop(const Vec3& receiver, const std::vector<pvt::SatelliteTruth>& sats) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(sats.size()), 4);
  for (std::size_t i = 0; i < sats.size(); ++i) {
    const Vec3 d = sats[i].position_ecef_m - receiver;
    g.row(static_cast<Eigen::Index>(i)) << -d.transpose() / d.norm(), 1.0;
  }
  const Eigen::Matrix4d q = (g.transpose() * g).inverse();
  return std::sqrt(q.trace());
}

Vec3 default_receiver_position() { return geodetic_to_ecef(40.4168, -3.7038, 667.0); }

std::vector<pvt::SatelliteTruth> desk6_constellation(const Vec3& receiver) {
  struct Slot {
    int svid;
    double az, el, heading;
    bool authenticated;
  };
  static constexpr Slot kSlots[] = {
      {13, 45.0, 55.0, 200.0, true}, {4, 135.0, 30.0, 40.0, false},  {9, 225.0, 40.0, 300.0, false},
      {19, 315.0, 25.0, 120.0, false}, {24, 10.0, 80.0, 75.0, true}, {30, 180.0, 15.0, 250.0, false},
  };
  std::vector<pvt::SatelliteTruth> out;
  for (const auto& s : kSlots) {
    pvt::SatelliteTruth t;
    t.svid = s.svid;
    t.position_ecef_m = position_from_azel(receiver, s.az, s.el, kOrbitRadius);
    // Velocity tangent to the orbit sphere, rotated by `heading` about the
    // radial direction.
    const Vec3 r = t.position_ecef_m.normalized();
    Vec3 e1 = Vec3::UnitZ().cross(r);
    if (e1.norm() < 1e-6) e1 = Vec3::UnitX().cross(r);
    e1.normalize();
    const Vec3 e2 = r.cross(e1);
    const double h = s.heading * kDeg;
    t.velocity_ecef_mps = kOrbitSpeed * (std::cos(h) * e1 + std::sin(h) * e2);
    t.clock_bias_s = 1e-5 * ((s.svid % 7) - 3);
    t.authenticated = s.authenticated;
    t.bands = {Band::E1, Band::E5B};
    out.push_back(t);
  }
  return out;
}

}  // namespace spamlab
