#pragma once

// Position, velocity and time from tracked observables, with satellite
// states supplied by the scenario truth model.

#include <set>
#include <string>
#include <vector>

#include "spamlab/observables.hpp"
#include "spamlab/types.hpp"

namespace spamlab::pvt {

struct SatelliteTruth {
  int svid = 0;
  Vec3 position_ecef_m = Vec3::Zero();
  Vec3 velocity_ecef_mps = Vec3::Zero();
  double clock_bias_s = 0.0;
  bool authenticated = false;
  std::set<Band> bands{Band::E1};
};

inline constexpr double kMinOrbitRadius = 2e7;
inline constexpr double kMaxOrbitRadius = 3.5e7;

/// Throws DomainError for an out-of-range svid or, unless `any_radius`, a
/// position outside the MEO shell.
void validate(const SatelliteTruth& sat, bool any_radius = false);

struct PvtSolution {
  Vec3 position_ecef_m = Vec3::Zero();
  Vec3 velocity_ecef_mps = Vec3::Zero();
  double clock_bias_s = 0.0;
  double clock_drift = 0.0;  // s/s
  double time_s = 0.0;       // receiver clock reading corrected by the solved bias
  std::vector<int> used_svids;
  double authenticated_fraction = 0.0;
  double residual_rms_m = 0.0;
  bool valid = false;
  bool velocity_valid = false;
  std::string reason;
  int iterations = 0;
};

struct PvtConfig {
  int max_iterations = 10;
  double tolerance_m = 1e-4;
  Vec3 initial_position_ecef_m = Vec3::Zero();
  double min_singular_ratio = 1e-9;
};

/// Iterated linearized least squares over (x, y, z, clock bias). Observables
/// without a truth entry are ignored; one observable per svid is used (the
/// first given).
PvtSolution solve_position(const std::vector<Observables>& obs, const std::vector<SatelliteTruth>& truth,
                           const PvtConfig& config = {});

/// Linear least squares over (vx, vy, vz, clock drift) from Doppler-implied
/// range rates, at the position of a valid solution.
PvtSolution solve_velocity(const std::vector<Observables>& obs, const std::vector<SatelliteTruth>& truth,
                           const PvtSolution& position);

}  // namespace spamlab::pvt
