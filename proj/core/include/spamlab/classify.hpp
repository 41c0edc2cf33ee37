#pragma once

// Outcome classification over a recorded timeline. Access to the target is
// a TRACKING channel whose Doppler and code delay agree with the truth of
// the legitimate signal; a channel locked on the attacker has no access.

#include <optional>
#include <utility>
#include <vector>

#include "spamlab/timeline.hpp"

namespace spamlab::scenario {

struct ClassifyConfig {
  int target_svid = 0;
  double access_doppler_hz = 100.0;
  double access_code_chips = 0.5;
  double loss_min_s = 0.5;
  double recovery_min_s = 1.0;
  double horizon_s = 120.0;
};

struct AttackWindow {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct OutcomeRecord {
  bool attack_present = false;
  int target_svid = 0;
  AttackWindow window;
  bool lost_during_attack = false;
  bool recovered_during_attack = false;
  bool recovered_after_attack = false;
  std::optional<double> time_to_loss_s;
  std::optional<double> time_to_reacquire_s;
  double pvt_availability_fraction = 0.0;
  std::vector<std::pair<double, double>> authenticated_fraction_series;
};

/// Whether a point gives access to the legitimate signal of `svid`.
bool has_access(const TimelinePoint& p, int svid, const ClassifyConfig& config);

/// Attack window from the recorded activity flags, if any.
std::optional<AttackWindow> derive_attack_window(const Timeline& timeline);

/// Pure function of (timeline, window). Throws ClassificationError when the
/// timeline ends before window end + horizon.
OutcomeRecord classify_outcome(const Timeline& timeline, const std::optional<AttackWindow>& window,
                               const ClassifyConfig& config);

/// Fraction of points with a valid PVT, counted from the first fix.
double pvt_availability(const Timeline& timeline);

/// Non-target channel comparison against an attack-free control run over
/// [start + grace, end).
struct SurgicalReport {
  double max_cn0_deviation_db = 0.0;
  bool non_target_lock_loss = false;
  int compared_points = 0;
};
SurgicalReport compare_non_target(const Timeline& attacked, const Timeline& control, int target_svid,
                                  const AttackWindow& window, double grace_s);

}  // namespace spamlab::scenario
