#include "spamlab/classify.hpp"

#include <cmath>

#include "spamlab/error.hpp"

namespace spamlab::scenario {
namespace {

// Lengths of consecutive runs where pred holds, as [start, end) times.
template <typename Pred>
std::vector<std::pair<double, double>> runs(const Timeline& tl, double from, double to, Pred pred) {
  std::vector<std::pair<double, double>> out;
  const double step = 1.0 / tl.cadence_hz;
  bool in = false;
  double start = 0.0;
  for (const auto& p : tl.points) {
    if (p.t_s < from - 1e-9 || p.t_s >= to - 1e-9) continue;
    const bool v = pred(p);
    if (v && !in) {
      in = true;
      start = p.t_s;
    } else if (!v && in) {
      in = false;
      out.emplace_back(start, p.t_s);
    }
  }
  if (in) out.emplace_back(start, std::min(to, tl.points.back().t_s + step));
  return out;
}

}  // namespace

bool has_access(const TimelinePoint& p, int svid, const ClassifyConfig& c) {
  for (const auto& ch : p.channels) {
    if (ch.svid != svid || ch.state != rx::ChannelStatus::TRACKING) continue;
    const double length = band_info(ch.band).code_length;
    if (std::abs(ch.doppler_hz - ch.truth_doppler_hz) <= c.access_doppler_hz &&
        std::abs(rx::circular_diff(ch.code_phase_chips, ch.truth_delay_chips, length)) <= c.access_code_chips)
      return true;
  }
  return false;
}

std::optional<AttackWindow> derive_attack_window(const Timeline& tl) {
  std::optional<AttackWindow> w;
  const double step = 1.0 / tl.cadence_hz;
  for (const auto& p : tl.points) {
    if (!p.attack_active) continue;
    // A point at t reports the block that ended at t.
    if (!w) w = AttackWindow{p.t_s - step, p.t_s};
    w->end_s = p.t_s;
  }
  return w;
}

double pvt_availability(const Timeline& tl) {
  std::size_t first = tl.points.size();
  for (std::size_t i = 0; i < tl.points.size(); ++i)
    if (tl.points[i].pvt.valid) {
      first = i;
      break;
    }
  if (first == tl.points.size()) return 0.0;
  std::size_t valid = 0;
  for (std::size_t i = first; i < tl.points.size(); ++i) valid += tl.points[i].pvt.valid ? 1 : 0;
  return static_cast<double>(valid) / static_cast<double>(tl.points.size() - first);
}

OutcomeRecord classify_outcome(const Timeline& tl, const std::optional<AttackWindow>& window,
                               const ClassifyConfig& c) {
  OutcomeRecord r;
  r.target_svid = c.target_svid;
  r.pvt_availability_fraction = pvt_availability(tl);
  for (const auto& p : tl.points)
    if (p.pvt.valid) r.authenticated_fraction_series.emplace_back(p.t_s, p.pvt.authenticated_fraction);
  if (!window || c.target_svid == 0) return r;
  r.attack_present = true;
  r.window = *window;
  if (tl.points.empty()) throw ClassificationError("empty timeline");
  const double step = 1.0 / tl.cadence_hz;
  const double end = tl.points.back().t_s + step * 0.5;
  if (end + 1e-9 < window->end_s + c.horizon_s)
    throw ClassificationError("timeline ends before the attack window plus the reacquisition horizon");

  auto access = [&](const TimelinePoint& p) { return has_access(p, c.target_svid, c); };
  auto no_access = [&](const TimelinePoint& p) { return !access(p); };

  double loss_t = 0.0;
  for (const auto& [s, e] : runs(tl, window->start_s, window->end_s, no_access)) {
    if (e - s + 1e-9 >= c.loss_min_s) {
      r.lost_during_attack = true;
      loss_t = s;
      r.time_to_loss_s = std::max(0.0, s - window->start_s);
      break;
    }
  }
  if (!r.lost_during_attack) return r;

  for (const auto& [s, e] : runs(tl, loss_t, window->end_s, access)) {
    if (e - s + 1e-9 >= c.recovery_min_s) {
      r.recovered_during_attack = true;
      r.time_to_reacquire_s = s - loss_t;
      break;
    }
  }
  const double after_end = window->end_s + c.horizon_s;
  for (const auto& [s, e] : runs(tl, window->end_s, after_end + step, access)) {
    if (e - s + 1e-9 >= c.recovery_min_s && s < after_end) {
      r.recovered_after_attack = true;
      if (!r.recovered_during_attack) r.time_to_reacquire_s = s - window->end_s;
      break;
    }
  }
  return r;
}

SurgicalReport compare_non_target(const Timeline& a, const Timeline& b, int target, const AttackWindow& w,
                                  double grace) {
  SurgicalReport rep;
  const std::size_t n = std::min(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pa = a.points[i];
    const auto& pb = b.points[i];
    if (pa.t_s < w.start_s + grace || pa.t_s >= w.end_s) continue;
    for (std::size_t k = 0; k < pa.channels.size() && k < pb.channels.size(); ++k) {
      const auto& ca = pa.channels[k];
      const auto& cb = pb.channels[k];
      if (ca.svid == target) continue;
      if (cb.state == rx::ChannelStatus::TRACKING && ca.state != rx::ChannelStatus::TRACKING)
        rep.non_target_lock_loss = true;
      if (std::isfinite(ca.cn0_dbhz) && std::isfinite(cb.cn0_dbhz)) {
        rep.max_cn0_deviation_db = std::max(rep.max_cn0_deviation_db, std::abs(ca.cn0_dbhz - cb.cn0_dbhz));
        ++rep.compared_points;
      }
    }
  }
  return rep;
}

}  // namespace spamlab::scenario
