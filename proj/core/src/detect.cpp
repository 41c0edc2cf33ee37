#include "spamlab/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace spamlab::detect {

std::string_view to_string(AlertKind k) {
  switch (k) {
    case AlertKind::CN0_STEP: return "CN0_STEP";
    case AlertKind::DUAL_PEAK: return "DUAL_PEAK";
    case AlertKind::CLOCK_INCONSISTENCY: return "CLOCK_INCONSISTENCY";
  }
  return "?";
}

std::optional<AlertKind> parse_alert_kind(std::string_view s) {
  if (s == "CN0_STEP") return AlertKind::CN0_STEP;
  if (s == "DUAL_PEAK") return AlertKind::DUAL_PEAK;
  if (s == "CLOCK_INCONSISTENCY") return AlertKind::CLOCK_INCONSISTENCY;
  return std::nullopt;
}

Cn0StepMonitor::Cn0StepMonitor(int svid, Band band, double cadence_hz, double step_db, double window_s)
    : svid_(svid),
      band_(band),
      window_(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(window_s * cadence_hz)))),
      step_db_(step_db) {}

std::optional<Alert> Cn0StepMonitor::push(double t, double cn0) {
  values_.push_back(std::isfinite(cn0) ? cn0 : 0.0);
  if (values_.size() > 2 * window_) values_.pop_front();
  if (values_.size() < 2 * window_) return std::nullopt;
  double older = 0.0, recent = 0.0;
  for (std::size_t i = 0; i < window_; ++i) {
    older += values_[i];
    recent += values_[window_ + i];
  }
  older /= static_cast<double>(window_);
  recent /= static_cast<double>(window_);
  const double drop = older - recent;
  if (drop < step_db_) {
    in_episode_ = false;
    return std::nullopt;
  }
  if (in_episode_) return std::nullopt;
  in_episode_ = true;
  Alert a;
  a.t_s = t;
  a.kind = AlertKind::CN0_STEP;
  a.svid = svid_;
  a.band = band_;
  a.severity = drop;
  a.evidence = {{"band", std::string(to_string(band_))},
                {"preceding_mean_dbhz", older},
                {"trailing_mean_dbhz", recent},
                {"drop_db", drop}};
  return a;
}

std::vector<Alert> cn0_step_detector(const Cn0Series& s, double step_db, double window_s, std::string* warning) {
  std::vector<Alert> out;
  const auto n = static_cast<std::size_t>(std::lround(window_s * s.cadence_hz));
  if (s.cn0_dbhz.size() < 2 * std::max<std::size_t>(n, 1)) {
    if (warning) *warning = "C/N0 series shorter than two windows";
    return out;
  }
  Cn0StepMonitor m(s.svid, s.band, s.cadence_hz, step_db, window_s);
  for (std::size_t i = 0; i < s.cn0_dbhz.size(); ++i)
    if (auto a = m.push(s.t_s[i], s.cn0_dbhz[i])) out.push_back(*a);
  return out;
}

std::optional<Alert> dual_peak_detector(const rx::AcquisitionResult& acq, double ratio, double t) {
  if (!acq.detected) return std::nullopt;
  const rx::SecondaryPeak* best = nullptr;
  for (const auto& p : acq.secondary_peaks)
    if (p.relative_magnitude >= ratio && (!best || p.relative_magnitude > best->relative_magnitude)) best = &p;
  if (!best) return std::nullopt;
  Alert a;
  a.t_s = t;
  a.kind = AlertKind::DUAL_PEAK;
  a.svid = acq.svid;
  a.band = acq.band;
  a.severity = best->relative_magnitude;
  a.evidence = {{"band", std::string(to_string(acq.band))},
                {"primary", {{"doppler_hz", acq.doppler_hz}, {"code_phase_chips", acq.code_phase_chips}}},
                {"secondary",
                 {{"doppler_hz", best->doppler_hz},
                  {"code_phase_chips", best->code_phase_chips},
                  {"relative_magnitude", best->relative_magnitude}}}};
  return a;
}

std::optional<Alert> ClockMonitor::push(double t, const scenario::PvtPoint& pvt, double reference) {
  if (!pvt.valid) return std::nullopt;
  const double err = pvt.time_s - reference;
  if (!(std::abs(err) > tolerance_s_)) {
    in_episode_ = false;
    return std::nullopt;
  }
  if (in_episode_) return std::nullopt;
  in_episode_ = true;
  Alert a;
  a.t_s = t;
  a.kind = AlertKind::CLOCK_INCONSISTENCY;
  a.severity = std::abs(err);
  a.evidence = {{"pvt_time_s", pvt.time_s}, {"reference_time_s", reference}, {"offset_s", err}};
  return a;
}

std::vector<Alert> clock_consistency(const std::vector<PvtSample>& series, double tolerance, std::string* warning) {
  std::vector<Alert> out;
  if (std::none_of(series.begin(), series.end(), [](const PvtSample& s) { return s.pvt.valid; })) {
    if (warning) *warning = "no valid PVT in series";
    return out;
  }
  ClockMonitor m(tolerance);
  for (const auto& s : series)
    if (auto a = m.push(s.t_s, s.pvt, s.reference_time_s)) out.push_back(*a);
  return out;
}

std::vector<Cn0Series> cn0_series(const scenario::Timeline& tl) {
  std::vector<Cn0Series> out;
  std::map<std::pair<int, Band>, std::size_t> index;
  for (const auto& p : tl.points) {
    for (const auto& ch : p.channels) {
      auto [it, fresh] = index.try_emplace({ch.svid, ch.band}, out.size());
      if (fresh) out.push_back({ch.svid, ch.band, tl.cadence_hz, {}, {}});
      auto& s = out[it->second];
      s.t_s.push_back(p.t_s);
      s.cn0_dbhz.push_back(ch.state == rx::ChannelStatus::TRACKING ? ch.cn0_dbhz : 0.0);
    }
  }
  return out;
}

std::vector<PvtSample> pvt_series(const scenario::Timeline& tl) {
  std::vector<PvtSample> out;
  out.reserve(tl.points.size());
  for (const auto& p : tl.points) out.push_back({p.t_s, p.pvt, tl.time_base_s + p.t_s});
  return out;
}

std::vector<Alert> run_detectors(const scenario::Timeline& tl, const DetectConfig& c,
                                 std::vector<std::string>* warnings) {
  std::vector<Alert> out;
  std::string w;
  for (const auto& s : cn0_series(tl)) {
    w.clear();
    auto a = cn0_step_detector(s, c.step_db, c.window_s, &w);
    out.insert(out.end(), a.begin(), a.end());
    if (!w.empty() && warnings) warnings->push_back(w);
  }
  for (const auto& e : tl.acquisitions)
    if (auto a = dual_peak_detector(e.result, c.ratio_threshold, e.t_s)) out.push_back(*a);
  w.clear();
  auto clock = clock_consistency(pvt_series(tl), c.clock_tolerance_s, &w);
  out.insert(out.end(), clock.begin(), clock.end());
  if (!w.empty() && warnings) warnings->push_back(w);
  std::stable_sort(out.begin(), out.end(), [](const Alert& a, const Alert& b) {
    return std::make_tuple(a.t_s, a.kind, a.svid.value_or(0)) < std::make_tuple(b.t_s, b.kind, b.svid.value_or(0));
  });
  return out;
}

nlohmann::json to_json(const Alert& a) {
  nlohmann::json j = {{"t_s", a.t_s}, {"kind", std::string(to_string(a.kind))}, {"severity", a.severity},
                      {"evidence", a.evidence}};
  j["svid"] = a.svid ? nlohmann::json(*a.svid) : nlohmann::json(nullptr);
  return j;
}

}  // namespace spamlab::detect
