#pragma once

// Detection monitors over telemetry and acquisition results. Each monitor
// has a streaming form (one sample at a time, used live) and a batch form
// over a recorded series; both produce the same alerts.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spamlab/rx/acquisition.hpp"
#include "spamlab/timeline.hpp"

namespace spamlab::detect {

enum class AlertKind : std::uint8_t { CN0_STEP, DUAL_PEAK, CLOCK_INCONSISTENCY };
std::string_view to_string(AlertKind k);
std::optional<AlertKind> parse_alert_kind(std::string_view s);

struct Alert {
  double t_s = 0.0;
  AlertKind kind = AlertKind::CN0_STEP;
  std::optional<int> svid;
  std::optional<Band> band;
  double severity = 0.0;
  nlohmann::json evidence = nlohmann::json::object();
};

/// Mean C/N0 over the trailing window against the preceding one. Missing
/// values (not tracking) count as 0 dB-Hz. One alert per episode: the
/// monitor re-arms once the drop falls back under the step.
class Cn0StepMonitor {
 public:
  Cn0StepMonitor(int svid, Band band, double cadence_hz, double step_db = 6.0, double window_s = 2.0);
  std::optional<Alert> push(double t_s, double cn0_dbhz);

 private:
  int svid_;
  Band band_;
  std::size_t window_;
  double step_db_;
  std::deque<double> values_;
  bool in_episode_ = false;
};

struct Cn0Series {
  int svid = 0;
  Band band = Band::E1;
  double cadence_hz = 10.0;
  std::vector<double> t_s;
  std::vector<double> cn0_dbhz;
};

/// Batch form. Sets `warning` and returns nothing when the series is
/// shorter than two windows.
std::vector<Alert> cn0_step_detector(const Cn0Series& series, double step_db = 6.0, double window_s = 2.0,
                                     std::string* warning = nullptr);

/// Alert when a secondary peak reaches ratio_threshold of the primary.
std::optional<Alert> dual_peak_detector(const rx::AcquisitionResult& acq, double ratio_threshold = 0.5,
                                        double t_s = 0.0);

/// |pvt time - reference| against a tolerance; one alert per episode.
class ClockMonitor {
 public:
  explicit ClockMonitor(double tolerance_s = 0.5) : tolerance_s_(tolerance_s) {}
  std::optional<Alert> push(double t_s, const scenario::PvtPoint& pvt, double reference_time_s);

 private:
  double tolerance_s_;
  bool in_episode_ = false;
};

struct PvtSample {
  double t_s = 0.0;
  scenario::PvtPoint pvt;
  double reference_time_s = 0.0;
};

/// Batch form. Sets `warning` when the series holds no valid PVT.
std::vector<Alert> clock_consistency(const std::vector<PvtSample>& series, double tolerance_s = 0.5,
                                     std::string* warning = nullptr);

/// Per-channel C/N0 series extracted from a timeline.
std::vector<Cn0Series> cn0_series(const scenario::Timeline& timeline);

/// PVT series with the truth clock (time base + scenario time) as reference.
std::vector<PvtSample> pvt_series(const scenario::Timeline& timeline);

struct DetectConfig {
  double step_db = 6.0;
  double window_s = 2.0;
  double ratio_threshold = 0.5;
  double clock_tolerance_s = 0.5;
};

/// All detectors over a recorded timeline, sorted by time.
std::vector<Alert> run_detectors(const scenario::Timeline& timeline, const DetectConfig& config,
                                 std::vector<std::string>* warnings = nullptr);

nlohmann::json to_json(const Alert& a);

}  // namespace spamlab::detect
