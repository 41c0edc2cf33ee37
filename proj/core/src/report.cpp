#include "spamlab/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "spamlab/error.hpp"

namespace spamlab::report {
namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); }

rx::ChannelStatus status_from(const std::string& s) {
  for (auto st : {rx::ChannelStatus::IDLE, rx::ChannelStatus::ACQUIRING, rx::ChannelStatus::TRACKING,
                  rx::ChannelStatus::LOST})
    if (rx::to_string(st) == s) return st;
  throw ParseError("unknown channel state '" + s + "'");
}

std::string yes_no(bool present, bool v) { return present ? (v ? "yes" : "no") : "n/a"; }

std::string seconds(bool present, const std::optional<double>& v) {
  if (!present || !v) return present ? "-" : "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *v;
  return os.str();
}

}  // namespace

json to_json(const scenario::OutcomeRecord& r) {
  json series = json::array();
  for (const auto& [t, f] : r.authenticated_fraction_series) series.push_back({t, f});
  return {{"attack_present", r.attack_present},
          {"target_svid", r.target_svid},
          {"attack_window", {{"start_s", r.window.start_s}, {"end_s", r.window.end_s}}},
          {"lost_during_attack", r.lost_during_attack},
          {"recovered_during_attack", r.recovered_during_attack},
          {"recovered_after_attack", r.recovered_after_attack},
          {"time_to_loss_s", opt(r.time_to_loss_s)},
          {"time_to_reacquire_s", opt(r.time_to_reacquire_s)},
          {"pvt_availability_fraction", r.pvt_availability_fraction},
          {"authenticated_fraction_series", series}};
}

scenario::OutcomeRecord outcome_from_json(const json& j) {
  scenario::OutcomeRecord r;
  r.attack_present = j.at("attack_present").get<bool>();
  r.target_svid = j.at("target_svid").get<int>();
  r.window.start_s = j.at("attack_window").at("start_s").get<double>();
  r.window.end_s = j.at("attack_window").at("end_s").get<double>();
  r.lost_during_attack = j.at("lost_during_attack").get<bool>();
  r.recovered_during_attack = j.at("recovered_during_attack").get<bool>();
  r.recovered_after_attack = j.at("recovered_after_attack").get<bool>();
  if (!j.at("time_to_loss_s").is_null()) r.time_to_loss_s = j["time_to_loss_s"].get<double>();
  if (!j.at("time_to_reacquire_s").is_null()) r.time_to_reacquire_s = j["time_to_reacquire_s"].get<double>();
  r.pvt_availability_fraction = j.at("pvt_availability_fraction").get<double>();
  for (const auto& e : j.at("authenticated_fraction_series"))
    r.authenticated_fraction_series.emplace_back(e[0].get<double>(), e[1].get<double>());
  return r;
}

json to_json(const scenario::Timeline& tl) {
  json points = json::array();
  for (const auto& p : tl.points) {
    json chans = json::array();
    for (const auto& c : p.channels) {
      chans.push_back({{"svid", c.svid},
                       {"band", std::string(to_string(c.band))},
                       {"state", std::string(rx::to_string(c.state))},
                       {"doppler_hz", c.doppler_hz},
                       {"code_phase_chips", c.code_phase_chips},
                       {"cn0_dbhz", num(c.cn0_dbhz)},
                       {"nav_decoded", c.nav_decoded},
                       {"truth_doppler_hz", c.truth_doppler_hz},
                       {"truth_delay_chips", c.truth_delay_chips}});
    }
    json pvt = {{"valid", p.pvt.valid}};
    if (p.pvt.valid) {
      pvt["time_s"] = p.pvt.time_s;
      pvt["position_ecef_m"] = {p.pvt.position_ecef_m.x(), p.pvt.position_ecef_m.y(), p.pvt.position_ecef_m.z()};
      pvt["position_error_m"] = p.pvt.position_error_m;
      pvt["authenticated_fraction"] = p.pvt.authenticated_fraction;
      pvt["used_svids"] = p.pvt.used_svids;
    }
    points.push_back({{"t_s", p.t_s}, {"attack_active", p.attack_active}, {"channels", chans}, {"pvt", pvt}});
  }
  json acq = json::array();
  for (const auto& a : tl.acquisitions) {
    json sec = json::array();
    for (const auto& s : a.result.secondary_peaks)
      sec.push_back({{"doppler_hz", s.doppler_hz},
                     {"code_phase_chips", s.code_phase_chips},
                     {"relative_magnitude", s.relative_magnitude}});
    acq.push_back({{"t_s", a.t_s},
                   {"window", {{"center_hz", a.window.center_hz}, {"halfwidth_hz", a.window.halfwidth_hz}}},
                   {"svid", a.result.svid},
                   {"band", std::string(to_string(a.result.band))},
                   {"detected", a.result.detected},
                   {"doppler_hz", a.result.doppler_hz},
                   {"code_phase_chips", a.result.code_phase_chips},
                   {"peak_metric", a.result.peak_metric},
                   {"epoch_s", a.result.epoch_s},
                   {"refined", a.result.refined},
                   {"secondary_peaks", sec}});
  }
  return {{"cadence_hz", tl.cadence_hz},
          {"duration_s", tl.duration_s},
          {"time_base_s", tl.time_base_s},
          {"points", points},
          {"acquisitions", acq}};
}

scenario::Timeline timeline_from_json(const json& j) {
  scenario::Timeline tl;
  tl.cadence_hz = j.at("cadence_hz").get<double>();
  tl.duration_s = j.at("duration_s").get<double>();
  tl.time_base_s = j.at("time_base_s").get<double>();
  for (const auto& p : j.at("points")) {
    scenario::TimelinePoint pt;
    pt.t_s = p.at("t_s").get<double>();
    pt.attack_active = p.at("attack_active").get<bool>();
    for (const auto& c : p.at("channels")) {
      scenario::ChannelPoint ch;
      ch.svid = c.at("svid").get<int>();
      ch.band = *parse_band(c.at("band").get<std::string>());
      ch.state = status_from(c.at("state").get<std::string>());
      ch.doppler_hz = c.at("doppler_hz").get<double>();
      ch.code_phase_chips = c.at("code_phase_chips").get<double>();
      ch.cn0_dbhz = num_from(c.at("cn0_dbhz"));
      ch.nav_decoded = c.at("nav_decoded").get<bool>();
      ch.truth_doppler_hz = c.at("truth_doppler_hz").get<double>();
      ch.truth_delay_chips = c.at("truth_delay_chips").get<double>();
      pt.channels.push_back(ch);
    }
    const auto& pv = p.at("pvt");
    pt.pvt.valid = pv.at("valid").get<bool>();
    if (pt.pvt.valid) {
      pt.pvt.time_s = pv.at("time_s").get<double>();
      const auto& pos = pv.at("position_ecef_m");
      pt.pvt.position_ecef_m = Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>());
      pt.pvt.position_error_m = pv.at("position_error_m").get<double>();
      pt.pvt.authenticated_fraction = pv.at("authenticated_fraction").get<double>();
      pt.pvt.used_svids = pv.at("used_svids").get<std::vector<int>>();
    }
    tl.points.push_back(std::move(pt));
  }
  for (const auto& a : j.at("acquisitions")) {
    scenario::AcquisitionEvent e;
    e.t_s = a.at("t_s").get<double>();
    e.window.center_hz = a.at("window").at("center_hz").get<double>();
    e.window.halfwidth_hz = a.at("window").at("halfwidth_hz").get<double>();
    e.result.svid = a.at("svid").get<int>();
    e.result.band = *parse_band(a.at("band").get<std::string>());
    e.result.detected = a.at("detected").get<bool>();
    e.result.doppler_hz = a.at("doppler_hz").get<double>();
    e.result.code_phase_chips = a.at("code_phase_chips").get<double>();
    e.result.peak_metric = a.at("peak_metric").get<double>();
    e.result.epoch_s = a.at("epoch_s").get<double>();
    e.result.refined = a.at("refined").get<bool>();
    for (const auto& s : a.at("secondary_peaks"))
      e.result.secondary_peaks.push_back({s.at("doppler_hz").get<double>(), s.at("code_phase_chips").get<double>(),
                                          s.at("relative_magnitude").get<double>()});
    tl.acquisitions.push_back(std::move(e));
  }
  return tl;
}

namespace {
json classification_json(const scenario::ClassifyConfig& c, const std::optional<scenario::AttackWindow>& w) {
  json j = {{"target_svid", c.target_svid},     {"access_doppler_hz", c.access_doppler_hz},
            {"access_code_chips", c.access_code_chips}, {"loss_min_s", c.loss_min_s},
            {"recovery_min_s", c.recovery_min_s}, {"horizon_s", c.horizon_s}, {"window", nullptr}};
  if (w) j["window"] = {{"start_s", w->start_s}, {"end_s", w->end_s}};
  return j;
}
}  // namespace

json results_json(const scenario::RunResult& r) {
  json alerts = json::array();
  for (const auto& a : r.alerts) alerts.push_back(detect::to_json(a));
  json patches = json::array();
  for (const auto& p : r.applied_patches) patches.push_back(scenario::format_patch(p));
  return {{"scenario", r.name}, {"seed", r.seed},       {"outcome", to_json(r.outcome)},
          {"alerts", alerts},   {"patches", patches}, {"warnings", r.warnings},
          {"classification", classification_json(r.classification, r.window)},
          {"timeline", to_json(r.timeline)}};
}

scenario::OutcomeRecord reclassify(const json& results) {
  const json& c = results.at("classification");
  scenario::ClassifyConfig cfg;
  cfg.target_svid = c.at("target_svid").get<int>();
  cfg.access_doppler_hz = c.at("access_doppler_hz").get<double>();
  cfg.access_code_chips = c.at("access_code_chips").get<double>();
  cfg.loss_min_s = c.at("loss_min_s").get<double>();
  cfg.recovery_min_s = c.at("recovery_min_s").get<double>();
  cfg.horizon_s = c.at("horizon_s").get<double>();
  std::optional<scenario::AttackWindow> window;
  if (!c.at("window").is_null())
    window = scenario::AttackWindow{c["window"].at("start_s").get<double>(), c["window"].at("end_s").get<double>()};
  return scenario::classify_outcome(timeline_from_json(results.at("timeline")), window, cfg);
}

SummaryRow summary_row(const json& j) {
  SummaryRow row;
  row.scenario = j.at("scenario").get<std::string>();
  row.seed = j.at("seed").get<std::uint64_t>();
  row.outcome = outcome_from_json(j.at("outcome"));
  row.alert_count = j.at("alerts").size();
  return row;
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  const std::vector<std::string> head = {"scenario", "seed",   "lost", "recovered_during", "recovered_after",
                                         "t_loss_s", "t_reacq_s", "pvt_avail", "alerts"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    const auto& o = r.outcome;
    std::ostringstream avail;
    avail << std::fixed << std::setprecision(3) << o.pvt_availability_fraction;
    cells.push_back({r.scenario, std::to_string(r.seed), yes_no(o.attack_present, o.lost_during_attack),
                     yes_no(o.attack_present, o.recovered_during_attack),
                     yes_no(o.attack_present, o.recovered_after_attack), seconds(o.attack_present, o.time_to_loss_s),
                     seconds(o.attack_present, o.time_to_reacquire_s), avail.str(), std::to_string(r.alert_count)});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& c : cells)
    for (std::size_t i = 0; i < c.size(); ++i) width[i] = std::max(width[i], c[i].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << std::left << std::setw(static_cast<int>(width[i]) + 2) << v[i];
    os << '\n';
  };
  line(head);
  for (const auto& c : cells) line(c);
  return os.str();
}

void write_timeseries_csv(std::ostream& out, const scenario::Timeline& tl) {
  out << "t_s,svid,band,state,doppler_hz,code_phase_chips,cn0_dbhz\n";
  out << std::setprecision(10);
  for (const auto& p : tl.points)
    for (const auto& c : p.channels) {
      out << p.t_s << ',' << c.svid << ',' << to_string(c.band) << ',' << rx::to_string(c.state) << ','
          << c.doppler_hz << ',' << c.code_phase_chips << ',';
      if (std::isfinite(c.cn0_dbhz)) out << c.cn0_dbhz;
      out << '\n';
    }
}

void write_alerts_csv(std::ostream& out, const std::vector<detect::Alert>& alerts) {
  out << "t_s,kind,svid,severity,evidence_json\n";
  out << std::setprecision(10);
  for (const auto& a : alerts) {
    std::string ev = a.evidence.dump();
    std::string quoted;
    for (char c : ev) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    out << a.t_s << ',' << detect::to_string(a.kind) << ',';
    if (a.svid) out << *a.svid;
    out << ',' << a.severity << ",\"" << quoted << "\"\n";
  }
}

void emit_report(const scenario::RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const json results = results_json(r);
  {
    std::ofstream f(dir / "results.json");
    f << results.dump(1) << '\n';
  }
  {
    std::ofstream f(dir / "summary.txt");
    f << summary_table({summary_row(results)});
  }
  {
    std::ofstream f(dir / "timeseries.csv");
    write_timeseries_csv(f, r.timeline);
  }
  {
    std::ofstream f(dir / "alerts.csv");
    write_alerts_csv(f, r.alerts);
  }
  {
    std::ofstream f(dir / "patches.log");
    scenario::write_patch_log(f, r.applied_patches);
  }
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace spamlab::report
