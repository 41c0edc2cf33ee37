#include "spamlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "spamlab/error.hpp"
#include "spamlab/navdata.hpp"
#include "spamlab/rng.hpp"

namespace spamlab::scenario {
namespace {

constexpr double kBlockS = 1e-3;

struct Target {
  enum Kind { ATTACK, JAMMING, RESTART } kind = ATTACK;
  std::size_t index = 0;
  std::string field;
};

Target parse_target(const std::string& key) {
  if (key == "receiver.restart") return {Target::RESTART, 0, "restart"};
  auto dot = key.find('.');
  if (dot == std::string::npos) return {Target::ATTACK, 0, key};
  const std::string head = key.substr(0, dot);
  const std::string field = key.substr(dot + 1);
  auto index_of = [&](std::size_t prefix) -> std::size_t {
    const std::string digits = head.substr(prefix);
    if (digits.empty()) return 0;
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw ConfigError("bad patch target '" + key + "'");
    return static_cast<std::size_t>(std::stoul(digits));
  };
  if (head.rfind("attack", 0) == 0) return {Target::ATTACK, index_of(6), field};
  if (head.rfind("jamming", 0) == 0) return {Target::JAMMING, index_of(7), field};
  throw ConfigError("unknown patch target '" + key + "'");
}

synth::SignalParams legit_params(const pvt::SatelliteTruth& sat, const ReceiverTruth& rx, Band band, double t,
                                 double time_base, double power_db, std::uint64_t nav_seed) {
  const auto& info = band_info(band);
  const auto g = lane_geometry(sat, rx, band, t, time_base);
  synth::SignalParams p;
  p.svid = sat.svid;
  p.band = band;
  p.code_offset_ms = g.delay_chips / info.chip_rate_hz * 1e3;
  if (p.code_offset_ms >= info.code_period_s() * 1e3) p.code_offset_ms = 0.0;
  p.doppler_hz = g.doppler_hz;
  p.carrier_phase_cycles = g.carrier_phase_cycles;
  p.code_doppler_coupled = true;
  p.power_db = power_db;
  p.symbols = {nav_symbol(nav_seed, sat.svid, band, g.symbol_index), nav_symbol(nav_seed, sat.svid, band, g.symbol_index + 1)};
  p.symbol_period_offset = g.period_in_symbol;
  return p;
}

}  // namespace

PatchLog parse_patch_log(std::istream& in) {
  PatchLog log;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    TimedPatch p;
    try {
      std::size_t pos = 0;
      p.t_s = std::stod(tok, &pos);
      if (pos != tok.size() || !std::isfinite(p.t_s) || p.t_s < 0.0) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("patch log: bad time '" + tok + "'", n);
    }
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError("patch log: expected key=value, got '" + tok + "'", n);
      p.assignments.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    if (p.assignments.empty()) throw ParseError("patch log: line without assignments", n);
    if (!log.empty() && p.t_s < log.back().t_s) throw ParseError("patch log: times must not decrease", n);
    log.push_back(std::move(p));
  }
  return log;
}

PatchLog load_patch_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open patch log " + path.string());
  return parse_patch_log(in);
}

std::string format_patch(const TimedPatch& p) {
  std::ostringstream os;
  int digits = 15;
  for (; digits < 17; ++digits) {
    std::ostringstream probe;
    probe << std::setprecision(digits) << p.t_s;
    if (std::stod(probe.str()) == p.t_s) break;
  }
  os << std::setprecision(digits) << p.t_s;
  for (const auto& [k, v] : p.assignments) os << ' ' << k << '=' << v;
  return os.str();
}

void write_patch_log(std::ostream& out, const PatchLog& log) {
  for (const auto& p : log) out << format_patch(p) << '\n';
}

nlohmann::json profile_summary(const std::vector<attack::AttackProfile>& attacks,
                               const std::vector<attack::JammingProfile>& jamming) {
  auto window = [](double s, double e) {
    return nlohmann::json{{"start_s", s}, {"end_s", std::isfinite(e) ? nlohmann::json(e) : nlohmann::json(nullptr)}};
  };
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : attacks) {
    a.push_back({{"active", p.active},
                 {"target_svid", p.target_svid},
                 {"band", std::string(to_string(p.band))},
                 {"doppler_mode", std::string(attack::to_string(p.doppler_mode))},
                 {"doppler_hz", p.doppler_hz},
                 {"code_offset_mode", std::string(attack::to_string(p.code_offset_mode))},
                 {"code_offset_ms", p.code_offset_ms},
                 {"code_error_chips", p.code_error_chips},
                 {"power_advantage_db", p.power_advantage_db},
                 {"timing", p.timing.intermittent ? "INTERMITTENT" : "CONTINUOUS"},
                 {"period_s", p.timing.period_s},
                 {"duty", p.timing.duty},
                 {"style", std::string(attack::to_string(p.style))},
                 {"hardware_bias_hz", p.hardware_bias_hz},
                 {"window", window(p.window_start_s, p.window_end_s)}});
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : jamming) {
    j.push_back({{"active", p.active},
                 {"band", std::string(to_string(p.band))},
                 {"power_db", p.power_db},
                 {"timing", p.timing.intermittent ? "INTERMITTENT" : "CONTINUOUS"},
                 {"period_s", p.timing.period_s},
                 {"duty", p.timing.duty},
                 {"window", window(p.window_start_s, p.window_end_s)}});
  }
  return {{"attacks", a}, {"jamming", j}};
}

ClassifyConfig classify_config(const ScenarioSpec& spec) {
  ClassifyConfig c;
  c.target_svid = spec.scoring.target_svid;
  c.access_doppler_hz = spec.scoring.access_doppler_hz;
  c.access_code_chips = spec.scoring.access_code_chips;
  c.loss_min_s = spec.scoring.loss_min_s;
  c.recovery_min_s = spec.scoring.recovery_min_s;
  c.horizon_s = spec.scoring.horizon_s;
  return c;
}

struct Scenario::Impl {
  ScenarioSpec spec;
  codegen::CodeBook codes;
  rx::Receiver receiver;
  std::vector<attack::AttackProfile> attacks;
  std::vector<attack::SpammerState> spammer_states;
  std::vector<attack::JammingProfile> jamming;
  std::map<rx::ChannelKey, synth::ModulationTable> tables;
  PatchLog scheduled;
  std::size_t next_scheduled = 0;
  PatchLog applied;
  long long block = 0;
  long long total_blocks = 0;
  long long cadence_blocks = 100;
  Timeline timeline;
  std::map<rx::ChannelKey, detect::Cn0StepMonitor> cn0_monitors;
  detect::ClockMonitor clock_monitor;
  std::vector<detect::Alert> alerts;
  std::vector<detect::Alert> frame_alerts;
  std::vector<std::string> warnings;
  FrameCallback callback;

  static codegen::CodeBook make_codes(const ScenarioSpec& s) {
    std::vector<codegen::PrnCode> loaded;
    if (s.code_table) loaded = codegen::load_codes(*s.code_table);
    return codegen::CodeBook(std::move(loaded), s.code_seed);
  }

  static const ScenarioSpec& checked(const ScenarioSpec& s) {
    validate(s);
    return s;
  }

  Impl(ScenarioSpec s, PatchLog sched)
      : spec(checked(s)),
        codes(make_codes(spec)),
        receiver(make_receiver_config(spec), codes,
                 make_aiding(spec, spec.receiver.start_mode, spec.receiver.time_error_s, 0.0)),
        attacks(spec.attacks),
        spammer_states(spec.attacks.size()),
        jamming(spec.jamming),
        scheduled(std::move(sched)),
        clock_monitor(spec.detect.clock_tolerance_s) {
    std::stable_sort(scheduled.begin(), scheduled.end(),
                     [](const TimedPatch& a, const TimedPatch& b) { return a.t_s < b.t_s; });
    total_blocks = std::llround(spec.duration_s / kBlockS);
    cadence_blocks = std::llround(1.0 / (spec.telemetry_cadence_hz * kBlockS));
    timeline.cadence_hz = spec.telemetry_cadence_hz;
    timeline.duration_s = spec.duration_s;
    timeline.time_base_s = spec.time_base_s;
    for (const auto& key : channel_list(spec))
      cn0_monitors.emplace(key, detect::Cn0StepMonitor(key.first, key.second, spec.telemetry_cadence_hz,
                                                       spec.detect.step_db, spec.detect.window_s));
  }

  const synth::ModulationTable& table(int svid, Band band) {
    auto it = tables.find({svid, band});
    if (it == tables.end()) it = tables.emplace(rx::ChannelKey{svid, band}, synth::modulation_table(codes.code(svid, band))).first;
    return it->second;
  }

  double legit_power(int svid) const {
    const auto* s = find_satellite(spec, svid);
    return s ? lane_power_db(spec, *s) : 45.0 + spec.noise_density_db;
  }

  double apply(const TimedPatch& patch, double t) {
    std::map<std::size_t, attack::Patch> per_attack;
    std::map<std::size_t, attack::Patch> per_jamming;
    std::optional<rx::StartMode> restart;
    for (const auto& [key, value] : patch.assignments) {
      const Target tg = parse_target(key);
      switch (tg.kind) {
        case Target::RESTART: {
          auto m = rx::parse_start_mode(value);
          if (!m) throw ConfigError("receiver.restart: unknown mode '" + value + "'");
          restart = *m;
          break;
        }
        case Target::ATTACK: per_attack[tg.index][tg.field] = value; break;
        case Target::JAMMING: per_jamming[tg.index][tg.field] = value; break;
      }
    }
    auto next_attacks = attacks;
    for (const auto& [idx, p] : per_attack) {
      if (idx > next_attacks.size()) throw ConfigError("attack index " + std::to_string(idx) + " out of range");
      if (idx == next_attacks.size()) {
        attack::AttackProfile fresh;
        fresh.active = false;
        fresh.symbol_seed = derive_seed({spec.seed, 0xa77acc, idx});
        next_attacks.push_back(fresh);
      }
      next_attacks[idx] = attack::update_profile(next_attacks[idx], p, t);
      if (!spec.bands.count(next_attacks[idx].band)) throw ConfigError("attack band not simulated");
      if (attack::requires_truth(next_attacks[idx]) && !find_satellite(spec, next_attacks[idx].target_svid))
        throw ConfigError("MATCHED attack target not in constellation");
    }
    auto next_jamming = jamming;
    for (const auto& [idx, p] : per_jamming) {
      if (idx > next_jamming.size()) throw ConfigError("jamming index " + std::to_string(idx) + " out of range");
      if (idx == next_jamming.size()) {
        attack::JammingProfile fresh;
        fresh.active = false;
        next_jamming.push_back(fresh);
      }
      next_jamming[idx] = attack::update_jamming(next_jamming[idx], p, t);
      if (!spec.bands.count(next_jamming[idx].band)) throw ConfigError("jamming band not simulated");
    }
    std::optional<rx::StartAiding> aiding;
    if (restart) {
      aiding = make_aiding(spec, *restart, *restart == rx::StartMode::HOT ? 0.0 : spec.receiver.time_error_s, t);
      rx::validate(*aiding);
    }
    attacks = std::move(next_attacks);
    spammer_states.resize(attacks.size());
    jamming = std::move(next_jamming);
    if (aiding) receiver.restart(*aiding);
    TimedPatch rec = patch;
    rec.t_s = t;
    applied.push_back(std::move(rec));
    return t;
  }

  void synthesize_band(Band band, double t, IqBuffer& buf) {
    const double fs = buf.sample_rate_hz;
    const auto& rxt = spec.receiver.truth;
    for (const auto* sat : satellites_in(spec, band)) {
      const auto p = legit_params(sat->truth, rxt, band, t, spec.time_base_s, lane_power_db(spec, *sat), spec.nav_seed);
      synth::accumulate(p, table(sat->truth.svid, band), fs, t, buf.samples);
    }
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      const auto& a = attacks[i];
      if (a.band != band) continue;
      const auto* sat = find_satellite(spec, a.target_svid);
      attack::TruthAccess truth{sat ? &sat->truth : nullptr, &rxt, spec.time_base_s};
      const auto p = attack::spamming_lane(a, spammer_states[i], &truth, t, kBlockS, legit_power(a.target_svid));
      if (!std::isfinite(p.power_db)) continue;
      if (a.hardware_bias_hz != 0.0) {
        IqBuffer lane = make_buffer(band, fs, t, kBlockS);
        synth::accumulate(p, table(a.target_svid, band), fs, t, lane.samples);
        synth::apply_hardware_bias_in_place(lane, a.hardware_bias_hz);
        for (std::size_t k = 0; k < buf.size(); ++k) buf.samples[k] += lane.samples[k];
      } else {
        synth::accumulate(p, table(a.target_svid, band), fs, t, buf.samples);
      }
    }
    // Meaconing: the recorded legitimate lanes re-emitted delay_s later.
    for (const auto& m : spec.meaconing) {
      if (!m.active || t < m.window_start_s || t >= m.window_end_s) continue;
      if (std::find(m.bands.begin(), m.bands.end(), band) == m.bands.end()) continue;
      const double src = t - m.delay_s;
      if (src < m.recording_start_s) continue;
      const auto& info = band_info(band);
      for (const auto* sat : satellites_in(spec, band)) {
        auto p = legit_params(sat->truth, rxt, band, src, spec.time_base_s,
                              lane_power_db(spec, *sat) + m.power_advantage_db, spec.nav_seed);
        double d = std::fmod(p.code_offset_ms * 1e-3 * info.chip_rate_hz + m.delay_s * info.chip_rate_hz,
                             info.code_length);
        if (d < 0) d += info.code_length;
        p.code_offset_ms = d / info.chip_rate_hz * 1e3;
        if (p.code_offset_ms >= info.code_period_s() * 1e3) p.code_offset_ms = 0.0;
        synth::accumulate(p, table(sat->truth.svid, band), fs, t, buf.samples);
      }
    }
    synth::add_noise_in_place(buf, spec.noise_density_db,
                              derive_seed({spec.seed, static_cast<std::uint64_t>(band), static_cast<std::uint64_t>(block)}));
    for (std::size_t j = 0; j < jamming.size(); ++j) {
      if (jamming[j].band != band) continue;
      attack::add_jamming(buf, jamming[j], spec.noise_density_db,
                          derive_seed({spec.seed, 0x1a33, j, static_cast<std::uint64_t>(band),
                                       static_cast<std::uint64_t>(block)}));
    }
  }

  PvtPoint solve_pvt(double t) {
    PvtPoint out;
    const auto obs = receiver.observables(t);
    std::vector<pvt::SatelliteTruth> truth;
    std::set<int> seen;
    for (const auto& o : obs) {
      if (!seen.insert(o.svid).second) continue;
      const auto* sat = find_satellite(spec, o.svid);
      if (!sat) continue;
      const double te = emission_time_from_clock(sat->truth, o.transmit_time_s, spec.time_base_s);
      truth.push_back(propagate(sat->truth, te));
    }
    const auto sol = pvt::solve_position(obs, truth);
    out.valid = sol.valid;
    if (!sol.valid) return out;
    out.time_s = sol.time_s;
    out.position_ecef_m = sol.position_ecef_m;
    out.position_error_m = (sol.position_ecef_m - receiver_position(spec.receiver.truth, t)).norm();
    out.authenticated_fraction = sol.authenticated_fraction;
    out.used_svids = sol.used_svids;
    return out;
  }

  bool attack_active(double block_start) const {
    const int target = spec.scoring.target_svid;
    if (target == 0) return false;
    for (const auto& a : attacks)
      if (a.target_svid == target && a.active && block_start >= a.window_start_s && block_start < a.window_end_s)
        return true;
    return false;
  }

  void telemetry(double t) {
    TimelinePoint pt;
    pt.t_s = t;
    for (const auto& s : receiver.snapshot()) {
      ChannelPoint c;
      c.svid = s.svid;
      c.band = s.band;
      c.state = s.state;
      c.doppler_hz = s.doppler_hz;
      c.code_phase_chips = s.code_phase_chips;
      c.cn0_dbhz = s.cn0_dbhz;
      c.nav_decoded = s.nav_decoded;
      if (const auto* sat = find_satellite(spec, s.svid)) {
        const auto g = lane_geometry(sat->truth, spec.receiver.truth, s.band, t, spec.time_base_s);
        c.truth_doppler_hz = g.doppler_hz;
        c.truth_delay_chips = g.delay_chips;
      }
      pt.channels.push_back(c);
      auto m = cn0_monitors.find({s.svid, s.band});
      if (m != cn0_monitors.end()) {
        const double v = s.state == rx::ChannelStatus::TRACKING ? s.cn0_dbhz : 0.0;
        if (auto a = m->second.push(t, v)) frame_alerts.push_back(*a);
      }
    }
    pt.pvt = solve_pvt(t);
    if (auto a = clock_monitor.push(t, pt.pvt, spec.time_base_s + t)) frame_alerts.push_back(*a);
    pt.attack_active = attack_active(t - kBlockS);
    timeline.points.push_back(std::move(pt));
    alerts.insert(alerts.end(), frame_alerts.begin(), frame_alerts.end());
    if (callback) callback(timeline.points.back(), frame_alerts);
    frame_alerts.clear();
  }

  void step() {
    if (block >= total_blocks) return;
    const double t = static_cast<double>(block) / 1000.0;
    while (next_scheduled < scheduled.size() && scheduled[next_scheduled].t_s <= t + 1e-9) {
      try {
        apply(scheduled[next_scheduled], t);
      } catch (const ConfigError& e) {
        warnings.push_back("patch at " + std::to_string(scheduled[next_scheduled].t_s) + " rejected: " + e.what());
      }
      ++next_scheduled;
    }
    for (Band band : spec.bands) {
      IqBuffer buf = make_buffer(band, spec.sample_rate_hz.at(band), t, kBlockS);
      synthesize_band(band, t, buf);
      receiver.process(buf);
    }
    for (auto& rec : receiver.take_acquisitions()) {
      if (auto a = detect::dual_peak_detector(rec.result, spec.detect.ratio_threshold, rec.t_s)) frame_alerts.push_back(*a);
      timeline.acquisitions.push_back({rec.t_s, rec.window, std::move(rec.result)});
    }
    ++block;
    if (block % cadence_blocks == 0) telemetry(static_cast<double>(block) / 1000.0);
  }
};

Scenario::Scenario(ScenarioSpec spec, PatchLog scheduled)
    : impl_(std::make_unique<Impl>(std::move(spec), std::move(scheduled))) {}
Scenario::~Scenario() = default;

double Scenario::time_s() const { return static_cast<double>(impl_->block) / 1000.0; }
bool Scenario::done() const { return impl_->block >= impl_->total_blocks; }
void Scenario::step() { impl_->step(); }
void Scenario::run_until(double t) {
  const auto target = std::min(impl_->total_blocks, static_cast<long long>(std::llround(t / kBlockS)));
  while (impl_->block < target) impl_->step();
}
double Scenario::apply_now(const TimedPatch& patch) { return impl_->apply(patch, time_s()); }
void Scenario::on_frame(FrameCallback cb) { impl_->callback = std::move(cb); }
const ScenarioSpec& Scenario::spec() const { return impl_->spec; }
const Timeline& Scenario::timeline() const { return impl_->timeline; }
const std::vector<attack::AttackProfile>& Scenario::attacks() const { return impl_->attacks; }
const std::vector<attack::JammingProfile>& Scenario::jamming() const { return impl_->jamming; }
const std::vector<detect::Alert>& Scenario::alerts() const { return impl_->alerts; }
const PatchLog& Scenario::applied_patches() const { return impl_->applied; }
std::vector<rx::ChannelSnapshot> Scenario::channel_snapshot() const { return impl_->receiver.snapshot(); }

RunResult Scenario::result() const {
  RunResult r;
  r.name = impl_->spec.name;
  r.seed = impl_->spec.seed;
  r.timeline = impl_->timeline;
  r.alerts = impl_->alerts;
  r.applied_patches = impl_->applied;
  r.warnings = impl_->warnings;
  std::optional<AttackWindow> window;
  if (impl_->spec.scoring.attack_window)
    window = AttackWindow{impl_->spec.scoring.attack_window->first, impl_->spec.scoring.attack_window->second};
  else
    window = derive_attack_window(r.timeline);
  r.classification = classify_config(impl_->spec);
  r.window = window;
  r.outcome = classify_outcome(r.timeline, window, r.classification);
  return r;
}

RunResult run(const ScenarioSpec& spec, const PatchLog& patches) {
  Scenario s(spec, patches);
  while (!s.done()) s.step();
  return s.result();
}

}  // namespace spamlab::scenario
