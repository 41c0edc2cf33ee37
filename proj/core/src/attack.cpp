#include "spamlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spamlab/error.hpp"
#include "spamlab/navdata.hpp"
#include "spamlab/rng.hpp"

namespace spamlab::attack {
namespace {

double wrap(double x, double length) {
  double r = std::fmod(x, length);
  if (r < 0) r += length;
  return r;
}

bool in_window(double start, double end, bool active, double t) { return active && t >= start && t < end; }

double parse_number(const std::string& field, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(field + ": not a number: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(field + ": not a number: '" + v + "'");
  if (std::isnan(d)) throw ConfigError(field + ": NaN is not allowed");
  return d;
}

bool parse_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(field + ": expected true/false, got '" + v + "'");
}

std::string number_text(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

bool parse_timing_kind(const std::string& v) {
  if (v == "CONTINUOUS") return false;
  if (v == "INTERMITTENT") return true;
  throw ConfigError("timing: expected CONTINUOUS or INTERMITTENT, got '" + v + "'");
}

void validate_timing(const Timing& t) {
  if (!t.intermittent) return;
  if (!(t.period_s > 0.0)) throw ConfigError("timing period must be > 0");
  if (!(t.duty > 0.0 && t.duty < 1.0)) throw ConfigError("timing duty must be in (0, 1)");
}

bool is_ramp_field(std::string_view f) {
  return f == "doppler_hz" || f == "code_offset_ms" || f == "code_error_chips" || f == "power_advantage_db";
}

double base_value(const AttackProfile& p, std::string_view f) {
  if (f == "doppler_hz") return p.doppler_hz;
  if (f == "code_offset_ms") return p.code_offset_ms;
  if (f == "code_error_chips") return p.code_error_chips;
  if (f == "power_advantage_db") return p.power_advantage_db;
  if (f == "hardware_bias_hz") return p.hardware_bias_hz;
  throw ConfigError("unknown numeric field '" + std::string(f) + "'");
}

}  // namespace

std::string_view to_string(DopplerMode m) {
  switch (m) {
    case DopplerMode::FALSE_FIXED: return "FALSE_FIXED";
    case DopplerMode::MATCHED: return "MATCHED";
    case DopplerMode::MATCHED_PLUS_BIAS: return "MATCHED_PLUS_BIAS";
  }
  return "?";
}

std::string_view to_string(CodeOffsetMode m) {
  switch (m) {
    case CodeOffsetMode::ARBITRARY: return "ARBITRARY";
    case CodeOffsetMode::MATCHED: return "MATCHED";
    case CodeOffsetMode::MATCHED_PLUS_ERROR: return "MATCHED_PLUS_ERROR";
  }
  return "?";
}

std::string_view to_string(Style s) { return s == Style::STATIC ? "STATIC" : "DYNAMIC"; }

std::optional<DopplerMode> parse_doppler_mode(std::string_view s) {
  if (s == "FALSE_FIXED") return DopplerMode::FALSE_FIXED;
  if (s == "MATCHED") return DopplerMode::MATCHED;
  if (s == "MATCHED_PLUS_BIAS") return DopplerMode::MATCHED_PLUS_BIAS;
  return std::nullopt;
}

std::optional<CodeOffsetMode> parse_code_offset_mode(std::string_view s) {
  if (s == "ARBITRARY") return CodeOffsetMode::ARBITRARY;
  if (s == "MATCHED") return CodeOffsetMode::MATCHED;
  if (s == "MATCHED_PLUS_ERROR") return CodeOffsetMode::MATCHED_PLUS_ERROR;
  return std::nullopt;
}

std::optional<Style> parse_style(std::string_view s) {
  if (s == "STATIC") return Style::STATIC;
  if (s == "DYNAMIC") return Style::DYNAMIC;
  return std::nullopt;
}

bool gate(const Timing& timing, double t) {
  if (!timing.intermittent) return true;
  const double x = t / timing.period_s;
  return x - std::floor(x) < timing.duty;
}

double Ramp::value_at(double t) const {
  if (t <= t0) return from;
  if (t >= t1) return to;
  return from + (to - from) * (t - t0) / (t1 - t0);
}

void validate(const AttackProfile& p) {
  if (p.multitransmitter) throw ConfigError("multitransmitter attacks are not supported; use a single transmitter");
  if (p.target_svid < kMinSvid || p.target_svid > kMaxSvid) throw ConfigError("target_svid outside 1..36");
  validate_timing(p.timing);
  if (p.doppler_mode == DopplerMode::FALSE_FIXED && !(std::abs(p.doppler_hz) <= kMaxDopplerHz))
    throw ConfigError("FALSE_FIXED Doppler exceeds 10 kHz");
  if (!std::isfinite(p.doppler_hz)) throw ConfigError("doppler_hz must be finite");
  const double period_ms = band_info(p.band).code_period_s() * 1e3;
  if (!(p.code_offset_ms >= 0.0 && p.code_offset_ms < period_ms))
    throw ConfigError("code_offset_ms outside [0, code period)");
  if (!(std::abs(p.code_error_chips) < band_info(p.band).code_length))
    throw ConfigError("code_error_chips must be finite and shorter than the code");
  if (!std::isfinite(p.power_advantage_db)) throw ConfigError("power_advantage_db must be finite");
  if (p.style == Style::DYNAMIC && !(p.ramp_s > 0.0)) throw ConfigError("ramp_s must be > 0 for DYNAMIC style");
  if (!(p.window_end_s > p.window_start_s)) throw ConfigError("attack window end must follow its start");
  if (!(std::abs(p.hardware_bias_hz) <= kMaxDopplerHz)) throw ConfigError("hardware_bias_hz exceeds 10 kHz");
}

bool requires_truth(const AttackProfile& p) {
  return p.doppler_mode != DopplerMode::FALSE_FIXED || p.code_offset_mode != CodeOffsetMode::ARBITRARY;
}

bool emitting(const AttackProfile& p, double t) {
  return in_window(p.window_start_s, p.window_end_s, p.active, t) && gate(p.timing, t);
}

double field_at(const AttackProfile& p, std::string_view field, double t) {
  double v = base_value(p, field);
  for (const auto& r : p.ramps)
    if (r.field == field && t >= r.t0 && t < r.t1) v = r.value_at(t);
  if (field == "power_advantage_db" && p.style == Style::DYNAMIC && t >= p.window_start_s &&
      t < p.window_start_s + p.ramp_s) {
    Ramp open{"power_advantage_db", p.ramp_start_advantage_db, v, p.window_start_s, p.window_start_s + p.ramp_s};
    v = open.value_at(t);
  }
  return v;
}

synth::SignalParams spamming_lane(const AttackProfile& p, SpammerState& state, const TruthAccess* truth, double t,
                                  double block_s, double legit_power_db) {
  if (requires_truth(p) && (truth == nullptr || truth->satellite == nullptr || truth->receiver == nullptr))
    throw ConfigError("MATCHED attack modes need truth access (synchronous attacker)");
  const auto& info = band_info(p.band);
  const double length = info.code_length;

  LaneGeometry g;
  if (truth && truth->satellite && truth->receiver)
    g = lane_geometry(*truth->satellite, *truth->receiver, p.band, t, truth->time_base_s);

  double fd = field_at(p, "doppler_hz", t);
  if (p.doppler_mode == DopplerMode::MATCHED) fd = g.doppler_hz;
  if (p.doppler_mode == DopplerMode::MATCHED_PLUS_BIAS) fd = g.doppler_hz + fd;

  if (!state.started) {
    state = SpammerState{};
    state.started = true;
    state.last_t = t;
  }
  double delay = 0.0;
  switch (p.code_offset_mode) {
    case CodeOffsetMode::ARBITRARY:
      delay = wrap(field_at(p, "code_offset_ms", t) * 1e-3 * info.chip_rate_hz + state.delay_chips, length);
      break;
    case CodeOffsetMode::MATCHED: delay = g.delay_chips; break;
    case CodeOffsetMode::MATCHED_PLUS_ERROR:
      delay = wrap(g.delay_chips + field_at(p, "code_error_chips", t), length);
      break;
  }

  synth::SignalParams s;
  s.svid = p.target_svid;
  s.band = p.band;
  s.code_offset_ms = delay / info.chip_rate_hz * 1e3;
  if (s.code_offset_ms >= info.code_period_s() * 1e3) s.code_offset_ms = 0.0;
  s.doppler_hz = std::clamp(fd, -kMaxDopplerHz, kMaxDopplerHz);
  s.carrier_phase_cycles = state.carrier_phase_cycles;
  s.code_doppler_coupled = p.code_doppler_coupled;
  s.power_db = legit_power_db + field_at(p, "power_advantage_db", t);

  // Incoherent navigation symbols from the attacker's own stream.
  const int pps = static_cast<int>(std::lround(info.chip_rate_hz / (kSymbolRateSps * length)));
  const auto period = static_cast<long long>(std::floor((std::fmod(t * info.chip_rate_hz, 1e9 * length) - delay) / length));
  const long long pin = ((period % pps) + pps) % pps;
  const long long sym = (period - pin) / pps;
  s.symbols = {nav_symbol(p.symbol_seed, p.target_svid, p.band, sym),
               nav_symbol(p.symbol_seed, p.target_svid, p.band, sym + 1)};
  s.symbol_period_offset = static_cast<int>(pin);

  const double ph = state.carrier_phase_cycles + s.doppler_hz * block_s;
  state.carrier_phase_cycles = ph - std::floor(ph);
  if (p.code_doppler_coupled) state.delay_chips -= info.chip_rate_hz * s.doppler_hz / info.carrier_hz * block_s;
  state.delay_chips = wrap(state.delay_chips, length);
  state.last_t = t + block_s;
  if (!emitting(p, t)) s.power_db = synth::kMuted;
  return s;
}

synth::SignalParams spamming_lane(const AttackProfile& p, const TruthAccess* truth, double t, double legit_power_db) {
  SpammerState state;
  return spamming_lane(p, state, truth, t, 0.0, legit_power_db);
}

void validate(const JammingProfile& p) {
  validate_timing(p.timing);
  if (!std::isfinite(p.power_db)) throw ConfigError("jamming power_db must be finite");
  if (!(p.window_end_s > p.window_start_s)) throw ConfigError("jamming window end must follow its start");
}

NoiseLane jamming_lane(const JammingProfile& p, double t, double thermal_density_db) {
  NoiseLane lane;
  lane.active = in_window(p.window_start_s, p.window_end_s, p.active, t) && gate(p.timing, t);
  lane.density_db = lane.active ? thermal_density_db + p.power_db : synth::kMuted;
  return lane;
}

void add_jamming(IqBuffer& buffer, const JammingProfile& p, double thermal_density_db, std::uint64_t seed) {
  if (!p.active || buffer.band != p.band) return;
  const double fs = buffer.sample_rate_hz;
  const long long n0 = std::llround(buffer.epoch_s * fs);
  const double variance = synth::noise_variance(thermal_density_db + p.power_db, fs);
  GaussianSource src(seed);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double t = static_cast<double>(n0 + static_cast<long long>(i)) / fs;
    if (!in_window(p.window_start_s, p.window_end_s, true, t) || !gate(p.timing, t)) continue;
    buffer.samples[i] += src.next(variance);
  }
}

void validate(const MeaconProfile& p) {
  if (!(p.delay_s >= 0.0)) throw ConfigError("meaconing delay must be >= 0");
  if (!std::isfinite(p.power_advantage_db)) throw ConfigError("meaconing power must be finite");
  if (!(p.window_end_s > p.window_start_s)) throw ConfigError("meaconing window end must follow its start");
}

IqBuffer meacon_lane(const IqBuffer& recording, double delay_s, double power_advantage_db, double scenario_rate_hz,
                     std::string* warning) {
  if (recording.sample_rate_hz != scenario_rate_hz) throw DomainError("recording sample rate differs from scenario");
  if (!(delay_s >= 0.0)) throw DomainError("meaconing delay must be >= 0");
  IqBuffer out;
  out.band = recording.band;
  out.sample_rate_hz = recording.sample_rate_hz;
  out.epoch_s = recording.epoch_s;
  out.samples.assign(recording.size(), Sample(0.0));
  const auto shift = static_cast<std::size_t>(std::llround(delay_s * recording.sample_rate_hz));
  if (shift >= recording.size()) {
    if (warning) *warning = "meaconing delay exceeds the recording; lane is empty";
    return out;
  }
  const double g = std::pow(10.0, power_advantage_db / 20.0);
  for (std::size_t i = shift; i < recording.size(); ++i) out.samples[i] = g * recording.samples[i - shift];
  return out;
}

std::string field_text(const AttackProfile& p, std::string_view f) {
  if (f == "active") return p.active ? "true" : "false";
  if (f == "target_svid") return std::to_string(p.target_svid);
  if (f == "band") return std::string(to_string(p.band));
  if (f == "doppler_mode") return std::string(to_string(p.doppler_mode));
  if (f == "code_offset_mode") return std::string(to_string(p.code_offset_mode));
  if (f == "timing") return p.timing.intermittent ? "INTERMITTENT" : "CONTINUOUS";
  if (f == "period_s") return number_text(p.timing.period_s);
  if (f == "duty") return number_text(p.timing.duty);
  if (f == "style") return std::string(to_string(p.style));
  if (f == "ramp_s") return number_text(p.ramp_s);
  if (f == "code_doppler_coupled") return p.code_doppler_coupled ? "true" : "false";
  if (f == "window_start_s") return number_text(p.window_start_s);
  if (f == "window_end_s") return number_text(p.window_end_s);
  return number_text(base_value(p, f));
}

AttackProfile update_profile(const AttackProfile& p, const Patch& patch, double t, std::vector<PatchRecord>* log) {
  AttackProfile q = p;
  std::vector<PatchRecord> records;
  for (const auto& [field, value] : patch) {
    const std::string old = field_text(p, field);
    if (field == "active") {
      q.active = parse_bool(field, value);
    } else if (field == "target_svid") {
      q.target_svid = static_cast<int>(parse_number(field, value));
    } else if (field == "band") {
      auto b = parse_band(value);
      if (!b) throw ConfigError("band: unknown '" + value + "'");
      q.band = *b;
    } else if (field == "doppler_mode") {
      auto m = parse_doppler_mode(value);
      if (!m) throw ConfigError("doppler_mode: unknown '" + value + "'");
      q.doppler_mode = *m;
    } else if (field == "code_offset_mode") {
      auto m = parse_code_offset_mode(value);
      if (!m) throw ConfigError("code_offset_mode: unknown '" + value + "'");
      q.code_offset_mode = *m;
    } else if (field == "timing") {
      q.timing.intermittent = parse_timing_kind(value);
    } else if (field == "period_s") {
      q.timing.period_s = parse_number(field, value);
    } else if (field == "duty") {
      q.timing.duty = parse_number(field, value);
    } else if (field == "style") {
      auto s = parse_style(value);
      if (!s) throw ConfigError("style: unknown '" + value + "'");
      q.style = *s;
    } else if (field == "ramp_s") {
      q.ramp_s = parse_number(field, value);
    } else if (field == "code_doppler_coupled") {
      q.code_doppler_coupled = parse_bool(field, value);
    } else if (field == "hardware_bias_hz") {
      q.hardware_bias_hz = parse_number(field, value);
    } else if (field == "window_start_s") {
      q.window_start_s = parse_number(field, value);
    } else if (field == "window_end_s") {
      q.window_end_s = parse_number(field, value);
    } else if (is_ramp_field(field)) {
      const double v = parse_number(field, value);
      if (q.style == Style::DYNAMIC) q.ramps.push_back({field, field_at(p, field, t), v, t, t + q.ramp_s});
      if (field == "doppler_hz") q.doppler_hz = v;
      if (field == "code_offset_ms") q.code_offset_ms = v;
      if (field == "code_error_chips") q.code_error_chips = v;
      if (field == "power_advantage_db") q.power_advantage_db = v;
    } else {
      throw ConfigError("unknown attack field '" + field + "'");
    }
    records.push_back({t, field, old, value});
  }
  std::erase_if(q.ramps, [t](const Ramp& r) { return r.t1 <= t; });
  validate(q);
  if (log) log->insert(log->end(), records.begin(), records.end());
  return q;
}

JammingProfile update_jamming(const JammingProfile& p, const Patch& patch, double t, std::vector<PatchRecord>* log) {
  JammingProfile q = p;
  std::vector<PatchRecord> records;
  for (const auto& [field, value] : patch) {
    std::string old;
    if (field == "active") {
      old = p.active ? "true" : "false";
      q.active = parse_bool(field, value);
    } else if (field == "band") {
      old = std::string(to_string(p.band));
      auto b = parse_band(value);
      if (!b) throw ConfigError("band: unknown '" + value + "'");
      q.band = *b;
    } else if (field == "power_db") {
      old = number_text(p.power_db);
      q.power_db = parse_number(field, value);
    } else if (field == "timing") {
      old = p.timing.intermittent ? "INTERMITTENT" : "CONTINUOUS";
      q.timing.intermittent = parse_timing_kind(value);
    } else if (field == "period_s") {
      old = number_text(p.timing.period_s);
      q.timing.period_s = parse_number(field, value);
    } else if (field == "duty") {
      old = number_text(p.timing.duty);
      q.timing.duty = parse_number(field, value);
    } else if (field == "window_start_s") {
      old = number_text(p.window_start_s);
      q.window_start_s = parse_number(field, value);
    } else if (field == "window_end_s") {
      old = number_text(p.window_end_s);
      q.window_end_s = parse_number(field, value);
    } else {
      throw ConfigError("unknown jamming field '" + field + "'");
    }
    records.push_back({t, field, old, value});
  }
  validate(q);
  if (log) log->insert(log->end(), records.begin(), records.end());
  return q;
}

}  // namespace spamlab::attack
