#include "spamlab/rx/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spamlab/error.hpp"

namespace spamlab::rx {

std::string_view to_string(StartMode m) {
  switch (m) {
    case StartMode::COLD: return "COLD";
    case StartMode::WARM: return "WARM";
    case StartMode::HOT: return "HOT";
  }
  return "?";
}

std::optional<StartMode> parse_start_mode(std::string_view s) {
  if (s == "COLD" || s == "cold") return StartMode::COLD;
  if (s == "WARM" || s == "warm") return StartMode::WARM;
  if (s == "HOT" || s == "hot") return StartMode::HOT;
  return std::nullopt;
}

void validate(const StartAiding& a) {
  switch (a.mode) {
    case StartMode::COLD:
      if (a.almanac_available || a.ephemeris_available || !a.predicted_doppler_hz.empty() ||
          !a.predicted_code_phase_chips.empty())
        throw ConfigError("cold start must not carry aiding");
      break;
    case StartMode::WARM:
      if (!a.almanac_available) throw ConfigError("warm start requires the almanac");
      if (!(a.time_error_s <= 60.0)) throw ConfigError("warm start requires time within 60 s");
      if (a.predicted_doppler_hz.empty()) throw ConfigError("warm start requires predicted Doppler");
      if (!a.predicted_code_phase_chips.empty()) throw ConfigError("warm start cannot predict code phase");
      break;
    case StartMode::HOT:
      if (!a.ephemeris_available) throw ConfigError("hot start requires ephemeris");
      if (!(a.time_error_s <= 1e-3)) throw ConfigError("hot start requires time within 1 ms");
      if (a.predicted_doppler_hz.empty() || a.predicted_code_phase_chips.empty())
        throw ConfigError("hot start requires predicted Doppler and code phase");
      break;
  }
  if (!(a.time_error_s >= 0.0)) throw ConfigError("time error must be non-negative");
}

Receiver::Receiver(ReceiverConfig config, const codegen::CodeBook& codes, StartAiding aiding)
    : config_(std::move(config)), codes_(codes), acquirer_(config_.acquisition) {
  for (const auto& [svid, band] : config_.channels) {
    if (!config_.sample_rate_hz.count(band))
      throw ConfigError("no sample rate configured for band " + std::string(to_string(band)));
    ChannelState ch;
    ch.svid = svid;
    ch.band = band;
    channels_.push_back(std::move(ch));
    Control c;
    c.table = synth::modulation_table(codes_.code(svid, band));
    control_.push_back(std::move(c));
  }
  for (const auto& [band, fs] : config_.sample_rate_hz) streams_[band].fs = fs;
  restart(aiding);
}

void Receiver::restart(const StartAiding& aiding) {
  validate(aiding);
  aiding_ = aiding;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    auto& ch = channels_[i];
    ChannelState fresh;
    fresh.svid = ch.svid;
    fresh.band = ch.band;
    if (auto it = aiding_.predicted_doppler_hz.find({ch.svid, ch.band}); it != aiding_.predicted_doppler_hz.end())
      fresh.doppler_cache = it->second;
    ch = std::move(fresh);
    control_[i].next_attempt_s = 0.0;
    control_[i].reacquiring = false;
    control_[i].lost_at_s = 0.0;
  }
}

const ChannelState* Receiver::channel(int svid, Band band) const {
  for (const auto& ch : channels_)
    if (ch.svid == svid && ch.band == band) return &ch;
  return nullptr;
}

DopplerWindow Receiver::window_for(std::size_t i, double t, std::optional<CodeWindow>& code_window) const {
  const auto& ch = channels_[i];
  const auto& ctl = control_[i];
  const ChannelKey key{ch.svid, ch.band};
  code_window.reset();
  if (ctl.reacquiring && ch.doppler_cache) {
    if (config_.reacquisition.widen_enabled && t - ctl.lost_at_s >= config_.reacquisition.widen_timeout_s)
      return {0.0, config_.cold_halfwidth_hz};
    return {*ch.doppler_cache, config_.reacquisition.narrow_halfwidth_hz};
  }
  const auto pd = aiding_.predicted_doppler_hz.find(key);
  switch (aiding_.mode) {
    case StartMode::COLD: return {0.0, config_.cold_halfwidth_hz};
    case StartMode::WARM:
      if (pd == aiding_.predicted_doppler_hz.end()) return {0.0, config_.cold_halfwidth_hz};
      return {pd->second, config_.warm_halfwidth_hz};
    case StartMode::HOT: {
      if (pd == aiding_.predicted_doppler_hz.end()) return {0.0, config_.cold_halfwidth_hz};
      const auto pc = aiding_.predicted_code_phase_chips.find(key);
      if (pc != aiding_.predicted_code_phase_chips.end()) {
        const auto& info = band_info(ch.band);
        // Delay drifts with code Doppler: d(delay)/dt = -Rc * fd / fc.
        const double delay = pc->second - info.chip_rate_hz * pd->second / info.carrier_hz * t;
        code_window = CodeWindow{delay, aiding_.time_error_s * info.chip_rate_hz + config_.hot_code_margin_chips};
      }
      return {pd->second, config_.hot_halfwidth_hz};
    }
  }
  return {0.0, config_.cold_halfwidth_hz};
}

void Receiver::attempt(std::size_t i, Stream& st) {
  auto& ch = channels_[i];
  auto& ctl = control_[i];
  const double fs = st.fs;
  const std::size_t need = acquirer_.samples_needed(ch.band, fs);
  const double t = static_cast<double>(st.end) / fs;

  IqBuffer buf;
  buf.band = ch.band;
  buf.sample_rate_hz = fs;
  buf.epoch_s = static_cast<double>(st.end - static_cast<long long>(need)) / fs;
  buf.samples.assign(st.history.end() - static_cast<std::ptrdiff_t>(need), st.history.end());

  std::optional<CodeWindow> code_window;
  const DopplerWindow window = window_for(i, t, code_window);
  const auto& code = codes_.code(ch.svid, ch.band);
  AcquisitionResult res = acquirer_.coarse(buf, code, window, code_window);
  if (res.detected) res = acquirer_.fine(buf, code, res);
  acquisitions_.push_back({t, window, res});

  if (!res.detected) {
    ctl.next_attempt_s = t + config_.retry_interval_s;
    return;
  }
  const auto& info = band_info(ch.band);
  const double delay = res.code_phase_chips - info.chip_rate_hz * res.doppler_hz / info.carrier_hz * (t - buf.epoch_s);
  start_tracking(ch, res.doppler_hz, delay, st.end, fs, config_.tracking, config_.nav_seed);
}

void Receiver::track(std::size_t i, Stream& st) {
  auto& ch = channels_[i];
  auto& ctl = control_[i];
  const double fs = st.fs;
  while (ch.state == ChannelStatus::TRACKING) {
    const long long offset = ch.loop.next_sample - st.history_start;
    if (offset < 0) throw ContractViolation("tracking fell behind the sample history");
    const auto avail = static_cast<long long>(st.history.size()) - offset;
    if (avail <= 0) break;
    const std::size_t used = track_step(
        ch, std::span<const Sample>(st.history).subspan(static_cast<std::size_t>(offset)), ctl.table,
        config_.tracking, fs);
    if (used == 0) break;
    if (ch.state == ChannelStatus::LOST) ctl.lost_at_s = static_cast<double>(ch.loop.next_sample) / fs;
  }
  auto& nav = ch.loop.nav;
  if (ch.state == ChannelStatus::TRACKING && !nav.decoded() && nav.ready()) {
    const double t = static_cast<double>(ch.loop.next_sample) / fs;
    const double tx = receiver_clock(t) - config_.nominal_propagation_s - 1.0 / kSymbolRateSps;
    const auto center = static_cast<long long>(std::floor(tx * kSymbolRateSps));
    const auto halfwidth = static_cast<long long>(std::ceil(config_.decode_uncertainty_s * kSymbolRateSps));
    nav.try_decode(center, halfwidth);
  }
}

void Receiver::process(const IqBuffer& block) {
  auto it = streams_.find(block.band);
  if (it == streams_.end()) return;  // band not received
  Stream& st = it->second;
  if (block.sample_rate_hz != st.fs) throw DomainError("block sample rate differs from receiver configuration");
  const long long first = std::llround(block.epoch_s * st.fs);
  if (first != st.end) throw ContractViolation("blocks must be contiguous");
  st.history.insert(st.history.end(), block.samples.begin(), block.samples.end());
  st.end += static_cast<long long>(block.size());

  const std::size_t need = acquirer_.samples_needed(block.band, st.fs);
  const double t = static_cast<double>(st.end) / st.fs;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    auto& ch = channels_[i];
    if (ch.band != block.band) continue;
    auto& ctl = control_[i];
    if (ch.state == ChannelStatus::TRACKING) track(i, st);
    if (ch.state == ChannelStatus::LOST) {
      ch.state = ChannelStatus::ACQUIRING;
      ctl.reacquiring = true;
      ctl.next_attempt_s = ctl.lost_at_s;
      continue;
    }
    if (ch.state == ChannelStatus::IDLE) {
      ch.state = ChannelStatus::ACQUIRING;
      ctl.next_attempt_s = 0.0;
    }
    if (ch.state == ChannelStatus::ACQUIRING && t >= ctl.next_attempt_s && st.history.size() >= need) attempt(i, st);
  }

  // Keep enough history for acquisition and for every tracking channel.
  const auto m = static_cast<long long>(std::llround(st.fs * 1e-3));
  long long keep_from = st.end - static_cast<long long>(need) - 2 * m;
  for (const auto& ch : channels_)
    if (ch.band == block.band && ch.state == ChannelStatus::TRACKING)
      keep_from = std::min(keep_from, ch.loop.next_sample);
  const long long drop = keep_from - st.history_start;
  if (drop > static_cast<long long>(need)) {
    st.history.erase(st.history.begin(), st.history.begin() + static_cast<std::ptrdiff_t>(drop));
    st.history_start += drop;
  }
}

std::vector<ChannelSnapshot> Receiver::snapshot() const {
  std::vector<ChannelSnapshot> out;
  out.reserve(channels_.size());
  for (const auto& ch : channels_) {
    ChannelSnapshot s;
    s.svid = ch.svid;
    s.band = ch.band;
    s.state = ch.state;
    s.doppler_hz = ch.doppler_hz;
    s.code_phase_chips = ch.code_phase_chips;
    s.carrier_phase_cycles = ch.carrier_phase_cycles;
    s.cn0_dbhz = ch.state == ChannelStatus::TRACKING ? ch.cn0_dbhz : std::numeric_limits<double>::quiet_NaN();
    s.lock_age_s = ch.state == ChannelStatus::TRACKING ? ch.lock_age_s : 0.0;
    s.doppler_cache = ch.doppler_cache;
    s.nav_decoded = ch.state == ChannelStatus::TRACKING && ch.loop.nav.decoded();
    out.push_back(s);
  }
  return out;
}

std::vector<Observables> Receiver::observables(double t) const {
  std::vector<Observables> out;
  for (const auto& ch : channels_) {
    if (ch.state != ChannelStatus::TRACKING || !ch.loop.nav.decoded()) continue;
    const auto& info = band_info(ch.band);
    const double fs = streams_.at(ch.band).fs;
    const long long tx_period = ch.loop.period_count + *ch.loop.nav.period_offset();
    const double chips = static_cast<double>(tx_period) * info.code_length + chip_position_at(ch, t, fs);
    Observables o;
    o.svid = ch.svid;
    o.band = ch.band;
    o.epoch_s = t;
    o.receive_clock_s = receiver_clock(t);
    o.transmit_time_s = chips / info.chip_rate_hz;
    o.pseudorange_m = kSpeedOfLight * (o.receive_clock_s - o.transmit_time_s);
    o.doppler_hz = ch.loop.carrier_freq_hz;
    o.code_phase_chips = ch.code_phase_chips;
    o.carrier_phase_cycles = ch.carrier_phase_cycles;
    out.push_back(o);
  }
  return out;
}

std::vector<AcquisitionRecord> Receiver::take_acquisitions() {
  std::vector<AcquisitionRecord> out;
  out.swap(acquisitions_);
  return out;
}

}  // namespace spamlab::rx
