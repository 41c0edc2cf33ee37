#include "spamlab/rx/channel.hpp"

#include <cmath>
#include <numbers>

#include "spamlab/error.hpp"

namespace spamlab::rx {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kAnchor = 256;
constexpr int kBlocksPerSymbol = 4;

int blocks_per_period(const BandInfo& info) {
  return static_cast<int>(std::lround(info.code_length / (info.chip_rate_hz * 1e-3)));
}

// DLL gain converting the normalized early-minus-late envelope into a
// replica advance in chips, for small errors.
double dll_scale(const BandInfo& info, double spacing) {
  return info.boc ? (1.0 - 1.5 * spacing) / 3.0 : 1.0 - 0.5 * spacing;
}

double wrap_delay(double x, double length) {
  double r = std::fmod(x, length);
  if (r < 0) r += length;
  return r;
}

}  // namespace

std::string_view to_string(ChannelStatus s) {
  switch (s) {
    case ChannelStatus::IDLE: return "IDLE";
    case ChannelStatus::ACQUIRING: return "ACQUIRING";
    case ChannelStatus::TRACKING: return "TRACKING";
    case ChannelStatus::LOST: return "LOST";
  }
  return "?";
}

void start_tracking(ChannelState& ch, double doppler_hz, double delay_chips, long long start_sample, double fs,
                    const TrackingConfig& config, std::uint64_t nav_seed) {
  const auto& info = band_info(ch.band);
  const double t0 = static_cast<double>(start_sample) / fs;
  TrackingLoop loop;
  loop.next_sample = start_sample;
  loop.chip_pos = wrap_delay(std::fmod(t0 * info.chip_rate_hz, info.code_length) - delay_chips, info.code_length);
  loop.code_rate_cps = info.chip_rate_hz * (1.0 + doppler_hz / info.carrier_hz);
  loop.carrier_freq_hz = doppler_hz;
  loop.freq_integrator_hz = doppler_hz;
  loop.start_time_s = t0;
  loop.sync_phase = blocks_per_period(info) == kBlocksPerSymbol ? 0 : -1;
  loop.cn0 = Cn0Estimator(config.cn0);
  loop.nav = NavDecoder(nav_seed, ch.svid, ch.band, config.nav);
  ch.loop = std::move(loop);
  ch.state = ChannelStatus::TRACKING;
  ch.doppler_hz = doppler_hz;
  ch.code_phase_chips = wrap_delay(delay_chips, info.code_length);
  ch.carrier_phase_cycles = 0.0;
  ch.cn0_dbhz = std::numeric_limits<double>::quiet_NaN();
  ch.cn0_history.clear();
  ch.doppler_cache = doppler_hz;
  ch.lock_age_s = 0.0;
}

std::size_t samples_needed(const ChannelState& ch, double fs) {
  const auto& info = band_info(ch.band);
  const double q = info.chip_rate_hz * 1e-3;
  const double quarter = std::floor(ch.loop.chip_pos / q);
  const double boundary = (quarter + 1.0) * q;
  const double step = ch.loop.code_rate_cps / fs;
  const double n = std::ceil((boundary - ch.loop.chip_pos) / step);
  return static_cast<std::size_t>(std::max(1.0, n));
}

std::size_t track_step(ChannelState& ch, std::span<const Sample> samples, const synth::ModulationTable& table,
                       const TrackingConfig& cfg, double fs) {
  if (ch.state != ChannelStatus::TRACKING) return 0;
  const std::size_t n = samples_needed(ch, fs);
  if (samples.size() < n) return 0;

  auto& lp = ch.loop;
  const auto& info = band_info(ch.band);
  const double length = info.code_length;
  const int bpp = blocks_per_period(info);
  const double q = info.chip_rate_hz * 1e-3;
  const int quarter = std::min(bpp - 1, static_cast<int>(std::floor(lp.chip_pos / q)));
  const long long block_index = lp.period_count * bpp + quarter;
  const long long block_period = lp.period_count;

  const double step = lp.code_rate_cps / fs;
  const double half = 0.5 * cfg.dll_spacing_chips;
  const double pc = table.per_chip;
  const std::size_t tsize = table.values.size();
  const double dphi = lp.carrier_freq_hz / fs;
  const Sample drot = std::polar(1.0, -kTwoPi * dphi);

  auto lookup = [&](double x) {
    if (x < 0) x += length;
    else if (x >= length) x -= length;
    auto h = static_cast<std::size_t>(x * pc);
    if (h >= tsize) h = tsize - 1;
    return static_cast<double>(table.values[h]);
  };

  std::complex<double> e = 0.0, p = 0.0, l = 0.0;
  for (std::size_t base = 0; base < n; base += kAnchor) {
    const std::size_t end = std::min(n, base + kAnchor);
    const double ph = lp.carrier_phase_cycles + dphi * static_cast<double>(base);
    Sample rot = std::polar(1.0, -kTwoPi * (ph - std::floor(ph)));
    double chip = lp.chip_pos + step * static_cast<double>(base);
    for (std::size_t i = base; i < end; ++i) {
      const Sample w = samples[i] * rot;
      e += w * lookup(chip + half);
      p += w * lookup(chip);
      l += w * lookup(chip - half);
      rot *= drot;
      chip += step;
    }
  }

  // Advance the replica state to the end of the integration.
  lp.chip_pos += static_cast<double>(n) * step;
  if (lp.chip_pos >= length) {
    lp.chip_pos -= length;
    ++lp.period_count;
  }
  const double ph_end = lp.carrier_phase_cycles + static_cast<double>(n) * dphi;
  lp.carrier_phase_cycles = ph_end - std::floor(ph_end);
  lp.next_sample += static_cast<long long>(n);
  const double t = static_cast<double>(lp.next_sample) / fs;
  const double T = static_cast<double>(n) / fs;
  const bool pull_in = (t - lp.start_time_s) < cfg.fll_pull_in_s;

  // Carrier loop.
  const double pll_err = p.real() != 0.0 ? std::atan(p.imag() / p.real()) : 0.0;
  const double zeta = cfg.pll_damping;
  const double wn = cfg.pll_bandwidth_hz * 8.0 * zeta / (4.0 * zeta * zeta + 1.0);
  lp.freq_integrator_hz += wn * wn * T * pll_err / kTwoPi;
  if (pull_in && lp.have_prev) {
    const double cross = lp.prev_prompt.real() * p.imag() - lp.prev_prompt.imag() * p.real();
    const double dot = lp.prev_prompt.real() * p.real() + lp.prev_prompt.imag() * p.imag();
    if (dot != 0.0) {
      const double fll_err_hz = std::atan(cross / dot) / (kTwoPi * T);
      lp.freq_integrator_hz += 4.0 * cfg.fll_bandwidth_hz * T * fll_err_hz;
    }
  }
  lp.carrier_freq_hz = lp.freq_integrator_hz + 2.0 * zeta * wn * pll_err / kTwoPi;
  lp.prev_prompt = p;
  lp.have_prev = true;

  // Code loop, carrier aided.
  const double ae = std::abs(e), al = std::abs(l);
  const double disc = ae + al > 0.0 ? (ae - al) / (ae + al) : 0.0;
  const double code_err = -disc * dll_scale(info, cfg.dll_spacing_chips);
  lp.code_rate_cps =
      info.chip_rate_hz * (1.0 + lp.carrier_freq_hz / info.carrier_hz) -
      4.0 * (pull_in ? cfg.dll_pull_in_bandwidth_hz : cfg.dll_bandwidth_hz) * code_err;

  // Symbol assembly.
  const int phase = static_cast<int>(block_index % kBlocksPerSymbol);
  if (lp.sync_phase < 0) {
    if (!pull_in && lp.symbol_fill > 0 && (lp.symbol_prompts[0].real() < 0) != (p.real() < 0)) {
      ++lp.transitions[static_cast<std::size_t>(phase)];
      ++lp.transition_total;
    }
    lp.symbol_prompts[0] = p;
    lp.symbol_fill = 1;
    if (lp.transition_total >= 10) {
      int best = 0;
      for (int k = 1; k < kBlocksPerSymbol; ++k)
        if (lp.transitions[static_cast<std::size_t>(k)] > lp.transitions[static_cast<std::size_t>(best)]) best = k;
      if (lp.transitions[static_cast<std::size_t>(best)] * 10 >= lp.transition_total * 7) {
        lp.sync_phase = best;
        lp.symbol_fill = 0;
      }
    }
  } else {
    if (phase == lp.sync_phase) {
      lp.symbol_fill = 0;
      lp.symbol_start_period = block_period;
    }
    if (lp.symbol_fill < kBlocksPerSymbol && (lp.symbol_fill > 0 || phase == lp.sync_phase)) {
      lp.symbol_prompts[static_cast<std::size_t>(lp.symbol_fill++)] = p;
      if (lp.symbol_fill == kBlocksPerSymbol) {
        lp.cn0.push_prompts(lp.symbol_prompts);
        std::complex<double> sum = 0.0;
        for (const auto& v : lp.symbol_prompts) sum += v;
        lp.nav.push(lp.symbol_start_period, sum.real() >= 0 ? 1 : -1);

        if (auto est = lp.cn0.estimate()) ch.cn0_dbhz = *est;
        if (auto fast = lp.cn0.fast_estimate()) {
          ch.cn0_history.emplace_back(t, *fast);
          while (ch.cn0_history.size() > cfg.history_limit) ch.cn0_history.pop_front();
          if (*fast < cfg.cn0_threshold_dbhz && !pull_in) {
            if (std::isnan(lp.below_since_s)) lp.below_since_s = t;
          } else {
            lp.below_since_s = std::numeric_limits<double>::quiet_NaN();
          }
        }
      }
    }
  }

  ch.doppler_hz = lp.carrier_freq_hz;
  ch.code_phase_chips = wrap_delay(std::fmod(t * info.chip_rate_hz, length) - lp.chip_pos, length);
  ch.carrier_phase_cycles = lp.carrier_phase_cycles;
  ch.lock_age_s = t - lp.start_time_s;
  if (std::isnan(lp.below_since_s)) ch.doppler_cache = lp.carrier_freq_hz;

  const bool low_too_long = !std::isnan(lp.below_since_s) && t - lp.below_since_s >= cfg.loss_hysteresis_s;
  const bool no_sync = lp.sync_phase < 0 && t - lp.start_time_s > cfg.fll_pull_in_s + cfg.bit_sync_timeout_s;
  if (low_too_long || no_sync) ch.state = ChannelStatus::LOST;
  return n;
}

ChannelState track_step(ChannelState ch, const IqBuffer& block, const synth::ModulationTable& table,
                        const TrackingConfig& config) {
  const long long first = std::llround(block.epoch_s * block.sample_rate_hz);
  const long long offset = ch.loop.next_sample - first;
  if (offset < 0 || offset > static_cast<long long>(block.size()))
    throw ContractViolation("block does not contain the channel's next sample");
  track_step(ch, std::span<const Sample>(block.samples).subspan(static_cast<std::size_t>(offset)), table, config,
             block.sample_rate_hz);
  return ch;
}

std::optional<double> estimate_cn0(const ChannelState& ch) { return ch.loop.cn0.estimate(); }

double chip_position_at(const ChannelState& ch, double t, double fs) {
  const double t_next = static_cast<double>(ch.loop.next_sample) / fs;
  return ch.loop.chip_pos + (t - t_next) * ch.loop.code_rate_cps;
}

}  // namespace spamlab::rx
