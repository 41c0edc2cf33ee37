#include "spamlab/sigsynth.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spamlab/error.hpp"
#include "spamlab/rng.hpp"

namespace spamlab::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Exact re-anchoring interval for phase recurrences.
constexpr std::size_t kAnchor = 256;

double wrap_unit(double x) { return x - std::floor(x); }

}  // namespace

void check_sample_rate(Band band, double sample_rate_hz) {
  if (!(sample_rate_hz >= min_sample_rate(band))) {
    throw DomainError("sample rate " + std::to_string(sample_rate_hz) + " Hz undersamples " +
                      std::string(to_string(band)) + " (needs >= " + std::to_string(min_sample_rate(band)) + ")");
  }
}

void validate(const SignalParams& p) {
  if (p.svid < kMinSvid || p.svid > kMaxSvid) throw DomainError("svid outside 1..36");
  const double period_ms = band_info(p.band).code_period_s() * 1e3;
  if (!(p.code_offset_ms >= 0.0 && p.code_offset_ms < period_ms))
    throw DomainError("code offset " + std::to_string(p.code_offset_ms) + " ms outside [0, code period)");
  if (!(std::abs(p.doppler_hz) <= kMaxDopplerHz)) throw DomainError("|doppler| exceeds 10 kHz");
  if (p.symbol_rate_sps <= 0) throw DomainError("symbol rate must be positive");
}

ModulationTable modulation_table(const codegen::PrnCode& code) {
  const auto& info = band_info(code.band);
  ModulationTable t;
  t.code_length = code.length();
  if (info.boc) {
    // Sine-phased BOC(1,1): +1 on the first half chip, -1 on the second.
    t.per_chip = 2;
    t.values.resize(code.chips.size() * 2);
    for (std::size_t i = 0; i < code.chips.size(); ++i) {
      t.values[2 * i] = code.chips[i];
      t.values[2 * i + 1] = static_cast<std::int8_t>(-code.chips[i]);
    }
  } else {
    t.per_chip = 1;
    t.values = code.chips;
  }
  return t;
}

void accumulate(const SignalParams& p, const ModulationTable& table, double fs, double epoch_s,
                std::span<Sample> out) {
  if (p.power_db == kMuted || out.empty()) return;
  const auto& info = band_info(p.band);
  const double amplitude = std::pow(10.0, p.power_db / 20.0);
  const double length = info.code_length;
  const double rate = info.chip_rate_hz * (p.code_doppler_coupled ? 1.0 + p.doppler_hz / info.carrier_hz : 1.0);
  const double step = rate / fs;
  const double delay_chips = p.code_offset_ms * 1e-3 * info.chip_rate_hz;
  double k0 = std::fmod(epoch_s * info.chip_rate_hz - delay_chips, length);
  if (k0 < 0) k0 += length;

  const int periods_per_symbol =
      std::max(1, static_cast<int>(std::lround(info.chip_rate_hz / (p.symbol_rate_sps * length))));
  const double dphi = p.doppler_hz / fs;
  const double per_chip = table.per_chip;

  for (std::size_t base = 0; base < out.size(); base += kAnchor) {
    const std::size_t end = std::min(out.size(), base + kAnchor);
    // Exact anchor for code and carrier, recurrence inside the segment.
    double x = k0 + static_cast<double>(base) * step;
    auto period = static_cast<long long>(std::floor(x / length));
    double within = x - static_cast<double>(period) * length;
    Sample carrier = std::polar(amplitude, kTwoPi * wrap_unit(p.carrier_phase_cycles + static_cast<double>(base) * dphi));
    const Sample rot = std::polar(1.0, kTwoPi * dphi);

    for (std::size_t i = base; i < end; ++i) {
      const long long sym_index = (period + p.symbol_period_offset) / periods_per_symbol;
      const double sym =
          sym_index < static_cast<long long>(p.symbols.size()) ? p.symbols[static_cast<std::size_t>(sym_index)] : 1;
      auto h = static_cast<std::size_t>(within * per_chip);
      if (h >= table.values.size()) h = table.values.size() - 1;
      out[i] += carrier * (sym * table.values[h]);
      carrier *= rot;
      within += step;
      if (within >= length) {
        within -= length;
        ++period;
      }
    }
  }
}

void accumulate(const SignalParams& params, const codegen::PrnCode& code, double fs, double epoch_s,
                std::span<Sample> out) {
  accumulate(params, modulation_table(code), fs, epoch_s, out);
}

IqBuffer synthesize(const SignalParams& params, const codegen::PrnCode& code, double duration_s, double fs,
                    double epoch_s) {
  validate(params);
  check_sample_rate(params.band, fs);
  if (code.band != params.band || code.svid != params.svid) throw DomainError("code does not match signal params");
  auto buffer = make_buffer(params.band, fs, epoch_s, duration_s);
  accumulate(params, code, fs, epoch_s, buffer.samples);
  return buffer;
}

double noise_variance(double density_db, double fs) { return std::pow(10.0, density_db / 10.0) * fs; }

void add_noise_in_place(IqBuffer& buffer, double density_db, std::uint64_t seed) {
  if (density_db == kMuted) return;
  GaussianSource src(seed);
  src.add_to(buffer.samples, noise_variance(density_db, buffer.sample_rate_hz));
}

IqBuffer add_noise(IqBuffer buffer, double density_db, std::uint64_t seed) {
  add_noise_in_place(buffer, density_db, seed);
  return buffer;
}

void apply_hardware_bias_in_place(IqBuffer& buffer, double bias_hz) {
  if (bias_hz == 0.0) return;
  const double fs = buffer.sample_rate_hz;
  const double start = wrap_unit(bias_hz * buffer.epoch_s);
  const double dphi = bias_hz / fs;
  const Sample rot = std::polar(1.0, kTwoPi * dphi);
  auto& s = buffer.samples;
  for (std::size_t base = 0; base < s.size(); base += kAnchor) {
    const std::size_t end = std::min(s.size(), base + kAnchor);
    Sample r = std::polar(1.0, kTwoPi * wrap_unit(start + static_cast<double>(base) * dphi));
    for (std::size_t i = base; i < end; ++i) {
      s[i] *= r;
      r *= rot;
    }
  }
}

IqBuffer apply_hardware_bias(IqBuffer buffer, double bias_hz) {
  apply_hardware_bias_in_place(buffer, bias_hz);
  return buffer;
}

IqBuffer combine(std::span<const IqBuffer> buffers) {
  if (buffers.empty()) throw DomainError("combine needs at least one buffer");
  IqBuffer out = buffers.front();
  for (std::size_t k = 1; k < buffers.size(); ++k) {
    const auto& b = buffers[k];
    if (b.sample_rate_hz != out.sample_rate_hz) throw DomainError("combine: sample rates differ");
    if (b.epoch_s != out.epoch_s) throw DomainError("combine: epochs differ");
    if (b.size() != out.size()) throw DomainError("combine: lengths differ");
    if (b.band != out.band) throw DomainError("combine: bands differ");
    for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  }
  return out;
}

}  // namespace spamlab::synth
