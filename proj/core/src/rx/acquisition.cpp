#include "spamlab/rx/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fftw3.h>

#include "../fft_lock.hpp"
#include "spamlab/error.hpp"
#include "spamlab/rng.hpp"

namespace spamlab::rx {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kAnchor = 256;

double wrap(double x, double length) {
  double r = std::fmod(x, length);
  if (r < 0) r += length;
  if (r >= length) r -= length;
  return r;
}

// Sub-sample replica shifts so the coarse delay grid is fine enough for the
// narrow BOC correlation peak.
int coarse_shifts(const BandInfo& info, double fs) {
  const double spacing = info.chip_rate_hz / fs;
  const double grid = info.boc ? 0.125 : 0.25;
  return std::max(1, static_cast<int>(std::ceil(spacing / grid - 1e-9)));
}

std::uint64_t code_hash(const codegen::PrnCode& c) {
  std::uint64_t h = derive_seed({static_cast<std::uint64_t>(c.svid), static_cast<std::uint64_t>(c.band)});
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < c.chips.size(); ++i) {
    word = (word << 1) | (c.chips[i] < 0 ? 1u : 0u);
    if (i % 64 == 63) h = mix64(h ^ word), word = 0;
  }
  return mix64(h ^ word ^ c.chips.size());
}

double table_value(const synth::ModulationTable& t, double chip) {
  const double c = wrap(chip, t.code_length);
  auto h = static_cast<std::size_t>(c * t.per_chip);
  if (h >= t.values.size()) h = t.values.size() - 1;
  return t.values[h];
}

// Coherent 1 ms partial sums of the input against a replica whose chip
// position at sample n is n * rate / fs - tau0 + lag.
std::vector<std::complex<double>> block_sums(const IqBuffer& iq, const synth::ModulationTable& table,
                                             std::size_t s0, int blocks, std::size_t m, double doppler,
                                             double rate, double tau0, double lag) {
  const double fs = iq.sample_rate_hz;
  const double step = rate / fs;
  const double dphi = -doppler / fs;
  std::vector<std::complex<double>> z(static_cast<std::size_t>(blocks));
  for (int k = 0; k < blocks; ++k) {
    const std::size_t begin = s0 + static_cast<std::size_t>(k) * m;
    std::complex<double> acc = 0.0;
    for (std::size_t base = begin; base < begin + m; base += kAnchor) {
      const std::size_t end = std::min(begin + m, base + kAnchor);
      const double ph = dphi * static_cast<double>(base);
      Sample rot = std::polar(1.0, kTwoPi * (ph - std::floor(ph)));
      const Sample drot = std::polar(1.0, kTwoPi * dphi);
      for (std::size_t n = base; n < end; ++n) {
        const double chip = static_cast<double>(n) * step - tau0 + lag;
        acc += iq.samples[n] * rot * table_value(table, chip);
        rot *= drot;
      }
    }
    z[static_cast<std::size_t>(k)] = acc;
  }
  return z;
}

// Best mean power of 4 ms coherent groups over the four possible symbol
// alignments.
double grouped_power(const std::vector<std::complex<double>>& z) {
  const int blocks = static_cast<int>(z.size());
  double best = 0.0;
  for (int a = 0; a < 4; ++a) {
    double sum = 0.0;
    int groups = 0;
    for (int start = a; start + 4 <= blocks; start += 4) {
      std::complex<double> g = z[start] + z[start + 1] + z[start + 2] + z[start + 3];
      sum += std::norm(g);
      ++groups;
    }
    if (groups > 0) best = std::max(best, sum / groups);
  }
  return best;
}

double parabolic_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

double circular_diff(double a, double b, double length) {
  double d = std::fmod(a - b, length);
  if (d > 0.5 * length) d -= length;
  if (d < -0.5 * length) d += length;
  return d;
}

double delay_to_buffer_chips(double delay_chips, double epoch_s, Band band) {
  const auto& info = band_info(band);
  return wrap(delay_chips - std::fmod(epoch_s * info.chip_rate_hz, info.code_length), info.code_length);
}

double buffer_to_delay_chips(double buffer_chips, double epoch_s, Band band) {
  const auto& info = band_info(band);
  return wrap(buffer_chips + std::fmod(epoch_s * info.chip_rate_hz, info.code_length), info.code_length);
}

struct Acquirer::Plan {
  int n = 0;
  fftw_complex* in = nullptr;
  fftw_complex* spec = nullptr;
  fftw_complex* prod = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Plan(int size) : n(size) {
    std::lock_guard lock(detail::fftw_mutex());
    in = fftw_alloc_complex(static_cast<std::size_t>(n));
    spec = fftw_alloc_complex(static_cast<std::size_t>(n));
    prod = fftw_alloc_complex(static_cast<std::size_t>(n));
    out = fftw_alloc_complex(static_cast<std::size_t>(n));
    fwd = fftw_plan_dft_1d(n, in, spec, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_1d(n, prod, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard lock(detail::fftw_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(in);
    fftw_free(spec);
    fftw_free(prod);
    fftw_free(out);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  std::complex<double>* in_c() { return reinterpret_cast<std::complex<double>*>(in); }
  std::complex<double>* spec_c() { return reinterpret_cast<std::complex<double>*>(spec); }
  std::complex<double>* prod_c() { return reinterpret_cast<std::complex<double>*>(prod); }
  std::complex<double>* out_c() { return reinterpret_cast<std::complex<double>*>(out); }
};

Acquirer::Acquirer(AcquisitionConfig config) : config_(config) {}
Acquirer::~Acquirer() = default;

Acquirer::Plan& Acquirer::plan_for(int n) {
  auto it = plans_.find(n);
  if (it == plans_.end()) it = plans_.emplace(n, std::make_unique<Plan>(n)).first;
  return *it->second;
}

std::size_t Acquirer::samples_needed(Band band, double fs) const {
  const auto& info = band_info(band);
  const auto n = static_cast<std::size_t>(std::lround(fs * info.code_period_s()));
  const auto m = static_cast<std::size_t>(std::lround(fs * 1e-3));
  return std::max({2 * n, static_cast<std::size_t>(config_.noncoherent) * m,
                   static_cast<std::size_t>(config_.fine_blocks + 1) * m});
}

AcquisitionResult Acquirer::coarse(const IqBuffer& iq, const codegen::PrnCode& code, const DopplerWindow& window,
                                   const std::optional<CodeWindow>& code_window) {
  if (!(window.halfwidth_hz >= 0.0) || !std::isfinite(window.center_hz) || !std::isfinite(window.halfwidth_hz))
    throw DomainError("empty Doppler search window");
  if (!(config_.coarse_step_hz > 0.0)) throw DomainError("coarse Doppler step must be positive");
  if (code.band != iq.band) throw DomainError("code band does not match buffer band");
  const auto& info = band_info(iq.band);
  const double fs = iq.sample_rate_hz;
  const int n = static_cast<int>(std::lround(fs * info.code_period_s()));
  const int m = static_cast<int>(std::lround(fs * 1e-3));
  if (iq.size() < 2 * static_cast<std::size_t>(n)) throw DomainError("acquisition needs at least two code periods");

  const int nc = std::max(1, std::min(config_.noncoherent, static_cast<int>(iq.size()) / m));
  const int half_bins = static_cast<int>(std::floor(window.halfwidth_hz / config_.coarse_step_hz + 1e-9));
  const int bins = 2 * half_bins + 1;
  const int shifts = coarse_shifts(info, fs);
  const double chips_per_sample = info.chip_rate_hz / fs;
  const std::size_t cells = static_cast<std::size_t>(shifts) * static_cast<std::size_t>(n);

  Plan& plan = plan_for(n);
  std::vector<const std::vector<std::complex<double>>*> spectra;
  {
    const auto table = synth::modulation_table(code);
    const std::uint64_t h = code_hash(code);
    for (int s = 0; s < shifts; ++s) {
      auto key = std::make_tuple(code.svid, code.band, fs, s * 1000 + shifts, n, h);
      auto it = spectra_.find(key);
      if (it == spectra_.end()) {
        auto* in = plan.in_c();
        const double shift = static_cast<double>(s) / shifts;
        for (int i = 0; i < n; ++i) in[i] = table_value(table, (i - shift) * chips_per_sample);
        fftw_execute(plan.fwd);
        std::vector<std::complex<double>> r(plan.spec_c(), plan.spec_c() + n);
        for (auto& v : r) v = std::conj(v);
        it = spectra_.emplace(key, std::move(r)).first;
      }
      spectra.push_back(&it->second);
    }
  }

  // Cell (bin, shift, tau) holds the delay position (tau + shift/shifts) samples.
  auto cell_chip = [&](std::size_t cell) {
    const std::size_t s = cell / static_cast<std::size_t>(n);
    const std::size_t tau = cell % static_cast<std::size_t>(n);
    return (static_cast<double>(tau) + static_cast<double>(s) / shifts) * chips_per_sample;
  };
  std::vector<char> allowed(cells, 1);
  if (code_window) {
    for (std::size_t c = 0; c < cells; ++c) {
      const double delay = buffer_to_delay_chips(cell_chip(c), iq.epoch_s, iq.band);
      allowed[c] = std::abs(circular_diff(delay, code_window->center_chips, info.code_length)) <=
                   code_window->halfwidth_chips;
    }
  }

  std::vector<double> power(static_cast<std::size_t>(bins) * cells, 0.0);
  for (int b = 0; b < bins; ++b) {
    const double f = window.center_hz + (b - half_bins) * config_.coarse_step_hz;
    const double dphi = -f / fs;
    const Sample drot = std::polar(1.0, kTwoPi * dphi);
    for (int k = 0; k < nc; ++k) {
      auto* in = plan.in_c();
      const std::size_t offset = static_cast<std::size_t>(k) * static_cast<std::size_t>(m);
      for (int base = 0; base < m; base += static_cast<int>(kAnchor)) {
        const int end = std::min(m, base + static_cast<int>(kAnchor));
        const double ph = dphi * static_cast<double>(offset + static_cast<std::size_t>(base));
        Sample rot = std::polar(1.0, kTwoPi * (ph - std::floor(ph)));
        for (int i = base; i < end; ++i) {
          in[i] = iq.samples[offset + static_cast<std::size_t>(i)] * rot;
          rot *= drot;
        }
      }
      std::fill(in + m, in + n, std::complex<double>(0.0));
      fftw_execute(plan.fwd);
      const auto* spec = plan.spec_c();
      for (int s = 0; s < shifts; ++s) {
        auto* prod = plan.prod_c();
        const auto& r = *spectra[static_cast<std::size_t>(s)];
        for (int i = 0; i < n; ++i) prod[i] = spec[i] * r[static_cast<std::size_t>(i)];
        fftw_execute(plan.inv);
        const auto* out = plan.out_c();
        double* row = power.data() + static_cast<std::size_t>(b) * cells + static_cast<std::size_t>(s) * n;
        const int shift_k = static_cast<int>(offset % static_cast<std::size_t>(n));
        for (int tau = 0; tau < n; ++tau) {
          int idx = tau - shift_k;
          if (idx < 0) idx += n;
          row[tau] += std::norm(out[idx]);
        }
      }
    }
  }

  const double length = info.code_length;
  auto near = [&](std::size_t cell_a, std::size_t cell_b) {
    return std::abs(circular_diff(cell_chip(cell_a), cell_chip(cell_b), length)) <= config_.exclusion_chips;
  };

  std::size_t best = 0;
  double pmax = -1.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (allowed[i % cells] && power[i] > pmax) {
      pmax = power[i];
      best = i;
    }
  }
  const std::size_t best_bin = best / cells;
  const std::size_t best_cell = best % cells;

  double second = 0.0;
  {
    const double* row = power.data() + best_bin * cells;
    for (std::size_t c = 0; c < cells; ++c)
      if (allowed[c] && !near(c, best_cell)) second = std::max(second, row[c]);
  }

  AcquisitionResult r;
  r.svid = code.svid;
  r.band = iq.band;
  r.epoch_s = iq.epoch_s;
  r.doppler_hz = window.center_hz + (static_cast<int>(best_bin) - half_bins) * config_.coarse_step_hz;
  r.code_phase_chips = buffer_to_delay_chips(cell_chip(best_cell), iq.epoch_s, iq.band);
  if (pmax <= 0.0) {
    r.peak_metric = 0.0;
  } else if (second <= 0.0) {
    r.peak_metric = std::numeric_limits<double>::max();
  } else {
    r.peak_metric = pmax / second;
  }
  r.detected = r.peak_metric >= config_.threshold;

  // Secondary peaks: strongest remaining cells outside the exclusion zones of
  // everything already reported, kept only while they would pass the
  // detection test against what remains.
  struct Zone {
    std::size_t bin, cell;
  };
  std::vector<Zone> zones{{best_bin, best_cell}};
  auto excluded = [&](std::size_t bin, std::size_t cell, const std::vector<Zone>& zs) {
    for (const auto& z : zs) {
      const long db = static_cast<long>(bin) - static_cast<long>(z.bin);
      if (std::abs(db) <= config_.exclusion_bins && near(cell, z.cell)) return true;
    }
    return false;
  };
  auto strongest = [&](const std::vector<Zone>& zs, std::size_t& at) {
    double p = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < power.size(); ++i) {
      const std::size_t cell = i % cells;
      if (!allowed[cell] || power[i] <= p) continue;
      if (excluded(i / cells, cell, zs)) continue;
      p = power[i];
      at = i;
      found = true;
    }
    return found ? p : 0.0;
  };
  if (pmax > 0.0) {
    for (int k = 0; k < config_.max_secondary_peaks; ++k) {
      std::size_t at = 0;
      const double p = strongest(zones, at);
      if (p <= 0.0) break;
      auto with = zones;
      with.push_back({at / cells, at % cells});
      std::size_t rest_at = 0;
      const double rest = strongest(with, rest_at);
      if (rest > 0.0 && p / rest < config_.threshold) break;
      SecondaryPeak sp;
      sp.doppler_hz = window.center_hz + (static_cast<int>(at / cells) - half_bins) * config_.coarse_step_hz;
      sp.code_phase_chips = buffer_to_delay_chips(cell_chip(at % cells), iq.epoch_s, iq.band);
      sp.relative_magnitude = std::sqrt(p / pmax);
      r.secondary_peaks.push_back(sp);
      zones = std::move(with);
    }
  }
  return r;
}

AcquisitionResult Acquirer::fine(const IqBuffer& iq, const codegen::PrnCode& code,
                                 const AcquisitionResult& coarse_result) {
  if (!coarse_result.detected) throw ContractViolation("fine acquisition requires a coarse detection");
  const auto& info = band_info(iq.band);
  const double fs = iq.sample_rate_hz;
  const auto table = synth::modulation_table(code);
  const auto m = static_cast<std::size_t>(std::lround(fs * 1e-3));
  const double quantum = info.chip_rate_hz * 1e-3;

  const double tau0 = delay_to_buffer_chips(coarse_result.code_phase_chips, iq.epoch_s, iq.band);
  const double rate = info.chip_rate_hz * (1.0 + coarse_result.doppler_hz / info.carrier_hz);
  const auto s0 = static_cast<std::size_t>(std::ceil(std::fmod(tau0, quantum) * fs / rate));
  if (iq.size() < s0 + 4 * m) throw DomainError("buffer too short for fine acquisition");
  const int blocks = std::min(config_.fine_blocks, static_cast<int>((iq.size() - s0) / m));

  const int half = static_cast<int>(std::lround(config_.coarse_step_hz / config_.fine_step_hz));
  std::vector<double> metric(static_cast<std::size_t>(2 * half + 1));
  for (int j = -half; j <= half; ++j) {
    const double f = coarse_result.doppler_hz + j * config_.fine_step_hz;
    metric[static_cast<std::size_t>(j + half)] = grouped_power(block_sums(iq, table, s0, blocks, m, f, rate, tau0, 0.0));
  }
  const auto jb = static_cast<int>(std::max_element(metric.begin(), metric.end()) - metric.begin());
  double fbest = coarse_result.doppler_hz + (jb - half) * config_.fine_step_hz;
  if (jb > 0 && jb < 2 * half)
    fbest += config_.fine_step_hz * parabolic_offset(metric[static_cast<std::size_t>(jb - 1)],
                                                     metric[static_cast<std::size_t>(jb)],
                                                     metric[static_cast<std::size_t>(jb + 1)]);

  const double frate = info.chip_rate_hz * (1.0 + fbest / info.carrier_hz);
  constexpr int kLagSteps = 10;
  constexpr double kLagStep = 0.05;
  std::vector<double> lag_metric(2 * kLagSteps + 1);
  for (int i = -kLagSteps; i <= kLagSteps; ++i)
    lag_metric[static_cast<std::size_t>(i + kLagSteps)] =
        grouped_power(block_sums(iq, table, s0, blocks, m, fbest, frate, tau0, i * kLagStep));
  const auto ib = static_cast<int>(std::max_element(lag_metric.begin(), lag_metric.end()) - lag_metric.begin());
  double lag = (ib - kLagSteps) * kLagStep;
  if (ib > 0 && ib < 2 * kLagSteps)
    lag += kLagStep * parabolic_offset(lag_metric[static_cast<std::size_t>(ib - 1)],
                                       lag_metric[static_cast<std::size_t>(ib)],
                                       lag_metric[static_cast<std::size_t>(ib + 1)]);

  AcquisitionResult r = coarse_result;
  r.doppler_hz = fbest;
  r.code_phase_chips = buffer_to_delay_chips(wrap(tau0 - lag, info.code_length), iq.epoch_s, iq.band);
  r.refined = true;
  return r;
}

AcquisitionResult acquire_coarse(const IqBuffer& iq, const codegen::PrnCode& code, const DopplerWindow& window,
                                 const AcquisitionConfig& config) {
  Acquirer a(config);
  return a.coarse(iq, code, window);
}

AcquisitionResult acquire_fine(const IqBuffer& iq, const codegen::PrnCode& code, const AcquisitionResult& coarse,
                               const AcquisitionConfig& config) {
  Acquirer a(config);
  return a.fine(iq, code, coarse);
}

}  // namespace spamlab::rx
