#pragma once

// Narrowband/wideband power ratio C/N0 estimator over symbol-aligned groups
// of 1 ms prompt correlations.

#include <complex>
#include <deque>
#include <optional>
#include <span>

namespace spamlab::rx {

struct Cn0Config {
  int window_symbols = 250;  // 1 s smoothing
  int fast_symbols = 5;      // lock detector window
  int min_symbols = 5;       // 20 coherent epochs
  int epochs_per_symbol = 4;
  double coherent_s = 1e-3;
  double ceiling_dbhz = 60.0;
  double floor_dbhz = 0.0;
};

class Cn0Estimator {
 public:
  explicit Cn0Estimator(Cn0Config config = {}) : config_(config) {}

  /// One symbol worth of prompts (epochs_per_symbol entries).
  void push_prompts(std::span<const std::complex<double>> prompts);
  void push(double narrowband_power, double wideband_power);

  /// Smoothed estimate; empty until min_symbols symbols were pushed.
  std::optional<double> estimate() const { return ratio_estimate(config_.window_symbols); }
  /// Short-window estimate used for lock detection.
  std::optional<double> fast_estimate() const { return ratio_estimate(config_.fast_symbols); }

  int symbols() const { return static_cast<int>(nbp_.size()); }
  void reset();
  const Cn0Config& config() const { return config_; }

  /// C/N0 in dB-Hz from the mean power ratio, clamped to [floor, ceiling].
  static double from_ratio(double mu, int m, double t, double floor_dbhz, double ceiling_dbhz);

 private:
  std::optional<double> ratio_estimate(int window) const;

  Cn0Config config_;
  std::deque<double> nbp_;
  std::deque<double> wbp_;
};

}  // namespace spamlab::rx
