#include "spamlab/rx/cn0.hpp"

#include <algorithm>
#include <cmath>

namespace spamlab::rx {

void Cn0Estimator::push_prompts(std::span<const std::complex<double>> prompts) {
  std::complex<double> sum = 0.0;
  double wide = 0.0;
  for (const auto& p : prompts) {
    sum += p;
    wide += std::norm(p);
  }
  push(std::norm(sum), wide);
}

void Cn0Estimator::push(double nbp, double wbp) {
  nbp_.push_back(nbp);
  wbp_.push_back(wbp);
  const auto keep = static_cast<std::size_t>(std::max(config_.window_symbols, config_.fast_symbols));
  while (nbp_.size() > keep) {
    nbp_.pop_front();
    wbp_.pop_front();
  }
}

void Cn0Estimator::reset() {
  nbp_.clear();
  wbp_.clear();
}

double Cn0Estimator::from_ratio(double mu, int m, double t, double floor_dbhz, double ceiling_dbhz) {
  if (!(mu > 1.0)) return floor_dbhz;
  if (mu >= m) return ceiling_dbhz;
  const double v = 10.0 * std::log10((mu - 1.0) / (t * (m - mu)));
  return std::clamp(v, floor_dbhz, ceiling_dbhz);
}

std::optional<double> Cn0Estimator::ratio_estimate(int window) const {
  if (symbols() < config_.min_symbols) return std::nullopt;
  const std::size_t n = std::min(nbp_.size(), static_cast<std::size_t>(window));
  double nb = 0.0, wb = 0.0;
  for (std::size_t i = nbp_.size() - n; i < nbp_.size(); ++i) {
    nb += nbp_[i];
    wb += wbp_[i];
  }
  if (!(wb > 0.0)) return config_.floor_dbhz;
  return from_ratio(nb / wb, config_.epochs_per_symbol, config_.coherent_s, config_.floor_dbhz,
                    config_.ceiling_dbhz);
}

}  // namespace spamlab::rx
