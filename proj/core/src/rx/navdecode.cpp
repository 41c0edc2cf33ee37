#include "spamlab/rx/navdecode.hpp"

#include <cmath>

#include "spamlab/navdata.hpp"

namespace spamlab::rx {

NavDecoder::NavDecoder(std::uint64_t nav_seed, int svid, Band band, NavDecoderConfig config)
    : seed_(nav_seed), svid_(svid), band_(band), config_(config) {}

int NavDecoder::periods_per_symbol() const {
  const auto& info = band_info(band_);
  return static_cast<int>(std::lround(info.chip_rate_hz / (kSymbolRateSps * info.code_length)));
}

void NavDecoder::reset() {
  signs_.clear();
  starts_.clear();
  recent_errors_.clear();
  offset_.reset();
  polarity_ = 1;
}

void NavDecoder::push(long long start_period, int sign) {
  signs_.push_back(sign >= 0 ? 1 : -1);
  starts_.push_back(start_period);
  const auto keep = static_cast<std::size_t>(config_.match_symbols);
  while (signs_.size() > keep) {
    signs_.pop_front();
    starts_.pop_front();
  }
  if (!offset_) return;

  const long long pps = periods_per_symbol();
  const long long tx_period = start_period + *offset_;
  int err = 0;
  if (tx_period % pps != 0) {
    err = 1;
  } else {
    err = nav_symbol(seed_, svid_, band_, tx_period / pps) * polarity_ != signs_.back();
  }
  recent_errors_.push_back(err);
  while (static_cast<int>(recent_errors_.size()) > config_.verify_symbols) recent_errors_.pop_front();
  int total = 0;
  for (int e : recent_errors_) total += e;
  if (total > config_.max_mismatches) {
    // Alignment no longer holds (e.g. a different emitter took over the
    // loop); start over with fresh symbols.
    offset_.reset();
    recent_errors_.clear();
    signs_.clear();
    starts_.clear();
  }
}

bool NavDecoder::try_decode(long long center_index, long long halfwidth) {
  if (offset_) return true;
  if (!ready()) return false;
  const long long pps = periods_per_symbol();
  const std::size_t n = signs_.size();
  // Local symbols must be contiguous for a rigid alignment.
  for (std::size_t i = 1; i < n; ++i)
    if (starts_[i] - starts_[i - 1] != pps) return false;

  for (long long d = 0; d <= halfwidth; ++d) {
    for (long long cand : {center_index - d, center_index + d}) {
      if (d == 0 && cand != center_index) continue;
      const long long first = cand - static_cast<long long>(n - 1);
      const int pol = nav_symbol(seed_, svid_, band_, first) * signs_[0];
      bool ok = true;
      for (std::size_t i = 1; i < n && ok; ++i)
        ok = nav_symbol(seed_, svid_, band_, first + static_cast<long long>(i)) * pol == signs_[i];
      if (ok) {
        polarity_ = pol;
        offset_ = cand * pps - starts_.back();
        recent_errors_.clear();
        return true;
      }
      if (d == 0) break;
    }
  }
  return false;
}

}  // namespace spamlab::rx
