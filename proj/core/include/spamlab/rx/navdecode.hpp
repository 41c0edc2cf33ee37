#pragma once

// Symbol-sign recovery reduced to epoch alignment: the demodulated sign
// sequence is matched (up to the Costas sign ambiguity) against the known
// symbol stream to find the transmit time of each code period.

#include <cstdint>
#include <deque>
#include <optional>

#include "spamlab/types.hpp"

namespace spamlab::rx {

struct NavDecoderConfig {
  int match_symbols = 40;
  int verify_symbols = 20;
  int max_mismatches = 3;  // within the verify window before the alignment is dropped
};

class NavDecoder {
 public:
  NavDecoder() = default;
  NavDecoder(std::uint64_t nav_seed, int svid, Band band, NavDecoderConfig config = {});

  /// Appends one demodulated symbol. `start_period` is the local code period
  /// index at which the symbol began.
  void push(long long start_period, int sign);

  /// Searches transmit symbol indices within +-halfwidth of `center_index`
  /// (the expected transmit index of the most recent symbol).
  bool try_decode(long long center_index, long long halfwidth);

  bool decoded() const { return offset_.has_value(); }
  /// Transmit code period index = local period + offset.
  std::optional<long long> period_offset() const { return offset_; }
  int polarity() const { return polarity_; }
  std::size_t symbols() const { return signs_.size(); }
  bool ready() const { return static_cast<int>(signs_.size()) >= config_.match_symbols; }
  void reset();

 private:
  int periods_per_symbol() const;

  std::uint64_t seed_ = 0;
  int svid_ = 0;
  Band band_ = Band::E1;
  NavDecoderConfig config_;
  std::deque<int> signs_;
  std::deque<long long> starts_;
  std::deque<int> recent_errors_;
  std::optional<long long> offset_;
  int polarity_ = 1;
};

}  // namespace spamlab::rx
