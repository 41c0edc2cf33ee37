#pragma once

// Per-satellite spreading codes. The built-in generator is a keyed
// shift-register (Gold-style) family truncated to the band length; real ICD
// tables can be supplied through a code table file and override it per svid.

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "spamlab/types.hpp"

namespace spamlab::codegen {

inline constexpr std::uint64_t kDefaultSeed = 0;

struct PrnCode {
  int svid = 0;
  Band band = Band::E1;
  std::vector<std::int8_t> chips;  // each +1 or -1

  int length() const { return static_cast<int>(chips.size()); }
};

/// Deterministic code for (svid, band, seed). Throws DomainError for svid
/// outside 1..36.
PrnCode generate_code(int svid, Band band, std::uint64_t seed = kDefaultSeed);

/// Parses a code table file (`<band>,<svid>,<hex>` per line, `#` comments).
/// Throws ParseError naming the line on malformed content.
std::vector<PrnCode> load_codes(const std::filesystem::path& path);

/// Circular cross-correlation over all lags, normalized by the code length.
/// Frequency-domain implementation; both codes must have equal length.
std::vector<double> circular_correlation(const PrnCode& a, const PrnCode& b);

/// Code source: loaded table entries first, generator fallback otherwise.
/// Every (svid, band) is materialized at construction; immutable afterwards.
class CodeBook {
 public:
  explicit CodeBook(std::uint64_t seed = kDefaultSeed) : CodeBook({}, seed) {}
  CodeBook(std::vector<PrnCode> loaded, std::uint64_t seed = kDefaultSeed);

  const PrnCode& code(int svid, Band band) const;
  std::uint64_t seed() const { return seed_; }
  bool is_loaded(int svid, Band band) const { return loaded_.count({svid, band}) > 0; }

 private:
  std::uint64_t seed_;
  std::map<std::pair<int, Band>, bool> loaded_;
  std::map<std::pair<int, Band>, PrnCode> codes_;
};

}  // namespace spamlab::codegen
