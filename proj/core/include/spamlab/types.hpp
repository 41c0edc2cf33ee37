#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace spamlab {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;

enum class Band : std::uint8_t { E1, E5B };

/// Static signal parameters of a band. E1 is BOC(1,1) data component only,
/// E5B is an abstract BPSK lane.
struct BandInfo {
  Band band;
  double chip_rate_hz;
  int code_length;
  double carrier_hz;
  bool boc;

  double code_period_s() const { return code_length / chip_rate_hz; }
};

inline constexpr BandInfo kE1{Band::E1, 1.023e6, 4092, 1575.42e6, true};
inline constexpr BandInfo kE5B{Band::E5B, 10.23e6, 10230, 1207.14e6, false};

inline constexpr const BandInfo& band_info(Band b) { return b == Band::E1 ? kE1 : kE5B; }

/// Navigation symbol rate shared by both bands.
inline constexpr int kSymbolRateSps = 250;

/// Largest commanded Doppler magnitude accepted anywhere in the chain.
inline constexpr double kMaxDopplerHz = 10000.0;

/// Minimum complex sample rate for a band: twice the chip rate plus Doppler margin.
inline constexpr double min_sample_rate(Band b) {
  return 2.0 * (band_info(b).chip_rate_hz + kMaxDopplerHz);
}

std::string_view to_string(Band b);
std::optional<Band> parse_band(std::string_view s);

inline constexpr int kMinSvid = 1;
inline constexpr int kMaxSvid = 36;

}  // namespace spamlab
