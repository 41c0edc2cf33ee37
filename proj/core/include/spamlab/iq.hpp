#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include "spamlab/types.hpp"

namespace spamlab {

using Sample = std::complex<double>;

/// Complex baseband samples for one band, starting at scenario time `epoch_s`.
struct IqBuffer {
  std::vector<Sample> samples;
  double sample_rate_hz = 0.0;
  double epoch_s = 0.0;
  Band band = Band::E1;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
  double time_of(std::size_t index) const { return epoch_s + static_cast<double>(index) / sample_rate_hz; }
};

/// Zero-filled buffer holding round(duration * rate) samples.
IqBuffer make_buffer(Band band, double sample_rate_hz, double epoch_s, double duration_s);

/// Writes little-endian interleaved float32 I/Q to `path` and a `key=value`
/// sidecar at `path` + ".meta".
void write_iq(const std::filesystem::path& path, const IqBuffer& buffer);
IqBuffer read_iq(const std::filesystem::path& path);

}  // namespace spamlab
