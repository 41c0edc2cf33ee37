#pragma once

// Two-stage parallel code phase search: coarse FFT correlation over every
// code phase and a Doppler grid, then a time-domain refinement around the
// winning cell.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "spamlab/codegen.hpp"
#include "spamlab/iq.hpp"
#include "spamlab/sigsynth.hpp"

namespace spamlab::rx {

struct DopplerWindow {
  double center_hz = 0.0;
  double halfwidth_hz = 5000.0;
};

/// Restricts the coarse search to delays within +-halfwidth of center
/// (scenario-time convention, chips).
struct CodeWindow {
  double center_chips = 0.0;
  double halfwidth_chips = 0.0;
};

struct AcquisitionConfig {
  double coarse_step_hz = 500.0;
  double fine_step_hz = 50.0;
  double threshold = 2.0;
  int noncoherent = 4;        // 1 ms coherent blocks summed in power
  double exclusion_chips = 1.0;
  int exclusion_bins = 1;
  int max_secondary_peaks = 4;
  int fine_blocks = 16;       // 1 ms blocks used by the fine stage
};

struct SecondaryPeak {
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;
  double relative_magnitude = 0.0;  // amplitude ratio to the primary peak
};

struct AcquisitionResult {
  int svid = 0;
  Band band = Band::E1;
  bool detected = false;
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;  // scenario-time delay convention
  double peak_metric = 0.0;       // peak power over the best competitor in the same Doppler bin
  std::vector<SecondaryPeak> secondary_peaks;
  double epoch_s = 0.0;           // epoch of the searched buffer
  bool refined = false;
};

/// Holds FFT plans and replica spectra. Not thread-safe; use one per thread.
class Acquirer {
 public:
  explicit Acquirer(AcquisitionConfig config = {});
  ~Acquirer();
  Acquirer(const Acquirer&) = delete;
  Acquirer& operator=(const Acquirer&) = delete;

  const AcquisitionConfig& config() const { return config_; }
  void set_config(const AcquisitionConfig& c) { config_ = c; }

  /// Throws DomainError for an empty window or a buffer shorter than two
  /// code periods.
  AcquisitionResult coarse(const IqBuffer& iq, const codegen::PrnCode& code, const DopplerWindow& window,
                           const std::optional<CodeWindow>& code_window = std::nullopt);

  /// Throws ContractViolation when `coarse_result` is not a detection.
  AcquisitionResult fine(const IqBuffer& iq, const codegen::PrnCode& code, const AcquisitionResult& coarse_result);

  /// Number of samples the two stages read from the start of a buffer.
  std::size_t samples_needed(Band band, double sample_rate_hz) const;

 private:
  struct Plan;
  Plan& plan_for(int n);
  const std::vector<std::complex<double>>& replica_spectrum(const codegen::PrnCode& code, double fs, int n);

  AcquisitionConfig config_;
  std::map<int, std::unique_ptr<Plan>> plans_;
  std::map<std::tuple<int, Band, double, int, int, std::uint64_t>, std::vector<std::complex<double>>> spectra_;
};

/// Free-function forms of the two stages (one-shot Acquirer).
AcquisitionResult acquire_coarse(const IqBuffer& iq, const codegen::PrnCode& code, const DopplerWindow& window,
                                 const AcquisitionConfig& config = {});
AcquisitionResult acquire_fine(const IqBuffer& iq, const codegen::PrnCode& code, const AcquisitionResult& coarse,
                               const AcquisitionConfig& config = {});

/// Delay conversion between the scenario-time convention and a buffer's
/// own sample frame.
double delay_to_buffer_chips(double delay_chips, double epoch_s, Band band);
double buffer_to_delay_chips(double buffer_chips, double epoch_s, Band band);

/// Smallest signed difference a - b on a circle of circumference `length`.
double circular_diff(double a, double b, double length);

}  // namespace spamlab::rx
