#pragma once

#include "spamlab/types.hpp"

namespace spamlab {

/// Measurements from one tracking channel at one epoch.
struct Observables {
  int svid = 0;
  Band band = Band::E1;
  double pseudorange_m = 0.0;
  double doppler_hz = 0.0;
  double code_phase_chips = 0.0;
  double carrier_phase_cycles = 0.0;
  double epoch_s = 0.0;          // scenario time of the measurement
  double receive_clock_s = 0.0;  // receiver clock reading at epoch_s
  double transmit_time_s = 0.0;  // decoded satellite clock reading at emission
};

}  // namespace spamlab
