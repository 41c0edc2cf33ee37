#pragma once

#include <mutex>

namespace spamlab::detail {

// FFTW's planner is not re-entrant; every plan create/destroy goes through this.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace spamlab::detail
