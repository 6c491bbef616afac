#include "volsplat/common.hpp"

#include <cmath>

#include <omp.h>

namespace volsplat {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InvalidRange: return "invalid range";
    case ErrorKind::BehindCamera: return "behind camera";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::WeightLoad: return "weight load error";
    case ErrorKind::File: return "file error";
    case ErrorKind::Spec: return "scene spec error";
  }
  return "error";
}

double standard_normal(Rng& rng) {
  // Box-Muller on the portable uniform.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void set_thread_count(int threads) {
  if (threads <= 0) threads = omp_get_num_procs();
  omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace volsplat
