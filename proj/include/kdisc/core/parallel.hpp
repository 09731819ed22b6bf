#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kdisc {

/// Caps the worker count used by every parallel kernel. 0 keeps the default.
inline void set_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

inline int max_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Selects between the serial reference path and the OpenMP path of a kernel.
enum class Exec { Serial, Parallel };

}  // namespace kdisc
