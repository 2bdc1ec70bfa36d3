// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/execution.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fstrisk {

int parallel_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fstrisk
