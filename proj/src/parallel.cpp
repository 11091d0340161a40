#include "ehmec/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ehmec {

int resolve_threads(int requested) {
#ifdef _OPENMP
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  (void)requested;
  return 1;
#endif
}

}  // namespace ehmec
