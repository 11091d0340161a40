#ifndef EHMEC_PARALLEL_HPP_
#define EHMEC_PARALLEL_HPP_

namespace ehmec {

// Maps a requested thread count to an effective one: 0 means "all available",
// anything else is clamped to >= 1. Returns 1 when built without OpenMP.
int resolve_threads(int requested);

}  // namespace ehmec

#endif  // EHMEC_PARALLEL_HPP_
