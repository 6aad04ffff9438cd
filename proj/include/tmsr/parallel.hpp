#pragma once

namespace tmsr {

// Number of worker threads the kernels may use. Read once from TMSR_THREADS;
// 0 or 1 selects sequential execution. Unset means "all available".
// Kernels partition work so each output element is produced by exactly one
// thread in a fixed order, so results do not depend on this value.
int thread_count();

// Overrides TMSR_THREADS for the rest of the process (tests, benchmarks).
void set_thread_count(int threads);

}  // namespace tmsr
