#pragma once

#include <cstddef>

#include "fednam/config.hpp"

namespace fednam {

// Wall-clock comparison of the two uncertainty paths on one batch.
struct BenchReport {
    double t_dla = 0.0;      // seconds per batch, median over repetitions
    double t_mc = 0.0;       // seconds for all M dropout passes, median
    std::size_t batch = 0;   // N, rows timed
    int passes = 0;          // M
    int reps = 0;            // measured repetitions (>= 5)
    double ratio = 0.0;      // t_mc / t_dla
};

// Times the width path (one forward, one input-gradient backward, a
// median scan) against M-pass MC dropout on an identical pre-loaded
// batch: one unmeasured warm-up of each, then bench_reps measured
// repetitions, median wall time on a monotonic clock. M < 2 is a config
// error since a single pass has no spread to estimate.
BenchReport bench_uncertainty(const RunConfig& config);

}  // namespace fednam
