#pragma once

#include <functional>
#include <map>
#include <string>

#include "carpet/process.hpp"

// Monte Carlo estimators over chain trajectories. Trajectories are indexed;
// trajectory i draws from the counter stream (seed, i), and sums are formed
// in fixed blocks of indices that are reduced in block order. Results are
// therefore bit-identical for any thread count, and --threads stays out of
// every config hash.

namespace carpet {

constexpr i64 kBlockSize = 8192;
constexpr double kNonExitTolerance = 1e-3;

struct RunOptions {
    i64 n_samples = 100'000;
    uint64_t seed = 12345;
    int threads = 1;
};

struct EstimateResult {
    double value = 0;
    double std_error = 0;
    i64 n_samples = 0;
    uint64_t seed = 0;
    std::string config_hash;
    double truncated_mass = 0;
    double non_exit_fraction = 0;
};

struct MultiResult {
    std::vector<double> value;
    std::vector<double> std_error;
    i64 n_samples = 0;
    uint64_t seed = 0;
    double non_exit_fraction = 0;
};

// engine: traj fills out[0..k) and reports whether the trajectory finished;
// unfinished trajectories are dropped from the averages and counted, and the
// run fails once their fraction passes the tolerance
MultiResult mc_run(const RunOptions& opts, size_t k,
                   const std::function<bool(rng::Stream&, double*)>& traj);

EstimateResult est_harmonic_measure(const JumpChainModel& mdl, const Cell& start,
                                    const std::function<bool(const Cell&)>& target,
                                    const RunOptions& opts);

EstimateResult est_harmonic_fn(const JumpChainModel& mdl, const Cell& start,
                               const std::function<double(const Cell&)>& f,
                               const RunOptions& opts);

EstimateResult est_green(const JumpChainModel& mdl, const Cell& start, const Cell& y,
                         const RunOptions& opts);

// shared trajectories for several targets at once
MultiResult est_green_many(const JumpChainModel& mdl, const Cell& start,
                           const std::vector<Cell>& targets, const RunOptions& opts);

EstimateResult est_exit_time(const JumpChainModel& mdl, const Cell& start,
                             const RunOptions& opts);

// exit cell counts for distribution comparisons; single threaded reduction
// over the same per-trajectory streams
struct ExitHistogram {
    std::map<uint64_t, i64> counts;  // exit cell key -> hits
    i64 n_samples = 0;
    i64 non_exits = 0;
};
ExitHistogram est_exit_histogram(const JumpChainModel& mdl, const Cell& start,
                                 const RunOptions& opts);

}  // namespace carpet
