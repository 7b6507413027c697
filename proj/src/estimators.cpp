#include "carpet/estimators.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace carpet {

namespace {

struct BlockSum {
    std::vector<double> s, s2;
    i64 done = 0, failed = 0;
};

}  // namespace

MultiResult mc_run(const RunOptions& opts, size_t k,
                   const std::function<bool(rng::Stream&, double*)>& traj) {
    if (opts.n_samples <= 0) throw std::invalid_argument("sample count out of range");
    const i64 n_blocks = (opts.n_samples + kBlockSize - 1) / kBlockSize;
    std::vector<BlockSum> blocks(static_cast<size_t>(n_blocks));

    auto run_block = [&](i64 b) {
        BlockSum& acc = blocks[static_cast<size_t>(b)];
        acc.s.assign(k, 0.0);
        acc.s2.assign(k, 0.0);
        std::vector<double> out(k);
        const i64 ilo = b * kBlockSize;
        const i64 ihi = std::min(opts.n_samples, ilo + kBlockSize);
        for (i64 i = ilo; i < ihi; ++i) {
            rng::Stream rs(opts.seed, static_cast<uint64_t>(i));
            std::fill(out.begin(), out.end(), 0.0);
            if (traj(rs, out.data())) {
                ++acc.done;
                for (size_t j = 0; j < k; ++j) {
                    acc.s[j] += out[j];
                    acc.s2[j] += out[j] * out[j];
                }
            } else {
                ++acc.failed;
            }
        }
    };

    const int threads =
        std::max(1, std::min<int>(opts.threads, static_cast<int>(n_blocks)));
    if (threads == 1) {
        for (i64 b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<i64> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const i64 b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    run_block(b);
                }
            });
        for (auto& th : pool) th.join();
    }

    MultiResult res;
    res.seed = opts.seed;
    res.value.assign(k, 0.0);
    res.std_error.assign(k, 0.0);
    std::vector<double> s2(k, 0.0);
    i64 done = 0, failed = 0;
    for (const BlockSum& b : blocks) {
        done += b.done;
        failed += b.failed;
        for (size_t j = 0; j < k; ++j) {
            res.value[j] += b.s[j];
            s2[j] += b.s2[j];
        }
    }
    res.n_samples = done;
    res.non_exit_fraction =
        static_cast<double>(failed) / static_cast<double>(opts.n_samples);
    if (res.non_exit_fraction > kNonExitTolerance)
        throw std::runtime_error("non-exit fraction exceeded");
    for (size_t j = 0; j < k; ++j) {
        const double mean = res.value[j] / static_cast<double>(done);
        const double var =
            std::max(0.0, s2[j] / static_cast<double>(done) - mean * mean);
        res.value[j] = mean;
        res.std_error[j] = std::sqrt(var / static_cast<double>(done));
    }
    return res;
}

namespace {

EstimateResult from_single(const JumpChainModel& mdl, const MultiResult& mr) {
    EstimateResult r;
    r.value = mr.value[0];
    r.std_error = mr.std_error[0];
    r.n_samples = mr.n_samples;
    r.seed = mr.seed;
    r.config_hash = mdl.hash();
    r.truncated_mass = mdl.truncated_mass_bound();
    r.non_exit_fraction = mr.non_exit_fraction;
    return r;
}

}  // namespace

EstimateResult est_harmonic_fn(const JumpChainModel& mdl, const Cell& start,
                               const std::function<double(const Cell&)>& f,
                               const RunOptions& opts) {
    if (!mdl.is_interior(start.k, start.m))
        throw std::invalid_argument("start cell not interior");
    auto traj = [&](rng::Stream& rs, double* out) {
        ExitRecord rec = sample_exit(mdl, rs, start);
        if (!rec.exited) return false;
        out[0] = f(rec.cell);
        return true;
    };
    return from_single(mdl, mc_run(opts, 1, traj));
}

EstimateResult est_harmonic_measure(const JumpChainModel& mdl, const Cell& start,
                                    const std::function<bool(const Cell&)>& target,
                                    const RunOptions& opts) {
    return est_harmonic_fn(
        mdl, start, [&](const Cell& c) { return target(c) ? 1.0 : 0.0; }, opts);
}

EstimateResult est_green(const JumpChainModel& mdl, const Cell& start, const Cell& y,
                         const RunOptions& opts) {
    if (!mdl.is_interior(start.k, start.m) || !mdl.is_interior(y.k, y.m))
        throw std::invalid_argument("cell not interior");
    const double scale = mdl.holding_mean() / mdl.cell_mass();
    auto traj = [&](rng::Stream& rs, double* out) {
        i64 visits = 0;
        ExitRecord rec = run_to_exit(mdl, rs, start, [&](const Cell& c) {
            if (c.k == y.k && c.m == y.m) ++visits;
        });
        if (!rec.exited) return false;
        out[0] = static_cast<double>(visits) * scale;
        return true;
    };
    return from_single(mdl, mc_run(opts, 1, traj));
}

MultiResult est_green_many(const JumpChainModel& mdl, const Cell& start,
                           const std::vector<Cell>& targets, const RunOptions& opts) {
    if (!mdl.is_interior(start.k, start.m))
        throw std::invalid_argument("start cell not interior");
    for (const Cell& y : targets)
        if (!mdl.is_interior(y.k, y.m))
            throw std::invalid_argument("target cell not interior");
    const double scale = mdl.holding_mean() / mdl.cell_mass();
    // targets are few; linear scan against a small key list
    std::vector<uint64_t> keys;
    keys.reserve(targets.size());
    for (const Cell& y : targets) keys.push_back(cell_key(y.k, y.m));
    auto traj = [&](rng::Stream& rs, double* out) {
        ExitRecord rec = run_to_exit(mdl, rs, start, [&](const Cell& c) {
            const uint64_t key = cell_key(c.k, c.m);
            for (size_t j = 0; j < keys.size(); ++j)
                if (keys[j] == key) out[j] += scale;
        });
        return rec.exited;
    };
    return mc_run(opts, targets.size(), traj);
}

EstimateResult est_exit_time(const JumpChainModel& mdl, const Cell& start,
                             const RunOptions& opts) {
    if (!mdl.is_interior(start.k, start.m))
        throw std::invalid_argument("start cell not interior");
    const double h = mdl.holding_mean();
    auto traj = [&](rng::Stream& rs, double* out) {
        ExitRecord rec = sample_exit(mdl, rs, start);
        if (!rec.exited) return false;
        out[0] = static_cast<double>(rec.steps) * h;
        return true;
    };
    return from_single(mdl, mc_run(opts, 1, traj));
}

ExitHistogram est_exit_histogram(const JumpChainModel& mdl, const Cell& start,
                                 const RunOptions& opts) {
    if (!mdl.is_interior(start.k, start.m))
        throw std::invalid_argument("start cell not interior");
    ExitHistogram hist;
    for (i64 i = 0; i < opts.n_samples; ++i) {
        rng::Stream rs(opts.seed, static_cast<uint64_t>(i));
        ExitRecord rec = sample_exit(mdl, rs, start);
        if (!rec.exited) {
            ++hist.non_exits;
            continue;
        }
        ++hist.counts[cell_key(rec.cell.k, rec.cell.m)];
        ++hist.n_samples;
    }
    if (static_cast<double>(hist.non_exits) >
        kNonExitTolerance * static_cast<double>(opts.n_samples))
        throw std::runtime_error("non-exit fraction exceeded");
    return hist;
}

}  // namespace carpet
