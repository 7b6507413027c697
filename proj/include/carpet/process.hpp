#pragma once

#include "carpet/geometry.hpp"
#include "carpet/rng.hpp"

// Jump chain approximating the subordinate diffusion at cell resolution n.
// States are the kept level-n squares inside a rectangular window: the
// region's bounding box padded by `halo` region-level cells, so that exits
// land on real carpet outside the region. Jumps go from cell center to cell
// center with weight |c_x - c_y|^{-d_alpha}; within the window the law is the
// renormalized kernel, and an extended sampler keeps the untruncated law for
// cross-checks, reporting jumps beyond the window instead of conditioning
// them away. Holding times are exponential with a level-dependent mean, so
// occupation sums scale like the continuous-time object.

namespace carpet {

struct ModelConfig {
    int level = 4;
    double alpha = 0.5;
    double dw = 2.097;
    double t0 = 1.0;
    int halo = 1;  // window padding in region-level cells
};

constexpr i64 kInteriorCap = 1'000'000;
constexpr i64 kStepCap = 10'000'000;

class JumpChainModel {
public:
    JumpChainModel(const Region& d, const ModelConfig& cfg);

    const Region& region() const { return d_; }
    const ModelConfig& config() const { return cfg_; }
    const FractalParams& params() const { return params_; }

    int level() const { return cfg_.level; }
    double holding_mean() const { return holding_; }
    double cell_mass() const { return mass_; }

    i64 win_klo() const { return klo_; }
    i64 win_khi() const { return khi_; }
    i64 win_mlo() const { return mlo_; }
    i64 win_mhi() const { return mhi_; }

    bool in_window(i64 k, i64 m) const {
        return k >= klo_ && k <= khi_ && m >= mlo_ && m <= mhi_;
    }
    bool is_state(i64 k, i64 m) const { return in_window(k, m) && cell_present(k, m); }
    bool is_interior(i64 k, i64 m) const {
        return is_state(k, m) && d_.contains_lattice(k, m, cfg_.level);
    }

    i64 interior_count() const { return interior_count_; }
    i64 state_count() const;  // counted on first call

    HalfPoint center(const Cell& c) const {
        return HalfPoint{cfg_.level, 2 * c.k + 1, 2 * c.m + 1};
    }
    // kept level-n cell whose closed square contains p; on grid lines the
    // lexicographically least interior candidate wins, then any kept one
    Cell cell_at(const Point& p) const;

    // renormalized in-window jump; the law matches the linear system rows
    Cell jump(rng::Stream& rs, const Cell& from) const;

    // untruncated-kernel jump (ring radii up to the extended cap); sets
    // `beyond` instead of rejecting when the landing cell is outside the
    // window, leaving the cell at the true landing site
    Cell jump_extended(rng::Stream& rs, const Cell& from, bool& beyond) const;

    // per-jump kernel mass beyond the window, upper bound from a rim-nearest
    // interior cell; diagnostic only
    double truncated_mass_bound() const { return truncated_; }

    // unnormalized weight between distinct window cells, lattice units
    double pair_weight(const Cell& x, const Cell& y) const;

    std::string hash() const;

private:
    Cell ring_site(rng::Stream& rs, const Cell& from, i64 k) const;

    Region d_;  // owned copy; models outlive the regions they are built from
    ModelConfig cfg_;
    FractalParams params_;
    double holding_ = 0, mass_ = 0, truncated_ = 0;
    i64 klo_ = 0, khi_ = 0, mlo_ = 0, mhi_ = 0;
    i64 kmax_ = 0;
    i64 interior_count_ = 0;
    std::vector<double> ring_cdf_;      // cumulative 8 k^{1-d_alpha}, k = 1..kmax
    std::vector<double> ring_cdf_ext_;  // same, up to the extended cap
    mutable i64 state_count_ = -1;
};

struct ExitRecord {
    Cell cell;
    i64 steps = 0;
    bool exited = false;
};

// runs the chain until it leaves the region; on_visit(cell) fires for every
// interior cell occupied, the start included
template <class F>
ExitRecord run_to_exit(const JumpChainModel& mdl, rng::Stream& rs, const Cell& start,
                       F&& on_visit) {
    ExitRecord rec;
    Cell at = start;
    while (rec.steps < kStepCap) {
        on_visit(at);
        Cell next = mdl.jump(rs, at);
        ++rec.steps;
        if (!mdl.is_interior(next.k, next.m)) {
            rec.cell = next;
            rec.exited = true;
            return rec;
        }
        at = next;
    }
    return rec;
}

ExitRecord sample_exit(const JumpChainModel& mdl, rng::Stream& rs, const Cell& start);

// one-sided stable subordinator of index beta in (0,1), E e^{-l S} = e^{-l^beta}
double stable_subordinator_unit(rng::Stream& rs, double beta);
double stable_subordinator(rng::Stream& rs, double beta, double t);

// Nearest-neighbour lazy walk on the extended lattice, time-changed by the
// subordinator and observed on a uniform grid; an independent discretization
// of the same process, used to cross-check the jump chain law. Observations
// beyond the window (or subordinator bursts too large to walk) end the
// trajectory as `far`.
struct WalkConfig {
    double dt_factor = 0.5;      // observation spacing over the holding mean
    double far_diameters = 4.0;  // burst cutoff in window diagonals
    i64 obs_cap = 10'000'000;
};

struct WalkExit {
    Cell cell;
    bool far = false;
    bool exited = false;
    i64 observations = 0;
    i64 walk_steps = 0;
};

WalkExit subordinated_walk_exit(const JumpChainModel& mdl, rng::Stream& rs,
                                const Cell& start, const WalkConfig& wcfg);

}  // namespace carpet
