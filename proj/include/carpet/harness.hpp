#pragma once

#include "carpet/estimators.hpp"

// Verification harness: builds the boundary scaffolding around a boundary
// point (the nested cell neighbourhoods, the ring of touching cells, the
// contact midpoints and their inward witnesses, the comparison cell), then
// runs estimator experiments whose pass criteria are discretization
// stability: every measured constant is recomputed one level finer and must
// stay within a factor-2 band. All set membership used by the experiments is
// decided in exact integer arithmetic on the half grid.

namespace carpet {

// exit-site classifier: six angular sectors of width pi/3 around Q, always
// intersected with the outside of B(Q, 2r); bit j selects sector j, where
// sector j covers angles [-pi + j*pi/3, -pi + (j+1)*pi/3)
struct HarmonicSpec {
    uint32_t sectors = 0x3F;
};

// sector index of a model cell's center around Q, exact in integers; centers
// sit on the odd half grid, so they never land on a sector boundary
int exit_sector(const Point& q, const Cell& c, int level);

struct CheckOptions {
    int level = 5;
    i64 n_samples = 100'000;
    uint64_t seed = 12345;
    int threads = 1;
    double alpha = 0.5;
    double dw = 2.097;
    double t0 = 1.0;
    int halo = 1;
    size_t grid_cap = 200;  // x-grid size cap, every-kth lex subsampling
};

// Scaffolding around Q in D at scale r = 3^-N. Sizes follow the one-ninth
// pattern: the inner neighbourhoods live at levels N+1 and N+2, the touching
// ring at N+3 with side w = 3^{-N-3}, witnesses offset by w/3, and the
// comparison cell at N+4.
struct BhpGeometry {
    Region domain;  // D
    Point q;
    int n_scale = 0;  // N with 3^-N = r
    double r = 0;
    double w = 0;  // 3^{-N-3}, the ring cell side

    std::vector<Cell> omega_cells;   // level N+1
    std::vector<Cell> omega2_cells;  // level N+2
    Region omega;

    Point a_point;  // interior witness: dist to D^c = 3w, dist to omega2 = w

    std::vector<Cell> ring;  // touching cells at level N+3, lex order
    size_t ring_deep = 0;    // index of the ring cell >= 8w from the boundary
    std::vector<HalfPoint> contact;     // contact midpoints S_i, scale N+3
    std::vector<uint8_t> at_corner;     // contact degenerates to a corner
    std::vector<HalfPoint> witness;     // A_i, scale N+4
    Cell t_cell;                        // level N+4 comparison cell

    // membership of a model cell (level >= N+3) through its center
    bool cell_in_omega(const Cell& c, int level) const;
    bool cell_in_domain(const Cell& c, int level) const;
    bool cell_in_delta(const Cell& c, int level) const;  // some contact ball, in D, off omega
    bool cell_in_b1(const Cell& c, int level) const;     // ball around contact[ring_deep]
    bool cell_in_k(const Cell& c, int level) const;      // omega | delta | (D^c & B(Q,2r))
};

// pre: Q on the boundary of D, r a power of three in (0, R0/2)
BhpGeometry build_bhp_geometry(const Region& d, const Point& q, double r);

struct BhpReport {
    std::string name;
    int level = 0;
    double r = 0;
    double alpha = 0;
    double measured_constant = 0;  // at `level`
    double measured_next = 0;      // at level + 1
    double cross_level_ratio = 0;
    double stderr_band = 0;  // conservative band at the measured constant
    bool pass = false;
    bool decided = true;  // false: some estimate indistinguishable from zero
    std::string note;
    std::vector<std::pair<std::string, double>> details;
    std::vector<std::string> config_hashes;
};

// exit mass near Q stays above a fixed floor for starts near Q
BhpReport check_lemma10(const Region& d, const Point& q, double r, const CheckOptions& opt);

// r^{d - alpha dw/2} G(x, A_{r/2}) <= c * exit mass near Q, x off B(Q, r)
BhpReport check_lemma11(const Region& d, const Point& q, double r, const CheckOptions& opt);

// the reverse bound for x off B(Q, 2r), with boundary-layer series diagnostics
BhpReport check_lemma12(const Region& d, const Point& q, double r, const CheckOptions& opt);

// u(x) <= c u(A) over B(Q, 5r/4) for u vanishing near Q
BhpReport check_carleson(const Region& omega, const Point& q, double r,
                         const HarmonicSpec& spec, const CheckOptions& opt);

// two-sided ratio bound near Q for a pair of vanishing harmonic functions,
// normalized at the interior witness
BhpReport check_bhp(const Region& d, const Point& q, double r, const HarmonicSpec& spec_u,
                    const HarmonicSpec& spec_v, const CheckOptions& opt);

// three disjoint sector pairs, a same-spec null run and a swapped rerun
std::vector<BhpReport> run_bhp_suite(const Region& d, const Point& q, double r,
                                     const CheckOptions& opt);

// exit split through the touching ring: ball-ratio band, additive split,
// exit-time double ratio, and the witness mass floor
BhpReport check_step_decomposition(const BhpGeometry& geom, const HarmonicSpec& spec,
                                   const CheckOptions& opt);

// mean ball-exit time against the ball radius on a fixed interior patch;
// the log-log slope must match alpha*dw/2
struct ScalingReport {
    std::vector<double> radii;
    std::vector<double> mean_exit_time;
    std::vector<double> std_error;
    double slope = 0;
    double slope_target = 0;
    bool pass = false;
    std::string config_hash;
};
ScalingReport run_scaling(const CheckOptions& opt);

}  // namespace carpet
