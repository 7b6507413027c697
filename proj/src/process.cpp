#include "carpet/process.hpp"

#include <cmath>
#include <stdexcept>

namespace carpet {

JumpChainModel::JumpChainModel(const Region& d, const ModelConfig& cfg)
    : d_(d), cfg_(cfg), params_(make_params(cfg.alpha, cfg.dw)) {
    if (cfg.level < d.cell_level || cfg.level > kMaxLevel)
        throw std::invalid_argument("level out of range");
    if (cfg.halo < 1) throw std::invalid_argument("halo out of range");
    if (!(cfg.t0 > 0)) throw std::invalid_argument("t0 out of range");

    const int sub = cfg.level - d.cell_level;
    interior_count_ = static_cast<i64>(d.cells.size()) << (3 * sub);
    if (interior_count_ > kInteriorCap) throw std::runtime_error("level too fine");

    holding_ = cfg.t0 * std::pow(3.0, -cfg.level * cfg.alpha * cfg.dw / 2);
    mass_ = cell_measure(cfg.level);

    const i64 f = pow3(sub);
    const Cell lo = d.lattice_bounds_lo(), hi = d.lattice_bounds_hi();
    klo_ = (lo.k - cfg.halo) * f;
    khi_ = (hi.k + 1 + cfg.halo) * f - 1;
    mlo_ = (lo.m - cfg.halo) * f;
    mhi_ = (hi.m + 1 + cfg.halo) * f - 1;
    kmax_ = std::max(khi_ - klo_, mhi_ - mlo_);

    const double expo = 1 - params_.d_alpha;
    ring_cdf_.resize(kmax_);
    double acc = 0;
    for (i64 k = 1; k <= kmax_; ++k) {
        acc += 8 * std::pow(static_cast<double>(k), expo);
        ring_cdf_[k - 1] = acc;
    }
    const i64 kext = std::min<i64>(10 * kmax_, 300'000);
    ring_cdf_ext_.resize(kext);
    acc = 0;
    for (i64 k = 1; k <= kext; ++k) {
        acc += 8 * std::pow(static_cast<double>(k), expo);
        ring_cdf_ext_[k - 1] = acc;
    }

    // worst-case per-jump mass beyond the window: compare an integral tail
    // bound against the exact near-field sum from a rim-nearest interior cell
    const i64 rim = static_cast<i64>(cfg.halo) * f;
    const double da = params_.d_alpha;
    const double tail = 8 * (std::pow(static_cast<double>(rim), 1 - da) +
                             std::pow(static_cast<double>(rim), 2 - da) / (da - 2));
    Cell x0 = cell_from_key(d.cells.front());
    x0 = Cell{x0.k * f, x0.m * f};
    double near = 0;
    const i64 cap = std::min<i64>(rim - 1, 512);
    for (i64 k = 1; k <= cap; ++k)
        for (i64 j = 0; j < 8 * k; ++j) {
            const i64 side = j / (2 * k), t = j % (2 * k);
            i64 dk, dm;
            switch (side) {
                case 0: dk = -k + t; dm = -k; break;
                case 1: dk = k; dm = -k + t; break;
                case 2: dk = k - t; dm = k; break;
                default: dk = -k; dm = k - t; break;
            }
            if (!cell_present(x0.k + dk, x0.m + dm)) continue;
            near += std::pow(static_cast<double>(dk * dk + dm * dm), -da / 2);
        }
    truncated_ = near > 0 ? tail / (near + tail) : 1.0;
}

i64 JumpChainModel::state_count() const {
    if (state_count_ >= 0) return state_count_;
    const int sub = cfg_.level - d_.cell_level;
    const i64 f = pow3(sub);
    i64 blocks = 0;
    for (i64 k = floor_div(klo_, f); k <= floor_div(khi_, f); ++k)
        for (i64 m = floor_div(mlo_, f); m <= floor_div(mhi_, f); ++m)
            if (cell_present(k, m)) ++blocks;
    state_count_ = blocks << (3 * sub);
    return state_count_;
}

Cell JumpChainModel::cell_at(const Point& p) const {
    const int s = std::max(p.resolution, cfg_.level);
    const i64 q = pow3(s - cfg_.level);
    const i64 px = p.ix * pow3(s - p.resolution), py = p.iy * pow3(s - p.resolution);
    const i64 cx = floor_div(px, q), cy = floor_div(py, q);
    const bool bx = px % q == 0, by = py % q == 0;
    Cell fallback{0, 0};
    bool have_fallback = false;
    for (i64 k : {bx ? cx - 1 : cx, cx}) {
        for (i64 m : {by ? cy - 1 : cy, cy}) {
            if (is_interior(k, m)) return Cell{k, m};
            if (!have_fallback && is_state(k, m)) {
                fallback = Cell{k, m};
                have_fallback = true;
            }
        }
    }
    if (have_fallback) return fallback;
    throw std::invalid_argument("point not on a kept window cell");
}

Cell JumpChainModel::ring_site(rng::Stream& rs, const Cell& from, i64 k) const {
    const i64 j = static_cast<i64>(rs.below(static_cast<uint64_t>(8 * k)));
    const i64 side = j / (2 * k), t = j % (2 * k);
    switch (side) {
        case 0: return Cell{from.k - k + t, from.m - k};
        case 1: return Cell{from.k + k, from.m - k + t};
        case 2: return Cell{from.k + k - t, from.m + k};
        default: return Cell{from.k - k, from.m + k - t};
    }
}

namespace {

i64 pick_ring(rng::Stream& rs, const std::vector<double>& cdf) {
    const double u = rs.uniform() * cdf.back();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return static_cast<i64>(it - cdf.begin()) + 1;
}

}  // namespace

Cell JumpChainModel::jump(rng::Stream& rs, const Cell& from) const {
    for (;;) {
        const i64 k = pick_ring(rs, ring_cdf_);
        const Cell c = ring_site(rs, from, k);
        const i64 dk = c.k - from.k, dm = c.m - from.m;
        const i64 r2 = dk * dk + dm * dm;
        if (r2 != k * k) {
            const double a =
                std::pow(static_cast<double>(k * k) / static_cast<double>(r2),
                         params_.d_alpha / 2);
            if (rs.uniform() >= a) continue;
        }
        if (is_state(c.k, c.m)) return c;
    }
}

Cell JumpChainModel::jump_extended(rng::Stream& rs, const Cell& from, bool& beyond) const {
    for (;;) {
        const i64 k = pick_ring(rs, ring_cdf_ext_);
        const Cell c = ring_site(rs, from, k);
        const i64 dk = c.k - from.k, dm = c.m - from.m;
        const i64 r2 = dk * dk + dm * dm;
        if (r2 != k * k) {
            const double a =
                std::pow(static_cast<double>(k * k) / static_cast<double>(r2),
                         params_.d_alpha / 2);
            if (rs.uniform() >= a) continue;
        }
        if (!cell_present(c.k, c.m)) continue;
        beyond = !in_window(c.k, c.m);
        return c;
    }
}

double JumpChainModel::pair_weight(const Cell& x, const Cell& y) const {
    const i64 dk = x.k - y.k, dm = x.m - y.m;
    const i64 r2 = dk * dk + dm * dm;
    if (r2 == 0) throw std::logic_error("weight of a cell with itself");
    return std::pow(static_cast<double>(r2), -params_.d_alpha / 2);
}

std::string JumpChainModel::hash() const {
    uint64_t h = fnv1a(d_.hash().data(), 16);
    h = fnv1a(&cfg_.level, sizeof cfg_.level, h);
    h = fnv1a(&cfg_.alpha, sizeof cfg_.alpha, h);
    h = fnv1a(&cfg_.dw, sizeof cfg_.dw, h);
    h = fnv1a(&cfg_.t0, sizeof cfg_.t0, h);
    h = fnv1a(&cfg_.halo, sizeof cfg_.halo, h);
    return hash_hex(h);
}

ExitRecord sample_exit(const JumpChainModel& mdl, rng::Stream& rs, const Cell& start) {
    return run_to_exit(mdl, rs, start, [](const Cell&) {});
}

double stable_subordinator_unit(rng::Stream& rs, double beta) {
    if (!(beta > 0) || !(beta < 1)) throw std::invalid_argument("beta out of range");
    const double th = M_PI * rs.uniform();
    const double w = rs.exponential(1.0);
    const double la = std::log(std::sin((1 - beta) * th)) +
                      beta / (1 - beta) * std::log(std::sin(beta * th)) -
                      1 / (1 - beta) * std::log(std::sin(th));
    return std::exp((1 - beta) / beta * (la - std::log(w)));
}

double stable_subordinator(rng::Stream& rs, double beta, double t) {
    if (!(t > 0)) throw std::invalid_argument("time out of range");
    return std::pow(t, 1 / beta) * stable_subordinator_unit(rs, beta);
}

WalkExit subordinated_walk_exit(const JumpChainModel& mdl, rng::Stream& rs,
                                const Cell& start, const WalkConfig& wcfg) {
    const double beta = mdl.config().alpha / 2;
    // dt = dt_factor * holding mean; in walk-step units the level factors
    // cancel exactly and only dt_factor^{1/beta} survives
    const double steps_scale = std::pow(wcfg.dt_factor, 1 / beta);
    const double w = static_cast<double>(mdl.win_khi() - mdl.win_klo() + 1);
    const double h = static_cast<double>(mdl.win_mhi() - mdl.win_mlo() + 1);
    const double burst = std::min(
        std::pow(wcfg.far_diameters * std::hypot(w, h), mdl.config().dw), 1e15);

    WalkExit out;
    Cell at = start;
    double carry = 0;
    while (out.observations < wcfg.obs_cap) {
        const double ds = steps_scale * stable_subordinator_unit(rs, beta);
        if (ds > burst) {
            out.far = true;
            out.exited = true;
            out.cell = at;
            return out;
        }
        carry += ds;
        i64 n = static_cast<i64>(carry);
        carry -= static_cast<double>(n);
        while (n-- > 0) {
            ++out.walk_steps;
            const uint64_t dir = rs.below(4);
            const i64 nk = at.k + (dir == 0) - (dir == 1);
            const i64 nm = at.m + (dir == 2) - (dir == 3);
            if (cell_present(nk, nm)) at = Cell{nk, nm};
        }
        ++out.observations;
        if (!mdl.region().contains_lattice(at.k, at.m, mdl.level())) {
            out.exited = true;
            out.cell = at;
            out.far = !mdl.in_window(at.k, at.m);
            return out;
        }
    }
    out.cell = at;
    return out;
}

}  // namespace carpet
