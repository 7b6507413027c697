#include "carpet/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace carpet {

namespace {

// weights depend only on the squared lattice displacement, so cache by r2
struct WeightTable {
    double expo;
    std::vector<double> vals;
    explicit WeightTable(double d_alpha, i64 kmax)
        : expo(-d_alpha / 2), vals(static_cast<size_t>(2 * kmax * kmax + 1), 0.0) {}
    double operator()(i64 r2) {
        double& v = vals[static_cast<size_t>(r2)];
        if (v == 0) v = std::pow(static_cast<double>(r2), expo);
        return v;
    }
};

}  // namespace

AbsorbingSystem::AbsorbingSystem(const JumpChainModel& mdl) : mdl_(mdl) {
    const Region& d = mdl.region();
    if (mdl.interior_count() > kOracleCap) throw std::runtime_error("system too large");

    interior_ = region_cells_at_level(d, mdl.level());
    for (i64 k = mdl.win_klo(); k <= mdl.win_khi(); ++k)
        for (i64 m = mdl.win_mlo(); m <= mdl.win_mhi(); ++m)
            if (mdl.is_state(k, m) && !mdl.is_interior(k, m))
                absorbing_.push_back(Cell{k, m});

    const i64 kmax = std::max(mdl.win_khi() - mdl.win_klo(), mdl.win_mhi() - mdl.win_mlo());
    WeightTable wt(mdl.params().d_alpha, kmax);
    totals_.resize(interior_.size(), 0.0);
    for (size_t i = 0; i < interior_.size(); ++i) {
        const Cell x = interior_[i];
        double tot = 0;
        for (i64 k = mdl.win_klo(); k <= mdl.win_khi(); ++k)
            for (i64 m = mdl.win_mlo(); m <= mdl.win_mhi(); ++m) {
                if (k == x.k && m == x.m) continue;
                if (!cell_present(k, m)) continue;
                const i64 dk = k - x.k, dm = m - x.m;
                tot += wt(dk * dk + dm * dm);
            }
        totals_[i] = tot;
    }
}

double AbsorbingSystem::weight_total(const Cell& c) const {
    const int i = index_of(c);
    if (i < 0) throw std::invalid_argument("cell not interior");
    return totals_[static_cast<size_t>(i)];
}

int AbsorbingSystem::index_of(const Cell& c) const {
    const uint64_t key = cell_key(c.k, c.m);
    auto it = std::lower_bound(interior_.begin(), interior_.end(), key,
                               [](const Cell& a, uint64_t k) { return cell_key(a.k, a.m) < k; });
    if (it == interior_.end() || cell_key(it->k, it->m) != key) return -1;
    return static_cast<int>(it - interior_.begin());
}

int AbsorbingSystem::absorbing_index_of(const Cell& c) const {
    const uint64_t key = cell_key(c.k, c.m);
    auto it = std::lower_bound(absorbing_.begin(), absorbing_.end(), key,
                               [](const Cell& a, uint64_t k) { return cell_key(a.k, a.m) < k; });
    if (it == absorbing_.end() || cell_key(it->k, it->m) != key) return -1;
    return static_cast<int>(it - absorbing_.begin());
}

void AbsorbingSystem::factor() const {
    if (lu_) return;
    if (!iq_) {
        const i64 n = n_interior();
        const i64 kmax =
            std::max(mdl_.win_khi() - mdl_.win_klo(), mdl_.win_mhi() - mdl_.win_mlo());
        WeightTable wt(mdl_.params().d_alpha, kmax);
        iq_.emplace(Eigen::MatrixXd::Zero(n, n));
        for (i64 i = 0; i < n; ++i) {
            const Cell x = interior_[static_cast<size_t>(i)];
            for (i64 j = 0; j < n; ++j) {
                if (i == j) continue;
                const Cell y = interior_[static_cast<size_t>(j)];
                const i64 dk = y.k - x.k, dm = y.m - x.m;
                (*iq_)(i, j) = -wt(dk * dk + dm * dm) / totals_[static_cast<size_t>(i)];
            }
            (*iq_)(i, i) = 1.0;
        }
    }
    lu_.emplace(*iq_);
}

void AbsorbingSystem::factor_transpose() const {
    if (lu_t_) return;
    factor();  // builds iq_
    lu_t_.emplace(iq_->transpose());
}

Eigen::VectorXd AbsorbingSystem::occupation_row(const Cell& start) const {
    const int idx = index_of(start);
    if (idx < 0) throw std::invalid_argument("start cell not interior");
    factor_transpose();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_interior());
    e(idx) = 1.0;
    return lu_t_->solve(e);
}

double AbsorbingSystem::expected_exit_time(const Cell& start) const {
    return mdl_.holding_mean() * occupation_row(start).sum();
}

double AbsorbingSystem::green(const Cell& start, const Cell& y) const {
    const int iy = index_of(y);
    if (iy < 0) throw std::invalid_argument("target cell not interior");
    const Eigen::VectorXd z = occupation_row(start);
    return z(iy) * mdl_.holding_mean() / mdl_.cell_mass();
}

Eigen::VectorXd AbsorbingSystem::exit_law(const Cell& start) const {
    const Eigen::VectorXd z = occupation_row(start);
    const i64 kmax =
        std::max(mdl_.win_khi() - mdl_.win_klo(), mdl_.win_mhi() - mdl_.win_mlo());
    WeightTable wt(mdl_.params().d_alpha, kmax);
    Eigen::VectorXd law = Eigen::VectorXd::Zero(static_cast<i64>(absorbing_.size()));
    for (size_t j = 0; j < absorbing_.size(); ++j) {
        const Cell a = absorbing_[j];
        double s = 0;
        for (i64 y = 0; y < n_interior(); ++y) {
            const Cell cy = interior_[static_cast<size_t>(y)];
            const i64 dk = a.k - cy.k, dm = a.m - cy.m;
            s += z(y) * wt(dk * dk + dm * dm) / totals_[static_cast<size_t>(y)];
        }
        law(static_cast<i64>(j)) = s;
    }
    return law;
}

Eigen::VectorXd AbsorbingSystem::harmonic(const std::function<double(const Cell&)>& f) const {
    factor();
    const i64 kmax =
        std::max(mdl_.win_khi() - mdl_.win_klo(), mdl_.win_mhi() - mdl_.win_mlo());
    WeightTable wt(mdl_.params().d_alpha, kmax);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_interior());
    for (i64 i = 0; i < n_interior(); ++i) {
        const Cell x = interior_[static_cast<size_t>(i)];
        double s = 0;
        for (const Cell& a : absorbing_) {
            const i64 dk = a.k - x.k, dm = a.m - x.m;
            s += wt(dk * dk + dm * dm) * f(a);
        }
        rhs(i) = s / totals_[static_cast<size_t>(i)];
    }
    return lu_->solve(rhs);
}

}  // namespace carpet
