#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "carpet/process.hpp"

// Small-system reference solutions for the jump chain. The chain restricted
// to cells inside the region is a transient substochastic matrix Q; exits are
// absorptions. Everything here is an expectation of the very same law the
// sampler draws from, so Monte Carlo estimates must agree within noise.

namespace carpet {

constexpr i64 kOracleCap = 5000;

class AbsorbingSystem {
public:
    explicit AbsorbingSystem(const JumpChainModel& mdl);

    const JumpChainModel& model() const { return mdl_; }
    i64 n_interior() const { return static_cast<i64>(interior_.size()); }
    const std::vector<Cell>& interior() const { return interior_; }
    const std::vector<Cell>& absorbing() const { return absorbing_; }
    int index_of(const Cell& c) const;            // -1 when not interior
    int absorbing_index_of(const Cell& c) const;  // -1 when not absorbing

    // expected visit counts z_y = E_x[#visits to y], start visit included
    Eigen::VectorXd occupation_row(const Cell& start) const;
    double expected_exit_time(const Cell& start) const;
    double green(const Cell& start, const Cell& y) const;

    // exit law over absorbing(), in its order; sums to one
    Eigen::VectorXd exit_law(const Cell& start) const;

    // u(x) = E_x[f(exit cell)] for every interior x
    Eigen::VectorXd harmonic(const std::function<double(const Cell&)>& f) const;

    // total outgoing weight of an interior cell, the row normalizer
    double weight_total(const Cell& c) const;

private:
    void factor() const;
    void factor_transpose() const;

    JumpChainModel mdl_;  // owned copy
    std::vector<Cell> interior_;   // lex order
    std::vector<Cell> absorbing_;  // lex order
    std::vector<double> totals_;   // per-interior-row weight normalizer
    mutable std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_, lu_t_;
    mutable std::optional<Eigen::MatrixXd> iq_;  // I - Q, built once
};

}  // namespace carpet
