#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "carpet/harness.hpp"

using namespace carpet;

namespace {

Region unit_cell() { return build_region(0, {Cell{0, 0}}); }

const Point corner{0, 0, 0};

bool same_cell(const Cell& a, i64 k, i64 m) { return a.k == k && a.m == m; }

bool same_half(const HalfPoint& h, int scale, i64 px, i64 py) {
    return h.scale == scale && h.px == px && h.py == py;
}

double detail(const BhpReport& rep, const std::string& key) {
    for (const auto& [k, v] : rep.details)
        if (k == key) return v;
    throw std::runtime_error("missing detail " + key);
}

CheckOptions smoke(int level, i64 n, uint64_t seed, size_t cap) {
    CheckOptions o;
    o.level = level;
    o.n_samples = n;
    o.seed = seed;
    o.grid_cap = cap;
    return o;
}

}  // namespace

TEST_CASE("corner scaffold comes out exactly") {
    const Region d = unit_cell();
    const BhpGeometry g = build_bhp_geometry(d, corner, 1.0 / 9.0);

    CHECK(g.n_scale == 2);
    CHECK(g.r == 1.0 / 9.0);
    CHECK(g.w == 1.0 / 243.0);

    REQUIRE(g.omega_cells.size() == 3);
    CHECK(same_cell(g.omega_cells[0], 0, 0));
    CHECK(same_cell(g.omega_cells[1], 0, 1));
    CHECK(same_cell(g.omega_cells[2], 1, 0));
    REQUIRE(g.omega2_cells.size() == 3);
    CHECK(same_cell(g.omega2_cells[0], 0, 0));
    CHECK(same_cell(g.omega2_cells[1], 0, 1));
    CHECK(same_cell(g.omega2_cells[2], 1, 0));

    CHECK(g.a_point.resolution == 6);
    CHECK(g.a_point.ix == 9);
    CHECK(g.a_point.iy == 21);

    REQUIRE(g.ring.size() == 20);
    CHECK(same_cell(g.ring[0], 0, 18));
    CHECK(same_cell(g.ring[8], 8, 18));
    CHECK(same_cell(g.ring[9], 9, 18));
    CHECK(same_cell(g.ring[10], 18, 0));
    CHECK(same_cell(g.ring[19], 18, 9));
    CHECK(g.ring_deep == 8);

    CHECK(same_half(g.contact[8], 5, 17, 36));
    CHECK(same_half(g.witness[8], 6, 51, 106));
    CHECK(std::accumulate(g.at_corner.begin(), g.at_corner.end(), 0) == 2);
    CHECK(g.at_corner[9] == 1);
    CHECK(g.at_corner[19] == 1);

    CHECK(same_cell(g.t_cell, 24, 59));
}

TEST_CASE("scaffold membership classifiers agree with the frozen example") {
    const Region d = unit_cell();
    const BhpGeometry g = build_bhp_geometry(d, corner, 1.0 / 9.0);

    CHECK(g.cell_in_omega(Cell{0, 0}, 5));
    CHECK(g.cell_in_omega(Cell{8, 17}, 5));
    CHECK_FALSE(g.cell_in_omega(Cell{9, 17}, 5));

    CHECK(g.cell_in_delta(Cell{8, 18}, 5));
    CHECK(g.cell_in_b1(Cell{8, 18}, 5));
    CHECK_FALSE(g.cell_in_delta(Cell{18, 10}, 5));
    CHECK_FALSE(g.cell_in_delta(Cell{0, 17}, 5));  // still inside the neighbourhood

    // the deep ball is part of the contact strip wherever it is defined
    for (i64 k = 0; k < 27; ++k)
        for (i64 m = 0; m < 27; ++m) {
            const Cell c{k, m};
            if (!cell_present(k, m)) continue;
            if (g.cell_in_b1(c, 5)) CHECK(g.cell_in_delta(c, 5));
            if (g.cell_in_delta(c, 5)) CHECK(g.cell_in_k(c, 5));
        }

    // off the domain, the collar keeps cells near Q only
    CHECK(g.cell_in_k(Cell{-1, 0}, 5));
    CHECK(g.cell_in_k(Cell{-1, 26}, 5));
    CHECK_FALSE(g.cell_in_k(Cell{-1, 54}, 5));
}

TEST_CASE("scaffold holds across regions, base points and radii") {
    const Region unit = unit_cell();
    const Region pair = build_region(1, {Cell{0, 0}, Cell{1, 0}});
    const Region elbow = build_region(2, {Cell{2, 0}, Cell{3, 0}, Cell{2, 1}});

    struct Case {
        const Region* d;
        Point q;
        double r;
        size_t omega = 0;  // 0: unchecked
    };
    const Case cases[] = {
        {&unit, corner, 1.0 / 9.0, 3},
        {&unit, corner, 1.0 / 27.0, 3},
        {&unit, Point{1, 1, 0}, 1.0 / 9.0, 2},    // interior edge gridpoint
        {&unit, Point{1, 1, 0}, 1.0 / 27.0, 2},
        {&unit, Point{4, 1, 0}, 1.0 / 9.0, 3},    // generic edge point near a corner
        {&pair, Point{1, 1, 0}, 1.0 / 27.0, 2},
        {&pair, Point{1, 1, 1}, 1.0 / 27.0, 2},   // grid corner on the top edge
        {&pair, Point{1, 1, 0}, 1.0 / 81.0, 2},
        {&elbow, Point{2, 3, 1}, 1.0 / 81.0, 3},  // reentrant corner
        {&elbow, Point{2, 2, 0}, 1.0 / 81.0, 3},
        {&elbow, Point{2, 3, 1}, 1.0 / 243.0, 3},
    };
    for (const Case& c : cases) {
        CAPTURE(c.q.ix);
        CAPTURE(c.q.iy);
        CAPTURE(c.r);
        const BhpGeometry g = build_bhp_geometry(*c.d, c.q, c.r);
        CHECK(g.ring.size() >= 18);
        CHECK(g.ring.size() <= 54);
        CHECK(g.contact.size() == g.ring.size());
        CHECK(g.witness.size() == g.ring.size());
        CHECK(g.ring_deep < g.ring.size());
        if (c.omega) CHECK(g.omega_cells.size() == c.omega);
        CHECK(g.omega2_cells.size() >= 2);
    }

    // the near-corner edge point recovers the corner neighbourhood
    const BhpGeometry ge = build_bhp_geometry(unit, Point{4, 1, 0}, 1.0 / 9.0);
    REQUIRE(ge.omega_cells.size() == 3);
    CHECK(same_cell(ge.omega_cells[0], 0, 0));
    CHECK(same_cell(ge.omega_cells[1], 0, 1));
    CHECK(same_cell(ge.omega_cells[2], 1, 0));
    CHECK(ge.ring.size() == 20);

    // the interior edge gridpoint gives an edge-sharing pair and a wide ring
    const BhpGeometry gm = build_bhp_geometry(unit, Point{1, 1, 0}, 1.0 / 9.0);
    REQUIRE(gm.omega_cells.size() == 2);
    CHECK(same_cell(gm.omega_cells[0], 8, 0));
    CHECK(same_cell(gm.omega_cells[1], 9, 0));
    // left column, top row, right column; diagonal point-touch cells stay out
    CHECK(gm.ring.size() == 36);
    CHECK(std::accumulate(gm.at_corner.begin(), gm.at_corner.end(), 0) == 0);
    CHECK(same_cell(gm.ring[0], 71, 0));
    CHECK(same_cell(gm.ring[8], 71, 8));
    CHECK(same_cell(gm.ring[9], 72, 9));
    CHECK(same_cell(gm.ring[26], 89, 9));
    CHECK(same_cell(gm.ring[27], 90, 0));
    CHECK(same_cell(gm.ring[35], 90, 8));
    CHECK(gm.ring_deep == 8);
    CHECK(same_half(gm.contact[9], 5, 145, 18));
}

TEST_CASE("scaffold and checks reject bad inputs") {
    const Region d = unit_cell();
    const Point inside{1, 1, 1};
    CheckOptions opt = smoke(5, 100, 1, 2);

    CHECK_THROWS_WITH_AS(build_bhp_geometry(d, inside, 1.0 / 9.0),
                         "base point not on boundary", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_bhp_geometry(d, corner, 0.11),
                         "radius must be a power of three", std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_bhp_geometry(d, corner, 1.0 / 3.0),
                         "radius not below half R0", std::invalid_argument);

    CHECK_THROWS_WITH_AS(check_lemma10(d, inside, 1.0 / 9.0, opt),
                         "base point not on boundary", std::invalid_argument);

    opt.alpha = 1.9;
    CHECK_THROWS_WITH_AS(check_lemma11(d, corner, 1.0 / 9.0, opt),
                         "hypothesis violated: alpha not below 2d/dw",
                         std::invalid_argument);
    opt.alpha = 0.9;
    CHECK_THROWS_WITH_AS(check_lemma12(d, corner, 1.0 / 9.0, opt),
                         "hypothesis violated: alpha not below 2(d-1)/dw",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(check_bhp(d, corner, 1.0 / 9.0, HarmonicSpec{}, HarmonicSpec{}, opt),
                         "hypothesis violated: alpha not below 2(d-1)/dw",
                         std::invalid_argument);
    opt.alpha = 1.0;
    CHECK_THROWS_WITH_AS(check_carleson(d, corner, 1.0 / 9.0, HarmonicSpec{}, opt),
                         "hypothesis violated: alpha not below 2/dw",
                         std::invalid_argument);

    opt.alpha = 0.5;
    opt.level = 4;
    CHECK_THROWS_WITH_AS(check_bhp(d, corner, 1.0 / 9.0, HarmonicSpec{}, HarmonicSpec{}, opt),
                         "level too coarse for the geometry", std::invalid_argument);
    CHECK_THROWS_WITH_AS(run_scaling(opt), "level too coarse for the scaling patch",
                         std::invalid_argument);
    opt.level = 3;
    CHECK_THROWS_WITH_AS(check_lemma11(d, corner, 1.0 / 9.0, opt),
                         "level too coarse for the green witness", std::invalid_argument);

    const BhpGeometry g = build_bhp_geometry(d, corner, 1.0 / 9.0);
    opt.level = 5;
    CHECK_THROWS_WITH_AS(check_step_decomposition(g, HarmonicSpec{0}, opt),
                         "empty sector mask", std::invalid_argument);
}

TEST_CASE("ball exit floor stays positive near the base point") {
    const Region d = unit_cell();
    const BhpReport rep = check_lemma10(d, corner, 1.0 / 9.0, smoke(4, 3000, 777, 5));
    CHECK(rep.decided);
    CHECK(rep.pass);
    CHECK(rep.measured_constant > 0.01);
    CHECK(rep.measured_next > 0.01);
    CHECK(std::abs(detail(rep, "partition_gap_sigma")) <= 3.0);
    CHECK(rep.config_hashes.size() == 3);
}

TEST_CASE("occupation against exit mass stays banded both ways") {
    const Region d = unit_cell();
    const CheckOptions opt = smoke(4, 50000, 778, 4);

    const BhpReport up = check_lemma11(d, corner, 1.0 / 9.0, opt);
    CHECK(detail(up, "window_cells") >= 4);
    CHECK(up.decided);
    CHECK(up.measured_constant > 0);
    CHECK(detail(up, "min_ratio") > 0);
    CHECK(detail(up, "min_ratio") <= up.measured_constant);

    const BhpReport down = check_lemma12(d, corner, 1.0 / 9.0, opt);
    CHECK(down.decided);
    CHECK(down.measured_constant > 0);
    CHECK(detail(down, "layer_count_bound_ok") == 1.0);
    CHECK(detail(down, "layer_delta_bound_ok") == 1.0);
    CHECK(detail(down, "layer_series_sum") > 0);
}

TEST_CASE("sector mass dominates from the fat interior point") {
    const Region d = unit_cell();
    const BhpReport rep = check_carleson(d, corner, 1.0 / 9.0, HarmonicSpec{}, smoke(4, 3000, 99, 5));
    CHECK(rep.decided);
    CHECK(rep.measured_constant >= 1.0);
    CHECK(detail(rep, "witness_value") > 0);
}

TEST_CASE("boundary ratio suite: bands, exact null, exact swap") {
    const Region d = unit_cell();
    const std::vector<BhpReport> suite =
        run_bhp_suite(d, corner, 1.0 / 9.0, smoke(5, 4000, 424242, 3));
    REQUIRE(suite.size() == 5);
    CHECK(suite[0].name.substr(0, 6) == "bhp u=");
    CHECK(suite[3].name == "bhp null");
    CHECK(suite[4].name == "bhp swap");
    for (const BhpReport& rep : suite) {
        CAPTURE(rep.name);
        CHECK(rep.decided);
        CHECK(rep.measured_constant >= 1.0);
    }
    CHECK(suite[3].measured_constant == 1.0);
    CHECK(suite[3].measured_next == 1.0);
    CHECK(suite[3].pass);
    CHECK(suite[4].measured_constant == suite[0].measured_constant);
    CHECK(suite[4].measured_next == suite[0].measured_next);
    CHECK(suite[4].pass);
    CHECK(suite[0].pass);
}

TEST_CASE("step decomposition splits exactly and keeps its floors") {
    const Region d = unit_cell();
    const BhpGeometry g = build_bhp_geometry(d, corner, 1.0 / 9.0);
    const BhpReport rep = check_step_decomposition(g, HarmonicSpec{0x07}, smoke(5, 20000, 5150, 3));
    CHECK(rep.decided);
    CHECK(rep.pass);
    CHECK(detail(rep, "split_gap") <= 1e-12);
    CHECK(detail(rep, "split_gap_next") <= 1e-12);
    CHECK(std::abs(detail(rep, "independent_gap_sigma")) <= 4.0);
    CHECK(detail(rep, "strip_over_deep_min") >= 1.0);
    CHECK(detail(rep, "witness_off_strip_share") >= 0.02);
}

TEST_CASE("exit times scale with the subordinate walk exponent") {
    CheckOptions opt = smoke(5, 4000, 31415, 0);
    const ScalingReport rep = run_scaling(opt);
    REQUIRE(rep.radii.size() == 2);
    CHECK(rep.slope_target == doctest::Approx(opt.alpha * opt.dw / 2));
    CHECK(std::abs(rep.slope - rep.slope_target) <= 0.1 * rep.slope_target);
    CHECK(rep.pass);
    CHECK(rep.mean_exit_time[0] > rep.mean_exit_time[1]);
}

TEST_CASE("reports reproduce bitwise across thread counts") {
    const Region d = unit_cell();
    CheckOptions a = smoke(4, 2000, 2024, 2);
    CheckOptions b = a;
    b.threads = 4;
    const BhpReport ra = check_lemma10(d, corner, 1.0 / 9.0, a);
    const BhpReport rb = check_lemma10(d, corner, 1.0 / 9.0, b);
    CHECK(ra.measured_constant == rb.measured_constant);
    CHECK(ra.measured_next == rb.measured_next);
    CHECK(ra.stderr_band == rb.stderr_band);
    REQUIRE(ra.details.size() == rb.details.size());
    for (size_t i = 0; i < ra.details.size(); ++i) {
        CHECK(ra.details[i].first == rb.details[i].first);
        CHECK(ra.details[i].second == rb.details[i].second);
    }
}
