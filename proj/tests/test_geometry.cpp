#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "carpet/geometry.hpp"
#include "carpet/rng.hpp"

using namespace carpet;

namespace {

Region unit_cell() { return build_region(0, {Cell{0, 0}}); }

Region l_shape() { return build_region(1, {Cell{0, 0}, Cell{1, 0}, Cell{0, 1}}); }

double point_x(const Point& p) { return static_cast<double>(p.ix) / pow3(p.resolution); }
double point_y(const Point& p) { return static_cast<double>(p.iy) / pow3(p.resolution); }

double point_dist(const Point& a, const Point& b) {
    return std::hypot(point_x(a) - point_x(b), point_y(a) - point_y(b));
}

}  // namespace

TEST_CASE("presence of lattice cells across the plane") {
    CHECK(cell_present(0, 0));
    CHECK_FALSE(cell_present(1, 1));
    CHECK(cell_present(1, 0));
    CHECK(cell_present(2, 2));
    CHECK_FALSE(cell_present(4, 4));    // digits (11, 11)
    CHECK_FALSE(cell_present(13, 13));  // digits (111, 111)
    CHECK_FALSE(cell_present(4, 3));    // leading digit pair (1,1)
    CHECK(cell_present(2, 4));
    // negative indices: floored digits eventually settle on 2s
    CHECK(cell_present(-1, -1));
    CHECK(cell_present(-1, 0));
    CHECK_FALSE(cell_present(-2, -2));  // both have least digit 1
    CHECK(cell_present(-3, -3));
}

TEST_CASE("level enumeration counts and order") {
    CHECK(cells_at_level(0).size() == 1);
    CHECK(cells_at_level(1).size() == 8);
    CHECK(cells_at_level(2).size() == 64);
    CHECK(cells_at_level(3).size() == 512);
    auto lvl1 = cells_at_level(1);
    CHECK(lvl1[0].kx() == 0);
    CHECK(lvl1[0].ky() == 0);
    CHECK(lvl1[3].kx() == 1);
    CHECK(lvl1[3].ky() == 0);
    CHECK(lvl1[4].kx() == 1);
    CHECK(lvl1[4].ky() == 2);
    for (auto& a : lvl1) CHECK_NOTHROW(a.validate());
    CHECK_THROWS_AS(cells_at_level(11), std::invalid_argument);
    CHECK_THROWS_AS(CellAddress::from_indices(1, 1, 1), std::invalid_argument);
    CHECK(cell_measure(2) == 1.0 / 64);
}

TEST_CASE("point membership at finite approximation levels") {
    // 13/27 has digit string 111: inside the first removed square
    Point hole{3, 13, 13};
    CHECK_FALSE(in_carpet(hole, 1));
    CHECK_FALSE(in_carpet(hole, 3));
    // grid corner shared by four kept squares
    Point corner{3, 9, 9};
    CHECK(in_carpet(corner, 1));
    CHECK(in_carpet(corner, 3));
    // edge of the central hole still belongs to the set
    Point hole_edge{2, 3, 4};
    CHECK(in_carpet(hole_edge, 2));
    Point origin{0, 0, 0};
    CHECK(in_carpet(origin, 0));
    CHECK_THROWS_AS(in_carpet(Point{1, 1, 1}, 2), std::invalid_argument);
}

TEST_CASE("region constants for simple cell unions") {
    Region d = unit_cell();
    CHECK(d.R2 == doctest::Approx(1.0));
    CHECK(std::isinf(d.R1));
    CHECK(d.R0 == doctest::Approx(1.0 / 3));
    CHECK(d.boundary.size() == 4);

    Region corners = build_region(1, {Cell{0, 0}, Cell{2, 2}});
    CHECK(corners.R2 == doctest::Approx(1.0 / 3));
    CHECK(corners.R1 == doctest::Approx(std::sqrt(2.0) / 3));
    CHECK(corners.R0 == doctest::Approx(1.0 / 9));

    Region l = l_shape();
    CHECK(std::isinf(l.R1));
    CHECK(l.R0 == doctest::Approx(1.0 / 9));
}

TEST_CASE("boundary faces skip removed squares") {
    std::vector<Cell> ring;
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 3; ++m)
            if (!(k == 1 && m == 1)) ring.push_back(Cell{k, m});
    Region d = build_region(1, ring);
    // faces against the central removed square are interior to the set,
    // so only the 12 outer rim faces remain
    CHECK(d.boundary.size() == 12);
    for (const Face& f : d.boundary) CHECK((f.c == 0 || f.c == 3));
}

TEST_CASE("region construction rejects bad input") {
    CHECK_THROWS_AS(build_region(1, {Cell{1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(build_region(1, {Cell{0, 0}, Cell{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(build_region(1, {Cell{3, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(build_region(1, {}), std::invalid_argument);
}

TEST_CASE("refining a region into smaller cells") {
    Region d = unit_cell();
    auto lvl2 = region_cells_at_level(d, 2);
    CHECK(lvl2.size() == 64);
    for (size_t i = 1; i < lvl2.size(); ++i) {
        bool ordered = lvl2[i - 1].k < lvl2[i].k ||
                       (lvl2[i - 1].k == lvl2[i].k && lvl2[i - 1].m < lvl2[i].m);
        CHECK(ordered);
    }
    auto l2 = region_cells_at_level(l_shape(), 2);
    CHECK(l2.size() == 24);
}

TEST_CASE("distance to the region boundary") {
    Region d = unit_cell();
    CHECK(dist_to_boundary(Point{2, 2, 2}, d) == doctest::Approx(2.0 / 9));
    CHECK(dist_to_boundary(Point{2, 3, 2}, d) == doctest::Approx(2.0 / 9));
    CHECK_THROWS_AS(dist_to_boundary(Point{0, 0, 0}, d), std::invalid_argument);
    CHECK_THROWS_AS(dist_to_boundary(Point{1, 4, 1}, d), std::invalid_argument);

    // 1-Lipschitz in the interior
    rng::Stream rs(2024, 0);
    int tried = 0;
    while (tried < 100) {
        Point a{5, static_cast<i64>(rs.below(242)) + 1, static_cast<i64>(rs.below(242)) + 1};
        Point b{5, static_cast<i64>(rs.below(242)) + 1, static_cast<i64>(rs.below(242)) + 1};
        if (!d.interior_contains(a) || !d.interior_contains(b)) continue;
        ++tried;
        double gap = std::abs(dist_to_boundary(a, d) - dist_to_boundary(b, d));
        CHECK(gap <= point_dist(a, b) + 1e-12);
    }

    Region l = l_shape();
    // hole-facing edges are not boundary: nothing within 1/3 of (2/9, 2/9)
    // except the two outer faces of the first cell
    CHECK(dist_to_boundary(Point{2, 2, 2}, l) == doctest::Approx(2.0 / 9));
}

TEST_CASE("interior ball witness near a boundary point") {
    Region d = unit_cell();
    Point q{0, 0, 0};
    double r = 1.0 / 3;
    Point a = inner_fatness_point(q, r, d);
    double theta = 1.0 / 9;
    CHECK(dist_to_boundary(a, d) >= theta * r * (1 - 1e-9));
    CHECK(point_dist(a, q) <= (1 - theta) * r * (1 + 1e-9));
    CHECK(in_carpet(a, a.resolution));

    Region l = l_shape();
    Point q2{1, 1, 0};
    Point a2 = inner_fatness_point(q2, l.R0, l);
    CHECK(dist_to_boundary(a2, l) >= theta * l.R0 * (1 - 1e-9));
    CHECK(point_dist(a2, q2) <= (1 - theta) * l.R0 * (1 + 1e-9));

    CHECK_THROWS_AS(inner_fatness_point(Point{1, 1, 1}, 1.0 / 9, l), std::invalid_argument);
    CHECK_THROWS_AS(inner_fatness_point(q, 1.0, d), std::invalid_argument);
}

TEST_CASE("interior ball witness exists for every small cell union") {
    // all nonempty subsets of the eight level-1 cells, connected or not
    std::vector<Cell> all;
    for (auto& a : cells_at_level(1)) all.push_back(Cell{a.kx(), a.ky()});
    int regions = 0, probes = 0;
    for (unsigned mask = 1; mask < 256; ++mask) {
        std::vector<Cell> cs;
        for (int b = 0; b < 8; ++b)
            if (mask & (1u << b)) cs.push_back(all[b]);
        Region d = build_region(1, cs);
        ++regions;
        for (const Face& f : d.boundary) {
            // an endpoint and an interior third-point of the face
            Point qs[2];
            if (f.axis == 0) {
                qs[0] = Point{1, f.c, f.lo};
                qs[1] = Point{2, 3 * f.c, 3 * f.lo + 1};
            } else {
                qs[0] = Point{1, f.lo, f.c};
                qs[1] = Point{2, 3 * f.lo + 1, 3 * f.c};
            }
            for (const Point& q : qs) {
                if (!d.on_boundary(q)) continue;
                for (double r : {d.R0, d.R0 / 9}) {
                    Point a = inner_fatness_point(q, r, d);
                    ++probes;
                    CHECK(dist_to_boundary(a, d) >= r / 9 * (1 - 1e-9));
                    CHECK(point_dist(a, q) <= r * 8 / 9 * (1 + 1e-9));
                }
            }
        }
    }
    CHECK(regions == 255);
    CHECK(probes > 3000);
}

TEST_CASE("mass outside the region near a boundary point") {
    Region d = unit_cell();
    Point q{0, 0, 0};
    auto m1 = outer_fatness_measure(q, 1.0 / 3, d);
    CHECK(m1.value > 0);
    CHECK(m1.cell_count > 0);

    // scale like r^d within a constant band
    double dim = std::log(8.0) / std::log(3.0);
    std::vector<double> ratios;
    for (int e = 2; e <= 5; ++e) {
        double r = 1.0 / pow3(e);
        auto m = outer_fatness_measure(q, r, d);
        ratios.push_back(m.value / std::pow(r, dim));
    }
    for (double rt : ratios) {
        CHECK(rt > ratios.front() / 4);
        CHECK(rt < ratios.front() * 4);
    }

    Region l = l_shape();
    auto m2 = outer_fatness_measure(Point{1, 1, 0}, l.R0, l);
    CHECK(m2.value > 0);
}

TEST_CASE("boundary layer decomposition") {
    Region d = unit_cell();
    Point q{0, 0, 0};
    auto ld = layer_decomposition(d, q, 1.0 / 9, 3, 0.5, 2.097);
    CHECK(ld.base_level == 1);
    CHECK(ld.h0_count == 1);
    CHECK(ld.layers.size() == 4);
    CHECK(ld.layers[1].size() == 5);  // rim children of the corner cell
    CHECK(ld.count_bound_ok);
    CHECK(ld.delta_bound_ok);
    CHECK(ld.rings.size() == 3);
    for (auto& ring : ld.rings) CHECK_FALSE(ring.empty());
    for (size_t k = 0; k + 1 < ld.series_terms.size(); ++k)
        CHECK(ld.series_terms[k + 1] < ld.series_terms[k]);  // alpha below threshold

    auto grow = layer_decomposition(d, q, 1.0 / 9, 3, 0.9, 2.097);
    for (size_t k = 0; k + 1 < grow.series_terms.size(); ++k)
        CHECK(grow.series_terms[k + 1] > grow.series_terms[k]);

    // an edge point rather than a corner
    auto le = layer_decomposition(d, Point{1, 1, 0}, 1.0 / 9, 2, 0.5, 2.097);
    CHECK(le.h0_count >= 1);
    CHECK(le.count_bound_ok);
    CHECK(le.delta_bound_ok);

    CHECK_THROWS_AS(layer_decomposition(d, q, 0.3, 3, 0.5, 2.097), std::invalid_argument);
}

TEST_CASE("derived exponents and regime thresholds") {
    auto p = make_params(0.5);
    CHECK(p.d == doctest::Approx(1.8927892607).epsilon(1e-9));
    CHECK(p.d_alpha == doctest::Approx(p.d + 0.5 * 2.097 / 2));
    CHECK(p.thr_carleson == doctest::Approx(0.95374344).epsilon(1e-6));
    CHECK(p.thr_bhp == doctest::Approx(2 * (p.d - 1) / 2.097));
    CHECK(p.ok_carleson);
    CHECK(p.ok_green);
    CHECK(p.ok_bhp);
    auto hi = make_params(0.9);
    CHECK(hi.ok_carleson);
    CHECK_FALSE(hi.ok_bhp);
    CHECK_THROWS_AS(make_params(2.5), std::invalid_argument);
    CHECK_THROWS_AS(make_params(0.5, 1.0), std::invalid_argument);
}

TEST_CASE("region hashing is order independent and content sensitive") {
    Region a = build_region(1, {Cell{0, 0}, Cell{2, 2}});
    Region b = build_region(1, {Cell{2, 2}, Cell{0, 0}});
    CHECK(a.hash() == b.hash());
    Region c = build_region(1, {Cell{0, 0}, Cell{2, 1}});
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
}

TEST_CASE("deterministic stream values are reproducible") {
    rng::Stream s1(42, 7), s2(42, 7), s3(42, 8);
    for (int i = 0; i < 100; ++i) {
        double u = s1.uniform();
        CHECK(u == s2.uniform());
        CHECK(u > 0);
        CHECK(u < 1);
    }
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());
    double mean = 0;
    for (int i = 0; i < 20000; ++i) mean += s3.exponential(2.0);
    mean /= 20000;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
}
