#include "carpet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <stdexcept>

namespace carpet {

i64 pow3(int n) {
    static const auto table = [] {
        std::array<i64, 40> t{};
        t[0] = 1;
        for (size_t i = 1; i < t.size(); ++i) t[i] = 3 * t[i - 1];
        return t;
    }();
    if (n < 0 || n >= static_cast<int>(table.size()))
        throw std::invalid_argument("pow3: exponent out of range");
    return table[n];
}

bool cell_present(i64 k, i64 m) {
    while (!((k == 0 || k == -1) && (m == 0 || m == -1))) {
        i64 dk = k % 3, dm = m % 3;
        if (dk < 0) dk += 3;
        if (dm < 0) dm += 3;
        if (dk == 1 && dm == 1) return false;
        k = (k - dk) / 3;
        m = (m - dm) / 3;
    }
    return true;
}

CellAddress CellAddress::from_indices(i64 k, i64 m, int level) {
    if (level < 0 || level > kMaxLevel)
        throw std::invalid_argument("cell level out of range");
    if (k < 0 || m < 0 || k >= pow3(level) || m >= pow3(level))
        throw std::invalid_argument("cell index out of range");
    CellAddress a;
    a.level = level;
    a.digits.resize(level);
    for (int j = level - 1; j >= 0; --j) {
        a.digits[j] = {static_cast<uint8_t>(k % 3), static_cast<uint8_t>(m % 3)};
        k /= 3;
        m /= 3;
    }
    a.validate();
    return a;
}

i64 CellAddress::kx() const {
    i64 k = 0;
    for (auto& d : digits) k = 3 * k + d[0];
    return k;
}

i64 CellAddress::ky() const {
    i64 k = 0;
    for (auto& d : digits) k = 3 * k + d[1];
    return k;
}

void CellAddress::validate() const {
    if (level < 0 || level > kMaxLevel)
        throw std::invalid_argument("cell level out of range");
    if (static_cast<int>(digits.size()) != level)
        throw std::invalid_argument("digit count does not match level");
    for (auto& d : digits) {
        if (d[0] > 2 || d[1] > 2) throw std::invalid_argument("digit out of range");
        if (d[0] == 1 && d[1] == 1)
            throw std::invalid_argument("address names a removed square");
    }
}

namespace {

// ascending ky values whose digits avoid 1 wherever kx has digit 1
void enumerate_ky(const std::vector<uint8_t>& kx_digits, int pos, i64 acc,
                  std::vector<i64>& out) {
    if (pos == static_cast<int>(kx_digits.size())) {
        out.push_back(acc);
        return;
    }
    for (uint8_t dy = 0; dy < 3; ++dy) {
        if (kx_digits[pos] == 1 && dy == 1) continue;
        enumerate_ky(kx_digits, pos + 1, 3 * acc + dy, out);
    }
}

}  // namespace

std::vector<CellAddress> cells_at_level(int n) {
    if (n < 0 || n > kMaxLevel)
        throw std::invalid_argument("enumeration cap exceeded");
    std::vector<CellAddress> out;
    out.reserve(1ull << std::min(3 * n, 24));
    const i64 side = pow3(n);
    std::vector<uint8_t> xd(n);
    std::vector<i64> kys;
    for (i64 kx = 0; kx < side; ++kx) {
        i64 t = kx;
        for (int j = n - 1; j >= 0; --j) {
            xd[j] = static_cast<uint8_t>(t % 3);
            t /= 3;
        }
        kys.clear();
        enumerate_ky(xd, 0, 0, kys);
        for (i64 ky : kys) out.push_back(CellAddress::from_indices(kx, ky, n));
    }
    return out;
}

double cell_measure(int n) {
    if (n < 0 || n > kMaxLevel)
        throw std::invalid_argument("enumeration cap exceeded");
    return std::ldexp(1.0, -3 * n);
}

bool in_carpet(const Point& p, int n) {
    if (n < 0) throw std::invalid_argument("level out of range");
    if (p.resolution < n) throw std::invalid_argument("insufficient resolution");
    const i64 q = pow3(p.resolution - n), side = pow3(n);
    const i64 cx = floor_div(p.ix, q), cy = floor_div(p.iy, q);
    const bool bx = p.ix % q == 0, by = p.iy % q == 0;
    for (i64 k : {cx, bx ? cx - 1 : cx}) {
        if (k < 0 || k >= side) continue;
        for (i64 m : {cy, by ? cy - 1 : cy}) {
            if (m < 0 || m >= side) continue;
            if (cell_present(k, m)) return true;
        }
    }
    return false;
}

HalfPoint to_half(const Point& p) { return HalfPoint{p.resolution, 2 * p.ix, 2 * p.iy}; }

HalfPoint rescale_half(const HalfPoint& p, int scale) {
    if (scale < p.scale) throw std::invalid_argument("cannot coarsen a half point");
    const i64 f = pow3(scale - p.scale);
    return HalfPoint{scale, p.px * f, p.py * f};
}

i128 half_dist2(HalfPoint a, HalfPoint b) {
    const int s = std::max(a.scale, b.scale);
    a = rescale_half(a, s);
    b = rescale_half(b, s);
    return static_cast<i128>(a.px - b.px) * (a.px - b.px) +
           static_cast<i128>(a.py - b.py) * (a.py - b.py);
}

double half_dist(const HalfPoint& a, const HalfPoint& b) {
    const int s = std::max(a.scale, b.scale);
    return std::sqrt(static_cast<double>(half_dist2(a, b))) /
           (2.0 * static_cast<double>(pow3(s)));
}

// ---------------------------------------------------------------------------
// Region

namespace {

i128 seg_dist2(i64 px, i64 py, int axis, i64 c, i64 lo, i64 hi) {
    i64 da, db;
    if (axis == 0) {
        da = px - c;
        db = py < lo ? lo - py : (py > hi ? py - hi : 0);
    } else {
        da = py - c;
        db = px < lo ? lo - px : (px > hi ? px - hi : 0);
    }
    return static_cast<i128>(da) * da + static_cast<i128>(db) * db;
}

// squared distance between the square [k,k+1]^2-style box and a segment,
// all in one integer unit system
i128 square_seg_dist2(i64 sx0, i64 sy0, i64 sx1, i64 sy1, int axis, i64 c,
                      i64 lo, i64 hi) {
    i64 da, db;
    if (axis == 0) {
        da = c < sx0 ? sx0 - c : (c > sx1 ? c - sx1 : 0);
        db = hi < sy0 ? sy0 - hi : (lo > sy1 ? lo - sy1 : 0);
    } else {
        da = c < sy0 ? sy0 - c : (c > sy1 ? c - sy1 : 0);
        db = hi < sx0 ? sx0 - hi : (lo > sx1 ? lo - sx1 : 0);
    }
    return static_cast<i128>(da) * da + static_cast<i128>(db) * db;
}

}  // namespace

bool Region::contains_cell(i64 k, i64 m) const {
    if (k < 0 || m < 0) return false;
    return std::binary_search(cells.begin(), cells.end(), cell_key(k, m));
}

bool Region::contains_lattice(i64 k, i64 m, int level) const {
    if (level < cell_level) throw std::logic_error("lattice level above region level");
    const i64 q = pow3(level - cell_level);
    return contains_cell(floor_div(k, q), floor_div(m, q));
}

Cell Region::lattice_bounds_lo() const {
    Cell lo{std::numeric_limits<i64>::max(), std::numeric_limits<i64>::max()};
    for (auto key : cells) {
        Cell c = cell_from_key(key);
        lo.k = std::min(lo.k, c.k);
        lo.m = std::min(lo.m, c.m);
    }
    return lo;
}

Cell Region::lattice_bounds_hi() const {
    Cell hi{std::numeric_limits<i64>::min(), std::numeric_limits<i64>::min()};
    for (auto key : cells) {
        Cell c = cell_from_key(key);
        hi.k = std::max(hi.k, c.k);
        hi.m = std::max(hi.m, c.m);
    }
    return hi;
}

i128 Region::boundary_dist2(i64 px, i64 py, int scale) const {
    if (scale < cell_level) throw std::logic_error("scale above region level");
    const i64 s = 2 * pow3(scale - cell_level);
    i128 best = std::numeric_limits<i64>::max();
    best *= best;
    for (const Face& f : boundary)
        best = std::min(best, seg_dist2(px, py, f.axis, f.c * s, f.lo * s, f.hi * s));
    return best;
}

bool Region::closure_contains(i64 px, i64 py, int scale) const {
    if (scale < cell_level) throw std::logic_error("scale above region level");
    const i64 s = 2 * pow3(scale - cell_level);
    const i64 cx = floor_div(px, s), cy = floor_div(py, s);
    for (i64 k : {cx, px % s == 0 ? cx - 1 : cx})
        for (i64 m : {cy, py % s == 0 ? cy - 1 : cy})
            if (contains_cell(k, m)) return true;
    return false;
}

bool Region::interior_contains(i64 px, i64 py, int scale) const {
    return closure_contains(px, py, scale) && boundary_dist2(px, py, scale) > 0;
}

bool Region::on_boundary(i64 px, i64 py, int scale) const {
    return boundary_dist2(px, py, scale) == 0;
}

bool Region::interior_contains(const Point& p) const {
    const int scale = std::max(p.resolution, cell_level);
    const i64 f = 2 * pow3(scale - p.resolution);
    return interior_contains(p.ix * f, p.iy * f, scale);
}

bool Region::on_boundary(const Point& p) const {
    const int scale = std::max(p.resolution, cell_level);
    const i64 f = 2 * pow3(scale - p.resolution);
    return on_boundary(p.ix * f, p.iy * f, scale);
}

std::string Region::hash() const {
    uint64_t h = fnv1a(&cell_level, sizeof cell_level);
    h = fnv1a(cells.data(), cells.size() * sizeof(uint64_t), h);
    return hash_hex(h);
}

Region build_region(int cell_level, const std::vector<Cell>& in) {
    if (cell_level < 0 || cell_level > kMaxLevel)
        throw std::invalid_argument("cell level out of range");
    if (in.empty()) throw std::invalid_argument("empty region");
    const i64 side = pow3(cell_level);
    Region r;
    r.cell_level = cell_level;
    r.cells.reserve(in.size());
    for (const Cell& c : in) {
        if (c.k < 0 || c.m < 0 || c.k >= side || c.m >= side)
            throw std::invalid_argument("cell index out of range");
        if (!cell_present(c.k, c.m))
            throw std::invalid_argument("address names a removed square");
        r.cells.push_back(cell_key(c.k, c.m));
    }
    std::sort(r.cells.begin(), r.cells.end());
    if (std::adjacent_find(r.cells.begin(), r.cells.end()) != r.cells.end())
        throw std::invalid_argument("duplicate cell");

    r.R2 = 1.0 / static_cast<double>(side);
    i128 best = -1;
    for (size_t i = 0; i < r.cells.size(); ++i) {
        Cell a = cell_from_key(r.cells[i]);
        for (size_t j = i + 1; j < r.cells.size(); ++j) {
            Cell b = cell_from_key(r.cells[j]);
            i64 dk = std::llabs(a.k - b.k), dm = std::llabs(a.m - b.m);
            if (dk <= 1 && dm <= 1) continue;  // closures intersect
            i64 gk = dk > 1 ? dk - 1 : 0, gm = dm > 1 ? dm - 1 : 0;
            i128 d2 = static_cast<i128>(gk) * gk + static_cast<i128>(gm) * gm;
            if (best < 0 || d2 < best) best = d2;
        }
    }
    r.R1 = best < 0 ? std::numeric_limits<double>::infinity()
                    : std::sqrt(static_cast<double>(best)) * r.R2;
    r.R0 = std::min(r.R1, r.R2) / 3.0;

    for (auto key : r.cells) {
        Cell c = cell_from_key(key);
        struct N {
            i64 dk, dm;
            int axis;
            i64 c_off;
        };
        for (const N& nb : {N{-1, 0, 0, 0}, N{1, 0, 0, 1}, N{0, -1, 1, 0}, N{0, 1, 1, 1}}) {
            i64 nk = c.k + nb.dk, nm = c.m + nb.dm;
            if (r.contains_cell(nk, nm)) continue;
            if (!cell_present(nk, nm)) continue;  // removed square: interior in F
            Face f;
            f.axis = nb.axis;
            if (nb.axis == 0) {
                f.c = c.k + nb.c_off;
                f.lo = c.m;
                f.hi = c.m + 1;
            } else {
                f.c = c.m + nb.c_off;
                f.lo = c.k;
                f.hi = c.k + 1;
            }
            r.boundary.push_back(f);
        }
    }
    return r;
}

Region build_region(const std::vector<CellAddress>& cells) {
    if (cells.empty()) throw std::invalid_argument("empty region");
    const int level = cells.front().level;
    std::vector<Cell> idx;
    idx.reserve(cells.size());
    for (const auto& a : cells) {
        a.validate();
        if (a.level != level) throw std::invalid_argument("mixed cell levels");
        idx.push_back(Cell{a.kx(), a.ky()});
    }
    return build_region(level, idx);
}

namespace {

void enumerate_descendants(i64 k, i64 m, int steps, std::vector<Cell>& out) {
    if (steps == 0) {
        out.push_back(Cell{k, m});
        return;
    }
    for (int dx = 0; dx < 3; ++dx)
        for (int dy = 0; dy < 3; ++dy) {
            if (dx == 1 && dy == 1) continue;
            enumerate_descendants(3 * k + dx, 3 * m + dy, steps - 1, out);
        }
}

}  // namespace

std::vector<Cell> region_cells_at_level(const Region& d, int level) {
    if (level < d.cell_level || level > kMaxLevel)
        throw std::invalid_argument("level out of range");
    std::vector<Cell> out;
    out.reserve(d.cells.size() << std::min(3 * (level - d.cell_level), 24));
    for (auto key : d.cells) {
        Cell c = cell_from_key(key);
        enumerate_descendants(c.k, c.m, level - d.cell_level, out);
    }
    std::sort(out.begin(), out.end(),
              [](const Cell& a, const Cell& b) { return a.k != b.k ? a.k < b.k : a.m < b.m; });
    return out;
}

double dist_to_boundary(const Point& p, const Region& d) {
    const int scale = std::max(p.resolution, d.cell_level);
    const i64 f = 2 * pow3(scale - p.resolution);
    const i64 px = p.ix * f, py = p.iy * f;
    if (!d.closure_contains(px, py, scale) || d.boundary_dist2(px, py, scale) == 0)
        throw std::invalid_argument("point not interior to region");
    const double unit = 0.5 / static_cast<double>(pow3(scale));
    return std::sqrt(static_cast<double>(d.boundary_dist2(px, py, scale))) * unit;
}

Point inner_fatness_point(const Point& q, double r, const Region& d, double theta) {
    if (!(r > 0) || r > d.R0 * (1 + 1e-12))
        throw std::invalid_argument("radius outside (0, R0]");
    if (!d.on_boundary(q)) throw std::invalid_argument("base point not on boundary");
    int g = 0;
    while (1.0 / static_cast<double>(pow3(g)) > theta * r / 4) {
        if (++g > kMaxResolution) throw std::invalid_argument("resolution cap exceeded");
    }
    const int scale = std::max({g, d.cell_level, q.resolution});
    const i64 step = 2 * pow3(scale - g);
    const i64 qx = q.ix * 2 * pow3(scale - q.resolution);
    const i64 qy = q.iy * 2 * pow3(scale - q.resolution);
    const long double unit = 2.0L * pow3(scale);
    const long double t_delta2 = theta * r * unit * (theta * r * unit);
    const long double t_far2 = (1 - theta) * r * unit * ((1 - theta) * r * unit);

    // expanding square rings of grid points around Q; a min-heap hands out
    // candidates in (distance, ix, iy) order once no closer ring remains
    struct Cand {
        i128 d2;
        i64 gx, gy;
        bool operator>(const Cand& o) const {
            if (d2 != o.d2) return d2 > o.d2;
            if (gx != o.gx) return gx > o.gx;
            return gy > o.gy;
        }
    };
    std::priority_queue<Cand, std::vector<Cand>, std::greater<>> heap;
    const i64 cgx = floor_div(qx + step / 2, step), cgy = floor_div(qy + step / 2, step);
    auto push_point = [&](i64 gx, i64 gy) {
        const i64 px = gx * step, py = gy * step;
        const i128 d2 =
            static_cast<i128>(px - qx) * (px - qx) + static_cast<i128>(py - qy) * (py - qy);
        if (static_cast<long double>(d2) <= t_far2 * (1 + 1e-12L))
            heap.push(Cand{d2, gx, gy});
    };
    auto test_point = [&](i64 gx, i64 gy) -> bool {
        if (gx < 0 || gy < 0 || gx > pow3(g) || gy > pow3(g)) return false;
        const i64 px = gx * step, py = gy * step;
        if (!d.closure_contains(px, py, scale)) return false;
        const i128 d2 = d.boundary_dist2(px, py, scale);
        if (static_cast<long double>(d2) < t_delta2 * (1 - 1e-12L)) return false;
        return in_carpet(Point{g, gx, gy}, g);
    };
    const i64 max_ring = 2 + static_cast<i64>(std::sqrt((double)t_far2) / step);
    for (i64 ring = 0; ring <= max_ring + 1; ++ring) {
        if (ring == 0) {
            push_point(cgx, cgy);
        } else {
            for (i64 t = -ring; t <= ring; ++t) {
                push_point(cgx + t, cgy - ring);
                push_point(cgx + t, cgy + ring);
                if (t > -ring && t < ring) {
                    push_point(cgx - ring, cgy + t);
                    push_point(cgx + ring, cgy + t);
                }
            }
        }
        // points strictly closer than the next ring can ever reach are final
        const i64 safe = (ring)*step;  // next ring's min distance >= ring*step
        const i128 safe2 = static_cast<i128>(safe) * safe;
        while (!heap.empty() && heap.top().d2 < safe2) {
            Cand c = heap.top();
            heap.pop();
            if (test_point(c.gx, c.gy)) return Point{g, c.gx, c.gy};
        }
    }
    while (!heap.empty()) {
        Cand c = heap.top();
        heap.pop();
        if (test_point(c.gx, c.gy)) return Point{g, c.gx, c.gy};
    }
    throw std::runtime_error("inner fatness violated");
}

OuterMass outer_fatness_measure(const Point& q, double r, const Region& d) {
    if (!(r > 0) || r > d.R0 * (1 + 1e-12))
        throw std::invalid_argument("radius outside (0, R0]");
    if (!d.on_boundary(q)) throw std::invalid_argument("base point not on boundary");
    int g = 0;
    while (1.0 / static_cast<double>(pow3(g)) > r / 27) {
        if (++g > kMaxResolution) throw std::invalid_argument("resolution cap exceeded");
    }
    const int scale = std::max(g, q.resolution);
    const i64 s = 2 * pow3(scale - g);  // cell side in point units
    const i64 qx = q.ix * 2 * pow3(scale - q.resolution);
    const i64 qy = q.iy * 2 * pow3(scale - q.resolution);
    const long double unit = 2.0L * pow3(scale);
    const long double r2 = r * unit * (r * unit);

    const double qxf = static_cast<double>(q.ix) / pow3(q.resolution);
    const double qyf = static_cast<double>(q.iy) / pow3(q.resolution);
    const i64 side = pow3(g);
    const i64 klo = static_cast<i64>(std::floor((qxf - r) * side)) - 1;
    const i64 khi = static_cast<i64>(std::floor((qxf + r) * side)) + 1;
    const i64 mlo = static_cast<i64>(std::floor((qyf - r) * side)) - 1;
    const i64 mhi = static_cast<i64>(std::floor((qyf + r) * side)) + 1;

    OuterMass out;
    out.level = g;
    for (i64 k = klo; k <= khi; ++k)
        for (i64 m = mlo; m <= mhi; ++m) {
            i128 worst = 0;
            for (int cx = 0; cx <= 1; ++cx)
                for (int cy = 0; cy <= 1; ++cy) {
                    const i64 px = (k + cx) * s, py = (m + cy) * s;
                    const i128 d2 = static_cast<i128>(px - qx) * (px - qx) +
                                    static_cast<i128>(py - qy) * (py - qy);
                    worst = std::max(worst, d2);
                }
            if (static_cast<long double>(worst) > r2) continue;  // not fully inside
            if (!cell_present(k, m)) continue;
            if (d.contains_lattice(k, m, g)) continue;
            ++out.cell_count;
        }
    out.value = static_cast<double>(out.cell_count) * cell_measure(g);
    return out;
}

LayerDecomposition layer_decomposition(const Region& d, const Point& q, double r,
                                       int depth, double alpha, double dw) {
    if (depth < 0 || depth > 8) throw std::invalid_argument("depth out of range");
    if (!(r > 0) || r >= d.R0 / 2) throw std::invalid_argument("radius outside (0, R0/2)");
    if (!d.on_boundary(q)) throw std::invalid_argument("base point not on boundary");
    int k0 = 0;
    while (1.0 / static_cast<double>(pow3(k0 + 1)) >= 1.25 * r) ++k0;
    if (k0 < d.cell_level) throw std::logic_error("layer base above region level");
    if (k0 + depth + 1 > kMaxResolution)
        throw std::invalid_argument("resolution cap exceeded");

    LayerDecomposition out;
    out.base_level = k0;
    out.depth = depth;

    auto touches_boundary = [&](i64 k, i64 m, int level) {
        const i64 s = pow3(level - d.cell_level);
        for (const Face& f : d.boundary)
            if (square_seg_dist2(k, m, k + 1, m + 1, f.axis, f.c * s, f.lo * s,
                                 f.hi * s) == 0)
                return true;
        return false;
    };
    auto boundary_gap2 = [&](i64 k, i64 m, int level) {
        const i64 s = pow3(level - d.cell_level);
        i128 best = std::numeric_limits<i64>::max();
        for (const Face& f : d.boundary)
            best = std::min(best, square_seg_dist2(k, m, k + 1, m + 1, f.axis, f.c * s,
                                                   f.lo * s, f.hi * s));
        return best;
    };

    // H_0 by window enumeration around Q
    const double qxf = static_cast<double>(q.ix) / pow3(q.resolution);
    const double qyf = static_cast<double>(q.iy) / pow3(q.resolution);
    const double rad = 1.25 * r;
    const i64 side0 = pow3(k0);
    const int scale = std::max(k0, q.resolution);
    const i64 s0 = 2 * pow3(scale - k0);
    const i64 qx = q.ix * 2 * pow3(scale - q.resolution);
    const i64 qy = q.iy * 2 * pow3(scale - q.resolution);
    const long double rad2 = rad * 2.0L * pow3(scale) * (rad * 2.0L * pow3(scale));

    std::vector<uint64_t> h0;
    for (i64 k = static_cast<i64>(std::floor((qxf - rad) * side0)) - 1;
         k <= static_cast<i64>(std::floor((qxf + rad) * side0)) + 1; ++k)
        for (i64 m = static_cast<i64>(std::floor((qyf - rad) * side0)) - 1;
             m <= static_cast<i64>(std::floor((qyf + rad) * side0)) + 1; ++m) {
            if (!cell_present(k, m)) continue;
            if (!d.contains_lattice(k, m, k0)) continue;
            if (!touches_boundary(k, m, k0)) continue;
            // meets the closed ball B(Q, 5r/4)
            i64 dx = 0, dy = 0;
            if (qx < k * s0) dx = k * s0 - qx;
            else if (qx > (k + 1) * s0) dx = qx - (k + 1) * s0;
            if (qy < m * s0) dy = m * s0 - qy;
            else if (qy > (m + 1) * s0) dy = qy - (m + 1) * s0;
            const i128 d2 = static_cast<i128>(dx) * dx + static_cast<i128>(dy) * dy;
            if (static_cast<long double>(d2) > rad2) continue;
            h0.push_back(cell_key(k, m));
        }
    std::sort(h0.begin(), h0.end());
    out.layers.push_back(h0);
    out.h0_count = static_cast<int>(h0.size());

    for (int k = 1; k <= depth; ++k) {
        std::vector<uint64_t> layer;
        for (auto key : out.layers[k - 1]) {
            Cell c = cell_from_key(key);
            for (int dx = 0; dx < 3; ++dx)
                for (int dy = 0; dy < 3; ++dy) {
                    if (dx == 1 && dy == 1) continue;
                    const i64 ck = 3 * c.k + dx, cm = 3 * c.m + dy;
                    if (touches_boundary(ck, cm, k0 + k)) layer.push_back(cell_key(ck, cm));
                }
        }
        std::sort(layer.begin(), layer.end());
        out.layers.push_back(std::move(layer));
    }

    for (int k = 0; k <= depth; ++k) {
        const i64 bound = static_cast<i64>(out.h0_count) * (2 * pow3(k) + 1);
        if (static_cast<i64>(out.layers[k].size()) > bound) out.count_bound_ok = false;
    }

    for (int k = 0; k + 1 <= depth; ++k) {
        std::vector<uint64_t> ring;
        const auto& next = out.layers[k + 1];
        for (auto key : out.layers[k]) {
            Cell c = cell_from_key(key);
            for (int dx = 0; dx < 3; ++dx)
                for (int dy = 0; dy < 3; ++dy) {
                    if (dx == 1 && dy == 1) continue;
                    const uint64_t child = cell_key(3 * c.k + dx, 3 * c.m + dy);
                    if (!std::binary_search(next.begin(), next.end(), child))
                        ring.push_back(child);
                }
        }
        std::sort(ring.begin(), ring.end());
        i128 min_gap2 = std::numeric_limits<i64>::max();
        for (auto key : ring) {
            Cell c = cell_from_key(key);
            min_gap2 = std::min(min_gap2, boundary_gap2(c.k, c.m, k0 + k + 1));
        }
        const double unit = 1.0 / static_cast<double>(pow3(k0 + k + 1));
        out.ring_min_delta.push_back(
            ring.empty() ? 0.0 : std::sqrt(static_cast<double>(min_gap2)) * unit);
        if (!ring.empty() && min_gap2 < 1) out.delta_bound_ok = false;
        out.ring_measure.push_back(static_cast<double>(ring.size()) *
                                   cell_measure(k0 + k + 1));
        out.rings.push_back(std::move(ring));
    }

    const double dim = std::log(8.0) / std::log(3.0);
    const double expo = alpha * dw / 2 - dim + 1;
    for (int k = 0; k <= depth; ++k) {
        out.series_terms.push_back(std::pow(3.0, expo * k));
        out.series_sum += out.series_terms.back();
    }
    return out;
}

FractalParams make_params(double alpha, double dw) {
    if (!(alpha > 0) || !(alpha < 2)) throw std::invalid_argument("alpha out of range");
    if (!(dw > 2)) throw std::invalid_argument("dw out of range");
    FractalParams p;
    p.alpha = alpha;
    p.dw = dw;
    p.d = std::log(8.0) / std::log(3.0);
    p.d_alpha = p.d + alpha * dw / 2;
    p.thr_carleson = 2 / dw;
    p.thr_green = 2 * p.d / dw;
    p.thr_bhp = 2 * (p.d - 1) / dw;
    p.ok_carleson = alpha < p.thr_carleson;
    p.ok_green = alpha < p.thr_green;
    p.ok_bhp = alpha < p.thr_bhp;
    return p;
}

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hex[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace carpet
