#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Exact cell geometry for the planar carpet obtained by repeatedly removing
// the open middle ninth of every square. All membership, adjacency and
// boundary decisions are made in integer (base-3) arithmetic; floating point
// enters only through Euclidean distances of already-exact quantities.
//
// Lattice convention: a cell at level n is the closed square
//   [k*3^-n, (k+1)*3^-n] x [m*3^-n, (m+1)*3^-n].
// Indices may be negative: the pattern extends over the whole plane through
// floored base-3 digits, so regions sitting at the rim of the unit square
// still see carpet structure on their outside. A cell is present iff no
// digit position of (k, m) carries the pair (1,1).

namespace carpet {

using i64 = int64_t;
using i128 = __int128_t;

constexpr int kMaxLevel = 10;        // enumeration ceiling: 8^10 cells
constexpr int kMaxResolution = 14;   // guard for internal grid refinement

i64 pow3(int n);

// digit test on the extended lattice; level-independent
bool cell_present(i64 k, i64 m);

inline i64 floor_div(i64 a, i64 b) {
    i64 q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

struct Cell {
    i64 k = 0, m = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

// packs possibly-negative lattice indices; usable as a sort/search key
inline uint64_t cell_key(i64 k, i64 m) {
    constexpr i64 off = 1 << 20;
    return (static_cast<uint64_t>(k + off) << 22) | static_cast<uint64_t>(m + off);
}
inline Cell cell_from_key(uint64_t key) {
    constexpr i64 off = 1 << 20;
    return Cell{static_cast<i64>(key >> 22) - off,
                static_cast<i64>(key & ((1ull << 22) - 1)) - off};
}

// address as explicit digit pairs, most significant first
struct CellAddress {
    int level = 0;
    std::vector<std::array<uint8_t, 2>> digits;

    static CellAddress from_indices(i64 k, i64 m, int level);
    i64 kx() const;
    i64 ky() const;
    void validate() const;  // throws on bad digits or a removed square
};

std::vector<CellAddress> cells_at_level(int n);  // all 8^n cells, lex order
double cell_measure(int n);                      // 8^-n

// exact ternary point: coordinates (ix, iy) / 3^resolution
struct Point {
    int resolution = 0;
    i64 ix = 0, iy = 0;
};

// p in F_n, decided from digits; candidate cells on grid lines are all tried
bool in_carpet(const Point& p, int n);

// cell centers and edge midpoints sit on the half grid: (px, py) / (2*3^scale)
struct HalfPoint {
    int scale = 0;
    i64 px = 0, py = 0;
};
HalfPoint to_half(const Point& p);
HalfPoint rescale_half(const HalfPoint& p, int scale);  // scale >= p.scale
i128 half_dist2(HalfPoint a, HalfPoint b);              // units of the finer scale
double half_dist(const HalfPoint& a, const HalfPoint& b);

// axis-aligned boundary edge at the region's cell grid; axis 0: the segment
// {x = c} x [lo, hi], axis 1: [lo, hi] x {y = c}; units of 3^-cell_level
struct Face {
    int axis;
    i64 c, lo, hi;
};

struct Region {
    int cell_level = 0;                // m0
    std::vector<uint64_t> cells;       // sorted cell keys
    std::vector<Face> boundary;        // faces exposed to carpet outside D
    double R1 = 0, R2 = 0, R0 = 0;

    bool contains_cell(i64 k, i64 m) const;             // at cell_level
    bool contains_lattice(i64 k, i64 m, int level) const;  // via ancestor
    Cell lattice_bounds_lo() const;
    Cell lattice_bounds_hi() const;    // inclusive cell index box

    // exact point queries; point coordinates in units of 1/(2*3^scale)
    i128 boundary_dist2(i64 px, i64 py, int scale) const;
    bool closure_contains(i64 px, i64 py, int scale) const;
    bool interior_contains(i64 px, i64 py, int scale) const;
    bool on_boundary(i64 px, i64 py, int scale) const;

    bool interior_contains(const Point& p) const;
    bool on_boundary(const Point& p) const;

    std::string hash() const;
};

Region build_region(int cell_level, const std::vector<Cell>& cells);
Region build_region(const std::vector<CellAddress>& cells);

// descendants of every region cell at the given level, lex sorted
std::vector<Cell> region_cells_at_level(const Region& d, int level);

// distance from an interior point to the region boundary (exact faces)
double dist_to_boundary(const Point& p, const Region& d);

// witness A with B(A, theta*r) inside D intersect B(Q, r); deterministic:
// coarsest grid with spacing <= theta*r/4, scanned by increasing |A-Q|,
// ties broken lexicographically
Point inner_fatness_point(const Point& q, double r, const Region& d,
                          double theta = 1.0 / 9.0);

// certified lower bound for mu(B(Q,r) \ D) by counting whole cells at the
// finest level with spacing <= r/27
struct OuterMass {
    double value = 0;
    i64 cell_count = 0;
    int level = 0;
};
OuterMass outer_fatness_measure(const Point& q, double r, const Region& d);

// boundary layers: H_0 collects cells at the coarsest level with
// 3^-k0 >= 5r/4 that sit inside D, touch its boundary and meet B(Q, 5r/4);
// H_k refines H_0 toward the boundary; rings are H_k \ H_{k+1}
struct LayerDecomposition {
    int base_level = 0;  // k0
    int depth = 0;       // K
    std::vector<std::vector<uint64_t>> layers;  // level base_level + k
    std::vector<std::vector<uint64_t>> rings;   // level base_level + k + 1
    std::vector<double> ring_min_delta;
    std::vector<double> ring_measure;
    int h0_count = 0;
    bool count_bound_ok = true;  // |H_k| <= h0_count * (2*3^k + 1)
    bool delta_bound_ok = true;  // ring distance >= one ring-level cell side
    std::vector<double> series_terms;  // 3^{k (alpha dw/2 - d + 1)}, k = 0..K
    double series_sum = 0;
};
LayerDecomposition layer_decomposition(const Region& d, const Point& q,
                                       double r, int depth, double alpha,
                                       double dw);

struct FractalParams {
    double alpha = 0.5;
    double dw = 2.097;
    double d = 0;        // log 8 / log 3
    double d_alpha = 0;  // d + alpha*dw/2
    double thr_carleson = 0;  // 2/dw
    double thr_green = 0;     // 2d/dw
    double thr_bhp = 0;       // 2(d-1)/dw
    bool ok_carleson = false, ok_green = false, ok_bhp = false;
};
FractalParams make_params(double alpha, double dw = 2.097);

uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(uint64_t h);

}  // namespace carpet
