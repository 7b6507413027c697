// Acceptance gate: every shipped property in one binary, one verdict line per
// criterion. Exit status is the number of failed criteria. Runs at desk scale
// with fixed seeds, so a pass here is reproducible bit for bit.
#include <json.hpp>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "carpet/harness.hpp"
#include "carpet/oracle.hpp"

using namespace carpet;
using json = nlohmann::json;

namespace {

int failures = 0;

double now_s() {
    using clk = std::chrono::steady_clock;
    static const clk::time_point t0 = clk::now();
    return std::chrono::duration<double>(clk::now() - t0).count();
}

void criterion(int id, const char* what, double budget_s,
               const std::function<bool(std::string&)>& body) {
    std::string note;
    bool ok = false;
    const double t0 = now_s();
    try {
        ok = body(note);
    } catch (const std::exception& e) {
        note = std::string("exception: ") + e.what();
    }
    const double dt = now_s() - t0;
    if (dt > budget_s) {
        ok = false;
        note += (note.empty() ? "" : "; ") + std::string("over time budget");
    }
    if (!ok) ++failures;
    std::printf("criterion %2d  %-28s %s  (%.1fs)%s%s\n", id, what, ok ? "PASS" : "FAIL", dt,
                note.empty() ? "" : "  ", note.c_str());
    std::fflush(stdout);
}

Region unit_region() { return build_region(0, {Cell{0, 0}}); }
Region domino_region() { return build_region(1, {Cell{0, 0}, Cell{1, 0}}); }
Region ell_region() { return build_region(1, {Cell{0, 0}, Cell{1, 0}, Cell{0, 1}}); }

struct ZTrack {
    double worst = 0;
    bool ok = true;
    void add(double est, double exact, double se) {
        if (se <= 0) {
            ok = false;
            return;
        }
        const double z = std::abs(est - exact) / se;
        worst = std::max(worst, z);
        if (z > 3.0) ok = false;
    }
};

// --- 1: Monte Carlo estimators against the exact linear solves -------------

bool oracle_equivalence(std::string& note) {
    struct Case {
        Region d;
        Cell start, green_target;
        std::function<bool(const Cell&)> exit_set;
    };
    std::vector<Case> cases;
    cases.push_back({unit_region(), Cell{1, 0}, Cell{2, 2},
                     [](const Cell& c) { return c.k >= 9; }});
    cases.push_back({ell_region(), Cell{2, 1}, Cell{5, 1},
                     [](const Cell& c) { return c.m >= 6; }});

    ZTrack zt;
    for (const Case& cs : cases) {
        for (double alpha : {0.3, 0.5, 0.7}) {
            ModelConfig mc;
            mc.level = 2;
            mc.alpha = alpha;
            const JumpChainModel mdl(cs.d, mc);
            const AbsorbingSystem sys(mdl);
            RunOptions ro;
            ro.n_samples = 100'000;
            ro.seed = 0xACCE5501u + static_cast<uint64_t>(alpha * 100);

            const EstimateResult hm = est_harmonic_measure(mdl, cs.start, cs.exit_set, ro);
            double hm_exact = 0;
            const Eigen::VectorXd law = sys.exit_law(cs.start);
            for (size_t i = 0; i < sys.absorbing().size(); ++i)
                if (cs.exit_set(sys.absorbing()[i])) hm_exact += law[static_cast<int>(i)];
            zt.add(hm.value, hm_exact, hm.std_error);

            const EstimateResult gr = est_green(mdl, cs.start, cs.green_target, ro);
            zt.add(gr.value, sys.green(cs.start, cs.green_target), gr.std_error);

            const EstimateResult et = est_exit_time(mdl, cs.start, ro);
            zt.add(et.value, sys.expected_exit_time(cs.start), et.std_error);
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "18 estimates, worst z = %.2f", zt.worst);
    note = buf;
    return zt.ok;
}

// --- 2: subordinator Laplace transform --------------------------------------

bool subordinator_law(std::string& note) {
    const double beta = 0.25;  // alpha = 0.5
    const double lam[3] = {0.5, 1.0, 2.0};
    RunOptions ro;
    ro.n_samples = 1'000'000;
    ro.seed = 0x5AB0u;
    const MultiResult res = mc_run(ro, 3, [&](rng::Stream& rs, double* o) {
        const double s = stable_subordinator_unit(rs, beta);
        for (int j = 0; j < 3; ++j) o[j] = std::exp(-lam[j] * s);
        return true;
    });
    ZTrack zt;
    double worst_dev = 0;
    for (int j = 0; j < 3; ++j) {
        const double target = std::exp(-std::pow(lam[j], beta));
        zt.add(res.value[j], target, res.std_error[j]);
        worst_dev = std::max(worst_dev, std::abs(res.value[j] - target));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "worst dev %.2e, worst z = %.2f", worst_dev, zt.worst);
    note = buf;
    return zt.ok && worst_dev < 0.002;
}

// --- 3: exit-time scaling exponent ------------------------------------------

bool exit_time_scaling(std::string& note) {
    CheckOptions opt;
    opt.level = 7;
    opt.alpha = 0.5;
    opt.n_samples = 2000;
    opt.seed = 31415;
    const ScalingReport rep = run_scaling(opt);
    if (rep.radii.size() != 4) {
        note = "unexpected radius ladder";
        return false;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "slope %.4f, target %.4f", rep.slope, rep.slope_target);
    note = buf;
    return rep.pass;
}

// --- 4: kernel exponent ------------------------------------------------------

bool kernel_exponent(std::string& note) {
    ModelConfig mc;
    mc.level = 4;
    mc.alpha = 0.5;
    const Region d = unit_region();
    const JumpChainModel mdl(d, mc);
    const FractalParams& fp = mdl.params();

    const Cell x{1, 0};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    i64 n = 0;
    for (i64 k = mdl.win_klo(); k <= mdl.win_khi(); ++k)
        for (i64 m = mdl.win_mlo(); m <= mdl.win_mhi(); ++m) {
            if ((k == x.k && m == x.m) || !mdl.is_state(k, m)) continue;
            if ((k + m) % 5 != 0) continue;  // thin the pair set, keep it mixed
            const double dk = static_cast<double>(k - x.k), dm = static_cast<double>(m - x.m);
            const double lx = 0.5 * std::log(dk * dk + dm * dm);
            const double ly = std::log(mdl.pair_weight(x, Cell{k, m}));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
    const double nn = static_cast<double>(n);
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%lld pairs, slope %.4f, target %.4f",
                  static_cast<long long>(n), slope, -fp.d_alpha);
    note = buf;
    return n > 100 && std::abs(slope + fp.d_alpha) <= 0.03 * fp.d_alpha;
}

// --- 5: boundary layer combinatorics and series -----------------------------

bool layer_combinatorics(std::string& note) {
    const Region d = unit_region();
    const Point corner{0, 0, 0}, edge{1, 1, 0};
    for (const Point& q : {corner, edge}) {
        for (double alpha : {0.5, 0.9}) {
            const LayerDecomposition ld = layer_decomposition(d, q, 1.0 / 9.0, 5, alpha, 2.097);
            if (!ld.count_bound_ok || !ld.delta_bound_ok) {
                note = "layer count or separation bound violated";
                return false;
            }
            if (ld.layers.size() != 6 || ld.series_terms.size() != 6) {
                note = "layer depth off";
                return false;
            }
            double sum = 0;
            for (size_t k = 0; k + 1 < ld.series_terms.size(); ++k) {
                const bool shrinking = ld.series_terms[k + 1] < ld.series_terms[k];
                if (alpha == 0.5 && !shrinking) {
                    note = "series terms not decreasing at alpha 0.5";
                    return false;
                }
                if (alpha == 0.9 && shrinking) {
                    note = "series terms not growing at alpha 0.9";
                    return false;
                }
            }
            for (double t : ld.series_terms) sum += t;
            if (alpha == 0.5) {
                const double q3 = ld.series_terms[1] / ld.series_terms[0];
                const double bound = ld.series_terms[0] / (1.0 - q3);
                if (!(sum <= bound * (1 + 1e-9))) {
                    note = "partial sums exceed the geometric bound";
                    return false;
                }
            }
            if (std::abs(sum - ld.series_sum) > 1e-9 * std::max(1.0, sum)) {
                note = "series sum bookkeeping off";
                return false;
            }
        }
    }
    note = "counts, separations and series behave at both exponents";
    return true;
}

// --- 6: scaffold construction over the full base-point grid -----------------

bool scaffold_grid(std::string& note) {
    struct Domain {
        Region d;
        i64 span;  // resolution-2 grid extent to scan
    };
    std::vector<Domain> doms;
    doms.push_back({unit_region(), 9});
    doms.push_back({domino_region(), 9});
    doms.push_back({ell_region(), 9});

    int built = 0;
    for (const Domain& dom : doms) {
        for (i64 ix = 0; ix <= dom.span; ++ix)
            for (i64 iy = 0; iy <= dom.span; ++iy) {
                const Point q{2, ix, iy};
                if (!dom.d.on_boundary(q)) continue;
                for (int rexp : {2, 3}) {
                    const double r = 1.0 / static_cast<double>(pow3(rexp));
                    if (!(r < dom.d.R0 / 2)) continue;
                    const BhpGeometry g = build_bhp_geometry(dom.d, q, r);
                    ++built;
                    const size_t n0 = g.ring.size();
                    if (n0 < 18 || n0 > 54) {
                        note = "ring count out of range";
                        return false;
                    }
                    if (g.contact.size() != n0 || g.witness.size() != n0 ||
                        g.at_corner.size() != n0 || g.ring_deep >= n0) {
                        note = "scaffold bookkeeping out of step";
                        return false;
                    }
                    // membership consistency by enumeration at level N+3,
                    // out to just past the 2r ball where everything dies off
                    const int L3 = g.n_scale + 3;
                    const i64 f = pow3(3);  // cells per radius r at level N+3
                    const i64 qk = ix * pow3(L3 - 2), qm = iy * pow3(L3 - 2);
                    for (i64 k = qk - 2 * f - 2; k <= qk + 2 * f + 2; ++k)
                        for (i64 m = qm - 2 * f - 2; m <= qm + 2 * f + 2; ++m) {
                            const Cell c{k, m};
                            if (!cell_present(k, m)) continue;
                            const bool om = g.cell_in_omega(c, L3);
                            const bool ind = g.cell_in_domain(c, L3);
                            const bool de = g.cell_in_delta(c, L3);
                            const bool b1 = g.cell_in_b1(c, L3);
                            if (b1 && !de) {
                                note = "deep contact ball leaks out of the collar";
                                return false;
                            }
                            if (de && (!ind || om)) {
                                note = "collar leaks out of the domain";
                                return false;
                            }
                            const i64 dx = (2 * k + 1) - 2 * qk, dy = (2 * m + 1) - 2 * qm;
                            const bool in2r =
                                static_cast<i128>(dx) * dx + static_cast<i128>(dy) * dy <=
                                static_cast<i128>(4 * f) * (4 * f);
                            const bool want = om || de || (!ind && in2r);
                            if (g.cell_in_k(c, L3) != want) {
                                note = "kernel set disagrees with its definition";
                                return false;
                            }
                        }
                }
            }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d scaffolds built and enumerated", built);
    note = buf;
    return built >= 100;
}

// --- 7, 8, 9: harness checks -------------------------------------------------

bool report_ok(const BhpReport& rep, std::string& note) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s: c %.4g next %.4g%s%s", rep.name.c_str(),
                  rep.measured_constant, rep.measured_next, rep.decided ? "" : " UNDECIDED",
                  rep.pass ? "" : " FAIL");
    if (!note.empty()) note += "; ";
    note += buf;
    return rep.decided && rep.pass;
}

bool lemma10_floor(std::string& note) {
    CheckOptions opt;
    opt.level = 5;
    opt.n_samples = 20'000;
    opt.seed = 777;
    opt.grid_cap = 24;
    return report_ok(check_lemma10(unit_region(), Point{0, 0, 0}, 1.0 / 9.0, opt), note);
}

bool green_comparability(std::string& note) {
    CheckOptions opt;
    opt.level = 4;
    opt.n_samples = 100'000;
    opt.seed = 778;
    opt.grid_cap = 12;
    const Region d = unit_region();
    const Point q{0, 0, 0};
    const bool up = report_ok(check_lemma11(d, q, 1.0 / 9.0, opt), note);
    const bool dn = report_ok(check_lemma12(d, q, 1.0 / 9.0, opt), note);
    return up && dn;
}

bool bhp_suite(std::string& note) {
    CheckOptions opt;
    opt.level = 5;
    opt.n_samples = 20'000;
    opt.seed = 424242;
    opt.grid_cap = 6;
    const std::vector<BhpReport> reps =
        run_bhp_suite(unit_region(), Point{0, 0, 0}, 1.0 / 9.0, opt);
    bool ok = reps.size() == 5;
    for (const BhpReport& rep : reps) ok = report_ok(rep, note) && ok;
    return ok;
}

// --- 10: byte-identical reports across worker threads -----------------------

bool thread_reproducibility(std::string& note) {
    const std::string bin = CARPET_SIM_BIN;
    std::vector<std::string> dumps;
    for (int threads : {1, 4, 8}) {
        const std::string out =
            "/tmp/carpet_accept_" + std::to_string(getpid()) + "_t" + std::to_string(threads) +
            ".json";
        const std::string cmd = bin +
                                " verify lemma10 --level 4 --samples 2000 --seed 777"
                                " --grid-cap 4 --threads " +
                                std::to_string(threads) + " --out " + out + " >/dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) != 0) {
            note = "verify run failed";
            return false;
        }
        std::ifstream in(out);
        json doc;
        in >> doc;
        doc.erase("timestamp");
        dumps.push_back(doc.dump());
    }
    if (dumps[0] != dumps[1] || dumps[0] != dumps[2]) {
        note = "reports differ across 1/4/8 threads";
        return false;
    }
    note = "reports byte-identical across 1/4/8 threads";
    return true;
}

}  // namespace

int main() {
    std::printf("acceptance gate\n");
    criterion(1, "oracle equivalence", 120, oracle_equivalence);
    criterion(2, "subordinator law", 30, subordinator_law);
    criterion(3, "exit-time scaling", 600, exit_time_scaling);
    criterion(4, "kernel exponent", 60, kernel_exponent);
    criterion(5, "layer combinatorics", 60, layer_combinatorics);
    criterion(6, "scaffold grid", 60, scaffold_grid);
    criterion(7, "exit mass floor", 1200, lemma10_floor);
    criterion(8, "green comparability", 1200, green_comparability);
    criterion(9, "boundary harnack suite", 1800, bhp_suite);
    criterion(10, "thread reproducibility", 300, thread_reproducibility);
    std::printf("%s (%d of 10 failed)\n", failures ? "GATE FAIL" : "GATE PASS", failures);
    return failures ? 1 : 0;
}
