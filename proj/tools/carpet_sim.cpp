#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "carpet/config.hpp"
#include "carpet/oracle.hpp"

using json = nlohmann::json;
using namespace carpet;

namespace {

// command line values; absent options leave the config-file or default value
struct CliValues {
    std::optional<int> level, threads, halo, radius_exp;
    std::optional<i64> samples, grid_cap;
    std::optional<uint64_t> seed;
    std::optional<double> alpha, dw, t0;
};

struct Common {
    CliValues cli;
    std::string config_file, region_file, out_file, plot_file;
    std::string fixtures_dir;
    std::string q_str = "0,0,0";
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_file, "key=value config file");
    sub->add_option("--region", c.region_file, "region description file");
    sub->add_option("--out", c.out_file, "write the JSON report here");
    sub->add_option("--emit-plot", c.plot_file, "write plot data (CSV) here");
    sub->add_option("--fixtures", c.fixtures_dir, "fixtures directory");
    sub->add_option("--q", c.q_str, "base point ix,iy,res");
    sub->add_option("--level", c.cli.level, "cell resolution level");
    sub->add_option("--samples", c.cli.samples, "trajectories per estimate");
    sub->add_option("--seed", c.cli.seed, "master seed");
    sub->add_option("--threads", c.cli.threads, "worker threads");
    sub->add_option("--alpha", c.cli.alpha, "stable index");
    sub->add_option("--dw", c.cli.dw, "walk dimension");
    sub->add_option("--t0", c.cli.t0, "holding time scale");
    sub->add_option("--halo", c.cli.halo, "window padding in region cells");
    sub->add_option("--grid-cap", c.cli.grid_cap, "start grid size cap");
    sub->add_option("--radius-exp", c.cli.radius_exp, "radius is 3^-radius_exp");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg;
    if (!c.config_file.empty()) load_config(c.config_file, cfg);
    if (c.cli.level) cfg.level = *c.cli.level;
    if (c.cli.samples) cfg.samples = *c.cli.samples;
    if (c.cli.seed) cfg.seed = *c.cli.seed;
    if (c.cli.threads) cfg.threads = *c.cli.threads;
    if (c.cli.alpha) cfg.alpha = *c.cli.alpha;
    if (c.cli.dw) cfg.dw = *c.cli.dw;
    if (c.cli.t0) cfg.t0 = *c.cli.t0;
    if (c.cli.halo) cfg.halo = *c.cli.halo;
    if (c.cli.grid_cap) cfg.grid_cap = *c.cli.grid_cap;
    if (c.cli.radius_exp) cfg.radius_exp = *c.cli.radius_exp;
    return cfg;
}

Region resolve_region(const Common& c) {
    if (c.region_file.empty()) return build_region(0, {Cell{0, 0}});
    return load_region_file(c.region_file);
}

std::string resolve_fixtures(const Common& c) {
    if (!c.fixtures_dir.empty()) return c.fixtures_dir;
    if (const char* env = std::getenv("CARPET_SIM_FIXTURES")) return env;
    return "";
}

// threads stays out: results are bit-identical across worker counts, so the
// emitted document depends on the physics configuration alone
json config_json(const RunConfig& cfg) {
    return json{{"level", cfg.level}, {"samples", cfg.samples}, {"seed", cfg.seed},
                {"alpha", cfg.alpha}, {"dw", cfg.dw},           {"t0", cfg.t0},
                {"halo", cfg.halo},   {"grid_cap", cfg.grid_cap},
                {"radius_exp", cfg.radius_exp}};
}

json report_json(const BhpReport& r) {
    json d = json::object();
    for (const auto& [k, v] : r.details) d[k] = v;
    return json{{"name", r.name},
                {"level", r.level},
                {"r", r.r},
                {"alpha", r.alpha},
                {"measured_constant", r.measured_constant},
                {"measured_next", r.measured_next},
                {"cross_level_ratio", r.cross_level_ratio},
                {"stderr_band", r.stderr_band},
                {"pass", r.pass},
                {"decided", r.decided},
                {"note", r.note},
                {"details", d},
                {"config_hashes", r.config_hashes}};
}

json estimate_json(const EstimateResult& e) {
    return json{{"value", e.value},
                {"std_error", e.std_error},
                {"n_samples", e.n_samples},
                {"seed", e.seed},
                {"config_hash", e.config_hash},
                {"truncated_mass", e.truncated_mass},
                {"non_exit_fraction", e.non_exit_fraction}};
}

void write_doc(const Common& c, const json& doc) {
    if (c.out_file.empty()) return;
    std::ofstream out(c.out_file);
    if (!out) throw std::runtime_error("cannot write " + c.out_file);
    out << doc.dump(2) << "\n";
}

void emit_report_plot(const std::string& path, const std::vector<BhpReport>& reps) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "name,level,key,value\n";
    for (const BhpReport& r : reps) {
        out << r.name << "," << r.level << ",measured_constant," << r.measured_constant
            << "\n";
        out << r.name << "," << r.level << ",measured_next," << r.measured_next << "\n";
        for (const auto& [k, v] : r.details)
            out << r.name << "," << r.level << "," << k << "," << v << "\n";
    }
}

void print_report_line(const BhpReport& r) {
    const char* verdict = !r.decided ? "undecided" : (r.pass ? "pass" : "FAIL");
    std::printf("%-28s %-9s c=%-12.6g next=%-12.6g ratio=%-8.4g %s\n", r.name.c_str(),
                verdict, r.measured_constant, r.measured_next, r.cross_level_ratio,
                r.note.c_str());
}

// 0 all passed, 1 a decided check failed, 3 something stayed undecided
int reports_exit_code(const std::vector<BhpReport>& reps) {
    int code = 0;
    for (const BhpReport& r : reps) {
        if (!r.decided) code = std::max(code, 3);
        else if (!r.pass) code = std::max(code, 1);
    }
    return code;
}

json doc_skeleton(const std::string& command, const RunConfig& cfg) {
    return json{{"command", command},
                {"timestamp", timestamp_utc()},
                {"config", config_json(cfg)},
                {"config_hash", config_hash(cfg)}};
}

// absolute tolerance comparison of two JSON trees, numbers at 1e-12
bool json_close(const json& a, const json& b, double tol, std::string& where,
                std::string path) {
    if (a.is_number() && b.is_number()) {
        if (std::abs(a.get<double>() - b.get<double>()) <= tol) return true;
        where = path;
        return false;
    }
    if (a.type() != b.type()) {
        where = path;
        return false;
    }
    if (a.is_object()) {
        if (a.size() != b.size()) {
            where = path;
            return false;
        }
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) {
                where = path + "/" + it.key();
                return false;
            }
            if (!json_close(it.value(), b[it.key()], tol, where, path + "/" + it.key()))
                return false;
        }
        return true;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            where = path;
            return false;
        }
        for (size_t i = 0; i < a.size(); ++i)
            if (!json_close(a[i], b[i], tol, where, path + "/" + std::to_string(i)))
                return false;
        return true;
    }
    if (a == b) return true;
    where = path;
    return false;
}

json oracle_document(const Region& d, const RunConfig& cfg, const Cell& start) {
    const JumpChainModel mdl(d, model_options(cfg));
    const AbsorbingSystem sys(mdl);
    if (sys.index_of(start) < 0) throw std::runtime_error("start cell not interior");
    const Eigen::VectorXd law = sys.exit_law(start);
    const Eigen::VectorXd occ = sys.occupation_row(start);
    json exits = json::array();
    for (i64 i = 0; i < static_cast<i64>(sys.absorbing().size()); ++i) {
        const Cell& c = sys.absorbing()[static_cast<size_t>(i)];
        exits.push_back(json::array({c.k, c.m, law(i)}));
    }
    json occs = json::array();
    for (i64 i = 0; i < sys.n_interior(); ++i) {
        const Cell& c = sys.interior()[static_cast<size_t>(i)];
        occs.push_back(json::array({c.k, c.m, occ(i)}));
    }
    return json{{"model_hash", mdl.hash()},
                {"start", json::array({start.k, start.m})},
                {"interior_count", sys.n_interior()},
                {"absorbing_count", static_cast<i64>(sys.absorbing().size())},
                {"expected_exit_time", sys.expected_exit_time(start)},
                {"exit_law", exits},
                {"occupation", occs}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"alpha-stable jump process simulator on the planar carpet"};
    app.require_subcommand(1);

    Common c;
    std::string start_str, target_str, set_str = "all", u_str, v_str, fixture_name;

    CLI::App* region = app.add_subcommand("region", "region file operations");
    region->require_subcommand(1);
    CLI::App* region_build = region->add_subcommand("build", "parse and report a region");
    CLI::App* region_show = region->add_subcommand("show", "print a region summary");
    add_common(region_build, c);
    add_common(region_show, c);

    CLI::App* model = app.add_subcommand("model", "chain model operations");
    model->require_subcommand(1);
    CLI::App* model_build = model->add_subcommand("build", "construct and report a model");
    add_common(model_build, c);

    CLI::App* estimate = app.add_subcommand("estimate", "Monte Carlo estimates");
    estimate->require_subcommand(1);
    CLI::App* est_hm = estimate->add_subcommand("hm", "sector mass of the exit law");
    CLI::App* est_gr = estimate->add_subcommand("green", "occupation of a target cell");
    CLI::App* est_ex = estimate->add_subcommand("exit", "expected exit time");
    for (CLI::App* sub : {est_hm, est_gr, est_ex}) {
        add_common(sub, c);
        sub->add_option("--start", start_str, "start cell k,m")->required();
    }
    est_hm->add_option("--set", set_str, "sector ids or 'all'");
    est_gr->add_option("--target", target_str, "target cell k,m")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "dense reference solutions");
    oracle->require_subcommand(1);
    CLI::App* oracle_solve = oracle->add_subcommand("solve", "exit law and occupation");
    CLI::App* oracle_cmp = oracle->add_subcommand("compare", "compare against a fixture");
    for (CLI::App* sub : {oracle_solve, oracle_cmp}) {
        add_common(sub, c);
        sub->add_option("--start", start_str, "start cell k,m")->required();
    }
    oracle_cmp->add_option("--name", fixture_name, "fixture file name (no .json)")
        ->required();

    CLI::App* verify = app.add_subcommand("verify", "boundary ratio checks");
    verify->require_subcommand(1);
    std::vector<CLI::App*> checks;
    for (const char* name : {"lemma10", "lemma11", "lemma12", "carleson", "bhp", "steps",
                             "all"}) {
        CLI::App* sub = verify->add_subcommand(name, "");
        add_common(sub, c);
        checks.push_back(sub);
    }
    checks[3]->add_option("--set", set_str, "sector ids or 'all'");
    checks[4]->add_option("--u", u_str, "numerator sector ids");
    checks[4]->add_option("--v", v_str, "denominator sector ids");
    checks[5]->add_option("--u", u_str, "decomposed sector ids");

    CLI::App* scaling = app.add_subcommand("scaling", "ball exit time exponent");
    add_common(scaling, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    // configuration and inputs resolve first; failures here are usage errors
    RunConfig cfg;
    Region d = build_region(0, {Cell{0, 0}});
    Point q;
    Cell start{}, target{};
    uint32_t set_mask = 0x3F, u_mask = 0, v_mask = 0;
    std::string fixtures;
    try {
        cfg = resolve(c);
        d = resolve_region(c);
        q = parse_point(c.q_str);
        if (!start_str.empty()) start = parse_cell(start_str);
        if (!target_str.empty()) target = parse_cell(target_str);
        set_mask = parse_sectors(set_str);
        if (!u_str.empty()) u_mask = parse_sectors(u_str);
        if (!v_str.empty()) v_mask = parse_sectors(v_str);
        fixtures = resolve_fixtures(c);
        (void)radius_of(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        if (region_build->parsed() || region_show->parsed()) {
            json cells = json::array();
            for (const uint64_t key : d.cells) {
                const Cell cc = cell_from_key(key);
                cells.push_back(json::array({cc.k, cc.m}));
            }
            json doc = doc_skeleton("region", cfg);
            doc["region"] = json{{"cell_level", d.cell_level},
                                 {"cells", cells},
                                 {"boundary_faces", d.boundary.size()},
                                 {"r0", d.R0},
                                 {"r1", d.R1},
                                 {"r2", d.R2},
                                 {"hash", d.hash()}};
            write_doc(c, doc);
            std::printf("region: level %d, %zu cells, %zu boundary faces, R0=%.6g, %s\n",
                        d.cell_level, d.cells.size(), d.boundary.size(), d.R0,
                        d.hash().c_str());
            if (region_show->parsed())
                for (const uint64_t key : d.cells) {
                    const Cell cc = cell_from_key(key);
                    std::printf("  cell %lld %lld\n", static_cast<long long>(cc.k),
                                static_cast<long long>(cc.m));
                }
            return 0;
        }

        if (model_build->parsed()) {
            const JumpChainModel mdl(d, model_options(cfg));
            json doc = doc_skeleton("model", cfg);
            doc["model"] = json{{"hash", mdl.hash()},
                                {"level", mdl.level()},
                                {"interior_count", mdl.interior_count()},
                                {"state_count", mdl.state_count()},
                                {"holding_mean", mdl.holding_mean()},
                                {"cell_mass", mdl.cell_mass()},
                                {"truncated_mass_bound", mdl.truncated_mass_bound()},
                                {"window", json::array({mdl.win_klo(), mdl.win_khi(),
                                                        mdl.win_mlo(), mdl.win_mhi()})}};
            write_doc(c, doc);
            std::printf("model %s: %lld interior cells, window [%lld,%lld]x[%lld,%lld]\n",
                        mdl.hash().c_str(), static_cast<long long>(mdl.interior_count()),
                        static_cast<long long>(mdl.win_klo()),
                        static_cast<long long>(mdl.win_khi()),
                        static_cast<long long>(mdl.win_mlo()),
                        static_cast<long long>(mdl.win_mhi()));
            return 0;
        }

        if (est_hm->parsed() || est_gr->parsed() || est_ex->parsed()) {
            const JumpChainModel mdl(d, model_options(cfg));
            if (!mdl.is_interior(start.k, start.m))
                throw std::runtime_error("start cell not interior");
            EstimateResult res;
            const char* what = "";
            if (est_hm->parsed()) {
                what = "sector mass";
                res = est_harmonic_measure(
                    mdl, start,
                    [&](const Cell& e) {
                        return ((set_mask >> exit_sector(q, e, cfg.level)) & 1u) != 0;
                    },
                    mc_options(cfg));
            } else if (est_gr->parsed()) {
                what = "green";
                res = est_green(mdl, start, target, mc_options(cfg));
            } else {
                what = "exit time";
                res = est_exit_time(mdl, start, mc_options(cfg));
            }
            json doc = doc_skeleton("estimate", cfg);
            doc["estimate"] = estimate_json(res);
            doc["estimate"]["kind"] = what;
            write_doc(c, doc);
            std::printf("%s = %.10g +- %.3g (n=%lld, hash %s)\n", what, res.value,
                        res.std_error, static_cast<long long>(res.n_samples),
                        res.config_hash.c_str());
            return 0;
        }

        if (oracle_solve->parsed() || oracle_cmp->parsed()) {
            json doc = doc_skeleton("oracle", cfg);
            doc["oracle"] = oracle_document(d, cfg, start);
            if (oracle_solve->parsed()) {
                write_doc(c, doc);
                std::printf("oracle: %lld interior, %lld absorbing, E[T]=%.10g\n",
                            doc["oracle"]["interior_count"].get<long long>(),
                            doc["oracle"]["absorbing_count"].get<long long>(),
                            doc["oracle"]["expected_exit_time"].get<double>());
                return 0;
            }
            if (fixtures.empty())
                throw std::runtime_error("no fixtures directory (flag or CARPET_SIM_FIXTURES)");
            const std::string path = fixtures + "/" + fixture_name + ".json";
            std::ifstream in(path);
            if (!in) {
                std::fprintf(stderr, "error: cannot open fixture %s\n", path.c_str());
                return 2;
            }
            json frozen;
            in >> frozen;
            std::string where;
            if (!json_close(doc["oracle"], frozen["oracle"], 1e-12, where, "")) {
                std::printf("oracle compare: MISMATCH at %s\n", where.c_str());
                return 1;
            }
            std::printf("oracle compare: match within 1e-12 (%s)\n", path.c_str());
            return 0;
        }

        if (scaling->parsed()) {
            const ScalingReport rep = run_scaling(check_options(cfg));
            json doc = doc_skeleton("scaling", cfg);
            doc["scaling"] = json{{"radii", rep.radii},
                                  {"mean_exit_time", rep.mean_exit_time},
                                  {"std_error", rep.std_error},
                                  {"slope", rep.slope},
                                  {"slope_target", rep.slope_target},
                                  {"pass", rep.pass},
                                  {"config_hash", rep.config_hash}};
            write_doc(c, doc);
            if (!c.plot_file.empty()) {
                std::ofstream out(c.plot_file);
                if (!out) throw std::runtime_error("cannot write " + c.plot_file);
                out << "radius,mean_exit_time,std_error\n";
                for (size_t i = 0; i < rep.radii.size(); ++i)
                    out << rep.radii[i] << "," << rep.mean_exit_time[i] << ","
                        << rep.std_error[i] << "\n";
            }
            std::printf("scaling: slope %.4g, target %.4g, %s\n", rep.slope,
                        rep.slope_target, rep.pass ? "pass" : "FAIL");
            return rep.pass ? 0 : 1;
        }

        // verify subcommands
        const double r = radius_of(cfg);
        const CheckOptions opt = check_options(cfg);
        std::vector<BhpReport> reps;
        const bool all = checks[6]->parsed();
        if (checks[0]->parsed() || all) reps.push_back(check_lemma10(d, q, r, opt));
        if (checks[1]->parsed() || all) reps.push_back(check_lemma11(d, q, r, opt));
        if (checks[2]->parsed() || all) reps.push_back(check_lemma12(d, q, r, opt));
        if (checks[3]->parsed() || all)
            reps.push_back(check_carleson(d, q, r, HarmonicSpec{set_mask}, opt));
        if (checks[4]->parsed() || all) {
            if (u_mask != 0 || v_mask != 0) {
                if (u_mask == 0 || v_mask == 0)
                    throw std::runtime_error("bhp needs both --u and --v");
                reps.push_back(
                    check_bhp(d, q, r, HarmonicSpec{u_mask}, HarmonicSpec{v_mask}, opt));
            } else {
                for (BhpReport& rep : run_bhp_suite(d, q, r, opt))
                    reps.push_back(std::move(rep));
            }
        }
        if (checks[5]->parsed() || all) {
            const BhpGeometry g = build_bhp_geometry(d, q, r);
            const HarmonicSpec su{u_mask != 0 ? u_mask : 0x07u};
            reps.push_back(check_step_decomposition(g, su, opt));
        }

        json doc = doc_skeleton("verify", cfg);
        doc["reports"] = json::array();
        for (const BhpReport& rep : reps) doc["reports"].push_back(report_json(rep));
        write_doc(c, doc);
        emit_report_plot(c.plot_file, reps);
        for (const BhpReport& rep : reps) print_report_line(rep);
        return reports_exit_code(reps);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "refused: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
