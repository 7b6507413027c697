#include "carpet/config.hpp"

#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace carpet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_line(const std::string& path, int line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

i64 to_i64(const std::string& v, bool& ok) {
    ok = false;
    size_t used = 0;
    i64 out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        return 0;
    }
    ok = used == v.size();
    return out;
}

double to_double(const std::string& v, bool& ok) {
    ok = false;
    size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        return 0;
    }
    ok = used == v.size();
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(trim(part));
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
}

}  // namespace

void load_config(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::set<std::string> seen;
    std::string raw;
    int ln = 0;
    while (std::getline(in, raw)) {
        ++ln;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.resize(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) bad_line(path, ln, "expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) bad_line(path, ln, "expected key=value");
        if (!seen.insert(key).second) bad_line(path, ln, "duplicate key " + key);
        bool ok = false;
        if (key == "level") cfg.level = static_cast<int>(to_i64(val, ok));
        else if (key == "samples") cfg.samples = to_i64(val, ok);
        else if (key == "seed") cfg.seed = static_cast<uint64_t>(to_i64(val, ok));
        else if (key == "threads") cfg.threads = static_cast<int>(to_i64(val, ok));
        else if (key == "alpha") cfg.alpha = to_double(val, ok);
        else if (key == "dw") cfg.dw = to_double(val, ok);
        else if (key == "t0") cfg.t0 = to_double(val, ok);
        else if (key == "halo") cfg.halo = static_cast<int>(to_i64(val, ok));
        else if (key == "grid_cap") cfg.grid_cap = to_i64(val, ok);
        else if (key == "radius_exp") cfg.radius_exp = static_cast<int>(to_i64(val, ok));
        else bad_line(path, ln, "unknown key " + key);
        if (!ok) bad_line(path, ln, "bad value for " + key);
    }
}

std::string config_hash(const RunConfig& cfg) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "alpha=%.17g dw=%.17g grid_cap=%lld halo=%d level=%d radius_exp=%d "
                  "samples=%lld seed=%llu t0=%.17g",
                  cfg.alpha, cfg.dw, static_cast<long long>(cfg.grid_cap), cfg.halo,
                  cfg.level, cfg.radius_exp, static_cast<long long>(cfg.samples),
                  static_cast<unsigned long long>(cfg.seed), cfg.t0);
    return hash_hex(fnv1a(buf, std::strlen(buf)));
}

CheckOptions check_options(const RunConfig& cfg) {
    CheckOptions o;
    o.level = cfg.level;
    o.n_samples = cfg.samples;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.alpha = cfg.alpha;
    o.dw = cfg.dw;
    o.t0 = cfg.t0;
    o.halo = cfg.halo;
    o.grid_cap = static_cast<size_t>(cfg.grid_cap);
    return o;
}

ModelConfig model_options(const RunConfig& cfg) {
    ModelConfig m;
    m.level = cfg.level;
    m.alpha = cfg.alpha;
    m.dw = cfg.dw;
    m.t0 = cfg.t0;
    m.halo = cfg.halo;
    return m;
}

RunOptions mc_options(const RunConfig& cfg) {
    RunOptions r;
    r.n_samples = cfg.samples;
    r.seed = cfg.seed;
    r.threads = cfg.threads;
    return r;
}

double radius_of(const RunConfig& cfg) {
    if (cfg.radius_exp < 1 || cfg.radius_exp > kMaxResolution)
        throw std::runtime_error("radius_exp out of range");
    return 1.0 / static_cast<double>(pow3(cfg.radius_exp));
}

Point parse_point(const std::string& s) {
    const auto parts = split_commas(s);
    bool a = false, b = false, c = false;
    if (parts.size() != 3) throw std::runtime_error("expected ix,iy,res: " + s);
    Point p;
    p.ix = to_i64(parts[0], a);
    p.iy = to_i64(parts[1], b);
    const i64 res = to_i64(parts[2], c);
    if (!a || !b || !c || res < 0 || res > kMaxResolution)
        throw std::runtime_error("expected ix,iy,res: " + s);
    p.resolution = static_cast<int>(res);
    return p;
}

Cell parse_cell(const std::string& s) {
    const auto parts = split_commas(s);
    bool a = false, b = false;
    if (parts.size() != 2) throw std::runtime_error("expected k,m: " + s);
    Cell c;
    c.k = to_i64(parts[0], a);
    c.m = to_i64(parts[1], b);
    if (!a || !b) throw std::runtime_error("expected k,m: " + s);
    return c;
}

uint32_t parse_sectors(const std::string& s) {
    if (s == "all") return 0x3Fu;
    uint32_t mask = 0;
    for (const std::string& part : split_commas(s)) {
        bool ok = false;
        const i64 id = to_i64(part, ok);
        if (!ok || id < 0 || id > 5) throw std::runtime_error("bad sector list: " + s);
        mask |= 1u << id;
    }
    if (mask == 0) throw std::runtime_error("bad sector list: " + s);
    return mask;
}

Region load_region_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open region file " + path);
    std::string raw;
    int ln = 0;
    bool have_level = false;
    int m0 = 0;
    std::vector<Cell> cells;
    while (std::getline(in, raw)) {
        ++ln;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.resize(hash);
        std::stringstream ss(raw);
        std::string word;
        if (!(ss >> word)) continue;
        if (word == "level") {
            i64 v;
            if (have_level) bad_line(path, ln, "duplicate level line");
            if (!(ss >> v) || v < 0 || v > kMaxLevel) bad_line(path, ln, "bad level");
            m0 = static_cast<int>(v);
            have_level = true;
        } else if (word == "cell") {
            if (!have_level) bad_line(path, ln, "cell before level");
            Cell c;
            if (!(ss >> c.k >> c.m)) bad_line(path, ln, "bad cell");
            cells.push_back(c);
        } else {
            bad_line(path, ln, "unknown directive " + word);
        }
        std::string extra;
        if (ss >> extra) bad_line(path, ln, "trailing tokens");
    }
    if (!have_level) throw std::runtime_error(path + ": missing level line");
    if (cells.empty()) throw std::runtime_error(path + ": no cells");
    return build_region(m0, cells);
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace carpet
