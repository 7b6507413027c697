#pragma once

#include <string>

#include "carpet/harness.hpp"

// Run configuration for the command line tool: defaults, strict key=value
// config files, and the canonical fingerprint. Precedence is command line
// over file over defaults. The thread count stays out of the fingerprint
// because every result is bit-identical across thread counts.

namespace carpet {

struct RunConfig {
    int level = 5;
    i64 samples = 100'000;
    uint64_t seed = 12345;
    int threads = 1;
    double alpha = 0.5;
    double dw = 2.097;
    double t0 = 1.0;
    int halo = 1;
    i64 grid_cap = 200;
    int radius_exp = 2;
};

// applies keys from a config file over cfg; keys are the field names above;
// unknown keys, duplicate keys and malformed lines throw std::runtime_error
// with the offending line number
void load_config(const std::string& path, RunConfig& cfg);

// canonical fingerprint over everything but threads
std::string config_hash(const RunConfig& cfg);

CheckOptions check_options(const RunConfig& cfg);
ModelConfig model_options(const RunConfig& cfg);
RunOptions mc_options(const RunConfig& cfg);

double radius_of(const RunConfig& cfg);

// "ix,iy,res"; res in [0, kMaxResolution]
Point parse_point(const std::string& s);
// "k,m"
Cell parse_cell(const std::string& s);
// comma-separated sector ids in [0,5], or "all"
uint32_t parse_sectors(const std::string& s);

// region files: '#' starts a comment, the first content line is
// `level <m0>`, every further line is `cell <k> <m>`
Region load_region_file(const std::string& path);

std::string timestamp_utc();

}  // namespace carpet
