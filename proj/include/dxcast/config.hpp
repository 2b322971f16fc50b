#pragma once

#include "dxcast/evaluation.hpp"
#include "dxcast/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dxcast {

// Everything a run needs, resolved from defaults, config file, and flags.
struct RunConfig {
    std::string data_dir;
    std::vector<std::string> countries;        // empty = all found in data_dir
    std::vector<Sex> sexes = {Sex::female, Sex::male};
    Transform transform = Transform::Cdf;
    Selector selector = Selector::fixed(6);
    int test_len = 20;
    std::vector<double> alphas = {0.2, 0.05};
    std::map<std::string, double> rates;       // per-country flat discount rates
    int horizon = 50;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
};

// Parse `CODE = rate` lines ('#' comments, blank lines ignored); rates are
// decimals per annum.
std::map<std::string, double> parse_rates_file(std::istream& in);

// Canonical text form of the config used for hashing and provenance.
std::string describe(const RunConfig& config);

// FNV-1a hash of the canonical description; stamped into output CSVs so a
// file can be traced to the exact settings that produced it.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace dxcast
