#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "loctime/chain.hpp"
#include "loctime/rng.hpp"

namespace loctime {

using json = nlohmann::json;

// Generator documents:
//   {"states": ["0","1"], "rates": [["0","1",1.0], {"from":"1","to":"0","rate":1.0}],
//    "diagonal": {"0": -1.0}}               diagonal optional, checked when given
//   {"builtin": "two_state", "rate": 1.0}
//   {"builtin": "srw_interval", "lo": -3, "hi": 5}
// Throws ConfigParse naming the offending field.
Generator generator_from_json(const json& doc);
Generator load_generator(const std::filesystem::path& path);
json load_json(const std::filesystem::path& path);

// 64-bit FNV-1a of the canonical (sorted-key, compact) serialisation.
std::uint64_t config_hash(const json& doc);
std::string hex(std::uint64_t v);

// Runs fn(chunk, rng) for chunk = 0..chunks-1 on up to `threads` workers
// (0 = hardware concurrency). Each chunk gets root.split(chunk), so results do
// not depend on scheduling.
void for_each_chunk(std::size_t chunks, const Rng& root, const std::function<void(std::size_t, Rng&)>& fn,
                    unsigned threads = 0);

struct DensityMcConfig {
    Generator generator;
    std::vector<Index> range;
    Index a = 0;
    Index b = 0;
    double horizon = 1.0;
    std::uint64_t samples = 1'000'000;
    std::uint64_t seed = 1;
    int cells_per_axis = 0; // 0: 40 for |R| = 2, 7 for |R| = 3
    double p_threshold = 1e-3;
};

struct HistogramCell {
    std::size_t index = 0;
    std::vector<double> centre; // free coordinates
    double mass = 0.0;          // integral of rho over the cell
    double expected = 0.0;      // conditioned count
    std::uint64_t observed = 0;
    bool refinement_flag = false;
};

struct DensityMcReport {
    std::uint64_t paths = 0;
    std::uint64_t conditioned = 0;
    double total_mass = 0.0;        // integral of rho over the whole simplex
    double conditioning_z = 0.0;    // observed frequency vs total_mass
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 0.0;
    double worst_z = 0.0;
    std::size_t merged_groups = 0;
    std::size_t empty_cells = 0;
    std::size_t flagged_cells = 0;
    std::vector<HistogramCell> cells;
    // Two-state chain only: frequencies of {range = both, X_T = x} for x = 1, 2
    // against e^{-T}(cosh T - 1) and e^{-T} sinh T.
    bool two_state = false;
    double freq_same = 0.0, expect_same = 0.0, z_same = 0.0;
    double freq_other = 0.0, expect_other = 0.0, z_other = 0.0;
    bool passed = false;
};

// Throws InsufficientConditioned when fewer than 1000 paths survive.
DensityMcReport verify_density_mc(const DensityMcConfig& config);

struct RayKnightMcConfig {
    int b = 2;
    double h = 1.0;
    std::uint64_t samples = 200'000;
    std::uint64_t seed = 1;
    int window = 4;
    std::vector<int> sites = {-1, 0, 1, 3};
    double z_moment = 3.0;
    double z_atom = 4.0;
};

struct SiteMoments {
    int site = 0;
    double mean_direct = 0.0, se_mean_direct = 0.0;
    double mean_profile = 0.0, se_mean_profile = 0.0;
    double var_direct = 0.0, se_var_direct = 0.0;
    double var_profile = 0.0, se_var_profile = 0.0;
    double z_mean = 0.0, z_var = 0.0;
    double atom_direct = 0.0, atom_profile = 0.0, z_atom = 0.0;
};

struct RayKnightMcReport {
    std::vector<SiteMoments> sites;
    // P(l(b+1) = 0) against e^{-h}
    double atom_expected = 0.0;
    double atom_direct = 0.0, z_atom_direct = 0.0;
    double atom_profile = 0.0, z_atom_profile = 0.0;
    std::uint64_t atom_count_direct = 0;
    // correlation of l(b-1) and l(b+1) under direct simulation
    double correlation = 0.0, z_correlation = 0.0;
    bool passed = false;
};

RayKnightMcReport verify_rayknight_mc(const RayKnightMcConfig& config);

// CSV with a "# config_hash=..., seed=..." first line.
void write_csv_header(std::ostream& os, const json& config, std::uint64_t seed);
void write_density_csv(std::ostream& os, const DensityMcReport& r);
void write_rayknight_csv(std::ostream& os, const RayKnightMcReport& r);

json to_json(const DensityMcReport& r);
json to_json(const RayKnightMcReport& r);

DensityMcConfig density_mc_config(const json& doc);
RayKnightMcConfig rayknight_mc_config(const json& doc);

// Suite document: {"seed": 1, "experiments": [{"name": ..., "kind": ..., ...}]}.
// Writes <out>/<name>.csv per experiment and <out>/summary.json. Returns 0 if
// every experiment passes, 1 otherwise; configuration errors throw ConfigParse.
int run_suite(const json& doc, const std::filesystem::path& out);

} // namespace loctime
