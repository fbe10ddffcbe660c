#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankmatch/estimator.hpp"
#include "rankmatch/simulation.hpp"
#include "rankmatch/toml.hpp"

namespace rankmatch::cli {

inline constexpr const char* kVersion = "rankmatch-0.1.0";

// Exit code contract: 0 success, 2 input or config-file error,
// 3 estimator configuration error, 4 simulation rep failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEstimatorConfig = 3;
inline constexpr int kExitRepFailure = 4;

struct EstimateConfig {
    std::string input_path;
    std::string treatment_col;
    std::string outcome_col;
    std::vector<std::string> covariate_cols;
    std::string matches = "auto";  // "auto" or a positive integer
    std::string basis = "none";    // none | power:p | legendre:p | pp:g,k
    double level = 0.95;
    std::string out_path;          // empty: stdout
    std::string per_unit_path;     // empty: skip
};

int cmd_estimate(const EstimateConfig& config);

struct SimulateOverrides {
    std::optional<std::int64_t> reps;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

int cmd_simulate(const std::string& config_path, const SimulateOverrides& overrides);

// kind: gram | ratio | rates. Optional csv_path writes the table rows
// as CSV beside the JSON report.
int cmd_diagnose(const std::string& kind, const std::string& config_path,
                 const std::string& out_path, const std::string& csv_path = "");

// Building blocks, exposed for the test suites.
Dataset dataset_from_csv(const EstimateConfig& config);
DgpSpec dgp_from_toml(const toml::Table& table);
std::optional<BasisSpec> basis_from_text(const std::string& text, std::size_t dimension);
std::size_t auto_matches(std::size_t n, std::size_t min_group);
std::string estimate_report_json(const AteReport& report);
std::string per_unit_csv(const AteReport& report);
std::uint64_t fnv1a(std::string_view bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace rankmatch::cli
