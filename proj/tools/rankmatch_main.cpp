// Command-line front end: estimate from CSV, run simulation scenarios,
// run diagnostics. All outputs are deterministic functions of the input
// bytes and flags.

#include <CLI11.hpp>

#include <string>
#include <vector>

#include "rankmatch/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rank-based nearest-neighbor treatment-effect estimation"};
    app.require_subcommand(1);

    rankmatch::cli::EstimateConfig est;
    std::string covariates_flat;
    auto* estimate = app.add_subcommand("estimate", "estimate the ATE from a CSV file");
    estimate->add_option("--input", est.input_path, "input CSV with a header row")->required();
    estimate->add_option("--treatment", est.treatment_col, "treatment column (coded 0/1)")
        ->required();
    estimate->add_option("--outcome", est.outcome_col, "outcome column")->required();
    estimate->add_option("--covariates", covariates_flat, "comma-separated covariate columns")
        ->required();
    estimate->add_option("--matches", est.matches, "matches per unit, or 'auto'");
    estimate->add_option("--basis", est.basis,
                         "regression basis: none | power:p | legendre:p | pp:g,k");
    estimate->add_option("--level", est.level, "confidence level, default 0.95");
    estimate->add_option("--out", est.out_path, "report JSON path (default stdout)");
    estimate->add_option("--per-unit", est.per_unit_path, "optional per-unit CSV path");

    std::string sim_config;
    rankmatch::cli::SimulateOverrides overrides;
    std::int64_t reps_override = -1;
    std::int64_t seed_override = -1;
    auto* simulate = app.add_subcommand("simulate", "run a seeded Monte Carlo scenario");
    simulate->add_option("--config", sim_config, "scenario TOML file")->required();
    simulate->add_option("--reps", reps_override, "override run.reps");
    simulate->add_option("--seed", seed_override, "override run.seed");
    simulate->add_option("--out-dir", overrides.out_dir, "output directory (default .)");

    std::string diag_kind, diag_config, diag_out, diag_csv;
    auto* diagnose = app.add_subcommand("diagnose", "gram / ratio / rates diagnostics");
    diagnose->add_option("kind", diag_kind, "gram | ratio | rates")->required();
    diagnose->add_option("--config", diag_config, "diagnostic TOML file")->required();
    diagnose->add_option("--out", diag_out, "report JSON path (default stdout)");
    diagnose->add_option("--csv", diag_csv, "optional CSV table path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rankmatch::cli::kExitInput;
    }

    if (estimate->parsed()) {
        std::stringstream ss(covariates_flat);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) est.covariate_cols.push_back(tok);
        return rankmatch::cli::cmd_estimate(est);
    }
    if (simulate->parsed()) {
        if (reps_override >= 0) overrides.reps = reps_override;
        if (seed_override >= 0) overrides.seed = static_cast<std::uint64_t>(seed_override);
        return rankmatch::cli::cmd_simulate(sim_config, overrides);
    }
    return rankmatch::cli::cmd_diagnose(diag_kind, diag_config, diag_out, diag_csv);
}
