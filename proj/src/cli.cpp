#include "rankmatch/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rankmatch/csv.hpp"
#include "rankmatch/errors.hpp"
#include "rankmatch/jsonw.hpp"

namespace rankmatch::cli {

namespace {

std::string hex64(std::uint64_t v) {
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(v));
    return buffer;
}

// Maps library exceptions onto the exit-code contract; prints to
// stderr. config_exit distinguishes estimate (estimator configuration
// errors get their own code) from the config-file commands (everything
// wrong with a scenario file is an input error).
template <typename Fn>
int guarded(int config_exit, Fn&& fn) {
    try {
        return fn();
    } catch (const InputError& e) {
        std::cerr << "rankmatch: " << e.what() << "\n";
        return kExitInput;
    } catch (const ConfigError& e) {
        std::cerr << "rankmatch: " << e.what() << "\n";
        return config_exit;
    } catch (const DegenerateFitError& e) {
        std::cerr << "rankmatch: " << e.what() << "\n";
        return config_exit;
    } catch (const std::exception& e) {
        std::cerr << "rankmatch: internal error: " << e.what() << "\n";
        return 1;
    }
}

void emit(const std::string& bytes, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << bytes;
        std::cout.flush();
    } else {
        write_file(out_path, bytes);
    }
}

Polynomial polynomial_from_value(const toml::Value& value, std::size_t d,
                                 const std::string& key) {
    if (value.kind != toml::Value::Kind::array)
        throw InputError("config: '" + key + "' must be an array of terms");
    Polynomial poly;
    for (const toml::Value& term : value.array) {
        if (term.kind != toml::Value::Kind::array || term.array.size() != d + 1)
            throw InputError("config: each term of '" + key +
                             "' must be [coef, e1, ..., ed] with one exponent per coordinate");
        Polynomial::Term t;
        if (!term.array[0].is_number())
            throw InputError("config: '" + key + "' term coefficient must be numeric");
        t.coef = term.array[0].as_number();
        for (std::size_t k = 1; k <= d; ++k) {
            if (term.array[k].kind != toml::Value::Kind::integer || term.array[k].integer < 0)
                throw InputError("config: '" + key + "' exponents must be non-negative integers");
            t.powers.push_back(static_cast<unsigned>(term.array[k].integer));
        }
        poly.terms.push_back(std::move(t));
    }
    return poly;
}

std::vector<std::size_t> size_grid(const toml::Table& table, const std::string& key) {
    const toml::Value& arr = toml::get_array(table, key);
    std::vector<std::size_t> grid;
    for (const toml::Value& v : arr.array) {
        if (v.kind != toml::Value::Kind::integer || v.integer < 2)
            throw InputError("config: '" + key + "' entries must be integers >= 2");
        grid.push_back(static_cast<std::size_t>(v.integer));
    }
    return grid;
}

std::string scenario_name(const toml::Table& table, const std::string& path) {
    if (toml::find(table, "name")) return toml::get_string(table, "name");
    return std::filesystem::path(path).stem().string();
}

struct EstimatorToml {
    EstimatorConfig config;
    std::string m_rule_text = "auto";
    std::string basis_text = "none";
};

EstimatorToml estimator_from_toml(const toml::Table& table, std::size_t d) {
    EstimatorToml out;
    out.m_rule_text = toml::get_string_or(table, "estimator.m_rule", "auto");
    out.basis_text = toml::get_string_or(table, "estimator.basis", "none");
    out.config.m_rule = MRule::parse(out.m_rule_text);
    out.config.adjustment = basis_from_text(out.basis_text, d);
    out.config.level = toml::get_number_or(table, "estimator.level", 0.95);
    if (!(out.config.level > 0.0 && out.config.level < 1.0))
        throw InputError("config: estimator.level must lie strictly inside (0,1)");
    return out;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::size_t auto_matches(std::size_t n, std::size_t min_group) {
    const std::size_t target = MRule{}.eval(n);  // ceil(n^0.75 / log n)
    return std::max<std::size_t>(1, std::min(target, min_group));
}

std::optional<BasisSpec> basis_from_text(const std::string& text, std::size_t dimension) {
    if (text == "none") return std::nullopt;
    return BasisSpec::parse(text, dimension);
}

Dataset dataset_from_csv(const EstimateConfig& config) {
    if (config.covariate_cols.empty())
        throw InputError("estimate: need at least one covariate column");
    {
        std::vector<std::string> names = config.covariate_cols;
        names.push_back(config.treatment_col);
        names.push_back(config.outcome_col);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end())
            throw InputError("estimate: column names must be distinct");
    }

    const csvio::CsvTable table = csvio::read_csv(config.input_path);
    const std::size_t treat_col = table.column(config.treatment_col);
    const std::size_t outcome_col = table.column(config.outcome_col);
    std::vector<std::size_t> cov_cols;
    for (const std::string& name : config.covariate_cols) cov_cols.push_back(table.column(name));

    const std::size_t n = table.rows.size();
    Dataset data;
    data.covariates = Matrix(n, cov_cols.size());
    data.treated.assign(n, 0);
    data.outcomes.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double treat = csvio::parse_number(table, i, treat_col);
        if (treat != 0.0 && treat != 1.0)
            throw InputError("estimate: treatment column must be coded 0/1; row " +
                             std::to_string(i + 1) + " holds '" + table.rows[i][treat_col] + "'");
        data.treated[i] = treat == 1.0 ? 1 : 0;
        data.outcomes[i] = csvio::parse_number(table, i, outcome_col);
        for (std::size_t k = 0; k < cov_cols.size(); ++k)
            data.covariates(i, k) = csvio::parse_number(table, i, cov_cols[k]);
    }
    return data;
}

std::string estimate_report_json(const AteReport& report) {
    jsonw::Writer w;
    w.begin_object();
    w.field("tau_hat", report.tau_hat);
    w.field("tau_reg", report.tau_reg);
    w.field("sigma2_hat", report.sigma2_hat);
    w.field("ci_lower", report.ci_lower);
    w.field("ci_upper", report.ci_upper);
    w.field_uint("n", report.n);
    w.field_uint("m", report.m_used);
    w.field("basis", report.basis_label);
    w.field_uint("n_treated", report.n_treated);
    w.field_uint("n_control", report.n_control);
    w.end_object();
    return w.str() + "\n";
}

std::string per_unit_csv(const AteReport& report) {
    std::string out = "unit,treated,outcome,yhat0,yhat1,k_count,residual,influence\n";
    for (std::size_t i = 0; i < report.per_unit.size(); ++i) {
        const PerUnit& u = report.per_unit[i];
        out += std::to_string(i) + ',' + std::to_string(static_cast<int>(u.treated)) + ',' +
               jsonw::number(u.outcome) + ',' + jsonw::number(u.yhat0) + ',' +
               jsonw::number(u.yhat1) + ',' + std::to_string(u.k_count) + ',' +
               jsonw::number(u.residual) + ',' + jsonw::number(u.influence) + '\n';
    }
    return out;
}

int cmd_estimate(const EstimateConfig& config) {
    return guarded(kExitEstimatorConfig, [&]() -> int {
        const Dataset data = dataset_from_csv(config);
        const std::size_t n = data.size();
        const std::size_t n_treated = data.count_treated();
        const std::size_t min_group = std::min(n_treated, n - n_treated);

        EstimateOptions opts;
        if (config.matches == "auto") {
            opts.m = auto_matches(n, min_group);
        } else {
            long long m = 0;
            const auto [ptr, ec] = std::from_chars(
                config.matches.data(), config.matches.data() + config.matches.size(), m);
            if (ec != std::errc() || ptr != config.matches.data() + config.matches.size() || m < 1)
                throw InputError("estimate: --matches must be 'auto' or a positive integer");
            opts.m = static_cast<std::size_t>(m);
        }
        opts.adjustment = basis_from_text(config.basis, data.covariates.cols());
        opts.level = config.level;
        if (!(opts.level > 0.0 && opts.level < 1.0))
            throw InputError("estimate: --level must lie strictly inside (0,1)");

        const AteReport report = estimate_ate(data, opts);
        emit(estimate_report_json(report), config.out_path);
        if (!config.per_unit_path.empty()) write_file(config.per_unit_path, per_unit_csv(report));
        return kExitOk;
    });
}

DgpSpec dgp_from_toml(const toml::Table& table) {
    DgpSpec spec;
    const std::int64_t d = toml::get_integer(table, "dgp.d");
    if (d < 1) throw InputError("config: dgp.d must be >= 1");
    spec.d = static_cast<std::size_t>(d);

    if (const toml::Value* sigma = toml::find(table, "dgp.sigma")) {
        if (sigma->kind != toml::Value::Kind::array)
            throw InputError("config: dgp.sigma must be an array of rows");
        for (const toml::Value& row : sigma->array) {
            if (row.kind != toml::Value::Kind::array || row.array.size() != spec.d)
                throw InputError("config: dgp.sigma rows must hold d numbers");
            for (const toml::Value& v : row.array) spec.sigma.push_back(v.as_number());
        }
        if (spec.sigma.size() != spec.d * spec.d)
            throw InputError("config: dgp.sigma must be d x d");
    }

    const toml::Value& marginals = toml::get_array(table, "dgp.marginals");
    for (const toml::Value& v : marginals.array) {
        if (v.kind != toml::Value::Kind::string)
            throw InputError("config: dgp.marginals must be strings");
        spec.marginals.push_back(marginal_from_string(v.str));
    }

    const toml::Value& propensity = toml::get_array(table, "dgp.propensity");
    for (const toml::Value& v : propensity.array) spec.propensity.push_back(v.as_number());

    const toml::Value* mu0 = toml::find(table, "dgp.mu0");
    if (!mu0) throw InputError("config: missing required key 'dgp.mu0'");
    spec.mu0 = polynomial_from_value(*mu0, spec.d, "dgp.mu0");
    const toml::Value* mu1 = toml::find(table, "dgp.mu1");
    if (!mu1) throw InputError("config: missing required key 'dgp.mu1'");
    spec.mu1 = polynomial_from_value(*mu1, spec.d, "dgp.mu1");
    spec.noise_sd0 = toml::get_number_or(table, "dgp.noise_sd0", 1.0);
    spec.noise_sd1 = toml::get_number_or(table, "dgp.noise_sd1", 1.0);
    if (toml::find(table, "dgp.true_tau"))
        spec.true_tau = toml::get_number(table, "dgp.true_tau");
    spec.validate();
    return spec;
}

namespace {

std::string mc_summary_json(const std::string& scenario, const std::string& spec_hash,
                            const McReport& report, const EstimatorToml& est,
                            std::size_t n) {
    jsonw::Writer w;
    w.begin_object();
    w.field("scenario", scenario);
    w.field("version", kVersion);
    w.field("spec_hash", spec_hash);
    w.field_uint("seed", report.seed);
    w.field_uint("n", n);
    w.field_uint("reps", report.reps);
    w.field("m_rule", est.m_rule_text);
    w.field("basis", est.basis_text);
    w.field("level", est.config.level);
    w.field("true_tau", report.true_tau);
    w.field_uint("failures", report.failures);
    w.field("bias", report.bias);
    w.field("sd", report.sd);
    w.field("rmse", report.rmse);
    w.field("coverage", report.coverage);
    w.field("mean_sigma2", report.mean_sigma2);
    w.field("var_sqrt_n_tau", report.var_sqrt_n_tau);
    w.field("se_bias", report.se_bias);
    w.field("se_coverage", report.se_coverage);
    w.field("se_mean_sigma2", report.se_mean_sigma2);
    w.field("note", "coverage is evidence under the generating process; smoothness-rate "
                    "side conditions are not checkable from data");
    w.end_object();
    return w.str() + "\n";
}

std::string mc_reps_csv(const McReport& report) {
    std::string out = "rep,seed,m,tau_hat,sigma2_hat,ci_lower,ci_upper,covered,failed\n";
    for (const RepRecord& rec : report.per_rep) {
        out += std::to_string(rec.rep) + ',' + std::to_string(rec.seed) + ',' +
               std::to_string(rec.m_used) + ',' + jsonw::number(rec.tau_hat) + ',' +
               jsonw::number(rec.sigma2_hat) + ',' + jsonw::number(rec.ci_lower) + ',' +
               jsonw::number(rec.ci_upper) + ',' + (rec.covered ? "1" : "0") + ',' +
               (rec.failed ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace

int cmd_simulate(const std::string& config_path, const SimulateOverrides& overrides) {
    return guarded(kExitInput, [&]() -> int {
        const std::string bytes = read_file(config_path);
        const toml::Table table = toml::parse_string(bytes, config_path);
        const std::string name = scenario_name(table, config_path);
        const std::string spec_hash = hex64(fnv1a(bytes));

        const DgpSpec spec = dgp_from_toml(table);
        const EstimatorToml est = estimator_from_toml(table, spec.d);

        const std::int64_t n64 = toml::get_integer(table, "run.n");
        if (n64 < 2) throw InputError("config: run.n must be >= 2");
        const std::size_t n = static_cast<std::size_t>(n64);

        std::int64_t reps = overrides.reps ? *overrides.reps
                                           : toml::get_integer_or(table, "run.reps", 100);
        if (reps < 1) throw InputError("config: run.reps must be >= 1");
        const std::uint64_t seed =
            overrides.seed ? *overrides.seed
                           : static_cast<std::uint64_t>(toml::get_integer_or(table, "run.seed", 1));

        const McReport report =
            run_monte_carlo(spec, est.config, n, static_cast<std::size_t>(reps), seed);

        const std::filesystem::path dir(overrides.out_dir.empty() ? "." : overrides.out_dir);
        write_file((dir / (name + "_summary.json")).string(),
                   mc_summary_json(name, spec_hash, report, est, n));
        write_file((dir / (name + "_reps.csv")).string(), mc_reps_csv(report));

        if (report.failures > 0) {
            for (const RepRecord& rec : report.per_rep)
                if (rec.failed) {
                    std::cerr << "rankmatch: rep " << rec.rep << " failed: " << rec.error << "\n";
                    break;
                }
            return kExitRepFailure;
        }
        return kExitOk;
    });
}

int cmd_diagnose(const std::string& kind, const std::string& config_path,
                 const std::string& out_path, const std::string& csv_path) {
    return guarded(kExitInput, [&]() -> int {
        const std::string bytes = read_file(config_path);
        const toml::Table table = toml::parse_string(bytes, config_path);
        const std::string spec_hash = hex64(fnv1a(bytes));
        const DgpSpec spec = dgp_from_toml(table);

        jsonw::Writer w;
        std::string csv;

        if (kind == "gram") {
            const std::string basis_text = toml::get_string(table, "gram.basis");
            const BasisSpec basis_spec = BasisSpec::parse(basis_text, spec.d);
            const std::int64_t n = toml::get_integer(table, "gram.n");
            if (n < 1) throw InputError("config: gram.n must be >= 1");
            const auto seed = static_cast<std::uint64_t>(toml::get_integer_or(table, "gram.seed", 1));

            const auto basis = Basis::build(basis_spec);
            const Matrix points = sample_rank_points(spec, static_cast<std::size_t>(n), seed);
            const DiagnosticsReport diag = gram_diagnostics(*basis, points);

            w.begin_object();
            w.field("kind", "gram");
            w.field("version", kVersion);
            w.field("spec_hash", spec_hash);
            w.field("basis", basis_text);
            w.field_uint("k", basis->size());
            w.field_int("n", n);
            w.field_uint("seed", seed);
            w.field("lambda_min_hat", diag.lambda_min_hat);
            w.field_bool("underdetermined", diag.underdetermined);
            w.end_object();
            csv = "n,k,lambda_min_hat\n" + std::to_string(n) + ',' +
                  std::to_string(basis->size()) + ',' + jsonw::number(diag.lambda_min_hat) + '\n';
        } else if (kind == "ratio") {
            const std::string rule_text = toml::get_string_or(table, "ratio.m_rule", "pow:0.7");
            const MRule rule = MRule::parse(rule_text);
            const auto grid = size_grid(table, "ratio.n_grid");
            const std::int64_t reps = toml::get_integer_or(table, "ratio.reps", 20);
            if (reps < 1) throw InputError("config: ratio.reps must be >= 1");
            const auto seed =
                static_cast<std::uint64_t>(toml::get_integer_or(table, "ratio.seed", 1));

            const auto rows =
                check_density_ratio(spec, grid, rule, static_cast<std::size_t>(reps), seed);

            w.begin_object();
            w.field("kind", "ratio");
            w.field("version", kVersion);
            w.field("spec_hash", spec_hash);
            w.field("m_rule", rule_text);
            w.field_int("reps", reps);
            w.field_uint("seed", seed);
            w.key("rows");
            w.begin_array();
            csv = "n,m,median_mse,mean_mse\n";
            for (const RatioRow& row : rows) {
                w.begin_object();
                w.field_uint("n", row.n);
                w.field_uint("m", row.m);
                w.field("median_mse", row.median_mse);
                w.field("mean_mse", row.mean_mse);
                w.end_object();
                csv += std::to_string(row.n) + ',' + std::to_string(row.m) + ',' +
                       jsonw::number(row.median_mse) + ',' + jsonw::number(row.mean_mse) + '\n';
            }
            w.end_array();
            w.end_object();
        } else if (kind == "rates") {
            const std::string basis_text = toml::get_string(table, "rates.basis");
            const BasisSpec basis_spec = BasisSpec::parse(basis_text, spec.d);
            const auto grid = size_grid(table, "rates.n_grid");
            const std::int64_t reps = toml::get_integer_or(table, "rates.reps", 20);
            const std::int64_t n_oracle = toml::get_integer_or(table, "rates.n_oracle", 100000);
            const std::int64_t n_mc = toml::get_integer_or(table, "rates.n_mc", 20000);
            if (reps < 1 || n_oracle < 2 || n_mc < 1000)
                throw InputError("config: rates needs reps >= 1, n_oracle >= 2, n_mc >= 1000");
            const auto seed =
                static_cast<std::uint64_t>(toml::get_integer_or(table, "rates.seed", 1));

            const RateReport report = rate_sweep_series(
                spec, basis_spec, grid, static_cast<std::size_t>(reps),
                static_cast<std::size_t>(n_oracle), static_cast<std::size_t>(n_mc), seed);

            w.begin_object();
            w.field("kind", "rates");
            w.field("version", kVersion);
            w.field("spec_hash", spec_hash);
            w.field("basis", basis_text);
            w.field_uint("k", report.basis_size);
            w.field_uint("n_oracle", report.n_oracle);
            w.field_uint("n_mc", report.n_mc);
            w.field("xi2", report.xi2);
            w.field("lambda_min_hat", report.lambda_min_hat);
            w.field_uint("seed", seed);
            w.key("rows");
            w.begin_array();
            csv = "n,median_l2,median_rn,median_bn\n";
            for (const RateRow& row : report.rows) {
                w.begin_object();
                w.field_uint("n", row.n);
                w.field("median_l2", row.median_l2);
                w.field("median_rn", row.median_rn);
                w.field("median_bn", row.median_bn);
                w.end_object();
                csv += std::to_string(row.n) + ',' + jsonw::number(row.median_l2) + ',' +
                       jsonw::number(row.median_rn) + ',' + jsonw::number(row.median_bn) + '\n';
            }
            w.end_array();
            w.end_object();
        } else {
            throw InputError("diagnose: unknown kind '" + kind + "' (want gram, ratio or rates)");
        }

        emit(w.str() + "\n", out_path);
        if (!csv_path.empty()) write_file(csv_path, csv);
        return kExitOk;
    });
}

}  // namespace rankmatch::cli
