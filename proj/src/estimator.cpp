#include "rankmatch/estimator.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "rankmatch/errors.hpp"
#include "rankmatch/regression.hpp"
#include "rankmatch/stats.hpp"

namespace rankmatch {

std::size_t Dataset::count_treated() const {
    std::size_t c = 0;
    for (const auto t : treated) c += (t != 0);
    return c;
}

void validate_dataset(const Dataset& data) {
    const std::size_t n = data.outcomes.size();
    if (n < 2) throw InputError("dataset: need at least two units");
    if (data.treated.size() != n || data.covariates.rows() != n)
        throw InputError("dataset: covariates, treatment flags and outcomes disagree in length");
    if (data.covariates.cols() < 1) throw InputError("dataset: need at least one covariate");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data.outcomes[i]))
            throw InputError("dataset: non-finite outcome at row " + std::to_string(i));
        for (std::size_t k = 0; k < data.covariates.cols(); ++k)
            if (!std::isfinite(data.covariates(i, k)))
                throw InputError("dataset: non-finite covariate at row " + std::to_string(i) +
                                 ", column " + std::to_string(k));
    }
    const std::size_t treated = data.count_treated();
    if (treated == 0 || treated == n)
        throw InputError("dataset: both treatment groups must be non-empty");
}

namespace {

// Componentwise affine map into [0,1] for the regression stage, fitted
// on the pooled transformed points. Identity when the transformation
// already guarantees unit-cube outputs so that the rank pipeline feeds
// raw ranks to the basis.
struct UnitRescale {
    bool identity = true;
    std::vector<double> lo, inv_range;

    static UnitRescale fit(const Matrix& points, bool already_unit) {
        UnitRescale r;
        if (already_unit) return r;
        r.identity = false;
        const std::size_t d = points.cols();
        r.lo.assign(d, 0.0);
        r.inv_range.assign(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            double lo = points(0, k), hi = points(0, k);
            for (std::size_t i = 1; i < points.rows(); ++i) {
                lo = std::min(lo, points(i, k));
                hi = std::max(hi, points(i, k));
            }
            r.lo[k] = lo;
            r.inv_range[k] = hi > lo ? 1.0 / (hi - lo) : 0.0;
        }
        return r;
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        if (identity) {
            std::copy(in.begin(), in.end(), out.begin());
            return;
        }
        for (std::size_t k = 0; k < in.size(); ++k) {
            if (inv_range[k] == 0.0) {
                out[k] = 0.5;  // degenerate coordinate
            } else {
                const double v = (in[k] - lo[k]) * inv_range[k];
                out[k] = std::min(1.0, std::max(0.0, v));
            }
        }
    }
};

// Fitted regression for one arm; evaluates to zero when unadjusted.
struct ArmModel {
    std::optional<SeriesFit> fit;
    UnitRescale rescale;

    double at(std::span<const double> point, std::vector<double>& scratch) const {
        if (!fit) return 0.0;
        scratch.resize(point.size());
        rescale.apply(point, scratch);
        return fit->predict(scratch);
    }
};

ArmModel fit_arm(const Dataset& data, const Matrix& space, bool arm_treated,
                 const std::optional<BasisSpec>& adjustment, bool unit_cube) {
    ArmModel model;
    if (!adjustment) return model;
    model.rescale = UnitRescale::fit(space, unit_cube);

    const std::size_t n = data.size();
    std::size_t rows = 0;
    for (std::size_t i = 0; i < n; ++i) rows += ((data.treated[i] != 0) == arm_treated);

    Matrix points(rows, space.cols());
    std::vector<double> y(rows);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if ((data.treated[i] != 0) != arm_treated) continue;
        model.rescale.apply(space.row(i), points.row(r));
        y[r] = data.outcomes[i];
        ++r;
    }

    auto basis = Basis::build(*adjustment);
    try {
        model.fit = fit_series(std::move(basis), points, y);
    } catch (const DegenerateFitError& e) {
        throw DegenerateFitError(std::string(arm_treated ? "treated" : "control") +
                                 " regression: " + e.what());
    }
    return model;
}

}  // namespace

double variance_estimate(std::span<const PerUnit> per_unit, double tau_hat) {
    if (per_unit.empty()) return 0.0;
    double s = 0.0;
    for (const PerUnit& u : per_unit) {
        const double dev = u.influence - tau_hat;
        s += dev * dev;
    }
    return s / static_cast<double>(per_unit.size());
}

std::pair<double, double> confidence_interval(double tau_hat, double sigma2_hat, std::size_t n,
                                              double level) {
    if (!(level > 0.0 && level < 1.0))
        throw ConfigError("confidence_interval: level must lie strictly inside (0,1)");
    if (sigma2_hat < 0.0) throw ConfigError("confidence_interval: negative variance");
    const double half = normal_critical_value(level) *
                        std::sqrt(sigma2_hat / static_cast<double>(n));
    return {tau_hat - half, tau_hat + half};
}

AteReport estimate_ate_generalized(const Dataset& data, const Transformation& phi0,
                                   const Transformation& phi1, const EstimateOptions& options) {
    validate_dataset(data);
    const std::size_t n = data.size();
    const std::size_t n_treated = data.count_treated();
    const std::size_t n_control = n - n_treated;

    if (options.m < 1) throw ConfigError("estimate: m must be positive");
    if (options.m > std::min(n_treated, n_control))
        throw ConfigError("estimate: m = " + std::to_string(options.m) +
                          " exceeds the smaller group (treated " + std::to_string(n_treated) +
                          ", control " + std::to_string(n_control) + ")");
    if (phi0.input_dim() != data.covariates.cols() || phi1.input_dim() != data.covariates.cols())
        throw ConfigError("estimate: transformation input dimension does not match covariates");
    if (options.adjustment) {
        if (phi0.output_dim() != phi1.output_dim())
            throw ConfigError("estimate: adjusted runs need equal transformed dimensions");
        if (options.adjustment->dimension != phi0.output_dim())
            throw ConfigError("estimate: basis dimension " +
                              std::to_string(options.adjustment->dimension) +
                              " does not match transformed dimension " +
                              std::to_string(phi0.output_dim()));
    }

    // Transformed representations per arm; computing once when both arms
    // share the transformation keeps the rank pipeline bit-stable.
    const Matrix t0 = phi0.apply_batch(data.covariates);
    const Matrix t1 = (&phi1 == &phi0) ? t0 : phi1.apply_batch(data.covariates);

    const ArmModel model0 = fit_arm(data, t0, false, options.adjustment,
                                    phi0.outputs_in_unit_cube());
    const ArmModel model1 = fit_arm(data, t1, true, options.adjustment,
                                    phi1.outputs_in_unit_cube());

    MatchOutput matches = match_nn_two_spaces(t0, t1, data.treated, options.m, options.backend);

    std::vector<double> mu0_at(n), mu1_at(n);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        mu0_at[i] = model0.at(t0.row(i), scratch);
        mu1_at[i] = model1.at(t1.row(i), scratch);
    }

    AteReport report;
    report.level = options.level;
    report.n = n;
    report.n_treated = n_treated;
    report.n_control = n_control;
    report.m_used = options.m;
    report.adjusted = options.adjustment.has_value();
    report.basis_label = options.adjustment ? options.adjustment->to_string() : "none";
    report.per_unit.resize(n);

    const double inv_m = 1.0 / static_cast<double>(options.m);
    double sum_diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        PerUnit& u = report.per_unit[i];
        u.treated = data.treated[i];
        u.outcome = data.outcomes[i];
        u.mu0_at = mu0_at[i];
        u.mu1_at = mu1_at[i];
        u.k_count = matches.k_counts[i];

        // Imputation: observed arm keeps Y_i, the other arm averages the
        // bias-corrected matched outcomes.
        const bool is_treated = data.treated[i] != 0;
        const auto& mu_at = is_treated ? mu0_at : mu1_at;
        double matched = 0.0;
        for (const std::uint32_t j : matches.match_sets[i])
            matched += data.outcomes[j] + mu_at[i] - mu_at[j];
        matched *= inv_m;
        u.yhat1 = is_treated ? data.outcomes[i] : matched;
        u.yhat0 = is_treated ? matched : data.outcomes[i];

        u.residual = data.outcomes[i] - (is_treated ? mu1_at[i] : mu0_at[i]);
        const double sign = is_treated ? 1.0 : -1.0;
        const double weight = 1.0 + static_cast<double>(u.k_count) * inv_m;
        u.influence = mu1_at[i] - mu0_at[i] + sign * weight * u.residual;

        sum_diff += u.yhat1 - u.yhat0;
    }
    report.tau_hat = sum_diff / static_cast<double>(n);

    double sum_reg = 0.0, sum_aug = 0.0;
    for (const PerUnit& u : report.per_unit) {
        sum_reg += u.mu1_at - u.mu0_at;
        sum_aug += u.influence - (u.mu1_at - u.mu0_at);
    }
    report.tau_reg = sum_reg / static_cast<double>(n);

    // The augmented-IPW form must reproduce the direct form to rounding;
    // a violation means the imputation and weights disagree.
    const double tau_aipw = report.tau_reg + sum_aug / static_cast<double>(n);
    if (std::abs(report.tau_hat - tau_aipw) > 1e-9 * (1.0 + std::abs(report.tau_hat)))
        throw std::logic_error("estimate: augmented-IPW identity violated (direct " +
                               std::to_string(report.tau_hat) + ", augmented " +
                               std::to_string(tau_aipw) + ")");

    report.sigma2_hat = variance_estimate(report.per_unit, report.tau_hat);
    const auto ci = confidence_interval(report.tau_hat, report.sigma2_hat, n, options.level);
    report.ci_lower = ci.first;
    report.ci_upper = ci.second;
    report.matches = std::move(matches);
    return report;
}

AteReport estimate_ate(const Dataset& data, const EstimateOptions& options) {
    validate_dataset(data);
    const EcdfTransformation ranks = EcdfTransformation::fit(data.covariates);
    return estimate_ate_generalized(data, ranks, ranks, options);
}

}  // namespace rankmatch
