#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/basis.hpp"
#include "rankmatch/matching.hpp"
#include "rankmatch/matrix.hpp"
#include "rankmatch/transform.hpp"

namespace rankmatch {

// One observed sample: covariates X_i, treatment flags D_i, outcomes Y_i.
struct Dataset {
    Matrix covariates;
    std::vector<std::uint8_t> treated;
    std::vector<double> outcomes;

    std::size_t size() const { return outcomes.size(); }
    std::size_t count_treated() const;
};

// Throws InputError unless n >= 2, both groups are non-empty, sizes agree
// and all entries are finite.
void validate_dataset(const Dataset& data);

struct PerUnit {
    std::uint8_t treated = 0;
    double outcome = 0.0;
    double yhat0 = 0.0, yhat1 = 0.0;   // imputed potential outcomes
    double mu0_at = 0.0, mu1_at = 0.0; // fitted regressions at the unit
    double residual = 0.0;             // Y - mu_D at the unit
    double influence = 0.0;            // mu1 - mu0 + (2D-1)(1+K/M) * residual
    std::uint32_t k_count = 0;
};

struct AteReport {
    double tau_hat = 0.0;     // mean(yhat1 - yhat0)
    double tau_reg = 0.0;     // mean(mu1_at - mu0_at)
    double sigma2_hat = 0.0;  // mean((influence - tau_hat)^2)
    double ci_lower = 0.0, ci_upper = 0.0;
    double level = 0.95;
    std::size_t n = 0, n_treated = 0, n_control = 0, m_used = 0;
    bool adjusted = false;  // raw matching runs carry no regression guarantee
    std::string basis_label = "none";
    std::vector<PerUnit> per_unit;
    MatchOutput matches;
};

struct EstimateOptions {
    std::size_t m = 1;
    std::optional<BasisSpec> adjustment;  // nullopt: raw matching, mu == 0
    double level = 0.95;
    MatchBackend backend = MatchBackend::spatial_index;
};

// The full rank pipeline: pooled empirical ranks, per-group series
// regression on own-group ranks, M-NN matching with replacement on the
// ranks, bias-corrected imputation, variance and confidence interval.
// The equivalent augmented-IPW form is recomputed internally and
// asserted against the direct form on every call.
AteReport estimate_ate(const Dataset& data, const EstimateOptions& options);

// Same pipeline over caller-supplied covariate transformations: a unit's
// matches are found in the opposite group's transformed representation,
// and each arm's regression runs on that arm's own representation.
// Passing the fitted rank transform for both arms reproduces
// estimate_ate exactly.
AteReport estimate_ate_generalized(const Dataset& data, const Transformation& phi0,
                                   const Transformation& phi1, const EstimateOptions& options);

// mean((influence_i - tau_hat)^2); always >= 0.
double variance_estimate(std::span<const PerUnit> per_unit, double tau_hat);

// tau_hat +/- z_{(1+level)/2} * sqrt(sigma2_hat / n).
std::pair<double, double> confidence_interval(double tau_hat, double sigma2_hat, std::size_t n,
                                              double level);

}  // namespace rankmatch
