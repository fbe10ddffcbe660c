#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankmatch/basis.hpp"
#include "rankmatch/estimator.hpp"
#include "rankmatch/matrix.hpp"
#include "rankmatch/regression.hpp"

namespace rankmatch {

enum class Marginal { uniform, normal, cauchy, lognormal };
Marginal marginal_from_string(const std::string& name);
std::string to_string(Marginal m);

// Sparse multivariate polynomial in the rank-scale covariates u.
struct Polynomial {
    struct Term {
        double coef = 0.0;
        std::vector<unsigned> powers;  // one exponent per coordinate
    };
    std::vector<Term> terms;

    double eval(std::span<const double> u) const;
    double eval_partial(std::span<const double> u, std::size_t axis) const;
    bool is_constant() const;
};

// A seeded data-generating process: Gaussian-copula rank variables U,
// configurable marginal quantile maps for the raw covariates X,
// logistic treatment assignment in U, polynomial outcome surfaces with
// Gaussian noise per arm.
struct DgpSpec {
    std::size_t d = 1;
    std::vector<double> sigma;        // d x d row-major copula correlation; empty = identity
    std::vector<Marginal> marginals;  // per coordinate
    std::vector<double> propensity;   // logit coefficients: intercept, then one slope per coordinate
    Polynomial mu0, mu1;
    double noise_sd0 = 1.0, noise_sd1 = 1.0;
    std::optional<double> true_tau;   // analytic value when known

    // Throws ConfigError on a non-PD copula matrix, size mismatches, or
    // propensities outside (0.001, 0.999) at the cube corners (the
    // logistic form attains its extremes there).
    void validate() const;
};

// Exact population quantities for a generated sample.
struct DgpOracle {
    Matrix u;                        // population rank points U_i
    std::vector<double> propensity;  // e(U_i)
    std::vector<double> mu0_at, mu1_at;
    std::vector<double> y0, y1;      // realized potential outcomes
};

// Deterministic given (spec, n, seed); D_i ~ Bernoulli(e(U_i)),
// Y_i = mu_{D_i}(U_i) + noise. Per unit the draw order is fixed:
// d copula normals, the treatment uniform, the outcome normal.
std::pair<Dataset, DgpOracle> sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// Rank-scale points U only (for Gram diagnostics and L2 samplers).
Matrix sample_rank_points(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

// spec.true_tau when supplied, otherwise a fixed-seed Monte Carlo
// average of mu1(U) - mu0(U) over 400000 draws.
double true_tau_value(const DgpSpec& spec);

struct EfficiencyBound {
    double sigma2 = 0.0;
    double mc_se = 0.0;
    std::size_t n_mc = 0;
};

// Monte Carlo value of the semiparametric variance bound: the second
// moment of the efficient influence function evaluated with oracle
// quantities.
EfficiencyBound efficiency_bound(const DgpSpec& spec, std::size_t n_mc, std::uint64_t seed);

// Named schedules for the match count M as a function of n.
struct MRule {
    enum class Kind { auto_rule, power, fixed };
    Kind kind = Kind::auto_rule;
    double exponent = 0.7;   // power: ceil(n^exponent)
    std::size_t fixed = 1;

    // Unclamped target; drivers clamp to [1, min group size].
    std::size_t eval(std::size_t n) const;
    std::string to_string() const;
    static MRule parse(const std::string& text);  // "auto" | "pow:0.7" | "fixed:40"
};

struct EstimatorConfig {
    MRule m_rule;
    std::optional<BasisSpec> adjustment;
    double level = 0.95;
};

struct RepRecord {
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::size_t m_used = 0;
    double tau_hat = 0.0, sigma2_hat = 0.0, ci_lower = 0.0, ci_upper = 0.0;
    bool covered = false;
    bool failed = false;
    std::string error;
};

struct McReport {
    std::size_t n = 0, reps = 0;
    std::uint64_t seed = 0;
    double true_tau = 0.0;
    double bias = 0.0, sd = 0.0, rmse = 0.0;
    double mean_sigma2 = 0.0;
    double var_sqrt_n_tau = 0.0;  // empirical variance of sqrt(n) * tau_hat
    double coverage = 0.0;
    double se_bias = 0.0, se_coverage = 0.0, se_mean_sigma2 = 0.0;
    std::size_t failures = 0;
    std::vector<RepRecord> per_rep;
};

// Independent seeded replications of sample -> estimate; reps may run on
// several workers, with per-rep seeds derived up front so summaries are
// identical for any worker count. Estimator failures are recorded per
// rep, not thrown.
McReport run_monte_carlo(const DgpSpec& spec, const EstimatorConfig& config, std::size_t n,
                         std::size_t reps, std::uint64_t seed);

struct RatioRow {
    std::size_t n = 0, m = 0;
    double median_mse = 0.0, mean_mse = 0.0;
};

// Mean squared error of K(i)/M against the oracle treatment odds, per
// sample size; the rank pipeline's implicit propensity check.
std::vector<RatioRow> check_density_ratio(const DgpSpec& spec,
                                          const std::vector<std::size_t>& n_grid,
                                          const MRule& m_rule, std::size_t reps,
                                          std::uint64_t seed);

struct RateRow {
    std::size_t n = 0;
    double median_l2 = 0.0;   // squared L2 distance to the projection surrogate
    double median_rn = 0.0;   // mean squared truth gap from generated points
    double median_bn = 0.0;   // scaled design perturbation
};

struct RateReport {
    std::size_t basis_size = 0;
    std::size_t n_oracle = 0, n_mc = 0;
    double xi2 = 0.0;          // estimated squared approximation error of the surrogate
    double lambda_min_hat = 0.0;  // smallest Gram eigenvalue at the oracle fit
    std::vector<RateRow> rows;
};

// Series convergence sweep on generated rank covariates. The projection
// target is a surrogate: the same basis fitted on n_oracle oracle-rank
// points. Outcomes are the control-arm potential outcomes, so the sweep
// is a pure regression experiment.
RateReport rate_sweep_series(const DgpSpec& spec, const BasisSpec& basis_spec,
                             const std::vector<std::size_t>& n_grid, std::size_t reps,
                             std::size_t n_oracle, std::size_t n_mc, std::uint64_t seed);

}  // namespace rankmatch
