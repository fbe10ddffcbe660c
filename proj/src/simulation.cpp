#include "rankmatch/simulation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rankmatch/errors.hpp"
#include "rankmatch/matching.hpp"
#include "rankmatch/rng.hpp"
#include "rankmatch/stats.hpp"
#include "rankmatch/threads.hpp"
#include "rankmatch/transform.hpp"

namespace rankmatch {

Marginal marginal_from_string(const std::string& name) {
    if (name == "uniform") return Marginal::uniform;
    if (name == "normal") return Marginal::normal;
    if (name == "cauchy") return Marginal::cauchy;
    if (name == "lognormal") return Marginal::lognormal;
    throw ConfigError("unknown marginal '" + name + "'");
}

std::string to_string(Marginal m) {
    switch (m) {
        case Marginal::uniform: return "uniform";
        case Marginal::normal: return "normal";
        case Marginal::cauchy: return "cauchy";
        default: return "lognormal";
    }
}

double Polynomial::eval(std::span<const double> u) const {
    double s = 0.0;
    for (const Term& t : terms) {
        double prod = t.coef;
        for (std::size_t k = 0; k < t.powers.size(); ++k)
            for (unsigned p = 0; p < t.powers[k]; ++p) prod *= u[k];
        s += prod;
    }
    return s;
}

double Polynomial::eval_partial(std::span<const double> u, std::size_t axis) const {
    double s = 0.0;
    for (const Term& t : terms) {
        if (axis >= t.powers.size() || t.powers[axis] == 0) continue;
        double prod = t.coef * static_cast<double>(t.powers[axis]);
        for (std::size_t k = 0; k < t.powers.size(); ++k) {
            const unsigned p = (k == axis) ? t.powers[k] - 1 : t.powers[k];
            for (unsigned q = 0; q < p; ++q) prod *= u[k];
        }
        s += prod;
    }
    return s;
}

bool Polynomial::is_constant() const {
    for (const Term& t : terms)
        for (const unsigned p : t.powers)
            if (p != 0 && t.coef != 0.0) return false;
    return true;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double marginal_quantile(Marginal m, double u) {
    switch (m) {
        case Marginal::uniform: return u;
        case Marginal::normal: return normal_quantile(u);
        case Marginal::cauchy: return std::tan(std::numbers::pi * (u - 0.5));
        default: return std::exp(normal_quantile(u));
    }
}

// Lower Cholesky factor of the copula correlation; identity when sigma
// is empty.
Eigen::MatrixXd copula_chol(const DgpSpec& spec) {
    const auto d = static_cast<Eigen::Index>(spec.d);
    if (spec.sigma.empty()) return Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sigma(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            sigma(i, j) = spec.sigma[static_cast<std::size_t>(i * d + j)];
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw ConfigError("dgp: copula correlation matrix is not positive definite");
    return llt.matrixL();
}

double propensity_at(const DgpSpec& spec, std::span<const double> u) {
    double logit = spec.propensity[0];
    for (std::size_t k = 0; k < spec.d; ++k) logit += spec.propensity[k + 1] * u[k];
    return logistic(logit);
}

// One unit's rank point from d standard normals.
void draw_u(Rng& rng, const Eigen::MatrixXd& chol, std::span<double> u) {
    const Eigen::Index d = chol.rows();
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
    const Eigen::VectorXd corr = chol * z;
    for (Eigen::Index k = 0; k < d; ++k) u[static_cast<std::size_t>(k)] = normal_cdf(corr(k));
}

}  // namespace

void DgpSpec::validate() const {
    if (d < 1) throw ConfigError("dgp: dimension must be >= 1");
    if (marginals.size() != d) throw ConfigError("dgp: need one marginal per coordinate");
    if (propensity.size() != d + 1)
        throw ConfigError("dgp: propensity needs an intercept plus one slope per coordinate");
    if (!(noise_sd0 >= 0.0) || !(noise_sd1 >= 0.0))
        throw ConfigError("dgp: noise standard deviations must be non-negative");
    if (!sigma.empty()) {
        if (sigma.size() != d * d) throw ConfigError("dgp: copula matrix must be d x d");
        for (std::size_t i = 0; i < d; ++i) {
            if (std::abs(sigma[i * d + i] - 1.0) > 1e-12)
                throw ConfigError("dgp: copula matrix needs a unit diagonal");
            for (std::size_t j = 0; j < d; ++j)
                if (std::abs(sigma[i * d + j] - sigma[j * d + i]) > 1e-12)
                    throw ConfigError("dgp: copula matrix must be symmetric");
        }
    }
    (void)copula_chol(*this);  // PD check

    // Overlap: the logistic propensity attains its extremes at the cube
    // corners.
    if (d <= 16) {
        std::vector<double> corner(d);
        for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
            for (std::size_t k = 0; k < d; ++k) corner[k] = (mask >> k) & 1 ? 1.0 : 0.0;
            const double e = propensity_at(*this, corner);
            if (!(e > 0.001 && e < 0.999))
                throw ConfigError("dgp: propensity leaves (0.001, 0.999) at a corner of [0,1]^d");
        }
    }
}

std::pair<Dataset, DgpOracle> sample_dgp(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 2) throw ConfigError("sample_dgp: need n >= 2");

    const Eigen::MatrixXd chol = copula_chol(spec);
    Rng rng(seed);

    Dataset data;
    data.covariates = Matrix(n, spec.d);
    data.treated.assign(n, 0);
    data.outcomes.assign(n, 0.0);

    DgpOracle oracle;
    oracle.u = Matrix(n, spec.d);
    oracle.propensity.assign(n, 0.0);
    oracle.mu0_at.assign(n, 0.0);
    oracle.mu1_at.assign(n, 0.0);
    oracle.y0.assign(n, 0.0);
    oracle.y1.assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const auto u = oracle.u.row(i);
        draw_u(rng, chol, u);
        for (std::size_t k = 0; k < spec.d; ++k)
            data.covariates(i, k) = marginal_quantile(spec.marginals[k], u[k]);

        const double e = propensity_at(spec, u);
        oracle.propensity[i] = e;
        data.treated[i] = rng.bernoulli(e) ? 1 : 0;

        oracle.mu0_at[i] = spec.mu0.eval(u);
        oracle.mu1_at[i] = spec.mu1.eval(u);
        const double noise = rng.normal();
        oracle.y0[i] = oracle.mu0_at[i] + spec.noise_sd0 * noise;
        oracle.y1[i] = oracle.mu1_at[i] + spec.noise_sd1 * noise;
        data.outcomes[i] = data.treated[i] ? oracle.y1[i] : oracle.y0[i];
    }
    return {std::move(data), std::move(oracle)};
}

Matrix sample_rank_points(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    const Eigen::MatrixXd chol = copula_chol(spec);
    Rng rng(seed);
    Matrix u(n, spec.d);
    for (std::size_t i = 0; i < n; ++i) draw_u(rng, chol, u.row(i));
    return u;
}

double true_tau_value(const DgpSpec& spec) {
    if (spec.true_tau) return *spec.true_tau;
    const Eigen::MatrixXd chol = copula_chol(spec);
    Rng rng(derive_seed(0x7a75u, 0));
    const std::size_t n_mc = 400000;
    std::vector<double> u(spec.d);
    double s = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        draw_u(rng, chol, u);
        s += spec.mu1.eval(u) - spec.mu0.eval(u);
    }
    return s / static_cast<double>(n_mc);
}

EfficiencyBound efficiency_bound(const DgpSpec& spec, std::size_t n_mc, std::uint64_t seed) {
    spec.validate();
    if (n_mc < 2) throw ConfigError("efficiency_bound: need n_mc >= 2");
    const double tau = true_tau_value(spec);
    const Eigen::MatrixXd chol = copula_chol(spec);
    Rng rng(seed);

    std::vector<double> u(spec.d);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        draw_u(rng, chol, u);
        const double e = propensity_at(spec, u);
        const double mu0 = spec.mu0.eval(u);
        const double mu1 = spec.mu1.eval(u);
        const bool treated = rng.bernoulli(e);
        const double noise = rng.normal();
        const double y = treated ? mu1 + spec.noise_sd1 * noise : mu0 + spec.noise_sd0 * noise;

        double psi = mu1 - mu0 - tau;
        if (treated) psi += (y - mu1) / e;
        else psi -= (y - mu0) / (1.0 - e);

        const double sq = psi * psi;
        sum += sq;
        sum_sq += sq * sq;
    }

    EfficiencyBound out;
    out.n_mc = n_mc;
    out.sigma2 = sum / static_cast<double>(n_mc);
    const double var_sq =
        std::max(0.0, sum_sq / static_cast<double>(n_mc) - out.sigma2 * out.sigma2);
    out.mc_se = std::sqrt(var_sq / static_cast<double>(n_mc));
    return out;
}

std::size_t MRule::eval(std::size_t n) const {
    const double dn = static_cast<double>(n);
    double target = 1.0;
    switch (kind) {
        case Kind::auto_rule: target = std::ceil(std::pow(dn, 0.75) / std::log(dn)); break;
        case Kind::power: target = std::ceil(std::pow(dn, exponent)); break;
        case Kind::fixed: return fixed;
    }
    return target < 1.0 ? 1 : static_cast<std::size_t>(target);
}

std::string MRule::to_string() const {
    switch (kind) {
        case Kind::auto_rule: return "auto";
        case Kind::power: {
            std::string s = "pow:" + std::to_string(exponent);
            return s;
        }
        default: return "fixed:" + std::to_string(fixed);
    }
}

MRule MRule::parse(const std::string& text) {
    MRule rule;
    if (text == "auto") {
        rule.kind = Kind::auto_rule;
        return rule;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (head == "pow") {
            rule.kind = Kind::power;
            std::size_t pos = 0;
            rule.exponent = std::stod(arg, &pos);
            if (pos != arg.size() || !(rule.exponent > 0.0 && rule.exponent < 1.0))
                throw std::invalid_argument(arg);
            return rule;
        }
        if (head == "fixed") {
            rule.kind = Kind::fixed;
            std::size_t pos = 0;
            const long long v = std::stoll(arg, &pos);
            if (pos != arg.size() || v < 1) throw std::invalid_argument(arg);
            rule.fixed = static_cast<std::size_t>(v);
            return rule;
        }
    } catch (const std::exception&) {
        throw ConfigError("m_rule: cannot parse '" + text + "'");
    }
    throw ConfigError("m_rule: unknown rule '" + text + "' (want auto, pow:a, fixed:k)");
}

namespace {

std::size_t clamped_m(const MRule& rule, std::size_t n, std::size_t min_group) {
    const std::size_t target = rule.eval(n);
    return std::max<std::size_t>(1, std::min(target, min_group));
}

}  // namespace

McReport run_monte_carlo(const DgpSpec& spec, const EstimatorConfig& config, std::size_t n,
                         std::size_t reps, std::uint64_t seed) {
    spec.validate();
    if (reps < 1) throw ConfigError("run_monte_carlo: need reps >= 1");

    McReport report;
    report.n = n;
    report.reps = reps;
    report.seed = seed;
    report.true_tau = true_tau_value(spec);
    report.per_rep.resize(reps);

    parallel_for(reps, [&](std::size_t r) {
        RepRecord& rec = report.per_rep[r];
        rec.rep = r;
        rec.seed = derive_seed(seed, r);
        try {
            auto [data, oracle] = sample_dgp(spec, n, rec.seed);
            const std::size_t n_treated = data.count_treated();
            EstimateOptions opts;
            opts.m = clamped_m(config.m_rule, n, std::min(n_treated, n - n_treated));
            opts.adjustment = config.adjustment;
            opts.level = config.level;
            const AteReport est = estimate_ate(data, opts);
            rec.m_used = est.m_used;
            rec.tau_hat = est.tau_hat;
            rec.sigma2_hat = est.sigma2_hat;
            rec.ci_lower = est.ci_lower;
            rec.ci_upper = est.ci_upper;
            rec.covered = est.ci_lower <= report.true_tau && report.true_tau <= est.ci_upper;
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
    });

    std::vector<double> taus, sigma2s;
    std::size_t covered = 0, ok = 0;
    for (const RepRecord& rec : report.per_rep) {
        if (rec.failed) {
            ++report.failures;
            continue;
        }
        ++ok;
        taus.push_back(rec.tau_hat);
        sigma2s.push_back(rec.sigma2_hat);
        covered += rec.covered;
    }
    if (ok == 0) return report;

    const double tau = report.true_tau;
    report.bias = mean(taus) - tau;
    report.sd = std::sqrt(variance(taus));
    double mse = 0.0;
    for (const double t : taus) mse += (t - tau) * (t - tau);
    report.rmse = std::sqrt(mse / static_cast<double>(ok));
    report.mean_sigma2 = mean(sigma2s);
    report.var_sqrt_n_tau = static_cast<double>(n) * variance(taus);
    report.coverage = static_cast<double>(covered) / static_cast<double>(ok);
    report.se_bias = report.sd / std::sqrt(static_cast<double>(ok));
    report.se_coverage =
        std::sqrt(std::max(0.0, report.coverage * (1.0 - report.coverage)) /
                  static_cast<double>(ok));
    report.se_mean_sigma2 = std::sqrt(variance(sigma2s) / static_cast<double>(ok));
    return report;
}

std::vector<RatioRow> check_density_ratio(const DgpSpec& spec,
                                          const std::vector<std::size_t>& n_grid,
                                          const MRule& m_rule, std::size_t reps,
                                          std::uint64_t seed) {
    spec.validate();
    if (n_grid.empty() || reps < 1)
        throw ConfigError("check_density_ratio: need a sample grid and reps >= 1");

    std::vector<RatioRow> rows(n_grid.size());
    std::vector<std::vector<double>> mses(n_grid.size(), std::vector<double>(reps, 0.0));
    std::vector<std::size_t> ms(n_grid.size(), 0);

    parallel_for(n_grid.size() * reps, [&](std::size_t job) {
        const std::size_t gi = job / reps;
        const std::size_t rep = job % reps;
        const std::size_t n = n_grid[gi];
        const std::uint64_t rep_seed = derive_seed(seed, job + 1);

        auto [data, oracle] = sample_dgp(spec, n, rep_seed);
        const std::size_t n_treated = data.count_treated();
        const std::size_t m = clamped_m(m_rule, n, std::min(n_treated, n - n_treated));
        if (rep == 0) ms[gi] = m;

        const Matrix ranks = RankMap::fit(data.covariates).apply_batch(data.covariates);
        const MatchOutput matches = match_nn(ranks, data.treated, m);

        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = oracle.propensity[i];
            const double odds = data.treated[i] ? (1.0 - e) / e : e / (1.0 - e);
            const double k_over_m =
                static_cast<double>(matches.k_counts[i]) / static_cast<double>(m);
            mse += (k_over_m - odds) * (k_over_m - odds);
        }
        mses[gi][rep] = mse / static_cast<double>(n);
    });

    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        rows[gi].n = n_grid[gi];
        rows[gi].m = ms[gi];
        rows[gi].median_mse = median(mses[gi]);
        rows[gi].mean_mse = mean(mses[gi]);
    }
    return rows;
}

namespace {

// Spectral norm squared of (P - P_n) G^{-1/2} / n with G^{-1/2} taken on
// the retained eigenspace of the surrogate Gram.
double design_perturbation(const Basis& basis, const Matrix& oracle_points,
                           const Matrix& generated_points, const std::vector<double>& gram) {
    const std::size_t n = oracle_points.rows();
    const std::size_t k = basis.size();
    Eigen::MatrixXd diff(n, k);
    std::vector<double> row_a(k), row_b(k);
    for (std::size_t i = 0; i < n; ++i) {
        basis.eval(oracle_points.row(i), row_a);
        basis.eval(generated_points.row(i), row_b);
        for (std::size_t j = 0; j < k; ++j)
            diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                row_a[j] - row_b[j];
    }

    Eigen::Map<const Eigen::MatrixXd> g(gram.data(), static_cast<Eigen::Index>(k),
                                        static_cast<Eigen::Index>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
    const double cutoff = 1e-10 * solver.eigenvalues().maxCoeff();
    Eigen::MatrixXd inv_sqrt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                     static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < solver.eigenvalues().size(); ++j) {
        const double lambda = solver.eigenvalues()(j);
        if (lambda > cutoff)
            inv_sqrt += solver.eigenvectors().col(j) * solver.eigenvectors().col(j).transpose() /
                        std::sqrt(lambda);
    }

    const Eigen::MatrixXd scaled = diff * inv_sqrt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectral(scaled.transpose() * scaled,
                                                            Eigen::EigenvaluesOnly);
    return spectral.eigenvalues().maxCoeff() / static_cast<double>(n);
}

}  // namespace

RateReport rate_sweep_series(const DgpSpec& spec, const BasisSpec& basis_spec,
                             const std::vector<std::size_t>& n_grid, std::size_t reps,
                             std::size_t n_oracle, std::size_t n_mc, std::uint64_t seed) {
    spec.validate();
    basis_spec.validate();
    if (basis_spec.dimension != spec.d)
        throw ConfigError("rate_sweep: basis dimension must match the DGP dimension");
    if (n_grid.empty() || reps < 1) throw ConfigError("rate_sweep: need a grid and reps >= 1");

    const auto basis = Basis::build(basis_spec);
    RateReport report;
    report.basis_size = basis->size();
    report.n_oracle = n_oracle;
    report.n_mc = n_mc;

    // Projection surrogate: fit on oracle rank points at large n.
    const Matrix oracle_u = sample_rank_points(spec, n_oracle, derive_seed(seed, 0xA));
    std::vector<double> oracle_y(n_oracle);
    {
        Rng noise_rng(derive_seed(seed, 0xB));
        for (std::size_t i = 0; i < n_oracle; ++i)
            oracle_y[i] = spec.mu0.eval(oracle_u.row(i)) + spec.noise_sd0 * noise_rng.normal();
    }
    const SeriesFit surrogate = fit_series(basis, oracle_u, oracle_y);

    {
        Eigen::Map<const Eigen::MatrixXd> g(surrogate.gram.data(),
                                            static_cast<Eigen::Index>(basis->size()),
                                            static_cast<Eigen::Index>(basis->size()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
        report.lambda_min_hat = solver.eigenvalues()(0);
    }

    // Approximation error of the surrogate against the truth.
    {
        const Matrix fresh = sample_rank_points(spec, n_mc, derive_seed(seed, 0xC));
        double s = 0.0;
        for (std::size_t i = 0; i < n_mc; ++i) {
            const double diff = surrogate.predict(fresh.row(i)) - spec.mu0.eval(fresh.row(i));
            s += diff * diff;
        }
        report.xi2 = s / static_cast<double>(n_mc);
    }

    std::vector<std::vector<double>> l2(n_grid.size(), std::vector<double>(reps, 0.0));
    std::vector<std::vector<double>> rn(n_grid.size(), std::vector<double>(reps, 0.0));
    std::vector<std::vector<double>> bn(n_grid.size(), std::vector<double>(reps, 0.0));

    parallel_for(n_grid.size() * reps, [&](std::size_t job) {
        const std::size_t gi = job / reps;
        const std::size_t rep = job % reps;
        const std::size_t n = n_grid[gi];
        const std::uint64_t rep_seed = derive_seed(seed, 0x1000 + job);

        auto [data, oracle] = sample_dgp(spec, n, rep_seed);
        const Matrix ranks = RankMap::fit(data.covariates).apply_batch(data.covariates);
        const SeriesFit fit = fit_series(basis, ranks, oracle.y0);

        // Squared L2 distance to the surrogate over fresh copula draws.
        const Matrix fresh = sample_rank_points(spec, n_mc, derive_seed(rep_seed, 0xD));
        double s = 0.0;
        for (std::size_t i = 0; i < n_mc; ++i) {
            const double diff = fit.predict(fresh.row(i)) - surrogate.predict(fresh.row(i));
            s += diff * diff;
        }
        l2[gi][rep] = s / static_cast<double>(n_mc);

        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = spec.mu0.eval(ranks.row(i)) - spec.mu0.eval(oracle.u.row(i));
            gap += diff * diff;
        }
        rn[gi][rep] = gap / static_cast<double>(n);

        bn[gi][rep] = design_perturbation(*basis, oracle.u, ranks, surrogate.gram);
    });

    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        RateRow row;
        row.n = n_grid[gi];
        row.median_l2 = median(l2[gi]);
        row.median_rn = median(rn[gi]);
        row.median_bn = median(bn[gi]);
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace rankmatch
