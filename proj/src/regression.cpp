#include "rankmatch/regression.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "rankmatch/errors.hpp"

namespace rankmatch {

namespace {

constexpr double kEigenCutoff = 1e-10;  // relative to the largest eigenvalue

Eigen::MatrixXd design_matrix(const Basis& basis, const Matrix& points) {
    const std::size_t n = points.rows();
    const std::size_t k = basis.size();
    Eigen::MatrixXd p(n, k);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        basis.eval(points.row(i), row);
        for (std::size_t j = 0; j < k; ++j) p(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j)) = row[j];
    }
    return p;
}

}  // namespace

double SeriesFit::predict(std::span<const double> w) const {
    std::vector<double> values(basis->size());
    basis->eval(w, values);
    double s = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) s += values[j] * beta[j];
    return s;
}

SeriesFit fit_series(std::shared_ptr<const Basis> basis, const Matrix& points,
                     std::span<const double> y) {
    const std::size_t n = points.rows();
    if (n < 1) throw InputError("fit_series: need at least one observation");
    if (y.size() != n) throw InputError("fit_series: y length does not match point count");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(y[i]))
            throw InputError("fit_series: non-finite outcome at row " + std::to_string(i));

    const std::size_t k = basis->size();
    const Eigen::MatrixXd p = design_matrix(*basis, points);
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::MatrixXd gram = (p.transpose() * p) * inv_n;
    const Eigen::VectorXd target =
        (p.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n))) *
        inv_n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success)
        throw DegenerateFitError("fit_series: eigendecomposition of the Gram matrix failed");
    const Eigen::VectorXd& eval = solver.eigenvalues();
    const Eigen::MatrixXd& evec = solver.eigenvectors();

    const double lambda_max = eval(eval.size() - 1);
    if (!(lambda_max > 0.0))
        throw DegenerateFitError("fit_series: all basis functions vanish on the data");
    const double cutoff = kEigenCutoff * lambda_max;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    std::size_t rank = 0;
    for (Eigen::Index j = 0; j < eval.size(); ++j) {
        if (eval(j) > cutoff) {
            beta += evec.col(j) * (evec.col(j).dot(target) / eval(j));
            ++rank;
        }
    }

    SeriesFit fit;
    fit.basis = std::move(basis);
    fit.beta.assign(beta.data(), beta.data() + beta.size());
    fit.gram.assign(gram.data(), gram.data() + gram.size());
    // Eigen stores column-major; the Gram is symmetric so the row-major
    // copy is identical.
    fit.rank_used = rank;
    fit.n_fit = n;
    return fit;
}

DiagnosticsReport gram_diagnostics(const Basis& basis, const Matrix& points) {
    DiagnosticsReport report;
    const std::size_t n = points.rows();
    report.underdetermined = n < basis.size();
    if (n == 0) {
        report.lambda_min_hat = 0.0;
        return report;
    }
    const Eigen::MatrixXd p = design_matrix(basis, points);
    const Eigen::MatrixXd gram = (p.transpose() * p) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    report.lambda_min_hat = solver.eigenvalues()(0);
    return report;
}

double l2_error_mc(const SeriesFit& fit, const TruthFn& truth, const PointSampler& sampler,
                   std::size_t n_mc) {
    const std::size_t d = fit.basis->dimension();
    std::vector<double> w(d);
    double s = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        sampler(w);
        const double diff = fit.predict(w) - truth(w);
        s += diff * diff;
    }
    return s / static_cast<double>(n_mc);
}

}  // namespace rankmatch
