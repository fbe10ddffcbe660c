#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rankmatch/basis.hpp"
#include "rankmatch/matrix.hpp"

namespace rankmatch {

// A fitted series least-squares regression: coefficients solve the
// normal equations through the pseudo-inverse of the scaled Gram
// P^T P / n (symmetric eigendecomposition, relative eigenvalue cutoff
// 1e-10); directions below the cutoff get zero coefficient. Immutable
// and safe to share once fitted.
struct SeriesFit {
    std::shared_ptr<const Basis> basis;
    std::vector<double> beta;     // K coefficients
    std::vector<double> gram;     // K x K row-major, P^T P / n
    std::size_t rank_used = 0;
    std::size_t n_fit = 0;

    double predict(std::span<const double> w) const;
};

// Population-oracle approximation terms; populated only by simulation
// drivers that know the true regression function.
struct ApproxTerms {
    double xi2 = 0.0;  // squared L2 distance between truth and its projection
    double r_n = 0.0;  // mean squared truth gap between oracle and generated points
    double b_n = 0.0;  // scaled design perturbation, spectral norm squared / n
};

struct DiagnosticsReport {
    double lambda_min_hat = 0.0;     // smallest eigenvalue of P^T P / n
    bool underdetermined = false;    // n < K (rank deficiency expected)
    double l2_error = 0.0;           // filled by Monte Carlo sweeps
    std::optional<ApproxTerms> approx;
};

// Throws DegenerateFitError when every basis function vanishes on the
// data (zero design).
SeriesFit fit_series(std::shared_ptr<const Basis> basis, const Matrix& points,
                     std::span<const double> y);

DiagnosticsReport gram_diagnostics(const Basis& basis, const Matrix& points);

using TruthFn = std::function<double(std::span<const double>)>;
using PointSampler = std::function<void(std::span<double>)>;  // fills a d-vector

// Monte Carlo estimate of the squared L2 distance between the fitted
// predictor and `truth` under the sampler's distribution.
double l2_error_mc(const SeriesFit& fit, const TruthFn& truth, const PointSampler& sampler,
                   std::size_t n_mc);

}  // namespace rankmatch
