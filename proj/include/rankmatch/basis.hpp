#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rankmatch {

enum class BasisFamily { power, piecewise_poly };

// Parameters of a series basis on [0,1]^dimension.
//   power          : total-degree multivariate monomials, K = C(d+degree, d).
//                    With orthonormal = true the monomials are rotated to
//                    tensorized shifted-Legendre polynomials (same span,
//                    orthonormal under the Lebesgue measure on [0,1]^d).
//   piecewise_poly : tensor products of B-splines of local degree `degree`
//                    on `knots` uniform distinct knots per axis, so
//                    K = (knots + degree - 1)^d and continuity degree-1.
struct BasisSpec {
    BasisFamily family = BasisFamily::power;
    std::size_t dimension = 1;
    std::size_t degree = 1;
    std::size_t knots = 2;        // piecewise_poly only
    bool orthonormal = false;     // power only

    std::size_t size() const;
    void validate() const;        // throws ConfigError

    // "power:2" | "legendre:2" | "pp:1,3" (degree,knots); parse() also
    // accepts "none" via the caller returning no basis.
    std::string to_string() const;
    static BasisSpec parse(const std::string& text, std::size_t dimension);
};

// An evaluable basis p_K on [0,1]^d. Immutable after build; evaluation is
// pure and concurrent-safe.
class Basis {
public:
    static std::shared_ptr<const Basis> build(const BasisSpec& spec);

    const BasisSpec& spec() const { return spec_; }
    std::size_t size() const { return size_; }
    std::size_t dimension() const { return spec_.dimension; }

    // Largest admissible |t| for eval_deriv: unbounded for the power
    // family (any higher derivative is identically zero), the local
    // degree for piecewise polynomials (order == degree yields the a.e.
    // derivative with the right-continuous knot convention).
    std::size_t max_derivative_order() const;

    // Coordinates within 1e-12 of [0,1] are clamped; anything further
    // out throws DomainError.
    void eval(std::span<const double> w, std::span<double> out) const;
    std::vector<double> eval(std::span<const double> w) const;

    void eval_deriv(std::span<const double> w, std::span<const unsigned> multi_index,
                    std::span<double> out) const;
    std::vector<double> eval_deriv(std::span<const double> w,
                                   std::span<const unsigned> multi_index) const;

    // Grid estimate of max_{|t|=q} sup_w ||d^t p_K(w)||_2: a uniform grid
    // of >= 10^4 points for d <= 2, a Halton set of 10^5 points plus the
    // cube corners for d >= 3.
    double sup_norm_estimate(unsigned q) const;

private:
    explicit Basis(BasisSpec spec);

    BasisSpec spec_;
    std::size_t size_ = 0;

    // Multi-index per basis function. Power family: exponents per axis.
    // Piecewise family: per-axis B-spline index.
    std::vector<std::vector<unsigned>> indices_;

    // Power family: coefs_[q][j] = monomial coefficients of the q-th
    // derivative of the degree-j 1-D member (monomial or shifted
    // Legendre), shared across axes.
    std::vector<std::vector<std::vector<double>>> coefs_;

    // Piecewise family.
    std::vector<double> knot_vector_;   // clamped, per axis (axes identical)
    std::size_t per_axis_ = 0;

    void axis_values(double w, unsigned order, std::vector<double>& out) const;
    void eval_impl(std::span<const double> w, std::span<const unsigned> orders,
                   std::span<double> out) const;
};

}  // namespace rankmatch
