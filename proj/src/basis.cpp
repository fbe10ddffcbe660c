#include "rankmatch/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rankmatch/errors.hpp"

namespace rankmatch {

namespace {

constexpr double kBoundarySlack = 1e-12;
constexpr std::size_t kMaxBasisSize = 1u << 20;

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) result = result * (n - k + i) / i;
    return result;
}

// All multi-indices with |t| = grade over `dim` axes, lexicographic with
// the leading axis largest first.
void compositions(std::size_t dim, unsigned grade, std::vector<unsigned>& current,
                  std::vector<std::vector<unsigned>>& out) {
    if (current.size() + 1 == dim) {
        current.push_back(grade);
        out.push_back(current);
        current.pop_back();
        return;
    }
    for (unsigned head = grade + 1; head-- > 0;) {
        current.push_back(head);
        compositions(dim, grade - head, current, out);
        current.pop_back();
    }
}

std::vector<std::vector<unsigned>> multi_indices_up_to(std::size_t dim, unsigned degree) {
    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> current;
    for (unsigned grade = 0; grade <= degree; ++grade) compositions(dim, grade, current, out);
    return out;
}

std::vector<std::vector<unsigned>> multi_indices_exact(std::size_t dim, unsigned grade) {
    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> current;
    compositions(dim, grade, current, out);
    return out;
}

// Monomial coefficients (ascending powers) of the 1-D family members.
std::vector<std::vector<double>> monomial_coefs(std::size_t degree) {
    std::vector<std::vector<double>> polys(degree + 1);
    for (std::size_t j = 0; j <= degree; ++j) {
        polys[j].assign(j + 1, 0.0);
        polys[j][j] = 1.0;
    }
    return polys;
}

// Shifted Legendre on [0,1], normalized to unit L2 norm under Lebesgue:
// L_j(w) = sqrt(2j+1) P_j(2w - 1), built via the three-term recurrence
// in coefficient space.
std::vector<std::vector<double>> legendre_coefs(std::size_t degree) {
    std::vector<std::vector<double>> p(degree + 1);
    p[0] = {1.0};
    if (degree >= 1) p[1] = {-1.0, 2.0};
    auto times_x = [](const std::vector<double>& c) {  // multiply by (2w - 1)
        std::vector<double> r(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            r[i + 1] += 2.0 * c[i];
            r[i] -= c[i];
        }
        return r;
    };
    for (std::size_t j = 1; j < degree; ++j) {
        const auto xc = times_x(p[j]);
        std::vector<double> next(j + 2, 0.0);
        const double a = (2.0 * j + 1.0) / (j + 1.0);
        const double b = static_cast<double>(j) / (j + 1.0);
        for (std::size_t i = 0; i < xc.size(); ++i) next[i] += a * xc[i];
        for (std::size_t i = 0; i < p[j - 1].size(); ++i) next[i] -= b * p[j - 1][i];
        p[j + 1] = std::move(next);
    }
    for (std::size_t j = 0; j <= degree; ++j) {
        const double norm = std::sqrt(2.0 * j + 1.0);
        for (double& c : p[j]) c *= norm;
    }
    return p;
}

std::vector<double> differentiate(const std::vector<double>& c) {
    if (c.size() <= 1) return {0.0};
    std::vector<double> d(c.size() - 1);
    for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
    return d;
}

double horner(const std::vector<double>& c, double w) {
    double v = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) v = v * w + c[i];
    return v;
}

// ---- B-spline machinery (clamped uniform knots on [0,1]) ----

// Span index with U[span] <= u < U[span+1]; u == 1 maps to the last
// non-empty span, which is the right-continuous convention everywhere
// else as well.
std::size_t find_span(double u, std::size_t degree, std::size_t basis_count,
                      const std::vector<double>& knots) {
    const std::size_t n = basis_count - 1;
    if (u >= knots[n + 1]) return n;
    if (u <= knots[degree]) return degree;
    std::size_t low = degree, high = n + 1;
    std::size_t mid = (low + high) / 2;
    while (u < knots[mid] || u >= knots[mid + 1]) {
        if (u < knots[mid]) high = mid;
        else low = mid;
        mid = (low + high) / 2;
    }
    return mid;
}

// Derivatives of the degree+1 B-splines that are non-zero on the span,
// orders 0..nders (The NURBS Book, A2.3). ders[k][r] is the k-th
// derivative of basis function span-degree+r.
void ders_basis_funs(std::size_t span, double u, std::size_t degree, std::size_t nders,
                     const std::vector<double>& knots,
                     std::vector<std::vector<double>>& ders) {
    const std::size_t p = degree;
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);
    ndu[0][0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    ders.assign(nders + 1, std::vector<double>(p + 1, 0.0));
    for (std::size_t j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
    if (nders == 0 || p == 0) return;

    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r <= p; ++r) {
        std::size_t s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (std::size_t k = 1; k <= nders; ++k) {
            double d = 0.0;
            const std::ptrdiff_t rk = static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(k);
            const std::size_t pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][static_cast<std::size_t>(rk)];
                d = a[s2][0] * ndu[static_cast<std::size_t>(rk)][pk];
            }
            const std::size_t j1 = (rk >= -1) ? 1 : static_cast<std::size_t>(-rk);
            const std::size_t j2 = (r <= pk + 1) ? k - 1 : p - r;
            for (std::size_t j = j1; j <= j2; ++j) {
                const std::size_t rkj = static_cast<std::size_t>(rk + static_cast<std::ptrdiff_t>(j));
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rkj];
                d += a[s2][j] * ndu[rkj][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }

    double factor = static_cast<double>(p);
    for (std::size_t k = 1; k <= nders; ++k) {
        for (std::size_t j = 0; j <= p; ++j) ders[k][j] *= factor;
        factor *= static_cast<double>(p - k);
    }
}

// Halton sequence point (1-based index) in (0,1)^dim.
void halton_point(std::size_t index, std::size_t dim, std::span<double> out) {
    static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                          31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    for (std::size_t k = 0; k < dim; ++k) {
        const unsigned base = primes[k % (sizeof(primes) / sizeof(primes[0]))];
        double f = 1.0, value = 0.0;
        std::size_t i = index;
        while (i > 0) {
            f /= base;
            value += f * static_cast<double>(i % base);
            i /= base;
        }
        out[k] = value;
    }
}

}  // namespace

std::size_t BasisSpec::size() const {
    if (family == BasisFamily::power) return binomial(dimension + degree, dimension);
    std::size_t per_axis = knots + degree - 1;
    std::size_t k = 1;
    for (std::size_t i = 0; i < dimension; ++i) k *= per_axis;
    return k;
}

void BasisSpec::validate() const {
    if (dimension < 1) throw ConfigError("BasisSpec: dimension must be >= 1");
    if (family == BasisFamily::piecewise_poly) {
        if (knots < 2) throw ConfigError("BasisSpec: piecewise polynomials need >= 2 knots");
        if (orthonormal) throw ConfigError("BasisSpec: orthonormal applies to the power family only");
    }
    if (size() < 1 || size() > kMaxBasisSize)
        throw ConfigError("BasisSpec: basis size out of range");
}

std::string BasisSpec::to_string() const {
    if (family == BasisFamily::power)
        return (orthonormal ? "legendre:" : "power:") + std::to_string(degree);
    return "pp:" + std::to_string(degree) + "," + std::to_string(knots);
}

BasisSpec BasisSpec::parse(const std::string& text, std::size_t dimension) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    auto parse_uint = [&](const std::string& s) -> std::size_t {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(s, &pos);
            if (pos != s.size() || v < 0) throw std::invalid_argument(s);
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("basis: cannot parse parameter '" + s + "' in '" + text + "'");
        }
    };

    BasisSpec spec;
    spec.dimension = dimension;
    if (head == "power" || head == "legendre") {
        spec.family = BasisFamily::power;
        spec.orthonormal = (head == "legendre");
        if (args.empty()) throw ConfigError("basis: '" + text + "' needs a degree, e.g. power:2");
        spec.degree = parse_uint(args);
    } else if (head == "pp") {
        spec.family = BasisFamily::piecewise_poly;
        const auto comma = args.find(',');
        if (comma == std::string::npos)
            throw ConfigError("basis: 'pp' needs degree,knots, e.g. pp:1,3");
        spec.degree = parse_uint(args.substr(0, comma));
        spec.knots = parse_uint(args.substr(comma + 1));
    } else {
        throw ConfigError("basis: unknown family '" + text + "'");
    }
    spec.validate();
    return spec;
}

Basis::Basis(BasisSpec spec) : spec_(spec) {}

std::shared_ptr<const Basis> Basis::build(const BasisSpec& spec) {
    spec.validate();
    auto basis = std::shared_ptr<Basis>(new Basis(spec));
    basis->size_ = spec.size();

    if (spec.family == BasisFamily::power) {
        basis->indices_ = multi_indices_up_to(spec.dimension, static_cast<unsigned>(spec.degree));
        auto base = spec.orthonormal ? legendre_coefs(spec.degree) : monomial_coefs(spec.degree);
        basis->coefs_.resize(spec.degree + 1);
        basis->coefs_[0] = base;
        for (std::size_t q = 1; q <= spec.degree; ++q) {
            basis->coefs_[q].resize(base.size());
            for (std::size_t j = 0; j < base.size(); ++j)
                basis->coefs_[q][j] = differentiate(basis->coefs_[q - 1][j]);
        }
    } else {
        basis->per_axis_ = spec.knots + spec.degree - 1;
        // Clamped knot vector: degree+1 copies of each endpoint, interior
        // knots uniform.
        auto& kv = basis->knot_vector_;
        kv.assign(spec.degree + 1, 0.0);
        const std::size_t segments = spec.knots - 1;
        for (std::size_t i = 1; i < segments; ++i)
            kv.push_back(static_cast<double>(i) / static_cast<double>(segments));
        kv.insert(kv.end(), spec.degree + 1, 1.0);

        // Per-axis index tuples, row-major over axes.
        std::vector<unsigned> tuple(spec.dimension, 0);
        basis->indices_.reserve(basis->size_);
        for (;;) {
            basis->indices_.push_back(tuple);
            std::size_t axis = spec.dimension;
            while (axis > 0) {
                --axis;
                if (++tuple[axis] < basis->per_axis_) break;
                tuple[axis] = 0;
                if (axis == 0) return basis;
            }
        }
    }
    return basis;
}

std::size_t Basis::max_derivative_order() const {
    return spec_.family == BasisFamily::power ? static_cast<std::size_t>(-1) : spec_.degree;
}

// Values (or order-th derivatives) of all per-axis 1-D members at w.
void Basis::axis_values(double w, unsigned order, std::vector<double>& out) const {
    if (spec_.family == BasisFamily::power) {
        out.assign(spec_.degree + 1, 0.0);
        if (order <= spec_.degree)
            for (std::size_t j = 0; j <= spec_.degree; ++j)
                out[j] = horner(coefs_[order][j], w);
        return;
    }
    out.assign(per_axis_, 0.0);
    if (order > spec_.degree) return;  // zero a.e.
    const std::size_t span = find_span(w, spec_.degree, per_axis_, knot_vector_);
    std::vector<std::vector<double>> ders;
    ders_basis_funs(span, w, spec_.degree, order, knot_vector_, ders);
    for (std::size_t r = 0; r <= spec_.degree; ++r)
        out[span - spec_.degree + r] = ders[order][r];
}

void Basis::eval_impl(std::span<const double> w, std::span<const unsigned> orders,
                      std::span<double> out) const {
    const std::size_t d = spec_.dimension;
    if (w.size() != d) throw DomainError("Basis: point dimension mismatch");
    if (out.size() != size_) throw DomainError("Basis: output size mismatch");

    std::vector<double> clamped(d);
    for (std::size_t k = 0; k < d; ++k) {
        double v = w[k];
        if (v < -kBoundarySlack || v > 1.0 + kBoundarySlack)
            throw DomainError("Basis: coordinate " + std::to_string(k) + " = " +
                              std::to_string(v) + " outside [0,1]");
        clamped[k] = std::min(1.0, std::max(0.0, v));
    }

    // vals[k] holds the per-axis member values at clamped[k].
    std::vector<std::vector<double>> vals(d);
    for (std::size_t k = 0; k < d; ++k) axis_values(clamped[k], orders[k], vals[k]);

    for (std::size_t i = 0; i < size_; ++i) {
        double prod = 1.0;
        const auto& t = indices_[i];
        for (std::size_t k = 0; k < d; ++k) prod *= vals[k][t[k]];
        out[i] = prod;
    }
}

void Basis::eval(std::span<const double> w, std::span<double> out) const {
    static thread_local std::vector<unsigned> zeros;
    zeros.assign(spec_.dimension, 0u);
    eval_impl(w, zeros, out);
}

std::vector<double> Basis::eval(std::span<const double> w) const {
    std::vector<double> out(size_);
    eval(w, out);
    return out;
}

void Basis::eval_deriv(std::span<const double> w, std::span<const unsigned> multi_index,
                       std::span<double> out) const {
    if (multi_index.size() != spec_.dimension)
        throw ConfigError("Basis::eval_deriv: multi-index dimension mismatch");
    std::size_t total = 0;
    for (unsigned t : multi_index) total += t;
    if (total > max_derivative_order())
        throw ConfigError("Basis::eval_deriv: derivative order " + std::to_string(total) +
                          " exceeds basis smoothness " + std::to_string(max_derivative_order()));
    eval_impl(w, multi_index, out);
}

std::vector<double> Basis::eval_deriv(std::span<const double> w,
                                      std::span<const unsigned> multi_index) const {
    std::vector<double> out(size_);
    eval_deriv(w, multi_index, out);
    return out;
}

double Basis::sup_norm_estimate(unsigned q) const {
    if (q > max_derivative_order())
        throw ConfigError("Basis::sup_norm_estimate: order exceeds basis smoothness");
    const std::size_t d = spec_.dimension;
    const auto lambda_q = multi_indices_exact(d, q);

    std::vector<std::vector<double>> grid;
    if (d == 1) {
        const std::size_t steps = 10000;
        grid.reserve(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i)
            grid.push_back({static_cast<double>(i) / static_cast<double>(steps)});
    } else if (d == 2) {
        const std::size_t steps = 100;
        grid.reserve((steps + 1) * (steps + 1));
        for (std::size_t i = 0; i <= steps; ++i)
            for (std::size_t j = 0; j <= steps; ++j)
                grid.push_back({static_cast<double>(i) / steps, static_cast<double>(j) / steps});
    } else {
        const std::size_t count = 100000;
        grid.reserve(count + (d <= 12 ? (std::size_t{1} << d) : 0));
        std::vector<double> pt(d);
        for (std::size_t i = 1; i <= count; ++i) {
            halton_point(i, d, pt);
            grid.push_back(pt);
        }
        if (d <= 12) {  // corners catch boundary-attained maxima
            for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
                for (std::size_t k = 0; k < d; ++k) pt[k] = (mask >> k) & 1 ? 1.0 : 0.0;
                grid.push_back(pt);
            }
        }
    }

    double best = 0.0;
    std::vector<double> values(size_);
    for (const auto& t : lambda_q) {
        for (const auto& point : grid) {
            eval_deriv(point, t, values);
            double s = 0.0;
            for (double v : values) s += v * v;
            best = std::max(best, s);
        }
    }
    return std::sqrt(best);
}

}  // namespace rankmatch
