#include "rankmatch/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankmatch/errors.hpp"

namespace rankmatch {

RankMap RankMap::fit(const Matrix& data) {
    if (data.rows() < 1 || data.cols() < 1)
        throw InputError("RankMap::fit: need at least one row and one column");

    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t k = 0; k < data.cols(); ++k)
            if (!std::isfinite(data(i, k)))
                throw InputError("RankMap::fit: non-finite entry at row " + std::to_string(i) +
                                 ", column " + std::to_string(k));

    RankMap map;
    map.n_ = data.rows();
    map.sorted_.resize(data.cols());
    for (std::size_t k = 0; k < data.cols(); ++k) {
        auto& col = map.sorted_[k];
        col.resize(data.rows());
        for (std::size_t i = 0; i < data.rows(); ++i) col[i] = data(i, k);
        std::sort(col.begin(), col.end());
    }
    return map;
}

void RankMap::apply(std::span<const double> point, std::span<double> out) const {
    if (point.size() != sorted_.size() || out.size() != sorted_.size())
        throw InputError("RankMap::apply: point dimension " + std::to_string(point.size()) +
                         " does not match fitted dimension " + std::to_string(sorted_.size()));
    const double n = static_cast<double>(n_);
    for (std::size_t k = 0; k < sorted_.size(); ++k) {
        const auto& col = sorted_[k];
        const auto count = std::upper_bound(col.begin(), col.end(), point[k]) - col.begin();
        out[k] = static_cast<double>(count) / n;
    }
}

std::vector<double> RankMap::apply(std::span<const double> point) const {
    std::vector<double> out(sorted_.size());
    apply(point, out);
    return out;
}

Matrix RankMap::apply_batch(const Matrix& data) const {
    if (data.rows() > 0 && data.cols() != sorted_.size())
        throw InputError("RankMap::apply_batch: column count " + std::to_string(data.cols()) +
                         " does not match fitted dimension " + std::to_string(sorted_.size()));
    Matrix out(data.rows(), sorted_.size());
    for (std::size_t i = 0; i < data.rows(); ++i) apply(data.row(i), out.row(i));
    return out;
}

Matrix Transformation::apply_batch(const Matrix& data) const {
    if (data.rows() > 0 && data.cols() != input_dim())
        throw InputError("Transformation::apply_batch: column count mismatch");
    Matrix out(data.rows(), output_dim());
    for (std::size_t i = 0; i < data.rows(); ++i) apply(data.row(i), out.row(i));
    return out;
}

void IdentityTransformation::apply(std::span<const double> in, std::span<double> out) const {
    std::copy(in.begin(), in.end(), out.begin());
}

AffineTransformation::AffineTransformation(std::vector<double> scale, std::vector<double> shift)
    : scale_(std::move(scale)), shift_(std::move(shift)) {
    if (scale_.size() != shift_.size())
        throw ConfigError("AffineTransformation: scale and shift sizes differ");
}

void AffineTransformation::apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t k = 0; k < scale_.size(); ++k) out[k] = scale_[k] * in[k] + shift_[k];
}

}  // namespace rankmatch
