#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rankmatch/matrix.hpp"

namespace rankmatch {

// Fitted marginal empirical CDFs. Stores the sorted sample values per
// coordinate; applying the map to a point returns, per coordinate, the
// fraction of stored values <= the query value. Immutable after fit,
// safe for concurrent apply calls.
class RankMap {
public:
    // Fits over the full pooled sample, one sorted column per coordinate.
    // Throws InputError on a non-finite entry (naming row and column).
    static RankMap fit(const Matrix& data);

    std::size_t dim() const { return sorted_.size(); }
    std::size_t sample_size() const { return n_; }
    std::span<const double> sorted_column(std::size_t k) const { return sorted_.at(k); }

    // Per coordinate k: count(stored <= point[k]) / n, by binary search.
    // Training points map into {1/n, ..., 1}; points below the sample
    // minimum map to 0.
    void apply(std::span<const double> point, std::span<double> out) const;
    std::vector<double> apply(std::span<const double> point) const;

    // Row-wise apply; an n'=0 input yields an empty matrix.
    Matrix apply_batch(const Matrix& data) const;

private:
    std::vector<std::vector<double>> sorted_;
    std::size_t n_ = 0;
};

// An evaluable map from raw covariate space to a transformed space,
// the pluggable standardization hook. Implementations must be total on
// their declared domain and deterministic.
class Transformation {
public:
    virtual ~Transformation() = default;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual void apply(std::span<const double> in, std::span<double> out) const = 0;

    // True when every output coordinate is guaranteed to lie in [0,1];
    // lets the regression stage skip min-max rescaling.
    virtual bool outputs_in_unit_cube() const { return false; }

    Matrix apply_batch(const Matrix& data) const;
};

// The componentwise empirical rank transform as a Transformation.
class EcdfTransformation final : public Transformation {
public:
    explicit EcdfTransformation(RankMap map) : map_(std::move(map)) {}
    static EcdfTransformation fit(const Matrix& data) { return EcdfTransformation(RankMap::fit(data)); }

    std::size_t input_dim() const override { return map_.dim(); }
    std::size_t output_dim() const override { return map_.dim(); }
    void apply(std::span<const double> in, std::span<double> out) const override { map_.apply(in, out); }
    bool outputs_in_unit_cube() const override { return true; }

    const RankMap& rank_map() const { return map_; }

private:
    RankMap map_;
};

class IdentityTransformation final : public Transformation {
public:
    explicit IdentityTransformation(std::size_t dim) : dim_(dim) {}
    std::size_t input_dim() const override { return dim_; }
    std::size_t output_dim() const override { return dim_; }
    void apply(std::span<const double> in, std::span<double> out) const override;

private:
    std::size_t dim_;
};

// x -> scale * x + shift, componentwise.
class AffineTransformation final : public Transformation {
public:
    AffineTransformation(std::vector<double> scale, std::vector<double> shift);
    std::size_t input_dim() const override { return scale_.size(); }
    std::size_t output_dim() const override { return scale_.size(); }
    void apply(std::span<const double> in, std::span<double> out) const override;

private:
    std::vector<double> scale_, shift_;
};

}  // namespace rankmatch
