#ifndef TENSORDEC_TENSOR_HPP
#define TENSORDEC_TENSOR_HPP

/**
 * @file tensor.hpp
 * Dense tensors, CP decompositions and the multilinear primitives the
 * decomposition algorithms are built from.
 *
 * Layout convention: entries are stored row-major (the last index runs
 * fastest), and fusing a group of modes into one index is lexicographic in
 * the order the group lists them. Both the outer product and the Khatri-Rao
 * product follow the same convention, so flattening a synthesized
 * decomposition and synthesizing the Khatri-Rao-grouped decomposition agree
 * entry for entry.
 */

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace tensordec {

using Shape = std::vector<std::size_t>;

/// n x k matrix whose columns are one mode's factors (column-major by factor index).
using FactorMatrix = Eigen::MatrixXd;

class DenseTensor {
public:
    /// Zero tensor of the given shape.
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> data);

    std::size_t order() const noexcept { return shape_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t mode) const;
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const double> data() const noexcept { return data_; }

    /// Row-major linear offset of a multi-index; throws std::out_of_range.
    std::size_t offset(std::span<const std::size_t> index) const;
    double at(std::span<const std::size_t> index) const { return data_[offset(index)]; }
    double operator()(std::initializer_list<std::size_t> index) const {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }

    Eigen::Map<const Eigen::VectorXd> vector() const {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }

    bool same_shape(const DenseTensor& other) const noexcept { return shape_ == other.shape_; }

    DenseTensor operator+(const DenseTensor& rhs) const;
    DenseTensor operator-(const DenseTensor& rhs) const;
    DenseTensor operator*(double s) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

inline DenseTensor operator*(double s, const DenseTensor& t) { return t * s; }

/**
 * Sum of k weighted rank-one terms, one factor matrix per mode.
 *
 * Construction checks that every factor has the same number of columns as
 * there are weights and that all entries are finite. canonical() gives the
 * representative used for comparisons: unit columns, magnitudes in the
 * weights, and the first significant entry of every column positive.
 */
class CpDecomposition {
public:
    CpDecomposition(std::vector<FactorMatrix> factors, Eigen::VectorXd weights);
    /// Weights all equal to one.
    explicit CpDecomposition(std::vector<FactorMatrix> factors);

    std::size_t order() const noexcept { return factors_.size(); }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    Shape shape() const;

    const std::vector<FactorMatrix>& factors() const noexcept { return factors_; }
    const FactorMatrix& factor(std::size_t mode) const { return factors_.at(mode); }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    CpDecomposition canonical() const;

    /// The i-th weighted rank-one term as a dense tensor.
    DenseTensor term(std::size_t i) const;

private:
    std::vector<FactorMatrix> factors_;
    Eigen::VectorXd weights_;
};

DenseTensor outer_product(std::span<const Eigen::VectorXd> vectors);
DenseTensor outer_product(std::initializer_list<Eigen::VectorXd> vectors);

/// Flattened v1 (x) v2 (x) ... with v1 varying slowest.
Eigen::VectorXd kronecker(std::span<const Eigen::VectorXd> vectors);

DenseTensor synthesize(const CpDecomposition& d);

/// M(i1,i2) = sum_i3 T(i1,i2,i3) a(i3).
Eigen::MatrixXd slice_combination(const DenseTensor& t, const Eigen::VectorXd& a);

/// u(i) = sum_{i2,i3} T(i,i2,i3) z(i2) z(i3).
Eigen::VectorXd contract_two(const DenseTensor& t, const Eigen::VectorXd& z);

/// Mode-n product T x_mode A where A is r x n_mode; the result has r in that mode.
DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Eigen::MatrixXd& a);

/// Mode groups are zero-based; together they must partition {0,...,order-1}.
using ModeGroups = std::array<std::vector<std::size_t>, 3>;

DenseTensor flatten_to_order3(const DenseTensor& t, const ModeGroups& groups);

/// Throws ShapeError unless the groups are nonempty and partition the modes.
void check_partition(const ModeGroups& groups, std::size_t order);

/// Column i is A_i (x) B_i.
FactorMatrix khatri_rao(const FactorMatrix& a, const FactorMatrix& b);
FactorMatrix khatri_rao(std::span<const FactorMatrix> mats);

/// Rewrites a decomposition of an order-l tensor as the order-3 decomposition
/// of its flattening: factor g is the Khatri-Rao product of the grouped factors.
CpDecomposition group_factors(const CpDecomposition& d, const ModeGroups& groups);

double frobenius_norm(const DenseTensor& t);
double max_abs(const DenseTensor& t);

/// Matricization with rows indexed by the first `row_modes` modes (fused) and
/// columns by the rest. A zero-copy view in row-major order.
Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
leading_unfolding(const DenseTensor& t, std::size_t row_modes);

/// A = u(x)u(x)v + v(x)u(x)u + u(x)v(x)u together with the rank-2 decomposition
/// m (u + v/m)^{(x)3} - m u^{(x)3}, whose synthesis is within sqrt(3/m^2 + 1/m^4) of A.
struct BorderRankFixture {
    DenseTensor tensor;
    CpDecomposition approximation;
};

BorderRankFixture border_rank_fixture(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double m);

}  // namespace tensordec

#endif  // TENSORDEC_TENSOR_HPP
