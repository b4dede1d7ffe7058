#include "tensordec/tensor.hpp"

#include "tensordec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tensordec {

namespace {

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor order must be at least 1");
    for (std::size_t n : shape)
        if (n == 0) throw ShapeError("tensor mode sizes must be positive");
}

std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

// Columns are compared against this after normalization when picking the sign.
constexpr double kSignificant = 1e-10;

}  // namespace

// ---------------------------------------------------------------- DenseTensor

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(product(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != product(shape_))
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
    for (double x : data_)
        if (!std::isfinite(x)) throw std::invalid_argument("tensor entries must be finite");
}

std::size_t DenseTensor::dim(std::size_t mode) const {
    if (mode >= shape_.size()) throw std::out_of_range("mode index out of range");
    return shape_[mode];
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size())
        throw std::out_of_range("index has " + std::to_string(index.size()) + " entries, tensor order is " +
                                std::to_string(shape_.size()));
    std::size_t off = 0;
    for (std::size_t j = 0; j < shape_.size(); ++j) {
        if (index[j] >= shape_[j])
            throw std::out_of_range("index " + std::to_string(index[j]) + " out of range for mode " +
                                    std::to_string(j) + " of size " + std::to_string(shape_[j]));
        off = off * shape_[j] + index[j];
    }
    return off;
}

DenseTensor DenseTensor::operator+(const DenseTensor& rhs) const {
    if (!same_shape(rhs)) throw ShapeError("shape mismatch in tensor addition");
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i] + rhs.data_[i];
    return DenseTensor(shape_, std::move(out));
}

DenseTensor DenseTensor::operator-(const DenseTensor& rhs) const {
    if (!same_shape(rhs)) throw ShapeError("shape mismatch in tensor subtraction");
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i] - rhs.data_[i];
    return DenseTensor(shape_, std::move(out));
}

DenseTensor DenseTensor::operator*(double s) const {
    std::vector<double> out(data_);
    for (double& x : out) x *= s;
    return DenseTensor(shape_, std::move(out));
}

// ------------------------------------------------------------ CpDecomposition

CpDecomposition::CpDecomposition(std::vector<FactorMatrix> factors, Eigen::VectorXd weights)
    : factors_(std::move(factors)), weights_(std::move(weights)) {
    if (factors_.empty()) throw ShapeError("a decomposition needs at least one mode");
    for (std::size_t j = 0; j < factors_.size(); ++j) {
        const auto& f = factors_[j];
        if (f.cols() != weights_.size())
            throw ShapeError("factor matrix " + std::to_string(j) + " has " + std::to_string(f.cols()) +
                             " columns but there are " + std::to_string(weights_.size()) + " weights");
        if (f.rows() == 0) throw ShapeError("factor matrices need at least one row");
        if (!f.allFinite()) throw std::invalid_argument("factor entries must be finite");
    }
    if (!weights_.allFinite()) throw std::invalid_argument("weights must be finite");
}

CpDecomposition::CpDecomposition(std::vector<FactorMatrix> factors)
    : CpDecomposition(factors, Eigen::VectorXd::Ones(factors.empty() ? 0 : factors.front().cols())) {}

Shape CpDecomposition::shape() const {
    Shape s;
    s.reserve(factors_.size());
    for (const auto& f : factors_) s.push_back(static_cast<std::size_t>(f.rows()));
    return s;
}

CpDecomposition CpDecomposition::canonical() const {
    std::vector<FactorMatrix> factors = factors_;
    Eigen::VectorXd weights = weights_;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        bool zero_term = weights(i) == 0.0;
        for (auto& f : factors) {
            const double norm = f.col(i).norm();
            if (norm == 0.0) {
                zero_term = true;
                continue;
            }
            f.col(i) /= norm;
            weights(i) *= norm;
            for (Eigen::Index r = 0; r < f.rows(); ++r) {
                if (std::abs(f(r, i)) > kSignificant) {
                    if (f(r, i) < 0) {
                        f.col(i) = -f.col(i);
                        weights(i) = -weights(i);
                    }
                    break;
                }
            }
        }
        if (zero_term) {
            weights(i) = 0.0;
            for (auto& f : factors) {
                f.col(i).setZero();
                f(0, i) = 1.0;
            }
        }
    }
    return CpDecomposition(std::move(factors), std::move(weights));
}

DenseTensor CpDecomposition::term(std::size_t i) const {
    if (i >= rank()) throw std::out_of_range("term index out of range");
    std::vector<Eigen::VectorXd> cols;
    cols.reserve(factors_.size());
    for (const auto& f : factors_) cols.emplace_back(f.col(static_cast<Eigen::Index>(i)));
    Eigen::VectorXd v = kronecker(cols) * weights_(static_cast<Eigen::Index>(i));
    return DenseTensor(shape(), std::vector<double>(v.data(), v.data() + v.size()));
}

// ----------------------------------------------------------------- operations

Eigen::VectorXd kronecker(std::span<const Eigen::VectorXd> vectors) {
    if (vectors.empty()) throw ShapeError("kronecker product of an empty list");
    Eigen::VectorXd acc = vectors.front();
    for (std::size_t j = 1; j < vectors.size(); ++j) {
        const auto& v = vectors[j];
        Eigen::VectorXd next(acc.size() * v.size());
        for (Eigen::Index a = 0; a < acc.size(); ++a) next.segment(a * v.size(), v.size()) = acc(a) * v;
        acc = std::move(next);
    }
    return acc;
}

DenseTensor outer_product(std::span<const Eigen::VectorXd> vectors) {
    if (vectors.empty()) throw ShapeError("outer product of an empty vector list");
    Shape shape;
    for (const auto& v : vectors) {
        if (v.size() == 0) throw ShapeError("outer product factors must be nonempty");
        shape.push_back(static_cast<std::size_t>(v.size()));
    }
    Eigen::VectorXd flat = kronecker(vectors);
    return DenseTensor(std::move(shape), std::vector<double>(flat.data(), flat.data() + flat.size()));
}

DenseTensor outer_product(std::initializer_list<Eigen::VectorXd> vectors) {
    return outer_product(std::span<const Eigen::VectorXd>(vectors.begin(), vectors.size()));
}

DenseTensor synthesize(const CpDecomposition& d) {
    const Shape shape = d.shape();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(product(shape)));
    std::vector<Eigen::VectorXd> cols(d.order());
    for (std::size_t i = 0; i < d.rank(); ++i) {
        for (std::size_t j = 0; j < d.order(); ++j) cols[j] = d.factor(j).col(static_cast<Eigen::Index>(i));
        acc += d.weights()(static_cast<Eigen::Index>(i)) * kronecker(cols);
    }
    return DenseTensor(shape, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
leading_unfolding(const DenseTensor& t, std::size_t row_modes) {
    if (row_modes > t.order()) throw ShapeError("unfolding uses more modes than the tensor has");
    std::size_t rows = 1;
    for (std::size_t j = 0; j < row_modes; ++j) rows *= t.dim(j);
    const std::size_t cols = t.size() / rows;
    return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::MatrixXd slice_combination(const DenseTensor& t, const Eigen::VectorXd& a) {
    if (t.order() != 3) throw ShapeError("slice_combination needs an order-3 tensor");
    if (static_cast<std::size_t>(a.size()) != t.dim(2))
        throw ShapeError("combination vector length does not match mode 3");
    const Eigen::VectorXd flat = leading_unfolding(t, 2) * a;
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(flat.data(), static_cast<Eigen::Index>(t.dim(0)),
                                      static_cast<Eigen::Index>(t.dim(1)));
}

Eigen::VectorXd contract_two(const DenseTensor& t, const Eigen::VectorXd& z) {
    if (t.order() != 3) throw ShapeError("contract_two needs an order-3 tensor");
    if (t.dim(1) != t.dim(2) || static_cast<std::size_t>(z.size()) != t.dim(1))
        throw ShapeError("contract_two: modes 2 and 3 must both match the vector length");
    const std::array<Eigen::VectorXd, 2> zz{z, z};
    return leading_unfolding(t, 1) * kronecker(zz);
}

DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Eigen::MatrixXd& a) {
    if (mode >= t.order()) throw ShapeError("mode_product: mode out of range");
    const std::size_t n = t.dim(mode);
    if (static_cast<std::size_t>(a.cols()) != n) throw ShapeError("mode_product: matrix columns must match the mode");
    std::size_t prefix = 1, suffix = 1;
    for (std::size_t j = 0; j < mode; ++j) prefix *= t.dim(j);
    for (std::size_t j = mode + 1; j < t.order(); ++j) suffix *= t.dim(j);
    const std::size_t r = static_cast<std::size_t>(a.rows());
    Shape shape = t.shape();
    shape[mode] = r;
    if (r == 0) throw ShapeError("mode_product: result would have an empty mode");
    std::vector<double> out(prefix * r * suffix, 0.0);
    const auto in = t.data();
    for (std::size_t p = 0; p < prefix; ++p)
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = in.data() + (p * n + i) * suffix;
            for (std::size_t q = 0; q < r; ++q) {
                const double c = a(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i));
                if (c == 0.0) continue;
                double* dst = out.data() + (p * r + q) * suffix;
                for (std::size_t s = 0; s < suffix; ++s) dst[s] += c * src[s];
            }
        }
    return DenseTensor(std::move(shape), std::move(out));
}

void check_partition(const ModeGroups& groups, std::size_t order) {
    std::vector<int> seen(order, 0);
    for (const auto& g : groups) {
        if (g.empty()) throw ShapeError("mode groups must be nonempty");
        for (std::size_t m : g) {
            if (m >= order) throw ShapeError("mode group refers to mode " + std::to_string(m + 1) +
                                             " of an order-" + std::to_string(order) + " tensor");
            if (seen[m]++) throw ShapeError("mode " + std::to_string(m + 1) + " appears in more than one group");
        }
    }
    for (std::size_t m = 0; m < order; ++m)
        if (!seen[m]) throw ShapeError("mode " + std::to_string(m + 1) + " is not in any group");
}

DenseTensor flatten_to_order3(const DenseTensor& t, const ModeGroups& groups) {
    check_partition(groups, t.order());
    Shape out_shape(3, 1);
    // stride of every source mode inside its fused output index
    std::vector<std::size_t> target(t.order()), stride(t.order());
    for (std::size_t g = 0; g < 3; ++g) {
        std::size_t s = 1;
        for (auto it = groups[g].rbegin(); it != groups[g].rend(); ++it) {
            target[*it] = g;
            stride[*it] = s;
            s *= t.dim(*it);
        }
        out_shape[g] = s;
    }
    std::vector<double> out(t.size());
    std::vector<std::size_t> idx(t.order(), 0);
    const auto in = t.data();
    for (std::size_t lin = 0; lin < t.size(); ++lin) {
        std::array<std::size_t, 3> fused{0, 0, 0};
        for (std::size_t j = 0; j < t.order(); ++j) fused[target[j]] += idx[j] * stride[j];
        out[(fused[0] * out_shape[1] + fused[1]) * out_shape[2] + fused[2]] = in[lin];
        for (std::size_t j = t.order(); j-- > 0;) {
            if (++idx[j] < t.dim(j)) break;
            idx[j] = 0;
        }
    }
    return DenseTensor(std::move(out_shape), std::move(out));
}

FactorMatrix khatri_rao(const FactorMatrix& a, const FactorMatrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
    FactorMatrix out(a.rows() * b.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i)
        for (Eigen::Index r = 0; r < a.rows(); ++r) out.col(i).segment(r * b.rows(), b.rows()) = a(r, i) * b.col(i);
    return out;
}

FactorMatrix khatri_rao(std::span<const FactorMatrix> mats) {
    if (mats.empty()) throw ShapeError("khatri_rao of an empty list");
    FactorMatrix acc = mats.front();
    for (std::size_t j = 1; j < mats.size(); ++j) acc = khatri_rao(acc, mats[j]);
    return acc;
}

CpDecomposition group_factors(const CpDecomposition& d, const ModeGroups& groups) {
    check_partition(groups, d.order());
    std::vector<FactorMatrix> out;
    for (const auto& g : groups) {
        std::vector<FactorMatrix> members;
        for (std::size_t m : g) members.push_back(d.factor(m));
        out.push_back(khatri_rao(members));
    }
    return CpDecomposition(std::move(out), d.weights());
}

double frobenius_norm(const DenseTensor& t) { return t.vector().norm(); }

double max_abs(const DenseTensor& t) { return t.size() ? t.vector().cwiseAbs().maxCoeff() : 0.0; }

BorderRankFixture border_rank_fixture(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double m) {
    if (u.size() == 0 || u.size() != v.size()) throw ShapeError("border_rank_fixture: u and v must have equal length");
    if (std::abs(u.norm() - 1.0) > 1e-10 || std::abs(v.norm() - 1.0) > 1e-10 || std::abs(u.dot(v)) > 1e-10)
        throw PreconditionError("border_rank_fixture: u and v must be orthonormal");
    if (!(m > 0.0)) throw PreconditionError("border_rank_fixture: m must be positive");

    DenseTensor a = outer_product({u, u, v}) + outer_product({v, u, u}) + outer_product({u, v, u});

    const Eigen::VectorXd s = u + v / m;
    const Eigen::Index n = u.size();
    FactorMatrix f(n, 2);
    f.col(0) = s;
    f.col(1) = u;
    Eigen::VectorXd w(2);
    w << m, -m;
    CpDecomposition approx({f, f, f}, w);
    return {std::move(a), approx.canonical()};
}

}  // namespace tensordec
