#ifndef TENSORDEC_POWER_METHOD_HPP
#define TENSORDEC_POWER_METHOD_HPP

/**
 * @file power_method.hpp
 * Tensor power iteration z <- T(., z, z) / ||T(., z, z)|| for symmetric
 * order-3 tensors, deflation, and whitening against a second-moment matrix.
 *
 * If T = sum_i w_i u_i^{(x)3} and M = sum_i w_i u_i u_i^T with independent u_i,
 * whitening with W = E Lambda^{-1/2} (top-k eigenpairs of M) gives an
 * orthogonally decomposable tensor sum_i lambda_i y_i^{(x)3} with
 * lambda_i = w_i^{-1/2}, and u_i = lambda_i * B y_i for B = E Lambda^{1/2}.
 */

#include "tensordec/tensor.hpp"

#include <cstdint>

namespace tensordec {

struct PowerConfig {
    double tol = 1e-12;
    int max_iters = 500;
    int restarts = 10;  ///< random starts per deflation round
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const;
};

struct PowerIterate {
    Eigen::VectorXd vector;
    double lambda = 0.0;  ///< <T, z^{(x)3}>
    int iterations = 0;
    bool converged = false;
};

/// Throws ShapeError unless t is order 3 with equal modes, and PreconditionError
/// unless every permutation of indices agrees within rel_tol * max|T|.
void check_symmetric(const DenseTensor& t, double rel_tol = 1e-8);

/// One run from a random unit start. A vanishing iterate triggers a fresh start
/// (up to 10); DegeneracyError when every start vanishes.
PowerIterate power_iterate(const DenseTensor& t, std::uint64_t seed, int max_iters = 500, double tol = 1e-12);

struct OrthogonalDecomposition {
    Eigen::VectorXd lambdas;  ///< nonnegative, sorted by magnitude, descending
    Eigen::MatrixXd vectors;  ///< n x k
    double residual = 0.0;    ///< ||T - sum lambda_i v_i^{(x)3}||_F
};

OrthogonalDecomposition deflate_decompose(const DenseTensor& t, std::size_t k, const PowerConfig& cfg);

struct Whitening {
    DenseTensor tensor;        ///< k x k x k
    Eigen::MatrixXd transform;  ///< W, n x k; the whitened tensor is T(W, W, W)
    Eigen::MatrixXd back_map;   ///< B, n x k
};

/// Number of eigenvalues of m above 1e-8 times the largest.
std::size_t estimate_whitening_rank(const Eigen::MatrixXd& m);

Whitening whiten(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t k);

/// Columns lambda_i * B y_i: the original-space vectors when t and m share weights.
Eigen::MatrixXd unwhiten(const Whitening& w, const OrthogonalDecomposition& d);

}  // namespace tensordec

#endif  // TENSORDEC_POWER_METHOD_HPP
