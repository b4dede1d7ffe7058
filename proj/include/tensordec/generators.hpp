#ifndef TENSORDEC_GENERATORS_HPP
#define TENSORDEC_GENERATORS_HPP

// Seeded random instances: factor matrices with conditioning and separation
// controls, orthogonally decomposable symmetric tensors, and bounded noise.

#include "tensordec/random.hpp"
#include "tensordec/tensor.hpp"

#include <cstdint>

namespace tensordec {

/// Gaussian n x k matrix with N(0, 1/n) entries.
FactorMatrix random_factor_matrix(Rng& rng, Eigen::Index n, Eigen::Index k);

/// Gaussian factors N(0, 1/n_j) for every mode, unit weights.
CpDecomposition random_decomposition(Rng& rng, const Shape& shape, std::size_t k);

struct InstanceConstraints {
    double max_condition = 10.0;     ///< cap on kappa of every factor matrix (k <= n modes)
    double min_separation = 0.1;     ///< min distance between normalized last-mode columns, up to sign
    int max_draws = 10000;           ///< per factor matrix
};

/// Rejection-samples each factor matrix until it meets the constraints.
/// Throws PreconditionError if some mode cannot be satisfied within max_draws.
CpDecomposition constrained_decomposition(Rng& rng, const Shape& shape, std::size_t k,
                                          const InstanceConstraints& constraints);

/// min_{i<j} min(||a_i - a_j||, ||a_i + a_j||) over normalized columns; +inf for k < 2.
double min_direction_separation(const FactorMatrix& m);

/// sum_i lambdas(i) v_i^{(x)3} with v_i the columns of a random orthonormal n x k matrix.
struct OrthogonalInstance {
    DenseTensor tensor;
    Eigen::VectorXd lambdas;
    Eigen::MatrixXd vectors;
};
OrthogonalInstance orthogonal_instance(Rng& rng, std::size_t n, const Eigen::VectorXd& lambdas);

/// Adds independent uniform [-magnitude, magnitude] noise to every entry.
DenseTensor add_uniform_noise(const DenseTensor& t, double magnitude, Rng& rng);

}  // namespace tensordec

#endif  // TENSORDEC_GENERATORS_HPP
