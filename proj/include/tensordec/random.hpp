#ifndef TENSORDEC_RANDOM_HPP
#define TENSORDEC_RANDOM_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace tensordec {

using Rng = std::mt19937_64;

/// Counter-based seed derivation (splitmix64 finalizer). Parallel loops give
/// item i the stream derive_seed(seed, i), so results never depend on the
/// number of worker threads.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(derive_seed(seed, stream)); }

Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n, double stddev = 1.0);
Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);
Eigen::VectorXd random_unit_vector(Rng& rng, Eigen::Index n);

/// Orthonormal basis of a uniformly random dim-dimensional subspace of R^n.
Eigen::MatrixXd random_orthonormal(Rng& rng, Eigen::Index n, Eigen::Index dim);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Items are
/// independent; callers write into pre-sized outputs indexed by i.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace tensordec

#endif  // TENSORDEC_RANDOM_HPP
