#ifndef TENSORDEC_LINALG_HPP
#define TENSORDEC_LINALG_HPP

// Dense matrix kernels with the numerical contracts the decomposition
// algorithms rely on. Everything here is a pure function of its inputs.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

namespace tensordec {

struct SvdResult {
    Eigen::MatrixXd u;                ///< n x r, orthonormal columns
    Eigen::VectorXd singular_values;  ///< nonincreasing, r = min(n, m)
    Eigen::MatrixXd v;                ///< m x r, orthonormal columns
};

struct EigResult {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd eigenvectors;  ///< unit columns, aligned with eigenvalues
};

inline constexpr double kDefaultRankTol = 1e-10;

SvdResult svd(const Eigen::MatrixXd& m);
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

/// Moore-Penrose inverse keeping singular values above rank_tol * sigma_1.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& m, double rank_tol = kDefaultRankTol);

/// Pseudoinverse of the best rank-`rank` approximation (top singular values only).
/// Values at or below rank_tol * sigma_1 are still dropped.
Eigen::MatrixXd pseudoinverse_rank(const Eigen::MatrixXd& m, std::size_t rank, double rank_tol = kDefaultRankTol);

EigResult eig_nonsymmetric(const Eigen::MatrixXd& m);

/// sigma_1 / sigma_k for an n x k matrix; +inf when sigma_k is at roundoff level
/// (<= n * eps * sigma_1). Throws for k > n.
double condition_number(const Eigen::MatrixXd& m);

/// min_i || P_{-i}^perp M_i ||, the projection taken onto the orthogonal
/// complement of the span of the other columns.
double leave_one_out(const Eigen::MatrixXd& m);

/// Minimum-norm least squares solution via the truncated pseudoinverse.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                    double rank_tol = kDefaultRankTol);
/// Same for several right-hand sides (columns of b).
Eigen::MatrixXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    double rank_tol = kDefaultRankTol);

/// Largest singular value.
double operator_norm(const Eigen::MatrixXd& m);

/// Orthonormal basis of the column space (rank decided by rank_tol relative to sigma_1).
Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m, double rank_tol = kDefaultRankTol);

/// Orthonormal basis of the null space {x : m x = 0}.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& m, double rank_tol = kDefaultRankTol);

}  // namespace tensordec

#endif  // TENSORDEC_LINALG_HPP
