#ifndef TENSORDEC_JENNRICH_HPP
#define TENSORDEC_JENNRICH_HPP

/**
 * @file jennrich.hpp
 * Simultaneous diagonalization of two random slice combinations.
 *
 * For T = sum_i u_i (x) v_i (x) w_i with U, V of full column rank, the
 * matrices M_a = T(.,.,a) = U D_a V^T and M_b = U D_b V^T give
 *   M_a M_b^+          = U (D_a D_b^-1) U^+
 *   (M_a^+ M_b)^T      = V (D_b D_a^-1) V^+
 * so the u's and v's are eigenvectors whose eigenvalues are reciprocal,
 * which is how the two sets are paired. The third factor then solves a
 * linear least squares problem.
 */

#include "tensordec/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tensordec {

struct JennrichConfig {
    /// Target rank; nullopt estimates it from the eigenvalues of M_a M_b^+.
    std::optional<std::size_t> rank;
    /// Relative tolerance on |lambda_u * lambda_v - 1| for a pair to be accepted.
    double eig_pair_tol = 1e-2;
    std::uint64_t seed = 0;
    /// Minimum eigenvalue separation (and magnitude) accepted before redrawing a, b.
    double min_sep = 1e-9;
    int max_retries = 5;

    void validate() const;
};

struct RecoveryReport {
    /// permutation[i] is the truth term matched to found term i (empty without truth).
    std::vector<std::size_t> permutation;
    std::vector<double> term_errors;
    double max_error = 0.0;
    double truth_norm = 0.0;  ///< ||synthesize(truth)||_F, 0 without truth

    double eigenvalue_separation = 0.0;  ///< min pairwise gap of the used eigenvalues
    double eigenvalue_magnitude = 0.0;   ///< min magnitude of the used eigenvalues
    double max_imaginary = 0.0;          ///< largest imaginary residual of a kept eigenvector
    double max_pairing_defect = 0.0;     ///< max |lambda_u lambda_v - 1| over accepted pairs
    std::vector<double> condition_numbers;  ///< of the recovered factor matrices
    int attempts = 0;

    /// Per-term residual of splitting grouped factors back into modes (overcomplete only).
    std::vector<double> unflatten_residuals;
    std::vector<bool> suspect_terms;
};

struct JennrichResult {
    CpDecomposition decomposition;
    RecoveryReport report;
};

JennrichResult jennrich_decompose(const DenseTensor& t, const JennrichConfig& cfg);

struct SeparationDiagnostic {
    double min_ratio_gap = 0.0;        ///< min_{i!=j} |r_i - r_j|
    double min_ratio_magnitude = 0.0;  ///< min_i |r_i|
    bool degenerate_denominator = false;  ///< some <w_i, b> was numerically zero
};

/// Ratios r_i = <w_i,a>/<w_i,b> of a factor matrix W under two draws.
SeparationDiagnostic separation_diagnostic(const FactorMatrix& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Assignment of rows to columns of a square cost matrix that first minimizes
/// the largest chosen cost and then the total cost. result[i] is the column of row i.
std::vector<std::size_t> bottleneck_assignment(const Eigen::MatrixXd& cost);

/// Matches found terms to true terms by whole rank-one term Frobenius error.
RecoveryReport match_terms(const CpDecomposition& found, const CpDecomposition& truth);

/// Appends truth-matching fields to an existing algorithm report.
void attach_truth(RecoveryReport& report, const CpDecomposition& found, const CpDecomposition& truth);

/// Matches columns by Euclidean distance (for parameter vectors such as means).
struct ColumnMatch {
    std::vector<std::size_t> permutation;  ///< truth column for estimated column i
    std::vector<double> errors;
    double max_error = 0.0;
};
ColumnMatch match_columns(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

}  // namespace tensordec

#endif  // TENSORDEC_JENNRICH_HPP
