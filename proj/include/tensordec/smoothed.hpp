#ifndef TENSORDEC_SMOOTHED_HPP
#define TENSORDEC_SMOOTHED_HPP

/**
 * @file smoothed.hpp
 * Gaussian perturbation model and Monte Carlo experiments on least singular
 * values of Khatri-Rao products, projections of perturbed rank-one tensors
 * onto subspaces, and the pivot bases used to lower-bound those projections.
 *
 * Every experiment draws trial t from stream t of its seed, so the values
 * are identical for any thread count.
 */

#include "tensordec/random.hpp"
#include "tensordec/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tensordec {

struct PerturbationModel {
    double rho = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// m + G with G_ij ~ N(0, rho^2 / m.rows()).
Eigen::MatrixXd perturb_matrix(const Eigen::MatrixXd& m, double rho, Rng& rng);

/// Spreads |w_i|^{1/l} over the modes (sign into the first), perturbs every
/// factor coordinate with N(0, rho^2 / n_j) and returns the canonical form.
CpDecomposition perturb_factors(const CpDecomposition& d, const PerturbationModel& model);

/// Default threshold multipliers c in {1e-6, 1e-5, ..., 1}.
std::vector<double> default_threshold_grid();

struct ThresholdFraction {
    double c = 0.0;
    double threshold = 0.0;  ///< c * rho^l / n^l
    double fraction = 0.0;   ///< of trials with value below threshold
};

struct ExperimentSummary {
    std::vector<double> values;  ///< one per trial
    std::vector<std::pair<double, double>> quantiles;  ///< (probability, value)
    std::vector<ThresholdFraction> fractions;
};

/// Linear-interpolation quantiles at the given probabilities.
std::vector<std::pair<double, double>> quantiles(std::vector<double> values, const std::vector<double>& probs);

/// Least squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

enum class KrBase { zero, adversarial };

struct KrSigmaConfig {
    std::size_t n = 8;
    std::size_t k = 8;
    std::size_t ell = 2;
    double rho = 1.0;
    std::size_t trials = 100;
    KrBase base = KrBase::zero;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct KrSigmaResult {
    ExperimentSummary summary;
    double delta = 0.0;        ///< 1 - k / n^l
    double unperturbed = 0.0;  ///< sigma_k of the base Khatri-Rao product
};

/// Adversarial base: columns cycle through ceil(k/n) random orthonormal bases,
/// so for k = 2n the Khatri-Rao square has the null vector (1,..,1,-1,..,-1).
Eigen::MatrixXd adversarial_base(std::size_t n, std::size_t k, std::uint64_t seed);

KrSigmaResult kr_sigma_experiment(const KrSigmaConfig& cfg);

enum class SubspaceKind { random, coordinate, full };
enum class BasePoint { zero, random_unit };

struct ProjectionConfig {
    std::size_t n = 16;
    std::size_t ell = 1;
    double delta = 0.5;
    double rho = 1.0;
    std::size_t trials = 100;
    SubspaceKind subspace = SubspaceKind::random;
    BasePoint base = BasePoint::zero;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ProjectionResult {
    ExperimentSummary summary;
    std::size_t dimension = 0;  ///< of W
};

/// ||Pi_W (x~_1 (x) ... (x) x~_l)|| with x~_j = x_j + N(0, rho^2/n); random W is redrawn per trial.
ProjectionResult projection_experiment(const ProjectionConfig& cfg);

// -------------------------------------------------------------- pivot bases

struct PivotBasis {
    Eigen::MatrixXd vectors;          ///< n x r
    std::vector<std::size_t> pivots;  ///< distinct, |vectors(pivots[j], j)| = 1
};

/// Builds r = dim(W) vectors of span(w) with (a) ||v_j||_inf <= 1,
/// (b) |v_j(i_j)| = 1, (c) v_j(i_{j'}) = 0 for j' < j.
PivotBasis build_pivot_basis(const Eigen::MatrixXd& w, double tol = 1e-10);

struct PivotCheck {
    bool bounded = true;    ///< (a)
    bool unit_pivot = true; ///< (b)
    bool zeros = true;      ///< (c)
    bool distinct = true;
    bool in_subspace = true;
    double max_violation = 0.0;

    bool ok() const noexcept { return bounded && unit_pivot && zeros && distinct && in_subspace; }
};

PivotCheck check_pivot_basis(const PivotBasis& basis, const Eigen::MatrixXd& w, double tol = 1e-10);

/// Pivot matrices for a subspace of n x n matrices (vectorized row-major as
/// columns of w). Rows are opened one at a time; within an open row, pivots are
/// (row, column) pairs. Every matrix satisfies (a) ||M_j||_inf <= 1,
/// (b) |M_j(I_j)| = 1, (c) M_j(I_{j'}) = 0 for j' < j and M_j vanishes on every
/// row opened before its own.
struct PivotBasis2 {
    std::size_t n = 0;
    Eigen::MatrixXd matrices;  ///< n^2 x r, each column a row-major n x n matrix
    std::vector<std::pair<std::size_t, std::size_t>> pivots;
    std::vector<std::size_t> rows;              ///< valid rows in opening order
    std::vector<std::size_t> pivots_per_row;    ///< aligned with rows
};

PivotBasis2 build_pivot_basis_l2(const Eigen::MatrixXd& w, std::size_t n, double tol = 1e-10);

PivotCheck check_pivot_basis_l2(const PivotBasis2& basis, const Eigen::MatrixXd& w, double tol = 1e-10);

}  // namespace tensordec

#endif  // TENSORDEC_SMOOTHED_HPP
