#ifndef TENSORDEC_MOMENTS_HPP
#define TENSORDEC_MOMENTS_HPP

/**
 * @file moments.hpp
 * Method-of-moments learners for spherical Gaussian mixtures and hidden
 * Markov models: samplers, moment statistics, and parameter recovery
 * through tensor decomposition.
 *
 * Samples are stored one per column. Sampling is split into fixed blocks
 * of kSampleBlock draws; block b uses stream b of the seed, so the output
 * does not depend on the number of threads.
 */

#include "tensordec/jennrich.hpp"
#include "tensordec/random.hpp"
#include "tensordec/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tensordec {

inline constexpr std::size_t kSampleBlock = 4096;

// ------------------------------------------------------------------- GMM

/// Uniform mixture of N(mu_i, I).
struct GmmParams {
    Eigen::MatrixXd means;  ///< n x k

    std::size_t k() const noexcept { return static_cast<std::size_t>(means.cols()); }
    std::size_t n() const noexcept { return static_cast<std::size_t>(means.rows()); }
    void validate() const;
};

struct MomentEstimate {
    DenseTensor tensor;
    std::size_t samples = 0;
    std::string combination;
};

/// Means of norm `norm`: orthogonal for k <= n, random directions otherwise.
GmmParams random_gmm(Rng& rng, std::size_t n, std::size_t k, double norm);

/// n x N matrix of draws mu_J + eta, J uniform, eta ~ N(0, I).
Eigen::MatrixXd gmm_sample(const GmmParams& params, std::size_t count, std::uint64_t seed, unsigned threads = 1);

/// mean(x^{(x)3}) minus the three arrangements of mean(x) (x) I; estimates (1/k) sum mu_i^{(x)3}.
MomentEstimate gmm_statistic_t3(const Eigen::MatrixXd& samples, unsigned threads = 1);

/// mean(x x^T) - I; estimates (1/k) sum mu_i mu_i^T.
Eigen::MatrixXd gmm_statistic_m2(const Eigen::MatrixXd& samples);

/// (1/k) sum mu_i^{(x)order}.
DenseTensor gmm_statistic_exact(const GmmParams& params, std::size_t order);
Eigen::MatrixXd gmm_second_moment_exact(const GmmParams& params);

enum class DecompositionMethod { jennrich, power };

struct GmmLearnConfig {
    std::size_t k = 1;
    DecompositionMethod method = DecompositionMethod::jennrich;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct GmmLearnResult {
    Eigen::MatrixXd means;  ///< n x k, in the order the decomposition produced them
    RecoveryReport report;
};

/// From samples. k = 1 returns the sample mean.
GmmLearnResult gmm_learn(const Eigen::MatrixXd& samples, const GmmLearnConfig& cfg);

/// From a statistic (1/k) sum mu_i^{(x)l}, l odd. Order 3 uses Jennrich or, with
/// the second-moment matrix, whitening plus the power method; order 5 and up
/// use the flattening pipeline with the default plan.
GmmLearnResult gmm_learn_from_moments(const DenseTensor& statistic, const std::optional<Eigen::MatrixXd>& second,
                                      const GmmLearnConfig& cfg);

// ------------------------------------------------------------------- HMM

/**
 * Stationary HMM with Gaussian emissions X_t = O(:, Z_t) + noise * eta.
 * transition(i, j) = Pr[Z_{t+1} = i | Z_t = j] (columns sum to one).
 */
struct HmmParams {
    Eigen::MatrixXd transition;   ///< k x k, column-stochastic
    Eigen::MatrixXd observation;  ///< n x k
    Eigen::VectorXd stationary;   ///< k, P w = w
    double noise = 0.0;

    std::size_t k() const noexcept { return static_cast<std::size_t>(transition.cols()); }
    std::size_t n() const noexcept { return static_cast<std::size_t>(observation.rows()); }
    void validate() const;
};

/// Fixed point of a column-stochastic matrix, normalized to sum one.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

/// Params with the stationary distribution filled in.
HmmParams make_hmm(Eigen::MatrixXd transition, Eigen::MatrixXd observation, double noise);

/// Random instance with P = 0.6 I + 0.4 R (R column-stochastic, |N(0,1)| entries)
/// and N(0,1) observation means, redrawn until sigma_k(P) and, for k <= n,
/// sigma_k(O) reach min_singular.
HmmParams random_hmm(Rng& rng, std::size_t n, std::size_t k, double noise, double min_singular = 0.2);

/// Reverse-time transition diag(w) P^T diag(w)^{-1}.
Eigen::MatrixXd reverse_transition(const HmmParams& params);

struct HmmSample {
    std::size_t window = 0;
    Eigen::MatrixXd observations;       ///< n x (count * window); window s occupies columns s*window ...
    std::vector<std::uint32_t> states;  ///< count * window hidden states
    std::size_t count() const noexcept { return window ? states.size() / window : 0; }
};

HmmSample hmm_sample(const HmmParams& params, std::size_t window, std::size_t count, std::uint64_t seed,
                     unsigned threads = 1);

/// Empirical mean of (X_l (x) ... (x) X_1) (x) X_{l+1} (x) (X_{l+2} (x) ... (x) X_{2l+1}),
/// an order-3 tensor of shape n^l x n x n^l.
DenseTensor hmm_moment_tensor(const HmmSample& sample, std::size_t ell, unsigned threads = 1);

/// Conditional means of the three views given the middle state: population tensor
/// is sum_i w_i A_i (x) B_i (x) C_i.
struct HmmViews {
    Eigen::MatrixXd a;  ///< n^l x k, past window (most recent slowest)
    Eigen::MatrixXd b;  ///< n x k, equals O
    Eigen::MatrixXd c;  ///< n^l x k, future window
};
HmmViews hmm_views(const HmmParams& params, std::size_t ell);

/// Statistics hmm_learn consumes. The three pair moments fix the scale of
/// each view: with terms c_i a_i (x) b_i (x) c_i recovered from the triple,
/// fitting the pairs gives w alpha beta, w beta gamma and w alpha gamma.
struct HmmMoments {
    std::size_t ell = 1;
    DenseTensor triple;          ///< n^l x n x n^l, E[past (x) X_{l+1} (x) future]
    Eigen::MatrixXd left_pair;   ///< n^l x n, E[past (x) X_{l+1}]
    Eigen::MatrixXd right_pair;  ///< n x n^l, E[X_{l+1} (x) future]
    Eigen::MatrixXd outer_pair;  ///< n^l x n^l, E[past (x) future]
    Eigen::VectorXd mean;        ///< E[X_t]
    std::size_t samples = 0;     ///< 0 for population moments
};

HmmMoments hmm_population_moments(const HmmParams& params, std::size_t ell);
HmmMoments hmm_empirical_moments(const HmmSample& sample, std::size_t ell, unsigned threads = 1);

struct HmmLearnConfig {
    std::size_t k = 1;
    JennrichConfig jennrich;
};

struct HmmLearnResult {
    Eigen::MatrixXd observation;                ///< n x k
    std::optional<Eigen::MatrixXd> transition;  ///< k x k, recovered at l = 1 only
    Eigen::VectorXd stationary;
    RecoveryReport report;
};

HmmLearnResult hmm_learn(const HmmMoments& moments, const HmmLearnConfig& cfg);

/// Errors after matching estimated states to true states by observation columns.
struct HmmMatch {
    std::vector<std::size_t> permutation;  ///< true state of estimated state i
    double observation_error = 0.0;        ///< max column-wise l2
    double transition_error = 0.0;         ///< max column-wise l2, NaN without a transition estimate
    double stationary_error = 0.0;         ///< max abs
};
HmmMatch hmm_match(const HmmLearnResult& estimate, const HmmParams& truth);

/// Clips negatives to zero and rescales to sum one (uniform if nothing survives).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace tensordec

#endif  // TENSORDEC_MOMENTS_HPP
