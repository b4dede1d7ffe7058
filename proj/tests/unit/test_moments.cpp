#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/moments.hpp"
#include "tensordec/smoothed.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tensordec;

namespace {

// Per-sample statistic x_i x_j x_l - [j=l] x_i - [i=l] x_j - [i=j] x_l; its mean is T3-hat.
double t3_term(const Eigen::VectorXd& x, Eigen::Index i, Eigen::Index j, Eigen::Index l) {
    return x(i) * x(j) * x(l) - (j == l ? x(i) : 0.0) - (i == l ? x(j) : 0.0) - (i == j ? x(l) : 0.0);
}

// Band check: every entry of `estimate` lies within z standard errors of `truth`,
// the standard errors taken from the per-sample terms.
void expect_within_band(const Eigen::MatrixXd& samples, const DenseTensor& estimate, const DenseTensor& truth, double z) {
    const Eigen::Index n = samples.rows();
    const double count = static_cast<double>(samples.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index l = 0; l < n; ++l) {
                double sum = 0.0, sq = 0.0;
                for (Eigen::Index s = 0; s < samples.cols(); ++s) {
                    const double v = t3_term(samples.col(s), i, j, l);
                    sum += v;
                    sq += v * v;
                }
                const double mean = sum / count;
                const double se = std::sqrt((sq / count - mean * mean) / count);
                const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j),
                           ul = static_cast<std::size_t>(l);
                EXPECT_NEAR(estimate({ui, uj, ul}), mean, 1e-10);
                EXPECT_LE(std::abs(mean - truth({ui, uj, ul})), z * se) << i << j << l;
            }
}

HmmParams example_hmm(std::uint64_t seed, std::size_t n, std::size_t k, double noise) {
    Rng rng = make_rng(seed);
    return random_hmm(rng, n, k, noise);
}

}  // namespace

TEST(GmmSample, MeanAndDeterminism) {
    const GmmParams zero{Eigen::MatrixXd::Zero(8, 1)};
    const Eigen::MatrixXd x = gmm_sample(zero, 10000, 1);
    EXPECT_LE(x.rowwise().mean().cwiseAbs().maxCoeff(), 4 / std::sqrt(10000.0 / 8));

    const GmmParams e1{Eigen::MatrixXd(Eigen::VectorXd::Unit(3, 0))};
    EXPECT_LE((gmm_sample(e1, 20000, 2).rowwise().mean() - Eigen::Vector3d(1, 0, 0)).norm(), 0.05);

    const GmmParams three{Eigen::MatrixXd::Identity(4, 3) * 5};
    const Eigen::MatrixXd a = gmm_sample(three, 9000, 3, 1);
    EXPECT_EQ(a, gmm_sample(three, 9000, 3, 1));
    EXPECT_EQ(a, gmm_sample(three, 9000, 3, 3));
    EXPECT_NE(a, gmm_sample(three, 9000, 4, 1));
}

TEST(GmmStatistic, NoiselessSamplesGiveFormula) {
    const Eigen::Vector3d mu(1, -2, 0.5);
    const Eigen::MatrixXd samples = mu.replicate(1, 5);
    const DenseTensor t = gmm_statistic_t3(samples).tensor;
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            for (Eigen::Index l = 0; l < 3; ++l)
                EXPECT_NEAR(t({static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(l)}),
                            t3_term(mu, i, j, l), 1e-14);
}

TEST(GmmStatistic, ZeroMeanIsUnbiased) {
    const GmmParams zero{Eigen::MatrixXd::Zero(4, 1)};
    const Eigen::MatrixXd x = gmm_sample(zero, 100000, 5);
    expect_within_band(x, gmm_statistic_t3(x).tensor, DenseTensor({4, 4, 4}), 5.0);
}

TEST(GmmStatistic, UnbiasedForRandomMixture) {
    Rng rng = make_rng(6);
    const GmmParams params{gaussian_matrix(rng, 5, 3, 1.5)};
    const Eigen::MatrixXd x = gmm_sample(params, 100000, 6);
    expect_within_band(x, gmm_statistic_t3(x).tensor, gmm_statistic_exact(params, 3), 5.0);
}

TEST(GmmStatistic, ThreadCountInvariant) {
    const GmmParams params{Eigen::MatrixXd::Identity(5, 2) * 2};
    const Eigen::MatrixXd x = gmm_sample(params, 10000, 7, 2);
    const DenseTensor a = gmm_statistic_t3(x, 1).tensor, b = gmm_statistic_t3(x, 4).tensor;
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(GmmExact, Cases) {
    const GmmParams e1{Eigen::MatrixXd(Eigen::VectorXd::Unit(3, 0))};
    const DenseTensor t = gmm_statistic_exact(e1, 3);
    EXPECT_EQ(t({0, 0, 0}), 1.0);
    EXPECT_EQ(frobenius_norm(t), 1.0);

    Eigen::MatrixXd anti(3, 2);
    anti.col(0) = Eigen::Vector3d(1, 2, 3);
    anti.col(1) = -anti.col(0);
    EXPECT_LE(max_abs(gmm_statistic_exact({anti}, 3)), 1e-15);
    EXPECT_EQ(gmm_statistic_exact(e1, 5).shape(), Shape(5, 3));
}

TEST(GmmLearn, SingleComponentIsSampleMean) {
    const GmmParams params{3 * Eigen::MatrixXd(Eigen::VectorXd::Unit(8, 2))};
    const Eigen::MatrixXd x = gmm_sample(params, 10000, 8);
    GmmLearnConfig cfg;
    const GmmLearnResult r = gmm_learn(x, cfg);
    EXPECT_LT((r.means - params.means).norm(), 0.05);
    EXPECT_LE((r.means - x.rowwise().mean()).norm(), 1e-15);
}

TEST(GmmLearn, TwoComponentsFromSamples) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(8, 2);
    means(0, 0) = 3;
    means(1, 1) = 3;
    const Eigen::MatrixXd x = gmm_sample({means}, 200000, 9);
    GmmLearnConfig cfg;
    cfg.k = 2;
    cfg.method = DecompositionMethod::power;
    const ColumnMatch m = match_columns(gmm_learn(x, cfg).means, means);
    double mean_error = 0.0;
    for (double e : m.errors) mean_error += e / 2;
    EXPECT_LE(mean_error, 0.1);
}

TEST(GmmLearn, OrthogonalMeansFromSamples) {
    Rng rng = make_rng(10);
    const GmmParams params = random_gmm(rng, 8, 3, 5.0);
    const Eigen::MatrixXd x = gmm_sample(params, 500000, 10);
    GmmLearnConfig cfg;
    cfg.k = 3;
    cfg.method = DecompositionMethod::power;
    EXPECT_LE(match_columns(gmm_learn(x, cfg).means, params.means).max_error, 0.25);
}

TEST(GmmLearn, ExactMomentsBothMethods) {
    Rng rng = make_rng(11);
    const GmmParams params = random_gmm(rng, 8, 3, 5.0);
    const DenseTensor t3 = gmm_statistic_exact(params, 3);
    for (auto method : {DecompositionMethod::jennrich, DecompositionMethod::power}) {
        GmmLearnConfig cfg;
        cfg.k = 3;
        cfg.method = method;
        const GmmLearnResult r = gmm_learn_from_moments(t3, gmm_second_moment_exact(params), cfg);
        EXPECT_LE(match_columns(r.means, params.means).max_error, 1e-6);
    }
}

TEST(GmmLearn, OvercompleteOrderFive) {
    Rng rng = make_rng(12);
    GmmParams params{gaussian_matrix(rng, 4, 6, 0.0)};
    params.means = perturb_matrix(params.means, 2.0, rng);
    GmmLearnConfig cfg;
    cfg.k = 6;
    const GmmLearnResult r = gmm_learn_from_moments(gmm_statistic_exact(params, 5), std::nullopt, cfg);
    EXPECT_LE(match_columns(r.means, params.means).max_error, 1e-4);
}

TEST(GmmLearn, Preconditions) {
    GmmLearnConfig cfg;
    cfg.k = 2;
    const GmmParams params{Eigen::MatrixXd::Identity(3, 2)};
    EXPECT_THROW(gmm_learn_from_moments(gmm_statistic_exact(params, 4), std::nullopt, cfg), PreconditionError);
    cfg.method = DecompositionMethod::power;
    EXPECT_THROW(gmm_learn_from_moments(gmm_statistic_exact(params, 3), std::nullopt, cfg), PreconditionError);
}

TEST(HmmParamsTest, Validation) {
    Eigen::Matrix2d p;
    p << 0.9, 0.2, 0.1, 0.8;
    const HmmParams h = make_hmm(p, Eigen::MatrixXd::Identity(3, 2), 0.1);
    EXPECT_LE((p * h.stationary - h.stationary).norm(), 1e-14);
    EXPECT_NEAR(h.stationary.sum(), 1.0, 1e-15);
    EXPECT_LE((reverse_transition(h).colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-14);
    Eigen::Matrix2d bad = p;
    bad(0, 0) = 0.5;
    EXPECT_THROW(make_hmm(bad, Eigen::MatrixXd::Identity(3, 2), 0.1), PreconditionError);
}

TEST(HmmSampleTest, IdentityTransitionFreezesState) {
    const HmmParams h = make_hmm(Eigen::Matrix3d::Identity(), Eigen::MatrixXd::Identity(4, 3), 0.0);
    const HmmSample s = hmm_sample(h, 5, 2000, 1);
    for (std::size_t w = 0; w < s.count(); ++w)
        for (std::size_t t = 1; t < 5; ++t) EXPECT_EQ(s.states[w * 5 + t], s.states[w * 5]);
}

TEST(HmmSampleTest, SingleStateMean) {
    const HmmParams h = make_hmm(Eigen::MatrixXd::Ones(1, 1), Eigen::Vector3d(1, 2, 3), 0.0);
    const HmmSample s = hmm_sample(h, 3, 100, 2);
    for (Eigen::Index c = 0; c < s.observations.cols(); ++c) EXPECT_EQ(s.observations.col(c), Eigen::Vector3d(1, 2, 3));
    EXPECT_THROW(hmm_sample(h, 4, 10, 0), PreconditionError);
}

TEST(HmmSampleTest, StationaryOccupancy) {
    const HmmParams h = example_hmm(3, 6, 3, 0.1);
    const std::size_t count = 100000;
    const HmmSample s = hmm_sample(h, 3, count, 3);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(3);
    for (std::size_t w = 0; w < count; ++w) freq(s.states[w * 3]) += 1.0;
    freq /= static_cast<double>(count);
    for (Eigen::Index i = 0; i < 3; ++i) {
        const double p = h.stationary(i);
        EXPECT_LE(std::abs(freq(i) - p), 3 * std::sqrt(p * (1 - p) / static_cast<double>(count)));
    }
    const HmmSample again = hmm_sample(h, 3, 9000, 3, 4);
    const HmmSample once = hmm_sample(h, 3, 9000, 3, 1);
    EXPECT_EQ(again.observations, once.observations);
    EXPECT_EQ(again.states, once.states);
}

TEST(HmmMoments, SingleStateNoiseless) {
    const Eigen::Vector2d o(1.5, -0.5);
    const HmmParams h = make_hmm(Eigen::MatrixXd::Ones(1, 1), o, 0.0);
    const DenseTensor t = hmm_moment_tensor(hmm_sample(h, 3, 50, 1), 1);
    EXPECT_LE(frobenius_norm(t - outer_product({o, o, o})), 1e-14);
}

TEST(HmmMoments, PopulationMatchesPathEnumeration) {
    for (std::size_t ell : {1, 2}) {
        const HmmParams h = example_hmm(4, 3, 2, 0.0);
        const std::size_t window = 2 * ell + 1, k = h.k();
        const Eigen::Index n = static_cast<Eigen::Index>(h.n());
        std::size_t paths = 1;
        for (std::size_t t = 0; t < window; ++t) paths *= k;
        DenseTensor sum(Shape{1});
        bool first = true;
        for (std::size_t code = 0; code < paths; ++code) {
            std::vector<std::size_t> z(window);
            std::size_t c = code;
            for (std::size_t t = 0; t < window; ++t, c /= k) z[t] = c % k;
            double p = h.stationary(static_cast<Eigen::Index>(z[0]));
            for (std::size_t t = 1; t < window; ++t)
                p *= h.transition(static_cast<Eigen::Index>(z[t]), static_cast<Eigen::Index>(z[t - 1]));
            std::vector<Eigen::VectorXd> past, future;
            for (std::size_t r = ell; r-- > 0;) past.push_back(h.observation.col(static_cast<Eigen::Index>(z[r])));
            for (std::size_t r = ell + 1; r < window; ++r)
                future.push_back(h.observation.col(static_cast<Eigen::Index>(z[r])));
            const DenseTensor term =
                p * outer_product({kronecker(past), h.observation.col(static_cast<Eigen::Index>(z[ell])), kronecker(future)});
            sum = first ? term : sum + term;
            first = false;
        }
        const HmmMoments m = hmm_population_moments(h, ell);
        EXPECT_LE(frobenius_norm(m.triple - sum), 1e-13) << "ell " << ell;
        EXPECT_EQ(m.triple.shape(), (Shape{static_cast<std::size_t>(std::pow(n, ell)), h.n(),
                                           static_cast<std::size_t>(std::pow(n, ell))}));
    }
}

TEST(HmmMoments, EmpiricalWithinSamplingBands) {
    const HmmParams h = example_hmm(5, 3, 2, 0.1);
    const std::size_t count = 100000;
    const HmmSample s = hmm_sample(h, 3, count, 5);
    const DenseTensor emp = hmm_moment_tensor(s, 1);
    const DenseTensor pop = hmm_population_moments(h, 1).triple;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 3; ++l) {
                double sum = 0.0, sq = 0.0;
                for (std::size_t w = 0; w < count; ++w) {
                    const auto base = static_cast<Eigen::Index>(3 * w);
                    const double v = s.observations(static_cast<Eigen::Index>(i), base) *
                                     s.observations(static_cast<Eigen::Index>(j), base + 1) *
                                     s.observations(static_cast<Eigen::Index>(l), base + 2);
                    sum += v;
                    sq += v * v;
                }
                const double mean = sum / static_cast<double>(count);
                const double se = std::sqrt((sq / static_cast<double>(count) - mean * mean) / static_cast<double>(count));
                EXPECT_NEAR(emp({i, j, l}), mean, 1e-12);
                EXPECT_LE(std::abs(mean - pop({i, j, l})), 5 * se);
            }
    EXPECT_THROW(hmm_moment_tensor(s, 2), ShapeError);
}

TEST(HmmLearn, SingleState) {
    const HmmParams h = make_hmm(Eigen::MatrixXd::Ones(1, 1), Eigen::Vector3d(1, 2, 3), 0.5);
    const HmmSample s = hmm_sample(h, 3, 1000, 6);
    const HmmLearnResult r = hmm_learn(hmm_empirical_moments(s, 1), HmmLearnConfig{});
    EXPECT_LE((r.observation - s.observations.rowwise().mean()).norm(), 1e-14);
    EXPECT_EQ((*r.transition)(0, 0), 1.0);
    EXPECT_EQ(r.stationary(0), 1.0);
}

TEST(HmmLearn, ExactMoments) {
    const HmmParams h = example_hmm(7, 6, 3, 0.1);
    HmmLearnConfig cfg;
    cfg.k = 3;
    const HmmMatch m = hmm_match(hmm_learn(hmm_population_moments(h, 1), cfg), h);
    EXPECT_LE(m.observation_error, 1e-6);
    EXPECT_LE(m.transition_error, 1e-6);
    EXPECT_LE(m.stationary_error, 1e-6);
}

TEST(HmmLearn, ExactMomentsLongerWindow) {
    const HmmParams h = example_hmm(8, 3, 4, 0.1);  // k > n
    HmmLearnConfig cfg;
    cfg.k = 4;
    const HmmLearnResult r = hmm_learn(hmm_population_moments(h, 2), cfg);
    EXPECT_FALSE(r.transition.has_value());
    const HmmMatch m = hmm_match(r, h);
    EXPECT_LE(m.observation_error, 1e-6);
    EXPECT_LE(m.stationary_error, 1e-6);
    EXPECT_TRUE(std::isnan(m.transition_error));
}

TEST(HmmLearn, SampledWindows) {
    const HmmParams h = example_hmm(9, 6, 3, 0.1);
    HmmLearnConfig cfg;
    cfg.k = 3;
    const HmmMatch m = hmm_match(hmm_learn(hmm_empirical_moments(hmm_sample(h, 3, 500000, 9), 1), cfg), h);
    EXPECT_LE(m.observation_error, 0.1);
    EXPECT_LE(m.transition_error, 0.1);
}

TEST(HmmLearn, RelabelingLeavesErrorsUnchanged) {
    const HmmParams h = example_hmm(10, 6, 3, 0.1);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
    perm.indices() << 2, 0, 1;
    const Eigen::MatrixXd p = perm * h.transition * perm.transpose();
    const HmmParams relabeled = make_hmm(p, h.observation * perm.transpose(), h.noise);
    HmmLearnConfig cfg;
    cfg.k = 3;
    const HmmLearnResult r = hmm_learn(hmm_population_moments(h, 1), cfg);
    const HmmMatch a = hmm_match(r, h), b = hmm_match(r, relabeled);
    EXPECT_NEAR(a.observation_error, b.observation_error, 1e-12);
    EXPECT_NEAR(a.transition_error, b.transition_error, 1e-12);
}

TEST(Simplex, Projection) {
    EXPECT_EQ(project_to_simplex(Eigen::Vector3d(1, -1, 3)), Eigen::Vector3d(0.25, 0, 0.75));
    EXPECT_EQ(project_to_simplex(Eigen::Vector2d(-1, -2)), Eigen::Vector2d(0.5, 0.5));
}
