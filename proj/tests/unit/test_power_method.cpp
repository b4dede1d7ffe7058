#include "tensordec/errors.hpp"
#include "tensordec/generators.hpp"
#include "tensordec/jennrich.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/power_method.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tensordec;

namespace {

// Symmetric sum_i w_i u_i^{(x)3} and the matching second moment.
struct SymmetricInstance {
    DenseTensor tensor;
    Eigen::MatrixXd second;
};

SymmetricInstance symmetric_instance(const Eigen::MatrixXd& u, const Eigen::VectorXd& w) {
    DenseTensor t(Shape(3, static_cast<std::size_t>(u.rows())));
    for (Eigen::Index i = 0; i < u.cols(); ++i) t = t + w(i) * outer_product({u.col(i), u.col(i), u.col(i)});
    return {t, u * w.asDiagonal() * u.transpose()};
}

double sign_free_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::min((a - b).norm(), (a + b).norm());
}

}  // namespace

TEST(PowerIterate, SingleTerm) {
    const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(4, 0);
    const PowerIterate r = power_iterate(3.0 * outer_product({e1, e1, e1}), 1);
    EXPECT_NEAR(std::abs(r.vector(0)), 1.0, 1e-14);
    EXPECT_NEAR(r.lambda, r.vector(0) > 0 ? 3.0 : -3.0, 1e-14);
    EXPECT_LE(r.iterations, 2);
    EXPECT_TRUE(r.converged);
}

TEST(PowerIterate, BothBasinsReached) {
    Rng rng = make_rng(1);
    const OrthogonalInstance inst = orthogonal_instance(rng, 4, Eigen::Vector2d(2, 1));
    int first = 0, second = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const PowerIterate r = power_iterate(inst.tensor, s);
        if (sign_free_distance(r.vector, inst.vectors.col(0)) < 1e-6) ++first;
        if (sign_free_distance(r.vector, inst.vectors.col(1)) < 1e-6) ++second;
    }
    EXPECT_EQ(first + second, 100);
    EXPECT_GT(first, 0);
    EXPECT_GT(second, 0);
}

TEST(PowerIterate, ZeroTensorIsDegenerate) {
    EXPECT_THROW(power_iterate(DenseTensor({3, 3, 3}), 0), DegeneracyError);
}

TEST(PowerIterate, RejectsAsymmetric) {
    DenseTensor t = outer_product({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0)});
    EXPECT_THROW(power_iterate(t, 0), PreconditionError);
    EXPECT_THROW(check_symmetric(DenseTensor({2, 3, 2})), ShapeError);
}

TEST(PowerIterate, OrthogonalVectorsAreFixedPoints) {
    Rng rng = make_rng(2);
    const OrthogonalInstance inst = orthogonal_instance(rng, 6, Eigen::Vector3d(3, 2, 1));
    for (Eigen::Index i = 0; i < 3; ++i) {
        const Eigen::VectorXd v = inst.vectors.col(i);
        const Eigen::VectorXd step = contract_two(inst.tensor, v).normalized();
        EXPECT_LE((step - v).norm(), 1e-10);
    }
}

TEST(Deflate, CanonicalBasis) {
    DenseTensor t({4, 4, 4});
    for (Eigen::Index i = 0; i < 4; ++i) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(4, i);
        t = t + static_cast<double>(i + 1) * outer_product({e, e, e});
    }
    PowerConfig cfg;
    cfg.seed = 3;
    const OrthogonalDecomposition d = deflate_decompose(t, 4, cfg);
    EXPECT_LE((d.lambdas - Eigen::Vector4d(4, 3, 2, 1)).norm(), 1e-10);
    for (Eigen::Index i = 0; i < 4; ++i)
        EXPECT_LE(sign_free_distance(d.vectors.col(i), Eigen::VectorXd::Unit(4, 3 - i)), 1e-10);
    EXPECT_LT(d.residual, 1e-8);
}

TEST(Deflate, RankZero) {
    Rng rng = make_rng(4);
    const OrthogonalInstance inst = orthogonal_instance(rng, 3, Eigen::Vector2d(1, 1));
    const OrthogonalDecomposition d = deflate_decompose(inst.tensor, 0, PowerConfig{});
    EXPECT_EQ(d.lambdas.size(), 0);
    EXPECT_DOUBLE_EQ(d.residual, frobenius_norm(inst.tensor));
}

TEST(Deflate, NoisyRecovery) {
    Rng rng = make_rng(5);
    const OrthogonalInstance inst = orthogonal_instance(rng, 6, Eigen::Vector4d(4, 3, 2, 1));
    // symmetrized noise keeps the tensor inside the method's precondition
    DenseTensor noise = add_uniform_noise(DenseTensor({6, 6, 6}), 1e-8, rng);
    std::vector<double> sym(noise.size());
    for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = 0; b < 6; ++b)
            for (std::size_t c = 0; c < 6; ++c)
                sym[(a * 6 + b) * 6 + c] = (noise({a, b, c}) + noise({a, c, b}) + noise({b, a, c}) + noise({b, c, a}) +
                                            noise({c, a, b}) + noise({c, b, a})) / 6;
    const DenseTensor t = inst.tensor + DenseTensor({6, 6, 6}, sym);
    const OrthogonalDecomposition d = deflate_decompose(t, 4, PowerConfig{});
    for (Eigen::Index i = 0; i < 4; ++i) {
        const DenseTensor found = d.lambdas(i) * outer_product({d.vectors.col(i), d.vectors.col(i), d.vectors.col(i)});
        const Eigen::VectorXd v = inst.vectors.col(i);
        const DenseTensor truth = inst.lambdas(i) * outer_product({v, v, v});
        EXPECT_LE(frobenius_norm(found - truth), 1e-5);
    }
}

TEST(Deflate, ExactOverRandomInstances) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng = make_rng(s, 7);
        const std::size_t k = 1 + s % 8;
        const Eigen::VectorXd lambdas = (gaussian_vector(rng, static_cast<Eigen::Index>(k)).array().abs() + 1.0).matrix();
        const OrthogonalInstance inst = orthogonal_instance(rng, 10, lambdas);
        PowerConfig cfg;
        cfg.seed = s;
        const OrthogonalDecomposition d = deflate_decompose(inst.tensor, k, cfg);
        EXPECT_LE(d.residual, 1e-7 * frobenius_norm(inst.tensor));
        EXPECT_LE((d.vectors.transpose() * d.vectors - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                                               static_cast<Eigen::Index>(k)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-8);
    }
}

TEST(Whiten, OrthonormalFactorsPassThrough) {
    Rng rng = make_rng(8);
    const Eigen::MatrixXd u = random_orthonormal(rng, 5, 3);
    const SymmetricInstance inst = symmetric_instance(u, Eigen::Vector3d::Ones());
    const Whitening w = whiten(inst.tensor, inst.second, 3);
    const OrthogonalDecomposition d = deflate_decompose(w.tensor, 3, PowerConfig{});
    const Eigen::MatrixXd back = unwhiten(w, d);
    EXPECT_LE(match_columns(back, u).max_error, 1e-8);
}

TEST(Whiten, SkewedFactorsRoundTrip) {
    Rng rng = make_rng(9);
    Eigen::MatrixXd u;
    do {
        u = gaussian_matrix(rng, 3, 3);
    } while (std::abs(condition_number(u) - 5.0) > 1.0);
    const SymmetricInstance inst = symmetric_instance(u, Eigen::Vector3d::Ones());
    const Whitening w = whiten(inst.tensor, inst.second, 3);
    const OrthogonalDecomposition d = deflate_decompose(w.tensor, 3, PowerConfig{});
    EXPECT_LE((d.vectors.transpose() * d.vectors - Eigen::Matrix3d::Identity()).norm(), 1e-6);
    EXPECT_LE(match_columns(unwhiten(w, d), u).max_error, 1e-6);
}

TEST(Whiten, RankDeficientSecondMoment) {
    Rng rng = make_rng(10);
    const Eigen::MatrixXd u = gaussian_matrix(rng, 4, 2);
    const SymmetricInstance inst = symmetric_instance(u, Eigen::Vector2d::Ones());
    EXPECT_EQ(estimate_whitening_rank(inst.second), 2u);
    EXPECT_THROW(whiten(inst.tensor, inst.second, 3), PreconditionError);
}

TEST(Power, AgreesWithJennrich) {
    Rng rng = make_rng(11);
    for (int s = 0; s < 5; ++s) {
        const OrthogonalInstance inst =
            orthogonal_instance(rng, 6, (Eigen::VectorXd(4) << 4, 3, 2, 1).finished());
        const OrthogonalDecomposition p = deflate_decompose(inst.tensor, 4, PowerConfig{});
        const CpDecomposition from_power({p.vectors, p.vectors, p.vectors}, p.lambdas);
        JennrichConfig cfg;
        cfg.rank = 4;
        const CpDecomposition from_jennrich = jennrich_decompose(inst.tensor, cfg).decomposition;
        EXPECT_LT(match_terms(from_power, from_jennrich).max_error, 1e-5);
    }
}
