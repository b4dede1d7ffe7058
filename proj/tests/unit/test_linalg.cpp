#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>

using namespace tensordec;

namespace {

// Brute-force leave-one-out by normal equations on the remaining columns.
double loo_oracle(const Eigen::MatrixXd& m) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        Eigen::MatrixXd rest(m.rows(), m.cols() - 1);
        for (Eigen::Index j = 0, c = 0; j < m.cols(); ++j)
            if (j != i) rest.col(c++) = m.col(j);
        const Eigen::VectorXd x = rest.completeOrthogonalDecomposition().solve(m.col(i));
        best = std::min(best, (m.col(i) - rest * x).norm());
    }
    return best;
}

}  // namespace

TEST(Svd, KnownSpectra) {
    EXPECT_LE((singular_values(Eigen::Matrix3d::Identity()) - Eigen::Vector3d::Ones()).norm(), 1e-15);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 3;
    const Eigen::VectorXd s = singular_values(d);
    EXPECT_NEAR(s(0), 3.0, 1e-15);
    EXPECT_NEAR(s(1), 0.0, 1e-15);
    const Eigen::VectorXd ones = singular_values(Eigen::MatrixXd::Ones(2, 2));
    EXPECT_NEAR(ones(0), 2.0, 1e-14);
    EXPECT_NEAR(ones(1), 0.0, 1e-14);
}

TEST(Svd, ReconstructionAndOrdering) {
    Rng rng = make_rng(1);
    for (auto [r, c] : {std::pair{7, 3}, std::pair{3, 7}, std::pair{5, 5}}) {
        const Eigen::MatrixXd m = gaussian_matrix(rng, r, c);
        const SvdResult s = svd(m);
        const Eigen::MatrixXd back = s.u * s.singular_values.asDiagonal() * s.v.transpose();
        EXPECT_LE((back - m).cwiseAbs().maxCoeff(), 1e-10 * s.singular_values(0) * std::max(r, c));
        for (Eigen::Index i = 1; i < s.singular_values.size(); ++i)
            EXPECT_GE(s.singular_values(i - 1), s.singular_values(i));
        EXPECT_LE((s.u.transpose() * s.u - Eigen::MatrixXd::Identity(s.u.cols(), s.u.cols())).norm(), 1e-12);
    }
}

TEST(Pseudoinverse, Cases) {
    const Eigen::MatrixXd p = pseudoinverse(Eigen::Vector2d(2, 4).asDiagonal().toDenseMatrix());
    EXPECT_LE((p - Eigen::Vector2d(0.5, 0.25).asDiagonal().toDenseMatrix()).norm(), 1e-15);

    Rng rng = make_rng(2);
    const Eigen::VectorXd u = random_unit_vector(rng, 4), v = random_unit_vector(rng, 3);
    EXPECT_LE((pseudoinverse(u * v.transpose()) - v * u.transpose()).norm(), 1e-14);

    const Eigen::MatrixXd z = pseudoinverse(Eigen::MatrixXd::Zero(3, 2));
    EXPECT_EQ(z.rows(), 2);
    EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pseudoinverse, MoorePenroseIdentitiesAndInvolution) {
    Rng rng = make_rng(3);
    for (int t = 0; t < 20; ++t) {
        const Eigen::MatrixXd m = gaussian_matrix(rng, 6, 3) * gaussian_matrix(rng, 3, 5);  // rank 3
        const Eigen::MatrixXd p = pseudoinverse(m);
        const double scale = m.norm();
        EXPECT_LE((m * p * m - m).norm(), 1e-8 * scale);
        EXPECT_LE((p * m * p - p).norm(), 1e-8 * p.norm());
        EXPECT_LE((m * p - (m * p).transpose()).norm(), 1e-8);
        EXPECT_LE((pseudoinverse(p) - m).norm(), 1e-8 * scale);
    }
}

TEST(Pseudoinverse, RankTruncation) {
    const Eigen::MatrixXd d = Eigen::Vector3d(4, 2, 1).asDiagonal();
    const Eigen::MatrixXd p = pseudoinverse_rank(d, 2);
    EXPECT_LE((p - Eigen::Vector3d(0.25, 0.5, 0).asDiagonal().toDenseMatrix()).norm(), 1e-15);
}

TEST(Eig, DiagonalAndRotation) {
    const EigResult d = eig_nonsymmetric(Eigen::Vector3d(1, 2, 3).asDiagonal());
    std::vector<double> re;
    for (Eigen::Index i = 0; i < 3; ++i) {
        re.push_back(d.eigenvalues(i).real());
        EXPECT_EQ(d.eigenvalues(i).imag(), 0.0);
        // basis eigenvector up to phase
        EXPECT_NEAR(d.eigenvectors.col(i).cwiseAbs().maxCoeff(), 1.0, 1e-14);
    }
    std::sort(re.begin(), re.end());
    EXPECT_EQ(re, (std::vector<double>{1, 2, 3}));

    Eigen::Matrix2d rot;
    rot << 0, -1, 1, 0;
    const EigResult r = eig_nonsymmetric(rot);
    EXPECT_NEAR(std::abs(r.eigenvalues(0).imag()), 1.0, 1e-14);
    EXPECT_NEAR(r.eigenvalues(0).real(), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(r.eigenvalues(0) + r.eigenvalues(1)), 0.0, 1e-14);
}

TEST(Eig, SimilarityOracleAndResidual) {
    Rng rng = make_rng(4);
    for (int t = 0; t < 50; ++t) {
        Eigen::MatrixXd u = gaussian_matrix(rng, 3, 3);
        if (condition_number(u) > 20) continue;
        const Eigen::MatrixXd m = u * Eigen::Vector3d(1, 5, 9).asDiagonal() * u.inverse();
        const EigResult e = eig_nonsymmetric(m);
        std::vector<double> re;
        for (Eigen::Index i = 0; i < 3; ++i) re.push_back(e.eigenvalues(i).real());
        std::sort(re.begin(), re.end());
        EXPECT_NEAR(re[0], 1, 1e-8);
        EXPECT_NEAR(re[1], 5, 1e-8);
        EXPECT_NEAR(re[2], 9, 1e-8);
        const Eigen::MatrixXcd mc = m.cast<std::complex<double>>();
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Eigen::VectorXcd v = e.eigenvectors.col(i);
            EXPECT_NEAR(v.norm(), 1.0, 1e-12);
            EXPECT_LE((mc * v - e.eigenvalues(i) * v).norm(), 1e-8 * operator_norm(m));
        }
    }
}

TEST(ConditionNumber, Cases) {
    Rng rng = make_rng(5);
    EXPECT_NEAR(condition_number(random_orthonormal(rng, 6, 4)), 1.0, 1e-12);
    EXPECT_NEAR(condition_number(Eigen::Vector2d(10, 1).asDiagonal()), 10.0, 1e-12);
    Eigen::Matrix2d m;
    m << 1, 1, 0, 1e-3;
    // sigma_1 ~ sqrt(2), sigma_2 ~ 1e-3 / sqrt(2)
    EXPECT_NEAR(condition_number(m), 2e3, 0.05 * 2e3);
    EXPECT_EQ(condition_number(Eigen::MatrixXd::Ones(3, 2)), std::numeric_limits<double>::infinity());
    EXPECT_THROW(condition_number(Eigen::MatrixXd::Ones(2, 3)), PreconditionError);
}

TEST(LeaveOneOut, Cases) {
    EXPECT_NEAR(leave_one_out(Eigen::MatrixXd::Identity(4, 4)), 1.0, 1e-14);
    Eigen::MatrixXd dup(3, 3);
    dup << 1, 1, 0, 2, 2, 1, 3, 3, 5;
    EXPECT_NEAR(leave_one_out(dup), 0.0, 1e-12);
    Rng rng = make_rng(6);
    const Eigen::MatrixXd g = gaussian_matrix(rng, 5, 3);
    EXPECT_NEAR(leave_one_out(g), loo_oracle(g), 1e-12);
    const double s = singular_values(g).minCoeff(), l = leave_one_out(g);
    EXPECT_LE(l / std::sqrt(3.0), s + 1e-9);
    EXPECT_LE(s, l + 1e-9);
}

TEST(LeaveOneOut, SandwichOverManyShapes) {
    Rng rng = make_rng(7);
    for (int t = 0; t < 300; ++t) {
        const Eigen::Index k = 1 + t % 16, n = k + (t * 7) % (65 - k);
        Eigen::MatrixXd m = gaussian_matrix(rng, n, k);
        if (t % 3 == 0 && k > 1) m.col(k - 1) = m.col(0) + 1e-7 * gaussian_vector(rng, n);
        const double s = singular_values(m).minCoeff(), l = leave_one_out(m);
        EXPECT_GE(s - l / std::sqrt(static_cast<double>(k)), -1e-9) << n << "x" << k;
        EXPECT_GE(l - s, -1e-9) << n << "x" << k;
    }
}

TEST(LeastSquares, Cases) {
    Rng rng = make_rng(8);
    const Eigen::VectorXd b = gaussian_vector(rng, 4);
    EXPECT_LE((solve_least_squares(Eigen::MatrixXd::Identity(4, 4), b) - b).norm(), 1e-15);

    const Eigen::MatrixXd a = gaussian_matrix(rng, 10, 3);
    const Eigen::VectorXd x = gaussian_vector(rng, 3);
    const Eigen::VectorXd got = solve_least_squares(a, Eigen::VectorXd(a * x));
    EXPECT_LE((got - x).norm(), 1e-12);
    EXPECT_LE((a * got - a * x).norm(), 1e-12);

    EXPECT_EQ(solve_least_squares(Eigen::MatrixXd::Zero(4, 2), b).norm(), 0.0);
}

TEST(NullSpace, OrthogonalToRows) {
    Rng rng = make_rng(9);
    const Eigen::MatrixXd m = gaussian_matrix(rng, 3, 7);
    const Eigen::MatrixXd z = null_space(m);
    EXPECT_EQ(z.cols(), 4);
    EXPECT_LE((m * z).norm(), 1e-12);
    EXPECT_LE((z.transpose() * z - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
    EXPECT_EQ(orthonormal_basis(m.transpose()).cols(), 3);
}
