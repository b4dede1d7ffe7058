#include "tensordec/linalg.hpp"

#include "tensordec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tensordec {

SvdResult svd(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return {Eigen::MatrixXd(m.rows(), 0), Eigen::VectorXd(0), Eigen::MatrixXd(m.cols(), 0)};
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return Eigen::VectorXd(0);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

double operator_norm(const Eigen::MatrixXd& m) {
    const Eigen::VectorXd s = singular_values(m);
    return s.size() ? s(0) : 0.0;
}

namespace {

Eigen::MatrixXd truncated_inverse(const SvdResult& s, Eigen::Index keep, double rank_tol) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.v.rows(), s.u.rows());
    if (s.singular_values.size() == 0) return out;
    const double cutoff = rank_tol * s.singular_values(0);
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(keep, s.singular_values.size()); ++i) {
        const double sigma = s.singular_values(i);
        if (sigma <= cutoff || sigma == 0.0) break;
        out.noalias() += (s.v.col(i) / sigma) * s.u.col(i).transpose();
    }
    return out;
}

}  // namespace

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& m, double rank_tol) {
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw PreconditionError("pseudoinverse: rank_tol must lie in (0,1)");
    const SvdResult s = svd(m);
    return truncated_inverse(s, s.singular_values.size(), rank_tol);
}

Eigen::MatrixXd pseudoinverse_rank(const Eigen::MatrixXd& m, std::size_t rank, double rank_tol) {
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw PreconditionError("pseudoinverse: rank_tol must lie in (0,1)");
    return truncated_inverse(svd(m), static_cast<Eigen::Index>(rank), rank_tol);
}

EigResult eig_nonsymmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ShapeError("eig_nonsymmetric needs a square matrix");
    if (m.size() == 0) return {Eigen::VectorXcd(0), Eigen::MatrixXcd(0, 0)};
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, true);
    EigResult out{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index i = 0; i < out.eigenvectors.cols(); ++i) {
        const double n = out.eigenvectors.col(i).norm();
        if (n > 0) out.eigenvectors.col(i) /= n;
    }
    return out;
}

double condition_number(const Eigen::MatrixXd& m) {
    if (m.cols() > m.rows()) throw PreconditionError("condition_number: more columns than rows");
    if (m.cols() == 0) return 1.0;
    const Eigen::VectorXd s = singular_values(m);
    const double smin = s(s.size() - 1);
    // singular values below roundoff of sigma_1 are indistinguishable from zero
    const double floor = std::numeric_limits<double>::epsilon() * static_cast<double>(m.rows()) * s(0);
    if (smin <= floor) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

double leave_one_out(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows(), k = m.cols();
    if (k == 0) throw PreconditionError("leave_one_out needs at least one column");
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::VectorXd col = m.col(i);
        if (k > 1) {
            Eigen::MatrixXd others(n, k - 1);
            others << m.leftCols(i), m.rightCols(k - 1 - i);
            const Eigen::Index span_dim = std::min(n, k - 1);
            // Householder Q spans the column space of `others` up to backward error,
            // however badly conditioned the columns are.
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(others);
            const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, span_dim);
            col -= q * (q.transpose() * col);
        }
        best = std::min(best, col.norm());
    }
    return best;
}

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rank_tol) {
    if (a.rows() != b.size()) throw ShapeError("solve_least_squares: row count mismatch");
    return pseudoinverse(a, rank_tol) * b;
}

Eigen::MatrixXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rank_tol) {
    if (a.rows() != b.rows()) throw ShapeError("solve_least_squares: row count mismatch");
    return pseudoinverse(a, rank_tol) * b;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m, double rank_tol) {
    const SvdResult s = svd(m);
    Eigen::Index r = 0;
    if (s.singular_values.size() > 0 && s.singular_values(0) > 0) {
        const double cutoff = rank_tol * s.singular_values(0);
        while (r < s.singular_values.size() && s.singular_values(r) > cutoff) ++r;
    }
    return s.u.leftCols(r);
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& m, double rank_tol) {
    const Eigen::Index c = m.cols();
    if (m.rows() == 0 || c == 0) return Eigen::MatrixXd::Identity(c, c);
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(m, Eigen::ComputeFullV);
    const Eigen::VectorXd& s = solver.singularValues();
    Eigen::Index r = 0;
    if (s(0) > 0) {
        const double cutoff = rank_tol * s(0);
        while (r < s.size() && s(r) > cutoff) ++r;
    }
    return solver.matrixV().rightCols(c - r);
}

}  // namespace tensordec
