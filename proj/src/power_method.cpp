#include "tensordec/power_method.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace tensordec {

namespace {

constexpr int kDegenerateRestarts = 10;
constexpr double kDegenerateNorm = 1e-14;

void check_cubic(const DenseTensor& t) {
    if (t.order() != 3 || t.dim(0) != t.dim(1) || t.dim(1) != t.dim(2))
        throw ShapeError("expected an order-3 tensor with equal mode sizes");
}

}  // namespace

void PowerConfig::validate() const {
    if (!(tol > 0.0)) throw PreconditionError("power method tolerance must be positive");
    if (max_iters < 1) throw PreconditionError("max_iters must be at least 1");
    if (restarts < 1) throw PreconditionError("restarts must be at least 1");
}

void check_symmetric(const DenseTensor& t, double rel_tol) {
    check_cubic(t);
    const std::size_t n = t.dim(0);
    const double bound = rel_tol * max_abs(t);
    const auto data = t.data();
    auto at = [&](std::size_t i, std::size_t j, std::size_t l) { return data[(i * n + j) * n + l]; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l) {
                const double v = at(i, j, l);
                if (std::abs(v - at(j, i, l)) > bound || std::abs(v - at(i, l, j)) > bound)
                    throw PreconditionError("tensor is not symmetric within " + std::to_string(rel_tol) +
                                            " relative at (" + std::to_string(i) + "," + std::to_string(j) + "," +
                                            std::to_string(l) + ")");
            }
}

namespace {

PowerIterate iterate(const DenseTensor& t, std::uint64_t seed, int max_iters, double tol) {
    const Eigen::Index n = static_cast<Eigen::Index>(t.dim(0));
    for (int start = 0; start < kDegenerateRestarts; ++start) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(start));
        PowerIterate out;
        out.vector = random_unit_vector(rng, n);
        bool degenerate = false;
        for (int it = 1; it <= max_iters; ++it) {
            const Eigen::VectorXd u = contract_two(t, out.vector);
            const double norm = u.norm();
            if (norm < kDegenerateNorm) {
                degenerate = true;
                break;
            }
            const Eigen::VectorXd next = u / norm;
            const double step = (next - out.vector).norm();
            out.vector = next;
            out.iterations = it;
            if (step < tol) {
                out.converged = true;
                break;
            }
        }
        if (degenerate) continue;
        out.lambda = out.vector.dot(contract_two(t, out.vector));
        return out;
    }
    throw DegeneracyError("power iteration: T(., z, z) vanished from " + std::to_string(kDegenerateRestarts) +
                          " random starts");
}

}  // namespace

PowerIterate power_iterate(const DenseTensor& t, std::uint64_t seed, int max_iters, double tol) {
    check_symmetric(t);
    if (max_iters < 1 || !(tol > 0.0)) throw PreconditionError("power_iterate needs max_iters >= 1 and tol > 0");
    return iterate(t, seed, max_iters, tol);
}

OrthogonalDecomposition deflate_decompose(const DenseTensor& t, std::size_t k, const PowerConfig& cfg) {
    cfg.validate();
    check_symmetric(t);
    const std::size_t n = t.dim(0);
    DenseTensor residual = t;
    Eigen::VectorXd lambdas(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));

    for (std::size_t round = 0; round < k; ++round) {
        const auto restarts = static_cast<std::size_t>(cfg.restarts);
        std::vector<std::optional<PowerIterate>> runs(restarts);
        parallel_for(restarts, cfg.threads, [&](std::size_t s) {
            try {
                PowerIterate r = iterate(residual, derive_seed(cfg.seed, round * restarts + s), cfg.max_iters,
                                               cfg.tol);
                if (r.converged) runs[s] = std::move(r);
            } catch (const DegeneracyError&) {
            }
        });
        const PowerIterate* best = nullptr;
        for (const auto& r : runs)
            if (r && (!best || std::abs(r->lambda) > std::abs(best->lambda))) best = &*r;
        if (!best)
            throw DegeneracyError("deflation round " + std::to_string(round + 1) + ": no restart converged within " +
                                  std::to_string(cfg.max_iters) + " iterations");
        Eigen::VectorXd z = best->vector;
        double lambda = best->lambda;
        if (lambda < 0) {
            z = -z;
            lambda = -lambda;
        }
        lambdas(static_cast<Eigen::Index>(round)) = lambda;
        vectors.col(static_cast<Eigen::Index>(round)) = z;
        residual = residual - lambda * outer_product({z, z, z});
    }

    std::vector<Eigen::Index> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(lambdas(a)) > std::abs(lambdas(b)); });
    OrthogonalDecomposition out;
    out.lambdas.resize(static_cast<Eigen::Index>(k));
    out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        out.lambdas(static_cast<Eigen::Index>(i)) = lambdas(order[i]);
        out.vectors.col(static_cast<Eigen::Index>(i)) = vectors.col(order[i]);
    }
    out.residual = frobenius_norm(residual);
    return out;
}

std::size_t estimate_whitening_rank(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ShapeError("whitening matrix must be square");
    if (m.size() == 0) return 0;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
    const double top = ev(ev.size() - 1);
    if (!(top > 0)) return 0;
    return static_cast<std::size_t>((ev.array() > 1e-8 * top).count());
}

Whitening whiten(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t k) {
    check_symmetric(t);
    const Eigen::Index n = static_cast<Eigen::Index>(t.dim(0));
    if (m.rows() != n || m.cols() != n) throw ShapeError("whitening matrix must be n x n with n the tensor side");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw PreconditionError("whitening matrix is not symmetric");
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    if (kk > n) throw PreconditionError("whitening rank exceeds the dimension");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const Eigen::VectorXd& ev = solver.eigenvalues();  // ascending
    const double top = n ? ev(n - 1) : 0.0;
    if (kk > 0 && (!(top > 0) || ev(n - kk) <= 1e-8 * top))
        throw PreconditionError("whitening matrix has numerical rank below " + std::to_string(k));

    Eigen::MatrixXd e(n, kk);
    Eigen::VectorXd lambda(kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
        e.col(i) = solver.eigenvectors().col(n - 1 - i);
        lambda(i) = ev(n - 1 - i);
    }
    Whitening out{t, e * lambda.cwiseSqrt().cwiseInverse().asDiagonal(), e * lambda.cwiseSqrt().asDiagonal()};
    const Eigen::MatrixXd wt = out.transform.transpose();
    for (std::size_t mode = 0; mode < 3; ++mode) out.tensor = mode_product(out.tensor, mode, wt);
    return out;
}

Eigen::MatrixXd unwhiten(const Whitening& w, const OrthogonalDecomposition& d) {
    if (d.vectors.rows() != w.back_map.cols()) throw ShapeError("decomposition does not live in the whitened space");
    return w.back_map * d.vectors * d.lambdas.asDiagonal();
}

}  // namespace tensordec
