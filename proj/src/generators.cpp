#include "tensordec/generators.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"

#include <cmath>
#include <limits>

namespace tensordec {

FactorMatrix random_factor_matrix(Rng& rng, Eigen::Index n, Eigen::Index k) {
    return gaussian_matrix(rng, n, k, 1.0 / std::sqrt(static_cast<double>(n)));
}

CpDecomposition random_decomposition(Rng& rng, const Shape& shape, std::size_t k) {
    std::vector<FactorMatrix> factors;
    for (std::size_t n : shape)
        factors.push_back(random_factor_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
    return CpDecomposition(std::move(factors));
}

double min_direction_separation(const FactorMatrix& m) {
    double best = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd unit = m.colwise().normalized();
    for (Eigen::Index i = 0; i < unit.cols(); ++i)
        for (Eigen::Index j = i + 1; j < unit.cols(); ++j)
            best = std::min({best, (unit.col(i) - unit.col(j)).norm(), (unit.col(i) + unit.col(j)).norm()});
    return best;
}

CpDecomposition constrained_decomposition(Rng& rng, const Shape& shape, std::size_t k,
                                          const InstanceConstraints& constraints) {
    std::vector<FactorMatrix> factors;
    for (std::size_t mode = 0; mode < shape.size(); ++mode) {
        const auto n = static_cast<Eigen::Index>(shape[mode]);
        const bool last = mode + 1 == shape.size();
        bool accepted = false;
        for (int draw = 0; draw < constraints.max_draws && !accepted; ++draw) {
            FactorMatrix f = random_factor_matrix(rng, n, static_cast<Eigen::Index>(k));
            if (static_cast<std::size_t>(n) >= k && condition_number(f) > constraints.max_condition) continue;
            if (last && min_direction_separation(f) < constraints.min_separation) continue;
            factors.push_back(std::move(f));
            accepted = true;
        }
        if (!accepted)
            throw PreconditionError("no factor matrix for mode " + std::to_string(mode + 1) +
                                    " met the constraints within " + std::to_string(constraints.max_draws) + " draws");
    }
    return CpDecomposition(std::move(factors));
}

OrthogonalInstance orthogonal_instance(Rng& rng, std::size_t n, const Eigen::VectorXd& lambdas) {
    const Eigen::Index k = lambdas.size();
    if (static_cast<std::size_t>(k) > n) throw PreconditionError("more orthonormal vectors than dimensions");
    const Eigen::MatrixXd v = random_orthonormal(rng, static_cast<Eigen::Index>(n), k);
    const CpDecomposition d({v, v, v}, lambdas);
    return {synthesize(d), lambdas, v};
}

DenseTensor add_uniform_noise(const DenseTensor& t, double magnitude, Rng& rng) {
    std::uniform_real_distribution<double> dist(-magnitude, magnitude);
    std::vector<double> data(t.data().begin(), t.data().end());
    if (magnitude > 0)
        for (double& x : data) x += dist(rng);
    return DenseTensor(t.shape(), std::move(data));
}

}  // namespace tensordec
