#include "tensordec/smoothed.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

namespace tensordec {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) r *= base;
    return r;
}

ExperimentSummary summarize(std::vector<double> values, double scale) {
    ExperimentSummary s;
    s.quantiles = quantiles(values, {0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0});
    for (double c : default_threshold_grid()) {
        const double threshold = c * scale;
        const auto below = std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; });
        s.fractions.push_back({c, threshold, values.empty() ? 0.0 : static_cast<double>(below) / values.size()});
    }
    s.values = std::move(values);
    return s;
}

}  // namespace

void PerturbationModel::validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw PreconditionError("perturbation scale rho must be positive");
}

Eigen::MatrixXd perturb_matrix(const Eigen::MatrixXd& m, double rho, Rng& rng) {
    if (m.rows() == 0) return m;
    return m + gaussian_matrix(rng, m.rows(), m.cols(), rho / std::sqrt(static_cast<double>(m.rows())));
}

CpDecomposition perturb_factors(const CpDecomposition& d, const PerturbationModel& model) {
    model.validate();
    const double order = static_cast<double>(d.order());
    std::vector<FactorMatrix> factors = d.factors();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.rank()); ++i) {
        const double w = d.weights()(i);
        const double share = std::pow(std::abs(w), 1.0 / order);
        for (std::size_t m = 0; m < factors.size(); ++m) factors[m].col(i) *= share;
        if (w < 0) factors[0].col(i) = -factors[0].col(i);
    }
    Rng rng = make_rng(model.seed);
    for (auto& f : factors) f = perturb_matrix(f, model.rho, rng);
    return CpDecomposition(std::move(factors)).canonical();
}

std::vector<double> default_threshold_grid() { return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}; }

std::vector<std::pair<double, double>> quantiles(std::vector<double> values, const std::vector<double>& probs) {
    std::vector<std::pair<double, double>> out;
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile probability outside [0,1]");
        const double h = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        out.emplace_back(p, values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]));
    }
    return out;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("log_log_slope needs two equal-length series of size >= 2");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("log_log_slope needs positive values");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("log_log_slope needs at least two distinct x values");
    return (n * sxy - sx * sy) / denom;
}

Eigen::MatrixXd adversarial_base(std::size_t n, std::size_t k, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd base(nn, static_cast<Eigen::Index>(k));
    Eigen::MatrixXd q;
    for (std::size_t i = 0; i < k; ++i) {
        if (i % n == 0) q = random_orthonormal(rng, nn, nn);
        base.col(static_cast<Eigen::Index>(i)) = q.col(static_cast<Eigen::Index>(i % n));
    }
    return base;
}

namespace {

double least_singular_value(const Eigen::MatrixXd& m) {
    const Eigen::VectorXd s = singular_values(m);
    return s.size() ? s(s.size() - 1) : 0.0;
}

}  // namespace

KrSigmaResult kr_sigma_experiment(const KrSigmaConfig& cfg) {
    if (cfg.n < 1 || cfg.k < 1 || cfg.ell < 1 || cfg.trials < 1)
        throw PreconditionError("kr_sigma_experiment needs n, k, l and trials >= 1");
    if (!(cfg.rho > 0.0)) throw PreconditionError("rho must be positive");
    const std::size_t rows = ipow(cfg.n, cfg.ell);
    if (cfg.k > rows)
        throw PreconditionError("k = " + std::to_string(cfg.k) + " exceeds n^l = " + std::to_string(rows) +
                                "; the Khatri-Rao product cannot have full column rank");

    const auto n = static_cast<Eigen::Index>(cfg.n), k = static_cast<Eigen::Index>(cfg.k);
    const Eigen::MatrixXd base = cfg.base == KrBase::zero
                                     ? Eigen::MatrixXd::Zero(n, k)
                                     : adversarial_base(cfg.n, cfg.k, derive_seed(cfg.seed, ~std::uint64_t{0}));
    KrSigmaResult out;
    out.delta = 1.0 - static_cast<double>(cfg.k) / static_cast<double>(rows);
    {
        const std::vector<FactorMatrix> mats(cfg.ell, base);
        out.unperturbed = least_singular_value(khatri_rao(mats));
    }

    std::vector<double> values(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
        Rng rng = make_rng(cfg.seed, t);
        std::vector<FactorMatrix> mats;
        for (std::size_t j = 0; j < cfg.ell; ++j) mats.push_back(perturb_matrix(base, cfg.rho, rng));
        values[t] = least_singular_value(khatri_rao(mats));
    });
    out.summary = summarize(std::move(values), std::pow(cfg.rho, static_cast<double>(cfg.ell)) / static_cast<double>(rows));
    return out;
}

ProjectionResult projection_experiment(const ProjectionConfig& cfg) {
    if (cfg.n < 1 || cfg.ell < 1 || cfg.trials < 1) throw PreconditionError("projection_experiment needs n, l, trials >= 1");
    if (!(cfg.rho > 0.0)) throw PreconditionError("rho must be positive");
    const std::size_t total = ipow(cfg.n, cfg.ell);
    std::size_t dim = total;
    if (cfg.subspace != SubspaceKind::full) {
        if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw PreconditionError("delta must lie in (0, 1]");
        dim = static_cast<std::size_t>(std::ceil(cfg.delta * static_cast<double>(total) - 1e-9));
        if (dim < 1) throw PreconditionError("delta * n^l must be at least 1");
    }
    const auto n = static_cast<Eigen::Index>(cfg.n);
    const double stddev = cfg.rho / std::sqrt(static_cast<double>(cfg.n));

    std::vector<double> values(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
        Rng rng = make_rng(cfg.seed, t);
        Eigen::MatrixXd q;
        if (cfg.subspace == SubspaceKind::random)
            q = random_orthonormal(rng, static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(dim));
        std::vector<Eigen::VectorXd> points;
        for (std::size_t j = 0; j < cfg.ell; ++j) {
            Eigen::VectorXd x =
                cfg.base == BasePoint::zero ? Eigen::VectorXd::Zero(n) : Eigen::VectorXd(random_unit_vector(rng, n));
            points.push_back(x + gaussian_vector(rng, n, stddev));
        }
        const Eigen::VectorXd v = kronecker(points);
        switch (cfg.subspace) {
            case SubspaceKind::random: values[t] = (q.transpose() * v).norm(); break;
            case SubspaceKind::coordinate: values[t] = v.head(static_cast<Eigen::Index>(dim)).norm(); break;
            case SubspaceKind::full: values[t] = v.norm(); break;
        }
    });
    ProjectionResult out;
    out.dimension = dim;
    out.summary = summarize(std::move(values), std::pow(cfg.rho, static_cast<double>(cfg.ell)) / static_cast<double>(total));
    return out;
}

// -------------------------------------------------------------- pivot bases

namespace {

// Restricts the orthonormal basis b to {x in span(b) : x(i) = 0 for i in coords}.
Eigen::MatrixXd restrict_basis(const Eigen::MatrixXd& b, std::span<const Eigen::Index> coords) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(coords.size()), b.cols());
    for (std::size_t i = 0; i < coords.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = b.row(coords[i]);
    // b has orthonormal columns, so an absolute cutoff is the right scale.
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(rows, Eigen::ComputeFullV);
    const Eigen::Index rank = (solver.singularValues().array() > 1e-10).count();
    return b * solver.matrixV().rightCols(b.cols() - rank);
}

Eigen::Index argmax_abs(const Eigen::VectorXd& v) {
    Eigen::Index i = 0;
    v.cwiseAbs().maxCoeff(&i);
    return i;
}

// Scales v so v(pivot) = 1 and clears entries that must vanish, after checking they do.
void finalize_pivot_vector(Eigen::VectorXd& v, Eigen::Index pivot, std::span<const Eigen::Index> zeros, double tol,
                           std::size_t achieved) {
    v /= v(pivot);
    for (Eigen::Index z : zeros) {
        if (std::abs(v(z)) > tol)
            throw PivotError("pivot construction lost exactness (entry " + std::to_string(z) + " is " +
                                 std::to_string(v(z)) + ")",
                             achieved);
        v(z) = 0.0;
    }
}

bool lies_in(const Eigen::MatrixXd& q, const Eigen::VectorXd& v, double tol) {
    return (v - q * (q.transpose() * v)).norm() <= tol * std::max(1.0, v.norm());
}

}  // namespace

PivotBasis build_pivot_basis(const Eigen::MatrixXd& w, double tol) {
    Eigen::MatrixXd b = orthonormal_basis(w, tol);
    const Eigen::Index r = b.cols();
    if (r < 1) throw PreconditionError("build_pivot_basis needs a subspace of dimension at least 1");
    PivotBasis out;
    out.vectors.resize(w.rows(), r);
    std::vector<Eigen::Index> used;
    for (Eigen::Index j = 0; j < r; ++j) {
        if (b.cols() == 0) throw PivotError("restricted subspace became empty", static_cast<std::size_t>(j));
        Eigen::Index p = 0;
        const double leverage = b.rowwise().norm().maxCoeff(&p);
        if (leverage < tol) throw PivotError("restricted subspace is numerically empty", static_cast<std::size_t>(j));
        Eigen::VectorXd v = b * b.row(p).transpose();
        const Eigen::Index pivot = argmax_abs(v);
        finalize_pivot_vector(v, pivot, used, tol, static_cast<std::size_t>(j));
        out.vectors.col(j) = v;
        out.pivots.push_back(static_cast<std::size_t>(pivot));
        used.push_back(pivot);
        const std::array<Eigen::Index, 1> coord{pivot};
        b = restrict_basis(b, coord);
    }
    return out;
}

PivotCheck check_pivot_basis(const PivotBasis& basis, const Eigen::MatrixXd& w, double tol) {
    PivotCheck c;
    const Eigen::MatrixXd q = orthonormal_basis(w);
    const Eigen::Index r = basis.vectors.cols();
    if (static_cast<std::size_t>(r) != basis.pivots.size()) {
        c.distinct = false;
        return c;
    }
    std::vector<std::size_t> sorted = basis.pivots;
    std::sort(sorted.begin(), sorted.end());
    c.distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    for (Eigen::Index j = 0; j < r; ++j) {
        const auto v = basis.vectors.col(j);
        const double sup = v.cwiseAbs().maxCoeff();
        c.max_violation = std::max(c.max_violation, sup - 1.0);
        if (sup > 1.0 + tol) c.bounded = false;
        const double at_pivot = std::abs(v(static_cast<Eigen::Index>(basis.pivots[j])));
        c.max_violation = std::max(c.max_violation, std::abs(at_pivot - 1.0));
        if (std::abs(at_pivot - 1.0) > tol) c.unit_pivot = false;
        for (Eigen::Index e = 0; e < j; ++e) {
            const double z = std::abs(v(static_cast<Eigen::Index>(basis.pivots[e])));
            c.max_violation = std::max(c.max_violation, z);
            if (z > tol) c.zeros = false;
        }
        if (!lies_in(q, v, 1e-8)) c.in_subspace = false;
    }
    return c;
}

PivotBasis2 build_pivot_basis_l2(const Eigen::MatrixXd& w, std::size_t n, double tol) {
    const auto nn = static_cast<Eigen::Index>(n);
    if (w.rows() != nn * nn) throw ShapeError("subspace vectors must have n^2 entries");
    Eigen::MatrixXd b = orthonormal_basis(w, tol);
    if (b.cols() < 1) throw PreconditionError("build_pivot_basis_l2 needs a subspace of dimension at least 1");
    // Candidates with smaller leverage would amplify rounding when normalized.
    const double floor = std::sqrt(tol);

    PivotBasis2 out;
    out.n = n;
    std::vector<Eigen::VectorXd> mats;
    std::vector<Eigen::Index> zeros;  // earlier pivots and every entry of closed rows

    auto accept = [&](Eigen::VectorXd v, Eigen::Index pivot) {
        finalize_pivot_vector(v, pivot, zeros, tol, mats.size());
        mats.push_back(std::move(v));
        out.pivots.emplace_back(static_cast<std::size_t>(pivot / nn), static_cast<std::size_t>(pivot % nn));
        zeros.push_back(pivot);
        const std::array<Eigen::Index, 1> coord{pivot};
        b = restrict_basis(b, coord);
    };

    while (b.cols() > 0 && out.rows.size() < n) {
        Eigen::Index p = 0;
        if (b.rowwise().norm().maxCoeff(&p) < tol) break;
        Eigen::VectorXd v = b * b.row(p).transpose();
        const Eigen::Index first = argmax_abs(v);
        const Eigen::Index row = first / nn;
        out.rows.push_back(static_cast<std::size_t>(row));
        std::size_t count = 0;
        accept(std::move(v), first);
        ++count;

        for (;;) {
            if (b.cols() == 0) break;
            Eigen::Index best = -1;
            double best_leverage = floor;
            for (Eigen::Index col = 0; col < nn; ++col) {
                const Eigen::Index idx = row * nn + col;
                const double leverage = b.row(idx).norm();
                if (leverage < best_leverage) continue;
                const Eigen::VectorXd cand = b * b.row(idx).transpose();
                if (argmax_abs(cand) / nn != row) continue;
                best = idx;
                best_leverage = leverage;
            }
            if (best < 0) break;
            Eigen::VectorXd cand = b * b.row(best).transpose();
            const Eigen::Index pivot = argmax_abs(cand);
            accept(std::move(cand), pivot);
            ++count;
        }
        out.pivots_per_row.push_back(count);

        std::vector<Eigen::Index> row_coords;
        for (Eigen::Index col = 0; col < nn; ++col) row_coords.push_back(row * nn + col);
        if (b.cols() > 0) b = restrict_basis(b, row_coords);
        for (Eigen::Index z : row_coords)
            if (std::find(zeros.begin(), zeros.end(), z) == zeros.end()) zeros.push_back(z);
    }

    out.matrices.resize(nn * nn, static_cast<Eigen::Index>(mats.size()));
    for (std::size_t j = 0; j < mats.size(); ++j) out.matrices.col(static_cast<Eigen::Index>(j)) = mats[j];
    return out;
}

PivotCheck check_pivot_basis_l2(const PivotBasis2& basis, const Eigen::MatrixXd& w, double tol) {
    PivotCheck c;
    const auto nn = static_cast<Eigen::Index>(basis.n);
    const Eigen::MatrixXd q = orthonormal_basis(w);
    const Eigen::Index r = basis.matrices.cols();
    if (static_cast<std::size_t>(r) != basis.pivots.size() || basis.rows.size() != basis.pivots_per_row.size() ||
        std::accumulate(basis.pivots_per_row.begin(), basis.pivots_per_row.end(), std::size_t{0}) !=
            basis.pivots.size()) {
        c.distinct = false;
        return c;
    }
    auto sorted = basis.pivots;
    std::sort(sorted.begin(), sorted.end());
    c.distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    auto sorted_rows = basis.rows;
    std::sort(sorted_rows.begin(), sorted_rows.end());
    if (std::adjacent_find(sorted_rows.begin(), sorted_rows.end()) != sorted_rows.end()) c.distinct = false;

    Eigen::Index j = 0;
    for (std::size_t rpos = 0; rpos < basis.rows.size(); ++rpos) {
        for (std::size_t local = 0; local < basis.pivots_per_row[rpos]; ++local, ++j) {
            const auto m = basis.matrices.col(j);
            const auto [pr, pc] = basis.pivots[static_cast<std::size_t>(j)];
            if (pr != basis.rows[rpos]) c.distinct = false;
            const double sup = m.cwiseAbs().maxCoeff();
            c.max_violation = std::max(c.max_violation, sup - 1.0);
            if (sup > 1.0 + tol) c.bounded = false;
            const double at_pivot = std::abs(m(static_cast<Eigen::Index>(pr) * nn + static_cast<Eigen::Index>(pc)));
            c.max_violation = std::max(c.max_violation, std::abs(at_pivot - 1.0));
            if (std::abs(at_pivot - 1.0) > tol) c.unit_pivot = false;
            for (Eigen::Index e = 0; e < j; ++e) {
                const auto [er, ec] = basis.pivots[static_cast<std::size_t>(e)];
                const double z = std::abs(m(static_cast<Eigen::Index>(er) * nn + static_cast<Eigen::Index>(ec)));
                c.max_violation = std::max(c.max_violation, z);
                if (z > tol) c.zeros = false;
            }
            for (std::size_t earlier = 0; earlier < rpos; ++earlier) {
                const double z =
                    m.segment(static_cast<Eigen::Index>(basis.rows[earlier]) * nn, nn).cwiseAbs().maxCoeff();
                c.max_violation = std::max(c.max_violation, z);
                if (z > tol) c.zeros = false;
            }
            if (!lies_in(q, m, 1e-8)) c.in_subspace = false;
        }
    }
    return c;
}

}  // namespace tensordec
