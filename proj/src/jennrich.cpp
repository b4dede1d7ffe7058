#include "tensordec/jennrich.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/random.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>

namespace tensordec {

void JennrichConfig::validate() const {
    if (!(eig_pair_tol > 0.0 && eig_pair_tol < 1.0)) throw PreconditionError("eig_pair_tol must lie in (0,1)");
    if (max_retries < 1) throw PreconditionError("max_retries must be at least 1");
    if (!(min_sep >= 0.0)) throw PreconditionError("min_sep must be nonnegative");
}

// ------------------------------------------------------------------ matching

namespace {

// Kuhn's augmenting path search restricted to allowed edges.
bool augment(std::size_t row, const std::vector<std::vector<char>>& allowed, std::vector<char>& visited,
             std::vector<std::ptrdiff_t>& col_owner) {
    for (std::size_t c = 0; c < allowed.size(); ++c) {
        if (!allowed[row][c] || visited[c]) continue;
        visited[c] = 1;
        if (col_owner[c] < 0 || augment(static_cast<std::size_t>(col_owner[c]), allowed, visited, col_owner)) {
            col_owner[c] = static_cast<std::ptrdiff_t>(row);
            return true;
        }
    }
    return false;
}

bool has_perfect_matching(const Eigen::MatrixXd& cost, double threshold) {
    const std::size_t n = static_cast<std::size_t>(cost.rows());
    std::vector<std::vector<char>> allowed(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            allowed[i][j] = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= threshold;
    std::vector<std::ptrdiff_t> owner(n, -1);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<char> visited(n, 0);
        if (!augment(r, allowed, visited, owner)) return false;
    }
    return true;
}

// Hungarian method (potentials form), minimizes the total cost.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
    const std::size_t n = static_cast<std::size_t>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

}  // namespace

std::vector<std::size_t> bottleneck_assignment(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ShapeError("assignment needs a square cost matrix");
    const std::size_t n = static_cast<std::size_t>(cost.rows());
    if (n == 0) return {};
    if (!cost.allFinite()) throw std::invalid_argument("assignment costs must be finite");

    std::vector<double> levels(cost.data(), cost.data() + cost.size());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::size_t lo = 0, hi = levels.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (has_perfect_matching(cost, levels[mid]))
            hi = mid;
        else
            lo = mid + 1;
    }
    const double threshold = levels[lo];

    // Among bottleneck-optimal assignments take the cheapest in total.
    const double penalty = (cost.cwiseAbs().sum() + 1.0) * static_cast<double>(n + 1);
    const Eigen::MatrixXd restricted = cost.unaryExpr([&](double c) { return c <= threshold ? c : penalty; });
    return hungarian(restricted);
}

namespace {

Eigen::MatrixXd term_matrix(const CpDecomposition& d) {
    const Shape shape = d.shape();
    const std::size_t size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    Eigen::MatrixXd terms(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(d.rank()));
    for (std::size_t i = 0; i < d.rank(); ++i) terms.col(static_cast<Eigen::Index>(i)) = d.term(i).vector();
    return terms;
}

}  // namespace

void attach_truth(RecoveryReport& report, const CpDecomposition& found, const CpDecomposition& truth) {
    if (found.rank() != truth.rank())
        throw ShapeError("match_terms: rank mismatch (" + std::to_string(found.rank()) + " vs " +
                         std::to_string(truth.rank()) + ")");
    if (found.shape() != truth.shape()) throw ShapeError("match_terms: shape mismatch");
    const Eigen::MatrixXd f = term_matrix(found), t = term_matrix(truth);
    const Eigen::Index k = static_cast<Eigen::Index>(found.rank());
    Eigen::MatrixXd cost(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) cost(i, j) = (f.col(i) - t.col(j)).norm();
    report.permutation = bottleneck_assignment(cost);
    report.term_errors.resize(static_cast<std::size_t>(k));
    report.max_error = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double e = cost(i, static_cast<Eigen::Index>(report.permutation[static_cast<std::size_t>(i)]));
        report.term_errors[static_cast<std::size_t>(i)] = e;
        report.max_error = std::max(report.max_error, e);
    }
    report.truth_norm = frobenius_norm(synthesize(truth));
}

RecoveryReport match_terms(const CpDecomposition& found, const CpDecomposition& truth) {
    RecoveryReport report;
    attach_truth(report, found, truth);
    return report;
}

ColumnMatch match_columns(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw ShapeError("match_columns: shape mismatch");
    const Eigen::Index k = truth.cols();
    Eigen::MatrixXd cost(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) cost(i, j) = (estimate.col(i) - truth.col(j)).norm();
    ColumnMatch out;
    out.permutation = bottleneck_assignment(cost);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double e = cost(i, static_cast<Eigen::Index>(out.permutation[static_cast<std::size_t>(i)]));
        out.errors.push_back(e);
        out.max_error = std::max(out.max_error, e);
    }
    return out;
}

// ---------------------------------------------------------- separation check

SeparationDiagnostic separation_diagnostic(const FactorMatrix& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (w.rows() != a.size() || w.rows() != b.size()) throw ShapeError("separation_diagnostic: length mismatch");
    SeparationDiagnostic out;
    const Eigen::Index k = w.cols();
    Eigen::VectorXd ratios(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double denom = w.col(i).dot(b);
        if (std::abs(denom) <= 1e-14 * w.col(i).norm() * b.norm()) {
            out.degenerate_denominator = true;
            return out;
        }
        ratios(i) = w.col(i).dot(a) / denom;
    }
    out.min_ratio_magnitude = k ? ratios.cwiseAbs().minCoeff() : 0.0;
    out.min_ratio_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i + 1; j < k; ++j)
            out.min_ratio_gap = std::min(out.min_ratio_gap, std::abs(ratios(i) - ratios(j)));
    if (k < 2) out.min_ratio_gap = std::numeric_limits<double>::infinity();
    return out;
}

// ---------------------------------------------------------------- algorithm

namespace {

std::vector<Eigen::Index> top_by_magnitude(const Eigen::VectorXcd& values, std::size_t k) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), 0);
    // ties keep index order
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return std::abs(values(x)) > std::abs(values(y)); });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

// Rotates a complex eigenvector so its largest entry is real and positive,
// returns the real part (normalized) and reports the discarded imaginary norm.
Eigen::VectorXd realify(const Eigen::VectorXcd& x, double& imaginary) {
    Eigen::Index pivot = 0;
    x.cwiseAbs().maxCoeff(&pivot);
    const std::complex<double> phase = x(pivot) / std::abs(x(pivot));
    const Eigen::VectorXcd rotated = x * std::conj(phase);
    imaginary = rotated.imag().norm();
    Eigen::VectorXd re = rotated.real();
    const double n = re.norm();
    return n > 0 ? Eigen::VectorXd(re / n) : re;
}

double safe_condition(const Eigen::MatrixXd& m) {
    if (m.cols() > m.rows()) return std::numeric_limits<double>::infinity();
    return condition_number(m);
}

constexpr double kAutoRankTol = 1e-6;

// The pseudoinverse drops the same relative tail the count ignores, so small
// noise in M_b is not inverted into spurious O(1) eigenvalues.
std::size_t estimate_rank(const Eigen::MatrixXd& ma, const Eigen::MatrixXd& mb) {
    const EigResult e = eig_nonsymmetric(ma * pseudoinverse(mb, kAutoRankTol));
    if (e.eigenvalues.size() == 0) return 0;
    const double top = e.eigenvalues.cwiseAbs().maxCoeff();
    if (top == 0.0) return 0;
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < e.eigenvalues.size(); ++i)
        if (std::abs(e.eigenvalues(i)) > kAutoRankTol * top) ++count;
    return count;
}

}  // namespace

JennrichResult jennrich_decompose(const DenseTensor& t, const JennrichConfig& cfg) {
    cfg.validate();
    if (t.order() != 3) throw ShapeError("jennrich_decompose needs an order-3 tensor");
    const Eigen::Index n = static_cast<Eigen::Index>(t.dim(0)), m = static_cast<Eigen::Index>(t.dim(1)),
                       p = static_cast<Eigen::Index>(t.dim(2));
    const std::size_t max_rank = static_cast<std::size_t>(std::min(n, m));
    if (cfg.rank && *cfg.rank > max_rank)
        throw PreconditionError("rank " + std::to_string(*cfg.rank) + " exceeds min(n, m) = " + std::to_string(max_rank) +
                                "; the first two factor matrices cannot have full column rank");

    const auto empty_result = [&](int attempts) {
        RecoveryReport report;
        report.attempts = attempts;
        return JennrichResult{CpDecomposition({FactorMatrix(n, 0), FactorMatrix(m, 0), FactorMatrix(p, 0)},
                                              Eigen::VectorXd(0)),
                              report};
    };
    if (cfg.rank && *cfg.rank == 0) return empty_result(0);

    const double stddev = 1.0 / std::sqrt(static_cast<double>(p));
    const auto unfolding = leading_unfolding(t, 2);
    std::ostringstream diagnostics;

    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(attempt));
        const Eigen::VectorXd a = gaussian_vector(rng, p, stddev);
        const Eigen::VectorXd b = gaussian_vector(rng, p, stddev);
        const Eigen::MatrixXd ma = slice_combination(t, a);
        const Eigen::MatrixXd mb = slice_combination(t, b);

        const std::size_t k = cfg.rank ? *cfg.rank : std::min(estimate_rank(ma, mb), max_rank);
        if (k == 0) return empty_result(attempt + 1);

        const EigResult eu = eig_nonsymmetric(ma * pseudoinverse_rank(mb, k));
        const EigResult ev = eig_nonsymmetric((pseudoinverse_rank(ma, k) * mb).transpose());
        const auto iu = top_by_magnitude(eu.eigenvalues, k);
        const auto iv = top_by_magnitude(ev.eigenvalues, k);
        const Eigen::Index kk = static_cast<Eigen::Index>(k);

        double gap = std::numeric_limits<double>::infinity(), magnitude = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            magnitude = std::min(magnitude, std::abs(eu.eigenvalues(iu[i])));
            for (std::size_t j = i + 1; j < k; ++j)
                gap = std::min(gap, std::abs(eu.eigenvalues(iu[i]) - eu.eigenvalues(iu[j])));
        }
        if (gap < cfg.min_sep || magnitude < cfg.min_sep || iu.size() < k || iv.size() < k) {
            diagnostics << "attempt " << attempt << ": eigenvalue separation " << gap << ", magnitude " << magnitude
                        << " below min_sep " << cfg.min_sep << "; ";
            continue;
        }

        Eigen::MatrixXd cost(kk, kk);
        for (Eigen::Index i = 0; i < kk; ++i)
            for (Eigen::Index j = 0; j < kk; ++j)
                cost(i, j) = std::abs(eu.eigenvalues(iu[static_cast<std::size_t>(i)]) *
                                          ev.eigenvalues(iv[static_cast<std::size_t>(j)]) -
                                      1.0);
        if (!cost.allFinite()) {
            diagnostics << "attempt " << attempt << ": non-finite eigenvalues; ";
            continue;
        }
        const auto pairing = bottleneck_assignment(cost);
        double defect = 0.0;
        for (Eigen::Index i = 0; i < kk; ++i)
            defect = std::max(defect, cost(i, static_cast<Eigen::Index>(pairing[static_cast<std::size_t>(i)])));
        if (defect > cfg.eig_pair_tol) {
            diagnostics << "attempt " << attempt << ": no reciprocal partner within " << cfg.eig_pair_tol
                        << " (worst pair defect " << defect << "); ";
            continue;
        }

        FactorMatrix u(n, kk), v(m, kk);
        double imaginary = 0.0;
        for (Eigen::Index i = 0; i < kk; ++i) {
            double im_u = 0.0, im_v = 0.0;
            u.col(i) = realify(eu.eigenvectors.col(iu[static_cast<std::size_t>(i)]), im_u);
            v.col(i) = realify(ev.eigenvectors.col(iv[pairing[static_cast<std::size_t>(i)]]), im_v);
            imaginary = std::max({imaginary, im_u, im_v});
        }

        // T(i,j,:) = sum_r u_r(i) v_r(j) w_r: the (nm x k) Khatri-Rao coefficient
        // matrix is shared by all p right-hand sides of the stacked system.
        const FactorMatrix w = solve_least_squares(khatri_rao(u, v), Eigen::MatrixXd(unfolding)).transpose();

        CpDecomposition found = CpDecomposition({u, v, w}).canonical();
        RecoveryReport report;
        report.eigenvalue_separation = k > 1 ? gap : std::numeric_limits<double>::infinity();
        report.eigenvalue_magnitude = magnitude;
        report.max_imaginary = imaginary;
        report.max_pairing_defect = defect;
        report.attempts = attempt + 1;
        for (const auto& f : found.factors()) report.condition_numbers.push_back(safe_condition(f));
        return {std::move(found), std::move(report)};
    }
    throw DegeneracyError("jennrich: no usable random slice combination after " + std::to_string(cfg.max_retries) +
                              " attempts",
                          diagnostics.str());
}

}  // namespace tensordec
