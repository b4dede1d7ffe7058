#include "tensordec/moments.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/overcomplete.hpp"
#include "tensordec/power_method.hpp"
#include "tensordec/random.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace tensordec {

namespace {

std::size_t block_count(std::size_t count) { return (count + kSampleBlock - 1) / kSampleBlock; }

std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) r *= base;
    return r;
}

double signed_root(double x, std::size_t degree) {
    const double r = std::pow(std::abs(x), 1.0 / static_cast<double>(degree));
    return x < 0 ? -r : r;
}

}  // namespace

// ------------------------------------------------------------------- GMM

void GmmParams::validate() const {
    if (means.cols() < 1 || means.rows() < 1) throw PreconditionError("a mixture needs k >= 1 means of dimension >= 1");
    if (!means.allFinite()) throw std::invalid_argument("means must be finite");
}

GmmParams random_gmm(Rng& rng, std::size_t n, std::size_t k, double norm) {
    if (n < 1 || k < 1) throw PreconditionError("random_gmm needs n, k >= 1");
    const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(k);
    if (k <= n) return {norm * random_orthonormal(rng, rows, cols)};
    Eigen::MatrixXd means(rows, cols);
    for (Eigen::Index i = 0; i < cols; ++i) means.col(i) = norm * random_unit_vector(rng, rows);
    return {means};
}

Eigen::MatrixXd gmm_sample(const GmmParams& params, std::size_t count, std::uint64_t seed, unsigned threads) {
    params.validate();
    if (count < 1) throw PreconditionError("gmm_sample needs at least one sample");
    const Eigen::Index n = static_cast<Eigen::Index>(params.n());
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(count));
    parallel_for(block_count(count), threads, [&](std::size_t b) {
        Rng rng = make_rng(seed, b);
        std::uniform_int_distribution<Eigen::Index> pick(0, params.means.cols() - 1);
        std::normal_distribution<double> noise(0.0, 1.0);
        const std::size_t end = std::min(count, (b + 1) * kSampleBlock);
        for (std::size_t s = b * kSampleBlock; s < end; ++s) {
            const Eigen::Index j = pick(rng);
            auto col = out.col(static_cast<Eigen::Index>(s));
            for (Eigen::Index i = 0; i < n; ++i) col(i) = params.means(i, j) + noise(rng);
        }
    });
    return out;
}

MomentEstimate gmm_statistic_t3(const Eigen::MatrixXd& samples, unsigned threads) {
    const Eigen::Index n = samples.rows();
    const std::size_t count = static_cast<std::size_t>(samples.cols());
    if (n < 1 || count < 1) throw PreconditionError("gmm_statistic_t3 needs n >= 1 and at least one sample");
    const std::size_t blocks = block_count(count);
    std::vector<Eigen::VectorXd> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(n * n * n);
        const std::size_t end = std::min(count, (b + 1) * kSampleBlock);
        for (std::size_t s = b * kSampleBlock; s < end; ++s) {
            const Eigen::VectorXd x = samples.col(static_cast<Eigen::Index>(s));
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) acc.segment((i * n + j) * n, n) += (x(i) * x(j)) * x;
        }
        partial[b] = std::move(acc);
    });
    Eigen::VectorXd third = Eigen::VectorXd::Zero(n * n * n);
    for (const auto& p : partial) third += p;
    third /= static_cast<double>(count);
    const Eigen::VectorXd mean = samples.rowwise().mean();

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index l = 0; l < n; ++l) {
                double c = 0.0;
                if (j == l) c += mean(i);
                if (i == l) c += mean(j);
                if (i == j) c += mean(l);
                third((i * n + j) * n + l) -= c;
            }
    const auto un = static_cast<std::size_t>(n);
    return {DenseTensor({un, un, un}, std::vector<double>(third.data(), third.data() + third.size())), count,
            "mean(x(x)x(x)x) - sym3(mean(x)(x)I)"};
}

Eigen::MatrixXd gmm_statistic_m2(const Eigen::MatrixXd& samples) {
    if (samples.cols() < 1) throw PreconditionError("gmm_statistic_m2 needs at least one sample");
    return samples * samples.transpose() / static_cast<double>(samples.cols()) -
           Eigen::MatrixXd::Identity(samples.rows(), samples.rows());
}

DenseTensor gmm_statistic_exact(const GmmParams& params, std::size_t order) {
    params.validate();
    if (order < 1) throw PreconditionError("statistic order must be positive");
    std::vector<FactorMatrix> factors(order, params.means);
    const Eigen::VectorXd weights = Eigen::VectorXd::Constant(params.means.cols(), 1.0 / static_cast<double>(params.k()));
    return synthesize(CpDecomposition(std::move(factors), weights));
}

Eigen::MatrixXd gmm_second_moment_exact(const GmmParams& params) {
    params.validate();
    return params.means * params.means.transpose() / static_cast<double>(params.k());
}

namespace {

// Mean from the canonical term w * f_1 (x) ... (x) f_l of (1/k) mu^{(x)l}.
Eigen::MatrixXd means_from_terms(const CpDecomposition& d, std::size_t k) {
    const std::size_t order = d.order();
    Eigen::MatrixXd means(d.factor(0).rows(), static_cast<Eigen::Index>(d.rank()));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.rank()); ++i) {
        const Eigen::VectorXd first = d.factor(0).col(i);
        Eigen::VectorXd direction = first;
        double weight = d.weights()(i);
        for (std::size_t m = 1; m < order; ++m) {
            const Eigen::VectorXd f = d.factor(m).col(i);
            const double s = f.dot(first) < 0 ? -1.0 : 1.0;
            direction += s * f;
            weight *= s;
        }
        direction.normalize();
        means.col(i) = signed_root(static_cast<double>(k) * weight, order) * direction;
    }
    return means;
}

}  // namespace

GmmLearnResult gmm_learn_from_moments(const DenseTensor& statistic, const std::optional<Eigen::MatrixXd>& second,
                                      const GmmLearnConfig& cfg) {
    const std::size_t order = statistic.order();
    if (order < 3 || order % 2 == 0)
        throw PreconditionError("mean recovery needs an odd statistic order of at least 3 (signs are lost otherwise)");
    for (std::size_t m = 1; m < order; ++m)
        if (statistic.dim(m) != statistic.dim(0)) throw ShapeError("the statistic must have equal mode sizes");
    if (cfg.k < 1) throw PreconditionError("k must be at least 1");

    JennrichConfig jcfg;
    jcfg.rank = cfg.k;
    jcfg.seed = cfg.seed;

    if (cfg.method == DecompositionMethod::power) {
        if (order != 3) throw PreconditionError("the power method handles order-3 statistics only");
        if (!second) throw PreconditionError("the power method needs the second-moment matrix for whitening");
        const Whitening w = whiten(statistic, *second, cfg.k);
        PowerConfig pcfg;
        pcfg.seed = cfg.seed;
        pcfg.threads = cfg.threads;
        const OrthogonalDecomposition d = deflate_decompose(w.tensor, cfg.k, pcfg);
        GmmLearnResult out;
        // Shared weights 1/k: lambda_i = sqrt(k) and mu_i = lambda_i B y_i.
        out.means = unwhiten(w, d);
        out.report.attempts = 1;
        return out;
    }

    JennrichResult r = order == 3 ? jennrich_decompose(statistic, jcfg)
                                  : overcomplete_decompose(statistic, default_plan(statistic.shape()), jcfg);
    return {means_from_terms(r.decomposition, cfg.k), std::move(r.report)};
}

GmmLearnResult gmm_learn(const Eigen::MatrixXd& samples, const GmmLearnConfig& cfg) {
    if (samples.cols() < 1) throw PreconditionError("gmm_learn needs samples");
    if (cfg.k == 1) {
        GmmLearnResult out;
        out.means = samples.rowwise().mean();
        return out;
    }
    const MomentEstimate t3 = gmm_statistic_t3(samples, cfg.threads);
    std::optional<Eigen::MatrixXd> m2;
    if (cfg.method == DecompositionMethod::power) m2 = gmm_statistic_m2(samples);
    return gmm_learn_from_moments(t3.tensor, m2, cfg);
}

// ------------------------------------------------------------------- HMM

void HmmParams::validate() const {
    const Eigen::Index k = transition.cols();
    if (k < 1 || transition.rows() != k) throw ShapeError("transition matrix must be k x k with k >= 1");
    if (observation.cols() != k || observation.rows() < 1) throw ShapeError("observation matrix must be n x k");
    if (stationary.size() != k) throw ShapeError("stationary distribution must have k entries");
    if (!transition.allFinite() || !observation.allFinite() || !stationary.allFinite())
        throw std::invalid_argument("HMM parameters must be finite");
    if ((transition.array() < 0).any()) throw PreconditionError("transition probabilities must be nonnegative");
    if (((transition.colwise().sum().array() - 1.0).abs() > 1e-10).any())
        throw PreconditionError("transition columns must sum to one");
    if ((stationary.array() <= 0).any()) throw PreconditionError("stationary probabilities must be positive");
    if ((transition * stationary - stationary).lpNorm<1>() > 1e-10)
        throw PreconditionError("stationary distribution is not a fixed point of the transition matrix");
    if (!(noise >= 0)) throw PreconditionError("noise scale must be nonnegative");
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
    const Eigen::Index k = transition.cols();
    if (transition.rows() != k || k < 1) throw ShapeError("transition matrix must be square");
    Eigen::MatrixXd system(k + 1, k);
    system << transition - Eigen::MatrixXd::Identity(k, k), Eigen::RowVectorXd::Ones(k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::VectorXd w = solve_least_squares(system, rhs);
    return w / w.sum();
}

HmmParams make_hmm(Eigen::MatrixXd transition, Eigen::MatrixXd observation, double noise) {
    HmmParams p{std::move(transition), std::move(observation), Eigen::VectorXd(), noise};
    p.stationary = stationary_distribution(p.transition);
    p.validate();
    return p;
}

HmmParams random_hmm(Rng& rng, std::size_t n, std::size_t k, double noise, double min_singular) {
    if (n < 1 || k < 1) throw PreconditionError("random_hmm needs n, k >= 1");
    const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(k);
    for (int draw = 0; draw < 1000; ++draw) {
        Eigen::MatrixXd r = gaussian_matrix(rng, cols, cols).cwiseAbs();
        for (Eigen::Index j = 0; j < cols; ++j) r.col(j) /= r.col(j).sum();
        const Eigen::MatrixXd p = 0.6 * Eigen::MatrixXd::Identity(cols, cols) + 0.4 * r;
        const Eigen::MatrixXd o = gaussian_matrix(rng, rows, cols);
        if (singular_values(p).minCoeff() < min_singular) continue;
        if (k <= n && singular_values(o).minCoeff() < min_singular) continue;
        return make_hmm(p, o, noise);
    }
    throw PreconditionError("random_hmm: no instance met the singular value floor");
}

Eigen::MatrixXd reverse_transition(const HmmParams& params) {
    return params.stationary.asDiagonal() * params.transition.transpose() *
           params.stationary.cwiseInverse().asDiagonal();
}

HmmSample hmm_sample(const HmmParams& params, std::size_t window, std::size_t count, std::uint64_t seed,
                     unsigned threads) {
    params.validate();
    if (window < 3 || window % 2 == 0) throw PreconditionError("window length must be odd and at least 3");
    const Eigen::Index n = static_cast<Eigen::Index>(params.n());
    const std::size_t k = params.k();
    HmmSample out;
    out.window = window;
    out.observations.resize(n, static_cast<Eigen::Index>(count * window));
    out.states.resize(count * window);

    std::vector<double> w(params.stationary.data(), params.stationary.data() + k);
    std::vector<std::vector<double>> columns(k);
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd c = params.transition.col(static_cast<Eigen::Index>(j));
        columns[j].assign(c.data(), c.data() + k);
    }
    parallel_for(block_count(count), threads, [&](std::size_t b) {
        Rng rng = make_rng(seed, b);
        std::discrete_distribution<std::uint32_t> initial(w.begin(), w.end());
        std::vector<std::discrete_distribution<std::uint32_t>> step;
        for (const auto& c : columns) step.emplace_back(c.begin(), c.end());
        std::normal_distribution<double> noise(0.0, 1.0);
        const std::size_t end = std::min(count, (b + 1) * kSampleBlock);
        for (std::size_t s = b * kSampleBlock; s < end; ++s) {
            std::uint32_t z = initial(rng);
            for (std::size_t t = 0; t < window; ++t) {
                if (t > 0) z = step[z](rng);
                const std::size_t pos = s * window + t;
                out.states[pos] = z;
                auto col = out.observations.col(static_cast<Eigen::Index>(pos));
                for (Eigen::Index i = 0; i < n; ++i)
                    col(i) = params.observation(i, static_cast<Eigen::Index>(z)) + params.noise * noise(rng);
            }
        }
    });
    return out;
}

HmmViews hmm_views(const HmmParams& params, std::size_t ell) {
    params.validate();
    if (ell < 1) throw PreconditionError("ell must be at least 1");
    const Eigen::MatrixXd& o = params.observation;
    const Eigen::Index k = static_cast<Eigen::Index>(params.k());
    // h_r(:, j) = E[X_t (x) X_{t+-1} (x) ... (r terms) | Z_t = j] along the chain `step`.
    auto chain = [&](const Eigen::MatrixXd& step) {
        Eigen::MatrixXd h = o;
        for (std::size_t r = 1; r < ell; ++r) {
            const Eigen::MatrixXd next = h * step;
            Eigen::MatrixXd grown(o.rows() * h.rows(), k);
            for (Eigen::Index j = 0; j < k; ++j) {
                const std::array<Eigen::VectorXd, 2> parts{o.col(j), next.col(j)};
                grown.col(j) = kronecker(parts);
            }
            h = std::move(grown);
        }
        return Eigen::MatrixXd(h * step);
    };
    return {chain(reverse_transition(params)), o, chain(params.transition)};
}

HmmMoments hmm_population_moments(const HmmParams& params, std::size_t ell) {
    const HmmViews v = hmm_views(params, ell);
    const Eigen::VectorXd& w = params.stationary;
    HmmMoments m{ell,
                 synthesize(CpDecomposition({v.a, v.b, v.c}, w)),
                 v.a * w.asDiagonal() * v.b.transpose(),
                 v.b * w.asDiagonal() * v.c.transpose(),
                 v.a * w.asDiagonal() * v.c.transpose(),
                 params.observation * w,
                 0};
    return m;
}

HmmMoments hmm_empirical_moments(const HmmSample& sample, std::size_t ell, unsigned threads) {
    if (sample.window != 2 * ell + 1)
        throw ShapeError("window length " + std::to_string(sample.window) + " does not match 2*ell+1 = " +
                         std::to_string(2 * ell + 1));
    const std::size_t count = sample.count();
    if (count < 1) throw PreconditionError("no windows to average");
    const Eigen::Index n = sample.observations.rows();
    const Eigen::Index side = static_cast<Eigen::Index>(ipow(static_cast<std::size_t>(n), ell));

    struct Partial {
        Eigen::VectorXd triple, left, right, outer;
    };
    const std::size_t blocks = block_count(count);
    std::vector<Partial> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Partial p{Eigen::VectorXd::Zero(side * n * side), Eigen::VectorXd::Zero(side * n),
                  Eigen::VectorXd::Zero(n * side), Eigen::VectorXd::Zero(side * side)};
        std::vector<Eigen::VectorXd> past(ell), future(ell);
        const std::size_t end = std::min(count, (b + 1) * kSampleBlock);
        for (std::size_t s = b * kSampleBlock; s < end; ++s) {
            const Eigen::Index base = static_cast<Eigen::Index>(s * sample.window);
            for (std::size_t r = 0; r < ell; ++r) {
                past[r] = sample.observations.col(base + static_cast<Eigen::Index>(ell - 1 - r));
                future[r] = sample.observations.col(base + static_cast<Eigen::Index>(ell + 1 + r));
            }
            const Eigen::VectorXd a = kronecker(past);
            const Eigen::VectorXd mid = sample.observations.col(base + static_cast<Eigen::Index>(ell));
            const Eigen::VectorXd c = kronecker(future);
            for (Eigen::Index i = 0; i < side; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) p.triple.segment((i * n + j) * side, side) += (a(i) * mid(j)) * c;
                p.left.segment(i * n, n) += a(i) * mid;
                p.outer.segment(i * side, side) += a(i) * c;
            }
            for (Eigen::Index j = 0; j < n; ++j) p.right.segment(j * side, side) += mid(j) * c;
        }
        partial[b] = std::move(p);
    });

    Partial total{Eigen::VectorXd::Zero(side * n * side), Eigen::VectorXd::Zero(side * n),
                  Eigen::VectorXd::Zero(n * side), Eigen::VectorXd::Zero(side * side)};
    for (const auto& p : partial) {
        total.triple += p.triple;
        total.left += p.left;
        total.right += p.right;
        total.outer += p.outer;
    }
    const double inv = 1.0 / static_cast<double>(count);
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto us = static_cast<std::size_t>(side), un = static_cast<std::size_t>(n);
    total.triple *= inv;
    HmmMoments m{ell,
                 DenseTensor({us, un, us}, std::vector<double>(total.triple.data(),
                                                               total.triple.data() + total.triple.size())),
                 Eigen::Map<const RowMajor>(total.left.data(), side, n) * inv,
                 Eigen::Map<const RowMajor>(total.right.data(), n, side) * inv,
                 Eigen::Map<const RowMajor>(total.outer.data(), side, side) * inv,
                 sample.observations.rowwise().mean(),
                 count};
    return m;
}

DenseTensor hmm_moment_tensor(const HmmSample& sample, std::size_t ell, unsigned threads) {
    return hmm_empirical_moments(sample, ell, threads).triple;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    Eigen::VectorXd p = v.cwiseMax(0.0);
    const double s = p.sum();
    if (!(s > 0)) return Eigen::VectorXd::Constant(v.size(), 1.0 / static_cast<double>(v.size()));
    return p / s;
}

namespace {

// Coefficients x with pair ~= sum_i x_i left_i (x) right_i (row-major vec).
Eigen::VectorXd fit_pair(const Eigen::MatrixXd& pair, const FactorMatrix& left, const FactorMatrix& right) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor rm = pair;
    const Eigen::Map<const Eigen::VectorXd> vec(rm.data(), rm.size());
    return solve_least_squares(khatri_rao(left, right), Eigen::VectorXd(vec));
}

}  // namespace

HmmLearnResult hmm_learn(const HmmMoments& moments, const HmmLearnConfig& cfg) {
    const std::size_t ell = moments.ell;
    const DenseTensor& t = moments.triple;
    if (t.order() != 3) throw ShapeError("the HMM moment tensor must be order 3");
    const std::size_t n = t.dim(1), side = t.dim(0);
    if (side != ipow(n, ell) || t.dim(2) != side) throw ShapeError("moment tensor shape does not match n^l x n x n^l");
    if (cfg.k < 1) throw PreconditionError("k must be at least 1");

    HmmLearnResult out;
    if (cfg.k == 1) {
        out.observation = moments.mean;
        out.transition = Eigen::MatrixXd::Ones(1, 1);
        out.stationary = Eigen::VectorXd::Ones(1);
        return out;
    }

    JennrichConfig jcfg = cfg.jennrich;
    jcfg.rank = cfg.k;
    // Past and future views carry the full-rank structure; the middle observation is the third mode.
    FlatteningPlan plan{{std::vector<std::size_t>{0}, std::vector<std::size_t>{2}, std::vector<std::size_t>{1}}};
    JennrichResult r = overcomplete_decompose(t, plan, jcfg);
    const CpDecomposition& d = r.decomposition;
    const FactorMatrix& a = d.factor(0);
    const FactorMatrix& b = d.factor(1);
    const FactorMatrix& c = d.factor(2);
    const Eigen::VectorXd& weight = d.weights();

    // weight = w alpha beta gamma, left = w alpha beta, right = w beta gamma, outer = w alpha gamma.
    const Eigen::VectorXd left = fit_pair(moments.left_pair, a, b);
    const Eigen::VectorXd right = fit_pair(moments.right_pair, b, c);
    const Eigen::VectorXd outer = fit_pair(moments.outer_pair, a, c);
    const Eigen::Index k = static_cast<Eigen::Index>(cfg.k);
    Eigen::VectorXd w(k), beta(k), gamma(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (weight(i) == 0.0 || outer(i) == 0.0 || left(i) == 0.0)
            throw DegeneracyError("hmm_learn: a recovered term has a vanishing scale");
        beta(i) = weight(i) / outer(i);
        gamma(i) = weight(i) / left(i);
        w(i) = left(i) * right(i) * outer(i) / (weight(i) * weight(i));
    }
    out.observation = b * beta.asDiagonal();
    out.stationary = project_to_simplex(w);
    if (ell == 1) {
        const Eigen::VectorXd sv = singular_values(out.observation);
        if (sv.size() < k || sv(k - 1) <= 1e-8 * sv(0))
            throw DegeneracyError("hmm_learn: recovered observation matrix is numerically rank deficient");
        Eigen::MatrixXd p = pseudoinverse(out.observation) * (c * gamma.asDiagonal());
        for (Eigen::Index j = 0; j < k; ++j) p.col(j) = project_to_simplex(p.col(j));
        out.transition = std::move(p);
    }
    out.report = std::move(r.report);
    return out;
}

HmmMatch hmm_match(const HmmLearnResult& estimate, const HmmParams& truth) {
    const ColumnMatch cm = match_columns(estimate.observation, truth.observation);
    HmmMatch out;
    out.permutation = cm.permutation;
    out.observation_error = cm.max_error;
    const Eigen::Index k = truth.observation.cols();
    out.stationary_error = 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
        out.stationary_error =
            std::max(out.stationary_error,
                     std::abs(estimate.stationary(i) - truth.stationary(static_cast<Eigen::Index>(cm.permutation[i]))));
    if (!estimate.transition) {
        out.transition_error = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    Eigen::MatrixXd aligned(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            aligned(static_cast<Eigen::Index>(cm.permutation[i]), static_cast<Eigen::Index>(cm.permutation[j])) =
                (*estimate.transition)(i, j);
    out.transition_error = (aligned - truth.transition).colwise().norm().maxCoeff();
    return out;
}

}  // namespace tensordec
