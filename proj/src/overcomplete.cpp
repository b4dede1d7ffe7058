#include "tensordec/overcomplete.hpp"

#include "tensordec/errors.hpp"
#include "tensordec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tensordec {

namespace {

std::size_t group_size(const Shape& shape, const std::vector<std::size_t>& group) {
    std::size_t s = 1;
    for (std::size_t m : group) s *= shape[m];
    return s;
}

// Advances a row-major multi-index; returns false after the last one.
bool next_index(std::vector<std::size_t>& idx, std::span<const std::size_t> sizes) {
    for (std::size_t j = idx.size(); j-- > 0;) {
        if (++idx[j] < sizes[j]) return true;
        idx[j] = 0;
    }
    return false;
}

Eigen::MatrixXd mode_unfolding(const Eigen::VectorXd& v, std::span<const std::size_t> sizes, std::size_t mode) {
    const Eigen::Index rows = static_cast<Eigen::Index>(sizes[mode]);
    Eigen::MatrixXd out(rows, v.size() / rows);
    std::vector<std::size_t> idx(sizes.size(), 0);
    std::vector<Eigen::Index> column_fill(static_cast<std::size_t>(rows), 0);
    for (Eigen::Index lin = 0; lin < v.size(); ++lin) {
        const auto r = static_cast<Eigen::Index>(idx[mode]);
        out(r, column_fill[static_cast<std::size_t>(r)]++) = v(lin);
        next_index(idx, sizes);
    }
    return out;
}

Eigen::VectorXd contract_except(const Eigen::VectorXd& v, std::span<const std::size_t> sizes,
                                const std::vector<Eigen::VectorXd>& x, std::size_t mode) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[mode]));
    std::vector<std::size_t> idx(sizes.size(), 0);
    for (Eigen::Index lin = 0; lin < v.size(); ++lin) {
        double w = v(lin);
        for (std::size_t j = 0; j < sizes.size(); ++j)
            if (j != mode) w *= x[j](static_cast<Eigen::Index>(idx[j]));
        out(static_cast<Eigen::Index>(idx[mode])) += w;
        next_index(idx, sizes);
    }
    return out;
}

}  // namespace

RankOneFit unflatten_rank_one(const Eigen::VectorXd& v, std::span<const std::size_t> mode_sizes) {
    if (mode_sizes.empty()) throw ShapeError("unflatten_rank_one needs at least one mode");
    const std::size_t total =
        std::accumulate(mode_sizes.begin(), mode_sizes.end(), std::size_t{1}, std::multiplies<>());
    if (total != static_cast<std::size_t>(v.size()))
        throw ShapeError("unflatten_rank_one: vector length " + std::to_string(v.size()) +
                         " does not match the product of mode sizes " + std::to_string(total));

    RankOneFit fit;
    const double norm = v.norm();
    if (norm == 0.0) {
        for (std::size_t s : mode_sizes) fit.factors.push_back(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(s), 0));
        return fit;
    }
    if (mode_sizes.size() == 1) {
        fit.factors.push_back(v / norm);
        fit.scale = norm;
        return fit;
    }

    for (std::size_t j = 0; j < mode_sizes.size(); ++j) {
        const SvdResult s = svd(mode_unfolding(v, mode_sizes, j));
        fit.factors.push_back(s.u.col(0));
    }
    for (int iter = 0; iter < 200; ++iter) {
        double change = 0.0;
        for (std::size_t j = 0; j < mode_sizes.size(); ++j) {
            Eigen::VectorXd x = contract_except(v, mode_sizes, fit.factors, j);
            const double xn = x.norm();
            if (xn == 0.0) break;
            x /= xn;
            change = std::max(change, std::min((x - fit.factors[j]).norm(), (x + fit.factors[j]).norm()));
            fit.factors[j] = x;
        }
        if (change < 1e-13) break;
    }
    const Eigen::VectorXd last = contract_except(v, mode_sizes, fit.factors, mode_sizes.size() - 1);
    fit.scale = last.dot(fit.factors.back());

    fit.residual = (v - fit.scale * kronecker(fit.factors)).norm() / norm;
    return fit;
}

FlatteningPlan default_plan(const Shape& shape) {
    const std::size_t order = shape.size();
    if (order < 3) throw ShapeError("flattening needs an order of at least 3");
    const std::size_t g = (order - 1) / 2;
    FlatteningPlan plan;
    for (std::size_t m = 0; m < order; ++m) plan.groups[m < g ? 0 : (m < 2 * g ? 1 : 2)].push_back(m);

    auto score = [&](const ModeGroups& groups) {
        return std::min(group_size(shape, groups[0]), group_size(shape, groups[1]));
    };
    std::size_t best = score(plan.groups);
    for (std::size_t a = 1; a + 1 < order; ++a) {
        for (std::size_t b = a + 1; b < order; ++b) {
            ModeGroups candidate;
            for (std::size_t m = 0; m < order; ++m) candidate[m < a ? 0 : (m < b ? 1 : 2)].push_back(m);
            const std::size_t s = score(candidate);
            if (s > best) {
                best = s;
                plan.groups = candidate;
            }
        }
    }
    return plan;
}

FlatteningPlan parse_plan(const std::string& text) {
    FlatteningPlan plan;
    std::stringstream groups(text);
    std::string group;
    std::size_t g = 0;
    while (std::getline(groups, group, '/')) {
        if (g >= 3) throw ShapeError("a plan has exactly three groups: " + text);
        std::stringstream modes(group);
        std::string mode;
        while (std::getline(modes, mode, ',')) {
            std::size_t pos = 0;
            long value = 0;
            try {
                value = std::stol(mode, &pos);
            } catch (const std::exception&) {
                throw ShapeError("bad mode index '" + mode + "' in plan " + text);
            }
            if (pos != mode.size() || value < 1) throw ShapeError("bad mode index '" + mode + "' in plan " + text);
            plan.groups[g].push_back(static_cast<std::size_t>(value - 1));
        }
        ++g;
    }
    if (g != 3) throw ShapeError("a plan has exactly three groups: " + text);
    return plan;
}

JennrichResult overcomplete_decompose(const DenseTensor& t, const FlatteningPlan& plan, const JennrichConfig& cfg) {
    const std::size_t order = t.order();
    if (order < 3) throw ShapeError("overcomplete_decompose needs an order of at least 3");
    check_partition(plan.groups, order);
    const bool identity = order == 3 && plan.groups[0] == std::vector<std::size_t>{0} &&
                          plan.groups[1] == std::vector<std::size_t>{1} && plan.groups[2] == std::vector<std::size_t>{2};
    if (identity) return jennrich_decompose(t, cfg);

    JennrichResult flat = jennrich_decompose(flatten_to_order3(t, plan.groups), cfg);
    const CpDecomposition& grouped = flat.decomposition;
    const Eigen::Index k = static_cast<Eigen::Index>(grouped.rank());

    std::vector<FactorMatrix> factors(order);
    for (std::size_t m = 0; m < order; ++m) factors[m] = FactorMatrix(static_cast<Eigen::Index>(t.dim(m)), k);
    Eigen::VectorXd weights = grouped.weights();
    RecoveryReport report = std::move(flat.report);
    report.unflatten_residuals.assign(static_cast<std::size_t>(k), 0.0);
    report.suspect_terms.assign(static_cast<std::size_t>(k), false);

    for (Eigen::Index i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t g = 0; g < 3; ++g) {
            const auto& group = plan.groups[g];
            std::vector<std::size_t> sizes;
            for (std::size_t m : group) sizes.push_back(t.dim(m));
            const RankOneFit fit = unflatten_rank_one(grouped.factor(g).col(i), sizes);
            for (std::size_t j = 0; j < group.size(); ++j) factors[group[j]].col(i) = fit.factors[j];
            weights(i) *= fit.scale;
            worst = std::max(worst, fit.residual);
        }
        report.unflatten_residuals[static_cast<std::size_t>(i)] = worst;
        report.suspect_terms[static_cast<std::size_t>(i)] = worst > kSuspectResidual;
    }
    return {CpDecomposition(std::move(factors), std::move(weights)).canonical(), std::move(report)};
}

}  // namespace tensordec
