// tensordec: synthesize tensors, decompose them, learn mixture/HMM parameters
// from moments, and run the smoothed-analysis Monte Carlo experiments.
//
// Every run writes its outputs into --out DIR together with manifest.json.
// Outputs are buffered and committed with temp-file-and-rename at the end, so
// a failing run leaves none of its files behind.

#include "tensordec/errors.hpp"
#include "tensordec/generators.hpp"
#include "tensordec/io.hpp"
#include "tensordec/jennrich.hpp"
#include "tensordec/linalg.hpp"
#include "tensordec/moments.hpp"
#include "tensordec/overcomplete.hpp"
#include "tensordec/power_method.hpp"
#include "tensordec/smoothed.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef TENSORDEC_VERSION
#define TENSORDEC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tensordec;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitPrecondition = 4;

/// Bad flag values or unreadable inputs detected after parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Settings shared by every subcommand.
struct Common {
    fs::path out;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed_flag;

    std::uint64_t seed() const {
        if (seed_flag) return *seed_flag;
        if (const char* env = std::getenv("TENSORDEC_SEED")) {
            try {
                std::size_t pos = 0;
                const unsigned long long v = std::stoull(env, &pos);
                if (pos == std::string(env).size()) return v;
            } catch (const std::exception&) {
            }
            throw UsageError(std::string("TENSORDEC_SEED is not an unsigned integer: ") + env);
        }
        return 0;
    }
};

void add_common(CLI::App* app, Common& c, bool needs_seed = true) {
    app->add_option("--out", c.out, "Output directory")->required();
    app->add_option("--threads", c.threads, "Worker threads for sampling and trials")
        ->capture_default_str()
        ->check(CLI::Range(1u, 256u));
    if (needs_seed) app->add_option("--seed", c.seed_flag, "RNG seed (default: $TENSORDEC_SEED, else 0)");
}

json flags_of(const CLI::App& app) {
    json j = json::object();
    for (const CLI::Option* o : app.get_options()) {
        const std::string name = o->get_single_name();
        if (name == "help") continue;
        const auto& r = o->results();
        if (!r.empty()) {
            j[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else if (!o->get_default_str().empty()) {
            j[name] = o->get_default_str();
        }
    }
    return j;
}

/// Collects outputs in memory and commits them atomically.
class Run {
public:
    Run(std::string subcommand, json flags, const Common& common)
        : subcommand_(std::move(subcommand)), flags_(std::move(flags)), common_(common),
          start_(std::chrono::steady_clock::now()) {}

    std::uint64_t seed() {
        if (!seed_) seed_ = common_.seed();
        return *seed_;
    }

    fs::path input(const fs::path& path) {
        if (!fs::is_regular_file(path)) throw UsageError("no such input file: " + path.string());
        inputs_[path.string()] = fnv1a64(slurp(path));
        return path;
    }

    void add(const std::string& name, std::string bytes) { outputs_.emplace_back(name, std::move(bytes)); }
    void add(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

    void commit() {
        fs::create_directories(common_.out);
        json manifest;
        manifest["subcommand"] = subcommand_;
        manifest["flags"] = flags_;
        manifest["seed"] = seed_ ? json(*seed_) : json(nullptr);
        manifest["version"] = TENSORDEC_VERSION;
        manifest["inputs"] = inputs_;
        json digests = json::object();
        for (const auto& [name, bytes] : outputs_) digests[name] = fnv1a64(bytes);
        manifest["outputs"] = digests;
        manifest["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        outputs_.emplace_back("manifest.json", manifest.dump(2) + "\n");

        std::vector<fs::path> written;
        try {
            for (const auto& [name, bytes] : outputs_) {
                const fs::path target = common_.out / name;
                const fs::path tmp = common_.out / ("." + name + ".tmp");
                {
                    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
                    f.close();
                    if (!f) {
                        std::error_code ec;
                        fs::remove(tmp, ec);
                        throw std::runtime_error("failed writing " + tmp.string());
                    }
                }
                fs::rename(tmp, target);
                written.push_back(target);
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& p : written) fs::remove(p, ec);
            throw;
        }
    }

private:
    std::string subcommand_;
    json flags_;
    const Common& common_;
    std::chrono::steady_clock::time_point start_;
    std::optional<std::uint64_t> seed_;
    json inputs_ = json::object();
    std::vector<std::pair<std::string, std::string>> outputs_;
};

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(item, &pos);
            if (pos != item.size() || v < 1) throw UsageError("");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("bad size '" + item + "' in '" + text + "'");
        }
    }
    if (out.empty()) throw UsageError("empty size list");
    return out;
}

std::string tnsr_bytes(const DenseTensor& t) {
    std::ostringstream s(std::ios::binary);
    write_tnsr(s, t);
    return s.str();
}

std::string csv_values(const std::vector<double>& values) {
    std::string out = "trial,value\n";
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, values[i]);
        out += buf;
    }
    return out;
}

json summary_json(const ExperimentSummary& s) {
    json q = json::array();
    for (const auto& [p, v] : s.quantiles) q.push_back({{"p", p}, {"value", v}});
    json f = json::array();
    std::vector<double> cs, fs_;
    for (const auto& t : s.fractions) {
        f.push_back({{"c", t.c}, {"threshold", t.threshold}, {"fraction", t.fraction}});
        if (t.fraction > 0) {
            cs.push_back(t.c);
            fs_.push_back(t.fraction);
        }
    }
    json j = {{"trials", s.values.size()}, {"quantiles", q}, {"threshold_fractions", f}};
    // empirical small-ball exponent: fraction ~ c^slope over thresholds that were hit
    j["threshold_slope"] = cs.size() >= 2 ? json(log_log_slope(cs, fs_)) : json(nullptr);
    return j;
}

double relative_residual(const DenseTensor& t, const CpDecomposition& d) {
    const double norm = frobenius_norm(t);
    const double r = frobenius_norm(t - synthesize(d));
    return norm > 0 ? r / norm : r;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    Common common;
    std::string shape;
    std::size_t order = 3;
    std::size_t n = 8;
    std::size_t rank = 1;
    std::string model = "exact";
    double rho = 1.0;
    double noise = 0.0;
};

void cmd_synth(const SynthArgs& a, Run& run, const CLI::App& app) {
    Shape shape;
    if (!a.shape.empty()) {
        shape = parse_sizes(a.shape);
        if (app.count("--order") && shape.size() != a.order)
            throw UsageError("--order " + std::to_string(a.order) + " disagrees with --shape " + a.shape);
    } else {
        shape.assign(a.order, a.n);
    }
    if (a.noise < 0) throw UsageError("--noise must be nonnegative");
    if (a.model == "smoothed" && !(a.rho > 0)) throw UsageError("--rho must be positive");

    const std::uint64_t seed = run.seed();
    Rng rng = make_rng(seed, 0);
    const CpDecomposition base = random_decomposition(rng, shape, a.rank).canonical();
    CpDecomposition truth = base;
    if (a.model == "smoothed") {
        truth = perturb_factors(base, {a.rho, derive_seed(seed, 1)});
        run.add("base.json", to_json(base));
    }
    DenseTensor t = synthesize(truth);
    if (a.noise > 0) {
        Rng noise_rng = make_rng(seed, 2);
        t = add_uniform_noise(t, a.noise, noise_rng);
    }
    run.add("truth.json", to_json(truth));
    run.add("tensor.tnsr", tnsr_bytes(t));
    std::cout << "synthesized order-" << shape.size() << " rank-" << a.rank << " tensor, ||T||_F = "
              << frobenius_norm(t) << "\n";
}

// -------------------------------------------------------------- decompose

struct DecomposeArgs {
    Common common;
    fs::path in;
    std::string method = "jennrich";
    std::string rank = "auto";
    std::string groups;
    fs::path whiten;
    fs::path truth;
    double pair_tol = 1e-2;
};

std::optional<std::size_t> parse_rank(const std::string& text) {
    if (text == "auto") return std::nullopt;
    return parse_sizes(text).at(0);
}

void cmd_decompose(const DecomposeArgs& a, Run& run) {
    const DenseTensor t = read_tnsr(run.input(a.in));
    std::optional<CpDecomposition> truth;
    if (!a.truth.empty()) truth = read_decomposition(run.input(a.truth));
    const std::optional<std::size_t> rank = parse_rank(a.rank);

    JennrichConfig jcfg;
    jcfg.rank = rank;
    jcfg.eig_pair_tol = a.pair_tol;
    jcfg.seed = run.seed();

    std::optional<CpDecomposition> found;
    RecoveryReport report;
    json extra = json::object();
    if (a.method == "jennrich") {
        JennrichResult r = jennrich_decompose(t, jcfg);
        found.emplace(std::move(r.decomposition));
        report = std::move(r.report);
    } else if (a.method == "flatten-jennrich") {
        FlatteningPlan plan;
        try {
            plan = a.groups.empty() ? default_plan(t.shape()) : parse_plan(a.groups);
            check_partition(plan.groups, t.order());
        } catch (const ShapeError& e) {
            throw UsageError(e.what());
        }
        extra["groups"] = plan.groups;
        JennrichResult r = overcomplete_decompose(t, plan, jcfg);
        found.emplace(std::move(r.decomposition));
        report = std::move(r.report);
    } else {
        PowerConfig pcfg;
        pcfg.seed = run.seed();
        pcfg.threads = a.common.threads;
        check_symmetric(t);
        if (!a.whiten.empty()) {
            const DenseTensor m = read_tnsr(run.input(a.whiten));
            if (m.order() != 2 || m.dim(0) != t.dim(0) || m.dim(1) != t.dim(0))
                throw ShapeError("--whiten needs an n x n matrix matching the tensor");
            const Eigen::Index n = static_cast<Eigen::Index>(m.dim(0));
            const Eigen::MatrixXd mm =
                Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    m.data().data(), n, n);
            const std::size_t k = rank ? *rank : estimate_whitening_rank(mm);
            const Whitening w = whiten(t, mm, k);
            const OrthogonalDecomposition d = deflate_decompose(w.tensor, k, pcfg);
            const Eigen::MatrixXd u = unwhiten(w, d);
            // lambda_i = w_i^{-1/2} in the whitened space
            const Eigen::VectorXd weights = d.lambdas.array().square().inverse().matrix();
            found.emplace(CpDecomposition({u, u, u}, weights).canonical());
            extra["whitened_residual"] = d.residual;
        } else {
            if (!rank) throw UsageError("--method power needs --rank (or --whiten to estimate it)");
            const OrthogonalDecomposition d = deflate_decompose(t, *rank, pcfg);
            found.emplace(CpDecomposition({d.vectors, d.vectors, d.vectors}, d.lambdas).canonical());
            extra["deflation_residual"] = d.residual;
        }
        for (const auto& f : found->factors())
            report.condition_numbers.push_back(f.cols() <= f.rows() ? condition_number(f)
                                                                      : std::numeric_limits<double>::infinity());
    }
    if (truth) attach_truth(report, *found, *truth);

    json rj = to_json(report);
    rj["method"] = a.method;
    rj["rank"] = found->rank();
    rj["relative_residual"] = relative_residual(t, *found);
    rj.update(extra);
    run.add("decomposition.json", to_json(*found));
    run.add("report.json", rj);
    std::cout << a.method << ": rank " << found->rank() << ", relative residual " << rj["relative_residual"];
    if (truth) std::cout << ", max term error " << report.max_error;
    std::cout << "\n";
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    fs::path found;
    fs::path truth;
    fs::path in;
};

void cmd_eval(const EvalArgs& a, Run& run) {
    const CpDecomposition found = read_decomposition(run.input(a.found));
    const CpDecomposition truth = read_decomposition(run.input(a.truth));
    const RecoveryReport r = match_terms(found, truth);
    json rj = to_json(r);
    if (!a.in.empty()) rj["relative_residual"] = relative_residual(read_tnsr(run.input(a.in)), found);
    run.add("report.json", rj);
    std::cout << "max term error " << r.max_error << " (relative " << rj["relative_max_error"] << ")\n";
}

// ------------------------------------------------------------------ learn

struct GmmArgs {
    Common common;
    std::size_t k = 3;
    std::size_t n = 8;
    std::size_t samples = 500000;
    double norm = 5.0;
    std::string method = "jennrich";
    std::size_t order = 3;
    bool exact = false;
};

void cmd_learn_gmm(const GmmArgs& a, Run& run) {
    if (a.order != 3 && a.order != 5) throw UsageError("--order must be 3 or 5");
    if (a.order == 5 && !a.exact)
        throw UsageError("order-5 statistics are only available from exact moments (add --exact)");
    const std::uint64_t seed = run.seed();
    Rng rng = make_rng(seed, 0);
    const GmmParams params = random_gmm(rng, a.n, a.k, a.norm);

    GmmLearnConfig cfg;
    cfg.k = a.k;
    cfg.method = a.method == "power" ? DecompositionMethod::power : DecompositionMethod::jennrich;
    cfg.seed = derive_seed(seed, 2);
    cfg.threads = a.common.threads;
    GmmLearnResult r = [&] {
        if (a.exact)
            return gmm_learn_from_moments(gmm_statistic_exact(params, a.order), gmm_second_moment_exact(params), cfg);
        return gmm_learn(gmm_sample(params, a.samples, derive_seed(seed, 1), a.common.threads), cfg);
    }();
    const ColumnMatch m = match_columns(r.means, params.means);

    run.add("means.json", json{{"truth", matrix_to_json(params.means)}, {"estimate", matrix_to_json(r.means)}});
    json rj = {{"permutation", m.permutation},
               {"errors", m.errors},
               {"max_error", m.max_error},
               {"samples", a.exact ? 0 : a.samples},
               {"decomposition", to_json(r.report)}};
    run.add("report.json", rj);
    std::cout << "gmm: max matched mean error " << m.max_error << "\n";
}

struct HmmArgs {
    Common common;
    std::size_t k = 3;
    std::size_t n = 6;
    std::size_t window = 3;
    std::size_t samples = 500000;
    double noise = 0.1;
    double min_singular = 0.2;
    bool exact = false;
};

json hmm_json(const Eigen::MatrixXd& o, const std::optional<Eigen::MatrixXd>& p, const Eigen::VectorXd& w) {
    json j = {{"observation", matrix_to_json(o)}, {"stationary", std::vector<double>(w.data(), w.data() + w.size())}};
    j["transition"] = p ? matrix_to_json(*p) : json(nullptr);
    return j;
}

void cmd_learn_hmm(const HmmArgs& a, Run& run) {
    if (a.window < 3 || a.window % 2 == 0) throw UsageError("--window must be odd and at least 3");
    const std::size_t ell = (a.window - 1) / 2;
    const std::uint64_t seed = run.seed();
    Rng rng = make_rng(seed, 0);
    const HmmParams params = random_hmm(rng, a.n, a.k, a.noise, a.min_singular);

    const HmmMoments moments =
        a.exact ? hmm_population_moments(params, ell)
                : hmm_empirical_moments(hmm_sample(params, a.window, a.samples, derive_seed(seed, 1), a.common.threads),
                                        ell, a.common.threads);
    HmmLearnConfig cfg;
    cfg.k = a.k;
    cfg.jennrich.seed = derive_seed(seed, 2);
    const HmmLearnResult r = hmm_learn(moments, cfg);
    const HmmMatch m = hmm_match(r, params);

    run.add("params.json", json{{"truth", hmm_json(params.observation, params.transition, params.stationary)},
                                {"estimate", hmm_json(r.observation, r.transition, r.stationary)}});
    json rj = {{"permutation", m.permutation},
               {"observation_error", m.observation_error},
               {"stationary_error", m.stationary_error},
               {"samples", moments.samples},
               {"decomposition", to_json(r.report)}};
    rj["transition_error"] = std::isnan(m.transition_error) ? json(nullptr) : json(m.transition_error);
    run.add("report.json", rj);
    std::cout << "hmm: observation error " << m.observation_error << ", transition error " << rj["transition_error"]
              << "\n";
}

// -------------------------------------------------------------------- lab

struct KrArgs {
    Common common;
    KrSigmaConfig cfg;
    std::string base = "zero";
};

void cmd_lab_kr(KrArgs a, Run& run) {
    a.cfg.base = a.base == "adversarial" ? KrBase::adversarial : KrBase::zero;
    a.cfg.seed = run.seed();
    a.cfg.threads = a.common.threads;
    const KrSigmaResult r = kr_sigma_experiment(a.cfg);
    json s = summary_json(r.summary);
    s["delta"] = r.delta;
    s["unperturbed_sigma"] = r.unperturbed;
    s["scale"] = std::pow(a.cfg.rho, static_cast<double>(a.cfg.ell)) / std::pow(static_cast<double>(a.cfg.n),
                                                                                static_cast<double>(a.cfg.ell));
    run.add("values.csv", csv_values(r.summary.values));
    run.add("summary.json", s);
    std::cout << "kr-sigma: " << r.summary.values.size() << " trials, delta " << r.delta << "\n";
}

struct ProjectionArgs {
    Common common;
    ProjectionConfig cfg;
    std::string subspace = "random";
    std::string base = "zero";
};

void cmd_lab_projection(ProjectionArgs a, Run& run) {
    a.cfg.subspace = a.subspace == "coordinate" ? SubspaceKind::coordinate
                     : a.subspace == "full"     ? SubspaceKind::full
                                                : SubspaceKind::random;
    a.cfg.base = a.base == "random-unit" ? BasePoint::random_unit : BasePoint::zero;
    a.cfg.seed = run.seed();
    a.cfg.threads = a.common.threads;
    const ProjectionResult r = projection_experiment(a.cfg);
    json s = summary_json(r.summary);
    s["dimension"] = r.dimension;
    run.add("values.csv", csv_values(r.summary.values));
    run.add("summary.json", s);
    std::cout << "projection: " << r.summary.values.size() << " trials, dim W = " << r.dimension << "\n";
}

struct PivotArgs {
    Common common;
    std::size_t n = 32;
    std::size_t dim = 8;
    std::size_t ell = 1;
};

json check_json(const PivotCheck& c) {
    return {{"bounded", c.bounded},   {"unit_pivot", c.unit_pivot},       {"zeros", c.zeros},
            {"distinct", c.distinct}, {"in_subspace", c.in_subspace},     {"max_violation", c.max_violation},
            {"pass", c.ok()}};
}

void cmd_lab_pivot(const PivotArgs& a, Run& run) {
    if (a.ell != 1 && a.ell != 2) throw UsageError("--l must be 1 or 2");
    const std::size_t total = a.ell == 1 ? a.n : a.n * a.n;
    if (a.dim < 1 || a.dim > total) throw UsageError("--dim must lie in [1, n^l]");
    Rng rng = make_rng(run.seed(), 0);
    const Eigen::MatrixXd w =
        random_orthonormal(rng, static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(a.dim));
    json j = {{"n", a.n}, {"l", a.ell}, {"dim", a.dim}};
    bool pass = false;
    if (a.ell == 1) {
        const PivotBasis b = build_pivot_basis(w);
        const PivotCheck c = check_pivot_basis(b, w);
        j["pivots"] = b.pivots;
        j["vectors"] = matrix_to_json(b.vectors);
        j["check"] = check_json(c);
        pass = c.ok();
    } else {
        const PivotBasis2 b = build_pivot_basis_l2(w, a.n);
        const PivotCheck c = check_pivot_basis_l2(b, w);
        json pivots = json::array();
        for (const auto& [r, col] : b.pivots) pivots.push_back({r, col});
        j["pivots"] = pivots;
        j["rows"] = b.rows;
        j["pivots_per_row"] = b.pivots_per_row;
        j["matrices"] = matrix_to_json(b.matrices);
        j["check"] = check_json(c);
        pass = c.ok();
    }
    run.add("pivot.json", j);
    std::cout << "pivot: invariant check " << (pass ? "pass" : "FAIL") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor decomposition and moment-learning toolkit", "tensordec"};
    app.set_version_flag("--version", TENSORDEC_VERSION);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a random CP decomposition and its tensor");
    add_common(s, synth.common);
    s->add_option("--shape", synth.shape, "Mode sizes, e.g. 8,8,8");
    s->add_option("--order", synth.order, "Order when --shape is absent")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--n", synth.n, "Mode size when --shape is absent")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--rank", synth.rank, "Number of rank-one terms")->required();
    s->add_option("--model", synth.model)->capture_default_str()->check(CLI::IsMember({"exact", "smoothed"}));
    s->add_option("--rho", synth.rho, "Perturbation scale of the smoothed model")->capture_default_str();
    s->add_option("--noise", synth.noise, "Entrywise uniform noise magnitude")->capture_default_str();

    DecomposeArgs dec;
    auto* d = app.add_subcommand("decompose", "Decompose a TNSR tensor");
    add_common(d, dec.common);
    d->add_option("--in", dec.in, "Input tensor (TNSR)")->required();
    d->add_option("--method", dec.method)
        ->capture_default_str()
        ->check(CLI::IsMember({"jennrich", "flatten-jennrich", "power"}));
    d->add_option("--rank", dec.rank, "Target rank or 'auto'")->capture_default_str();
    d->add_option("--groups", dec.groups, "Mode groups for flatten-jennrich, e.g. 1,2/3,4/5");
    d->add_option("--whiten", dec.whiten, "Second-moment matrix (TNSR, n x n) for the power method");
    d->add_option("--truth", dec.truth, "Ground-truth decomposition JSON");
    d->add_option("--pair-tol", dec.pair_tol, "Eigenvalue pairing tolerance")->capture_default_str();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Match a decomposition against ground truth");
    add_common(e, ev.common, false);
    e->add_option("--found", ev.found, "Decomposition JSON")->required();
    e->add_option("--truth", ev.truth, "Ground-truth decomposition JSON")->required();
    e->add_option("--in", ev.in, "Tensor (TNSR) for the residual");

    auto* learn = app.add_subcommand("learn", "Method-of-moments parameter learning");
    learn->require_subcommand(1);
    GmmArgs gmm;
    auto* g = learn->add_subcommand("gmm", "Uniform spherical Gaussian mixture");
    add_common(g, gmm.common);
    g->add_option("--k", gmm.k)->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--n", gmm.n)->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--samples", gmm.samples)->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--norm", gmm.norm, "Norm of the true means")->capture_default_str();
    g->add_option("--method", gmm.method)->capture_default_str()->check(CLI::IsMember({"jennrich", "power"}));
    g->add_option("--order", gmm.order, "Moment order (5 needs --exact)")->capture_default_str();
    g->add_flag("--exact", gmm.exact, "Use population moments instead of samples");

    HmmArgs hmm;
    auto* h = learn->add_subcommand("hmm", "Hidden Markov model with Gaussian emissions");
    add_common(h, hmm.common);
    h->add_option("--k", hmm.k)->capture_default_str()->check(CLI::PositiveNumber);
    h->add_option("--n", hmm.n)->capture_default_str()->check(CLI::PositiveNumber);
    h->add_option("--window", hmm.window, "Window length 2l+1")->capture_default_str();
    h->add_option("--samples", hmm.samples)->capture_default_str()->check(CLI::PositiveNumber);
    h->add_option("--noise", hmm.noise, "Emission noise scale")->capture_default_str();
    h->add_option("--min-singular", hmm.min_singular, "Floor on sigma_k(O), sigma_k(P)")->capture_default_str();
    h->add_flag("--exact", hmm.exact, "Use population moments instead of samples");

    auto* lab = app.add_subcommand("lab", "Monte Carlo experiments");
    lab->require_subcommand(1);
    KrArgs kr;
    auto* k = lab->add_subcommand("kr-sigma", "Least singular value of perturbed Khatri-Rao products");
    add_common(k, kr.common);
    k->add_option("--n", kr.cfg.n)->capture_default_str()->check(CLI::PositiveNumber);
    k->add_option("--k", kr.cfg.k)->capture_default_str()->check(CLI::PositiveNumber);
    k->add_option("--l", kr.cfg.ell)->capture_default_str()->check(CLI::PositiveNumber);
    k->add_option("--rho", kr.cfg.rho)->capture_default_str();
    k->add_option("--trials", kr.cfg.trials)->capture_default_str()->check(CLI::PositiveNumber);
    k->add_option("--base", kr.base)->capture_default_str()->check(CLI::IsMember({"zero", "adversarial"}));

    ProjectionArgs pr;
    auto* p = lab->add_subcommand("projection", "Projection of perturbed rank-one tensors onto a subspace");
    add_common(p, pr.common);
    p->add_option("--n", pr.cfg.n)->capture_default_str()->check(CLI::PositiveNumber);
    p->add_option("--l", pr.cfg.ell)->capture_default_str()->check(CLI::PositiveNumber);
    p->add_option("--delta", pr.cfg.delta)->capture_default_str();
    p->add_option("--rho", pr.cfg.rho)->capture_default_str();
    p->add_option("--trials", pr.cfg.trials)->capture_default_str()->check(CLI::PositiveNumber);
    p->add_option("--subspace", pr.subspace)
        ->capture_default_str()
        ->check(CLI::IsMember({"random", "coordinate", "full"}));
    p->add_option("--base", pr.base)->capture_default_str()->check(CLI::IsMember({"zero", "random-unit"}));

    PivotArgs pv;
    auto* v = lab->add_subcommand("pivot", "Pivot basis of a random subspace");
    add_common(v, pv.common);
    v->add_option("--n", pv.n)->capture_default_str()->check(CLI::PositiveNumber);
    v->add_option("--dim", pv.dim)->capture_default_str();
    v->add_option("--l", pv.ell)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Error& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        auto go = [](const CLI::App* sub, const Common& common, auto&& body) {
            Run run(sub->get_parent() && sub->get_parent()->get_parent()
                        ? sub->get_parent()->get_name() + " " + sub->get_name()
                        : sub->get_name(),
                    flags_of(*sub), common);
            body(run);
            run.commit();
        };
        if (*s) go(s, synth.common, [&](Run& r) { cmd_synth(synth, r, *s); });
        else if (*d) go(d, dec.common, [&](Run& r) { cmd_decompose(dec, r); });
        else if (*e) go(e, ev.common, [&](Run& r) { cmd_eval(ev, r); });
        else if (*g) go(g, gmm.common, [&](Run& r) { cmd_learn_gmm(gmm, r); });
        else if (*h) go(h, hmm.common, [&](Run& r) { cmd_learn_hmm(hmm, r); });
        else if (*k) go(k, kr.common, [&](Run& r) { cmd_lab_kr(kr, r); });
        else if (*p) go(p, pr.common, [&](Run& r) { cmd_lab_projection(pr, r); });
        else if (*v) go(v, pv.common, [&](Run& r) { cmd_lab_pivot(pv, r); });
    } catch (const UsageError& err) {
        std::cerr << "tensordec: " << err.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& err) {
        std::cerr << "tensordec: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::ios_base::failure& err) {
        std::cerr << "tensordec: " << err.what() << "\n";
        return kExitUsage;
    } catch (const DegeneracyError& err) {
        std::cerr << "tensordec: degenerate: " << err.what() << "\n";
        if (!err.diagnostics().empty()) std::cerr << err.diagnostics() << "\n";
        return kExitDegenerate;
    } catch (const PivotError& err) {
        std::cerr << "tensordec: degenerate: " << err.what() << " (built " << err.achieved() << ")\n";
        return kExitDegenerate;
    } catch (const PreconditionError& err) {
        std::cerr << "tensordec: precondition: " << err.what() << "\n";
        return kExitPrecondition;
    } catch (const ShapeError& err) {
        std::cerr << "tensordec: precondition: " << err.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& err) {
        std::cerr << "tensordec: " << err.what() << "\n";
        return kExitOther;
    }
    return 0;
}
