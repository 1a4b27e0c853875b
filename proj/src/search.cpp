#include "spearmm/search.hpp"

#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"
#include "spearmm/random.hpp"

#include <Eigen/Cholesky>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace spearmm {

namespace {

constexpr int kCandidates = 1024;

double& config_field(SearchConfig & c, SearchDim d) {
    switch (d) {
        case SearchDim::frac_mlp:  return c.frac_mlp;
        case SearchDim::frac_attn: return c.frac_attn;
        case SearchDim::t:         return c.t;
    }
    return c.t;
}

std::vector<double> random_unit_point(std::uint64_t seed, std::string_view label, std::uint64_t index, std::size_t dims) {
    CounterRng rng(derive_seed(seed, label, index));
    std::vector<double> u(dims);
    for (auto & v : u) v = rng.uniform();
    return u;
}

std::vector<double> latin_hypercube_point(const SearchSpace & space, int index) {
    const std::size_t dims = space.dims.size();
    const auto n = static_cast<std::size_t>(space.init_points);
    std::vector<double> u(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        CounterRng rng(derive_seed(space.seed, "lhs", d));
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.below(i)]);
        }
        CounterRng jitter(derive_seed(space.seed, "lhs-jitter", static_cast<std::uint64_t>(index) * dims + d));
        u[d] = (static_cast<double>(perm[static_cast<std::size_t>(index)]) + jitter.uniform()) / static_cast<double>(n);
    }
    return u;
}

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

class ScopedDir {
public:
    explicit ScopedDir(std::filesystem::path p, bool owned) : path_(std::move(p)), owned_(owned) {
        std::filesystem::create_directories(path_);
    }
    ~ScopedDir() {
        if (owned_) {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
    }
    const std::filesystem::path & path() const { return path_; }

private:
    std::filesystem::path path_;
    bool owned_;
};

} // namespace

std::string_view dim_name(SearchDim d) {
    switch (d) {
        case SearchDim::frac_mlp:  return "frac_mlp";
        case SearchDim::frac_attn: return "frac_attn";
        case SearchDim::t:         return "t";
    }
    return "t";
}

std::optional<SearchDim> parse_dim(std::string_view s) {
    for (auto d : {SearchDim::frac_mlp, SearchDim::frac_attn, SearchDim::t}) {
        if (dim_name(d) == s) return d;
    }
    return std::nullopt;
}

void SearchSpace::validate() const {
    if (dims.empty() || dims.size() > 3) throw ValidationError("search space needs 1 to 3 dimensions");
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto & r = dims[i];
        if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo < r.hi)) {
            throw ValidationError("search bounds for " + std::string(dim_name(r.dim)) + " must satisfy 0 <= lo < hi <= 1");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (dims[j].dim == r.dim) throw ValidationError("search dimension listed twice");
        }
    }
    if (budget < 1) throw ValidationError("search budget must be positive");
    if (init_points < 1) throw ValidationError("init_points must be positive");
}

SearchConfig SearchSpace::from_unit(const std::vector<double> & u) const {
    SearchConfig c = fixed;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        config_field(c, dims[i].dim) = round9(dims[i].lo + u[i] * (dims[i].hi - dims[i].lo));
    }
    return c;
}

std::vector<double> SearchSpace::to_unit(const SearchConfig & c) const {
    std::vector<double> u(dims.size());
    SearchConfig copy = c;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        u[i] = (config_field(copy, dims[i].dim) - dims[i].lo) / (dims[i].hi - dims[i].lo);
    }
    return u;
}

nlohmann::json SearchTrial::to_json() const {
    using nlohmann::json;
    json j = {
        {"index", index},
        {"frac_mlp", round9(config.frac_mlp)},
        {"frac_attn", round9(config.frac_attn)},
        {"t", round9(config.t)},
        {"plan_digest", plan_digest},
        {"failed", failed},
    };
    if (failed) {
        j["domain_score"] = nullptr;
        j["general_score"] = nullptr;
        j["objective"] = nullptr;
        j["error"] = error;
    } else {
        j["domain_score"] = round9(domain_score);
        j["general_score"] = round9(general_score);
        j["objective"] = round9(objective);
    }
    return j;
}

double expected_improvement(double mean, double stdev, double best_so_far) {
    const double gain = mean - best_so_far;
    if (!(stdev > 0.0)) {
        return std::max(gain, 0.0);
    }
    const double z = gain / stdev;
    return std::max(gain * normal_cdf(z) + stdev * normal_pdf(z), 0.0);
}

double GaussianProcess::kernel(const double * a, const double * b) const {
    double r2 = 0.0;
    for (Eigen::Index d = 0; d < x_.rows(); ++d) {
        const double diff = a[d] - b[d];
        r2 += diff * diff;
    }
    return std::exp(-0.5 * r2 / (length_scale_ * length_scale_));
}

bool GaussianProcess::fit(const std::vector<std::vector<double>> & x, const std::vector<double> & y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n == 0) return false;
    const auto dims = static_cast<Eigen::Index>(x.front().size());

    y_mean_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - y_mean_) * (v - y_mean_);
    var /= static_cast<double>(n);
    if (!(var > 1e-24)) return false;
    y_scale_ = std::sqrt(var);

    // one column per observation
    x_.resize(dims, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dims; ++d) x_(d, i) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    }

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = k(j, i) = kernel(x_.col(i).data(), x_.col(j).data());
        }
    }
    Eigen::VectorXd ys(n);
    best_ = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        ys(i) = (y[static_cast<std::size_t>(i)] - y_mean_) / y_scale_;
        best_ = std::max(best_, ys(i));
    }

    double jitter = noise_;
    for (int attempt = 0; attempt < 8; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd kn = k;
        kn.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kn);
        if (llt.info() == Eigen::Success) {
            chol_l_ = llt.matrixL();
            alpha_ = llt.solve(ys);
            return true;
        }
    }
    return false;
}

GaussianProcess::Prediction GaussianProcess::predict(const std::vector<double> & q) const {
    const Eigen::Index n = x_.cols();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double r2 = 0.0;
        for (Eigen::Index d = 0; d < x_.rows(); ++d) {
            const double diff = q[static_cast<std::size_t>(d)] - x_(d, i);
            r2 += diff * diff;
        }
        ks(i) = std::exp(-0.5 * r2 / (length_scale_ * length_scale_));
    }
    const Eigen::VectorXd v = chol_l_.triangularView<Eigen::Lower>().solve(ks);
    Prediction p;
    p.mean = ks.dot(alpha_);
    p.stdev = std::sqrt(std::max(1.0 - v.squaredNorm(), 0.0));
    // back to the caller's units
    p.mean = y_mean_ + y_scale_ * p.mean;
    p.stdev *= y_scale_;
    return p;
}

SearchConfig propose_next(const std::vector<SearchTrial> & history, const SearchSpace & space) {
    space.validate();
    const int index = static_cast<int>(history.size());
    if (index < space.init_points) {
        return space.from_unit(latin_hypercube_point(space, index));
    }

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const auto & t : history) {
        if (t.failed || !std::isfinite(t.objective)) continue;
        xs.push_back(space.to_unit(t.config));
        ys.push_back(t.objective);
    }
    GaussianProcess gp;
    if (xs.size() < 2 || !gp.fit(xs, ys)) {
        return space.from_unit(random_unit_point(space.seed, "fallback", static_cast<std::uint64_t>(index), space.dims.size()));
    }

    const double best = *std::max_element(ys.begin(), ys.end());
    std::vector<double> best_u;
    double best_ei = -1.0;
    CounterRng rng(derive_seed(space.seed, "candidates", static_cast<std::uint64_t>(index)));
    std::vector<double> u(space.dims.size());
    for (int c = 0; c < kCandidates; ++c) {
        for (auto & v : u) v = rng.uniform();
        const auto pred = gp.predict(u);
        const double ei = expected_improvement(pred.mean, pred.stdev, best);
        if (ei > best_ei) {
            best_ei = ei;
            best_u = u;
        }
    }
    return space.from_unit(best_u);
}

MergePlan plan_for_config(const std::vector<FusedRow> & scores, const SearchConfig & config, const Policy & base_policy) {
    Policy p = base_policy;
    p.name = PolicyName::custom;
    p.frac_mlp = config.frac_mlp;
    p.frac_attn = config.frac_attn;
    p.t = config.t;
    return build_plan(scores, p);
}

SearchResult run_search(const Checkpoint & base, const Checkpoint & adapted, const std::vector<FusedRow> & scores,
                        const SearchSpace & space, Evaluator & evaluator, const SearchOptions & options) {
    space.validate();
    if (!(options.lambda >= 0.0 && options.lambda <= 1.0)) {
        throw ValidationError("lambda must lie in [0,1]");
    }
    const bool owned = options.workdir.empty();
    ScopedDir dir(owned ? std::filesystem::temp_directory_path() /
                              ("spearmm-search-" + std::to_string(::getpid()) + "-" + std::to_string(space.seed))
                        : options.workdir,
                  owned);

    SearchResult result;
    for (int i = 0; i < space.budget; ++i) {
        SearchTrial trial;
        trial.index = i;
        trial.config = propose_next(result.history, space);
        const MergePlan plan = plan_for_config(scores, trial.config, options.base_policy);
        trial.plan_digest = plan.config_digest;

        const Checkpoint merged = apply_plan(base, adapted, plan, options.thresholds);
        const auto path = dir.path() / ("trial_" + std::to_string(i) + ".safetensors");
        save_checkpoint(merged, path, DTypePolicy::force_f32);
        try {
            const EvalScores s = evaluator.evaluate({path, merged, trial.config, plan});
            trial.domain_score = s.domain_score;
            trial.general_score = s.general_score;
            trial.objective = options.lambda * s.general_score + (1.0 - options.lambda) * s.domain_score;
        } catch (const EvaluatorError & e) {
            trial.failed = true;
            trial.error = e.what();
            trial.objective = -std::numeric_limits<double>::infinity();
        }
        std::error_code ec;
        std::filesystem::remove(path, ec);
        result.history.push_back(std::move(trial));
    }

    const SearchTrial * best = nullptr;
    for (const auto & t : result.history) {
        if (!t.failed && (!best || t.objective > best->objective)) best = &t;
    }
    if (!best) {
        throw Error("all " + std::to_string(space.budget) + " search trials failed; last error: " +
                    result.history.back().error);
    }
    result.best = *best;
    return result;
}

} // namespace spearmm
