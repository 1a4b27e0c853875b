#pragma once

#include "spearmm/checkpoint_io.hpp"
#include "spearmm/evaluator.hpp"
#include "spearmm/merger.hpp"
#include "spearmm/metrics.hpp"
#include "spearmm/planner.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spearmm {

enum class SearchDim { frac_mlp, frac_attn, t };

std::string_view dim_name(SearchDim d);
std::optional<SearchDim> parse_dim(std::string_view s);

struct DimRange {
    SearchDim dim;
    double lo = 0.0;
    double hi = 1.0;
};

struct SearchSpace {
    std::vector<DimRange> dims{{SearchDim::frac_mlp, 0.0, 1.0}, {SearchDim::frac_attn, 0.0, 1.0}, {SearchDim::t, 0.0, 1.0}};
    int budget = 20;
    int init_points = 8;
    std::uint64_t seed = 0;
    SearchConfig fixed; // values for dimensions that are not searched

    void validate() const;
    SearchConfig from_unit(const std::vector<double> & u) const;
    std::vector<double> to_unit(const SearchConfig & c) const;
};

struct SearchTrial {
    int index = 0;
    SearchConfig config;
    double domain_score = 0.0;
    double general_score = 0.0;
    double objective = 0.0; // -inf when failed
    std::string plan_digest;
    bool failed = false;
    std::string error;

    nlohmann::json to_json() const;
};

// EI for maximization. Reduces to max(mean - best, 0) at stdev == 0.
double expected_improvement(double mean, double stdev, double best_so_far);

// Zero-mean GP on unit-box inputs with a squared-exponential kernel.
class GaussianProcess {
public:
    GaussianProcess(double length_scale = 0.2, double noise_variance = 1e-6)
        : length_scale_(length_scale), noise_(noise_variance) {}

    // Targets are centred on their running mean and scaled to unit variance.
    // Returns false when the targets are constant.
    bool fit(const std::vector<std::vector<double>> & x, const std::vector<double> & y);

    struct Prediction {
        double mean = 0.0;
        double stdev = 0.0;
    };
    Prediction predict(const std::vector<double> & x) const;
    double best_observed() const { return best_; }

private:
    double kernel(const double * a, const double * b) const;

    double length_scale_;
    double noise_;
    Eigen::MatrixXd x_;
    Eigen::MatrixXd chol_l_;
    Eigen::VectorXd alpha_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    double best_ = 0.0;
};

// Stratified (Latin hypercube) points for the first init_points trials,
// then the EI maximizer over 1024 seeded candidates.
SearchConfig propose_next(const std::vector<SearchTrial> & history, const SearchSpace & space);

struct SearchOptions {
    double lambda = 0.5;
    Policy base_policy;         // mode, seed and restore_end carry over to every trial
    SlerpParams thresholds;
    std::filesystem::path workdir; // empty: a fresh directory under the system temp dir
};

struct SearchResult {
    SearchTrial best;
    std::vector<SearchTrial> history;
};

// Throws Error when every trial fails.
SearchResult run_search(const Checkpoint & base, const Checkpoint & adapted, const std::vector<FusedRow> & scores,
                        const SearchSpace & space, Evaluator & evaluator, const SearchOptions & options);

MergePlan plan_for_config(const std::vector<FusedRow> & scores, const SearchConfig & config, const Policy & base_policy);

} // namespace spearmm
