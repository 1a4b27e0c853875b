#pragma once

#include "spearmm/checkpoint_io.hpp"
#include "spearmm/errors.hpp"
#include "spearmm/planner.hpp"

#include <chrono>
#include <filesystem>
#include <string>

namespace spearmm {

class EvaluatorError : public Error {
public:
    using Error::Error;
};

struct SearchConfig {
    double frac_mlp = 0.5;
    double frac_attn = 0.6;
    double t = 0.5;

    friend bool operator==(const SearchConfig &, const SearchConfig &) = default;
};

struct EvalScores {
    double domain_score = 0.0;
    double general_score = 0.0;
};

struct EvalRequest {
    const std::filesystem::path & model_path;
    const Checkpoint & merged;
    const SearchConfig & config;
    const MergePlan & plan;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    // Throws EvaluatorError when the candidate cannot be scored.
    virtual EvalScores evaluate(const EvalRequest & request) = 0;
};

// Parses {"domain_score": x, "general_score": y} with both values in [0,1].
EvalScores parse_eval_output(const std::string & text);

// Runs `<command> --model <path>` through /bin/sh and parses its stdout.
class CommandEvaluator : public Evaluator {
public:
    explicit CommandEvaluator(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(600))
        : command_(std::move(command)), timeout_(timeout) {}

    EvalScores evaluate(const EvalRequest & request) override;

private:
    std::string command_;
    std::chrono::milliseconds timeout_;
};

// general = 1 - d(merged, base) / d(adapted, base)
// domain  = 1 - d(merged, adapted) / d(adapted, base)
// d sums per-tensor Frobenius distances over aligned tensors; scores clamp to [0,1].
EvalScores proxy_scores(const Checkpoint & base, const Checkpoint & adapted, const Checkpoint & merged);

class ProxyEvaluator : public Evaluator {
public:
    ProxyEvaluator(const Checkpoint & base, const Checkpoint & adapted) : base_(base), adapted_(adapted) {}

    EvalScores evaluate(const EvalRequest & request) override;

private:
    const Checkpoint & base_;
    const Checkpoint & adapted_;
};

std::string shell_quote(const std::string & s);

} // namespace spearmm
