#include "spearmm/analysis.hpp"
#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"
#include "spearmm/evaluator.hpp"
#include "spearmm/merger.hpp"
#include "spearmm/planner.hpp"
#include "spearmm/reports.hpp"
#include "spearmm/search.hpp"
#include "spearmm/synth.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

using namespace spearmm;
namespace fs = std::filesystem;

namespace {

struct MetricFlags {
    int k_top = 16;
    double alpha = 0.5;
    double beta = 0.5;
    std::string snr_source = "adapted";
    std::string arch_profile;
    unsigned threads = 0;

    void add(CLI::App * app) {
        app->add_option("--k-top", k_top, "Top singular values compared by SVDR")->capture_default_str();
        app->add_option("--alpha", alpha, "Weight of normalized SWCI in the fused score")->capture_default_str();
        app->add_option("--beta", beta, "Weight of normalized SVDR in the fused score")->capture_default_str();
        app->add_option("--snr-source", snr_source, "Which weights SWCI takes its SNR from: adapted, base or mean")
            ->capture_default_str();
        app->add_option("--arch-profile", arch_profile, "JSON file of {pattern, component} rules (default: LLaMA names)");
        app->add_option("--threads", threads, "Worker threads for scoring (0 = hardware concurrency)");
    }

    MetricConfig config() const {
        MetricConfig c;
        c.k_top = k_top;
        c.alpha = alpha;
        c.beta = beta;
        const auto src = parse_snr_source(snr_source);
        if (!src) throw ValidationError("unknown --snr-source '" + snr_source + "'");
        c.snr_source = *src;
        c.validate();
        return c;
    }

    ArchProfile profile() const { return arch_profile.empty() ? ArchProfile::llama() : ArchProfile::from_file(arch_profile); }
};

struct PolicyFlags {
    std::string policy = "balanced";
    std::optional<double> frac_mlp;
    std::optional<double> frac_attn;
    double t = 0.5;
    std::string mode = "combined";
    std::uint64_t seed = 0;
    std::string restore_end = "top";

    void add(CLI::App * app, bool with_fractions = true) {
        if (with_fractions) {
            app->add_option("--policy", policy, "conservative, balanced or aggressive")->capture_default_str();
            app->add_option("--frac-mlp", frac_mlp, "Restoration fraction for MLP tensors (overrides --policy)");
            app->add_option("--frac-attn", frac_attn, "Restoration fraction for attention tensors (overrides --policy)");
            app->add_option("--t", t, "Interpolation coefficient toward the base")->capture_default_str();
        }
        app->add_option("--mode", mode, "combined, swci_only, svdr_only, snr_only or random")->capture_default_str();
        app->add_option("--seed", seed, "Seed for random selection and search")->capture_default_str();
        app->add_option("--restore-end", restore_end, "Restore the top or bottom of each ranking")->capture_default_str();
    }

    Policy build() const {
        const auto name = parse_policy_name(policy);
        if (!name || *name == PolicyName::custom) throw ValidationError("unknown --policy '" + policy + "'");
        Policy p = Policy::preset(*name);
        if (frac_mlp || frac_attn) {
            p.name = PolicyName::custom;
            if (frac_mlp) p.frac_mlp = *frac_mlp;
            if (frac_attn) p.frac_attn = *frac_attn;
        }
        p.t = t;
        const auto m = parse_mode(mode);
        if (!m) throw ValidationError("unknown --mode '" + mode + "'");
        p.mode = *m;
        p.seed = seed;
        if (restore_end == "top") p.restore_end = RestoreEnd::top;
        else if (restore_end == "bottom") p.restore_end = RestoreEnd::bottom;
        else throw ValidationError("--restore-end must be top or bottom");
        p.validate();
        return p;
    }
};

struct EvaluatorFlags {
    std::string evaluator = "proxy";
    double timeout = 600.0;

    void add(CLI::App * app) {
        app->add_option("--evaluator", evaluator,
                        "'proxy' or a shell command run as `<cmd> --model <path>` that prints "
                        "{\"domain_score\": x, \"general_score\": y}")
            ->capture_default_str();
        app->add_option("--timeout", timeout, "Seconds allowed per evaluator call")->capture_default_str();
    }

    std::unique_ptr<Evaluator> make(const Checkpoint & base, const Checkpoint & adapted) const {
        if (evaluator == "proxy") return std::make_unique<ProxyEvaluator>(base, adapted);
        if (!(timeout > 0.0)) throw ValidationError("--timeout must be positive");
        return std::make_unique<CommandEvaluator>(evaluator,
                                                  std::chrono::milliseconds(static_cast<long long>(timeout * 1000.0)));
    }
};

struct Inputs {
    std::string base;
    std::string adapted;

    void add(CLI::App * app) {
        app->add_option("--base", base, "Base checkpoint (.safetensors)")->required();
        app->add_option("--adapted", adapted, "Adapted checkpoint (.safetensors)")->required();
    }
};

struct Loaded {
    Checkpoint base;
    Checkpoint adapted;
    Alignment alignment;
    std::vector<FusedRow> scores;
};

Loaded load_and_score(const Inputs & in, const MetricFlags & mf) {
    const MetricConfig cfg = mf.config();
    const ArchProfile profile = mf.profile();
    Loaded l;
    l.base = load_checkpoint(in.base);
    l.adapted = load_checkpoint(in.adapted);
    l.alignment = aligned_pairs(l.base, l.adapted);
    if (l.alignment.pairs.empty()) throw AlignmentError("the checkpoints share no tensor names");
    l.scores = score_checkpoints(l.base, l.adapted, cfg, profile, mf.threads);
    return l;
}

void emit(const std::string & out, const std::string & text) {
    if (out.empty() || out == "-") std::cout << text;
    else write_text_file(out, text);
}

std::vector<ComponentKind> parse_components(const std::vector<std::string> & names) {
    std::vector<ComponentKind> out;
    for (const auto & n : names) {
        const auto k = parse_component(n);
        if (!k) throw ValidationError("unknown component '" + n + "'");
        out.push_back(*k);
    }
    return out;
}

int run(int argc, char ** argv) {
    CLI::App app{"Spectral importance scoring and selective restoration merging for adapted checkpoints"};
    app.require_subcommand(1);

    // analyze
    Inputs an_in;
    MetricFlags an_mf;
    PolicyFlags an_pf;
    std::string an_out;
    auto * analyze = app.add_subcommand("analyze", "Score every aligned tensor and write a JSON report");
    an_in.add(analyze);
    an_mf.add(analyze);
    an_pf.add(analyze);
    analyze->add_option("--out", an_out, "Report path (default stdout)");

    // plan
    Inputs pl_in;
    MetricFlags pl_mf;
    PolicyFlags pl_pf;
    std::string pl_out;
    auto * plan = app.add_subcommand("plan", "Build a restoration plan and write it as JSON");
    pl_in.add(plan);
    pl_mf.add(plan);
    pl_pf.add(plan);
    plan->add_option("--out", pl_out, "Plan path (default stdout)");

    // merge
    Inputs mg_in;
    MetricFlags mg_mf;
    PolicyFlags mg_pf;
    std::string mg_out, mg_plan, mg_dtype = "f32";
    auto * merge = app.add_subcommand("merge", "Write a merged checkpoint and its plan (<out>.plan.json)");
    mg_in.add(merge);
    mg_mf.add(merge);
    mg_pf.add(merge);
    merge->add_option("--plan", mg_plan, "Apply this plan instead of building one from policy flags");
    merge->add_option("--out", mg_out, "Merged checkpoint path")->required();
    merge->add_option("--dtype", mg_dtype, "f32 or preserve")->capture_default_str();

    // frontier
    Inputs fr_in;
    MetricFlags fr_mf;
    PolicyFlags fr_pf;
    EvaluatorFlags fr_ef;
    std::string fr_out;
    double fr_start = 0.0, fr_stop = 1.0, fr_step = 0.1, fr_t = 1.0;
    auto * frontier = app.add_subcommand("frontier", "Sweep one restoration fraction over both groups; write CSV");
    fr_in.add(frontier);
    fr_mf.add(frontier);
    fr_pf.add(frontier, false);
    fr_ef.add(frontier);
    frontier->add_option("--start", fr_start)->capture_default_str();
    frontier->add_option("--stop", fr_stop)->capture_default_str();
    frontier->add_option("--step", fr_step)->capture_default_str();
    frontier->add_option("--t", fr_t, "Interpolation coefficient used at every point")->capture_default_str();
    frontier->add_option("--out", fr_out, "CSV path (default stdout)");

    // heatmap
    std::string hm_report, hm_out;
    auto * heatmap = app.add_subcommand("heatmap", "Per-component, per-layer normalized scores from a report");
    heatmap->add_option("--report", hm_report, "Report written by analyze")->required();
    heatmap->add_option("--out", hm_out, "CSV path (default stdout)");

    // search
    Inputs se_in;
    MetricFlags se_mf;
    PolicyFlags se_pf;
    EvaluatorFlags se_ef;
    std::string se_out, se_best;
    int se_budget = 20, se_init = 8;
    double se_lambda = 0.5;
    std::vector<std::string> se_dims{"frac_mlp", "frac_attn", "t"};
    auto * search = app.add_subcommand("search", "Bayesian search over fractions and t; trials as JSON lines");
    se_in.add(search);
    se_mf.add(search);
    se_pf.add(search, false);
    se_ef.add(search);
    search->add_option("--budget", se_budget)->capture_default_str();
    search->add_option("--init-points", se_init)->capture_default_str();
    search->add_option("--lambda", se_lambda, "Objective = lambda*general + (1-lambda)*domain")->capture_default_str();
    search->add_option("--dims", se_dims, "Searched dimensions")->delimiter(',')->capture_default_str();
    search->add_option("--out", se_out, "Trial log path (default stdout)");
    search->add_option("--best-out", se_best, "Also write the best merged checkpoint here");

    // synth
    SynthSpec sy;
    Perturbation sy_p;
    std::vector<std::string> sy_components;
    std::string sy_base, sy_adapted;
    auto * synth = app.add_subcommand("synth", "Write a seeded synthetic base/adapted checkpoint pair");
    synth->add_option("--layers", sy.layers)->capture_default_str();
    synth->add_option("--hidden", sy.hidden)->capture_default_str();
    synth->add_option("--seed", sy.seed)->capture_default_str();
    synth->add_option("--lowrank-rank", sy_p.lowrank_rank)->capture_default_str();
    synth->add_option("--lowrank-scale", sy_p.lowrank_scale)->capture_default_str();
    synth->add_option("--noise-scale", sy_p.noise_scale)->capture_default_str();
    synth->add_option("--target-components", sy_components, "Comma list; empty means all")->delimiter(',');
    synth->add_option("--target-layers", sy_p.target_layers, "Comma list; empty means all")->delimiter(',');
    synth->add_option("--out-base", sy_base)->required();
    synth->add_option("--out-adapted", sy_adapted)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*analyze) {
        const Policy policy = an_pf.build();
        const auto l = load_and_score(an_in, an_mf);
        AnalysisReport rep = make_report(l.scores, build_plan(l.scores, policy), an_mf.config(), l.alignment);
        rep.base_digest = sha256_file(an_in.base);
        rep.adapted_digest = sha256_file(an_in.adapted);
        emit(an_out, rep.to_json().dump(2) + "\n");
    } else if (*plan) {
        const Policy policy = pl_pf.build();
        const auto l = load_and_score(pl_in, pl_mf);
        emit(pl_out, plan_to_json(build_plan(l.scores, policy)).dump(2) + "\n");
    } else if (*merge) {
        DTypePolicy dtype;
        if (mg_dtype == "f32") dtype = DTypePolicy::force_f32;
        else if (mg_dtype == "preserve") dtype = DTypePolicy::preserve;
        else throw ValidationError("--dtype must be f32 or preserve");

        MergePlan mp;
        Checkpoint base, adapted;
        if (!mg_plan.empty()) {
            mp = load_plan(mg_plan);
            base = load_checkpoint(mg_in.base);
            adapted = load_checkpoint(mg_in.adapted);
        } else {
            const Policy policy = mg_pf.build();
            auto l = load_and_score(mg_in, mg_mf);
            mp = build_plan(l.scores, policy);
            base = std::move(l.base);
            adapted = std::move(l.adapted);
        }
        const Checkpoint merged = apply_plan(base, adapted, mp);
        save_checkpoint(merged, mg_out, dtype);
        write_text_file(mg_out + ".plan.json", plan_to_json(mp).dump(2) + "\n");
        std::cerr << "restored " << mp.restored_count() << " of " << mp.entries.size() << " tensors; plan digest "
                  << mp.config_digest << "\n";
    } else if (*frontier) {
        const Policy policy = fr_pf.build();
        const auto l = load_and_score(fr_in, fr_mf);
        const auto ev = fr_ef.make(l.base, l.adapted);
        const auto pts =
            run_frontier(l.base, l.adapted, l.scores, fraction_grid(fr_start, fr_stop, fr_step), fr_t, policy, *ev);
        emit(fr_out, frontier_csv(pts));
    } else if (*heatmap) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(hm_report));
        } catch (const nlohmann::json::exception & e) {
            throw ValidationError("report '" + hm_report + "' is not valid JSON: " + e.what());
        }
        emit(hm_out, build_heatmap(AnalysisReport::from_json(j)).to_csv());
    } else if (*search) {
        const Policy policy = se_pf.build();
        SearchSpace space;
        space.dims.clear();
        for (const auto & d : se_dims) {
            const auto dim = parse_dim(d);
            if (!dim) throw ValidationError("unknown search dimension '" + d + "'");
            space.dims.push_back({*dim, 0.0, 1.0});
        }
        space.budget = se_budget;
        space.init_points = se_init;
        space.seed = policy.seed;
        space.fixed = {policy.frac_mlp, policy.frac_attn, policy.t};
        space.validate();
        if (!(se_lambda >= 0.0 && se_lambda <= 1.0)) throw ValidationError("--lambda must lie in [0,1]");

        const auto l = load_and_score(se_in, se_mf);
        const auto ev = se_ef.make(l.base, l.adapted);
        SearchOptions opt;
        opt.lambda = se_lambda;
        opt.base_policy = policy;
        const auto res = run_search(l.base, l.adapted, l.scores, space, *ev, opt);

        std::ostringstream log;
        for (const auto & t : res.history) log << canonical_dump(t.to_json()) << "\n";
        emit(se_out, log.str());
        if (!se_best.empty()) {
            const MergePlan best = plan_for_config(l.scores, res.best.config, policy);
            save_checkpoint(apply_plan(l.base, l.adapted, best), se_best, DTypePolicy::force_f32);
            write_text_file(se_best + ".plan.json", plan_to_json(best).dump(2) + "\n");
        }
        std::cerr << "best trial " << res.best.index << ": " << canonical_dump(res.best.to_json()) << "\n";
    } else if (*synth) {
        sy_p.target_components = parse_components(sy_components);
        if (sy_p.lowrank_scale > 0.0 || sy_p.noise_scale > 0.0) sy.perturbations.push_back(sy_p);
        const auto pair = synthesize(sy);
        save_checkpoint(pair.base, sy_base, DTypePolicy::force_f32);
        save_checkpoint(pair.adapted, sy_adapted, DTypePolicy::force_f32);
    }
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    try {
        return run(argc, argv);
    } catch (const AlignmentError & e) {
        std::cerr << "alignment error: " << e.what() << "\n";
        return 2;
    } catch (const InputError & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception & e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
