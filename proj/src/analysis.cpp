#include "spearmm/analysis.hpp"

#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace spearmm {

using nlohmann::json;

std::vector<FusedRow> score_checkpoints(const Checkpoint & base, const Checkpoint & adapted, const MetricConfig & cfg,
                                        const ArchProfile & profile, unsigned threads) {
    cfg.validate();
    const Alignment al = aligned_pairs(base, adapted);
    std::vector<MetricRow> rows(al.pairs.size());

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(rows.size(), 1)));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
                const auto & pair = al.pairs[i];
                rows[i].locator = classify(pair.base->name, profile);
                rows[i].raw = compute_metrics(pair.base->matrix(), pair.adapted->matrix(), cfg);
            } catch (const InputError & e) {
                std::lock_guard lock(failure_mu);
                if (!failure) {
                    failure = std::make_exception_ptr(ValidationError("tensor '" + al.pairs[i].base->name + "': " + e.what()));
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);
    return fuse_scores(rows, cfg);
}

AnalysisReport make_report(const std::vector<FusedRow> & scores, const MergePlan & plan, const MetricConfig & cfg,
                           const Alignment & alignment) {
    AnalysisReport rep;
    rep.metrics = cfg;
    rep.policy = plan.policy;
    rep.unmatched = alignment.unmatched;
    for (const auto & s : scores) {
        ImportanceRow r;
        r.name = s.locator.name;
        r.layer = s.locator.layer;
        r.component = s.locator.component;
        r.snr = s.raw.snr;
        r.swci = s.raw.swci;
        r.svdr = s.raw.svdr;
        r.rel_change = s.raw.rel_change;
        r.fused = s.fused;
        if (const PlanEntry * e = plan.find(r.name)) {
            r.rank_in_group = e->rank_in_group;
            r.restore = e->restore;
        }
        rep.rows.push_back(std::move(r));
    }
    std::sort(rep.rows.begin(), rep.rows.end(), [](const ImportanceRow & a, const ImportanceRow & b) {
        if (a.component != b.component) return a.component < b.component;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.name < b.name;
    });
    return rep;
}

json AnalysisReport::to_json() const {
    json jrows = json::array();
    for (const auto & r : rows) {
        jrows.push_back({
            {"name", r.name},
            {"layer", r.layer ? json(*r.layer) : json(nullptr)},
            {"component", component_name(r.component)},
            {"snr", round9(r.snr)},
            {"swci", round9(r.swci)},
            {"svdr", round9(r.svdr)},
            {"rel_change", round9(r.rel_change)},
            {"fused", round9(r.fused)},
            {"rank_in_group", r.rank_in_group},
            {"restore", r.restore},
        });
    }
    return {
        {"rows", std::move(jrows)},
        {"config",
         {{"metrics",
           {{"k_top", metrics.k_top},
            {"alpha", round9(metrics.alpha)},
            {"beta", round9(metrics.beta)},
            {"epsilon", metrics.epsilon},
            {"relative_change_cap", round9(metrics.relative_change_cap)},
            {"snr_source", snr_source_name(metrics.snr_source)}}},
          {"policy", policy.to_json()}}},
        {"checkpoints", {{"base_sha256", base_digest}, {"adapted_sha256", adapted_digest}}},
        {"unmatched", unmatched},
    };
}

AnalysisReport AnalysisReport::from_json(const json & j) {
    AnalysisReport rep;
    try {
        for (const auto & jr : j.at("rows")) {
            ImportanceRow r;
            r.name = jr.at("name").get<std::string>();
            if (!jr.at("layer").is_null()) r.layer = jr.at("layer").get<int>();
            const auto comp = parse_component(jr.at("component").get<std::string>());
            if (!comp) throw ValidationError("report row '" + r.name + "' has an unknown component");
            r.component = *comp;
            r.snr = jr.at("snr").get<double>();
            r.swci = jr.at("swci").get<double>();
            r.svdr = jr.at("svdr").get<double>();
            r.rel_change = jr.at("rel_change").get<double>();
            r.fused = jr.at("fused").get<double>();
            r.rank_in_group = jr.at("rank_in_group").get<int>();
            r.restore = jr.at("restore").get<bool>();
            rep.rows.push_back(std::move(r));
        }
        const auto & m = j.at("config").at("metrics");
        rep.metrics.k_top = m.at("k_top").get<int>();
        rep.metrics.alpha = m.at("alpha").get<double>();
        rep.metrics.beta = m.at("beta").get<double>();
        rep.metrics.relative_change_cap = m.at("relative_change_cap").get<double>();
        const auto src = parse_snr_source(m.at("snr_source").get<std::string>());
        if (!src) throw ValidationError("report has an unknown snr_source");
        rep.metrics.snr_source = *src;
        rep.policy = Policy::from_json(j.at("config").at("policy"));
        rep.base_digest = j.at("checkpoints").at("base_sha256").get<std::string>();
        rep.adapted_digest = j.at("checkpoints").at("adapted_sha256").get<std::string>();
        rep.unmatched = j.at("unmatched").get<std::vector<std::string>>();
    } catch (const json::exception & e) {
        throw ValidationError(std::string("malformed analysis report: ") + e.what());
    }
    return rep;
}

} // namespace spearmm
