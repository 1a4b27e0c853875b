#include "spearmm/metrics.hpp"

#include "spearmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace spearmm {

namespace {

void require_same_shape(const MatrixView & a, const MatrixView & b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw ValidationError("shape mismatch: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                              std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
}

double relative_change(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg) {
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < base.data.size(); ++i) {
        const double d = static_cast<double>(adapted.data[i]) - static_cast<double>(base.data[i]);
        diff += d * d;
        norm += static_cast<double>(base.data[i]) * static_cast<double>(base.data[i]);
    }
    return std::min(std::sqrt(diff) / (std::sqrt(norm) + cfg.epsilon), cfg.relative_change_cap);
}

double pick_snr(const Spectrum & base, const Spectrum & adapted, SnrSource src) {
    switch (src) {
        case SnrSource::adapted: return estimate_snr(adapted).snr;
        case SnrSource::base:    return estimate_snr(base).snr;
        case SnrSource::mean:    return 0.5 * (estimate_snr(base).snr + estimate_snr(adapted).snr);
    }
    return 0.0;
}

} // namespace

std::string_view snr_source_name(SnrSource s) {
    switch (s) {
        case SnrSource::adapted: return "adapted";
        case SnrSource::base:    return "base";
        case SnrSource::mean:    return "mean";
    }
    return "adapted";
}

std::optional<SnrSource> parse_snr_source(std::string_view s) {
    if (s == "adapted") return SnrSource::adapted;
    if (s == "base") return SnrSource::base;
    if (s == "mean") return SnrSource::mean;
    return std::nullopt;
}

void MetricConfig::validate() const {
    if (k_top < 1) throw ValidationError("k_top must be >= 1");
    if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) throw ValidationError("alpha and beta must lie in [0,1]");
    if (!(alpha + beta > 0.0)) throw ValidationError("alpha + beta must be positive");
    if (!(relative_change_cap > 0.0)) throw ValidationError("relative_change_cap must be positive");
}

double svdr_from_spectra(const Spectrum & base, const Spectrum & adapted, int k_top, double epsilon) {
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_top),
                                                 std::min(base.singular_values.size(), adapted.singular_values.size()));
    double drop = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        drop += base.singular_values[i] - adapted.singular_values[i];
        total += base.singular_values[i];
    }
    return drop / (total + epsilon);
}

SwciResult compute_swci(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg) {
    require_same_shape(base, adapted);
    SwciResult r;
    r.rel_change = relative_change(base, adapted, cfg);
    const Spectrum sb = cfg.snr_source == SnrSource::adapted ? Spectrum{} : singular_values(base);
    const Spectrum sa = cfg.snr_source == SnrSource::base ? Spectrum{} : singular_values(adapted);
    r.snr = pick_snr(sb, sa, cfg.snr_source);
    r.swci = r.rel_change * r.snr;
    return r;
}

double compute_svdr(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg) {
    require_same_shape(base, adapted);
    return svdr_from_spectra(singular_values(base), singular_values(adapted), cfg.k_top, cfg.epsilon);
}

RawMetrics compute_metrics(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg) {
    require_same_shape(base, adapted);
    const Spectrum sb = singular_values(base);
    const Spectrum sa = singular_values(adapted);
    RawMetrics m;
    m.rel_change = relative_change(base, adapted, cfg);
    m.snr = pick_snr(sb, sa, cfg.snr_source);
    m.swci = m.rel_change * m.snr;
    m.svdr = svdr_from_spectra(sb, sa, cfg.k_top, cfg.epsilon);
    return m;
}

std::vector<double> minmax_normalize(const std::vector<double> & values) {
    std::vector<double> out(values.size(), 0.5);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::clamp((values[i] - *lo) / range, 0.0, 1.0);
    }
    return out;
}

std::vector<FusedRow> fuse_scores(const std::vector<MetricRow> & rows, const MetricConfig & cfg) {
    if (rows.empty()) {
        throw ValidationError("no rows to fuse");
    }
    std::map<ComponentKind, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        groups[rows[i].locator.component].push_back(i);
    }

    std::vector<FusedRow> out(rows.size());
    for (const auto & [kind, idx] : groups) {
        std::vector<double> swci, svdr, snr;
        for (std::size_t i : idx) {
            swci.push_back(rows[i].raw.swci);
            svdr.push_back(rows[i].raw.svdr);
            snr.push_back(rows[i].raw.snr);
        }
        const auto swci_n = minmax_normalize(swci);
        const auto svdr_n = minmax_normalize(svdr);
        const auto snr_n = minmax_normalize(snr);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            FusedRow & r = out[idx[j]];
            r.locator = rows[idx[j]].locator;
            r.raw = rows[idx[j]].raw;
            r.swci_norm = swci_n[j];
            r.svdr_norm = svdr_n[j];
            r.snr_norm = snr_n[j];
            r.fused = cfg.alpha * r.swci_norm + cfg.beta * r.svdr_norm;
        }
    }
    return out;
}

} // namespace spearmm
