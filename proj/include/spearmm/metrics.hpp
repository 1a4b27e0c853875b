#pragma once

#include "spearmm/archmap.hpp"
#include "spearmm/checkpoint_io.hpp"
#include "spearmm/spectral.hpp"

#include <string_view>
#include <vector>

namespace spearmm {

enum class SnrSource { adapted, base, mean };

std::string_view snr_source_name(SnrSource s);
std::optional<SnrSource> parse_snr_source(std::string_view s);

struct MetricConfig {
    int k_top = 16;
    double alpha = 0.5;
    double beta = 0.5;
    double epsilon = kEpsilon;
    double relative_change_cap = 1e3;
    SnrSource snr_source = SnrSource::adapted;

    // Throws ValidationError.
    void validate() const;
};

struct RawMetrics {
    double swci = 0.0;
    double svdr = 0.0;
    double snr = 0.0;
    double rel_change = 0.0; // already capped
};

struct SwciResult {
    double swci = 0.0;
    double rel_change = 0.0;
    double snr = 0.0;
};

SwciResult compute_swci(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg);
double compute_svdr(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg);

// Both metrics from one SVD per side.
RawMetrics compute_metrics(const MatrixView & base, const MatrixView & adapted, const MetricConfig & cfg);

double svdr_from_spectra(const Spectrum & base, const Spectrum & adapted, int k_top, double epsilon);

struct MetricRow {
    ParamLocator locator;
    RawMetrics raw;
};

struct FusedRow {
    ParamLocator locator;
    RawMetrics raw;
    double swci_norm = 0.0;
    double svdr_norm = 0.0;
    double snr_norm = 0.0;
    double fused = 0.0;
};

// Min-max to [0,1]; a constant column maps to 0.5.
std::vector<double> minmax_normalize(const std::vector<double> & values);

// Normalizes within each component group and fuses. Output keeps input order.
// Throws ValidationError on empty input.
std::vector<FusedRow> fuse_scores(const std::vector<MetricRow> & rows, const MetricConfig & cfg);

} // namespace spearmm
