#include "doctest.h"

#include "spearmm/errors.hpp"
#include "spearmm/metrics.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <numeric>

using namespace spearmm;

namespace {

MatrixView view(const std::vector<float> & d, std::size_t r, std::size_t c) {
    return {d, r, c};
}

std::vector<float> scaled(const std::vector<float> & w, float c) {
    auto out = w;
    for (auto & v : out) v *= c;
    return out;
}

MetricRow row(const std::string & name, int layer, ComponentKind k, double swci, double svdr, double snr = 0.0) {
    MetricRow r;
    r.locator = {name, layer, k};
    r.raw.swci = swci;
    r.raw.svdr = svdr;
    r.raw.snr = snr;
    return r;
}

} // namespace

TEST_CASE("SWCI") {
    const MetricConfig cfg;
    const auto w = oracle::gaussian(16 * 16, 1);

    SUBCASE("no displacement") {
        const auto r = compute_swci(view(w, 16, 16), view(w, 16, 16), cfg);
        CHECK(r.swci == 0.0);
        CHECK(r.rel_change == 0.0);
    }
    SUBCASE("doubling gives unit relative change") {
        const auto w2 = scaled(w, 2.0f);
        const auto r = compute_swci(view(w, 16, 16), view(w2, 16, 16), cfg);
        CHECK(r.rel_change == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(r.snr == doctest::Approx(estimate_snr(view(w2, 16, 16)).snr));
        CHECK(r.swci == doctest::Approx(r.snr).epsilon(1e-7));
    }
    SUBCASE("zero base is capped") {
        const std::vector<float> zero(16 * 16, 0.0f);
        // a strong rank-one update so that snr is clearly non-zero
        auto u = oracle::unit_vector(16, 5);
        std::vector<float> wp(16 * 16);
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) wp[i * 16 + j] = 10.0f * u[i] * u[j] + 0.01f * w[i * 16 + j];
        const auto r = compute_swci(view(zero, 16, 16), view(wp, 16, 16), cfg);
        CHECK(r.rel_change == 1e3);
        CHECK(r.snr > 0.0);
        CHECK(r.swci == doctest::Approx(1e3 * r.snr));
    }
    SUBCASE("snr source selection") {
        const auto w2 = oracle::gaussian(16 * 16, 2);
        MetricConfig b = cfg;
        b.snr_source = SnrSource::base;
        MetricConfig m = cfg;
        m.snr_source = SnrSource::mean;
        const double sb = estimate_snr(view(w, 16, 16)).snr;
        const double sa = estimate_snr(view(w2, 16, 16)).snr;
        CHECK(compute_swci(view(w, 16, 16), view(w2, 16, 16), b).snr == doctest::Approx(sb));
        CHECK(compute_swci(view(w, 16, 16), view(w2, 16, 16), m).snr == doctest::Approx(0.5 * (sa + sb)));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(compute_swci(view(w, 16, 16), view(w, 8, 32), cfg), ValidationError);
    }
}

TEST_CASE("SVDR") {
    MetricConfig cfg;
    const std::vector<float> d = {4, 0, 0, 0, 0, 3, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1};
    CHECK(compute_svdr(view(d, 4, 4), view(d, 4, 4), cfg) == 0.0);
    CHECK(compute_svdr(view(d, 4, 4), view(scaled(d, 0.5f), 4, 4), cfg) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(compute_svdr(view(d, 4, 4), view(scaled(d, 2.0f), 4, 4), cfg) == doctest::Approx(-1.0).epsilon(1e-9));

    cfg.k_top = 2; // (4+3 - 2-1.5) / 7
    CHECK(compute_svdr(view(d, 4, 4), view(scaled(d, 0.5f), 4, 4), cfg) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(svdr_from_spectra({{4, 3, 2, 1}, 4, 4}, {{3, 3, 2, 1}, 4, 4}, 2, kEpsilon) == doctest::Approx(1.0 / 7.0));

    SUBCASE("upper bound and full-rank lower bound") {
        MetricConfig full;
        full.k_top = 64;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto a = oracle::gaussian(10 * 6, s);
            const auto b = oracle::gaussian(10 * 6, s + 100, 0.1 + 0.2 * double(s));
            const double v = compute_svdr(view(a, 10, 6), view(b, 10, 6), full);
            const auto sa = singular_values(view(a, 10, 6)).singular_values;
            const auto sb = singular_values(view(b, 10, 6)).singular_values;
            const double ratio = std::accumulate(sb.begin(), sb.end(), 0.0) / std::accumulate(sa.begin(), sa.end(), 0.0);
            CHECK(v <= 1.0);
            CHECK(v >= 1.0 - ratio - 1e-9);
        }
    }
}

TEST_CASE("joint scaling leaves both metrics unchanged") {
    const MetricConfig cfg;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto a = oracle::gaussian(24 * 12, s);
        auto b = a;
        const auto delta = oracle::gaussian(24 * 12, s + 50, 0.3);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += delta[i];
        const auto m = compute_metrics(view(a, 24, 12), view(b, 24, 12), cfg);
        for (float c : {0.25f, 8.0f}) {
            const auto ac = scaled(a, c);
            const auto bc = scaled(b, c);
            const auto mc = compute_metrics(view(ac, 24, 12), view(bc, 24, 12), cfg);
            CHECK(mc.swci == doctest::Approx(m.swci).epsilon(1e-6));
            CHECK(mc.svdr == doctest::Approx(m.svdr).epsilon(1e-6));
        }
    }
}

TEST_CASE("compute_metrics agrees with the single-metric entry points") {
    const MetricConfig cfg;
    const auto a = oracle::gaussian(20 * 20, 8);
    const auto b = oracle::gaussian(20 * 20, 9);
    const auto m = compute_metrics(view(a, 20, 20), view(b, 20, 20), cfg);
    const auto s = compute_swci(view(a, 20, 20), view(b, 20, 20), cfg);
    CHECK(m.swci == s.swci);
    CHECK(m.rel_change == s.rel_change);
    CHECK(m.svdr == compute_svdr(view(a, 20, 20), view(b, 20, 20), cfg));
}

TEST_CASE("fuse_scores") {
    MetricConfig cfg;

    SUBCASE("single-row group is neutral") {
        const auto out = fuse_scores({row("x", 0, ComponentKind::q_proj, 3.0, -0.2)}, cfg);
        CHECK(out[0].swci_norm == 0.5);
        CHECK(out[0].svdr_norm == 0.5);
        CHECK(out[0].fused == doctest::Approx(0.5 * (cfg.alpha + cfg.beta)));
    }
    SUBCASE("min-max endpoints") {
        const auto out = fuse_scores({row("a", 0, ComponentKind::mlp_up, 10, 1), row("b", 1, ComponentKind::mlp_up, 0, 0)}, cfg);
        CHECK(out[0].fused == 1.0);
        CHECK(out[1].fused == 0.0);
    }
    SUBCASE("groups normalize independently") {
        const auto out = fuse_scores({row("a", 0, ComponentKind::q_proj, 10, 1), row("b", 0, ComponentKind::k_proj, 0, 0),
                                      row("c", 1, ComponentKind::q_proj, 5, 0.5), row("d", 1, ComponentKind::k_proj, 1, 1)},
                                     cfg);
        CHECK(out[0].fused == 1.0);
        CHECK(out[2].fused == 0.0);
        CHECK(out[1].fused == 0.0);
        CHECK(out[3].fused == 1.0);
    }
    SUBCASE("alpha=1 orders like raw SWCI") {
        cfg.alpha = 1.0;
        cfg.beta = 0.0;
        const std::vector<MetricRow> rows = {row("a", 0, ComponentKind::o_proj, 0.7, 0.9), row("b", 1, ComponentKind::o_proj, 2.5, -0.4),
                                             row("c", 2, ComponentKind::o_proj, 1.1, 0.1)};
        const auto out = fuse_scores(rows, cfg);
        std::vector<std::size_t> by_raw = {0, 1, 2}, by_fused = {0, 1, 2};
        std::sort(by_raw.begin(), by_raw.end(), [&](auto x, auto y) { return rows[x].raw.swci > rows[y].raw.swci; });
        std::sort(by_fused.begin(), by_fused.end(), [&](auto x, auto y) { return out[x].fused > out[y].fused; });
        CHECK(by_raw == by_fused);
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(fuse_scores({}, cfg), ValidationError);
    }
}

TEST_CASE("fused score properties over random groups") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 50; ++trial) {
        MetricConfig cfg;
        cfg.alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        cfg.beta = 1.0 - cfg.alpha * 0.5;
        std::vector<MetricRow> rows;
        for (int i = 0; i < 9; ++i) rows.push_back(row("r" + std::to_string(i), i, ComponentKind::v_proj, std::abs(u(rng)), u(rng)));
        const auto out = fuse_scores(rows, cfg);
        for (const auto & r : out) {
            CHECK(r.fused >= 0.0);
            CHECK(r.fused <= cfg.alpha + cfg.beta + 1e-12);
        }
        // common positive scale on SWCI leaves the ranking unchanged
        auto scaled_rows = rows;
        for (auto & r : scaled_rows) r.raw.swci *= 7.5;
        const auto out2 = fuse_scores(scaled_rows, cfg);
        std::vector<std::size_t> o1(9), o2(9);
        std::iota(o1.begin(), o1.end(), 0);
        std::iota(o2.begin(), o2.end(), 0);
        std::stable_sort(o1.begin(), o1.end(), [&](auto x, auto y) { return out[x].fused > out[y].fused; });
        std::stable_sort(o2.begin(), o2.end(), [&](auto x, auto y) { return out2[x].fused > out2[y].fused; });
        CHECK(o1 == o2);
    }
}

TEST_CASE("config validation") {
    MetricConfig cfg;
    cfg.alpha = 0;
    cfg.beta = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = MetricConfig{};
    cfg.k_top = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
