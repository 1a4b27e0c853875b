#include "doctest.h"
#include "oracles.hpp"

#include "spearmm/errors.hpp"
#include "spearmm/merger.hpp"
#include "spearmm/synth.hpp"
#include "spearmm/analysis.hpp"

#include <cmath>
#include <cstring>

using namespace spearmm;

namespace {

double norm(std::span<const float> v) {
    double s = 0;
    for (float x : v) s += double(x) * double(x);
    return std::sqrt(s);
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

} // namespace

TEST_CASE("orthogonal midpoint") {
    const std::vector<float> a{1, 0}, b{0, 1};
    const auto r = slerp(a, b, {.t = 0.5});
    CHECK(r[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-7));
    CHECK(r[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-7));
    CHECK(norm(r) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("endpoints are exact") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = oracle::gaussian(37, seed);
        const auto b = oracle::gaussian(37, seed + 100, 3.0);
        CHECK(bit_equal(slerp(a, b, {.t = 0.0}), a));
        CHECK(bit_equal(slerp(a, b, {.t = 1.0}), b));
    }
}

TEST_CASE("unit sphere norm preservation") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto a = oracle::unit_vector(100, 2 * seed);
        const auto b = oracle::unit_vector(100, 2 * seed + 1);
        for (double t : {0.25, 0.5, 0.75}) {
            const double n = norm(slerp(a, b, {.t = t}));
            CHECK(n >= 1 - 1e-6);
            CHECK(n <= 1 + 1e-6);
        }
    }
}

TEST_CASE("matches the scalar oracle") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto a = oracle::gaussian(4, seed);
        const auto b = oracle::gaussian(4, seed + 1000);
        for (double t : {0.1, 0.5, 0.9}) {
            const auto got = slerp(a, b, {.t = t});
            const auto want = oracle::scalar_slerp(a, b, t);
            for (int i = 0; i < 4; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-6);
        }
    }
}

// The cone bound needs a non-negative inner product: for obtuse pairs of unequal
// norm the great-circle path bulges past the larger radius.
TEST_CASE("norm bound and monotone approach") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto a = oracle::gaussian(64, seed, 2.0);
        auto b = oracle::gaussian(64, seed + 500, 0.5);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += (0.05f + 0.05f * float(seed % 7)) * a[i];
        const double na = norm(a), nb = norm(b);
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 10; ++i) {
            const auto r = slerp(a, b, {.t = i / 10.0});
            const double n = norm(r);
            CHECK(n >= std::min(na, nb) * (1 - 1e-6));
            CHECK(n <= std::max(na, nb) * (1 + 1e-6));
            const double d = frobenius_distance(r, b);
            CHECK(d <= prev + 1e-6);
            prev = d;
        }
    }
}

TEST_CASE("obtuse pairs of unequal norm can exceed the larger radius") {
    const std::vector<float> a{3, 0}, b{-0.5f, 0.5f};
    const auto r = slerp(a, b, {.t = 0.5});
    CHECK(norm(r) > 3.0);
}

TEST_CASE("fallbacks and errors") {
    const std::vector<float> a{1, 2, 3, 4};
    std::vector<float> b{2, 4, 6, 8};
    for (double t : {0.3, 0.5, 0.8}) CHECK(bit_equal(slerp(a, b, {.t = t}), lerp(a, b, t)));

    const std::vector<float> zero(4, 0.0f);
    CHECK(bit_equal(slerp(a, zero, {.t = 0.5}), lerp(a, zero, 0.5)));

    const std::vector<float> neg{-1, -2, -3, -4};
    try {
        slerp(a, neg, {.t = 0.5}, "layer.w");
        FAIL("expected an error");
    } catch (const ValidationError & e) {
        CHECK(std::string(e.what()).find("layer.w") != std::string::npos);
    }
    CHECK_THROWS_AS(slerp(a, std::vector<float>{1, 2}, {.t = 0.5}), ValidationError);
    CHECK_THROWS_AS(slerp(a, b, {.t = 1.5}), ValidationError);
}

namespace {

SynthPair small_pair() {
    SynthSpec spec;
    spec.layers = 4;
    spec.hidden = 16;
    spec.seed = 11;
    spec.perturbations.push_back({.lowrank_rank = 2, .lowrank_scale = 1.0, .noise_scale = 0.01});
    return synthesize(spec);
}

} // namespace

TEST_CASE("apply_plan") {
    const auto pair = small_pair();
    const auto scores = score_checkpoints(pair.base, pair.adapted, {}, ArchProfile::llama());

    SUBCASE("empty restore set copies adapted") {
        const auto merged = apply_plan(pair.base, pair.adapted, build_plan(scores, Policy::custom(0, 0)));
        for (const auto & [name, rec] : pair.adapted.tensors) CHECK(bit_equal(merged.find(name)->data, rec.data));
        CHECK(merged.metadata.count(std::string(kPlanDigestKey)) == 1);
        CHECK(merged.metadata.count(std::string(kPolicyKey)) == 1);
    }
    SUBCASE("all restored at t=1 gives base on restored entries") {
        const auto plan = build_plan(scores, Policy::custom(1, 1, 1.0));
        const auto merged = apply_plan(pair.base, pair.adapted, plan);
        for (const auto & e : plan.entries) {
            const auto & want = e.restore ? pair.base.find(e.name)->data : pair.adapted.find(e.name)->data;
            CHECK(bit_equal(merged.find(e.name)->data, want));
        }
        CHECK(merged.metadata.at(std::string(kPlanDigestKey)) == plan.config_digest);
    }
    SUBCASE("hand-built 2x2 tensor") {
        Checkpoint base, adapted;
        base.add({"model.layers.0.self_attn.q_proj.weight", {2, 2}, DType::f32, {1, 0, 0, 1}});
        adapted.add({"model.layers.0.self_attn.q_proj.weight", {2, 2}, DType::f32, {0.5f, 2, -1, 1.5f}});
        base.add({"model.layers.0.mlp.up_proj.weight", {2, 2}, DType::f32, {1, 1, 1, 1}});
        adapted.add({"model.layers.0.mlp.up_proj.weight", {2, 2}, DType::f32, {1, 1, 1, 1}});
        const auto s = score_checkpoints(base, adapted, {}, ArchProfile::llama());
        const auto plan = build_plan(s, Policy::custom(1, 1, 0.3));
        const auto merged = apply_plan(base, adapted, plan);
        const std::string q = "model.layers.0.self_attn.q_proj.weight";
        const auto want = oracle::scalar_slerp(adapted.find(q)->data, base.find(q)->data, 0.3);
        const auto & got = merged.find(q)->data;
        for (int i = 0; i < 4; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-6);
    }
    SUBCASE("missing or mismatched tensors") {
        auto plan = build_plan(scores, Policy::custom(0.5, 0.5));
        Checkpoint trimmed = pair.adapted;
        trimmed.tensors.erase(plan.entries.front().name);
        CHECK_THROWS_AS(apply_plan(pair.base, trimmed, plan), InputError);
    }
}

TEST_CASE("aggregate distance to base shrinks as more is restored") {
    const auto pair = small_pair();
    const auto scores = score_checkpoints(pair.base, pair.adapted, {}, ArchProfile::llama());
    for (double t : {1.0, 0.5}) {
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 10; ++i) {
            const auto merged = apply_plan(pair.base, pair.adapted, build_plan(scores, Policy::custom(i / 10.0, i / 10.0, t)));
            double d = 0;
            for (const auto & [name, rec] : merged.tensors) d += frobenius_distance(rec.data, pair.base.find(name)->data);
            if (t == 1.0)
                CHECK(d <= prev);
            else
                CHECK(d <= prev + 1e-6);
            prev = d;
        }
    }
}
