#include "spearmm/merger.hpp"

#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace spearmm {

namespace {

std::string label(std::string_view name) {
    return name.empty() ? std::string("slerp") : "tensor '" + std::string(name) + "'";
}

} // namespace

void SlerpParams::validate() const {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("slerp t must lie in [0,1]");
    if (!(parallel_threshold > 0.0) || !(zero_norm_threshold > 0.0)) {
        throw ValidationError("slerp thresholds must be positive");
    }
}

std::vector<float> lerp(std::span<const float> adapted, std::span<const float> base, double t) {
    std::vector<float> out(adapted.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((1.0 - t) * adapted[i] + t * base[i]);
    }
    return out;
}

std::vector<float> slerp(std::span<const float> adapted, std::span<const float> base, const SlerpParams & p,
                         std::string_view name) {
    p.validate();
    if (adapted.size() != base.size()) {
        throw ValidationError(label(name) + ": slerp inputs differ in length");
    }
    if (p.t == 0.0) return {adapted.begin(), adapted.end()};
    if (p.t == 1.0) return {base.begin(), base.end()};

    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < adapted.size(); ++i) {
        const double a = adapted[i];
        const double b = base[i];
        if (!std::isfinite(a) || !std::isfinite(b)) {
            throw ValidationError(label(name) + ": non-finite value at index " + std::to_string(i));
        }
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < p.zero_norm_threshold || nb < p.zero_norm_threshold) {
        return lerp(adapted, base, p.t);
    }
    const double cosine = std::clamp(dot / (na * nb), -1.0, 1.0);
    if (cosine < -1.0 + p.parallel_threshold) {
        throw ValidationError(label(name) + ": antipodal tensors have no unique interpolation path");
    }
    if (1.0 - cosine < p.parallel_threshold) {
        return lerp(adapted, base, p.t);
    }

    const double omega = std::acos(cosine);
    const double s = std::sin(omega);
    const double wa = std::sin((1.0 - p.t) * omega) / s;
    const double wb = std::sin(p.t * omega) / s;
    std::vector<float> out(adapted.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(wa * adapted[i] + wb * base[i]);
    }
    return out;
}

double frobenius_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

Checkpoint apply_plan(const Checkpoint & base, const Checkpoint & adapted, const MergePlan & plan,
                      const SlerpParams & thresholds) {
    Checkpoint out = adapted;
    for (const auto & e : plan.entries) {
        const TensorRecord * a = adapted.find(e.name);
        const TensorRecord * b = base.find(e.name);
        if (!a || !b) {
            throw InputError("plan names tensor '" + e.name + "' which is missing from the " +
                             (a ? "base" : "adapted") + " checkpoint");
        }
        if (a->shape != b->shape) {
            throw AlignmentError("tensor '" + e.name + "' has different shapes in base and adapted");
        }
        if (!e.restore) continue;
        SlerpParams p = thresholds;
        p.t = e.t;
        out.tensors.at(e.name).data = slerp(a->data, b->data, p, e.name);
    }
    out.metadata[std::string(kPlanDigestKey)] = plan.config_digest;
    out.metadata[std::string(kPolicyKey)] = canonical_dump(plan.policy.to_json());
    return out;
}

} // namespace spearmm
