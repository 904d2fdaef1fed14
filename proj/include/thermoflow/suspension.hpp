#pragma once

// Suspension semi-flow over the shift with a locally constant roof f >= 1:
// flow steps with lap decomposition, per-cylinder polynomial observables
// F(x,s), their exact fiber integrals F-tilde, the sup norm over the region
// under the roof, the cylinder-pair condition constant C, flow Birkhoff
// integrals, and sampling from nu = (mu x Leb)/int f.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "thermoflow/common.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/polynomial.hpp"
#include "thermoflow/sft.hpp"

namespace thermoflow {

class RoofFunction {
public:
    explicit RoofFunction(LocallyConstantFunction base) : base_(std::move(base)) {
        if (base_.min_value() < 1.0)
            fail(errc::invalid_argument, "roof function must satisfy min f >= 1");
    }

    const LocallyConstantFunction& base() const { return base_; }
    const SftSpec& spec() const { return base_.spec(); }
    std::size_t depth() const { return base_.depth(); }
    double value(const Word& w, std::size_t offset = 0) const { return base_.value(w, offset); }
    double min_value() const { return base_.min_value(); }
    double sup_norm() const { return base_.sup_norm(); }
    double seminorm() const { return base_.seminorm(); }

    double mean(const GibbsMarkovMeasure& mu) const { return mu.integrate(base_); }

    bool is_constant() const { return base_.min_value() == base_.max_value(); }

private:
    LocallyConstantFunction base_;
};

// (x, s) with 0 <= s < f(x); the base point is a finite truncation
struct FlowPoint {
    Word base;
    double level = 0.0;
};

struct FlowStepResult {
    FlowPoint point;
    std::size_t n_laps = 0;
    double residual = 0.0;
};

// Phi^t: climb at unit speed, reset through sigma at the roof. Lap
// boundaries use the half-open convention: exact arrival at the roof
// belongs to the next lap.
inline FlowStepResult flow_step(const RoofFunction& f, const FlowPoint& p, double t) {
    if (t < 0.0) fail(errc::invalid_argument, "flow time must be >= 0");
    double level = p.level + t;
    std::size_t m = 0;
    while (true) {
        if (p.base.size() < m + f.depth())
            fail(errc::word_too_short, "flow_step exhausted the truncation after " + std::to_string(m) +
                                           " laps");
        const double roof = f.value(p.base, m);
        if (level < roof) break;
        level -= roof;
        ++m;
    }
    FlowStepResult out;
    out.point = FlowPoint{p.base.shifted(m), level};
    out.n_laps = m;
    out.residual = level;
    return out;
}

inline bool semigroup_check(const RoofFunction& f, const FlowPoint& p, double t1, double t2,
                            double level_tolerance = 1e-9) {
    const auto once = flow_step(f, p, t1 + t2);
    const auto first = flow_step(f, p, t1);
    const auto second = flow_step(f, first.point, t2);
    if (once.n_laps != first.n_laps + second.n_laps) return false;
    if (once.point.base != second.point.base) return false;
    return std::abs(once.point.level - second.point.level) <= level_tolerance;
}

// Observable on the suspension space, polynomial in the flow coordinate on
// each cylinder. All derived quantities are exact: F-tilde by polynomial
// antiderivatives, ||F|| by per-cylinder extrema over [0, f], and C as the
// exhaustive max over cylinder pairs of the fiber L1 distance / d_theta.
class FlowObservable {
public:
    static constexpr int kMaxDegree = 8;
    static constexpr std::size_t kPairBudget = 1u << 21;

    FlowObservable(const SftSpec& spec, const RoofFunction& f, std::size_t depth,
                   const std::vector<std::pair<Word, Poly>>& coefficient_table)
        : spec_(spec), roof_(f), depth_(depth) {
        if (!(f.spec() == spec)) fail(errc::invalid_argument, "roof defined over a different SFT");
        for (const auto& [w, poly] : coefficient_table) {
            if (poly.degree() > kMaxDegree)
                fail(errc::degree_too_high, "polynomial degree exceeds " + std::to_string(kMaxDegree));
            if (w.size() != depth || !spec.admissible(w))
                fail(errc::missing_word, "bad observable key '" + format_word(w, spec.alphabet_size()) + "'");
            table_[pack_word(w, spec.alphabet_size())] = poly;
        }
        if (table_.size() != count_words(spec, depth))
            fail(errc::missing_word, "observable table must cover every admissible word of length " +
                                         std::to_string(depth));
        eval_depth_ = std::max(depth_, f.depth());
        build_derived();
    }

    const SftSpec& spec() const { return spec_; }
    const RoofFunction& roof() const { return roof_; }
    std::size_t depth() const { return depth_; }
    std::size_t eval_depth() const { return eval_depth_; }

    const Poly& poly(const Word& w, std::size_t offset = 0) const {
        if (w.size() < offset + depth_) fail(errc::word_too_short, "observable needs more symbols");
        return table_.at(pack_word(w, spec_.alphabet_size(), offset, depth_));
    }

    double value(const Word& w, double s, std::size_t offset = 0) const { return poly(w, offset)(s); }
    double value(const FlowPoint& p) const { return value(p.base, p.level); }

    // x -> int_0^{f(x)} F(x,s) ds as a locally constant function
    const LocallyConstantFunction& f_tilde() const { return *f_tilde_; }
    double sup_norm() const { return sup_norm_; }
    double condition_constant() const { return condition_constant_; }

private:
    void build_derived() {
        const auto words = enumerate_words(spec_, eval_depth_);
        if (words.size() * words.size() > kPairBudget)
            fail(errc::budget_exceeded, "condition-constant pair enumeration over budget");

        std::vector<std::pair<Word, double>> tilde_entries;
        sup_norm_ = 0.0;
        std::vector<double> roofs(words.size());
        std::vector<const Poly*> polys(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) {
            const Word& w = words[i];
            roofs[i] = roof_.value(w);
            polys[i] = &poly(w);
            tilde_entries.emplace_back(w, polys[i]->integral(0.0, roofs[i]));
            sup_norm_ = std::max(sup_norm_, max_abs_on_interval(*polys[i], 0.0, roofs[i]));
        }
        f_tilde_.emplace(spec_, eval_depth_, tilde_entries);

        condition_constant_ = 0.0;
        for (std::size_t i = 0; i < words.size(); ++i)
            for (std::size_t j = 0; j < words.size(); ++j) {
                if (i == j) continue;
                const double d = d_theta(spec_, words[i], words[j]);
                const Poly diff = *polys[i] - *polys[j];
                const double l1 = integral_abs(diff, 0.0, std::min(roofs[i], roofs[j]));
                condition_constant_ = std::max(condition_constant_, l1 / d);
            }
    }

    SftSpec spec_;
    RoofFunction roof_;
    std::size_t depth_;
    std::size_t eval_depth_ = 0;
    std::unordered_map<std::uint64_t, Poly> table_;
    std::optional<LocallyConstantFunction> f_tilde_;
    double sup_norm_ = 0.0;
    double condition_constant_ = 0.0;
};

inline FlowObservable build_observable(const SftSpec& spec, const RoofFunction& f,
                                       std::size_t depth,
                                       const std::vector<std::pair<Word, Poly>>& coefficient_table) {
    return FlowObservable(spec, f, depth, coefficient_table);
}

// int_0^t F(Phi^s(p)) ds via the lap decomposition; exact for polynomial
// fibers.
inline double flow_birkhoff(const FlowObservable& F, const RoofFunction& f, const FlowPoint& p, double t) {
    if (t < 0.0) fail(errc::invalid_argument, "flow time must be >= 0");
    KahanSum total;
    double level = p.level;
    double remaining = t;
    std::size_t m = 0;
    while (true) {
        if (p.base.size() < m + std::max(f.depth(), F.depth()))
            fail(errc::word_too_short, "flow_birkhoff exhausted the truncation");
        const double roof = f.value(p.base, m);
        const Poly& q = F.poly(p.base, m);
        const double room = roof - level;
        if (remaining < room) {
            total.add(q.integral(level, level + remaining));
            break;
        }
        total.add(q.integral(level, roof));
        remaining -= room;
        level = 0.0;
        ++m;
    }
    return total.value();
}

// int F dnu = int F-tilde dmu / int f dmu
inline double nu_integral(const GibbsMarkovMeasure& mu, const RoofFunction& f, const FlowObservable& F) {
    return mu.integrate(F.f_tilde()) / mu.integrate(f.base());
}

// rejection sampler for nu over (cylinder, level): x ~ mu truncated, then a
// uniform level under ||f|| accepted below the roof
inline FlowPoint sample_nu(const GibbsMarkovMeasure& mu, const RoofFunction& f, Rng& rng,
                           std::size_t truncation) {
    if (truncation < f.depth()) fail(errc::invalid_argument, "truncation below roof depth");
    while (true) {
        Word x = mu.sample_orbit(truncation, rng);
        const double l = rng.next_double() * f.sup_norm();
        if (l < f.value(x)) return FlowPoint{std::move(x), l};
    }
}

}  // namespace thermoflow
