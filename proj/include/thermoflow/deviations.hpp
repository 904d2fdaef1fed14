#pragma once

// Large-deviation machinery for the suspension flow: the explicit constant
// chain (C1, C2, C, X, Y, T0 and the per-t epsilons), the t-exponential
// bound and its sharper two-term form, exact and Monte-Carlo estimates of
// the deviation mass Z(t), and the concentration-constant fit for D.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <vector>

#include "thermoflow/common.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/polynomial.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

namespace thermoflow {

inline constexpr std::size_t kDefaultWordBudget = std::size_t{1} << 24;

// Everything in the bound exp(-X t + log t + Y) and the two-term form it
// collapses from.
//
// The constants C1, C2 absorb the Chernoff exponentials of the proof into
// the two-term shape exp{-C_i (t/||f|| - 2) eps1^2 (...)}: the raw exponent
// is (1/(4D)) / |g|^2 * floor(t/||f|| - 1) * (eps1/2)^2 with g = F-tilde
// (first term, divisor 1) and g = f (second term, divisor (||f|| ||F||)^2
// carried by eps3 = eps1 / (2 ||f|| ||F||)). Since floor(t/||f|| - 1) >=
// t/||f|| - 2 and (eps1/2)^2 = eps1^2/4, setting
//   C1 = 1 / (16 D |F-tilde|_theta^2),  C2 = 1 / (16 D |f|_theta^2)
// keeps the two-term form an upper bound for the raw one.
struct LDBoundConstants {
    double epsilon = 0.0;
    double concentration_D = 0.0;
    double sup_f = 0.0;        // ||f||
    double sup_F = 0.0;        // ||F||
    double semi_f = 0.0;       // |f|_theta
    double semi_f_tilde = 0.0; // |F-tilde|_theta
    double C1 = 0.0;
    double C2 = 0.0;
    double C = 0.0;
    double X = 0.0;
    double Y = 0.0;
    double T0 = 0.0;

    double epsilon1(double t) const { return epsilon - sup_f * sup_F * (1.0 + sup_f) / t; }
    double epsilon2(double t) const { return epsilon1(t) / 2.0; }
    double epsilon3(double t) const { return epsilon1(t) / (2.0 * sup_f * sup_F); }
    long n1(double t) const { return static_cast<long>(std::floor(t / sup_f - 1.0)); }

    // B(g) = (4 D |g|_theta^2)^{-1}
    double chernoff_B(double seminorm_g) const {
        if (seminorm_g <= 0.0) fail(errc::degenerate_seminorm, "constant probe has no Chernoff constant");
        return 1.0 / (4.0 * concentration_D * seminorm_g * seminorm_g);
    }
    double chernoff_B(const LocallyConstantFunction& g) const { return chernoff_B(g.seminorm()); }
};

// Pure arithmetic core; norms are free inputs so the collapse identities
// can be checked against hand values.
inline LDBoundConstants ld_constants_from_norms(double sup_f, double sup_F, double semi_f_tilde,
                                                double semi_f, double epsilon, double D) {
    if (epsilon <= 0.0 || D <= 0.0) fail(errc::invalid_argument, "epsilon and D must be positive");
    if (sup_F <= 0.0) fail(errc::invalid_argument, "observable sup norm must be positive");
    if (semi_f_tilde <= 0.0 || semi_f <= 0.0)
        fail(errc::degenerate_seminorm,
             "constant roof or constant fiber integral: the bound degenerates");
    LDBoundConstants c;
    c.epsilon = epsilon;
    c.concentration_D = D;
    c.sup_f = sup_f;
    c.sup_F = sup_F;
    c.semi_f = semi_f;
    c.semi_f_tilde = semi_f_tilde;
    c.C1 = 1.0 / (16.0 * D * semi_f_tilde * semi_f_tilde);
    c.C2 = 1.0 / (16.0 * D * semi_f * semi_f);
    c.C = std::min(c.C1, c.C2);
    c.X = c.C * epsilon * epsilon / (4.0 * sup_f * sup_f * sup_f * sup_F * sup_F);
    c.Y = std::log(4.0 * sup_f) + 2.0 * c.C * epsilon * epsilon / (4.0 * (sup_f * sup_F) * (sup_f * sup_F));
    c.T0 = std::max(2.0 * sup_f, 2.0 * sup_f * sup_F * (1.0 + sup_f) / epsilon);
    return c;
}

inline LDBoundConstants ld_constants(const GibbsMarkovMeasure& mu, const RoofFunction& f,
                                     const FlowObservable& F, double epsilon, double D) {
    (void)mu;
    return ld_constants_from_norms(f.sup_norm(), F.sup_norm(), F.f_tilde().seminorm(), f.seminorm(),
                                   epsilon, D);
}

struct LDBoundValue {
    double theorem_bound = 0.0;   // exp(-X t + log t + Y)
    double two_term_bound = 0.0;  // the sharper pre-collapse form at eps1(t)
};

inline LDBoundValue ld_bound(const LDBoundConstants& c, double t) {
    if (t < c.T0)
        fail(errc::below_threshold, "t below the bound threshold T0 = " + std::to_string(c.T0));
    LDBoundValue out;
    out.theorem_bound = std::exp(-c.X * t + std::log(t) + c.Y);
    const double e1 = c.epsilon1(t);
    const double scale = 2.0 * t * c.sup_f;
    const double base = (t / c.sup_f - 2.0) * e1 * e1;
    out.two_term_bound = scale * (std::exp(-c.C1 * base) +
                                  std::exp(-c.C2 * base / ((c.sup_f * c.sup_F) * (c.sup_f * c.sup_F))));
    return out;
}

// The raw pre-matching form of the same two-term bound, with the floor'd
// lap count and the eps2/eps3 split; used to re-verify the C1/C2 matching.
inline double ld_bound_proof_form(const LDBoundConstants& c, double t) {
    const double n1 = static_cast<double>(c.n1(t));
    const double e2 = c.epsilon2(t);
    const double e3 = c.epsilon3(t);
    const double scale = 2.0 * t * c.sup_f;
    return scale * (std::exp(-(1.0 / (4.0 * c.concentration_D)) / (c.semi_f_tilde * c.semi_f_tilde) * n1 * e2 * e2) +
                    std::exp(-(1.0 / (4.0 * c.concentration_D)) / (c.semi_f * c.semi_f) * n1 * e3 * e3));
}

enum class LevelMode { zero, nu };

struct ZExactResult {
    double mass_ge = 0.0;  // deviation >= eps
    double mass_gt = 0.0;  // deviation > eps
    std::size_t words = 0;
    std::size_t word_length = 0;
};

namespace detail {

// Dense per-state transition tables for hot enumeration loops.
struct ChainTables {
    std::size_t state_length = 0;
    std::vector<double> stationary;
    std::vector<double> prob;        // [state * a + (sym-1)]
    std::vector<std::size_t> next;   // same indexing
    std::vector<std::size_t> state_by_key;  // packed L-word -> state index
    int a = 0;

    explicit ChainTables(const GibbsMarkovMeasure& mu) {
        a = mu.spec().alphabet_size();
        state_length = mu.state_length();
        stationary = mu.stationary();
        const auto& states = mu.states();
        const std::size_t n = states.size();
        prob.assign(n * static_cast<std::size_t>(a), 0.0);
        next.assign(n * static_cast<std::size_t>(a), 0);
        std::size_t keyspace = 1;
        for (std::size_t i = 0; i < state_length; ++i) keyspace *= static_cast<std::size_t>(a);
        state_by_key.assign(keyspace, SIZE_MAX);
        for (std::size_t i = 0; i < n; ++i)
            state_by_key[pack_word(states[i], a)] = i;
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& arc : mu.kernel()[i]) {
                prob[i * static_cast<std::size_t>(a) + static_cast<std::size_t>(arc.symbol - 1)] = arc.prob;
                next[i * static_cast<std::size_t>(a) + static_cast<std::size_t>(arc.symbol - 1)] = arc.to;
            }
    }
};

// Depth-first enumeration of admissible N-words with the running cylinder
// measure; the leaf callback sees (buffer, mass).
template <typename Leaf>
void enumerate_with_measure(const GibbsMarkovMeasure& mu, std::size_t N, Leaf&& leaf) {
    const ChainTables tables(mu);
    const SftSpec& spec = mu.spec();
    const std::size_t L = tables.state_length;
    if (N < L) fail(errc::invalid_argument, "enumeration length below the chain state length");
    std::vector<int> buf(N, 0);
    std::uint64_t lkey = 0;
    std::size_t lkey_mod = 1;
    for (std::size_t i = 0; i < L; ++i) lkey_mod *= static_cast<std::size_t>(tables.a);

    auto rec = [&](auto&& self, std::size_t depth, std::uint64_t key, std::size_t state,
                   double mass) -> void {
        if (depth == N) {
            leaf(static_cast<const std::vector<int>&>(buf), mass);
            return;
        }
        const std::vector<int>& options =
            depth == 0 ? spec.successors_any() : spec.successors(buf[depth - 1]);
        for (int s : options) {
            buf[depth] = s;
            std::uint64_t k2 = (key * static_cast<std::uint64_t>(tables.a) +
                                static_cast<std::uint64_t>(s - 1)) % lkey_mod;
            std::size_t state2 = state;
            double mass2 = mass;
            if (depth + 1 == L) {
                state2 = tables.state_by_key[k2];
                mass2 = tables.stationary[state2];
            } else if (depth + 1 > L) {
                const std::size_t slot = state * static_cast<std::size_t>(tables.a) +
                                         static_cast<std::size_t>(s - 1);
                mass2 = mass * tables.prob[slot];
                state2 = tables.next[slot];
            }
            self(self, depth + 1, k2, state2, mass2);
        }
    };
    rec(rec, 0, lkey, 0, 0.0);
}

}  // namespace detail

// Exact deviation mass at horizon t. level zero: the mu-mass of starting
// points (x,0) whose flow average deviates from int F dnu by at least eps;
// the average is constant on N-cylinders, N = floor(t) + max depth. level
// nu: the nu-mass over (x,l), sliced exactly along each fiber by root
// isolation of the piecewise-polynomial average.
inline ZExactResult empirical_Z_exact(const GibbsMarkovMeasure& mu, const RoofFunction& f,
                                      const FlowObservable& F, double epsilon, double t,
                                      LevelMode mode = LevelMode::zero,
                                      std::size_t word_budget = kDefaultWordBudget) {
    if (t <= 0.0 || epsilon <= 0.0) fail(errc::invalid_argument, "need t > 0 and epsilon > 0");
    const SftSpec& spec = mu.spec();
    const std::size_t kf = f.depth();
    const std::size_t kF = F.depth();
    const std::size_t K = std::max(kf, kF);
    const double horizon = mode == LevelMode::zero ? t : t + f.sup_norm();
    std::size_t N = static_cast<std::size_t>(std::floor(horizon)) + K;
    N = std::max({N, mu.state_length(), K});
    if (count_words(spec, N) > word_budget)
        fail(errc::budget_exceeded, "enumeration of " + std::to_string(N) + "-words exceeds the budget");

    const double nu_mean = nu_integral(mu, f, F);
    const double f_mean = mu.integrate(f.base());
    const int a = spec.alphabet_size();

    // dense value and polynomial tables keyed by packed windows
    const std::vector<double> f_lut = f.base().dense_lut();
    const std::vector<double> ft_lut = F.f_tilde().dense_lut();
    std::size_t kf_mod = 1;
    for (std::size_t i = 0; i < kf; ++i) kf_mod *= static_cast<std::size_t>(a);
    std::size_t K_mod = 1;
    for (std::size_t i = 0; i < K; ++i) K_mod *= static_cast<std::size_t>(a);
    std::size_t kF_mod = 1;
    for (std::size_t i = 0; i < kF; ++i) kF_mod *= static_cast<std::size_t>(a);
    std::vector<Poly> poly_lut(kF_mod);
    std::vector<Poly> antider_lut(kF_mod);
    for (const Word& w : enumerate_words(spec, kF)) {
        const std::uint64_t key = pack_word(w, a);
        poly_lut[key] = F.poly(w);
        antider_lut[key] = poly_lut[key].antiderivative();
    }

    // per-leaf scratch reused across the enumeration
    std::vector<double> fsum(N + 2, 0.0);   // fsum[j] = S_j f
    std::vector<double> fval(N + 1, 0.0);
    std::vector<double> ftsum(N + 2, 0.0);  // prefix sums of F-tilde
    std::vector<int> buf_view;

    KahanSum mass_ge, mass_gt;
    std::size_t leaves = 0;

    const detail::ChainTables tables(mu);
    const std::size_t L = tables.state_length;
    std::vector<int> buf(N, 0);

    auto handle_leaf_zero = [&](const std::vector<int>& w, double mass) {
        // laps: largest m with S_m <= t (ties advance to the next lap)
        std::size_t m = 0;
        while (fsum[m + 1] <= t) ++m;
        std::uint64_t pkey = 0;
        for (std::size_t i = 0; i < kF; ++i)
            pkey = pkey * static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(w[m + i] - 1);
        const Poly& anti = antider_lut[pkey];
        const double integral = ftsum[m] + anti(t - fsum[m]);
        const double dev = std::abs(integral / t - nu_mean);
        if (dev >= epsilon) mass_ge.add(mass);
        if (dev > epsilon) mass_gt.add(mass);
        ++leaves;
    };

    auto handle_leaf_nu = [&](const std::vector<int>& w, double mass) {
        const double roof0 = fval[0];
        // pieces of l in [0, roof0) on which the lap count of l + t is fixed
        std::size_t m = 0;
        while (fsum[m + 1] <= t) ++m;
        double lo = 0.0;
        double ge_len = 0.0, gt_len = 0.0;
        std::uint64_t key0 = 0;
        for (std::size_t i = 0; i < kF; ++i)
            key0 = key0 * static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(w[i] - 1);
        const Poly* p0 = &antider_lut[key0];
        while (lo < roof0) {
            const double hi = std::min(roof0, fsum[m + 1] - t);
            if (hi > lo) {
                std::uint64_t pkey = 0;
                for (std::size_t i = 0; i < kF; ++i)
                    pkey = pkey * static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(w[m + i] - 1);
                // average(l) = (ftsum[m] + P_m(l + t - S_m) - P_0(l)) / t
                Poly q = antider_lut[pkey].shift_argument(t - fsum[m]);
                q = q - *p0;
                q = q.scaled(1.0 / t).plus_constant(ftsum[m] / t - nu_mean);
                const Poly above = q.plus_constant(-epsilon);   // >= 0 where dev >= +eps
                const Poly below = q.negated().plus_constant(-epsilon);
                for (const Poly* side : {&above, &below}) {
                    if (side->is_zero()) {
                        ge_len += hi - lo;  // identically at the threshold
                    } else {
                        for (const auto& [ia, ib] : nonnegative_intervals(*side, lo, hi)) {
                            ge_len += ib - ia;
                            gt_len += ib - ia;
                        }
                    }
                }
            }
            lo = std::max(lo, hi);
            ++m;
            if (fsum[m] - t >= roof0) break;
        }
        mass_ge.add(mass * ge_len);
        mass_gt.add(mass * gt_len);
        ++leaves;
    };

    std::size_t lmod = 1;
    for (std::size_t i = 0; i < L; ++i) lmod *= static_cast<std::size_t>(a);

    auto rec = [&](auto&& self, std::size_t depth, std::uint64_t lkey, std::uint64_t fkey,
                   std::uint64_t Kkey, std::size_t state, double mass) -> void {
        if (depth == N) {
            if (mode == LevelMode::zero)
                handle_leaf_zero(buf, mass);
            else
                handle_leaf_nu(buf, mass);
            return;
        }
        const std::vector<int>& options =
            depth == 0 ? spec.successors_any() : spec.successors(buf[depth - 1]);
        for (int s : options) {
            buf[depth] = s;
            const std::uint64_t l2 = (lkey * static_cast<std::uint64_t>(a) +
                                      static_cast<std::uint64_t>(s - 1)) % lmod;
            const std::uint64_t f2 = (fkey * static_cast<std::uint64_t>(a) +
                                      static_cast<std::uint64_t>(s - 1)) % kf_mod;
            const std::uint64_t K2 = (Kkey * static_cast<std::uint64_t>(a) +
                                      static_cast<std::uint64_t>(s - 1)) % K_mod;
            const std::size_t d = depth + 1;
            std::size_t state2 = state;
            double mass2 = mass;
            if (d == L) {
                state2 = tables.state_by_key[l2];
                mass2 = tables.stationary[state2];
            } else if (d > L) {
                const std::size_t slot = state * static_cast<std::size_t>(a) +
                                         static_cast<std::size_t>(s - 1);
                mass2 = mass * tables.prob[slot];
                state2 = tables.next[slot];
            }
            if (d >= kf) {
                const std::size_t j = d - kf;
                fval[j] = f_lut[f2];
                fsum[j + 1] = fsum[j] + fval[j];
            }
            if (d >= K) {
                const std::size_t j = d - K;
                ftsum[j + 1] = ftsum[j] + ft_lut[K2];
            }
            self(self, d, l2, f2, K2, state2, mass2);
        }
    };
    rec(rec, 0, 0, 0, 0, 0, 0.0);

    ZExactResult out;
    out.word_length = N;
    out.words = leaves;
    if (mode == LevelMode::zero) {
        out.mass_ge = mass_ge.value();
        out.mass_gt = mass_gt.value();
    } else {
        out.mass_ge = mass_ge.value() / f_mean;
        out.mass_gt = mass_gt.value() / f_mean;
    }
    return out;
}

struct ZMcResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

// Monte-Carlo frequency of the deviation event (>= eps form), with x ~ mu
// and optionally the level drawn under the roof. Work is split into 64
// fixed blocks with derived generator streams, so results do not depend on
// the thread count.
inline ZMcResult empirical_Z_mc(const GibbsMarkovMeasure& mu, const RoofFunction& f,
                                const FlowObservable& F, double epsilon, double t,
                                std::size_t n_samples, std::uint64_t seed,
                                LevelMode mode = LevelMode::zero, int threads = 1) {
    if (n_samples == 0) fail(errc::invalid_argument, "need n_samples >= 1");
    const std::size_t K = std::max(f.depth(), F.depth());
    const double horizon = mode == LevelMode::zero ? t : t + f.sup_norm();
    const std::size_t N =
        std::max(static_cast<std::size_t>(std::floor(horizon)) + K + 1, mu.state_length());
    const double nu_mean = nu_integral(mu, f, F);

    constexpr std::size_t kBlocks = 64;
    const Rng root(seed);
    std::vector<std::size_t> hits(kBlocks, 0);
    auto run_block = [&](std::size_t b) {
        Rng rng = root.split(b);
        const std::size_t lo = b * n_samples / kBlocks;
        const std::size_t hi = (b + 1) * n_samples / kBlocks;
        std::size_t h = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            FlowPoint p;
            if (mode == LevelMode::zero)
                p = FlowPoint{mu.sample_orbit(N, rng), 0.0};
            else
                p = sample_nu(mu, f, rng, N);
            const double avg = flow_birkhoff(F, f, p, t) / t;
            if (std::abs(avg - nu_mean) >= epsilon) ++h;
        }
        hits[b] = h;
    };
    if (threads <= 1) {
        for (std::size_t b = 0; b < kBlocks; ++b) run_block(b);
    } else {
        std::vector<std::future<void>> futs;
        futs.reserve(kBlocks);
        for (std::size_t b = 0; b < kBlocks; ++b)
            futs.push_back(std::async(std::launch::async, run_block, b));
        for (auto& f2 : futs) f2.get();
    }
    std::size_t total = 0;
    for (std::size_t h : hits) total += h;
    ZMcResult out;
    out.samples = n_samples;
    out.estimate = static_cast<double>(total) / static_cast<double>(n_samples);
    out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(n_samples));
    return out;
}

// mu{ |S_m g / m - int g dmu| >= eps }, exact by enumeration
inline double exact_birkhoff_tail(const GibbsMarkovMeasure& mu, const LocallyConstantFunction& g,
                                  std::size_t m, double epsilon,
                                  std::size_t word_budget = kDefaultWordBudget) {
    if (m == 0) fail(errc::invalid_argument, "need m >= 1");
    const std::size_t N = std::max(m + g.depth() - 1, mu.state_length());
    if (count_words(mu.spec(), N) > word_budget)
        fail(errc::budget_exceeded, "probe enumeration exceeds the budget");
    const double mean = mu.integrate(g);
    KahanSum tail;
    detail::enumerate_with_measure(mu, N, [&](const std::vector<int>& buf, double mass) {
        double s = 0.0;
        const Word w(buf);
        for (std::size_t j = 0; j < m; ++j) s += g.value(w, j);
        if (std::abs(s / static_cast<double>(m) - mean) >= epsilon) tail.add(mass);
    });
    return tail.value();
}

struct FitDResult {
    double D = 1.0;
    bool degenerate = false;  // every grid probability was zero
    std::size_t grid_points = 0;
};

// Smallest D making the concentration inequality P <= 2 exp(-m eps^2 /
// (4 D |g|^2)) hold on the probe grid, plus a 10% margin. A lower-bound
// fit: any valid concentration constant dominates it.
inline FitDResult fit_D(const GibbsMarkovMeasure& mu,
                        const std::vector<LocallyConstantFunction>& probe_functions,
                        const std::vector<std::size_t>& m_grid, const std::vector<double>& eps_grid,
                        double default_D = 1.0, std::size_t word_budget = kDefaultWordBudget) {
    if (probe_functions.empty() || m_grid.empty() || eps_grid.empty())
        fail(errc::invalid_argument, "fit_D needs nonempty probes and grids");
    FitDResult out;
    double best = 0.0;
    for (const auto& g : probe_functions) {
        const double semi = g.seminorm();
        for (std::size_t m : m_grid)
            for (double eps : eps_grid) {
                const double P = exact_birkhoff_tail(mu, g, m, eps, word_budget);
                ++out.grid_points;
                if (P <= 0.0) continue;
                if (semi <= 0.0) fail(errc::degenerate_seminorm, "probe with zero seminorm has positive tail");
                const double implied =
                    static_cast<double>(m) * eps * eps / (4.0 * semi * semi * (-std::log(P / 2.0)));
                best = std::max(best, implied);
            }
    }
    if (best == 0.0) {
        out.degenerate = true;
        out.D = default_D;
        return out;
    }
    out.D = 1.1 * best;
    return out;
}

}  // namespace thermoflow
