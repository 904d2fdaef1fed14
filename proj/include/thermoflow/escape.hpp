#pragma once

// Open systems: hole sequences shrinking to a point z, discrete escape
// rates through hole-punched transition kernels, the periodic-orbit factor
// gamma(z), hitting times, the flow escape rate through roof Birkhoff sums,
// the nested-condition report, and the assembled lower-bound comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "thermoflow/common.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

namespace thermoflow {

// A finite union of n-cylinders, stored as packed sorted keys.
class Hole {
public:
    Hole(const SftSpec& spec, std::vector<Word> words) : spec_(&spec) {
        if (words.empty()) fail(errc::invalid_argument, "hole needs at least one cylinder");
        length_ = words[0].size();
        if (length_ == 0) fail(errc::hole_is_everything, "the empty word names the whole space");
        for (const Word& w : words) {
            if (w.size() != length_) fail(errc::invalid_argument, "hole cylinders must share one length");
            if (!spec.admissible(w))
                fail(errc::invalid_argument, "hole word '" + format_word(w, spec.alphabet_size()) + "' not admissible");
            keys_.push_back(pack_word(w, spec.alphabet_size()));
        }
        std::sort(keys_.begin(), keys_.end());
        keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
        words_ = std::move(words);
        std::sort(words_.begin(), words_.end());
        words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
        if (keys_.size() >= count_words(spec, length_))
            fail(errc::hole_is_everything, "hole covers every admissible cylinder");
    }

    std::size_t length() const { return length_; }
    const std::vector<Word>& words() const { return words_; }
    bool contains_key(std::uint64_t key) const {
        return std::binary_search(keys_.begin(), keys_.end(), key);
    }
    bool contains_window(const Word& w, std::size_t offset) const {
        if (w.size() < offset + length_) return false;
        return contains_key(pack_word(w, spec_->alphabet_size(), offset, length_));
    }
    double measure(const GibbsMarkovMeasure& mu) const {
        KahanSum sum;
        for (const Word& w : words_) sum.add(mu.prefix_measure(w));
        return sum.value();
    }

private:
    const SftSpec* spec_;
    std::size_t length_ = 0;
    std::vector<Word> words_;
    std::vector<std::uint64_t> keys_;
};

// Nested sequence of holes I_n shrinking to z.
struct HoleSequence {
    SftSpec spec;
    Word target_z;  // long truncation of the limit point
    int period = 0; // 0 = aperiodic
    std::size_t n_min = 0;
    std::map<std::size_t, Hole> holes;

    static HoleSequence cylinders_around_z(const SftSpec& spec, const Word& z, std::size_t n_from,
                                           std::size_t n_to, int period) {
        if (n_from < 1 || n_to < n_from) fail(errc::invalid_argument, "bad hole range");
        if (z.size() < n_to) fail(errc::truncation_too_short, "z truncation shorter than the deepest hole");
        HoleSequence seq{spec, z, period, n_from, {}};
        seq.validate_period();
        for (std::size_t n = n_from; n <= n_to; ++n)
            seq.holes.emplace(n, Hole(spec, {z.prefix(n)}));
        return seq;
    }

    static HoleSequence explicit_holes(const SftSpec& spec, const Word& z, int period,
                                       const std::map<std::size_t, std::vector<Word>>& words) {
        if (words.empty()) fail(errc::invalid_argument, "no holes given");
        HoleSequence seq{spec, z, period, words.begin()->first, {}};
        seq.validate_period();
        for (const auto& [n, list] : words) {
            Hole hole(spec, list);
            if (hole.length() != n) fail(errc::invalid_argument, "hole words disagree with their index");
            seq.holes.emplace(n, std::move(hole));
        }
        return seq;
    }

    void validate_period() const {
        if (!spec.admissible(target_z)) fail(errc::invalid_argument, "z truncation not admissible");
        if (period < 0) fail(errc::invalid_argument, "negative period");
        if (period > 0) {
            const std::size_t p = static_cast<std::size_t>(period);
            if (target_z.size() < 2 * p)
                fail(errc::truncation_too_short, "z truncation too short to witness the period");
            for (std::size_t i = 0; i + p < target_z.size(); ++i)
                if (target_z[i] != target_z[i + p])
                    fail(errc::not_actually_periodic, "declared period contradicts the truncation");
        }
    }
};

// gamma(z): 1 at aperiodic centers, else 1 - exp(S_p phi(z) - p P(phi)).
inline double gamma_z(const GibbsMarkovMeasure& mu, const Word& z, int period) {
    if (period == 0) return 1.0;
    if (period < 0) fail(errc::invalid_argument, "negative period");
    const std::size_t p = static_cast<std::size_t>(period);
    for (std::size_t i = 0; i + p < z.size(); ++i)
        if (z[i] != z[i + p]) fail(errc::not_actually_periodic, "z is not p-periodic to its truncation");
    for (std::size_t d = 1; d < p; ++d) {
        if (p % d != 0) continue;
        bool also_period = true;
        for (std::size_t i = 0; i + d < z.size(); ++i)
            if (z[i] != z[i + d]) {
                also_period = false;
                break;
            }
        if (also_period) fail(errc::period_not_prime, "divisor " + std::to_string(d) + " is also a period");
    }
    const LocallyConstantFunction& phi = mu.potential();
    if (z.size() + 1 < p + phi.depth())
        fail(errc::word_too_short, "z truncation too short for the Birkhoff sum");
    const double sp = birkhoff_sum(phi, z, p);
    return 1.0 - std::exp(sp - static_cast<double>(period) * mu.pressure());
}

// The measure recoded on L-words with the hole marked on states.
class OpenSystem {
public:
    OpenSystem(const GibbsMarkovMeasure& mu, const Hole& hole, std::size_t min_state_length = 0)
        : mu_(&mu) {
        const std::size_t L =
            std::max({hole.length(), mu.state_length(), min_state_length});
        chain_ = mu.recode(L);
        in_hole_.resize(chain_.states.size());
        bool any_allowed = false;
        for (std::size_t i = 0; i < chain_.states.size(); ++i) {
            in_hole_[i] = hole.contains_window(chain_.states[i], 0) ? 1 : 0;
            any_allowed |= !in_hole_[i];
        }
        if (!any_allowed) fail(errc::hole_is_everything, "every state lies in the hole");
    }

    const RecodedChain& chain() const { return chain_; }
    bool state_in_hole(std::size_t i) const { return in_hole_[i] != 0; }

    // mass surviving k steps: no visit to the hole at offsets 0..k-1
    double survivor_mass(std::size_t k) const {
        if (k == 0) return 1.0;
        std::vector<double> v(chain_.states.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!in_hole_[i]) v[i] = chain_.initial[i];
        for (std::size_t step = 1; step < k; ++step) push_masked(v);
        KahanSum total;
        for (double x : v) total.add(x);
        return total.value();
    }

    // mass of { tau >= j } with tau the first m >= 1 whose window enters
    // the hole: offsets 1..j-1 stay outside, offset 0 unconstrained
    double tau_tail(std::size_t j) const {
        if (j <= 1) return 1.0;
        std::vector<double> v = chain_.initial;
        for (std::size_t step = 1; step < j; ++step) push_masked(v);
        KahanSum total;
        for (double x : v) total.add(x);
        return total.value();
    }

    struct SpectralResult {
        double radius = 0.0;
        bool converged = false;
        std::size_t iterations = 0;
    };

    // spectral radius of the hole-punched kernel; zero for nilpotent
    SpectralResult open_spectral_radius(double tol = 1e-13, std::size_t budget = 500'000) const {
        const std::size_t n = chain_.states.size();
        std::vector<double> x(n, 0.0), y(n, 0.0);
        std::size_t allowed = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_hole_[i]) {
                x[i] = 1.0;
                ++allowed;
            }
        for (double& xi : x) xi /= static_cast<double>(allowed);
        SpectralResult res;
        double log_norm_accum = 0.0;
        std::vector<double> increments;
        for (std::size_t it = 1; it <= budget; ++it) {
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (in_hole_[i] || x[i] == 0.0) continue;
                for (const auto& arc : chain_.arcs[i])
                    if (!in_hole_[arc.to]) y[arc.to] += x[i] * arc.prob;
            }
            double norm = 0.0;
            for (double v : y) norm += v;
            if (norm == 0.0) {
                res.radius = 0.0;
                res.converged = true;
                res.iterations = it;
                return res;
            }
            double xy = 0.0, xx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                xy += x[i] * y[i];
                xx += x[i] * x[i];
            }
            const double lambda = xy / xx;
            double resid = 0.0;
            for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(y[i] - lambda * x[i]));
            for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
            increments.push_back(std::log(norm));
            log_norm_accum += std::log(norm);
            if (resid <= tol * std::max(1.0, lambda)) {
                res.radius = lambda;
                res.converged = true;
                res.iterations = it;
                return res;
            }
        }
        // periodic open graphs: fall back to the mean growth of the tail
        const std::size_t half = increments.size() / 2;
        double mean = 0.0;
        for (std::size_t i = half; i < increments.size(); ++i) mean += increments[i];
        mean /= static_cast<double>(increments.size() - half);
        res.radius = std::exp(mean);
        res.converged = false;
        res.iterations = budget;
        return res;
    }

private:
    // one kernel step followed by zeroing the hole states
    void push_masked(std::vector<double>& v) const {
        std::vector<double> next(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] == 0.0) continue;
            for (const auto& arc : chain_.arcs[i]) next[arc.to] += v[i] * arc.prob;
        }
        for (std::size_t i = 0; i < next.size(); ++i)
            if (in_hole_[i]) next[i] = 0.0;
        v = std::move(next);
    }

    const GibbsMarkovMeasure* mu_;
    RecodedChain chain_;
    std::vector<char> in_hole_;
};

// R_Discrete = -log(spectral radius of the open kernel); +inf if every
// orbit falls in.
inline double discrete_escape_rate(const GibbsMarkovMeasure& mu, const Hole& hole) {
    const OpenSystem open(mu, hole);
    const auto spectral = open.open_spectral_radius();
    if (spectral.radius == 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(spectral.radius);
}

inline double survivor_mass(const GibbsMarkovMeasure& mu, const Hole& hole, std::size_t k) {
    return OpenSystem(mu, hole).survivor_mass(k);
}

// first m >= 1 whose n-window sits in the hole; NotYet (nullopt) if the
// truncation shows no hit
inline std::optional<std::size_t> hitting_time(const Hole& hole, const Word& w) {
    for (std::size_t m = 1; m + hole.length() <= w.size(); ++m)
        if (hole.contains_window(w, m)) return m;
    return std::nullopt;
}

struct HittingSample {
    bool hit = false;        // false = censored at the cap
    std::size_t tau = 0;     // valid when hit
    double roof_sum = 0.0;   // S_tau f when hit, else the cap lower bound
};

// Streams kernel symbols until the orbit enters the hole (tau >= 1) or the
// accumulated roof passes the cap.
class HittingSampler {
public:
    HittingSampler(const GibbsMarkovMeasure& mu, const RoofFunction& f, const Hole& hole, double cap)
        : mu_(&mu), hole_(&hole), cap_(cap), kf_(f.depth()), n_(hole.length()) {
        f_lut_ = f.base().dense_lut();
        const int a = mu.spec().alphabet_size();
        kf_mod_ = 1;
        for (std::size_t i = 0; i < kf_; ++i) kf_mod_ *= static_cast<std::uint64_t>(a);
        n_mod_ = 1;
        for (std::size_t i = 0; i < n_; ++i) n_mod_ *= static_cast<std::uint64_t>(a);
        a_ = static_cast<std::uint64_t>(a);
    }

    HittingSample sample(Rng& rng) const {
        std::size_t state = mu_->sample_initial_state(rng);
        fprefix_.assign(1, 0.0);

        std::uint64_t fkey = 0, hkey = 0;
        std::size_t emitted = 0;
        std::size_t checked = 0;  // offsets 1..checked tested hole-free
        std::optional<std::size_t> tau;

        auto emit = [&](int sym) {
            fkey = (fkey * a_ + static_cast<std::uint64_t>(sym - 1)) % kf_mod_;
            hkey = (hkey * a_ + static_cast<std::uint64_t>(sym - 1)) % n_mod_;
            ++emitted;
            if (emitted >= kf_) fprefix_.push_back(fprefix_.back() + f_lut_[fkey]);
            if (!tau && emitted >= n_) {
                const std::size_t offset = emitted - n_;
                if (offset >= 1) {
                    checked = offset;
                    if (hole_->contains_key(hkey)) tau = offset;
                }
            }
        };

        for (int s : mu_->states()[state].syms) emit(s);
        while (true) {
            if (tau) {
                // S_tau f needs the roof at offsets < tau
                if (fprefix_.size() > *tau)
                    return HittingSample{true, *tau, fprefix_[*tau]};
            } else {
                const std::size_t safe = std::min(checked + 1, fprefix_.size() - 1);
                if (fprefix_[safe] >= cap_) return HittingSample{false, 0, fprefix_[safe]};
            }
            auto [sym, next] = mu_->step(state, rng);
            state = next;
            emit(sym);
        }
    }

private:
    const GibbsMarkovMeasure* mu_;
    const Hole* hole_;
    double cap_;
    std::size_t kf_, n_;
    std::uint64_t kf_mod_ = 1, n_mod_ = 1, a_ = 2;
    std::vector<double> f_lut_;
    mutable std::vector<double> fprefix_;
};

struct FlowEscapeResult {
    double rate = 0.0;
    double band = 0.0;  // regression standard error of the slope
    bool reliable = true;
    bool exact = false;  // kernel-power route (constant roof)
    std::vector<double> t_grid;
    std::vector<double> survival;  // mu{ S_tau f >= t } per grid point
};

inline constexpr std::size_t kMinTailSurvivors = 100;

// Survival mu{ S_tau f >= t } on the grid: exact through kernel powers when
// the roof is globally constant, Monte Carlo otherwise; the rate is the
// fitted negative slope of log-survival over the upper half of the grid.
inline FlowEscapeResult flow_escape_rate(const GibbsMarkovMeasure& mu, const RoofFunction& f,
                                         const Hole& hole, const std::vector<double>& t_grid,
                                         std::size_t n_samples, std::uint64_t seed, int threads = 1) {
    if (t_grid.size() < 4) fail(errc::invalid_argument, "t_grid needs at least 4 points");
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i)
        if (!(t_grid[i] < t_grid[i + 1])) fail(errc::invalid_argument, "t_grid must increase");

    FlowEscapeResult out;
    out.t_grid = t_grid;
    out.survival.resize(t_grid.size());

    if (f.is_constant()) {
        const double c = f.min_value();
        const OpenSystem open(mu, hole);
        // S_tau f = c tau, so the survival at t is the tau-tail at ceil(t/c)
        std::vector<std::size_t> js(t_grid.size());
        std::size_t jmax = 1;
        for (std::size_t i = 0; i < t_grid.size(); ++i) {
            js[i] = static_cast<std::size_t>(std::ceil(t_grid[i] / c - 1e-12));
            jmax = std::max(jmax, js[i]);
        }
        // one masked sweep produces every tail value up to jmax
        std::vector<double> tails(jmax + 1, 1.0);
        {
            std::vector<double> v = open.chain().initial;
            for (std::size_t j = 2; j <= jmax; ++j) {
                std::vector<double> next(v.size(), 0.0);
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (v[i] == 0.0) continue;
                    for (const auto& arc : open.chain().arcs[i]) next[arc.to] += v[i] * arc.prob;
                }
                for (std::size_t i = 0; i < next.size(); ++i)
                    if (open.state_in_hole(i)) next[i] = 0.0;
                v = std::move(next);
                KahanSum total;
                for (double x : v) total.add(x);
                tails[j] = total.value();
            }
        }
        for (std::size_t i = 0; i < t_grid.size(); ++i) out.survival[i] = tails[std::max<std::size_t>(js[i], 1)];
        out.exact = true;
    } else {
        if (n_samples == 0) fail(errc::invalid_argument, "need n_samples >= 1");
        const double cap = t_grid.back();
        const HittingSampler sampler(mu, f, hole, cap);
        constexpr std::size_t kBlocks = 64;
        const Rng root(seed);
        std::vector<std::vector<std::size_t>> counts(kBlocks,
                                                     std::vector<std::size_t>(t_grid.size(), 0));
        auto run_block = [&](std::size_t b) {
            Rng rng = root.split(b);
            HittingSampler local = sampler;  // private scratch buffer
            const std::size_t lo = b * n_samples / kBlocks;
            const std::size_t hi = (b + 1) * n_samples / kBlocks;
            for (std::size_t i = lo; i < hi; ++i) {
                const auto s = local.sample(rng);
                const double value = s.hit ? s.roof_sum : std::numeric_limits<double>::infinity();
                for (std::size_t g = 0; g < t_grid.size(); ++g)
                    if (value >= t_grid[g]) ++counts[b][g];
            }
        };
        if (threads <= 1) {
            for (std::size_t b = 0; b < kBlocks; ++b) run_block(b);
        } else {
            std::vector<std::future<void>> futs;
            for (std::size_t b = 0; b < kBlocks; ++b)
                futs.push_back(std::async(std::launch::async, run_block, b));
            for (auto& fut : futs) fut.get();
        }
        for (std::size_t g = 0; g < t_grid.size(); ++g) {
            std::size_t total = 0;
            for (std::size_t b = 0; b < kBlocks; ++b) total += counts[b][g];
            out.survival[g] = static_cast<double>(total) / static_cast<double>(n_samples);
        }
    }

    // tail-window fit over the upper half of the grid; the exact route is a
    // step function of t, so it is fitted at the step boundaries c*j
    std::vector<double> xs, ys;
    const std::size_t start = t_grid.size() / 2;
    double tail_mass = 1.0;
    for (std::size_t i = start; i < t_grid.size(); ++i) {
        if (out.survival[i] <= 0.0) continue;
        const double x = out.exact
                             ? f.min_value() * std::ceil(t_grid[i] / f.min_value() - 1e-12)
                             : t_grid[i];
        if (!xs.empty() && x <= xs.back()) continue;
        xs.push_back(x);
        ys.push_back(std::log(out.survival[i]));
        tail_mass = std::min(tail_mass, out.survival[i]);
    }
    if (xs.size() < 2) {
        out.reliable = false;
        out.rate = std::numeric_limits<double>::infinity();
        return out;
    }
    const auto fit = least_squares(xs, ys);
    out.rate = -fit.slope;
    out.band = fit.slope_stderr;
    if (!out.exact) {
        const double tail_count = tail_mass * static_cast<double>(n_samples);
        if (tail_count < static_cast<double>(kMinTailSurvivors)) out.reliable = false;
    }
    return out;
}

struct NestedReport {
    bool cond1_cylinder_lengths = false;
    bool cond2_nested = false;
    bool cond3_geometric = false;
    bool cond4_localized = false;
    bool cond5_periodic_pullback = false;  // vacuously true when p = 0
    double c_fit = 0.0;
    double rho_fit = 0.0;
    double kappa = 0.0;
    std::vector<std::size_t> l_n;  // per available n, in order
    std::optional<std::size_t> n0_periodic;
    std::vector<double> hole_measures;

    bool all() const {
        return cond1_cylinder_lengths && cond2_nested && cond3_geometric && cond4_localized &&
               cond5_periodic_pullback;
    }
};

inline NestedReport nested_check(const HoleSequence& seq, const GibbsMarkovMeasure& mu,
                                 double kappa_min = 0.0) {
    NestedReport rep;
    const SftSpec& spec = seq.spec;
    if (seq.holes.empty()) fail(errc::invalid_argument, "empty hole sequence");

    rep.cond1_cylinder_lengths = true;
    for (const auto& [n, hole] : seq.holes) {
        if (hole.length() != n) rep.cond1_cylinder_lengths = false;
        for (const Word& w : hole.words())
            if (w.size() != n || !spec.admissible(w)) rep.cond1_cylinder_lengths = false;
    }

    // condition 2: I_{n+1} inside I_n, and z inside every I_n
    rep.cond2_nested = true;
    for (auto it = seq.holes.begin(); it != seq.holes.end(); ++it) {
        const auto& [n, hole] = *it;
        if (!hole.contains_window(seq.target_z, 0)) rep.cond2_nested = false;
        auto next = std::next(it);
        if (next != seq.holes.end() && next->first == n + 1) {
            for (const Word& w : next->second.words())
                if (!hole.contains_window(w, 0)) rep.cond2_nested = false;
        }
    }

    // condition 3: mu(I_n) <= c rho^n with rho < 1, via a least-squares fit
    // in log scale; the intercept is lifted to dominate every point
    {
        std::vector<double> xs, ys;
        for (const auto& [n, hole] : seq.holes) {
            const double m = hole.measure(mu);
            rep.hole_measures.push_back(m);
            if (m > 0.0) {
                xs.push_back(static_cast<double>(n));
                ys.push_back(std::log(m));
            }
        }
        if (xs.size() >= 2) {
            const auto fit = least_squares(xs, ys);
            rep.rho_fit = std::exp(fit.slope);
            double max_resid = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < xs.size(); ++i)
                max_resid = std::max(max_resid, ys[i] - (fit.intercept + fit.slope * xs[i]));
            rep.c_fit = std::exp(fit.intercept + max_resid);
            bool dominated = true;
            for (std::size_t i = 0; i < xs.size(); ++i)
                if (std::exp(ys[i]) > rep.c_fit * std::pow(rep.rho_fit, xs[i]) * (1.0 + 1e-9))
                    dominated = false;
            rep.cond3_geometric = rep.rho_fit < 1.0 && dominated;
        }
    }

    // condition 4: I_n inside [z]_{l_n} with kappa < l_n / n <= 1
    {
        rep.kappa = std::numeric_limits<double>::infinity();
        for (const auto& [n, hole] : seq.holes) {
            std::size_t ln = n;
            for (const Word& w : hole.words()) {
                std::size_t agree = 0;
                while (agree < n && w[agree] == seq.target_z[agree]) ++agree;
                ln = std::min(ln, agree);
            }
            rep.l_n.push_back(ln);
            rep.kappa = std::min(rep.kappa, static_cast<double>(ln) / static_cast<double>(n));
        }
        rep.cond4_localized = rep.kappa > kappa_min;
    }

    // condition 5: sigma^{-p}(I_n) cap [z]_p inside I_n for n >= some n0
    if (seq.period == 0) {
        rep.cond5_periodic_pullback = true;
    } else {
        const std::size_t p = static_cast<std::size_t>(seq.period);
        std::optional<std::size_t> n0;
        for (const auto& [n, hole] : seq.holes) {
            bool holds = true;
            for (const Word& w : hole.words()) {
                Word u = seq.target_z.prefix(p);
                if (!spec.allowed(u[p - 1], w[0])) continue;  // empty cylinder
                u.syms.insert(u.syms.end(), w.syms.begin(), w.syms.end());
                if (!hole.contains_window(u, 0)) holds = false;
            }
            if (holds) {
                if (!n0) n0 = n;
            } else {
                n0.reset();
            }
        }
        rep.n0_periodic = n0;
        rep.cond5_periodic_pullback = n0.has_value();
    }
    return rep;
}

struct EscapeRow {
    std::size_t n = 0;
    double mu_hole = 0.0;
    double r_discrete = 0.0;
    double ratio_discrete = 0.0;  // R_discrete / mu(I_n)
    double r_flow = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    double nu_slab = 0.0;     // nu(I_n x [0,1]) = mu(I_n)/int f
    double ratio_flow = 0.0;  // R_flow / nu_slab
    bool flow_reliable = true;
    bool flow_exact = false;
};

struct FlowEscapeParams {
    std::vector<double> t_grid;  // empty = auto-scale per hole from R_discrete
    std::size_t grid_points = 12;
    double halflives = 3.0;  // auto grid spans this many e-foldings
    std::size_t n_samples = 100'000;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct EscapeReport {
    std::vector<EscapeRow> rows;
    double gamma = 1.0;
    double W = 2.0;
    double lower_bound = 0.5;  // gamma / W
    bool identity_ok = true;   // gamma/W == gamma int f / (int f + ||f||)
    NestedReport nested;
};

inline EscapeReport theorem2_report(const GibbsMarkovMeasure& mu, const RoofFunction& f,
                                    const HoleSequence& seq, const FlowEscapeParams& params) {
    EscapeReport rep;
    rep.nested = nested_check(seq, mu);
    rep.gamma = gamma_z(mu, seq.target_z, seq.period);
    const double f_mean = mu.integrate(f.base());
    rep.W = 1.0 + f.sup_norm() / f_mean;
    rep.lower_bound = rep.gamma / rep.W;
    const double alt = rep.gamma * f_mean / (f_mean + f.sup_norm());
    rep.identity_ok = std::abs(rep.lower_bound - alt) <= 1e-12 * std::max(1.0, std::abs(alt));

    std::size_t hole_index = 0;
    for (const auto& [n, hole] : seq.holes) {
        EscapeRow row;
        row.n = n;
        row.mu_hole = hole.measure(mu);
        row.r_discrete = discrete_escape_rate(mu, hole);
        row.ratio_discrete = row.r_discrete / row.mu_hole;
        row.nu_slab = row.mu_hole / f_mean;

        std::vector<double> grid = params.t_grid;
        if (grid.empty()) {
            // span a fixed number of e-foldings of the estimated flow decay
            const double rate_scale = row.r_discrete / f_mean;
            const double t_max = params.halflives / rate_scale;
            for (std::size_t i = 1; i <= params.grid_points; ++i)
                grid.push_back(t_max * static_cast<double>(i) / static_cast<double>(params.grid_points));
        }
        const auto flow = flow_escape_rate(mu, f, hole, grid, params.n_samples,
                                           params.seed + hole_index, params.threads);
        row.r_flow = flow.rate;
        row.band_lo = flow.rate - flow.band;
        row.band_hi = flow.rate + flow.band;
        row.ratio_flow = flow.rate / row.nu_slab;
        row.flow_reliable = flow.reliable;
        row.flow_exact = flow.exact;
        rep.rows.push_back(row);
        ++hole_index;
    }
    return rep;
}

}  // namespace thermoflow
