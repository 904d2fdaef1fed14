#pragma once

// Equilibrium state of a locally constant potential via the weighted
// transfer matrix on recoded word-states: Perron eigendata, pressure,
// exact cylinder measures, integrals, entropy, and seeded orbit sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "thermoflow/common.hpp"
#include "thermoflow/sft.hpp"

namespace thermoflow {

namespace detail {

// force an already-near-stochastic nonnegative vector to sum to exactly 1.0
// by assigning the rounding residual to its largest entry
inline void normalize_simplex_exact(std::vector<double>& p) {
    for (int pass = 0; pass < 8; ++pass) {
        double sum = 0.0;
        for (double x : p) sum += x;
        if (sum == 1.0) return;
        if (pass == 0)
            for (double& x : p) x /= sum;
        else {
            auto it = std::max_element(p.begin(), p.end());
            *it += 1.0 - sum;
        }
    }
}

struct PowerIterationResult {
    double eigenvalue = 0.0;
    std::vector<double> vec;
    double residual = 0.0;
    std::size_t iterations = 0;
};

// dominant eigenpair of a nonnegative primitive matrix given as an apply
// callback; Rayleigh-quotient estimate, sup-norm residual stopping
template <typename Apply>
PowerIterationResult power_iteration(std::size_t n, Apply&& apply, double tol, std::size_t budget) {
    PowerIterationResult res;
    std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n, 0.0);
    for (std::size_t it = 1; it <= budget; ++it) {
        apply(x, y);
        double xy = 0.0, xx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            xy += x[i] * y[i];
            xx += x[i] * x[i];
        }
        const double lambda = xy / xx;
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(y[i] - lambda * x[i]));
        double norm = 0.0;
        for (double v : y) norm += std::abs(v);
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
        if (resid <= tol * std::max(1.0, std::abs(lambda))) {
            res.eigenvalue = lambda;
            res.vec = x;
            res.residual = resid;
            res.iterations = it;
            return res;
        }
    }
    fail(errc::eigen_failure, "power iteration did not reach tolerance within budget");
}

}  // namespace detail

// A Markov chain over admissible L-words: the measure re-expressed at a
// coarser cylinder resolution. Escape-rate machinery runs on this.
struct RecodedChain {
    std::size_t word_length = 0;
    std::vector<Word> states;  // lexicographic
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<double> initial;  // mu([u]) per state
    struct Arc {
        int symbol;
        std::size_t to;
        double prob;
    };
    std::vector<std::vector<Arc>> arcs;

    std::size_t state_of(const Word& w, std::size_t offset = 0) const {
        return index.at(pack_word(w, alphabet_size, offset, word_length));
    }
    int alphabet_size = 0;
};

class GibbsMarkovMeasure {
public:
    static constexpr double kEigenTolerance = 1e-13;
    static constexpr std::size_t kEigenBudget = 1'000'000;

    GibbsMarkovMeasure(const SftSpec& spec, const LocallyConstantFunction& potential)
        : spec_(spec), potential_(potential) {
        if (!(potential.spec() == spec)) fail(errc::invalid_argument, "potential defined over a different SFT");
        // depth-1 potentials are promoted so a single recoding path serves
        // every depth: states are always (k-1)-words with k >= 2
        promoted_ = potential.depth() >= 2 ? potential : potential.promoted(2);
        build();
    }

    const SftSpec& spec() const { return spec_; }
    const LocallyConstantFunction& potential() const { return potential_; }
    std::size_t potential_depth() const { return promoted_.depth(); }
    std::size_t state_length() const { return promoted_.depth() - 1; }

    double lead_eigenvalue() const { return lambda_; }
    double pressure() const { return std::log(lambda_); }
    double eigen_residual() const { return residual_; }

    const std::vector<Word>& states() const { return states_; }
    const std::vector<double>& right_eigenvector() const { return h_; }
    const std::vector<double>& left_eigenvector() const { return v_; }
    const std::vector<double>& stationary() const { return stationary_; }

    std::size_t state_of(const Word& w, std::size_t offset = 0) const {
        if (w.size() < offset + state_length()) fail(errc::word_too_short, "state lookup needs more symbols");
        return state_index_.at(pack_word(w, spec_.alphabet_size(), offset, state_length()));
    }

    double weighted_matrix_entry(std::size_t from, std::size_t to) const {
        for (const auto& arc : arcs_[from])
            if (arc.to == to) return arc.weight;
        return 0.0;
    }

    struct KernelArc {
        int symbol;
        std::size_t to;
        double prob;
    };
    const std::vector<std::vector<KernelArc>>& kernel() const { return kernel_; }

    // mu([w]) for length >= k-1 via stationary x product of kernel steps
    double cylinder_measure(const Word& w) const {
        const std::size_t L = state_length();
        if (w.size() < L)
            fail(errc::word_too_short, "cylinder_measure needs at least " + std::to_string(L) + " symbols");
        if (!spec_.admissible(w)) return 0.0;
        std::size_t s = state_of(w, 0);
        double m = stationary_[s];
        for (std::size_t i = L; i < w.size(); ++i) {
            const int sym = w[static_cast<std::size_t>(i)];
            double step = 0.0;
            std::size_t next = s;
            for (const auto& arc : kernel_[s])
                if (arc.symbol == sym) {
                    step = arc.prob;
                    next = arc.to;
                    break;
                }
            m *= step;
            s = next;
        }
        return m;
    }

    // marginal mass of a short prefix: sum over admissible completions
    double prefix_measure(const Word& w) const {
        if (!spec_.admissible(w)) return 0.0;
        if (w.size() >= state_length()) return cylinder_measure(w);
        KahanSum sum;
        extend_and_sum(w, sum);
        return sum.value();
    }

    // exact integral of a locally constant function
    double integrate(const LocallyConstantFunction& g) const {
        if (!(g.spec() == spec_)) fail(errc::invalid_argument, "integrand defined over a different SFT");
        const std::size_t L = state_length();
        if (g.depth() <= L) {
            // direct dot product against the stationary state distribution
            KahanSum sum;
            for (std::size_t i = 0; i < states_.size(); ++i) sum.add(stationary_[i] * g.value(states_[i]));
            return sum.value();
        }
        // enumerate depth(g)-words with the running product measure
        KahanSum sum;
        struct Frame {
            std::size_t state;
            double mass;
        };
        std::vector<Word> words = enumerate_words(spec_, g.depth());
        for (const Word& w : words) sum.add(cylinder_measure(w) * g.value(w));
        return sum.value();
    }

    double entropy() const { return pressure() - integrate(potential_); }

    // independent route to the entropy through the chain's transition
    // probabilities; agreement with entropy() is the variational identity
    double entropy_markov() const {
        KahanSum sum;
        for (std::size_t i = 0; i < states_.size(); ++i)
            for (const auto& arc : kernel_[i])
                if (arc.prob > 0.0) sum.add(-stationary_[i] * arc.prob * std::log(arc.prob));
        return sum.value();
    }

    // stationary start, kernel-extended to the requested length
    Word sample_orbit(std::size_t length, Rng& rng) const {
        const std::size_t L = state_length();
        if (length < L) fail(errc::invalid_argument, "orbit length below state length");
        std::size_t s = sample_index(stationary_cdf_, rng);
        Word w = states_[s];
        while (w.size() < length) {
            const auto& cdf = kernel_cdf_[s];
            const double u = rng.next_double();
            std::size_t pick = cdf.size() - 1;
            for (std::size_t i = 0; i < cdf.size(); ++i)
                if (u < cdf[i]) {
                    pick = i;
                    break;
                }
            const auto& arc = kernel_[s][pick];
            w.syms.push_back(arc.symbol);
            s = arc.to;
        }
        return w;
    }

    // one kernel step from a state index; returns (symbol, next state)
    std::pair<int, std::size_t> step(std::size_t state, Rng& rng) const {
        const auto& cdf = kernel_cdf_[state];
        const double u = rng.next_double();
        std::size_t pick = cdf.size() - 1;
        for (std::size_t i = 0; i < cdf.size(); ++i)
            if (u < cdf[i]) {
                pick = i;
                break;
            }
        const auto& arc = kernel_[state][pick];
        return {arc.symbol, arc.to};
    }

    std::size_t sample_initial_state(Rng& rng) const { return sample_index(stationary_cdf_, rng); }

    // the measure as a Markov chain on admissible L-words, L >= k-1
    RecodedChain recode(std::size_t L) const {
        if (L < state_length()) fail(errc::invalid_argument, "recode length below state length");
        RecodedChain chain;
        chain.word_length = L;
        chain.alphabet_size = spec_.alphabet_size();
        chain.states = enumerate_words(spec_, L);
        chain.index.reserve(chain.states.size());
        for (std::size_t i = 0; i < chain.states.size(); ++i)
            chain.index.emplace(pack_word(chain.states[i], spec_.alphabet_size()), i);
        chain.initial.resize(chain.states.size());
        chain.arcs.resize(chain.states.size());
        for (std::size_t i = 0; i < chain.states.size(); ++i) {
            const Word& u = chain.states[i];
            chain.initial[i] = cylinder_measure(u);
            const std::size_t inner = state_of(u, L - state_length());
            for (const auto& arc : kernel_[inner]) {
                Word next = u.shifted(1).appended(arc.symbol);
                chain.arcs[i].push_back({arc.symbol, chain.index.at(pack_word(next, spec_.alphabet_size())),
                                         arc.prob});
            }
        }
        return chain;
    }

private:
    void build() {
        const std::size_t L = state_length();
        states_ = enumerate_words(spec_, L);
        state_index_.reserve(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i)
            state_index_.emplace(pack_word(states_[i], spec_.alphabet_size()), i);

        // weighted transfer matrix M(w,w') = exp(phi(w . last(w')))
        arcs_.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const Word& w = states_[i];
            for (int s : spec_.successors(w[w.size() - 1])) {
                const Word ext = w.appended(s);  // the k-word w . s
                const double weight = std::exp(promoted_.value(ext));
                const Word next = ext.shifted(1);
                arcs_[i].push_back({s, state_index_.at(pack_word(next, spec_.alphabet_size())), weight});
            }
        }

        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t i = 0; i < arcs_.size(); ++i)
                for (const auto& arc : arcs_[i]) y[i] += arc.weight * x[arc.to];
        };
        auto apply_t = [&](const std::vector<double>& x, std::vector<double>& y) {
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t i = 0; i < arcs_.size(); ++i)
                for (const auto& arc : arcs_[i]) y[arc.to] += arc.weight * x[i];
        };

        auto right = detail::power_iteration(states_.size(), apply, kEigenTolerance, kEigenBudget);
        auto left = detail::power_iteration(states_.size(), apply_t, kEigenTolerance, kEigenBudget);
        lambda_ = right.eigenvalue;
        residual_ = std::max(right.residual, left.residual);
        h_ = std::move(right.vec);
        v_ = std::move(left.vec);

        // normalization convention: <v,h> = 1 and sum(stationary) = 1
        double hsum = 0.0;
        for (double x : h_) hsum += x;
        for (double& x : h_) x /= hsum;
        double dot = 0.0;
        for (std::size_t i = 0; i < h_.size(); ++i) dot += v_[i] * h_[i];
        for (double& x : v_) x /= dot;

        stationary_.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) stationary_[i] = v_[i] * h_[i];
        detail::normalize_simplex_exact(stationary_);

        kernel_.resize(states_.size());
        kernel_cdf_.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) {
            std::vector<double> row;
            for (const auto& arc : arcs_[i]) row.push_back(arc.weight * h_[arc.to] / (lambda_ * h_[i]));
            detail::normalize_simplex_exact(row);
            double running = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) {
                kernel_[i].push_back({arcs_[i][j].symbol, arcs_[i][j].to, row[j]});
                running += row[j];
                kernel_cdf_[i].push_back(running);
            }
        }
        stationary_cdf_.resize(states_.size());
        double running = 0.0;
        for (std::size_t i = 0; i < states_.size(); ++i) {
            running += stationary_[i];
            stationary_cdf_[i] = running;
        }
    }

    void extend_and_sum(const Word& w, KahanSum& sum) const {
        if (w.size() >= state_length()) {
            sum.add(stationary_[state_of(w, 0)]);
            return;
        }
        if (w.empty()) {
            for (int s = 1; s <= spec_.alphabet_size(); ++s) extend_and_sum(Word{s}, sum);
            return;
        }
        for (int s : spec_.successors(w[w.size() - 1])) extend_and_sum(w.appended(s), sum);
    }

    static std::size_t sample_index(const std::vector<double>& cdf, Rng& rng) {
        const double u = rng.next_double();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) return cdf.size() - 1;
        return static_cast<std::size_t>(it - cdf.begin());
    }

    SftSpec spec_;
    LocallyConstantFunction potential_;
    LocallyConstantFunction promoted_ = potential_;  // depth >= 2
    std::vector<Word> states_;
    std::unordered_map<std::uint64_t, std::size_t> state_index_;
    struct WeightArc {
        int symbol;
        std::size_t to;
        double weight;
    };
    std::vector<std::vector<WeightArc>> arcs_;
    double lambda_ = 0.0;
    double residual_ = 0.0;
    std::vector<double> h_, v_, stationary_, stationary_cdf_;
    std::vector<std::vector<KernelArc>> kernel_;
    std::vector<std::vector<double>> kernel_cdf_;
};

inline GibbsMarkovMeasure equilibrium_measure(const SftSpec& spec, const LocallyConstantFunction& phi) {
    return GibbsMarkovMeasure(spec, phi);
}

}  // namespace thermoflow
