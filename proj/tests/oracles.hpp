#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check: direct Gibbs-weight ratios, binomial tails, brute-force metric
// suprema, and midpoint quadrature along the flow.

#include <cmath>
#include <vector>

#include "thermoflow/measure.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

namespace oracles {

// mu([w]) approximated by the ratio of raw Gibbs weights over all N-words:
// sum over N-words extending w of exp(S phi) divided by the total. The N
// Birkhoff windows wrap around (periodic closure), so the surface factors
// of the two ends cancel and the error decays geometrically in N - |w|.
inline double gibbs_ratio(const thermoflow::SftSpec& spec, const thermoflow::LocallyConstantFunction& phi,
                          const thermoflow::Word& w, std::size_t N) {
    const std::size_t k = phi.depth();
    double numer = 0.0, denom = 0.0;
    thermoflow::for_each_word(spec, N, [&](const std::vector<int>& buf) {
        if (!spec.allowed(buf[N - 1], buf[0])) return;  // cyclic admissibility
        thermoflow::Word u(buf);
        for (std::size_t i = 0; i + 1 < k; ++i) u.syms.push_back(buf[i]);
        if (!spec.admissible(u)) return;
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) s += phi.value(u, j);
        const double weight = std::exp(s);
        denom += weight;
        bool extends = true;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (u[i] != w[i]) {
                extends = false;
                break;
            }
        if (extends) numer += weight;
    });
    return numer / denom;
}

// P(|S/m - 1/2| >= eps) for S ~ Binomial(m, 1/2), exact over the 2^m grid
inline double binomial_half_tail(int m, double eps) {
    std::vector<double> logfact(static_cast<std::size_t>(m) + 1, 0.0);
    for (int i = 2; i <= m; ++i) logfact[static_cast<std::size_t>(i)] = logfact[static_cast<std::size_t>(i - 1)] + std::log(i);
    double total = 0.0;
    for (int s = 0; s <= m; ++s) {
        const double frac = static_cast<double>(s) / m;
        if (std::abs(frac - 0.5) >= eps) {
            const double logC = logfact[static_cast<std::size_t>(m)] - logfact[static_cast<std::size_t>(s)] -
                                logfact[static_cast<std::size_t>(m - s)];
            total += std::exp(logC - m * std::log(2.0));
        }
    }
    return total;
}

// Midpoint quadrature of s -> F(Phi^s p) over [0,t], split at the roof
// crossings where the integrand jumps; step h within each smooth piece.
inline double flow_quadrature(const thermoflow::FlowObservable& F, const thermoflow::RoofFunction& f,
                              const thermoflow::FlowPoint& p, double t, double h) {
    double total = 0.0;
    double level = p.level;
    double remaining = t;
    std::size_t m = 0;
    while (remaining > 0.0) {
        const double roof = f.value(p.base, m);
        const double len = std::min(roof - level, remaining);
        const std::size_t steps = static_cast<std::size_t>(std::ceil(len / h));
        double piece = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
            const double s = level + (static_cast<double>(i) + 0.5) * len / static_cast<double>(steps);
            piece += F.value(p.base, s, m);
        }
        total += piece * len / static_cast<double>(steps);
        remaining -= len;
        level = 0.0;
        ++m;
    }
    return total;
}

// Lipschitz seminorm as a brute-force sup over pairs of depth-k words
inline double seminorm_bruteforce(const thermoflow::SftSpec& spec,
                                  const thermoflow::LocallyConstantFunction& g) {
    const auto words = thermoflow::enumerate_words(spec, g.depth());
    double best = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i)
        for (std::size_t j = 0; j < words.size(); ++j) {
            if (i == j) continue;
            const double d = thermoflow::d_theta(spec, words[i], words[j]);
            best = std::max(best, std::abs(g.value(words[i]) - g.value(words[j])) / d);
        }
    return best;
}

}  // namespace oracles
