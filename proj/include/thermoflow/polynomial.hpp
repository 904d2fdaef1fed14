#pragma once

// Dense univariate polynomials with the exact pieces the suspension-flow
// observables need: antiderivatives, root isolation on an interval, and
// integrals of |p|. Root isolation recurses through derivatives so every
// bracket is monotone before bisection.

#include <algorithm>
#include <cmath>
#include <vector>

#include "thermoflow/common.hpp"

namespace thermoflow {

// coefficients in increasing degree: p(s) = c[0] + c[1] s + ...
struct Poly {
    std::vector<double> coeffs;

    Poly() = default;
    explicit Poly(std::vector<double> c) : coeffs(std::move(c)) {}

    double operator()(double s) const {
        double acc = 0.0;
        for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * s + coeffs[i];
        return acc;
    }

    int degree() const {
        for (std::size_t i = coeffs.size(); i-- > 0;)
            if (coeffs[i] != 0.0) return static_cast<int>(i);
        return -1;  // zero polynomial
    }

    Poly derivative() const {
        if (coeffs.size() <= 1) return Poly{};
        std::vector<double> d(coeffs.size() - 1);
        for (std::size_t i = 1; i < coeffs.size(); ++i) d[i - 1] = coeffs[i] * static_cast<double>(i);
        return Poly(std::move(d));
    }

    // antiderivative with value 0 at 0
    Poly antiderivative() const {
        std::vector<double> a(coeffs.size() + 1, 0.0);
        for (std::size_t i = 0; i < coeffs.size(); ++i) a[i + 1] = coeffs[i] / static_cast<double>(i + 1);
        return Poly(std::move(a));
    }

    double integral(double lo, double hi) const {
        const Poly a = antiderivative();
        return a(hi) - a(lo);
    }

    Poly operator-(const Poly& other) const {
        std::vector<double> c(std::max(coeffs.size(), other.coeffs.size()), 0.0);
        for (std::size_t i = 0; i < coeffs.size(); ++i) c[i] += coeffs[i];
        for (std::size_t i = 0; i < other.coeffs.size(); ++i) c[i] -= other.coeffs[i];
        return Poly(std::move(c));
    }

    Poly plus_constant(double c) const {
        Poly p(*this);
        if (p.coeffs.empty()) p.coeffs.push_back(0.0);
        p.coeffs[0] += c;
        return p;
    }

    Poly negated() const {
        Poly p(*this);
        for (double& c : p.coeffs) c = -c;
        return p;
    }

    Poly scaled(double a) const {
        Poly p(*this);
        for (double& c : p.coeffs) c *= a;
        return p;
    }

    // q(s) = p(s + c), by binomial expansion
    Poly shift_argument(double c) const {
        std::vector<double> out(coeffs.size(), 0.0);
        std::vector<double> row;
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            row.assign(i + 1, 0.0);  // row[j] = C(i,j) c^{i-j}
            row[i] = 1.0;
            for (std::size_t j = i; j-- > 0;)
                row[j] = row[j + 1] * static_cast<double>(j + 1) / static_cast<double>(i - j) * c;
            for (std::size_t j = 0; j <= i; ++j) out[j] += coeffs[i] * row[j];
        }
        return Poly(std::move(out));
    }

    bool is_zero() const { return degree() < 0; }
};

namespace detail {

inline double bisect_root(const Poly& p, double lo, double hi) {
    double flo = p(lo);
    if (flo == 0.0) return lo;
    double fhi = p(hi);
    if (fhi == 0.0) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double fm = p(mid);
        if (fm == 0.0) return mid;
        if ((flo < 0.0) != (fm < 0.0)) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Strictly increasing roots of p in [lo, hi], found by bisection between
// the critical points of p. Tangential (non-sign-changing) roots may be
// reported at reduced precision; callers below only need sign changes.
inline std::vector<double> roots_in_interval(const Poly& p, double lo, double hi) {
    std::vector<double> roots;
    if (hi <= lo) return roots;
    const int deg = p.degree();
    if (deg <= 0) return roots;  // constants (including zero) have no isolated roots
    if (deg == 1) {
        const double r = -p.coeffs[0] / p.coeffs[1];
        if (r >= lo && r <= hi) roots.push_back(r);
        return roots;
    }
    std::vector<double> knots = roots_in_interval(p.derivative(), lo, hi);
    knots.insert(knots.begin(), lo);
    knots.push_back(hi);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i], b = knots[i + 1];
        if (b <= a) continue;
        const double fa = p(a), fb = p(b);
        if (fa == 0.0) {
            if (roots.empty() || roots.back() < a) roots.push_back(a);
        }
        if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
            const double r = detail::bisect_root(p, a, b);
            if (roots.empty() || r > roots.back()) roots.push_back(r);
        }
        if (fb == 0.0 && i + 2 == knots.size()) {
            if (roots.empty() || roots.back() < b) roots.push_back(b);
        }
    }
    return roots;
}

// integral of |p| over [lo,hi], splitting at sign changes
inline double integral_abs(const Poly& p, double lo, double hi) {
    if (hi <= lo) return 0.0;
    std::vector<double> cuts = roots_in_interval(p, lo, hi);
    cuts.insert(cuts.begin(), lo);
    cuts.push_back(hi);
    const Poly a = p.antiderivative();
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) total += std::abs(a(cuts[i + 1]) - a(cuts[i]));
    return total;
}

// max of |p| over [lo,hi]: endpoints plus interior critical points
inline double max_abs_on_interval(const Poly& p, double lo, double hi) {
    double best = std::max(std::abs(p(lo)), std::abs(p(hi)));
    for (double r : roots_in_interval(p.derivative(), lo, hi)) best = std::max(best, std::abs(p(r)));
    return best;
}

// Sub-intervals of [lo,hi] where p >= 0, as a list of (start,end) pairs.
inline std::vector<std::pair<double, double>> nonnegative_intervals(const Poly& p, double lo, double hi) {
    std::vector<std::pair<double, double>> out;
    if (hi <= lo) return out;
    std::vector<double> cuts = roots_in_interval(p, lo, hi);
    cuts.insert(cuts.begin(), lo);
    cuts.push_back(hi);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b <= a) continue;
        if (p(0.5 * (a + b)) >= 0.0) {
            if (!out.empty() && out.back().second == a)
                out.back().second = b;
            else
                out.emplace_back(a, b);
        }
    }
    return out;
}

}  // namespace thermoflow
