#pragma once

// Shared infrastructure: typed errors, deterministic RNG, compensated
// summation, small numeric helpers.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermoflow {

inline constexpr const char* kVersion = "0.1.0";

enum class errc {
    not_primitive,
    dead_symbol,
    bad_theta,
    truncation_too_short,
    word_too_short,
    eigen_failure,
    budget_exceeded,
    degree_too_high,
    missing_word,
    below_threshold,
    degenerate_seminorm,
    not_actually_periodic,
    period_not_prime,
    hole_is_everything,
    all_probabilities_zero,
    invalid_argument,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::not_primitive: return "NotPrimitive";
        case errc::dead_symbol: return "DeadSymbol";
        case errc::bad_theta: return "BadTheta";
        case errc::truncation_too_short: return "TruncationTooShort";
        case errc::word_too_short: return "WordTooShort";
        case errc::eigen_failure: return "EigenFailure";
        case errc::budget_exceeded: return "BudgetExceeded";
        case errc::degree_too_high: return "DegreeTooHigh";
        case errc::missing_word: return "MissingWord";
        case errc::below_threshold: return "BelowThreshold";
        case errc::degenerate_seminorm: return "DegenerateSeminorm";
        case errc::not_actually_periodic: return "NotActuallyPeriodic";
        case errc::period_not_prime: return "PeriodNotPrime";
        case errc::hole_is_everything: return "HoleIsEverything";
        case errc::all_probabilities_zero: return "AllProbabilitiesZero";
        case errc::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

// xoshiro-free deterministic generator: splitmix64 seeded 64-bit state,
// uniform doubles built from the top 53 bits so results do not depend on
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // derive an independent stream, e.g. one per parallel block
    Rng split(std::uint64_t stream) const {
        Rng r(state_ ^ (0xd1342543de82ef95ULL * (stream + 1)));
        return r;
    }

private:
    std::uint64_t state_;
};

// Neumaier compensated accumulator; deterministic for a fixed visit order.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    std::size_t n = 0;
};

// ordinary least squares y = a + b x with the slope's standard error
inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit fit;
    fit.n = x.size();
    if (x.size() != y.size() || x.size() < 2) fail(errc::invalid_argument, "least_squares needs >= 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) fail(errc::invalid_argument, "least_squares: degenerate abscissae");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (fit.intercept + fit.slope * x[i]);
            ss += r * r;
        }
        fit.slope_stderr = std::sqrt(ss / (n - 2.0) / sxx);
    }
    return fit;
}

}  // namespace thermoflow
