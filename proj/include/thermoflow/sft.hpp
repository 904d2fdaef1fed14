#pragma once

// One-sided subshift of finite type (X, sigma): transition matrix
// validation, admissible word enumeration, the theta-metric on truncated
// points, locally constant functions with their variation/Lipschitz norms,
// and Birkhoff sums.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "thermoflow/common.hpp"

namespace thermoflow {

// Admissible finite word over {1,...,a}. Symbols are 1-based on every
// interface; words of length n name n-cylinders.
struct Word {
    std::vector<int> syms;

    Word() = default;
    explicit Word(std::vector<int> s) : syms(std::move(s)) {}
    Word(std::initializer_list<int> s) : syms(s) {}

    std::size_t size() const { return syms.size(); }
    bool empty() const { return syms.empty(); }
    int operator[](std::size_t i) const { return syms[i]; }

    Word prefix(std::size_t m) const {
        return Word(std::vector<int>(syms.begin(), syms.begin() + std::min(m, syms.size())));
    }
    // the truncation of sigma^m(x)
    Word shifted(std::size_t m) const {
        if (m >= syms.size()) return Word{};
        return Word(std::vector<int>(syms.begin() + m, syms.end()));
    }
    Word appended(int symbol) const {
        Word w(*this);
        w.syms.push_back(symbol);
        return w;
    }

    bool operator==(const Word&) const = default;
    auto operator<=>(const Word&) const = default;
};

// Symbol strings: digits juxtaposed while the alphabet stays below 10,
// '.'-separated otherwise ("121" vs "10.2.1").
inline std::string format_word(const Word& w, int alphabet_size) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (alphabet_size > 9 && i > 0) out.push_back('.');
        out += std::to_string(w[i]);
    }
    return out;
}

inline Word parse_word(const std::string& text, int alphabet_size) {
    Word w;
    if (alphabet_size > 9) {
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, '.')) {
            if (part.empty()) fail(errc::invalid_argument, "empty symbol in word '" + text + "'");
            w.syms.push_back(std::stoi(part));
        }
    } else {
        for (char c : text) {
            if (c < '1' || c > '9') fail(errc::invalid_argument, "bad symbol character in word '" + text + "'");
            w.syms.push_back(c - '0');
        }
    }
    for (int s : w.syms)
        if (s < 1 || s > alphabet_size)
            fail(errc::invalid_argument, "symbol out of range in word '" + text + "'");
    return w;
}

// Big-endian base-a packing; collision-free for words of a fixed length.
inline std::uint64_t pack_word(const Word& w, int alphabet_size, std::size_t offset = 0,
                               std::size_t count = std::numeric_limits<std::size_t>::max()) {
    const std::size_t end = std::min(w.size(), offset + std::min(count, w.size()));
    std::uint64_t key = 0;
    for (std::size_t i = offset; i < end; ++i)
        key = key * static_cast<std::uint64_t>(alphabet_size) + static_cast<std::uint64_t>(w[i] - 1);
    return key;
}

// The space (X_A, sigma, d_theta).
class SftSpec {
public:
    static SftSpec validate(const std::vector<std::vector<int>>& raw_matrix, double theta) {
        if (!(theta > 0.0 && theta < 1.0)) fail(errc::bad_theta, "theta must lie in (0,1)");
        const std::size_t a = raw_matrix.size();
        if (a < 2) fail(errc::invalid_argument, "alphabet size must be >= 2");
        for (const auto& row : raw_matrix) {
            if (row.size() != a) fail(errc::invalid_argument, "transition matrix must be square");
            for (int v : row)
                if (v != 0 && v != 1) fail(errc::invalid_argument, "transition entries must be 0/1");
        }
        for (std::size_t i = 0; i < a; ++i) {
            bool row_live = false, col_live = false;
            for (std::size_t j = 0; j < a; ++j) {
                row_live |= raw_matrix[i][j] != 0;
                col_live |= raw_matrix[j][i] != 0;
            }
            if (!row_live || !col_live)
                fail(errc::dead_symbol, "symbol " + std::to_string(i + 1) + " has a zero row or column");
        }
        // smallest d <= a^2 with A^d entrywise positive
        std::vector<std::vector<int>> power = raw_matrix;
        int d = 0;
        for (int step = 1; step <= static_cast<int>(a * a); ++step) {
            bool all_positive = true;
            for (const auto& row : power)
                for (int v : row)
                    if (v == 0) all_positive = false;
            if (all_positive) {
                d = step;
                break;
            }
            // boolean matrix product with A
            std::vector<std::vector<int>> next(a, std::vector<int>(a, 0));
            for (std::size_t i = 0; i < a; ++i)
                for (std::size_t k = 0; k < a; ++k)
                    if (power[i][k])
                        for (std::size_t j = 0; j < a; ++j)
                            if (raw_matrix[k][j]) next[i][j] = 1;
            power = std::move(next);
        }
        if (d == 0) fail(errc::not_primitive, "no power A^d > 0 with d <= a^2");
        return SftSpec(raw_matrix, theta, d);
    }

    int alphabet_size() const { return static_cast<int>(transition_.size()); }
    double theta() const { return theta_; }
    int aperiodicity_power() const { return aperiodicity_power_; }
    bool allowed(int from, int to) const { return transition_[from - 1][to - 1] != 0; }
    const std::vector<int>& successors(int symbol) const { return successors_[symbol - 1]; }
    // every symbol, the option set for the first position of a word
    const std::vector<int>& successors_any() const { return all_symbols_; }
    const std::vector<std::vector<int>>& transition() const { return transition_; }

    bool admissible(const Word& w) const {
        for (int s : w.syms)
            if (s < 1 || s > alphabet_size()) return false;
        for (std::size_t i = 0; i + 1 < w.size(); ++i)
            if (!allowed(w[i], w[i + 1])) return false;
        return true;
    }

    bool operator==(const SftSpec& other) const {
        return transition_ == other.transition_ && theta_ == other.theta_;
    }

private:
    SftSpec(std::vector<std::vector<int>> m, double theta, int d)
        : transition_(std::move(m)), theta_(theta), aperiodicity_power_(d) {
        successors_.resize(transition_.size());
        for (std::size_t i = 0; i < transition_.size(); ++i)
            for (std::size_t j = 0; j < transition_.size(); ++j)
                if (transition_[i][j]) successors_[i].push_back(static_cast<int>(j + 1));
        all_symbols_.resize(transition_.size());
        std::iota(all_symbols_.begin(), all_symbols_.end(), 1);
    }

    std::vector<std::vector<int>> transition_;
    double theta_;
    int aperiodicity_power_;
    std::vector<std::vector<int>> successors_;
    std::vector<int> all_symbols_;
};

inline SftSpec validate_sft(const std::vector<std::vector<int>>& raw_matrix, double theta) {
    return SftSpec::validate(raw_matrix, theta);
}

// Depth-first visit of all admissible n-words in lexicographic order. The
// callback sees the shared buffer; it must copy if it keeps the word.
template <typename Leaf>
void for_each_word(const SftSpec& spec, std::size_t n, Leaf&& leaf) {
    if (n == 0) return;
    std::vector<int> buf(n, 0);
    // iterative DFS; position i carries the next symbol candidate
    std::size_t depth = 0;
    std::vector<std::size_t> branch(n, 0);
    while (true) {
        if (depth == n) {
            leaf(const_cast<const std::vector<int>&>(buf));
            --depth;
            continue;
        }
        const std::vector<int>* options =
            depth == 0 ? &spec.successors_any() : &spec.successors(buf[depth - 1]);
        if (branch[depth] < options->size()) {
            buf[depth] = (*options)[branch[depth]];
            ++branch[depth];
            ++depth;
            if (depth < n) branch[depth] = 0;
        } else {
            if (depth == 0) break;
            branch[depth] = 0;
            --depth;
        }
    }
}

inline std::vector<Word> enumerate_words(const SftSpec& spec, std::size_t n) {
    std::vector<Word> out;
    for_each_word(spec, n, [&](const std::vector<int>& buf) { out.emplace_back(buf); });
    return out;
}

inline std::size_t count_words(const SftSpec& spec, std::size_t n) {
    // transfer-matrix recursion instead of enumeration
    if (n == 0) return 1;
    std::vector<std::size_t> counts(static_cast<std::size_t>(spec.alphabet_size()), 1);
    for (std::size_t step = 1; step < n; ++step) {
        std::vector<std::size_t> next(counts.size(), 0);
        for (int s = 1; s <= spec.alphabet_size(); ++s)
            for (int t : spec.successors(s)) next[s - 1] += counts[static_cast<std::size_t>(t - 1)];
        counts = std::move(next);
    }
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    return total;
}

// d_theta on equal-length truncations: theta^m at the first disagreement m,
// 0 for identical words.
inline double d_theta(const SftSpec& spec, const Word& x, const Word& y) {
    if (x.size() != y.size()) fail(errc::invalid_argument, "d_theta expects equal-length truncations");
    for (std::size_t m = 0; m < x.size(); ++m)
        if (x[m] != y[m]) return std::pow(spec.theta(), static_cast<double>(m));
    return 0.0;
}

// Variant for callers asserting the underlying points are distinct: equal
// truncations cannot resolve the metric and are an error.
inline double d_theta_distinct(const SftSpec& spec, const Word& x, const Word& y) {
    const double d = d_theta(spec, x, y);
    if (d == 0.0)
        fail(errc::truncation_too_short, "words agree on all " + std::to_string(x.size()) + " symbols");
    return d;
}

// Locally constant function of depth k: one value per admissible k-word.
// Dense in the theta-Lipschitz class; every norm below is exact.
class LocallyConstantFunction {
public:
    LocallyConstantFunction(const SftSpec& spec, std::size_t depth,
                            const std::vector<std::pair<Word, double>>& entries)
        : spec_(spec), depth_(depth) {
        if (depth == 0) fail(errc::invalid_argument, "depth must be >= 1");
        for (const auto& [w, v] : entries) {
            if (w.size() != depth) fail(errc::missing_word, "table key '" + format_word(w, spec.alphabet_size()) + "' has wrong length");
            if (!spec.admissible(w))
                fail(errc::missing_word, "table key '" + format_word(w, spec.alphabet_size()) + "' is not admissible");
            table_[pack_word(w, spec.alphabet_size())] = v;
        }
        const std::size_t expected = count_words(spec, depth);
        if (table_.size() != expected)
            fail(errc::missing_word, "table must cover every admissible word of length " +
                                         std::to_string(depth) + " exactly once (" +
                                         std::to_string(table_.size()) + " of " + std::to_string(expected) + ")");
        compute_norms();
    }

    static LocallyConstantFunction constant(const SftSpec& spec, double c) {
        std::vector<std::pair<Word, double>> entries;
        for (const Word& w : enumerate_words(spec, 1)) entries.emplace_back(w, c);
        return LocallyConstantFunction(spec, 1, entries);
    }

    const SftSpec& spec() const { return spec_; }
    std::size_t depth() const { return depth_; }

    // g(sigma^offset x) for the truncation w; needs offset + depth symbols
    double value(const Word& w, std::size_t offset = 0) const {
        if (w.size() < offset + depth_)
            fail(errc::word_too_short, "need " + std::to_string(offset + depth_) + " symbols, have " +
                                           std::to_string(w.size()));
        return table_.at(pack_word(w, spec_.alphabet_size(), offset, depth_));
    }
    double value_packed(std::uint64_t key) const { return table_.at(key); }

    double sup_norm() const { return sup_norm_; }
    double seminorm() const { return seminorm_; }
    double lipschitz_norm() const { return seminorm_ + sup_norm_; }
    double min_value() const { return min_value_; }
    double max_value() const { return max_value_; }

    // V_m(g) = sup {|g(x)-g(y)| : x,y share an m-prefix}; zero for m >= depth
    double variation(std::size_t m) const {
        if (m >= depth_) return 0.0;
        std::unordered_map<std::uint64_t, std::pair<double, double>> spread;  // prefix -> (min,max)
        for_each_word(spec_, depth_, [&](const std::vector<int>& buf) {
            const Word w(buf);
            const double v = table_.at(pack_word(w, spec_.alphabet_size()));
            const std::uint64_t p = pack_word(w, spec_.alphabet_size(), 0, m);
            auto it = spread.find(p);
            if (it == spread.end())
                spread.emplace(p, std::make_pair(v, v));
            else {
                it->second.first = std::min(it->second.first, v);
                it->second.second = std::max(it->second.second, v);
            }
        });
        double vmax = 0.0;
        for (const auto& [p, mm] : spread) vmax = std::max(vmax, mm.second - mm.first);
        return vmax;
    }

    LocallyConstantFunction shifted_by_constant(double c) const {
        LocallyConstantFunction g(*this);
        for (auto& [k, v] : g.table_) v += c;
        g.compute_norms();
        return g;
    }

    // same function expressed on deeper cylinders
    LocallyConstantFunction promoted(std::size_t new_depth) const {
        if (new_depth < depth_) fail(errc::invalid_argument, "promotion cannot reduce depth");
        if (new_depth == depth_) return *this;
        std::vector<std::pair<Word, double>> entries;
        for_each_word(spec_, new_depth, [&](const std::vector<int>& buf) {
            const Word w(buf);
            entries.emplace_back(w, table_.at(pack_word(w, spec_.alphabet_size(), 0, depth_)));
        });
        return LocallyConstantFunction(spec_, new_depth, entries);
    }

    std::vector<std::pair<Word, double>> entries_sorted() const {
        std::vector<std::pair<Word, double>> out;
        for_each_word(spec_, depth_, [&](const std::vector<int>& buf) {
            const Word w(buf);
            out.emplace_back(w, table_.at(pack_word(w, spec_.alphabet_size())));
        });
        return out;
    }

    // Dense lookup keyed by the packed k-window, for hot enumeration loops;
    // inadmissible slots hold NaN.
    std::vector<double> dense_lut() const {
        std::size_t size = 1;
        for (std::size_t i = 0; i < depth_; ++i) size *= static_cast<std::size_t>(spec_.alphabet_size());
        std::vector<double> lut(size, std::numeric_limits<double>::quiet_NaN());
        for (const auto& [k, v] : table_) lut[k] = v;
        return lut;
    }

private:
    void compute_norms() {
        sup_norm_ = 0.0;
        min_value_ = std::numeric_limits<double>::infinity();
        max_value_ = -std::numeric_limits<double>::infinity();
        for (const auto& [k, v] : table_) {
            sup_norm_ = std::max(sup_norm_, std::abs(v));
            min_value_ = std::min(min_value_, v);
            max_value_ = std::max(max_value_, v);
        }
        seminorm_ = 0.0;
        for (std::size_t m = 0; m < depth_; ++m)
            seminorm_ = std::max(seminorm_, variation(m) / std::pow(spec_.theta(), static_cast<double>(m)));
    }

    SftSpec spec_;
    std::size_t depth_;
    std::unordered_map<std::uint64_t, double> table_;
    double sup_norm_ = 0.0;
    double seminorm_ = 0.0;
    double min_value_ = 0.0;
    double max_value_ = 0.0;
};

struct Norms {
    double sup_norm;
    double seminorm;
    double lipschitz_norm;
};

inline Norms norms(const LocallyConstantFunction& g) {
    return Norms{g.sup_norm(), g.seminorm(), g.lipschitz_norm()};
}

// S^sigma_n g along a truncation
inline double birkhoff_sum(const LocallyConstantFunction& g, const Word& w, std::size_t n) {
    if (n == 0) return 0.0;
    if (w.size() + 1 < n + g.depth())
        fail(errc::word_too_short, "birkhoff_sum needs " + std::to_string(n + g.depth() - 1) + " symbols");
    KahanSum sum;
    for (std::size_t j = 0; j < n; ++j) sum.add(g.value(w, j));
    return sum.value();
}

}  // namespace thermoflow
