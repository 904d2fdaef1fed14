#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "thermoflow/escape.hpp"

using namespace thermoflow;

namespace {

SftSpec full2(double theta = 0.5) { return validate_sft({{1, 1}, {1, 1}}, theta); }

GibbsMarkovMeasure uniform2() {
    const auto spec = full2();
    return equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
}

Word ones(std::size_t n) { return Word(std::vector<int>(n, 1)); }

Word alternating(std::size_t n) {
    Word w;
    for (std::size_t i = 0; i < n; ++i) w.syms.push_back(i % 2 == 0 ? 1 : 2);
    return w;
}

}  // namespace

TEST_CASE("gamma at periodic and aperiodic centers") {
    auto mu = uniform2();
    SUBCASE("aperiodic") { CHECK(gamma_z(mu, Word{1, 2, 2, 1, 2, 1, 1, 2}, 0) == 1.0); }
    SUBCASE("fixed point") {
        CHECK(gamma_z(mu, ones(16), 1) == doctest::Approx(0.5).epsilon(1e-13));
    }
    SUBCASE("period two") {
        CHECK(gamma_z(mu, alternating(16), 2) == doctest::Approx(0.75).epsilon(1e-13));
    }
    SUBCASE("declared period must match the truncation") {
        CHECK_THROWS_AS(gamma_z(mu, alternating(16), 1), error);
    }
    SUBCASE("declared period must be prime") {
        CHECK_THROWS_AS(gamma_z(mu, ones(16), 2), error);
    }
}

TEST_CASE("discrete escape rate through a one-symbol hole") {
    auto mu = uniform2();
    const Hole hole(mu.spec(), {Word{1}});
    CHECK(discrete_escape_rate(mu, hole) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("holes cannot cover the whole space") {
    auto mu = uniform2();
    CHECK_THROWS_AS(Hole(mu.spec(), {Word{1}, Word{2}}), error);
}

TEST_CASE("discrete ratio converges to gamma for shrinking run holes") {
    auto mu = uniform2();
    double prev_rate = std::numeric_limits<double>::infinity();
    for (std::size_t n = 2; n <= 12; ++n) {
        const Hole hole(mu.spec(), {ones(n)});
        const double rate = discrete_escape_rate(mu, hole);
        CHECK(rate < prev_rate);  // smaller holes escape slower
        prev_rate = rate;
        if (n == 12) {
            const double ratio = rate / hole.measure(mu);
            CHECK(std::abs(ratio - 0.5) <= 0.02 * 0.5);
        }
    }
}

TEST_CASE("survivor mass: exact kernel powers vs word enumeration") {
    auto mu = uniform2();
    const Hole hole(mu.spec(), {Word{1, 1}});
    CHECK(survivor_mass(mu, Hole(mu.spec(), {Word{1}}), 1) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(survivor_mass(mu, Hole(mu.spec(), {Word{1}}), 10) ==
          doctest::Approx(std::pow(2.0, -10.0)).epsilon(1e-12));

    double prev = 1.0;
    for (std::size_t k = 1; k <= 14; ++k) {
        const double mass = survivor_mass(mu, hole, k);
        CHECK(mass <= prev + 1e-15);
        prev = mass;
        // enumeration oracle over (n + k - 1)-words
        KahanSum direct;
        for (const Word& w : enumerate_words(mu.spec(), hole.length() + k - 1)) {
            bool survives = true;
            for (std::size_t i = 0; i < k; ++i)
                if (hole.contains_window(w, i)) {
                    survives = false;
                    break;
                }
            if (survives) direct.add(mu.cylinder_measure(w));
        }
        CHECK(std::abs(mass - direct.value()) <= 1e-12);
    }
}

TEST_CASE("hitting time uses the first shifted window") {
    const auto spec = full2();
    const Hole hole(spec, {Word{1, 1}});
    CHECK(hitting_time(hole, Word{1, 2, 1, 1, 2, 1}) == 2);
    // a start inside the hole does not count as an instant hit
    CHECK(hitting_time(hole, Word{1, 1, 2, 1, 1}) == 3);
    CHECK(!hitting_time(hole, Word{1, 2, 1, 2, 1, 2}).has_value());
}

TEST_CASE("flow escape rate: constant roofs reduce to the discrete rate") {
    auto mu = uniform2();
    const Hole hole(mu.spec(), {ones(3)});
    const double r_disc = discrete_escape_rate(mu, hole);

    SUBCASE("unit roof") {
        const RoofFunction f(LocallyConstantFunction::constant(mu.spec(), 1.0));
        std::vector<double> grid;
        for (int i = 1; i <= 12; ++i) grid.push_back(3.0 / r_disc * i / 12.0);
        const auto flow = flow_escape_rate(mu, f, hole, grid, 0, 1);
        CHECK(flow.exact);
        CHECK(std::abs(flow.rate - r_disc) <= std::max(3.0 * flow.band, 0.02 * r_disc));
    }
    SUBCASE("roof c = 2 rescales the rate") {
        const RoofFunction f(LocallyConstantFunction::constant(mu.spec(), 2.0));
        std::vector<double> grid;
        for (int i = 1; i <= 12; ++i) grid.push_back(6.0 / r_disc * i / 12.0);
        const auto flow = flow_escape_rate(mu, f, hole, grid, 0, 1);
        CHECK(flow.exact);
        CHECK(std::abs(flow.rate - r_disc / 2.0) <= std::max(3.0 * flow.band, 0.01 * r_disc));
    }
}

TEST_CASE("flow escape rate by monte carlo sits in the admissible range") {
    auto mu = uniform2();
    const RoofFunction f(
        LocallyConstantFunction(mu.spec(), 1, {{Word{1}, 1.0}, {Word{2}, 1.5}}));
    const Hole hole(mu.spec(), {ones(4)});
    const double r_disc = discrete_escape_rate(mu, hole);
    const double f_mean = mu.integrate(f.base());

    std::vector<double> grid;
    const double t_max = 3.0 * f_mean / r_disc;
    for (int i = 1; i <= 12; ++i) grid.push_back(t_max * i / 12.0);
    const auto flow = flow_escape_rate(mu, f, hole, grid, 300'000, 77);
    CHECK(!flow.exact);
    CHECK(flow.reliable);
    CHECK(flow.rate > 0.0);
    CHECK(flow.rate <= r_disc / f.min_value() + 3.0 * flow.band);

    SUBCASE("deterministic for a fixed seed and any thread count") {
        const auto again = flow_escape_rate(mu, f, hole, grid, 300'000, 77);
        CHECK(again.rate == flow.rate);
        const auto threaded = flow_escape_rate(mu, f, hole, grid, 300'000, 77, 4);
        CHECK(threaded.rate == flow.rate);
    }
}

TEST_CASE("hitting samples cannot have S >= t with tau <= eps t when eps < 1/||f||") {
    auto mu = uniform2();
    const RoofFunction f(
        LocallyConstantFunction(mu.spec(), 1, {{Word{1}, 1.0}, {Word{2}, 1.5}}));
    const Hole hole(mu.spec(), {ones(3)});
    const double eps = 0.9 / f.sup_norm();
    HittingSampler sampler(mu, f, hole, 1e9);
    Rng rng(31);
    for (int i = 0; i < 20'000; ++i) {
        const auto s = sampler.sample(rng);
        REQUIRE(s.hit);
        CHECK(s.roof_sum >= static_cast<double>(s.tau) * f.min_value());
        for (double t : {5.0, 10.0, 20.0})
            CHECK(!(s.roof_sum >= t && static_cast<double>(s.tau) <= eps * t));
    }
}

TEST_CASE("nested condition report") {
    auto mu = uniform2();
    SUBCASE("single cylinders around a fixed point pass everything") {
        const auto seq = HoleSequence::cylinders_around_z(mu.spec(), ones(16), 2, 9, 1);
        const auto rep = nested_check(seq, mu);
        CHECK(rep.cond1_cylinder_lengths);
        CHECK(rep.cond2_nested);
        CHECK(rep.cond3_geometric);
        CHECK(rep.cond4_localized);
        CHECK(rep.cond5_periodic_pullback);
        CHECK(rep.all());
        CHECK(rep.kappa == 1.0);
        for (std::size_t i = 0; i < rep.l_n.size(); ++i) CHECK(rep.l_n[i] == i + 2);
        CHECK(rep.rho_fit == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(rep.c_fit == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(rep.n0_periodic == 2);
    }
    SUBCASE("a stray cylinder breaks nesting") {
        std::map<std::size_t, std::vector<Word>> words;
        words[2] = {Word{1, 1}};
        words[3] = {Word{2, 2, 1}};
        const auto seq = HoleSequence::explicit_holes(mu.spec(), ones(8), 0, words);
        const auto rep = nested_check(seq, mu);
        CHECK(!rep.cond2_nested);
        CHECK(rep.cond5_periodic_pullback);  // vacuous without a period
    }
    SUBCASE("declared period is validated at construction") {
        CHECK_THROWS_AS(HoleSequence::cylinders_around_z(full2(), alternating(16), 2, 6, 1), error);
    }
}

TEST_CASE("theorem-2 style report on the unit roof") {
    auto mu = uniform2();
    const RoofFunction f(LocallyConstantFunction::constant(mu.spec(), 1.0));
    const auto seq = HoleSequence::cylinders_around_z(mu.spec(), ones(16), 3, 8, 1);
    FlowEscapeParams params;
    params.n_samples = 0;  // constant roof: exact route
    params.seed = 3;
    const auto rep = theorem2_report(mu, f, seq, params);

    CHECK(rep.W == 2.0);
    CHECK(rep.gamma == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(rep.lower_bound == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(rep.identity_ok);
    CHECK(rep.nested.all());
    REQUIRE(rep.rows.size() == 6);
    const double f_mean = mu.integrate(f.base());
    for (const auto& row : rep.rows) {
        CHECK(row.nu_slab == row.mu_hole / f_mean);
        CHECK(row.flow_exact);
        const double band_ratio = (row.band_hi - row.r_flow) / row.nu_slab;
        CHECK(row.ratio_flow >= rep.lower_bound - 3.0 * band_ratio);
        // unit roof: the flow ratio tracks the discrete ratio
        CHECK(row.ratio_flow == doctest::Approx(row.ratio_discrete).epsilon(0.05));
    }
    CHECK(rep.rows.back().ratio_discrete == doctest::Approx(0.5).epsilon(0.03));
}
