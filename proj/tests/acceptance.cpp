// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Criteria 1-7 drive the library directly; criterion 8 shells out to the
// CLI and byte-compares its artifacts.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "oracles.hpp"
#include "thermoflow/config.hpp"
#include "thermoflow/deviations.hpp"
#include "thermoflow/escape.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

using namespace thermoflow;

namespace {

struct Options {
    std::string cli_path;
    std::filesystem::path workdir = "acceptance_work";
};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << (detail.str().empty() ? "" : "; ") << what;
        }
    }
};

SftSpec full_shift(int a, double theta = 0.5) {
    return validate_sft(std::vector<std::vector<int>>(a, std::vector<int>(a, 1)), theta);
}

SftSpec golden_mean(double theta = 0.5) { return validate_sft({{1, 1}, {1, 0}}, theta); }

Word repeat_block(const std::vector<int>& block, std::size_t n) {
    Word w;
    while (w.size() < n) w.syms.push_back(block[w.size() % block.size()]);
    return w;
}

// ---- criterion 1: pressure exactness -----------------------------------

Outcome criterion1(const Options&) {
    Outcome out;
    for (int a : {2, 3, 4}) {
        const auto spec = full_shift(a);
        const auto mu = equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
        out.require(std::abs(mu.pressure() - std::log(static_cast<double>(a))) <= 1e-12,
                    "full " + std::to_string(a) + "-shift pressure off log a");
    }
    const auto gm = golden_mean();
    const auto mu = equilibrium_measure(gm, LocallyConstantFunction::constant(gm, 0.0));
    out.require(std::abs(mu.pressure() - std::log((1.0 + std::sqrt(5.0)) / 2.0)) <= 1e-10,
                "golden-mean pressure off log golden ratio");
    return out;
}

// ---- criterion 2: Gibbs oracle equivalence ------------------------------

Outcome criterion2(const Options&) {
    Outcome out;
    Rng rng(2026);
    for (const auto& spec : {full_shift(2), golden_mean()}) {
        for (std::size_t depth : {1, 2, 3}) {
            std::vector<std::pair<Word, double>> entries;
            for (const Word& w : enumerate_words(spec, depth))
                entries.emplace_back(w, rng.next_double() - 0.5);
            const LocallyConstantFunction phi(spec, depth, entries);
            const auto mu = equilibrium_measure(spec, phi);
            for (std::size_t n : {2, 5, 8}) {
                const auto words = enumerate_words(spec, n);
                const std::size_t stride = std::max<std::size_t>(1, words.size() / 8);
                for (std::size_t i = 0; i < words.size(); i += stride) {
                    const double exact = mu.prefix_measure(words[i]);
                    const double oracle = oracles::gibbs_ratio(spec, phi, words[i], 16);
                    if (std::abs(exact - oracle) / oracle > 0.01) {
                        out.require(false, "word " + format_word(words[i], spec.alphabet_size()) +
                                               " off by " +
                                               std::to_string(std::abs(exact - oracle) / oracle));
                    }
                }
            }
        }
    }
    return out;
}

// ---- criterion 3: discrete escape-rate limit ----------------------------

Outcome criterion3(const Options&) {
    Outcome out;
    const auto spec = full_shift(2);
    const auto mu = equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
    struct Case {
        std::vector<int> block;
        int period;
        double limit;
    };
    for (const auto& c : {Case{{1}, 1, 0.5}, Case{{1, 2}, 2, 0.75}}) {
        const double gamma = gamma_z(mu, repeat_block(c.block, 24), c.period);
        out.require(std::abs(gamma - c.limit) <= 1e-12, "gamma(z) mismatch");
        double final_ratio = 0.0;
        for (std::size_t n = 2; n <= 12; ++n) {
            const Hole hole(spec, {repeat_block(c.block, n)});
            final_ratio = discrete_escape_rate(mu, hole) / hole.measure(mu);
        }
        out.require(std::abs(final_ratio - c.limit) <= 0.02 * c.limit,
                    "ratio at n=12 is " + std::to_string(final_ratio) + ", limit " +
                        std::to_string(c.limit));
    }
    return out;
}

// ---- criterion 4: the deviation inequality suite -------------------------

Outcome criterion4(const Options&) {
    Outcome out;
    const auto spec = full_shift(2);
    const auto mu = equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
    const RoofFunction f(LocallyConstantFunction(spec, 1, {{Word{1}, 1.0}, {Word{2}, 1.25}}));
    const auto F = build_observable(spec, f, 1, {{Word{1}, Poly({0.0})}, {Word{2}, Poly({1.0})}});

    const auto fit = fit_D(mu, {F.f_tilde(), f.base()}, {4, 6, 8, 10, 12}, {0.05, 0.1, 0.2, 0.4});
    const double eps = 0.35;
    const auto constants = ld_constants(mu, f, F, eps, fit.D);
    out.require(constants.T0 < 17.0, "threshold T0 unexpectedly large");

    bool any = false;
    for (double t : {16.5, 17.0, 18.0, 19.0, 20.0, 21.0, 22.0}) {
        if (t < constants.T0) continue;
        any = true;
        const auto z = empirical_Z_exact(mu, f, F, eps, t);
        const auto b = ld_bound(constants, t);
        out.require(z.mass_ge <= b.theorem_bound,
                    "Z(t) above the collapsed bound at t=" + std::to_string(t));
        out.require(z.mass_ge <= b.two_term_bound,
                    "Z(t) above the two-term bound at t=" + std::to_string(t));
    }
    out.require(any, "no feasible t at or above T0");
    return out;
}

// ---- criterion 5: constant-collapse identities ---------------------------

Outcome criterion5(const Options&) {
    Outcome out;
    {
        const auto c = ld_constants_from_norms(2.0, 1.0, 1.0, 1.0, 0.1, 1.0 / 16.0);
        out.require(std::abs(c.X - 3.125e-4) <= 1e-12, "X off hand arithmetic");
        out.require(std::abs(c.Y - (std::log(8.0) + 0.00125)) <= 1e-12, "Y off hand arithmetic");
        out.require(std::abs(c.T0 - 120.0) <= 1e-12, "T0 off hand arithmetic");
    }
    const auto spec = full_shift(2);
    const auto mu = equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
    const auto bern = equilibrium_measure(
        spec, LocallyConstantFunction(spec, 1, {{Word{1}, std::log(0.3)}, {Word{2}, std::log(0.7)}}));
    for (double c : {1.0, 2.0}) {
        for (const auto* m : {&mu, &bern}) {
            const RoofFunction f(LocallyConstantFunction::constant(spec, c));
            const double W = 1.0 + f.sup_norm() / m->integrate(f.base());
            out.require(W == 2.0, "W not exactly 2 for constant roof " + std::to_string(c));
        }
    }
    {
        const RoofFunction f(LocallyConstantFunction::constant(spec, 1.5));
        const double W = 1.0 + f.sup_norm() / mu.integrate(f.base());
        out.require(std::abs(W - 2.0) <= 1e-14, "W off 2 beyond rounding for roof 1.5");
    }
    {
        const RoofFunction f(LocallyConstantFunction(spec, 1, {{Word{1}, 1.0}, {Word{2}, 1.5}}));
        const double f_mean = mu.integrate(f.base());
        const auto seq = HoleSequence::cylinders_around_z(spec, repeat_block({1}, 16), 3, 6, 1);
        FlowEscapeParams params;
        params.n_samples = 20'000;
        params.seed = 5;
        const auto rep = theorem2_report(mu, f, seq, params);
        for (const auto& row : rep.rows) {
            KahanSum direct;
            for (const Word& w : seq.holes.at(row.n).words()) direct.add(mu.prefix_measure(w));
            out.require(std::abs(row.nu_slab - direct.value() / f_mean) <= 1e-12,
                        "nu slab identity fails at n=" + std::to_string(row.n));
        }
        out.require(rep.identity_ok, "gamma/W identity violated");
    }
    return out;
}

// ---- criterion 6: the flow lower bound, statistically --------------------

Outcome criterion6(const Options&) {
    Outcome out;
    const auto spec = full_shift(2);
    const auto mu = equilibrium_measure(spec, LocallyConstantFunction::constant(spec, 0.0));
    const RoofFunction f(LocallyConstantFunction(spec, 1, {{Word{1}, 1.0}, {Word{2}, 1.5}}));
    const auto seq = HoleSequence::cylinders_around_z(spec, repeat_block({1}, 16), 3, 8, 1);
    FlowEscapeParams params;
    params.n_samples = 1'000'000;
    params.seed = 20260810;
    const auto rep = theorem2_report(mu, f, seq, params);
    out.require(rep.nested.all(), "nested condition failed");
    for (const auto& row : rep.rows) {
        out.require(row.flow_reliable, "band unreliable at n=" + std::to_string(row.n));
        const double band_ratio = (row.band_hi - row.r_flow) / row.nu_slab;
        out.require(row.ratio_flow >= rep.lower_bound - 3.0 * band_ratio,
                    "flow ratio below the bound at n=" + std::to_string(row.n));
    }
    return out;
}

// ---- criterion 7: flow correctness properties ----------------------------

Outcome criterion7(const Options&) {
    Outcome out;
    const auto spec = golden_mean();
    Rng rng(77);
    std::vector<std::pair<Word, double>> roof_entries;
    for (const Word& w : enumerate_words(spec, 2))
        roof_entries.emplace_back(w, 1.0 + 1.5 * rng.next_double());
    const RoofFunction f(LocallyConstantFunction(spec, 2, roof_entries));

    auto random_word = [&](std::size_t n) {
        Word w{1 + static_cast<int>(rng.next_u64() % 2)};
        while (w.size() < n) {
            const auto& succ = spec.successors(w.syms.back());
            w.syms.push_back(succ[static_cast<std::size_t>(rng.next_u64() % succ.size())]);
        }
        return w;
    };

    std::size_t semigroup_failures = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        Word x = random_word(48);
        const double roof = f.value(x);
        const FlowPoint p{std::move(x), rng.next_double() * roof};
        if (!semigroup_check(f, p, 9.0 * rng.next_double(), 9.0 * rng.next_double(), 1e-9))
            ++semigroup_failures;
    }
    out.require(semigroup_failures == 0,
                std::to_string(semigroup_failures) + " semigroup failures in 1000 cases");

    std::vector<std::pair<Word, Poly>> obs;
    for (const Word& w : enumerate_words(spec, 2))
        obs.emplace_back(w, Poly({rng.next_double() - 0.5, rng.next_double(), 0.7 * rng.next_double()}));
    const auto F = build_observable(spec, f, 2, obs);
    std::size_t quad_failures = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Word x = random_word(24);
        const double roof = f.value(x);
        const FlowPoint p{std::move(x), rng.next_double() * roof};
        const double t = 0.5 + 4.0 * rng.next_double();
        if (std::abs(flow_birkhoff(F, f, p, t) - oracles::flow_quadrature(F, f, p, t, 1e-4)) > 1e-6)
            ++quad_failures;
    }
    out.require(quad_failures == 0,
                std::to_string(quad_failures) + " quadrature mismatches in 100 cases");

    // seminorm bound for every observable the suite configures
    const auto full = full_shift(2);
    const RoofFunction bench_roof(
        LocallyConstantFunction(full, 1, {{Word{1}, 1.0}, {Word{2}, 1.25}}));
    std::vector<FlowObservable> configured;
    configured.push_back(
        build_observable(full, bench_roof, 1, {{Word{1}, Poly({0.0})}, {Word{2}, Poly({1.0})}}));
    configured.push_back(F);
    for (int rep = 0; rep < 8; ++rep) {
        std::vector<std::pair<Word, Poly>> table;
        for (const Word& w : enumerate_words(spec, 2))
            table.emplace_back(w, Poly({rng.next_double() - 0.5, rng.next_double() - 0.5,
                                        rng.next_double(), 0.3 * rng.next_double()}));
        configured.push_back(build_observable(spec, f, 2, table));
    }
    for (std::size_t i = 0; i < configured.size(); ++i) {
        const auto& o = configured[i];
        const double lhs = o.f_tilde().seminorm();
        const double rhs = o.roof().seminorm() * o.sup_norm() + o.condition_constant();
        out.require(lhs <= rhs + 1e-12, "seminorm bound fails on observable " + std::to_string(i));
    }
    return out;
}

// ---- criterion 8: CLI determinism ----------------------------------------

int run_cli(const std::string& cli, const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = cli + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion8(const Options& opt) {
    Outcome out;
    if (opt.cli_path.empty()) {
        out.require(false, "no --cli path given");
        return out;
    }
    namespace fs = std::filesystem;
    fs::create_directories(opt.workdir);

    const std::string sft = R"("sft": {"alphabet_size": 2, "transition": [[1,1],[1,1]], "theta": 0.5})";
    const std::string phi = R"("potential": {"depth": 1, "table": {"1": 0.0, "2": 0.0}})";
    const std::string roof = R"("roof": {"depth": 1, "table": {"1": 1.0, "2": 1.25}})";
    const std::string obs =
        R"("observable": {"depth": 1, "degree": 0, "coefficients": {"1": [0.0], "2": [1.0]}})";
    const std::string dev =
        R"("deviations": {"epsilon": 0.35, "D": "fit", "t_grid": [17.0, 18.0], "mc_samples": 20000, "seed": 7})";
    const std::string esc =
        R"("escape": {"hole": {"mode": "cylinders_around_z", "z": "1111111111", "n_range": [3, 5]}, "period": 1, "mc_samples": 50000, "seed": 11})";
    const std::string roof_flow = R"("roof": {"depth": 1, "table": {"1": 1.0, "2": 1.5}})";

    struct Job {
        std::string command;
        std::string config;
        std::vector<std::string> artifacts;
    };
    const std::vector<Job> jobs = {
        {"pressure", "{" + sft + "," + phi + "}", {"pressure.csv"}},
        {"equilibrium", "{" + sft + "," + phi + "}", {"equilibrium_states.csv", "equilibrium_kernel.csv"}},
        {"simulate", "{" + sft + "," + phi + "," + roof + "," + dev + "}", {"simulate.csv"}},
        {"ld-bound", "{" + sft + "," + phi + "," + roof + "," + obs + "," + dev + "}", {"ld-bound.csv"}},
        {"ld-empirical", "{" + sft + "," + phi + "," + roof + "," + obs + "," + dev + "}",
         {"ld-empirical.csv"}},
        {"theorem1", "{" + sft + "," + phi + "," + roof + "," + obs + "," + dev + "}", {"theorem1.csv"}},
        {"escape-discrete", "{" + sft + "," + phi + "," + esc + "}", {"escape-discrete.csv"}},
        {"nested-check", "{" + sft + "," + phi + "," + esc + "}", {"nested-check.csv"}},
        {"escape-flow", "{" + sft + "," + phi + "," + roof_flow + "," + esc + "}", {"escape-flow.csv"}},
        {"theorem2", "{" + sft + "," + phi + "," + roof_flow + "," + esc + "}", {"theorem2.csv"}},
    };

    for (const auto& job : jobs) {
        const fs::path cfg = opt.workdir / (job.command + ".json");
        std::ofstream(cfg) << job.config;
        const fs::path out_a = opt.workdir / (job.command + "_a");
        const fs::path out_b = opt.workdir / (job.command + "_b");
        fs::remove_all(out_a);
        fs::remove_all(out_b);
        const int rc_a = run_cli(opt.cli_path,
                                 job.command + " --config " + cfg.string() + " --out " + out_a.string(),
                                 opt.workdir / (job.command + "_a.log"));
        const int rc_b = run_cli(opt.cli_path,
                                 job.command + " --config " + cfg.string() + " --out " + out_b.string(),
                                 opt.workdir / (job.command + "_b.log"));
        out.require(rc_a == 0 && rc_b == 0, job.command + " exited nonzero");
        for (const auto& artifact : job.artifacts) {
            const std::string a = slurp(out_a / artifact);
            const std::string b = slurp(out_b / artifact);
            out.require(!a.empty() && a == b, job.command + "/" + artifact + " not byte-identical");
        }
    }

    // config errors exit with status 2
    const fs::path bad = opt.workdir / "missing_roof.json";
    std::ofstream(bad) << "{" + sft + "," + phi + "," + esc + "}";
    const int rc = run_cli(opt.cli_path, "theorem2 --config " + bad.string(),
                           opt.workdir / "missing_roof.log");
    out.require(rc == 2, "missing roof block should exit 2, got " + std::to_string(rc));

    // numerical degeneracies exit with status 3: a constant roof has no
    // Lipschitz seminorm, so the deviation constants cannot be formed
    const fs::path degenerate = opt.workdir / "degenerate_roof.json";
    std::ofstream(degenerate) << "{" + sft + "," + phi + "," +
                                     R"("roof": {"depth": 1, "table": {"1": 1.0, "2": 1.0}})" + "," +
                                     obs + "," + dev + "}";
    const int rc3 = run_cli(opt.cli_path, "ld-bound --config " + degenerate.string(),
                            opt.workdir / "degenerate_roof.log");
    out.require(rc3 == 3, "degenerate roof should exit 3, got " + std::to_string(rc3));
    return out;
}

struct Criterion {
    int index;
    const char* label;
    double time_limit_s;
    std::function<Outcome(const Options&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc)
            only = std::atoi(argv[++i]);
        else if (arg == "--cli" && i + 1 < argc)
            opt.cli_path = argv[++i];
        else if (arg == "--workdir" && i + 1 < argc)
            opt.workdir = argv[++i];
    }

    const std::vector<Criterion> criteria = {
        {1, "pressure exactness", 1.0, criterion1},
        {2, "Gibbs oracle equivalence", 30.0, criterion2},
        {3, "discrete escape-rate limit", 60.0, criterion3},
        {4, "deviation inequality suite", 300.0, criterion4},
        {5, "constant-collapse identities", 60.0, criterion5},
        {6, "flow lower bound statistical test", 600.0, criterion6},
        {7, "flow correctness properties", 120.0, criterion7},
        {8, "CLI determinism", 300.0, criterion8},
    };

    bool all_pass = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.index != only) continue;
        const auto started = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.fn(opt);
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail << "exception: " << e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (seconds > c.time_limit_s) {
            outcome.pass = false;
            outcome.detail << (outcome.detail.str().empty() ? "" : "; ") << "over the "
                           << c.time_limit_s << " s limit";
        }
        all_pass &= outcome.pass;
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.index << ": "
                  << c.label << " (" << seconds << " s)";
        if (!outcome.detail.str().empty()) std::cout << " -- " << outcome.detail.str();
        std::cout << "\n";
    }
    return all_pass ? 0 : 1;
}
