// thermoflow: equilibrium states on subshifts of finite type, suspension
// semi-flows over them, large-deviation bounds, and escape rates through
// shrinking holes. One subcommand per experiment; every artifact is a CSV
// plus a JSON run manifest, byte-identical across reruns for a fixed
// config and seed.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "thermoflow/config.hpp"
#include "thermoflow/deviations.hpp"
#include "thermoflow/escape.hpp"
#include "thermoflow/io.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

namespace thermoflow {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

}  // namespace thermoflow

namespace {

using namespace thermoflow;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int classify_exit(const error& e) {
    switch (e.code()) {
        case errc::eigen_failure:
        case errc::budget_exceeded:
        case errc::below_threshold:
        case errc::degenerate_seminorm:
        case errc::all_probabilities_zero:
            return 3;
        default:
            return 2;
    }
}

struct RunContext {
    ExperimentConfig cfg;
    std::filesystem::path outdir;
    int threads = 1;
    std::string command;
    std::optional<std::uint64_t> manifest_seed;
};

const std::vector<std::string> kDeviationHeader = {
    "t", "Z_exact", "Z_mc", "mc_stderr", "bound_thm1", "bound_prop32",
    "X", "Y", "T0", "D", "epsilon"};

const std::vector<std::string> kEscapeHeader = {
    "n", "mu_In", "R_discrete", "ratio_discrete", "gamma", "R_flow", "band_lo", "band_hi",
    "nu_slab", "ratio_flow", "W", "lower_bound", "nested_1", "nested_2", "nested_3", "nested_4",
    "nested_5"};

void write_artifact(const RunContext& ctx, const std::string& stem, const CsvWriter& csv) {
    std::filesystem::create_directories(ctx.outdir);
    csv.write(ctx.outdir / (stem + ".csv"));
}

double require_positive_samples(const ExperimentConfig& cfg) {
    if (!cfg.deviations || cfg.deviations->mc_samples == 0 || !cfg.deviations->seed)
        fail(errc::invalid_argument, "this command needs deviations.mc_samples >= 1 and a seed");
    return 0;
}

// ---- pressure / equilibrium -------------------------------------------

void cmd_pressure(RunContext& ctx) {
    const SftSpec spec = build_spec(ctx.cfg);
    const auto phi = build_potential(spec, ctx.cfg);
    const auto mu = equilibrium_measure(spec, phi);
    CsvWriter csv({"lambda", "pressure", "entropy", "phi_mean", "n_states"});
    csv.add_row({mu.lead_eigenvalue(), mu.pressure(), mu.entropy(), mu.integrate(phi),
                 mu.states().size()});
    write_artifact(ctx, ctx.command, csv);
}

void cmd_equilibrium(RunContext& ctx) {
    const SftSpec spec = build_spec(ctx.cfg);
    const auto phi = build_potential(spec, ctx.cfg);
    const auto mu = equilibrium_measure(spec, phi);
    CsvWriter states({"state", "stationary", "h", "v"});
    for (std::size_t i = 0; i < mu.states().size(); ++i)
        states.add_row({format_word(mu.states()[i], spec.alphabet_size()), mu.stationary()[i],
                        mu.right_eigenvector()[i], mu.left_eigenvector()[i]});
    write_artifact(ctx, "equilibrium_states", states);
    CsvWriter kernel({"from", "symbol", "to", "prob"});
    for (std::size_t i = 0; i < mu.states().size(); ++i)
        for (const auto& arc : mu.kernel()[i])
            kernel.add_row({format_word(mu.states()[i], spec.alphabet_size()),
                            static_cast<long long>(arc.symbol),
                            format_word(mu.states()[arc.to], spec.alphabet_size()), arc.prob});
    write_artifact(ctx, "equilibrium_kernel", kernel);
}

// ---- simulate -----------------------------------------------------------

void cmd_simulate(RunContext& ctx) {
    const SftSpec spec = build_spec(ctx.cfg);
    const auto phi = build_potential(spec, ctx.cfg);
    const auto f = build_roof(spec, ctx.cfg);
    require_positive_samples(ctx.cfg);
    const auto& dev = *ctx.cfg.deviations;
    ctx.manifest_seed = dev.seed;
    const auto mu = equilibrium_measure(spec, phi);
    const std::size_t truncation = std::max(mu.state_length(), f.depth()) + 16;
    Rng rng(*dev.seed);
    CsvWriter csv({"index", "word", "level"});
    for (std::size_t i = 0; i < dev.mc_samples; ++i) {
        const FlowPoint p = sample_nu(mu, f, rng, truncation);
        csv.add_row({i, format_word(p.base, spec.alphabet_size()), p.level});
    }
    write_artifact(ctx, ctx.command, csv);
}

// ---- large deviations ---------------------------------------------------

struct DeviationSetup {
    GibbsMarkovMeasure mu;
    RoofFunction f;
    FlowObservable F;
    double D = 1.0;
    bool fitted = false;
};

DeviationSetup make_deviation_setup(const ExperimentConfig& cfg) {
    const SftSpec spec = build_spec(cfg);
    const auto phi = build_potential(spec, cfg);
    auto mu = equilibrium_measure(spec, phi);
    auto f = build_roof(spec, cfg);
    auto F = build_observable_from_config(spec, f, cfg);
    if (!cfg.deviations) fail(errc::invalid_argument, "missing deviations block");
    double D;
    bool fitted = false;
    if (cfg.deviations->D) {
        D = *cfg.deviations->D;
        if (D <= 0.0) fail(errc::invalid_argument, "deviations.D must be positive");
    } else {
        std::vector<LocallyConstantFunction> probes{F.f_tilde(), f.base()};
        const auto fit = fit_D(mu, probes, cfg.deviations->fit.m_grid, cfg.deviations->fit.eps_grid);
        D = fit.D;
        fitted = true;
    }
    return DeviationSetup{std::move(mu), std::move(f), std::move(F), D, fitted};
}

void deviation_rows(RunContext& ctx, bool with_exact, bool with_mc, bool print_verdicts) {
    const auto setup = make_deviation_setup(ctx.cfg);
    const auto& dev = *ctx.cfg.deviations;
    ctx.manifest_seed = dev.seed;
    const LevelMode mode = dev.level_mode == "nu" ? LevelMode::nu : LevelMode::zero;

    const auto constants =
        ld_constants(setup.mu, setup.f, setup.F, dev.epsilon, setup.D);

    CsvWriter csv(kDeviationHeader);
    for (double t : dev.t_grid) {
        double z_exact = kNan, z_mc = kNan, z_se = kNan, b1 = kNan, b2 = kNan;
        if (with_exact) {
            try {
                z_exact = empirical_Z_exact(setup.mu, setup.f, setup.F, dev.epsilon, t, mode).mass_ge;
            } catch (const error& e) {
                if (e.code() != errc::budget_exceeded) throw;
                std::cerr << "note: t=" << t << " beyond the enumeration budget, Z_exact omitted\n";
            }
        }
        if (with_mc && dev.mc_samples > 0) {
            if (!dev.seed) fail(errc::invalid_argument, "deviations.seed required when mc_samples > 0");
            const auto mc = empirical_Z_mc(setup.mu, setup.f, setup.F, dev.epsilon, t,
                                           dev.mc_samples, *dev.seed, mode, ctx.threads);
            z_mc = mc.estimate;
            z_se = mc.std_error;
        }
        if (t >= constants.T0) {
            const auto bound = ld_bound(constants, t);
            b1 = bound.theorem_bound;
            b2 = bound.two_term_bound;
            if (print_verdicts && with_exact && !std::isnan(z_exact)) {
                const bool ok = z_exact <= b1 && z_exact <= b2;
                std::cout << "t=" << format_double(t) << " Z_exact=" << format_double(z_exact)
                          << " bound_thm1=" << format_double(b1)
                          << " bound_prop32=" << format_double(b2) << (ok ? " OK" : " VIOLATED")
                          << "\n";
            }
        }
        csv.add_row({t, z_exact, z_mc, z_se, b1, b2, constants.X, constants.Y, constants.T0,
                     setup.D, dev.epsilon});
    }
    write_artifact(ctx, ctx.command, csv);
}

// ---- escape -------------------------------------------------------------

void escape_rows(RunContext& ctx, bool with_flow, bool print_verdicts) {
    const SftSpec spec = build_spec(ctx.cfg);
    const auto phi = build_potential(spec, ctx.cfg);
    const auto mu = equilibrium_measure(spec, phi);
    const auto seq = build_holes(spec, ctx.cfg);
    const auto& esc = *ctx.cfg.escape;
    ctx.manifest_seed = esc.seed;

    const auto nested = nested_check(seq, mu);
    const double gamma = gamma_z(mu, seq.target_z, seq.period);

    std::optional<RoofFunction> f;
    double f_mean = kNan, W = kNan, lower = kNan;
    if (with_flow) {
        f = build_roof(spec, ctx.cfg);
        if (f->min_value() == 1.0)
            std::cerr << "note: roof attains 1; the flow lower bound assumes min f > 1\n";
        f_mean = mu.integrate(f->base());
        W = 1.0 + f->sup_norm() / f_mean;
        lower = gamma / W;
    }

    CsvWriter csv(kEscapeHeader);
    std::size_t hole_index = 0;
    for (const auto& [n, hole] : seq.holes) {
        const double mu_hole = hole.measure(mu);
        const double r_disc = discrete_escape_rate(mu, hole);
        double r_flow = kNan, lo = kNan, hi = kNan, nu_slab = kNan, ratio_flow = kNan;
        if (with_flow) {
            std::vector<double> grid = esc.t_grid;
            if (grid.empty()) {
                const double t_max = esc.halflives / (r_disc / f_mean);
                for (std::size_t i = 1; i <= esc.grid_points; ++i)
                    grid.push_back(t_max * static_cast<double>(i) /
                                   static_cast<double>(esc.grid_points));
            }
            if (!f->is_constant() && esc.mc_samples == 0)
                fail(errc::invalid_argument, "escape.mc_samples >= 1 needed for a nonconstant roof");
            if (!f->is_constant() && !esc.seed)
                fail(errc::invalid_argument, "escape.seed required when mc_samples > 0");
            const auto flow = flow_escape_rate(mu, *f, hole, grid, esc.mc_samples,
                                               esc.seed ? *esc.seed + hole_index : 0, ctx.threads);
            r_flow = flow.rate;
            lo = flow.rate - flow.band;
            hi = flow.rate + flow.band;
            nu_slab = mu_hole / f_mean;
            ratio_flow = flow.rate / nu_slab;
            if (print_verdicts) {
                const double band_ratio = flow.band / nu_slab;
                const bool ok = ratio_flow >= lower - 3.0 * band_ratio;
                std::cout << "n=" << n << " ratio_flow=" << format_double(ratio_flow)
                          << " lower_bound=" << format_double(lower)
                          << " band=" << format_double(band_ratio) << (ok ? " OK" : " VIOLATED")
                          << (flow.reliable ? "" : " (band unreliable)") << "\n";
            }
        }
        csv.add_row({n, mu_hole, r_disc, r_disc / mu_hole, gamma, r_flow, lo, hi, nu_slab,
                     ratio_flow, W, lower, nested.cond1_cylinder_lengths, nested.cond2_nested,
                     nested.cond3_geometric, nested.cond4_localized,
                     nested.cond5_periodic_pullback});
        ++hole_index;
    }
    write_artifact(ctx, ctx.command, csv);
}

void cmd_nested_check(RunContext& ctx) {
    const SftSpec spec = build_spec(ctx.cfg);
    const auto phi = build_potential(spec, ctx.cfg);
    const auto mu = equilibrium_measure(spec, phi);
    const auto seq = build_holes(spec, ctx.cfg);
    const auto nested = nested_check(seq, mu);

    CsvWriter csv({"n", "mu_In", "l_n", "c_fit", "rho_fit", "kappa", "nested_1", "nested_2",
                   "nested_3", "nested_4", "nested_5"});
    std::size_t i = 0;
    for (const auto& [n, hole] : seq.holes) {
        csv.add_row({n, nested.hole_measures[i], nested.l_n[i], nested.c_fit, nested.rho_fit,
                     nested.kappa, nested.cond1_cylinder_lengths, nested.cond2_nested,
                     nested.cond3_geometric, nested.cond4_localized,
                     nested.cond5_periodic_pullback});
        ++i;
    }
    write_artifact(ctx, ctx.command, csv);
    std::cout << "nested condition: " << (nested.all() ? "all pass" : "some fail")
              << " (c=" << format_double(nested.c_fit) << ", rho=" << format_double(nested.rho_fit)
              << ", kappa=" << format_double(nested.kappa);
    if (nested.n0_periodic) std::cout << ", n0=" << *nested.n0_periodic;
    std::cout << ")\n";
}

int run_command(const std::string& command, const std::string& config_path,
                const std::optional<std::string>& out_override, int threads) {
    const auto started = std::chrono::steady_clock::now();

    const auto diagnostics = validate_config(config_path);
    if (!diagnostics.empty()) {
        for (const auto& d : diagnostics) std::cerr << "config: " << d << "\n";
        return 2;
    }
    if (command == "validate") {
        std::cout << "config ok\n";
        return 0;
    }

    RunContext ctx;
    try {
        ctx.cfg = load_config(config_path);
        ctx.outdir = out_override ? *out_override : ctx.cfg.output.directory;
        ctx.threads = threads;
        ctx.command = command;

        if (command == "pressure")
            cmd_pressure(ctx);
        else if (command == "equilibrium")
            cmd_equilibrium(ctx);
        else if (command == "simulate")
            cmd_simulate(ctx);
        else if (command == "ld-bound")
            deviation_rows(ctx, false, false, false);
        else if (command == "ld-empirical")
            deviation_rows(ctx, true, true, false);
        else if (command == "theorem1")
            deviation_rows(ctx, true, true, true);
        else if (command == "escape-discrete")
            escape_rows(ctx, false, false);
        else if (command == "escape-flow")
            escape_rows(ctx, true, false);
        else if (command == "theorem2")
            escape_rows(ctx, true, true);
        else if (command == "nested-check")
            cmd_nested_check(ctx);
        else
            fail(errc::invalid_argument, "unknown command '" + command + "'");

        RunManifest manifest;
        manifest.config_sha256 = sha256_hex(ctx.cfg.raw_text);
        manifest.command = command;
        manifest.seed = ctx.manifest_seed;
        manifest.threads = threads;
        manifest.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
        std::filesystem::create_directories(ctx.outdir);
        manifest.write(ctx.outdir / (command + ".manifest.json"));
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"equilibrium states, suspension flows, large deviations, escape rates"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {
        "pressure",  "equilibrium",     "simulate",    "ld-bound", "ld-empirical", "theorem1",
        "escape-discrete", "escape-flow", "nested-check", "theorem2", "validate"};

    std::string config_path;
    std::optional<std::string> outdir;
    int threads = 0;

    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", outdir, "output directory (overrides output.directory)");
        sub->add_option("--threads", threads, "worker threads (default: THERMOFLOW_THREADS or 1)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads <= 0) {
        if (const char* env = std::getenv("THERMOFLOW_THREADS")) threads = std::atoi(env);
        if (threads <= 0) threads = 1;
    }

    return run_command(app.get_subcommands().front()->get_name(), config_path, outdir, threads);
}
