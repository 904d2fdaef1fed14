#pragma once

// Experiment configuration: a single JSON document holding the SFT, the
// potential/roof/observable tables, and the per-experiment blocks. Parsing
// is strict; validate() reports every structural defect as a diagnostic
// without running anything.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermoflow/common.hpp"
#include "thermoflow/escape.hpp"
#include "thermoflow/measure.hpp"
#include "thermoflow/polynomial.hpp"
#include "thermoflow/sft.hpp"
#include "thermoflow/suspension.hpp"

namespace thermoflow {

struct SftBlock {
    int alphabet_size = 0;
    std::vector<std::vector<int>> transition;
    double theta = 0.0;
};

struct TableBlock {
    std::size_t depth = 0;
    std::map<std::string, double> table;
};

struct ObservableBlock {
    std::size_t depth = 0;
    int degree = 0;
    std::map<std::string, std::vector<double>> coefficients;
};

struct FitGrid {
    std::vector<std::size_t> m_grid = {4, 6, 8, 10, 12};
    std::vector<double> eps_grid = {0.05, 0.1, 0.2, 0.4};
};

struct DeviationsBlock {
    double epsilon = 0.0;
    std::optional<double> D;  // empty = fit
    FitGrid fit;
    std::vector<double> t_grid;
    std::size_t mc_samples = 0;
    std::optional<std::uint64_t> seed;  // mandatory for stochastic commands
    std::string level_mode = "zero";
};

struct HoleBlock {
    std::string mode;  // "cylinders_around_z" | "explicit"
    std::string z;
    std::size_t n_from = 0, n_to = 0;
    std::map<std::size_t, std::vector<std::string>> words;
};

struct EscapeBlock {
    HoleBlock hole;
    int period = 0;
    std::vector<double> t_grid;  // empty = auto-scale
    std::size_t grid_points = 12;
    double halflives = 3.0;
    std::size_t mc_samples = 0;
    std::optional<std::uint64_t> seed;  // mandatory for stochastic commands
};

struct OutputBlock {
    std::string directory = "out";
    std::vector<std::string> formats = {"csv"};
};

struct ExperimentConfig {
    std::optional<SftBlock> sft;
    std::optional<TableBlock> potential;
    std::optional<TableBlock> roof;
    std::optional<ObservableBlock> observable;
    std::optional<DeviationsBlock> deviations;
    std::optional<EscapeBlock> escape;
    OutputBlock output;
    std::string raw_text;  // the bytes that were parsed, for hashing
};

namespace config_detail {

using nlohmann::json;

inline void expect(bool ok, const std::string& what) {
    if (!ok) fail(errc::invalid_argument, what);
}

inline ExperimentConfig parse_json(const json& j, std::string raw) {
    ExperimentConfig cfg;
    cfg.raw_text = std::move(raw);
    if (j.contains("sft")) {
        const auto& b = j.at("sft");
        SftBlock s;
        s.alphabet_size = b.at("alphabet_size").get<int>();
        s.transition = b.at("transition").get<std::vector<std::vector<int>>>();
        s.theta = b.at("theta").get<double>();
        cfg.sft = std::move(s);
    }
    auto parse_table = [](const json& b) {
        TableBlock t;
        t.depth = b.at("depth").get<std::size_t>();
        for (const auto& [key, value] : b.at("table").items()) t.table[key] = value.get<double>();
        return t;
    };
    if (j.contains("potential")) cfg.potential = parse_table(j.at("potential"));
    if (j.contains("roof")) cfg.roof = parse_table(j.at("roof"));
    if (j.contains("observable")) {
        const auto& b = j.at("observable");
        ObservableBlock o;
        o.depth = b.at("depth").get<std::size_t>();
        o.degree = b.at("degree").get<int>();
        for (const auto& [key, value] : b.at("coefficients").items())
            o.coefficients[key] = value.get<std::vector<double>>();
        cfg.observable = std::move(o);
    }
    if (j.contains("deviations")) {
        const auto& b = j.at("deviations");
        DeviationsBlock d;
        d.epsilon = b.at("epsilon").get<double>();
        const auto& dj = b.at("D");
        if (dj.is_string()) {
            expect(dj.get<std::string>() == "fit", "deviations.D must be a number or \"fit\"");
        } else {
            d.D = dj.get<double>();
        }
        if (b.contains("fit")) {
            if (b.at("fit").contains("m_grid"))
                d.fit.m_grid = b.at("fit").at("m_grid").get<std::vector<std::size_t>>();
            if (b.at("fit").contains("eps_grid"))
                d.fit.eps_grid = b.at("fit").at("eps_grid").get<std::vector<double>>();
        }
        d.t_grid = b.at("t_grid").get<std::vector<double>>();
        if (b.contains("mc_samples")) d.mc_samples = b.at("mc_samples").get<std::size_t>();
        if (b.contains("seed")) d.seed = b.at("seed").get<std::uint64_t>();
        if (b.contains("level_mode")) d.level_mode = b.at("level_mode").get<std::string>();
        expect(d.level_mode == "zero" || d.level_mode == "nu",
               "deviations.level_mode must be \"zero\" or \"nu\"");
        cfg.deviations = std::move(d);
    }
    if (j.contains("escape")) {
        const auto& b = j.at("escape");
        EscapeBlock e;
        const auto& h = b.at("hole");
        e.hole.mode = h.at("mode").get<std::string>();
        if (e.hole.mode == "cylinders_around_z") {
            e.hole.z = h.at("z").get<std::string>();
            const auto range = h.at("n_range").get<std::vector<std::size_t>>();
            expect(range.size() == 2, "escape.hole.n_range must be [n_from, n_to]");
            e.hole.n_from = range[0];
            e.hole.n_to = range[1];
        } else if (e.hole.mode == "explicit") {
            e.hole.z = h.at("z").get<std::string>();
            for (const auto& [key, value] : h.at("words").items())
                e.hole.words[static_cast<std::size_t>(std::stoul(key))] =
                    value.get<std::vector<std::string>>();
        } else {
            fail(errc::invalid_argument, "escape.hole.mode must be cylinders_around_z or explicit");
        }
        e.period = b.at("period").get<int>();
        if (b.contains("t_grid")) e.t_grid = b.at("t_grid").get<std::vector<double>>();
        if (b.contains("grid_points")) e.grid_points = b.at("grid_points").get<std::size_t>();
        if (b.contains("halflives")) e.halflives = b.at("halflives").get<double>();
        if (b.contains("mc_samples")) e.mc_samples = b.at("mc_samples").get<std::size_t>();
        if (b.contains("seed")) e.seed = b.at("seed").get<std::uint64_t>();
        cfg.escape = std::move(e);
    }
    if (j.contains("output")) {
        const auto& b = j.at("output");
        if (b.contains("directory")) cfg.output.directory = b.at("directory").get<std::string>();
        if (b.contains("formats")) cfg.output.formats = b.at("formats").get<std::vector<std::string>>();
    }
    return cfg;
}

}  // namespace config_detail

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::invalid_argument, "cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(errc::invalid_argument, std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return config_detail::parse_json(j, text);
    } catch (const error&) {
        throw;
    } catch (const std::exception& e) {
        fail(errc::invalid_argument, std::string("config structure: ") + e.what());
    }
}

// Builders from config blocks to domain objects. Each throws on defects;
// validate() below collects the same defects as diagnostics.

inline SftSpec build_spec(const ExperimentConfig& cfg) {
    if (!cfg.sft) fail(errc::invalid_argument, "missing sft block");
    if (static_cast<std::size_t>(cfg.sft->alphabet_size) != cfg.sft->transition.size())
        fail(errc::invalid_argument, "sft.alphabet_size disagrees with the transition matrix");
    return validate_sft(cfg.sft->transition, cfg.sft->theta);
}

inline LocallyConstantFunction build_table_function(const SftSpec& spec, const TableBlock& block,
                                                    const std::string& name) {
    std::vector<std::pair<Word, double>> entries;
    for (const auto& [key, value] : block.table) {
        Word w = parse_word(key, spec.alphabet_size());
        if (w.size() != block.depth)
            fail(errc::missing_word, name + " table key '" + key + "' has wrong length");
        entries.emplace_back(std::move(w), value);
    }
    return LocallyConstantFunction(spec, block.depth, entries);
}

inline LocallyConstantFunction build_potential(const SftSpec& spec, const ExperimentConfig& cfg) {
    if (!cfg.potential) fail(errc::invalid_argument, "missing potential block");
    return build_table_function(spec, *cfg.potential, "potential");
}

inline RoofFunction build_roof(const SftSpec& spec, const ExperimentConfig& cfg) {
    if (!cfg.roof) fail(errc::invalid_argument, "missing roof block");
    return RoofFunction(build_table_function(spec, *cfg.roof, "roof"));
}

inline FlowObservable build_observable_from_config(const SftSpec& spec, const RoofFunction& f,
                                                   const ExperimentConfig& cfg) {
    if (!cfg.observable) fail(errc::invalid_argument, "missing observable block");
    std::vector<std::pair<Word, Poly>> entries;
    for (const auto& [key, coeffs] : cfg.observable->coefficients) {
        Word w = parse_word(key, spec.alphabet_size());
        if (static_cast<int>(coeffs.size()) != cfg.observable->degree + 1)
            fail(errc::invalid_argument, "observable '" + key + "' needs degree+1 coefficients");
        entries.emplace_back(std::move(w), Poly(coeffs));
    }
    return FlowObservable(spec, f, cfg.observable->depth, entries);
}

inline HoleSequence build_holes(const SftSpec& spec, const ExperimentConfig& cfg) {
    if (!cfg.escape) fail(errc::invalid_argument, "missing escape block");
    const auto& h = cfg.escape->hole;
    const Word z = parse_word(h.z, spec.alphabet_size());
    if (h.mode == "cylinders_around_z")
        return HoleSequence::cylinders_around_z(spec, z, h.n_from, h.n_to, cfg.escape->period);
    std::map<std::size_t, std::vector<Word>> words;
    for (const auto& [n, list] : h.words)
        for (const auto& text : list) words[n].push_back(parse_word(text, spec.alphabet_size()));
    return HoleSequence::explicit_holes(spec, z, cfg.escape->period, words);
}

// Structural and invariant validation of every present block; returns the
// defect list instead of throwing.
inline std::vector<std::string> validate_config(const std::string& path) {
    std::vector<std::string> diags;
    ExperimentConfig cfg;
    try {
        cfg = load_config(path);
    } catch (const std::exception& e) {
        diags.push_back(e.what());
        return diags;
    }
    std::optional<SftSpec> spec;
    try {
        spec = build_spec(cfg);
    } catch (const std::exception& e) {
        if (cfg.sft)
            diags.push_back(e.what());
        else
            diags.push_back("missing sft block");
    }
    if (!spec) return diags;

    auto check_table = [&](const std::optional<TableBlock>& block, const std::string& name) {
        if (!block) return;
        try {
            build_table_function(*spec, *block, name);
        } catch (const std::exception& e) {
            diags.push_back(e.what());
        }
        // name missing words explicitly
        for (const Word& w : enumerate_words(*spec, block->depth)) {
            const std::string key = format_word(w, spec->alphabet_size());
            if (!block->table.count(key))
                diags.push_back(name + " table missing word \"" + key + "\"");
        }
    };
    check_table(cfg.potential, "potential");
    check_table(cfg.roof, "roof");
    if (cfg.roof) {
        double min_v = std::numeric_limits<double>::infinity();
        for (const auto& [k, v] : cfg.roof->table) min_v = std::min(min_v, v);
        if (min_v < 1.0) diags.push_back("roof below 1 (min value " + std::to_string(min_v) + ")");
    }
    if (cfg.observable) {
        if (cfg.observable->degree < 0 || cfg.observable->degree > FlowObservable::kMaxDegree)
            diags.push_back("observable degree out of range");
        for (const auto& [key, coeffs] : cfg.observable->coefficients) {
            try {
                Word w = parse_word(key, spec->alphabet_size());
                if (w.size() != cfg.observable->depth || !spec->admissible(w))
                    diags.push_back("observable key \"" + key + "\" is not an admissible word of the stated depth");
            } catch (const std::exception&) {
                diags.push_back("observable key \"" + key + "\" does not parse");
            }
            if (static_cast<int>(coeffs.size()) != cfg.observable->degree + 1)
                diags.push_back("observable \"" + key + "\" needs degree+1 coefficients");
        }
        for (const Word& w : enumerate_words(*spec, cfg.observable->depth))
            if (!cfg.observable->coefficients.count(format_word(w, spec->alphabet_size())))
                diags.push_back("observable table missing word \"" +
                                format_word(w, spec->alphabet_size()) + "\"");
    }
    if (cfg.deviations) {
        if (cfg.deviations->epsilon <= 0.0) diags.push_back("deviations.epsilon must be positive");
        if (cfg.deviations->t_grid.empty()) diags.push_back("deviations.t_grid is empty");
        if (cfg.deviations->mc_samples > 0 && !cfg.deviations->seed)
            diags.push_back("deviations.seed required when mc_samples > 0");
    }
    if (cfg.escape && cfg.escape->mc_samples > 0 && !cfg.escape->seed)
        diags.push_back("escape.seed required when mc_samples > 0");
    if (cfg.escape) {
        try {
            const auto seq = build_holes(*spec, cfg);
            for (auto it = seq.holes.begin(); it != seq.holes.end(); ++it) {
                if (!it->second.contains_window(seq.target_z, 0))
                    diags.push_back("hole at n=" + std::to_string(it->first) + " does not contain z");
                auto next = std::next(it);
                if (next != seq.holes.end() && next->first == it->first + 1)
                    for (const Word& w : next->second.words())
                        if (!it->second.contains_window(w, 0))
                            diags.push_back("hole nesting fails between n=" + std::to_string(it->first) +
                                            " and n=" + std::to_string(next->first));
            }
        } catch (const std::exception& e) {
            diags.push_back(e.what());
        }
    }
    return diags;
}

}  // namespace thermoflow
