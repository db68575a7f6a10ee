#include "quantbsde/cli.hpp"

#include "quantbsde/bsde_solver.hpp"
#include "quantbsde/error.hpp"
#include "quantbsde/report.hpp"
#include "quantbsde/serialization.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

namespace quantbsde::cli {

using nlohmann::json;

namespace {

std::string fmt4(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

std::string fmt_g(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& path) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + key + ": " + e.what());
    }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(path + key + ": unknown field");
    }
}

template <class T>
void maybe(const json& obj, const char* key, const std::string& path, T& target) {
    if (obj.contains(key)) target = get_field<T>(obj, key, path);
}

ModelParams parse_params(const std::string& name, const json& p) {
    const std::string path = "model.params.";
    if (name == "black-scholes") {
        reject_unknown(p, {"rate", "volatility", "strike"}, path);
        BlackScholesParams bs;
        maybe(p, "rate", path, bs.rate);
        maybe(p, "volatility", path, bs.volatility);
        maybe(p, "strike", path, bs.strike);
        return bs;
    }
    if (name == "bergman") {
        reject_unknown(p, {"drift", "volatility", "lend_rate", "borrow_rate", "strike_low", "strike_high"}, path);
        BergmanParams bg;
        maybe(p, "drift", path, bg.drift);
        maybe(p, "volatility", path, bg.volatility);
        maybe(p, "lend_rate", path, bg.lend_rate);
        maybe(p, "borrow_rate", path, bg.borrow_rate);
        maybe(p, "strike_low", path, bg.strike_low);
        maybe(p, "strike_high", path, bg.strike_high);
        return bg;
    }
    throw ConfigError("model.name: unknown model '" + name + "'");
}

json optimizer_json(const rmq::OptimizerSettings& s) {
    return {{"max_iterations", s.max_iterations},
            {"fixed_point_tol", s.fixed_point_tol},
            {"newton", s.newton_enabled},
            {"newton_damping", s.newton_damping}};
}

json tree_meta(const RunConfig& c) {
    return {{"model", c.model.name},     {"params", params_to_json(c.model.params)},
            {"horizon", c.model.horizon}, {"y0", c.model.y0},
            {"steps", c.steps},           {"quantizers", c.quantizers},
            {"optimizer", optimizer_json(c.optimizer)}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Builds the tree, or loads it from the cache when the stored provenance matches.
rmq::QuantizationTree obtain_tree(const RunConfig& c, const FbsdeProblem& problem, std::ostream& out) {
    const json meta = tree_meta(c);
    if (c.tree_cache && std::filesystem::exists(*c.tree_cache)) {
        try {
            auto doc = io::read_tree(*c.tree_cache);
            if (doc.meta == meta) {
                out << "tree_cache=hit\n";
                return std::move(doc.tree);
            }
        } catch (const Error&) {
            // Unreadable cache: rebuild below.
        }
    }
    auto tree = rmq::build_tree(problem, rmq::TimeGrid(c.steps, c.model.horizon), c.quantizers, c.optimizer);
    if (c.tree_cache) {
        io::write_tree(*c.tree_cache, tree, nullptr, meta);
        out << "tree_cache=miss\n";
    }
    return tree;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace

RunConfig default_config(const std::string& model_name) {
    RunConfig c;
    c.model.name = model_name;
    if (model_name == "black-scholes") {
        c.model.params = BlackScholesParams{};
        c.model.horizon = 1.0;
        c.model.y0 = 100.0;
        c.steps = 20;
        c.quantizers = 50;
        c.sweep_quantizers = {50};
        c.sweep_steps = {20};
        // The last reported step is n - 1, the final one carrying a control.
        c.hedge_steps = {5, 10, 15, 19};
    } else if (model_name == "bergman") {
        c.model.params = BergmanParams{};
        c.model.horizon = 0.25;
        c.model.y0 = 100.0;
        c.steps = 50;
        c.quantizers = 20;
        c.sweep_quantizers = {5, 10, 15, 20, 50, 100};
        c.sweep_steps = {5, 10, 20, 50, 100};
    } else {
        throw ConfigError("model: unknown model '" + model_name + "' (expected black-scholes or bergman)");
    }
    return c;
}

RunConfig parse_config(const json& doc) {
    reject_unknown(doc, {"model", "T", "y0", "steps", "quantizers", "optimizer", "output", "tree_cache", "sweep",
                         "hedge", "mc"},
                   "");
    std::string name = "black-scholes";
    const json* params = nullptr;
    if (doc.contains("model")) {
        const json& m = doc.at("model");
        if (m.is_string()) {
            name = m.get<std::string>();
        } else {
            reject_unknown(m, {"name", "params"}, "model.");
            name = get_field<std::string>(m, "name", "model.");
            if (m.contains("params")) params = &m.at("params");
        }
    }
    RunConfig c = default_config(name);
    if (params) c.model.params = parse_params(name, *params);
    maybe(doc, "T", "", c.model.horizon);
    maybe(doc, "y0", "", c.model.y0);
    maybe(doc, "steps", "", c.steps);
    maybe(doc, "quantizers", "", c.quantizers);
    if (doc.contains("optimizer")) {
        const json& o = doc.at("optimizer");
        reject_unknown(o, {"max_iterations", "fixed_point_tol", "newton", "newton_damping"}, "optimizer.");
        maybe(o, "max_iterations", "optimizer.", c.optimizer.max_iterations);
        maybe(o, "fixed_point_tol", "optimizer.", c.optimizer.fixed_point_tol);
        maybe(o, "newton", "optimizer.", c.optimizer.newton_enabled);
        maybe(o, "newton_damping", "optimizer.", c.optimizer.newton_damping);
    }
    if (doc.contains("output")) c.output = get_field<std::string>(doc, "output", "");
    if (doc.contains("tree_cache")) c.tree_cache = get_field<std::string>(doc, "tree_cache", "");
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        reject_unknown(s, {"quantizers", "steps"}, "sweep.");
        maybe(s, "quantizers", "sweep.", c.sweep_quantizers);
        maybe(s, "steps", "sweep.", c.sweep_steps);
    }
    if (doc.contains("hedge")) {
        const json& h = doc.at("hedge");
        reject_unknown(h, {"steps"}, "hedge.");
        maybe(h, "steps", "hedge.", c.hedge_steps);
    }
    if (doc.contains("mc")) {
        const json& m = doc.at("mc");
        reject_unknown(m, {"paths", "seed"}, "mc.");
        if (m.contains("paths")) c.mc_paths = get_field<std::size_t>(m, "paths", "mc.");
        maybe(m, "seed", "mc.", c.seed);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("--config: cannot open '" + path + "'");
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("--config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

void validate(const RunConfig& c) {
    if (c.steps < 1) throw ConfigError("steps: must be >= 1");
    if (c.quantizers < 1) throw ConfigError("quantizers: must be >= 1");
    if (!(c.model.horizon > 0.0)) throw ConfigError("T: must be > 0");
    if (c.mc_paths && *c.mc_paths < 1) throw ConfigError("mc.paths: must be >= 1");
    try {
        rmq::validate(c.optimizer);
        (void)make_problem(c.model);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    report::SweepSpec spec{c.sweep_quantizers, c.sweep_steps, c.model};
    try {
        report::validate(spec);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

json params_to_json(const ModelParams& params) {
    if (const auto* p = std::get_if<BlackScholesParams>(&params)) {
        return {{"rate", p->rate}, {"volatility", p->volatility}, {"strike", p->strike}};
    }
    if (const auto* p = std::get_if<BergmanParams>(&params)) {
        return {{"drift", p->drift},           {"volatility", p->volatility}, {"lend_rate", p->lend_rate},
                {"borrow_rate", p->borrow_rate}, {"strike_low", p->strike_low}, {"strike_high", p->strike_high}};
    }
    return json::object();
}

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        validate(config);
        const auto problem = make_problem(config.model);
        const auto t0 = std::chrono::steady_clock::now();
        const auto tree = obtain_tree(config, problem, out);
        const auto sol = bsde::solve(tree, problem);
        const double elapsed = seconds_since(t0);
        out << "model=" << config.model.name << '\n'
            << "steps=" << config.steps << '\n'
            << "quantizers=" << config.quantizers << '\n'
            << "u0=" << fmt4(sol.u0) << '\n'
            << "v0=" << fmt4(sol.v0()) << '\n'
            << "seconds=" << fmt4(elapsed) << '\n';
        if (sol.ellipticity_warnings + tree.floored_nodes > 0) {
            out << "diffusion_floor_hits=" << sol.ellipticity_warnings + tree.floored_nodes << '\n';
        }
        if (config.mc_paths) {
            const auto t1 = std::chrono::steady_clock::now();
            const auto ps = bsde::ps_control_benchmark(tree, problem, 0, sol.value_layers[1], *config.mc_paths,
                                                       config.seed);
            out << "ps_v0=" << fmt4(ps.control.controls[0]) << '\n'
                << "ps_v0_stderr=" << fmt4(ps.standard_errors[0]) << '\n'
                << "ps_seconds=" << fmt4(seconds_since(t1)) << '\n';
        }
        if (config.output) {
            io::write_tree(*config.output, tree, &sol, tree_meta(config));
            out << "output=" << *config.output << '\n';
        }
        return kOk;
    });
}

int cmd_sweep(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        validate(config);
        if (!config.output) throw ConfigError("output: sweep needs an output CSV path");
        const report::SweepSpec spec{config.sweep_quantizers, config.sweep_steps, config.model};
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = report::run_sweep(spec, config.optimizer);
        const double elapsed = seconds_since(t0);
        report::emit_csv(result, *config.output);
        auto sidecar = report::to_json(result, spec);
        sidecar["params"] = params_to_json(config.model.params);
        const std::string sidecar_path = *config.output + ".json";
        std::ofstream js(sidecar_path);
        if (!js) throw IoError("cannot open '" + sidecar_path + "' for writing");
        js << sidecar.dump(2) << '\n';
        for (std::size_t r = 0; r < result.quantizer_counts.size(); ++r) {
            for (std::size_t c = 0; c < result.step_counts.size(); ++c) {
                const auto& cell = result.at(r, c);
                if (!cell.u0) {
                    err << "cell N=" << result.quantizer_counts[r] << " n=" << result.step_counts[c]
                        << " failed: " << cell.error << '\n';
                }
            }
        }
        out << "model=" << config.model.name << '\n'
            << "cells=" << result.cells.size() << '\n'
            << "failures=" << result.failures() << '\n'
            << "seconds=" << fmt4(elapsed) << '\n'
            << "output=" << *config.output << '\n';
        return result.failures() == 0 ? kOk : kPartialFailure;
    });
}

int cmd_hedge(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        validate(config);
        if (config.model.name != "black-scholes") {
            throw ConfigError("model: hedge comparison needs black-scholes, got '" + config.model.name + "'");
        }
        if (!config.output) throw ConfigError("output: hedge needs an output CSV path");
        for (auto k : config.hedge_steps) {
            if (k >= config.steps) {
                throw ConfigError("hedge.steps: step " + std::to_string(k) + " must be < steps = " +
                                  std::to_string(config.steps));
            }
        }
        const auto problem = make_problem(config.model);
        const auto tree = obtain_tree(config, problem, out);
        const auto sol = bsde::solve(tree, problem);
        const auto rows = report::hedge_compare(sol, problem, config.hedge_steps);
        report::emit_csv(rows, *config.output);
        out << "model=" << config.model.name << '\n' << "u0=" << fmt4(sol.u0) << '\n' << "rows=" << rows.size() << '\n';
        for (auto k : config.hedge_steps) {
            const auto s = report::hedge_error_summary(sol, problem, k);
            out << "max_rel_central_k" << k << '=' << fmt_g(s.max_rel_central) << '\n'
                << "max_rel_atm_k" << k << '=' << fmt_g(s.max_rel_atm) << '\n';
        }
        out << "output=" << *config.output << '\n';
        return kOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantization-based solver for decoupled forward-backward SDEs"};
    app.require_subcommand(1);
    std::string config_path, model, output, tree_cache;
    std::optional<std::size_t> steps, quantizers;
    std::optional<std::uint64_t> seed;
    for (auto* sub : {app.add_subcommand("solve", "Solve one problem and print u0, v0"),
                      app.add_subcommand("sweep", "Grid of u0 over quantizer and step counts"),
                      app.add_subcommand("hedge", "Compare the control against the closed form")}) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--model", model, "black-scholes | bergman");
        sub->add_option("--steps", steps, "number of time steps n");
        sub->add_option("--quantizers", quantizers, "codewords per layer N");
        sub->add_option("--output", output, "output path");
        sub->add_option("--seed", seed, "seed for the Monte Carlo benchmark");
        sub->add_option("--tree-cache", tree_cache, "cache file for the quantization tree (.rmq.json)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig config;
    try {
        if (!config_path.empty()) {
            config = load_config(config_path);
            if (!model.empty() && model != config.model.name) {
                // Switching models drops the file's parameters for the new model's defaults.
                auto fresh = default_config(model);
                config.model.name = fresh.model.name;
                config.model.params = fresh.model.params;
            }
        } else {
            config = default_config(model.empty() ? "black-scholes" : model);
        }
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (steps) config.steps = *steps;
    if (quantizers) config.quantizers = *quantizers;
    if (!output.empty()) config.output = output;
    if (seed) config.seed = *seed;
    if (!tree_cache.empty()) config.tree_cache = tree_cache;

    if (command == "solve") return cmd_solve(config, out, err);
    if (command == "sweep") return cmd_sweep(config, out, err);
    return cmd_hedge(config, out, err);
}

}  // namespace quantbsde::cli
