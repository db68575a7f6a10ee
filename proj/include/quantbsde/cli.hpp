#pragma once

#include "quantbsde/model.hpp"
#include "quantbsde/rmq.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace quantbsde::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;
inline constexpr int kPartialFailure = 2;
inline constexpr int kRuntimeError = 3;

struct RunConfig {
    ModelSpec model;
    std::size_t steps = 20;
    std::size_t quantizers = 50;
    rmq::OptimizerSettings optimizer;
    std::optional<std::string> output;
    std::optional<std::string> tree_cache;
    std::vector<std::size_t> sweep_quantizers;
    std::vector<std::size_t> sweep_steps;
    std::vector<std::size_t> hedge_steps;
    std::optional<std::size_t> mc_paths;
    std::uint64_t seed = 42;
};

// Field-level configuration problem, e.g. "steps: must be >= 1".
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Defaults for a model name: horizon, y0, steps and quantizers of its reference run.
RunConfig default_config(const std::string& model_name);

// Reads a configuration document. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Checks the invariants of every populated type. Throws ConfigError.
void validate(const RunConfig& config);

nlohmann::json params_to_json(const ModelParams& params);

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_hedge(const RunConfig& config, std::ostream& out, std::ostream& err);

// Entry point: `quantbsde <solve|sweep|hedge> [--config file] [--model name] [--steps n]
// [--quantizers N] [--output path] [--seed s] [--tree-cache path]`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quantbsde::cli
