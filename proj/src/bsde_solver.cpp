#include "quantbsde/bsde_solver.hpp"

#include "quantbsde/error.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace quantbsde::bsde {

namespace {

void check_step(const rmq::QuantizationTree& tree, std::size_t k, const ValueLayer& next_values) {
    if (k >= tree.transitions.size()) {
        throw InvalidArgument("backward step " + std::to_string(k) + " out of range");
    }
    if (next_values.step != k + 1 || next_values.values.size() != tree.layers[k + 1].size()) {
        throw InvalidArgument("backward step " + std::to_string(k) + ": next values do not match layer " +
                              std::to_string(k + 1));
    }
}

}  // namespace

void validate(const SolverConfig& config) {
    if (config.theta1 != 1.0 || config.theta2 != 1.0) {
        throw InvalidArgument("solver: only the explicit scheme theta1 = theta2 = 1 is supported");
    }
    if (config.mc_control_paths && *config.mc_control_paths < 1) {
        throw InvalidArgument("solver: mc_control_paths must be >= 1");
    }
}

ValueLayer terminal_layer(const rmq::QuantizationTree& tree, const FbsdeProblem& problem) {
    const auto& last = tree.layers.back();
    ValueLayer out{last.step, {}};
    out.values.reserve(last.size());
    for (double y : last.codewords) out.values.push_back(problem.terminal(y));
    return out;
}

StepResult backward_step(const rmq::QuantizationTree& tree, std::size_t k, const ValueLayer& next_values,
                         const FbsdeProblem& problem, const SolverConfig& config) {
    validate(config);
    check_step(tree, k, next_values);
    const auto& src = tree.layers[k];
    const auto& dst = tree.layers[k + 1];
    const auto& tm = tree.transitions[k];
    const double dt = tree.time_grid.dt();
    const double t = tree.time_grid.time(k);

    StepResult out;
    out.value = {k, std::vector<double>(src.size())};
    out.control = {k, std::vector<double>(src.size())};
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double y = src.codewords[i];
        const auto row = tm.row(i);
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t j = 0; j < dst.size(); ++j) {
            const double w = next_values.values[j] * row[j];
            e1 += w;
            e2 += w * (dst.codewords[j] - y);
        }
        double sigma = problem.diffusion(y);
        if (!(std::abs(sigma) >= problem.diffusion_floor)) {
            ++out.ellipticity_warnings;
            sigma = std::signbit(sigma) ? -problem.diffusion_floor : problem.diffusion_floor;
        }
        const double inv_sigma = 1.0 / sigma;
        const double v = inv_sigma * e2 / dt - inv_sigma * e1 * problem.drift(y);
        const double f = problem.driver(t, y, e1, v);
        if (std::isnan(f) || std::isnan(v)) {
            throw NumericalError("backward step " + std::to_string(k) + ": NaN at node " + std::to_string(i) +
                                 " (y = " + std::to_string(y) + ")");
        }
        out.control.controls[i] = v;
        out.value.values[i] = e1 + dt * f;
    }
    return out;
}

BackwardSolution solve(const rmq::QuantizationTree& tree, const FbsdeProblem& problem, const SolverConfig& config) {
    validate(config);
    const std::size_t n = tree.transitions.size();
    if (tree.layers.size() != n + 1 || n != tree.time_grid.steps()) {
        throw InvalidArgument("solve: tree layers and transitions are inconsistent");
    }
    BackwardSolution sol;
    sol.tree = &tree;
    sol.value_layers.resize(n + 1);
    sol.control_layers.resize(n);
    sol.value_layers[n] = terminal_layer(tree, problem);
    for (std::size_t k = n; k-- > 0;) {
        auto step = backward_step(tree, k, sol.value_layers[k + 1], problem, config);
        sol.value_layers[k] = std::move(step.value);
        sol.control_layers[k] = std::move(step.control);
        sol.ellipticity_warnings += step.ellipticity_warnings;
    }
    sol.u0 = sol.value_layers[0].values[0];
    return sol;
}

BenchmarkControl ps_control_benchmark(const rmq::QuantizationTree& tree, const FbsdeProblem& problem,
                                      std::size_t k, const ValueLayer& next_values, std::size_t paths,
                                      std::uint64_t seed) {
    check_step(tree, k, next_values);
    if (paths < 1) throw InvalidArgument("ps_control_benchmark: paths must be >= 1");
    const auto& src = tree.layers[k];
    const auto& dst = tree.layers[k + 1];
    const double dt = tree.time_grid.dt();
    const double sqdt = std::sqrt(dt);

    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick_source(src.weights.begin(), src.weights.end());
    std::normal_distribution<double> normal(0.0, 1.0);

    // Per source node: sample sum and sum of squares of u(Yhat_{k+1}) * dW.
    std::vector<double> sum(src.size(), 0.0), sum_sq(src.size(), 0.0);
    std::vector<std::size_t> count(src.size(), 0);
    for (std::size_t p = 0; p < paths; ++p) {
        const std::size_t i = src.size() == 1 ? 0 : pick_source(rng);
        const double z = normal(rng);
        const double y_next = rmq::euler_operator(src.codewords[i], z, dt, problem);
        const std::size_t j = rmq::project(dst.codewords, y_next);
        const double x = next_values.values[j] * sqdt * z;
        sum[i] += x;
        sum_sq[i] += x * x;
        ++count[i];
    }

    BenchmarkControl out;
    out.control = {k, std::vector<double>(src.size())};
    out.standard_errors.assign(src.size(), std::numeric_limits<double>::quiet_NaN());
    out.samples = count;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (count[i] == 0) {
            out.control.controls[i] = std::numeric_limits<double>::quiet_NaN();
            out.undefined_nodes.push_back(i);
            continue;
        }
        const double c = static_cast<double>(count[i]);
        const double mean = sum[i] / c;
        out.control.controls[i] = mean / dt;
        if (count[i] > 1) {
            const double var = std::max(sum_sq[i] / c - mean * mean, 0.0) * c / (c - 1.0);
            out.standard_errors[i] = std::sqrt(var / c) / dt;
        }
    }
    return out;
}

}  // namespace quantbsde::bsde
