#pragma once

#include "quantbsde/model.hpp"
#include "quantbsde/rmq.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace quantbsde::bsde {

// u_k evaluated on the codewords of layer k.
struct ValueLayer {
    std::size_t step = 0;
    std::vector<double> values;
};

// v_k evaluated on the codewords of layer k, k < n.
struct ControlLayer {
    std::size_t step = 0;
    std::vector<double> controls;
};

// Only the explicit scheme (theta1 = theta2 = 1) is available; validate() rejects others.
struct SolverConfig {
    double theta1 = 1.0;
    double theta2 = 1.0;
    std::optional<std::size_t> mc_control_paths;
};

void validate(const SolverConfig& config);

struct BackwardSolution {
    const rmq::QuantizationTree* tree = nullptr;
    std::vector<ValueLayer> value_layers;      // n + 1
    std::vector<ControlLayer> control_layers;  // n
    double u0 = 0.0;
    // Nodes where |sigma| fell below the floor and the reciprocal was clamped.
    std::size_t ellipticity_warnings = 0;

    // Initial hedge: the control at the Dirac start node.
    double v0() const { return control_layers.front().controls.front(); }
};

struct StepResult {
    ValueLayer value;
    ControlLayer control;
    std::size_t ellipticity_warnings = 0;
};

ValueLayer terminal_layer(const rmq::QuantizationTree& tree, const FbsdeProblem& problem);

// One step of the explicit quantized recursion from layer k+1 back to layer k:
//   E1 = sum_j u_j P_ij,  E2 = sum_j u_j (y_j - y_i) P_ij,
//   v  = E2 / (dt sigma) - E1 b / sigma,  u = E1 + dt f(t_k, y_i, E1, v).
StepResult backward_step(const rmq::QuantizationTree& tree, std::size_t k, const ValueLayer& next_values,
                         const FbsdeProblem& problem, const SolverConfig& config = {});

// The solution keeps a pointer to `tree`; the tree must outlive it.
BackwardSolution solve(const rmq::QuantizationTree& tree, const FbsdeProblem& problem,
                       const SolverConfig& config = {});

struct BenchmarkControl {
    ControlLayer control;
    std::vector<double> standard_errors;     // per node, NaN where undefined
    std::vector<std::size_t> samples;        // draws that landed on each source node
    std::vector<std::size_t> undefined_nodes;  // source nodes never visited
};

// Monte Carlo estimate of the Brownian-weight control
//   v_PS(y_i) = (1/dt) sum_j u_j E[(W_{k+1} - W_k) 1{Yhat_{k+1} = y_j} | Yhat_k = y_i].
// Source nodes are drawn from the layer-k weights; deterministic given the seed.
BenchmarkControl ps_control_benchmark(const rmq::QuantizationTree& tree, const FbsdeProblem& problem,
                                      std::size_t k, const ValueLayer& next_values, std::size_t paths,
                                      std::uint64_t seed);

}  // namespace quantbsde::bsde
