#pragma once

#include "quantbsde/error.hpp"
#include "quantbsde/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace quantbsde::rmq {

// Uniform mesh t_k = k T / n, k = 0..n.
class TimeGrid {
public:
    TimeGrid(std::size_t steps, double horizon);

    std::size_t steps() const noexcept { return steps_; }
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t k) const noexcept {
        return horizon_ * static_cast<double>(k) / static_cast<double>(steps_);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::size_t steps_;
    double horizon_;
};

// Codebook of one time step. Codewords strictly increasing, weights sum to one.
struct QuantizedLayer {
    std::size_t step = 0;
    std::vector<double> codewords;
    std::vector<double> weights;
    double distortion = 0.0;

    std::size_t size() const noexcept { return codewords.size(); }
};

// Row-major N_k x N_{k+1} matrix of P(Yhat_{k+1} = y_j | Yhat_k = y_i).
struct TransitionMatrix {
    std::size_t step = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;

    double operator()(std::size_t i, std::size_t j) const noexcept { return entries[i * cols + j]; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {entries.data() + i * cols, cols};
    }
};

struct QuantizationTree {
    TimeGrid time_grid;
    std::vector<QuantizedLayer> layers;         // n + 1
    std::vector<TransitionMatrix> transitions;  // n
    // Number of source nodes whose diffusion fell below the floor and was clamped.
    std::size_t floored_nodes = 0;
};

struct OptimizerSettings {
    std::size_t max_iterations = 200;
    double fixed_point_tol = 1e-9;
    bool newton_enabled = true;
    double newton_damping = 1.0;
};

void validate(const OptimizerSettings& settings);

// One Gaussian component N(mean, std^2) of a mixture, carrying probability `weight`.
struct MixtureComponent {
    double mean;
    double std;
    double weight;
};

struct ConditionalLaw {
    std::vector<MixtureComponent> components;  // one per source codeword, weight = source weight
    std::size_t floored = 0;                   // components whose std was clamped to the floor
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::vector<double> last_iterate, double gradient_norm)
        : NumericalError(what), last_iterate_(std::move(last_iterate)), gradient_norm_(gradient_norm) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    std::vector<double> last_iterate_;
    double gradient_norm_;
};

// y + dt b(y) + sqrt(dt) sigma(y) z.
double euler_operator(double y, double z, double dt, const FbsdeProblem& problem);

// Gaussian law of the Euler step from each codeword of `source`.
ConditionalLaw conditional_law(const QuantizedLayer& source, double dt, const FbsdeProblem& problem);

// Aggregated cell quantities of a mixture over the Voronoi cells of a grid.
struct CellStatistics {
    std::vector<double> mass;      // M0_j
    std::vector<double> residual;  // x_j M0_j - M1_j, half the distortion gradient
    double distortion = 0.0;
};

// Throws InvalidArgument when `grid` is empty or not strictly increasing.
CellStatistics cell_statistics(std::span<const double> grid, std::span<const MixtureComponent> mixture);

double mixture_distortion(std::span<const double> grid, std::span<const MixtureComponent> mixture);

// max_j |x_j - M1_j / M0_j| over cells with nonzero mass.
double stationarity_residual(std::span<const double> grid, std::span<const MixtureComponent> mixture);

struct OptimizedGrid {
    std::vector<double> codewords;
    std::vector<double> weights;
    double distortion = 0.0;
    std::size_t iterations = 0;
};

// Stationary N-point quantizer of a Gaussian mixture: damped Newton on the distortion
// gradient with a Lloyd fallback. `warm_start`, when given, must have N strictly
// increasing entries.
OptimizedGrid quantize_mixture(std::span<const MixtureComponent> mixture, std::size_t size,
                               const OptimizerSettings& settings,
                               std::optional<std::span<const double>> warm_start = std::nullopt);

QuantizedLayer optimize_grid(const QuantizedLayer& prev, double dt, const FbsdeProblem& problem,
                             std::size_t size, const OptimizerSettings& settings,
                             std::optional<std::span<const double>> warm_start = std::nullopt);

TransitionMatrix transition_matrix(const QuantizedLayer& prev, const QuantizedLayer& next, double dt,
                                   const FbsdeProblem& problem);

// Layer 0 is the Dirac at y0; layers 1..n have `size` codewords.
QuantizationTree build_tree(const FbsdeProblem& problem, const TimeGrid& grid, std::size_t size,
                            const OptimizerSettings& settings = {});

// Per-layer sizes for layers 1..n (sizes.size() == n).
QuantizationTree build_tree(const FbsdeProblem& problem, const TimeGrid& grid,
                            std::span<const std::size_t> sizes, const OptimizerSettings& settings = {});

// Index of the Voronoi cell of `x` on a strictly increasing grid; a point on a
// midpoint belongs to the cell on its right.
std::size_t project(std::span<const double> grid, double x) noexcept;

}  // namespace quantbsde::rmq
