#include "quantbsde/rmq.hpp"

#include "quantbsde/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace quantbsde::rmq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;
constexpr double kRowSumTol = 1e-10;

void require_strictly_increasing(std::span<const double> grid, const char* who) {
    if (grid.empty()) throw InvalidArgument(std::string(who) + ": empty grid");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!std::isfinite(grid[j])) throw InvalidArgument(std::string(who) + ": non-finite codeword");
        if (j > 0 && !(grid[j - 1] < grid[j])) {
            throw InvalidArgument(std::string(who) + ": grid must be strictly increasing");
        }
    }
}

bool strictly_increasing(std::span<const double> grid) noexcept {
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!std::isfinite(grid[j])) return false;
        if (j > 0 && !(grid[j - 1] < grid[j])) return false;
    }
    return true;
}

// Standardized Voronoi boundary of one mixture component.
struct Boundary {
    double z;    // (c - mean) / std, +-inf at the ends
    double cdf;  // Phi(z)
    double sf;   // 1 - Phi(z)
    double pdf;  // phi(z)
};

Boundary make_boundary(double c, double mean, double std) noexcept {
    Boundary b{};
    if (c == -kInf) return {-kInf, 0.0, 1.0, 0.0};
    if (c == kInf) return {kInf, 1.0, 0.0, 0.0};
    b.z = (c - mean) / std;
    if (b.z < 0.0) {
        b.cdf = 0.5 * std::erfc(-b.z * kInvSqrt2);
        b.sf = 1.0 - b.cdf;
    } else {
        b.sf = 0.5 * std::erfc(b.z * kInvSqrt2);
        b.cdf = 1.0 - b.sf;
    }
    b.pdf = gaussian::kInvSqrt2Pi * std::exp(-0.5 * b.z * b.z);
    return b;
}

double cell_mass(const Boundary& lo, const Boundary& hi) noexcept {
    const double m = (lo.z > 0.0) ? lo.sf - hi.sf : hi.cdf - lo.cdf;
    return std::max(m, 0.0);
}

double z_pdf(const Boundary& b) noexcept {
    return std::isinf(b.z) ? 0.0 : b.z * b.pdf;
}

// Voronoi boundaries c_0 = -inf < c_1 < ... < c_{N-1} < c_N = +inf.
std::vector<double> voronoi_boundaries(std::span<const double> grid) {
    std::vector<double> c(grid.size() + 1);
    c.front() = -kInf;
    c.back() = kInf;
    for (std::size_t j = 1; j < grid.size(); ++j) c[j] = 0.5 * (grid[j - 1] + grid[j]);
    return c;
}

struct Evaluation {
    CellStatistics stats;
    std::vector<double> boundary_density;  // mixture density at c_1..c_{N-1}
};

Evaluation evaluate(std::span<const double> grid, std::span<const MixtureComponent> mixture,
                    bool with_density) {
    const std::size_t n = grid.size();
    const auto c = voronoi_boundaries(grid);
    Evaluation ev;
    ev.stats.mass.assign(n, 0.0);
    ev.stats.residual.assign(n, 0.0);
    if (with_density) ev.boundary_density.assign(n > 0 ? n - 1 : 0, 0.0);

    std::vector<Boundary> bd(n + 1);
    for (const auto& comp : mixture) {
        if (!(comp.weight > 0.0)) continue;
        const double v = comp.std;
        for (std::size_t b = 0; b <= n; ++b) bd[b] = make_boundary(c[b], comp.mean, v);
        for (std::size_t j = 0; j < n; ++j) {
            const Boundary& lo = bd[j];
            const Boundary& hi = bd[j + 1];
            const double m0 = cell_mass(lo, hi);
            const double d = comp.mean - grid[j];
            const double dphi = lo.pdf - hi.pdf;
            // Moments of (xi - x_j) over the cell.
            const double e1 = d * m0 + v * dphi;
            const double e2 = (d * d + v * v) * m0 + 2.0 * d * v * dphi + v * v * (z_pdf(lo) - z_pdf(hi));
            ev.stats.mass[j] += comp.weight * m0;
            ev.stats.residual[j] -= comp.weight * e1;
            ev.stats.distortion += comp.weight * std::max(e2, 0.0);
        }
        if (with_density) {
            for (std::size_t b = 1; b < n; ++b) ev.boundary_density[b - 1] += comp.weight * bd[b].pdf / v;
        }
    }
    return ev;
}

double max_conditional_mean_gap(std::span<const double> mass, std::span<const double> residual) noexcept {
    double gap = 0.0;
    for (std::size_t j = 0; j < mass.size(); ++j) {
        if (mass[j] > 0.0) gap = std::max(gap, std::abs(residual[j] / mass[j]));
    }
    return gap;
}

double l2_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Newton direction H^{-1} g for the tridiagonal Hessian of D/2. Empty on a zero pivot.
std::vector<double> newton_direction(std::span<const double> grid, const Evaluation& ev) {
    const std::size_t n = grid.size();
    std::vector<double> diag(n), upper(n > 0 ? n - 1 : 0);
    for (std::size_t j = 0; j < n; ++j) diag[j] = ev.stats.mass[j];
    for (std::size_t b = 0; b + 1 < n; ++b) {
        const double coupling = 0.25 * (grid[b + 1] - grid[b]) * ev.boundary_density[b];
        diag[b] -= coupling;
        diag[b + 1] -= coupling;
        upper[b] = -coupling;
    }
    // Thomas algorithm on the symmetric tridiagonal system.
    std::vector<double> rhs(ev.stats.residual.begin(), ev.stats.residual.end());
    std::vector<double> cprime(n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = diag[j];
        if (j > 0) {
            pivot -= upper[j - 1] * cprime[j - 1];
            rhs[j] -= upper[j - 1] * rhs[j - 1];
        }
        if (!(std::abs(pivot) > 0.0) || !std::isfinite(pivot)) return {};
        if (j + 1 < n) cprime[j] = upper[j] / pivot;
        rhs[j] /= pivot;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= cprime[j] * rhs[j + 1];
    return rhs;
}

std::vector<double> lloyd_step(std::span<const double> grid, const Evaluation& ev) {
    std::vector<double> next(grid.begin(), grid.end());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double m0 = ev.stats.mass[j];
        if (m0 > 0.0) next[j] = grid[j] - ev.stats.residual[j] / m0;
    }
    return next;
}

double max_displacement(std::span<const double> a, std::span<const double> b) noexcept {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
    return d;
}

struct MixtureMoments {
    double mean;
    double std;
};

MixtureMoments moments(std::span<const MixtureComponent> mixture) {
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& c : mixture) {
        w += c.weight;
        m1 += c.weight * c.mean;
        m2 += c.weight * (c.std * c.std + c.mean * c.mean);
    }
    const double mean = m1 / w;
    const double var = std::max(m2 / w - mean * mean, 0.0);
    return {mean, std::sqrt(var)};
}

std::vector<double> quantile_init(std::span<const MixtureComponent> mixture, std::size_t size) {
    const auto mm = moments(mixture);
    std::vector<double> x(size);
    for (std::size_t j = 0; j < size; ++j) {
        const double p = (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(size));
        x[j] = mm.mean + mm.std * gaussian::normal_quantile(p);
    }
    if (!strictly_increasing(x)) {
        // Degenerate spread: fall back to an evenly spaced grid around the mean.
        const double h = std::max(mm.std, 1e-8 * std::max(1.0, std::abs(mm.mean)));
        for (std::size_t j = 0; j < size; ++j) {
            x[j] = mm.mean + h * (static_cast<double>(j) - 0.5 * static_cast<double>(size - 1));
        }
    }
    return x;
}

// Previous codewords pushed through the drift and dilated by the added conditional spread.
std::optional<std::vector<double>> propagated_init(const QuantizedLayer& prev, const ConditionalLaw& law,
                                                   std::size_t size) {
    if (prev.size() != size || size < 2) return std::nullopt;
    double mean_prev = 0.0, var_prev = 0.0, vbar = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) mean_prev += prev.weights[i] * prev.codewords[i];
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const double d = prev.codewords[i] - mean_prev;
        var_prev += prev.weights[i] * d * d;
        vbar += prev.weights[i] * law.components[i].std;
    }
    if (!(var_prev > 0.0)) return std::nullopt;
    const auto mm = moments(law.components);
    const double dilation = std::sqrt(1.0 + vbar * vbar / var_prev);
    std::vector<double> x(size);
    for (std::size_t i = 0; i < size; ++i) x[i] = mm.mean + (law.components[i].mean - mm.mean) * dilation;
    if (!strictly_increasing(x)) return std::nullopt;
    return x;
}

}  // namespace

TimeGrid::TimeGrid(std::size_t steps, double horizon) : steps_(steps), horizon_(horizon) {
    if (steps < 1) throw InvalidArgument("TimeGrid: need at least one step");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("TimeGrid: horizon must be > 0");
}

void validate(const OptimizerSettings& settings) {
    if (settings.max_iterations < 1) throw InvalidArgument("optimizer: max_iterations must be >= 1");
    if (!(settings.fixed_point_tol > 0.0)) throw InvalidArgument("optimizer: fixed_point_tol must be > 0");
    if (!(settings.newton_damping > 0.0 && settings.newton_damping <= 1.0)) {
        throw InvalidArgument("optimizer: newton_damping must lie in (0, 1]");
    }
}

double euler_operator(double y, double z, double dt, const FbsdeProblem& problem) {
    if (!(dt > 0.0)) throw InvalidArgument("euler_operator: dt must be > 0");
    return y + dt * problem.drift(y) + std::sqrt(dt) * problem.diffusion(y) * z;
}

ConditionalLaw conditional_law(const QuantizedLayer& source, double dt, const FbsdeProblem& problem) {
    if (!(dt > 0.0)) throw InvalidArgument("conditional_law: dt must be > 0");
    ConditionalLaw law;
    law.components.reserve(source.size());
    const double sqdt = std::sqrt(dt);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double y = source.codewords[i];
        const double s = std::abs(problem.diffusion(y));
        if (!(s >= problem.diffusion_floor)) ++law.floored;
        const double eff = std::isnan(s) ? problem.diffusion_floor : std::max(s, problem.diffusion_floor);
        law.components.push_back({y + dt * problem.drift(y), sqdt * eff, source.weights[i]});
    }
    return law;
}

CellStatistics cell_statistics(std::span<const double> grid, std::span<const MixtureComponent> mixture) {
    require_strictly_increasing(grid, "cell_statistics");
    return evaluate(grid, mixture, false).stats;
}

double mixture_distortion(std::span<const double> grid, std::span<const MixtureComponent> mixture) {
    require_strictly_increasing(grid, "mixture_distortion");
    return evaluate(grid, mixture, false).stats.distortion;
}

double stationarity_residual(std::span<const double> grid, std::span<const MixtureComponent> mixture) {
    const auto st = cell_statistics(grid, mixture);
    return max_conditional_mean_gap(st.mass, st.residual);
}

OptimizedGrid quantize_mixture(std::span<const MixtureComponent> mixture, std::size_t size,
                               const OptimizerSettings& settings,
                               std::optional<std::span<const double>> warm_start) {
    validate(settings);
    if (size < 1) throw InvalidArgument("quantize_mixture: size must be >= 1");
    double total = 0.0;
    for (const auto& c : mixture) {
        if (!(c.std > 0.0) || !std::isfinite(c.mean) || !(c.weight >= 0.0)) {
            throw InvalidArgument("quantize_mixture: invalid mixture component");
        }
        total += c.weight;
    }
    if (!(total > 0.0)) throw InvalidArgument("quantize_mixture: mixture has no mass");

    std::vector<double> x;
    if (warm_start) {
        if (warm_start->size() != size || !strictly_increasing(*warm_start)) {
            throw InvalidArgument("quantize_mixture: warm start must hold " + std::to_string(size) +
                                  " strictly increasing codewords");
        }
        x.assign(warm_start->begin(), warm_start->end());
    } else {
        x = quantile_init(mixture, size);
    }

    const bool newton = settings.newton_enabled;
    Evaluation ev = evaluate(x, mixture, newton);
    for (std::size_t it = 1; it <= settings.max_iterations; ++it) {
        std::vector<double> proposal;
        std::optional<Evaluation> proposal_ev;
        if (newton) {
            auto dir = newton_direction(x, ev);
            if (!dir.empty()) {
                proposal.resize(size);
                for (std::size_t j = 0; j < size; ++j) proposal[j] = x[j] - settings.newton_damping * dir[j];
                if (strictly_increasing(proposal)) {
                    proposal_ev = evaluate(proposal, mixture, true);
                    const double slack = 1e-12 * ev.stats.distortion;
                    if (!(proposal_ev->stats.distortion <= ev.stats.distortion + slack)) proposal_ev.reset();
                }
            }
        }
        if (!proposal_ev) {
            proposal = lloyd_step(x, ev);
            if (!strictly_increasing(proposal)) {
                throw ConvergenceError("quantize_mixture: Lloyd step lost grid ordering", x,
                                       l2_norm(ev.stats.residual));
            }
            proposal_ev = evaluate(proposal, mixture, newton);
        }
        const double disp = max_displacement(x, proposal);
        x = std::move(proposal);
        ev = std::move(*proposal_ev);
        if (disp < settings.fixed_point_tol &&
            max_conditional_mean_gap(ev.stats.mass, ev.stats.residual) < settings.fixed_point_tol) {
            OptimizedGrid out;
            out.codewords = std::move(x);
            out.weights = std::move(ev.stats.mass);
            out.distortion = ev.stats.distortion;
            out.iterations = it;
            return out;
        }
    }
    throw ConvergenceError("quantize_mixture: no convergence after " + std::to_string(settings.max_iterations) +
                               " iterations",
                           x, l2_norm(ev.stats.residual));
}

QuantizedLayer optimize_grid(const QuantizedLayer& prev, double dt, const FbsdeProblem& problem,
                             std::size_t size, const OptimizerSettings& settings,
                             std::optional<std::span<const double>> warm_start) {
    const auto law = conditional_law(prev, dt, problem);
    std::optional<std::vector<double>> init;
    if (!warm_start) {
        init = propagated_init(prev, law, size);
        if (init) warm_start = std::span<const double>(*init);
    }
    auto grid = quantize_mixture(law.components, size, settings, warm_start);
    QuantizedLayer layer;
    layer.step = prev.step + 1;
    layer.codewords = std::move(grid.codewords);
    layer.weights = std::move(grid.weights);
    layer.distortion = grid.distortion;
    return layer;
}

TransitionMatrix transition_matrix(const QuantizedLayer& prev, const QuantizedLayer& next, double dt,
                                   const FbsdeProblem& problem) {
    if (next.step != prev.step + 1) throw InvalidArgument("transition_matrix: layers are not adjacent");
    require_strictly_increasing(next.codewords, "transition_matrix");
    const auto law = conditional_law(prev, dt, problem);
    const auto c = voronoi_boundaries(next.codewords);
    TransitionMatrix tm;
    tm.step = prev.step;
    tm.rows = prev.size();
    tm.cols = next.size();
    tm.entries.assign(tm.rows * tm.cols, 0.0);
    std::vector<Boundary> bd(tm.cols + 1);
    for (std::size_t i = 0; i < tm.rows; ++i) {
        const auto& comp = law.components[i];
        for (std::size_t b = 0; b <= tm.cols; ++b) bd[b] = make_boundary(c[b], comp.mean, comp.std);
        double sum = 0.0;
        double* row = tm.entries.data() + i * tm.cols;
        for (std::size_t j = 0; j < tm.cols; ++j) {
            row[j] = cell_mass(bd[j], bd[j + 1]);
            sum += row[j];
        }
        if (!(std::abs(sum - 1.0) <= kRowSumTol)) {
            throw NumericalError("transition_matrix: row " + std::to_string(i) + " of step " +
                                 std::to_string(prev.step) + " sums to " + std::to_string(sum));
        }
        if (sum != 1.0) {
            for (std::size_t j = 0; j < tm.cols; ++j) row[j] /= sum;
        }
    }
    return tm;
}

QuantizationTree build_tree(const FbsdeProblem& problem, const TimeGrid& grid, std::size_t size,
                            const OptimizerSettings& settings) {
    const std::vector<std::size_t> sizes(grid.steps(), size);
    return build_tree(problem, grid, sizes, settings);
}

QuantizationTree build_tree(const FbsdeProblem& problem, const TimeGrid& grid,
                            std::span<const std::size_t> sizes, const OptimizerSettings& settings) {
    validate(problem);
    validate(settings);
    if (sizes.size() != grid.steps()) throw InvalidArgument("build_tree: need one layer size per step");
    for (auto s : sizes) {
        if (s < 1) throw InvalidArgument("build_tree: layer sizes must be >= 1");
    }
    const double dt = grid.dt();
    QuantizationTree tree{grid, {}, {}, 0};
    tree.layers.reserve(grid.steps() + 1);
    tree.transitions.reserve(grid.steps());
    tree.layers.push_back({0, {problem.y0}, {1.0}, 0.0});
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const auto& prev = tree.layers.back();
        tree.floored_nodes += conditional_law(prev, dt, problem).floored;
        auto next = optimize_grid(prev, dt, problem, sizes[k], settings);
        tree.transitions.push_back(transition_matrix(prev, next, dt, problem));
        tree.layers.push_back(std::move(next));
    }
    return tree;
}

std::size_t project(std::span<const double> grid, double x) noexcept {
    std::size_t lo = 0, hi = grid.empty() ? 0 : grid.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (0.5 * (grid[mid - 1] + grid[mid]) <= x) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

}  // namespace quantbsde::rmq
