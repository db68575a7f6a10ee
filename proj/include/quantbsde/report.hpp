#pragma once

#include "quantbsde/bsde_solver.hpp"
#include "quantbsde/model.hpp"
#include "quantbsde/rmq.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace quantbsde::report {

struct SweepSpec {
    std::vector<std::size_t> quantizer_counts;  // rows
    std::vector<std::size_t> step_counts;       // columns
    ModelSpec model;
};

void validate(const SweepSpec& spec);

struct SweepCell {
    std::optional<double> u0;  // empty when the cell failed
    double seconds = 0.0;
    std::string error;
};

struct SweepResult {
    std::vector<std::size_t> quantizer_counts;
    std::vector<std::size_t> step_counts;
    std::vector<SweepCell> cells;  // row-major, quantizers x steps

    const SweepCell& at(std::size_t row, std::size_t col) const { return cells[row * step_counts.size() + col]; }
    std::size_t failures() const noexcept;
};

// Width of the worker pool: QUANTBSDE_THREADS when set and positive, otherwise the
// hardware concurrency.
std::size_t worker_threads();

// Every cell is solve(build_tree(model, n, N)).u0. Cells run concurrently on up to
// `threads` workers (0 = worker_threads()); a failing cell is recorded, not rethrown.
SweepResult run_sweep(const SweepSpec& spec, const rmq::OptimizerSettings& settings = {}, std::size_t threads = 0);

struct HedgeRow {
    std::size_t step;
    double codeword;
    double v_hat;
    double v_exact;
    double abs_err;
};

// One row per (step, codeword) of the requested steps, against the closed-form control.
// Rejects non-Black-Scholes problems and steps >= n.
std::vector<HedgeRow> hedge_compare(const bsde::BackwardSolution& solution, const FbsdeProblem& problem,
                                    const std::vector<std::size_t>& steps);

struct HedgeErrorSummary {
    std::size_t step = 0;
    double max_rel_central = 0.0;  // over codewords whose mid-rank lies in the central band
    double max_rel_atm = 0.0;      // over the two codewords bracketing the strike
    double max_abs = 0.0;          // over all codewords
    std::size_t central_nodes = 0;
};

HedgeErrorSummary hedge_error_summary(const bsde::BackwardSolution& solution, const FbsdeProblem& problem,
                                      std::size_t step, double central_mass = 0.9);

// Indices of codewords whose cumulative-weight mid-rank F_{j-} + w_j / 2 lies in
// [(1 - mass) / 2, (1 + mass) / 2].
std::vector<std::size_t> central_nodes(const rmq::QuantizedLayer& layer, double mass);

// Sweep CSV: header "quantizers,<n1>,<n2>,..." then one row per quantizer count, cells with
// four decimals or ERR.
void write_sweep_csv(std::ostream& os, const SweepResult& result);
void emit_csv(const SweepResult& result, const std::filesystem::path& path);

// Hedge CSV: step,codeword,v_hat,v_exact,abs_err.
void write_hedge_csv(std::ostream& os, const std::vector<HedgeRow>& rows);
void emit_csv(const std::vector<HedgeRow>& rows, const std::filesystem::path& path);

// Parse a sweep CSV written by write_sweep_csv; ERR cells come back empty.
SweepResult read_sweep_csv(std::istream& is);

// Full-precision sidecar with per-cell timings.
nlohmann::json to_json(const SweepResult& result, const SweepSpec& spec);

}  // namespace quantbsde::report
