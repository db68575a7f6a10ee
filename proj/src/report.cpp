#include "quantbsde/report.hpp"

#include "quantbsde/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace quantbsde::report {

namespace {

std::string fixed4(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

std::string full(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

const BlackScholesParams& require_black_scholes(const FbsdeProblem& problem) {
    const auto* p = std::get_if<BlackScholesParams>(&problem.params);
    if (!p) throw InvalidArgument("hedge comparison needs the black-scholes model, got '" + problem.name + "'");
    return *p;
}

template <class Rows>
void write_file(const std::filesystem::path& path, const Rows& rows, void (*writer)(std::ostream&, const Rows&)) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(os, rows);
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

void validate(const SweepSpec& spec) {
    for (auto n : spec.quantizer_counts) {
        if (n < 1) throw InvalidArgument("sweep: quantizer counts must be >= 1");
    }
    for (auto n : spec.step_counts) {
        if (n < 1) throw InvalidArgument("sweep: step counts must be >= 1");
    }
    if (!std::is_sorted(spec.quantizer_counts.begin(), spec.quantizer_counts.end()) ||
        !std::is_sorted(spec.step_counts.begin(), spec.step_counts.end())) {
        throw InvalidArgument("sweep: counts must be sorted");
    }
}

std::size_t SweepResult::failures() const noexcept {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.u0; }));
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("QUANTBSDE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult run_sweep(const SweepSpec& spec, const rmq::OptimizerSettings& settings, std::size_t threads) {
    validate(spec);
    const FbsdeProblem problem = make_problem(spec.model);
    SweepResult result{spec.quantizer_counts, spec.step_counts, {}};
    const std::size_t cols = spec.step_counts.size();
    const std::size_t total = spec.quantizer_counts.size() * cols;
    result.cells.resize(total);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < total; idx = next++) {
            SweepCell& cell = result.cells[idx];
            const auto start = std::chrono::steady_clock::now();
            try {
                const rmq::TimeGrid grid(spec.step_counts[idx % cols], problem.horizon);
                const auto tree = rmq::build_tree(problem, grid, spec.quantizer_counts[idx / cols], settings);
                cell.u0 = bsde::solve(tree, problem).u0;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    };
    const std::size_t width = std::min(threads == 0 ? worker_threads() : threads, std::max<std::size_t>(total, 1));
    if (width <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(width);
        for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    }
    return result;
}

std::vector<HedgeRow> hedge_compare(const bsde::BackwardSolution& solution, const FbsdeProblem& problem,
                                    const std::vector<std::size_t>& steps) {
    const auto& p = require_black_scholes(problem);
    if (!solution.tree) throw InvalidArgument("hedge comparison: solution has no tree");
    const auto& tree = *solution.tree;
    std::vector<HedgeRow> rows;
    for (auto k : steps) {
        if (k >= solution.control_layers.size()) {
            throw InvalidArgument("hedge comparison: step " + std::to_string(k) + " must be < n = " +
                                  std::to_string(solution.control_layers.size()));
        }
        const auto& layer = tree.layers[k];
        const double t = tree.time_grid.time(k);
        for (std::size_t j = 0; j < layer.size(); ++j) {
            const double v_hat = solution.control_layers[k].controls[j];
            const double v_exact = bs_control(p, t, problem.horizon, layer.codewords[j]);
            rows.push_back({k, layer.codewords[j], v_hat, v_exact, std::abs(v_hat - v_exact)});
        }
    }
    return rows;
}

std::vector<std::size_t> central_nodes(const rmq::QuantizedLayer& layer, double mass) {
    const double lo = 0.5 * (1.0 - mass), hi = 0.5 * (1.0 + mass);
    std::vector<std::size_t> out;
    double cum = 0.0;
    for (std::size_t j = 0; j < layer.size(); ++j) {
        const double mid = cum + 0.5 * layer.weights[j];
        cum += layer.weights[j];
        if (mid >= lo && mid <= hi) out.push_back(j);
    }
    return out;
}

HedgeErrorSummary hedge_error_summary(const bsde::BackwardSolution& solution, const FbsdeProblem& problem,
                                      std::size_t step, double central_mass) {
    const auto& p = require_black_scholes(problem);
    const auto rows = hedge_compare(solution, problem, {step});
    const auto& layer = solution.tree->layers[step];
    HedgeErrorSummary s;
    s.step = step;
    auto rel = [&](std::size_t j) { return rows[j].abs_err / std::abs(rows[j].v_exact); };
    for (const auto& r : rows) s.max_abs = std::max(s.max_abs, r.abs_err);
    const auto central = central_nodes(layer, central_mass);
    s.central_nodes = central.size();
    for (auto j : central) s.max_rel_central = std::max(s.max_rel_central, rel(j));
    const std::size_t above = static_cast<std::size_t>(
        std::lower_bound(layer.codewords.begin(), layer.codewords.end(), p.strike) - layer.codewords.begin());
    if (above > 0) s.max_rel_atm = std::max(s.max_rel_atm, rel(above - 1));
    if (above < layer.size()) s.max_rel_atm = std::max(s.max_rel_atm, rel(above));
    return s;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << "quantizers";
    for (auto n : result.step_counts) os << ',' << n;
    os << '\n';
    for (std::size_t r = 0; r < result.quantizer_counts.size(); ++r) {
        os << result.quantizer_counts[r];
        for (std::size_t c = 0; c < result.step_counts.size(); ++c) {
            const auto& cell = result.at(r, c);
            os << ',' << (cell.u0 ? fixed4(*cell.u0) : std::string("ERR"));
        }
        os << '\n';
    }
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
    write_file<SweepResult>(path, result, &write_sweep_csv);
}

void write_hedge_csv(std::ostream& os, const std::vector<HedgeRow>& rows) {
    os << "step,codeword,v_hat,v_exact,abs_err\n";
    for (const auto& r : rows) {
        os << r.step << ',' << full(r.codeword) << ',' << full(r.v_hat) << ',' << full(r.v_exact) << ','
           << full(r.abs_err) << '\n';
    }
}

void emit_csv(const std::vector<HedgeRow>& rows, const std::filesystem::path& path) {
    write_file<std::vector<HedgeRow>>(path, rows, &write_hedge_csv);
}

SweepResult read_sweep_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("sweep csv: missing header");
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "quantizers") throw InvalidArgument("sweep csv: bad header");
    SweepResult out;
    for (std::size_t c = 1; c < header.size(); ++c) out.step_counts.push_back(std::stoul(header[c]));
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) throw InvalidArgument("sweep csv: ragged row");
        out.quantizer_counts.push_back(std::stoul(fields[0]));
        for (std::size_t c = 1; c < fields.size(); ++c) {
            SweepCell cell;
            if (fields[c] == "ERR") {
                cell.error = "ERR";
            } else {
                cell.u0 = std::stod(fields[c]);
            }
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

nlohmann::json to_json(const SweepResult& result, const SweepSpec& spec) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t r = 0; r < result.quantizer_counts.size(); ++r) {
        for (std::size_t c = 0; c < result.step_counts.size(); ++c) {
            const auto& cell = result.at(r, c);
            nlohmann::json j{{"quantizers", result.quantizer_counts[r]},
                             {"steps", result.step_counts[c]},
                             {"seconds", cell.seconds}};
            j["u0"] = cell.u0 ? nlohmann::json(*cell.u0) : nlohmann::json(nullptr);
            if (!cell.error.empty()) j["error"] = cell.error;
            cells.push_back(std::move(j));
        }
    }
    return {{"model", spec.model.name},
            {"horizon", spec.model.horizon},
            {"y0", spec.model.y0},
            {"quantizer_counts", result.quantizer_counts},
            {"step_counts", result.step_counts},
            {"cells", std::move(cells)}};
}

}  // namespace quantbsde::report
