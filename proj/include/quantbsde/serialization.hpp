#pragma once

#include "quantbsde/bsde_solver.hpp"
#include "quantbsde/rmq.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace quantbsde::io {

inline constexpr const char* kTreeFormat = "quantbsde-rmq";
inline constexpr int kTreeVersion = 1;
inline constexpr const char* kTreeExtension = ".rmq.json";

// Value and control arrays without the tree back-reference.
struct StoredSolution {
    double u0 = 0.0;
    std::vector<std::vector<double>> values;    // n + 1 layers
    std::vector<std::vector<double>> controls;  // n layers
};

struct TreeDocument {
    rmq::QuantizationTree tree;
    std::optional<StoredSolution> solution;
    nlohmann::json meta;  // free-form provenance: model, parameters, grid sizes
};

nlohmann::json to_json(const rmq::QuantizationTree& tree, const bsde::BackwardSolution* solution = nullptr,
                       const nlohmann::json& meta = nlohmann::json::object());

// Validates format tag, version, shapes and the layer/transition invariants.
TreeDocument document_from_json(const nlohmann::json& doc);

void write_tree(const std::filesystem::path& path, const rmq::QuantizationTree& tree,
                const bsde::BackwardSolution* solution = nullptr,
                const nlohmann::json& meta = nlohmann::json::object());

TreeDocument read_tree(const std::filesystem::path& path);

}  // namespace quantbsde::io
