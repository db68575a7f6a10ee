#include "quantbsde/serialization.hpp"

#include "quantbsde/error.hpp"

#include <cmath>
#include <fstream>

namespace quantbsde::io {

using nlohmann::json;

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kRowTol = 1e-10;

[[noreturn]] void fail(const std::string& what) {
    throw IoError("tree document: " + what);
}

const json& member(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) fail(std::string("missing field '") + key + "'");
    return obj.at(key);
}

template <class T>
T field(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) fail(std::string("missing field '") + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(std::string("field '") + key + "': " + e.what());
    }
}

void check_layer(const rmq::QuantizedLayer& layer) {
    if (layer.codewords.empty() || layer.codewords.size() != layer.weights.size()) {
        fail("layer " + std::to_string(layer.step) + " has inconsistent sizes");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < layer.size(); ++j) {
        if (j > 0 && !(layer.codewords[j - 1] < layer.codewords[j])) {
            fail("layer " + std::to_string(layer.step) + " codewords not strictly increasing");
        }
        if (!(layer.weights[j] >= 0.0)) fail("layer " + std::to_string(layer.step) + " has a negative weight");
        sum += layer.weights[j];
    }
    if (!(std::abs(sum - 1.0) <= kWeightTol)) fail("layer " + std::to_string(layer.step) + " weights do not sum to 1");
}

void check_transition(const rmq::TransitionMatrix& tm) {
    if (tm.entries.size() != tm.rows * tm.cols) fail("transition " + std::to_string(tm.step) + " has wrong size");
    for (std::size_t i = 0; i < tm.rows; ++i) {
        double sum = 0.0;
        for (double p : tm.row(i)) {
            if (!(p >= 0.0 && p <= 1.0)) fail("transition " + std::to_string(tm.step) + " entry outside [0, 1]");
            sum += p;
        }
        if (!(std::abs(sum - 1.0) <= kRowTol)) fail("transition " + std::to_string(tm.step) + " row does not sum to 1");
    }
}

}  // namespace

json to_json(const rmq::QuantizationTree& tree, const bsde::BackwardSolution* solution, const json& meta) {
    json doc;
    doc["format"] = kTreeFormat;
    doc["version"] = kTreeVersion;
    doc["meta"] = meta;
    doc["time_grid"] = {{"steps", tree.time_grid.steps()}, {"horizon", tree.time_grid.horizon()}};
    doc["floored_nodes"] = tree.floored_nodes;
    json layers = json::array();
    for (const auto& l : tree.layers) {
        layers.push_back({{"step", l.step}, {"codewords", l.codewords}, {"weights", l.weights},
                          {"distortion", l.distortion}});
    }
    doc["layers"] = std::move(layers);
    json transitions = json::array();
    for (const auto& t : tree.transitions) {
        transitions.push_back({{"step", t.step}, {"rows", t.rows}, {"cols", t.cols}, {"entries", t.entries}});
    }
    doc["transitions"] = std::move(transitions);
    if (solution) {
        json values = json::array(), controls = json::array();
        for (const auto& v : solution->value_layers) values.push_back(v.values);
        for (const auto& c : solution->control_layers) controls.push_back(c.controls);
        doc["solution"] = {{"u0", solution->u0}, {"values", std::move(values)}, {"controls", std::move(controls)}};
    }
    return doc;
}

TreeDocument document_from_json(const json& doc) {
    if (field<std::string>(doc, "format") != kTreeFormat) fail("unexpected format tag");
    const int version = field<int>(doc, "version");
    if (version != kTreeVersion) fail("unsupported version " + std::to_string(version));

    const json& tg = member(doc, "time_grid");
    const auto steps = field<std::size_t>(tg, "steps");
    const auto horizon = field<double>(tg, "horizon");
    if (steps < 1 || !(horizon > 0.0)) fail("time grid needs steps >= 1 and horizon > 0");
    rmq::TimeGrid grid(steps, horizon);
    TreeDocument out{rmq::QuantizationTree{grid, {}, {}, 0}, std::nullopt, doc.value("meta", json::object())};
    out.tree.floored_nodes = doc.value("floored_nodes", std::size_t{0});

    const json& layers = member(doc, "layers");
    const json& transitions = member(doc, "transitions");
    if (!layers.is_array() || layers.size() != grid.steps() + 1) fail("expected steps + 1 layers");
    if (!transitions.is_array() || transitions.size() != grid.steps()) fail("expected steps transitions");

    for (std::size_t k = 0; k < layers.size(); ++k) {
        rmq::QuantizedLayer l;
        l.step = field<std::size_t>(layers[k], "step");
        l.codewords = field<std::vector<double>>(layers[k], "codewords");
        l.weights = field<std::vector<double>>(layers[k], "weights");
        l.distortion = field<double>(layers[k], "distortion");
        if (l.step != k) fail("layer " + std::to_string(k) + " carries step " + std::to_string(l.step));
        check_layer(l);
        out.tree.layers.push_back(std::move(l));
    }
    if (out.tree.layers.front().size() != 1) fail("layer 0 must be a single start node");

    for (std::size_t k = 0; k < transitions.size(); ++k) {
        rmq::TransitionMatrix t;
        t.step = field<std::size_t>(transitions[k], "step");
        t.rows = field<std::size_t>(transitions[k], "rows");
        t.cols = field<std::size_t>(transitions[k], "cols");
        t.entries = field<std::vector<double>>(transitions[k], "entries");
        if (t.step != k || t.rows != out.tree.layers[k].size() || t.cols != out.tree.layers[k + 1].size()) {
            fail("transition " + std::to_string(k) + " shape does not match adjacent layers");
        }
        check_transition(t);
        out.tree.transitions.push_back(std::move(t));
    }

    if (doc.contains("solution")) {
        const json& s = member(doc, "solution");
        StoredSolution sol;
        sol.u0 = field<double>(s, "u0");
        sol.values = field<std::vector<std::vector<double>>>(s, "values");
        sol.controls = field<std::vector<std::vector<double>>>(s, "controls");
        if (sol.values.size() != grid.steps() + 1 || sol.controls.size() != grid.steps()) {
            fail("solution arrays do not match the time grid");
        }
        for (std::size_t k = 0; k < sol.values.size(); ++k) {
            if (sol.values[k].size() != out.tree.layers[k].size()) fail("solution value layer size mismatch");
            if (k < sol.controls.size() && sol.controls[k].size() != out.tree.layers[k].size()) {
                fail("solution control layer size mismatch");
            }
        }
        out.solution = std::move(sol);
    }
    return out;
}

void write_tree(const std::filesystem::path& path, const rmq::QuantizationTree& tree,
                const bsde::BackwardSolution* solution, const json& meta) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << to_json(tree, solution, meta).dump() << '\n';
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

TreeDocument read_tree(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return document_from_json(doc);
}

}  // namespace quantbsde::io
