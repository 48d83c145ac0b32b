#pragma once

#include "odeid/nn/mlp.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace odeid::nn {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json vec_to_json(const Vec& v) {
    auto a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec vec_from_json(const nlohmann::json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

}  // namespace detail

inline nlohmann::json to_json(const MlpSpec& s) {
    return {{"input_dim", s.input_dim},
            {"output_dim", s.output_dim},
            {"hidden_widths", s.hidden_widths},
            {"lrelu_slope", s.lrelu_slope},
            {"seed", s.seed}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
    MlpSpec s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.output_dim = j.at("output_dim").get<std::size_t>();
    s.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
    s.lrelu_slope = j.at("lrelu_slope").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

/// Weights are stored row-major: one JSON array per matrix row.
inline nlohmann::json to_json(const MlpModel& m) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["spec"] = to_json(m.spec);
    auto ws = nlohmann::json::array();
    for (const auto& w : m.params.weights) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r) rows.push_back(detail::vec_to_json(w.row(r).transpose()));
        ws.push_back(std::move(rows));
    }
    j["weights"] = std::move(ws);
    auto bs = nlohmann::json::array();
    for (const auto& b : m.params.biases) bs.push_back(detail::vec_to_json(b));
    j["biases"] = std::move(bs);
    j["input_shift"] = detail::vec_to_json(m.input_shift);
    j["input_scale"] = detail::vec_to_json(m.input_scale);
    return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
        throw InvalidArgument("unsupported model format_version " + std::to_string(version));
    MlpModel m;
    m.spec = spec_from_json(j.at("spec"));
    for (const auto& rows : j.at("weights")) {
        const auto r = static_cast<Eigen::Index>(rows.size());
        const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
        Mat w(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (static_cast<Eigen::Index>(row.size()) != c) throw DimensionMismatch("ragged weight matrix");
            for (Eigen::Index k = 0; k < c; ++k) w(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
        m.params.weights.push_back(std::move(w));
    }
    for (const auto& b : j.at("biases")) m.params.biases.push_back(detail::vec_from_json(b));
    if (j.contains("input_shift")) m.input_shift = detail::vec_from_json(j.at("input_shift"));
    if (j.contains("input_scale")) m.input_scale = detail::vec_from_json(j.at("input_scale"));
    validate_model(m);
    return m;
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    f << j.dump(1) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw Error("cannot read " + p.string());
    return nlohmann::json::parse(f);
}

inline void save_model(const std::filesystem::path& p, const MlpModel& m) { write_json_file(p, to_json(m)); }
inline MlpModel load_model(const std::filesystem::path& p) { return model_from_json(read_json_file(p)); }

}  // namespace odeid::nn
