#pragma once

// Dataset files: a CSV with one row per (trajectory, time sample)
//
//   traj_id,t,x1..xd[,clean_x1..clean_xd]
//
// plus a JSON sidecar carrying the problem description, seeds and noise level.
// Values are written with 17 significant digits so reading back is bit-exact.

#include "odeid/data/dataset.hpp"
#include "odeid/nn/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace odeid::data {

inline constexpr int kDatasetFormatVersion = 1;

/// Metadata written next to a dataset CSV.
struct DatasetSidecar {
    std::string problem_label;
    double t_start = 0.0;
    double t_end = 0.0;
    double dt = 0.0;
    std::size_t n_trajectories = 0;
    std::size_t num_times = 0;
    std::size_t dim = 0;
    std::vector<std::pair<double, double>> ic_box;
    std::uint64_t ic_seed = 0;
    double noise_level = 0.0;
    std::uint64_t noise_seed = 0;
    std::string noise_scale = "std";
    bool has_clean = false;
};

inline nlohmann::json to_json(const DatasetSidecar& s) {
    auto box = nlohmann::json::array();
    for (const auto& [lo, hi] : s.ic_box) box.push_back({lo, hi});
    return {{"format_version", kDatasetFormatVersion},
            {"problem", {{"rhs", s.problem_label},
                         {"t_start", s.t_start},
                         {"t_end", s.t_end},
                         {"dt", s.dt},
                         {"n_trajectories", s.n_trajectories},
                         {"ic_box", box},
                         {"ic_seed", s.ic_seed}}},
            {"num_times", s.num_times},
            {"dim", s.dim},
            {"noise", {{"level", s.noise_level}, {"seed", s.noise_seed}, {"scale", s.noise_scale}}},
            {"has_clean", s.has_clean}};
}

inline DatasetSidecar sidecar_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kDatasetFormatVersion)
        throw InvalidArgument("unsupported dataset format_version");
    DatasetSidecar s;
    const auto& p = j.at("problem");
    s.problem_label = p.at("rhs").get<std::string>();
    s.t_start = p.at("t_start").get<double>();
    s.t_end = p.at("t_end").get<double>();
    s.dt = p.at("dt").get<double>();
    s.n_trajectories = p.at("n_trajectories").get<std::size_t>();
    for (const auto& iv : p.at("ic_box")) s.ic_box.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
    s.ic_seed = p.at("ic_seed").get<std::uint64_t>();
    s.num_times = j.at("num_times").get<std::size_t>();
    s.dim = j.at("dim").get<std::size_t>();
    const auto& n = j.at("noise");
    s.noise_level = n.at("level").get<double>();
    s.noise_seed = n.at("seed").get<std::uint64_t>();
    s.noise_scale = n.at("scale").get<std::string>();
    s.has_clean = j.at("has_clean").get<bool>();
    return s;
}

inline DatasetSidecar make_sidecar(const TrajectoryDataset& ds, const ProblemSpec* problem,
                                   const std::string& noise_scale = "std") {
    DatasetSidecar s;
    s.problem_label = ds.problem_label;
    s.num_times = ds.num_times();
    s.dim = ds.dim();
    s.n_trajectories = ds.num_trajectories();
    s.t_start = ds.times.front();
    s.t_end = ds.times.back();
    s.dt = ds.dt();
    if (problem) {
        s.t_start = problem->t_start;
        s.t_end = problem->t_end;
        s.dt = problem->dt;
        s.ic_box = problem->ic_box;
        s.ic_seed = problem->ic_seed;
    }
    s.noise_level = ds.noise_level;
    s.noise_seed = ds.seed;
    s.noise_scale = noise_scale;
    s.has_clean = ds.clean_states.has_value();
    return s;
}

namespace detail {

inline void put_double(std::string& line, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    line.append(buf, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    // from_chars for double is available in libstdc++ 11
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InvalidArgument("dataset CSV line " + std::to_string(line_no) + ": cannot parse number '" +
                              std::string(s) + "'");
    return v;
}

}  // namespace detail

inline void write_dataset_csv(std::ostream& os, const TrajectoryDataset& ds) {
    const std::size_t K = ds.num_trajectories(), M = ds.num_times(), d = ds.dim();
    const bool clean = ds.clean_states.has_value();
    std::string line = "traj_id,t";
    for (std::size_t k = 1; k <= d; ++k) line += ",x" + std::to_string(k);
    if (clean)
        for (std::size_t k = 1; k <= d; ++k) line += ",clean_x" + std::to_string(k);
    os << line << '\n';
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            line = std::to_string(i);
            line += ',';
            detail::put_double(line, ds.times[j]);
            for (std::size_t k = 0; k < d; ++k) {
                line += ',';
                detail::put_double(line, ds.states(i, j, k));
            }
            if (clean)
                for (std::size_t k = 0; k < d; ++k) {
                    line += ',';
                    detail::put_double(line, (*ds.clean_states)(i, j, k));
                }
            os << line << '\n';
        }
}

/// Parse a dataset CSV. Rows must be grouped by trajectory with the same time
/// grid for every trajectory.
inline TrajectoryDataset read_dataset_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw InvalidArgument("dataset CSV is empty");
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    if (cols.size() < 3 || cols[0] != "traj_id" || cols[1] != "t")
        throw InvalidArgument("dataset CSV header must start with traj_id,t");
    std::size_t d = 0;
    while (2 + d < cols.size() && cols[2 + d] == "x" + std::to_string(d + 1)) ++d;
    const std::size_t extra = cols.size() - 2 - d;
    if (d == 0 || (extra != 0 && extra != d)) throw InvalidArgument("dataset CSV header has unexpected columns");
    const bool clean = extra == d;

    std::vector<long> traj;
    std::vector<double> t;
    std::vector<double> vals;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t pos = 0, field = 0;
        while (pos <= line.size()) {
            const std::size_t end = std::min(line.find(',', pos), line.size());
            const std::string_view tok(line.data() + pos, end - pos);
            if (field == 0) {
                traj.push_back(static_cast<long>(detail::parse_double(tok, line_no)));
            } else if (field == 1) {
                t.push_back(detail::parse_double(tok, line_no));
            } else {
                vals.push_back(detail::parse_double(tok, line_no));
            }
            ++field;
            pos = end + 1;
        }
        if (field != cols.size())
            throw InvalidArgument("dataset CSV line " + std::to_string(line_no) + ": wrong field count");
    }
    if (traj.empty()) throw InvalidArgument("dataset CSV has no rows");
    std::size_t M = 0;
    while (M < traj.size() && traj[M] == traj[0]) ++M;
    if (traj.size() % M != 0) throw InvalidArgument("dataset CSV trajectories have unequal lengths");
    const std::size_t K = traj.size() / M;
    const std::size_t width = clean ? 2 * d : d;

    TrajectoryDataset ds;
    ds.times.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(M));
    ds.states = Tensor3(K, M, d);
    if (clean) ds.clean_states = Tensor3(K, M, d);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            const std::size_t r = i * M + j;
            if (traj[r] != traj[i * M] || t[r] != ds.times[j])
                throw InvalidArgument("dataset CSV rows are not grouped on a shared time grid");
            for (std::size_t k = 0; k < d; ++k) {
                ds.states(i, j, k) = vals[r * width + k];
                if (clean) (*ds.clean_states)(i, j, k) = vals[r * width + d + k];
            }
        }
    return ds;
}

struct DatasetFiles {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
};

inline DatasetFiles dataset_paths(const std::filesystem::path& stem) {
    return {std::filesystem::path(stem.string() + ".csv"), std::filesystem::path(stem.string() + ".json")};
}

inline void save_dataset(const std::filesystem::path& stem, const TrajectoryDataset& ds, const DatasetSidecar& meta) {
    const auto files = dataset_paths(stem);
    if (files.csv.has_parent_path()) std::filesystem::create_directories(files.csv.parent_path());
    std::ofstream f(files.csv);
    if (!f) throw Error("cannot write " + files.csv.string());
    write_dataset_csv(f, ds);
    nn::write_json_file(files.sidecar, to_json(meta));
}

inline std::pair<TrajectoryDataset, DatasetSidecar> load_dataset(const std::filesystem::path& stem) {
    const auto files = dataset_paths(stem);
    std::ifstream f(files.csv);
    if (!f) throw Error("cannot read " + files.csv.string());
    TrajectoryDataset ds = read_dataset_csv(f);
    DatasetSidecar meta = sidecar_from_json(nn::read_json_file(files.sidecar));
    ds.problem_label = meta.problem_label;
    ds.noise_level = meta.noise_level;
    ds.seed = meta.noise_seed;
    if (ds.dim() != meta.dim || ds.num_times() != meta.num_times)
        throw InvalidArgument("dataset CSV does not match its sidecar");
    return {std::move(ds), std::move(meta)};
}

}  // namespace odeid::data
