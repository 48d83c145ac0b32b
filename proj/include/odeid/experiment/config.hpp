#pragma once

// Experiment configuration: one YAML document describing the problem, the
// noise levels, the methods with their hyperparameters, seeds, output
// directory and evaluation settings. Every error names file:line:column.

#include "odeid/baselines/sindy.hpp"
#include "odeid/data/dataset.hpp"
#include "odeid/metrics.hpp"
#include "odeid/nn/adam.hpp"
#include "odeid/ode/integrate.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <variant>

namespace odeid::experiment {

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct NetSettings {
    std::vector<std::size_t> hidden{20, 20, 20};
    std::size_t epochs = 2000;
    double learning_rate = 1e-3;
    double decay = 1.0;
    double lrelu_slope = nn::kDefaultSlope;
    bool normalize_inputs = true;

    nn::AdamConfig adam() const {
        nn::AdamConfig a;
        a.learning_rate = learning_rate;
        a.decay = decay;
        return a;
    }
};

/// Interpolation-network settings shared by the ensemble and splines methods.
struct InterpSettings {
    NetSettings net;
    std::map<double, double> alpha_by_noise;  // exact noise level → α
    double alpha_default = 0.0;
    std::vector<double> alpha_grid;  // non-empty: select α under matched training MSE
    double cap_factor = 4.0;
    std::size_t lip_samples = 1000;
    bool resample_probes = true;

    double alpha_for(double noise) const {
        for (const auto& [level, a] : alpha_by_noise)
            if (std::abs(level - noise) <= 1e-12) return a;
        return alpha_default;
    }
};

struct EnsembleSettings {
    NetSettings generator;
    InterpSettings interpolation;
};

struct SplinesSettings {
    std::optional<double> lambda;  // empty: GCV
    InterpSettings interpolation;
};

struct MultistepSettings {
    NetSettings net;
};

/// Where regression baselines take their velocity samples from.
enum class TargetSource { Splines, Generator, FiniteDifference };

inline std::string to_string(TargetSource t) {
    switch (t) {
        case TargetSource::Splines: return "splines";
        case TargetSource::Generator: return "generator";
        case TargetSource::FiniteDifference: return "finite_difference";
    }
    return "?";
}

struct PolyfitSettings {
    int degree = 20;
    bool use_time = true;
    TargetSource targets = TargetSource::Splines;
    std::optional<double> spline_lambda;
};

struct SindySettings {
    baselines::LibrarySpec library;
    baselines::StlsqConfig stlsq;
    TargetSource targets = TargetSource::Splines;
    std::optional<double> spline_lambda;
};

using MethodParams = std::variant<EnsembleSettings, SplinesSettings, MultistepSettings, PolyfitSettings, SindySettings>;

struct MethodSettings {
    std::string name;  // ensemble | splines | multistep | polyfit | sindy
    MethodParams params;
};

struct ProblemSettings {
    std::string rhs;
    double t_start = 0.0;
    double t_end = 1.0;
    double dt = 0.04;
    std::size_t n_trajectories = 500;
    std::vector<std::pair<double, double>> ic_box;
    std::uint64_t ic_seed = 0;

    data::ProblemSpec to_problem() const {
        data::ProblemSpec p;
        p.rhs = ode::catalog_lookup(rhs);
        p.t_start = t_start;
        p.t_end = t_end;
        p.dt = dt;
        p.n_trajectories = n_trajectories;
        p.ic_box = ic_box;
        p.ic_seed = ic_seed;
        return p;
    }
};

struct NoiseSettings {
    std::vector<double> levels{0.0};
    data::NoiseScale scale = data::NoiseScale::StdDev;
    std::uint64_t seed = 0;
};

struct EvaluationSettings {
    metrics::GridSettings grid;
    std::optional<std::size_t> solution_ics;  // empty: every trajectory
    bool dump_grid = false;
};

struct ExperimentConfig {
    std::string name;
    std::filesystem::path source;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    ProblemSettings problem;
    ode::IntegratorConfig integrator;
    NoiseSettings noise;
    std::uint64_t split_seed = 0;
    EvaluationSettings evaluation;
    std::vector<MethodSettings> methods;

    const MethodSettings& method(const std::string& n) const {
        for (const auto& m : methods)
            if (m.name == n) return m;
        throw ConfigError(source.string() + ": method '" + n + "' is not configured");
    }
    bool has_noise_level(double level) const {
        return std::any_of(noise.levels.begin(), noise.levels.end(),
                           [&](double l) { return std::abs(l - level) <= 1e-12; });
    }
    /// Seed of a training run, stable under reordering of methods.
    std::uint64_t method_seed(const std::string& method_name) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (char c : method_name) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001B3ULL;
        return hash_seed(seed, h);
    }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

/// A mapping node whose keys are checked off as they are read; `finish`
/// rejects anything left over.
class Section {
public:
    Section(YAML::Node node, std::string file, std::string path) : node_(std::move(node)), file_(std::move(file)), path_(std::move(path)) {
        if (!node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
    }

    std::string where(const YAML::Node& n) const {
        const YAML::Mark m = n.Mark();
        if (m.line < 0) return file_;
        return file_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    }

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const { throw ConfigError(where(n) + ": " + msg); }

    bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

    YAML::Node raw(const std::string& key) {
        used_.insert(key);
        return node_[key];
    }

    template <typename T>
    T get(const std::string& key) {
        const YAML::Node n = raw(key);
        if (!n) fail(node_, "missing key '" + qualified(key) + "'");
        return convert<T>(n, key);
    }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        const YAML::Node n = raw(key);
        if (!n) return fallback;
        return convert<T>(n, key);
    }

    template <typename T>
    T convert(const YAML::Node& n, const std::string& key) const {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "'" + qualified(key) + "' has the wrong type");
        }
    }

    Section child(const std::string& key) {
        const YAML::Node n = raw(key);
        if (!n) fail(node_, "missing section '" + qualified(key) + "'");
        return Section(n, file_, qualified(key));
    }

    std::optional<Section> optional_child(const std::string& key) {
        const YAML::Node n = raw(key);
        if (!n) return std::nullopt;
        return Section(n, file_, qualified(key));
    }

    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!used_.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
        }
    }

    const YAML::Node& node() const { return node_; }
    const std::string& file() const { return file_; }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    YAML::Node node_;
    std::string file_;
    std::string path_;
    std::set<std::string> used_;
};

inline std::vector<std::size_t> parse_hidden(Section& s, std::size_t default_depth, std::size_t default_width) {
    if (s.has("hidden")) {
        if (s.has("layers") || s.has("width")) s.fail(s.node(), "use either 'hidden' or 'layers'/'width', not both");
        const YAML::Node n = s.raw("hidden");
        auto h = s.convert<std::vector<std::size_t>>(n, "hidden");
        if (h.empty()) s.fail(n, "'hidden' must list at least one width");
        for (auto w : h)
            if (w == 0) s.fail(n, "hidden widths must be positive");
        return h;
    }
    const auto depth = s.get<std::size_t>("layers", default_depth);
    const auto width = s.get<std::size_t>("width", default_width);
    if (depth == 0 || width == 0) s.fail(s.node(), "'layers' and 'width' must be positive");
    return nn::uniform_widths(depth, width);
}

inline NetSettings parse_net(Section& s, const NetSettings& defaults) {
    NetSettings n = defaults;
    n.hidden = parse_hidden(s, defaults.hidden.size(), defaults.hidden.front());
    n.epochs = s.get<std::size_t>("epochs", defaults.epochs);
    n.learning_rate = s.get<double>("learning_rate", defaults.learning_rate);
    n.decay = s.get<double>("decay", defaults.decay);
    n.lrelu_slope = s.get<double>("lrelu_slope", defaults.lrelu_slope);
    n.normalize_inputs = s.get<bool>("normalize_inputs", defaults.normalize_inputs);
    if (n.epochs == 0) s.fail(s.node(), "'epochs' must be positive");
    if (!(n.learning_rate > 0.0)) s.fail(s.node(), "'learning_rate' must be positive");
    if (!(n.decay > 0.0 && n.decay <= 1.0)) s.fail(s.node(), "'decay' must lie in (0, 1]");
    if (!(n.lrelu_slope > 0.0 && n.lrelu_slope < 1.0)) s.fail(s.node(), "'lrelu_slope' must lie in (0, 1)");
    return n;
}

inline InterpSettings parse_interp(Section& s) {
    InterpSettings i;
    NetSettings d;
    d.hidden = nn::uniform_widths(8, 20);
    i.net = parse_net(s, d);
    if (s.has("alpha")) {
        const YAML::Node a = s.raw("alpha");
        if (a.IsMap()) {
            for (const auto& kv : a) {
                const auto key = kv.first.as<std::string>();
                const double v = s.convert<double>(kv.second, "alpha");
                if (v < 0.0) s.fail(kv.second, "alpha must be non-negative");
                if (key == "default") {
                    i.alpha_default = v;
                } else {
                    i.alpha_by_noise[s.convert<double>(kv.first, "alpha")] = v;
                }
            }
        } else {
            i.alpha_default = s.convert<double>(a, "alpha");
            if (i.alpha_default < 0.0) s.fail(a, "alpha must be non-negative");
        }
    }
    if (s.has("alpha_grid")) {
        const YAML::Node g = s.raw("alpha_grid");
        i.alpha_grid = s.convert<std::vector<double>>(g, "alpha_grid");
        for (double v : i.alpha_grid)
            if (v < 0.0) s.fail(g, "alpha_grid entries must be non-negative");
    }
    i.cap_factor = s.get<double>("cap_factor", i.cap_factor);
    i.lip_samples = s.get<std::size_t>("lip_samples", i.lip_samples);
    i.resample_probes = s.get<bool>("resample_probes", i.resample_probes);
    if (i.lip_samples == 0) s.fail(s.node(), "'lip_samples' must be positive");
    if (i.cap_factor < 1.0) s.fail(s.node(), "'cap_factor' must be at least 1");
    return i;
}

inline std::optional<double> parse_lambda(Section& s, const std::string& key) {
    if (!s.has(key)) return std::nullopt;
    const YAML::Node n = s.raw(key);
    if (n.IsScalar() && n.Scalar() == "gcv") return std::nullopt;
    const double v = s.convert<double>(n, key);
    if (v < 0.0) s.fail(n, "'" + key + "' must be non-negative or 'gcv'");
    return v;
}

inline TargetSource parse_targets(Section& s) {
    if (!s.has("targets")) return TargetSource::Splines;
    const YAML::Node n = s.raw("targets");
    const auto v = s.convert<std::string>(n, "targets");
    if (v == "splines") return TargetSource::Splines;
    if (v == "generator") return TargetSource::Generator;
    if (v == "finite_difference") return TargetSource::FiniteDifference;
    s.fail(n, "'targets' must be splines | generator | finite_difference");
}

inline MethodSettings parse_method(const YAML::Node& node, const std::string& file, std::size_t index) {
    Section s(node, file, "methods[" + std::to_string(index) + "]");
    MethodSettings m;
    const YAML::Node name_node = s.raw("name");
    if (!name_node) s.fail(node, "method entry needs a 'name'");
    m.name = s.convert<std::string>(name_node, "name");
    if (m.name == "ensemble") {
        EnsembleSettings e;
        NetSettings g;
        g.hidden = nn::uniform_widths(3, 10);
        auto gs = s.child("generator");
        e.generator = parse_net(gs, g);
        gs.finish();
        auto is = s.child("interpolation");
        e.interpolation = parse_interp(is);
        is.finish();
        m.params = e;
    } else if (m.name == "splines") {
        SplinesSettings p;
        p.lambda = parse_lambda(s, "lambda");
        auto is = s.child("interpolation");
        p.interpolation = parse_interp(is);
        is.finish();
        m.params = p;
    } else if (m.name == "multistep") {
        MultistepSettings p;
        NetSettings d;
        d.hidden = nn::uniform_widths(8, 20);
        auto ns = s.child("network");
        p.net = parse_net(ns, d);
        ns.finish();
        m.params = p;
    } else if (m.name == "polyfit") {
        PolyfitSettings p;
        const YAML::Node deg = s.raw("degree");
        p.degree = deg ? s.convert<int>(deg, "degree") : p.degree;
        if (p.degree < 0) s.fail(deg, "'degree' must be non-negative");
        p.use_time = s.get<bool>("use_time", p.use_time);
        p.targets = parse_targets(s);
        p.spline_lambda = parse_lambda(s, "spline_lambda");
        m.params = p;
    } else if (m.name == "sindy") {
        SindySettings p;
        auto ls = s.child("library");
        p.library.polynomial_degree = ls.get<int>("polynomial_degree", p.library.polynomial_degree);
        p.library.functions = ls.get<std::vector<std::string>>("functions", p.library.functions);
        p.library.frequencies = ls.get<std::vector<double>>("frequencies", p.library.frequencies);
        p.library.include_time = ls.get<bool>("include_time", p.library.include_time);
        if (p.library.polynomial_degree < 0) ls.fail(ls.node(), "'polynomial_degree' must be non-negative");
        try {
            p.library.validate();
        } catch (const InvalidArgument& e) {
            ls.fail(ls.node(), e.what());
        }
        if (p.library.polynomial_degree == 0 && p.library.functions.empty() && !p.library.include_time)
            ls.fail(ls.node(), "library is empty");
        ls.finish();
        const YAML::Node th = s.raw("threshold");
        p.stlsq.threshold = th ? s.convert<double>(th, "threshold") : p.stlsq.threshold;
        if (!(p.stlsq.threshold > 0.0)) s.fail(th ? th : node, "'threshold' must be positive");
        p.stlsq.max_iters = s.get<std::size_t>("max_iters", p.stlsq.max_iters);
        if (p.stlsq.max_iters == 0) s.fail(node, "'max_iters' must be positive");
        p.stlsq.ridge = s.get<double>("ridge", p.stlsq.ridge);
        if (p.stlsq.ridge < 0.0) s.fail(node, "'ridge' must be non-negative");
        p.targets = parse_targets(s);
        p.spline_lambda = parse_lambda(s, "spline_lambda");
        m.params = p;
    } else {
        s.fail(name_node, "unknown method '" + m.name + "' (expected ensemble | splines | multistep | polyfit | sindy)");
    }
    s.finish();
    return m;
}

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root, const std::string& file) {
    if (!root || root.IsNull()) throw ConfigError(file + ": empty configuration");
    detail::Section s(root, file, "");
    ExperimentConfig c;
    c.source = file;
    c.name = s.get<std::string>("name");
    c.seed = s.get<std::uint64_t>("seed", 0);
    c.output_dir = s.get<std::string>("output_dir", "runs/" + c.name);

    {
        auto p = s.child("problem");
        const YAML::Node rhs = p.raw("rhs");
        if (!rhs) p.fail(p.node(), "missing key 'problem.rhs'");
        c.problem.rhs = p.convert<std::string>(rhs, "rhs");
        if (!ode::Catalog::instance().contains(c.problem.rhs)) p.fail(rhs, "unknown RHS label '" + c.problem.rhs + "'");
        c.problem.t_start = p.get<double>("t_start", 0.0);
        c.problem.t_end = p.get<double>("t_end");
        c.problem.dt = p.get<double>("dt");
        c.problem.n_trajectories = p.get<std::size_t>("n_trajectories");
        const YAML::Node box = p.raw("ic_box");
        if (!box) p.fail(p.node(), "missing key 'problem.ic_box'");
        for (const auto& iv : p.convert<std::vector<std::vector<double>>>(box, "ic_box")) {
            if (iv.size() != 2) p.fail(box, "each ic_box entry must be [low, high]");
            c.problem.ic_box.emplace_back(iv[0], iv[1]);
        }
        c.problem.ic_seed = p.get<std::uint64_t>("ic_seed", hash_seed(c.seed, 0x1C));
        try {
            c.problem.to_problem().validate();
        } catch (const InvalidArgument& e) {
            p.fail(p.node(), e.what());
        }
        p.finish();
    }

    if (auto in = s.optional_child("integrator")) {
        const YAML::Node m = in->raw("method");
        if (m) {
            try {
                c.integrator.method = ode::method_from_string(in->convert<std::string>(m, "method"));
            } catch (const InvalidArgument& e) {
                in->fail(m, e.what());
            }
        }
        c.integrator.abs_tol = in->get<double>("abs_tol", c.integrator.abs_tol);
        c.integrator.rel_tol = in->get<double>("rel_tol", c.integrator.rel_tol);
        c.integrator.max_step = in->get<double>("max_step", c.integrator.max_step);
        c.integrator.state_bound = in->get<double>("state_bound", c.integrator.state_bound);
        try {
            c.integrator.validate();
        } catch (const InvalidArgument& e) {
            in->fail(in->node(), e.what());
        }
        in->finish();
    }

    if (auto n = s.optional_child("noise")) {
        const YAML::Node lv = n->raw("levels");
        if (lv) c.noise.levels = n->convert<std::vector<double>>(lv, "levels");
        if (c.noise.levels.empty()) n->fail(lv ? lv : n->node(), "'noise.levels' must not be empty");
        for (double l : c.noise.levels)
            if (!(l >= 0.0 && l <= 0.10)) n->fail(lv, "noise levels must lie in [0, 0.10]");
        const YAML::Node sc = n->raw("scale");
        if (sc) {
            try {
                c.noise.scale = data::noise_scale_from_string(n->convert<std::string>(sc, "scale"));
            } catch (const InvalidArgument& e) {
                n->fail(sc, e.what());
            }
        }
        c.noise.seed = n->get<std::uint64_t>("seed", hash_seed(c.seed, 0x401));
        n->finish();
    } else {
        c.noise.seed = hash_seed(c.seed, 0x401);
    }
    c.split_seed = s.get<std::uint64_t>("split_seed", hash_seed(c.seed, 0x5B1));

    if (auto e = s.optional_child("evaluation")) {
        auto& g = c.evaluation.grid;
        g.points_per_dim = e->get<std::size_t>("points_per_dim", g.points_per_dim);
        g.max_points = e->get<std::size_t>("max_points", g.max_points);
        if (g.points_per_dim < 2) e->fail(e->node(), "'points_per_dim' must be at least 2");
        const YAML::Node ta = e->raw("time_axis");
        if (ta) {
            try {
                g.time_axis = metrics::time_axis_from_string(e->convert<std::string>(ta, "time_axis"));
            } catch (const InvalidArgument& ex) {
                e->fail(ta, ex.what());
            }
        }
        const YAML::Node xr = e->raw("x_range");
        if (xr) {
            try {
                g.x_range = metrics::x_range_from_string(e->convert<std::string>(xr, "x_range"));
            } catch (const InvalidArgument& ex) {
                e->fail(xr, ex.what());
            }
        }
        if (e->has("solution_ics")) {
            const auto n = e->get<std::size_t>("solution_ics");
            if (n == 0) e->fail(e->node(), "'solution_ics' must be positive");
            c.evaluation.solution_ics = n;
        }
        c.evaluation.dump_grid = e->get<bool>("dump_grid", false);
        e->finish();
    }

    const YAML::Node ms = s.raw("methods");
    if (!ms || !ms.IsSequence() || ms.size() == 0) s.fail(ms ? ms : root, "'methods' must be a non-empty list");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        MethodSettings m = detail::parse_method(ms[i], file, i);
        if (!seen.insert(m.name).second) s.fail(ms[i], "method '" + m.name + "' listed twice");
        c.methods.push_back(std::move(m));
    }
    s.finish();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError(path.string() + ": cannot read configuration file");
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path.string() + ":" + std::to_string(e.mark.line + 1) + ":" +
                          std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    return parse_config(root, path.string());
}

inline ExperimentConfig config_from_string(const std::string& text, const std::string& name = "<string>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(name + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    return parse_config(root, name);
}

}  // namespace odeid::experiment
