// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits 0 once every criterion has been reported; a failing criterion is a
// result, not a crash.
//
//   acceptance --work-dir DIR [--only 1,3,7]

#include "odeid/experiment/runner.hpp"
#include "odeid/runtime.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace odeid;
using namespace odeid::experiment;

namespace {

// Pinned tolerances (percent unless noted).
namespace tol {
constexpr double c1_recovery = 0.5;
constexpr double c1_solution = 0.1;
constexpr double c1_seconds = 600.0;
constexpr double c2_gap_ratio = 0.5;
constexpr double c3_recovery_clean = 0.2;
constexpr double c3_recovery_noisy = 2.0;
constexpr double c3_solution_noisy = 0.3;
constexpr double c4_ensemble = 1.0;
constexpr double c4_splines = 5.0;
constexpr double c4_separation = 5.0;
constexpr double c5_ratio = 0.5;
constexpr double c6_sindy_clean = 1e-3;
constexpr double c7_seconds = 120.0;
}  // namespace tol

struct Outcome {
    bool pass = false;
    std::string detail;
};

const fs::path kConfigs = ODEID_CONFIG_DIR;
const fs::path kTestBin = ODEID_TEST_BIN_DIR;
const std::string kCli = ODEID_CLI_PATH;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string pct(double v) { return metrics::percent(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Problem {
    ExperimentConfig cfg;
    Layout layout;
};

// Fresh output tree for one golden config.
Problem prepare(const std::string& config, const fs::path& root) {
    fs::remove_all(root);
    RunOptions opt;
    opt.out = root;
    Problem p{load_with_overrides(kConfigs / config, opt), {}};
    p.layout = layout_for(p.cfg, opt);
    generate_datasets(p.cfg, p.layout);
    return p;
}

metrics::EvaluationReport train(const Problem& p, const std::string& method, double level) {
    return train_method(p.cfg, method, level, p.layout);
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

Outcome criterion1(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem p = prepare("exp_sin.yaml", work / "exp_sin");
    const auto r = train(p, "ensemble", 0.0);
    const double secs = seconds_since(t0);
    const bool ok = r.recovery_rel_mse <= tol::c1_recovery && r.solution_rel_mse <= tol::c1_solution &&
                    secs <= tol::c1_seconds;
    return {ok, "recovery " + pct(r.recovery_rel_mse) + " (<= " + pct(tol::c1_recovery) + "), solution " +
                    pct(r.solution_rel_mse) + " (<= " + pct(tol::c1_solution) + "), " + fmt("%.0f s", secs)};
}

struct GapLip {
    double alpha = 0.0, gap = 0.0, lip = 0.0;
};

GapLip gap_lip(const nlohmann::json& fit) {
    const double e = fit.at("target_energy").get<double>();
    return {fit.at("alpha").get<double>(),
            100.0 * (fit.at("test_mse").get<double>() - fit.at("train_mse").get<double>()) / e,
            fit.at("estimated_lipschitz").get<double>()};
}

Outcome criterion2(const fs::path& work) {
    const Problem p = prepare("exp_sin_alpha.yaml", work / "exp_sin_alpha");
    bool ok = true;
    std::string detail;
    for (double level : {0.05, 0.10}) {
        const auto r = train(p, "ensemble", level);
        GapLip base;
        for (const auto& c : r.details.at("alpha_candidates"))
            if (c.at("alpha").get<double>() == 0.0) base = gap_lip(c);
        const GapLip best = gap_lip(r.details.at("interpolation").at(0));
        const bool here = best.gap <= tol::c2_gap_ratio * base.gap && best.lip < base.lip;
        ok = ok && here;
        if (!detail.empty()) detail += "; ";
        detail += "noise " + pct(100.0 * level) + ": alpha " + fmt("%g", best.alpha) + " gap " + pct(best.gap) +
                  " vs " + pct(base.gap) + fmt(" (ratio %.2f", base.gap != 0.0 ? best.gap / base.gap : 0.0) +
                  fmt(", need <= %.2f)", tol::c2_gap_ratio) + fmt(", Lipschitz %.3g", best.lip) +
                  fmt(" vs %.3g", base.lip);
    }
    return {ok, detail};
}

Outcome criterion3(const fs::path& work) {
    const Problem p = prepare("pendulum.yaml", work / "pendulum");
    const auto clean = train(p, "ensemble", 0.0);
    const auto noisy = train(p, "ensemble", 0.02);
    const bool ok = max_of(clean.recovery_per_component) <= tol::c3_recovery_clean &&
                    max_of(noisy.recovery_per_component) <= tol::c3_recovery_noisy &&
                    std::max(noisy.solution_rel_mse, max_of(noisy.solution_per_component)) <= tol::c3_solution_noisy;
    auto pair = [](const std::vector<double>& v) { return pct(v[0]) + "/" + pct(v[1]); };
    return {ok, "recovery 0%: " + pair(clean.recovery_per_component) + " (<= " + pct(tol::c3_recovery_clean) +
                    "), 2%: " + pair(noisy.recovery_per_component) + " (<= " + pct(tol::c3_recovery_noisy) +
                    "); solution 2%: " + pair(noisy.solution_per_component) + " (<= " + pct(tol::c3_solution_noisy) +
                    ")"};
}

Outcome criterion4(const fs::path& work) {
    const Problem p = prepare("sign_shift.yaml", work / "sign_shift");
    const double e = train(p, "ensemble", 0.01).recovery_rel_mse;
    const double s = train(p, "splines", 0.01).recovery_rel_mse;
    const bool ok = e <= tol::c4_ensemble && s >= tol::c4_splines && s >= tol::c4_separation * e;
    return {ok, "ensemble " + pct(e) + " (<= " + pct(tol::c4_ensemble) + "), splines " + pct(s) + " (>= " +
                    pct(tol::c4_splines) + fmt("), separation %.3gx", e > 0.0 ? s / e : 0.0)};
}

Outcome criterion5(const fs::path& work) {
    const Problem p = prepare("oscillatory.yaml", work / "oscillatory");
    const double e = train(p, "ensemble", 0.01).recovery_rel_mse;
    const double s = train(p, "splines", 0.01).recovery_rel_mse;
    return {e <= tol::c5_ratio * s,
            "ensemble " + pct(e) + ", splines " + pct(s) + fmt(" (ratio %.3g", e / s) + fmt(", need <= %.2f)", tol::c5_ratio)};
}

Outcome criterion6(const fs::path& work) {
    const Problem p = prepare("cubic_cos.yaml", work / "cubic_cos");
    run_all(p.cfg, p.layout, 1);
    const ComparisonTable t = collect_reports(p.cfg, p.layout);
    auto row = [&](const std::string& m) {
        const auto it = std::find(t.methods.begin(), t.methods.end(), m);
        if (it == t.methods.end()) throw Error("cubic_cos config lacks method " + m);
        return static_cast<Eigen::Index>(it - t.methods.begin());
    };
    auto col = [&](double level) {
        for (std::size_t c = 0; c < t.levels.size(); ++c)
            if (std::abs(t.levels[c] - level) < 1e-12) return static_cast<Eigen::Index>(c);
        throw Error("cubic_cos config lacks noise level " + noise_tag(level));
    };
    bool ok = true;
    std::string detail;
    for (double level : {0.05, 0.10}) {
        const Eigen::Index c = col(level);
        Eigen::Index best = 0;
        t.recovery.col(c).minCoeff(&best);
        const bool here = best == row("ensemble");
        ok = ok && here;
        detail += "noise " + pct(100.0 * level) + ": best " + t.methods[static_cast<std::size_t>(best)] + " " +
                  pct(t.recovery(best, c)) + ", ensemble " + pct(t.recovery(row("ensemble"), c)) + "; ";
    }
    const Eigen::Index c0 = col(0.0);
    const double sindy = t.recovery(row("sindy"), c0), ens = t.recovery(row("ensemble"), c0);
    ok = ok && sindy <= tol::c6_sindy_clean && sindy < ens;
    detail += "noise 0%: sindy " + pct(sindy) + " (<= " + pct(tol::c6_sindy_clean) + "), ensemble " + pct(ens);
    return {ok, detail};
}

int run_command(const std::string& cmd, const fs::path& log) {
    const int status = std::system((cmd + " > " + log.string() + " 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion7(const fs::path& work) {
    struct Suite {
        const char* label;
        const char* binary;
        const char* filter;
    };
    const Suite suites[] = {
        {"a", "test_nn_core", "ParamGradients.*:MlpJacobian.MatchesCentralDifferences"},
        {"b", "test_nn_core", "Lipschitz.AffineNetIsExact"},
        {"b", "test_interpolation", "Interpolation.LipschitzEstimateOfAffineNet"},
        {"c", "test_generator", "Generator.UnitRhsRecoversOne"},
        {"d", "test_data", "AddNoise.EmpiricalStdMatchesLevel"},
        {"e", "test_baselines", "Sindy.StlsqRecoversPendulumCoefficients"},
        {"f", "test_ode", "Integrate.PendulumMatchesClosedForm"},
        {"g", "test_metrics", "Metrics.HoeffdingBound"},
    };
    fs::create_directories(work / "properties");
    const auto t0 = std::chrono::steady_clock::now();
    std::string failed;
    for (const auto& s : suites) {
        const fs::path log = work / "properties" / (std::string(s.label) + "_" + s.binary + ".log");
        const std::string cmd = (kTestBin / s.binary).string() + " --gtest_filter='" + s.filter + "'";
        // An unmatched filter runs zero tests and still exits 0; insist on a PASSED line.
        std::ifstream in;
        const bool ran = run_command(cmd, log) == 0;
        in.open(log);
        std::stringstream text;
        text << in.rdbuf();
        const bool any = text.str().find("[  PASSED  ] 0 tests") == std::string::npos &&
                         text.str().find("[  PASSED  ]") != std::string::npos;
        if (!ran || !any) failed += std::string(failed.empty() ? "" : ",") + s.label;
    }
    const double secs = seconds_since(t0);
    const bool ok = failed.empty() && secs < tol::c7_seconds;
    return {ok, "suites a-g " + std::string(failed.empty() ? "all passed" : "failed: " + failed) +
                    fmt(", %.1f s", secs) + fmt(" (< %.0f s)", tol::c7_seconds)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingArtifact(p.string() + " not found");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Repeats the cubic_cos pipeline through the command-line tool and compares
// every comparison output and report byte for byte with the first run.
Outcome criterion8(const fs::path& work) {
    const fs::path first = work / "cubic_cos";
    if (!fs::exists(first / "compare" / "table.txt")) criterion6(work);
    const fs::path second = work / "cubic_cos_repeat";
    fs::remove_all(second);
    const std::string cfg = (kConfigs / "cubic_cos.yaml").string();
    fs::create_directories(work);
    if (run_command(kCli + " run " + cfg + " --jobs 1 --out " + second.string(), work / "cubic_cos_repeat.log") != 0)
        return {false, "repeat run failed, see " + (work / "cubic_cos_repeat.log").string()};
    const fs::path table_a = work / "compare_a.txt", table_b = work / "compare_b.txt";
    if (run_command(kCli + " compare " + cfg + " --jobs 1 --out " + first.string(), table_a) != 0 ||
        run_command(kCli + " compare " + cfg + " --jobs 1 --out " + second.string(), table_b) != 0)
        return {false, "compare failed"};
    std::size_t compared = 0;
    std::string differ;
    auto check = [&](const fs::path& a, const fs::path& b) {
        ++compared;
        if (slurp(a) != slurp(b)) differ += (differ.empty() ? "" : ", ") + a.filename().string();
    };
    check(table_a, table_b);
    for (const char* name : {"recovery.csv", "solution.csv", "table.txt"})
        check(first / "compare" / name, second / "compare" / name);
    for (const auto& e : fs::directory_iterator(first / "reports")) check(e.path(), second / "reports" / e.path().filename());
    return {differ.empty(), std::to_string(compared) + " files compared" + (differ.empty() ? ", all identical" : "; differ: " + differ)};
}

}  // namespace

int main(int argc, char** argv) {
    odeid::tune_allocator();
    CLI::App app{"Acceptance checks"};
    std::string work = "acceptance_runs";
    std::vector<int> only;
    app.add_option("--work-dir", work, "scratch directory for datasets, models and reports");
    app.add_option("--only", only, "run only these criteria")->delimiter(',')->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome(const fs::path&)>>> criteria = {
        {"noiseless one-dim recovery", criterion1},
        {"regularization effect at 5% and 10% noise", criterion2},
        {"pendulum recovery and solution", criterion3},
        {"non-smooth field: ensemble vs splines", criterion4},
        {"oscillatory field: ensemble vs splines", criterion5},
        {"cubic_cos method ordering", criterion6},
        {"property suites", criterion7},
        {"determinism of compare", criterion8},
    };
    const std::set<int> selected(only.begin(), only.end());
    int passed = 0, reported = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second(work);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        ++reported;
        passed += o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
                  << fmt(" [%.0f s]", seconds_since(t0)) << std::endl;
    }
    std::cout << passed << "/" << reported << " criteria passed" << std::endl;
    return 0;
}
