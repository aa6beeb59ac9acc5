// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any criterion fails.
// Every tolerance is pinned here; nothing is read from the environment.

#include <sys/wait.h>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <jrrs/jrrs_selection.hpp>
#include <jrrs/pipelines.hpp>
#include <jrrs/rcgl.hpp>
#include <jrrs/simulation.hpp>
#include "oracles.hpp"

using namespace jrrs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body)
{
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << ": " << title << " -- " << o.detail
              << std::endl;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Y = X A + noise with A of rank k spread over all predictors.
RegressionData low_rank_instance(std::mt19937_64& rng, Index m, Index p, Index n, Index k, double noise)
{
    const Matrix X = oracle::gaussian(m, p, rng);
    const Matrix A = oracle::gaussian(p, k, rng) * oracle::gaussian(k, n, rng);
    return RegressionData(X, X * A + noise * oracle::gaussian(m, n, rng));
}

std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// 1. lambda = 0 RCGL against the closed-form reduced-rank regression.
Outcome rrr_equivalence()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    FitConfig cfg;
    cfg.eps_outer = 1e-15;
    cfg.max_outer_iter = 20000;
    double worst = 0.0;
    for (int i = 0; i < 25; ++i) {
        const int p = uniform_int(rng, 2, 10);
        const int m = uniform_int(rng, p + 2, 40);
        const int n = uniform_int(rng, 2, 8);
        const int k = uniform_int(rng, 1, std::min(p, n));
        const auto d = low_rank_instance(rng, m, p, n, k, 0.5);
        const auto rep = fit_rcgl(d, k, 0.0, cfg);
        const Matrix ref = d.X() * oracle::rrr_closed_form(d.X(), d.Y(), k);
        worst = std::max(worst, (d.X() * rep.estimate.B() - ref).norm() / ref.norm());
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 5.0,
            "max relative error " + fmt(worst) + " (bound 1e-6), " + fmt(secs, 3) + " s (bound 5 s)"};
}

// 2. Full-rank RCGL against an independent proximal group-lasso solver.
Outcome glasso_equivalence()
{
    std::mt19937_64 rng(202);
    FitConfig cfg;
    cfg.eps_outer = 1e-15;
    cfg.max_outer_iter = 20000;
    cfg.kkt_tol_factor = 1e-10;
    double worst_obj = 0.0, worst_kkt = 0.0;
    for (int i = 0; i < 25; ++i) {
        const int p = uniform_int(rng, 2, 6);
        const int m = uniform_int(rng, p + 4, 40);
        const int n = uniform_int(rng, p, 8);
        RegressionData d(oracle::gaussian(m, p, rng), oracle::gaussian(m, n, rng));
        const int q = static_cast<int>(d.q());
        const double lambda = lambda_max(d.X(), d.Y()) * std::uniform_real_distribution<double>(0.05, 0.8)(rng);
        const auto rep = fit_rcgl(d, q, lambda, cfg);
        const Matrix& B = rep.estimate.B();
        const double f = oracle::group_lasso_objective(d.X(), d.Y(), B, lambda);
        const double f_ref =
            oracle::group_lasso_objective(d.X(), d.Y(), oracle::prox_group_lasso(d.X(), d.Y(), lambda), lambda);
        worst_obj = std::max(worst_obj, std::abs(f - f_ref) / std::abs(f_ref));
        const Matrix G = d.X().transpose() * (d.X() * B - d.Y());
        for (Index r = 0; r < p; ++r) {
            const double bn = B.row(r).norm();
            if (bn > 0.0) {
                const double v = (G.row(r) + lambda * B.row(r) / bn).norm() / (1.0 + lambda);
                worst_kkt = std::max(worst_kkt, v);
            }
        }
    }
    return {worst_obj <= 1e-5 && worst_kkt <= 1e-6,
            "max relative objective gap " + fmt(worst_obj) + " (bound 1e-5), max active-row KKT / (1+lambda) "
                + fmt(worst_kkt) + " (bound 1e-6)"};
}

// 3. Exhaustive joint selection against the bitmask enumerator.
Outcome exhaustive_equivalence()
{
    int mismatches = 0;
    double worst_score = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 rng(seed);
        const int p = uniform_int(rng, 2, 6);
        const int n = uniform_int(rng, 1, 3);
        const int m = uniform_int(rng, p + 2, 20);
        const Matrix X = oracle::gaussian(m, p, rng);
        Matrix A = Matrix::Zero(p, n);
        const int rows = uniform_int(rng, 1, p);
        A.topRows(rows) = oracle::gaussian(rows, 1, rng) * oracle::gaussian(1, n, rng);
        const double sigma2 = 0.25;
        RegressionData d(X, X * A + std::sqrt(sigma2) * oracle::gaussian(m, n, rng));
        const auto rep = fit_jrrs_exhaustive(d, PenaltySpec(3.0, sigma2));
        const auto ref = oracle::brute_force_jrrs(X, d.Y(), 3.0, sigma2);
        const IndexSet ref_support(ref.support.begin(), ref.support.end());
        if (rep.estimate.support() != ref_support || rep.k_used != ref.rank) ++mismatches;
        worst_score = std::max(worst_score, std::abs(*rep.selection_score - ref.total) / ref.total);
    }
    return {mismatches == 0 && worst_score <= 1e-10,
            std::to_string(mismatches) + " winner mismatches over 50 seeds, max relative score difference "
                + fmt(worst_score) + " (bound 1e-10)"};
}

// 4. Monotone descent of the outer objective for both inner variants.
Outcome monotone_descent()
{
    std::mt19937_64 rng(404);
    int violations = 0;
    for (int run = 0; run < 200; ++run) {
        const int m = uniform_int(rng, 5, 40);
        const int p = uniform_int(rng, 2, 15);
        const int n = uniform_int(rng, 1, 8);
        RegressionData d(oracle::gaussian(m, p, rng), oracle::gaussian(m, n, rng));
        FitConfig cfg;
        cfg.inner_variant = run % 2 ? InnerVariant::thresholding : InnerVariant::exact_glasso;
        cfg.v_init = (run / 2) % 2 ? VInit::coordinate_columns : VInit::right_singular_vectors;
        cfg.M_iter = uniform_int(rng, 1, 20);
        const int k = uniform_int(rng, 1, static_cast<int>(std::min({d.m(), d.p(), d.n()})));
        const double lambda = lambda_max(d.X(), d.Y()) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto rep = fit_rcgl(d, k, lambda, cfg);
        const auto& tr = rep.objective_trace;
        for (std::size_t j = 1; j < tr.size(); ++j) {
            if (tr[j] > tr[j - 1] + 1e-12 * (1.0 + std::abs(tr[j - 1]))) ++violations;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations in 200 runs (allowed 0)"};
}

SimulationScenario table3_scenario()
{
    auto s = SimulationScenario::m_gt_p(0.4);
    s.reps = 50;
    s.seed = 1;
    return s;
}

// 5. RSC rank recovery in the large-sample setting.
Outcome rsc_recovery()
{
    const auto t0 = Clock::now();
    const auto rep = run_study(table3_scenario(), {StudyMethod::RSC}, FitConfig{});
    const double secs = seconds_since(t0);
    const double med = rep.methods[0].median_r;
    return {med == 5.0 && rep.methods[0].failures == 0 && secs < 60.0,
            "median rank " + fmt(med) + " (expected 5), " + fmt(secs, 3) + " s (bound 60 s)"};
}

const MethodSummary& find(const RunReport& r, StudyMethod m)
{
    for (const auto& s : r.methods) {
        if (s.method == m) return s;
    }
    throw std::runtime_error("method missing from report");
}

// 6. Large-sample table.
Outcome table3()
{
    const auto rep = run_study(table3_scenario(), all_study_methods(), FitConfig{});
    bool ok = true;
    std::ostringstream os;
    const std::pair<StudyMethod, double> targets[] = {
        {StudyMethod::Method1, 8.1}, {StudyMethod::Method2, 8.0}, {StudyMethod::Method3, 8.1}};
    const auto& rsc = find(rep, StudyMethod::RSC);
    const auto& gl = find(rep, StudyMethod::GLASSO);
    for (const auto& s : rep.methods) ok = ok && s.failures == 0;
    for (const auto& [m, target] : targets) {
        const auto& s = find(rep, m);
        const bool band = std::abs(s.trimmed_mse - target) <= 0.25 * target;
        const bool med = s.median_j == 15.0 && s.median_r == 5.0;
        const bool order = s.trimmed_mse < rsc.trimmed_mse && rsc.trimmed_mse < gl.trimmed_mse;
        ok = ok && band && med && order;
        os << to_string(m) << " MSE " << fmt(s.trimmed_mse) << " (target " << target << " +-25%), |J| "
           << s.median_j << ", R " << s.median_r << "; ";
    }
    ok = ok && rsc.false_alarm_rate == 100.0;
    os << "RSC MSE " << fmt(rsc.trimmed_mse) << " FA " << rsc.false_alarm_rate << "%; GLASSO MSE "
       << fmt(gl.trimmed_mse);
    return {ok, os.str()};
}

// 7. Small-sample table, qualitative.
Outcome table2()
{
    auto s = SimulationScenario::p_gt_m(0.5);
    s.reps = 50;
    s.seed = 1;
    const auto rep = run_study(s, {StudyMethod::GLASSO, StudyMethod::RSC, StudyMethod::Method1}, FitConfig{});
    const auto& gl = find(rep, StudyMethod::GLASSO);
    const auto& rsc = find(rep, StudyMethod::RSC);
    const auto& m1 = find(rep, StudyMethod::Method1);
    const bool ok = gl.failures == 0 && rsc.failures == 0 && m1.failures == 0 && m1.median_r == 2.0
                    && rsc.median_r == 2.0 && m1.trimmed_mse < gl.trimmed_mse && m1.trimmed_mse < rsc.trimmed_mse
                    && m1.miss_rate < gl.miss_rate;
    return {ok, "Method1 MSE " + fmt(m1.trimmed_mse) + " R " + fmt(m1.median_r) + " M " + fmt(m1.miss_rate, 3)
                    + "%; GLASSO MSE " + fmt(gl.trimmed_mse) + " M " + fmt(gl.miss_rate, 3) + "%; RSC MSE "
                    + fmt(rsc.trimmed_mse) + " R " + fmt(rsc.median_r)};
}

// 8. Super-additivity of the support part of the penalty.
Outcome super_additivity()
{
    const int p = 200;
    const int n = p;  // lets every support size carry rank 1
    const PenaltySpec unit(1.0, 1.0);
    auto f = [&](int j) { return jrrs_penalty(1, j, n, p, unit) - 2.0 * n; };
    const double e = std::exp(1.0);
    int violations = 0, checked = 0;
    for (int x = 1; x < p; ++x) {
        for (int y = 1; x + y <= p; ++y) {
            const double rhs = x + y + x * std::log(e * p / x) + y * std::log(e * p / y);
            ++checked;
            if (f(x + y) < rhs - 1e-12 * (1.0 + std::abs(rhs))) ++violations;
        }
    }
    return {violations == 0 && checked > 0,
            std::to_string(violations) + " violations over " + std::to_string(checked) + " pairs"};
}

// 9. Selections do not change when (Y, sigma) are rescaled.
Outcome scale_invariance()
{
    std::mt19937_64 rng(909);
    int changes = 0;
    FitConfig cfg;
    cfg.lambda_grid_size = 10;
    for (int i = 0; i < 20; ++i) {
        const int m = uniform_int(rng, 25, 40);
        const int p = uniform_int(rng, 5, 12);
        const int n = uniform_int(rng, 3, 6);
        const Matrix X = oracle::gaussian(m, p, rng);
        Matrix A = Matrix::Zero(p, n);
        const int rows = uniform_int(rng, 2, p - 1);
        const int r = uniform_int(rng, 1, std::min(rows, n));
        A.topRows(rows) = oracle::gaussian(rows, r, rng) * oracle::gaussian(r, n, rng) / std::sqrt(1.0 * r);
        const Matrix Y = X * A + oracle::gaussian(m, n, rng);
        const double sigma = 1.0;
        const RegressionData base(X, Y);
        const int r0 = rsc_rank(base, sigma, cfg).r_hat;
        const IndexSet J0 = fit_method1(base, cfg, TuningRule::formula(1.0), sigma).estimate.support();
        const std::size_t w0 = method2_select(base, cfg, PenaltySpec(3.0, sigma * sigma)).selection.winner_index;
        for (double t : {0.1, 10.0}) {
            const RegressionData d(X, t * Y);
            const double st = t * sigma;
            if (rsc_rank(d, st, cfg).r_hat != r0) ++changes;
            if (fit_method1(d, cfg, TuningRule::formula(1.0), st).estimate.support() != J0) ++changes;
            if (method2_select(d, cfg, PenaltySpec(3.0, st * st)).selection.winner_index != w0) ++changes;
        }
    }
    return {changes == 0, std::to_string(changes) + " changed selections over 20 instances x 2 scales x 3 selectors"};
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_command(const std::string& cmd)
{
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Simulation reports are byte-identical across runs and thread counts.
Outcome determinism()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "jrrs_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string base = std::string(JRRS_CLI_PATH)
                              + " simulate --preset m-gt-p --reps 4 --seed 11 --methods all --validation-size 2000"
                                " --test-size 2000";
    std::vector<std::string> outputs;
    for (const auto& [threads, name] : std::vector<std::pair<int, std::string>>{{1, "a"}, {1, "b"}, {4, "c"}}) {
        const fs::path out = dir / (name + ".json");
        const int code = run_command(base + " --threads " + std::to_string(threads) + " --out " + out.string()
                                     + " 2>/dev/null");
        if (code != 0) return {false, "simulate exited with " + std::to_string(code)};
        outputs.push_back(slurp(out));
    }
    fs::remove_all(dir);
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    return {same, same ? "3 reports identical (" + std::to_string(outputs[0].size()) + " bytes)" : "reports differ"};
}

} // namespace

int main()
{
    report(1, "zero-penalty RCGL equals reduced-rank regression", rrr_equivalence);
    report(2, "full-rank RCGL equals group lasso", glasso_equivalence);
    report(3, "exhaustive joint selection equals independent enumerator", exhaustive_equivalence);
    report(4, "monotone descent of RCGL objective", monotone_descent);
    report(5, "RSC rank recovery, m > p", rsc_recovery);
    report(6, "large-sample table reproduction (b = 0.4)", table3);
    report(7, "small-sample table, qualitative (b = 0.5)", table2);
    report(8, "penalty super-additivity, p = 200", super_additivity);
    report(9, "scale invariance of selections", scale_invariance);
    report(10, "simulation determinism across runs and threads", determinism);
    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
