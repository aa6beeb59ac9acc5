#pragma once
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <json.hpp>
#include <jrrs/csv.hpp>
#include <jrrs/jrrs_selection.hpp>
#include <jrrs/pipelines.hpp>
#include <jrrs/simulation.hpp>

namespace jrrs::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_user_error = 2;
inline constexpr int exit_numerical_failure = 3;
inline constexpr int schema_version = 1;

using json = nlohmann::json;

enum class Format
{
    json,
    csv,
};

inline Format parse_format(const std::string& s)
{
    if (s == "json") return Format::json;
    if (s == "csv") return Format::csv;
    throw InvalidInput("unknown format '" + s + "' (expected json or csv)");
}

struct FitOptions
{
    std::string x_path;
    std::string y_path;
    std::string method = "method1";
    std::optional<int> k;
    std::optional<double> lambda;
    std::vector<double> lambda_grid;
    std::optional<double> c;
    std::optional<double> sigma2;
    std::optional<int> folds;
    std::string tuning;  // "", "cv", "validation" or "formula"
    std::string validation_x;
    std::string validation_y;
    std::string out;
    Format format = Format::json;
    bool standardize = true;
    int threads = 1;
    std::uint64_t seed = 0;
};

struct SimulateOptions
{
    std::string preset = "m-gt-p";
    std::optional<double> b;
    int reps = 50;
    std::uint64_t seed = 0;
    std::vector<std::string> methods{"all"};
    int threads = 1;
    std::optional<int> validation_size;
    std::optional<int> test_size;
    std::string out;
    Format format = Format::json;
};

struct RankOptions
{
    std::string x_path;
    std::string y_path;
    std::optional<double> sigma2;
    double multiplier = std::sqrt(2.0);
    bool log_m_correction = false;
    bool standardize = true;
    std::string out;
};

struct PenaltyOptions
{
    std::optional<int> rank;
    std::optional<int> support_size;
    std::optional<int> n;
    std::optional<int> p;
    std::string x_path;
    std::string y_path;
    std::string coef_path;
    std::optional<double> c;
    std::optional<double> sigma2;
    std::string out;
};

inline json to_json(const Matrix& M)
{
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(const Vector& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

/// 1-based indices for reports.
inline json to_json_1based(const IndexSet& s)
{
    json a = json::array();
    for (auto i : s) a.push_back(i + 1);
    return a;
}

/// Column centering of Y and standardization of X (mean 0, unit sample variance).
struct Standardization
{
    bool enabled = true;
    Vector x_mean;
    Vector x_scale;
    Vector y_mean;

    static Standardization fit(const Matrix& X, const Matrix& Y, bool enabled)
    {
        Standardization s;
        s.enabled = enabled;
        if (!enabled) {
            s.x_mean = Vector::Zero(X.cols());
            s.x_scale = Vector::Ones(X.cols());
            s.y_mean = Vector::Zero(Y.cols());
            return s;
        }
        if (X.rows() < 2) throw InvalidInput("standardization needs at least 2 rows");
        s.x_mean = X.colwise().mean();
        s.y_mean = Y.colwise().mean();
        s.x_scale.resize(X.cols());
        for (Index j = 0; j < X.cols(); ++j) {
            const double var = (X.col(j).array() - s.x_mean(j)).square().sum() / static_cast<double>(X.rows() - 1);
            const double sd = std::sqrt(var);
            if (!(sd > 1e-12 * (1.0 + std::abs(s.x_mean(j))))) {
                throw InvalidInput("X column " + std::to_string(j + 1) + " is constant; cannot standardize"
                                   + " (pass --no-standardize or drop the column)");
            }
            s.x_scale(j) = sd;
        }
        return s;
    }

    Matrix apply_x(const Matrix& X) const
    {
        return (X.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
    }

    Matrix apply_y(const Matrix& Y) const { return Y.rowwise() - y_mean.transpose(); }

    /// Predictions on the original scale for a coefficient matrix fitted on the transformed scale.
    Matrix predict(const Matrix& X, const Matrix& B) const
    {
        return (apply_x(X) * B).rowwise() + y_mean.transpose();
    }
};

/// Construction weights of the orthogonal scores of X B: eigenvalues d_i^2(XB) and weights B v_i.
inline json score_weights(const RegressionData& data, const CoefficientEstimate& est)
{
    json out = json::array();
    if (est.rank() == 0) return out;
    Eigen::JacobiSVD<Matrix> svd(data.X() * est.B(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix U = svd.matrixU();
    Matrix V = svd.matrixV();
    linalg::fix_column_signs(V, U);
    for (Index i = 0; i < est.rank(); ++i) {
        const double d = svd.singularValues()(i);
        out.push_back({{"score", i + 1}, {"eigenvalue", d * d}, {"weights", to_json(Vector(est.B() * V.col(i)))}});
    }
    return out;
}

namespace detail {

inline void emit(const std::string& out_path, const std::string& text)
{
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + out_path + "'");
    f << text;
}

template <class F>
int guarded(F&& body, std::ostream& err)
{
    try {
        return body();
    } catch (const NumericalFailure& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return exit_numerical_failure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_user_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_user_error;
    }
}

inline double require_sigma2(const std::optional<double>& sigma2, const RegressionData& data)
{
    if (sigma2) {
        if (!(*sigma2 > 0.0)) throw InvalidInput("--sigma2 must be positive");
        return *sigma2;
    }
    try {
        return estimate_sigma2(data);
    } catch (const SigmaNotEstimable& e) {
        throw SigmaNotEstimable(std::string(e.what()) + "; supply --sigma2");
    }
}

} // namespace detail

inline std::string fit_report_text(const FitOptions& opt, const Standardization& st, const RegressionData& data,
                                   const FitReport& rep, double training_rss, const std::vector<std::string>& x_names,
                                   const std::vector<std::string>& y_names)
{
    const auto& est = rep.estimate;
    if (opt.format == Format::json) {
        json j;
        j["schema_version"] = schema_version;
        j["command"] = "fit";
        j["method"] = opt.method;
        j["estimate_tag"] = std::string(to_string(est.method()));
        j["dimensions"] = {{"m", data.m()}, {"p", data.p()}, {"n", data.n()}, {"q", data.q()}};
        j["standardization"] = {{"enabled", st.enabled},
                                {"x_mean", to_json(st.x_mean)},
                                {"x_scale", to_json(st.x_scale)},
                                {"y_mean", to_json(st.y_mean)}};
        j["coefficients"] = to_json(est.B());
        j["support"] = to_json_1based(est.support());
        j["rank"] = est.rank();
        j["lambda_used"] = rep.lambda_used;
        j["k_used"] = rep.k_used;
        j["objective_trace"] = rep.objective_trace;
        j["iterations"] = rep.iterations;
        j["converged"] = rep.converged;
        j["selection_score"] = rep.selection_score ? json(*rep.selection_score) : json(nullptr);
        j["training_rss"] = training_rss;
        j["score_weights"] = score_weights(data, est);
        j["warnings"] = rep.warnings;
        if (!x_names.empty()) j["x_names"] = x_names;
        if (!y_names.empty()) j["y_names"] = y_names;
        return j.dump(2) + "\n";
    }
    std::ostringstream os;
    os << "key,value\n";
    os << "schema_version," << schema_version << "\n";
    os << "method," << opt.method << "\n";
    os << "rank," << est.rank() << "\n";
    os << "lambda_used," << csv::format_double(rep.lambda_used) << "\n";
    os << "k_used," << rep.k_used << "\n";
    os << "iterations," << rep.iterations << "\n";
    os << "converged," << (rep.converged ? "true" : "false") << "\n";
    os << "training_rss," << csv::format_double(training_rss) << "\n";
    os << "support,";
    for (std::size_t i = 0; i < est.support().size(); ++i) os << (i ? " " : "") << est.support()[i] + 1;
    os << "\n\n";
    os << "predictor,selected,x_mean,x_scale";
    for (Index j = 0; j < data.n(); ++j) os << ",b" << j + 1;
    os << "\n";
    std::vector<char> sel(data.p(), 0);
    for (auto i : est.support()) sel[i] = 1;
    for (Index i = 0; i < data.p(); ++i) {
        os << i + 1 << "," << int(sel[i]) << "," << csv::format_double(st.x_mean(i)) << ","
           << csv::format_double(st.x_scale(i));
        for (Index j = 0; j < data.n(); ++j) os << "," << csv::format_double(est.B()(i, j));
        os << "\n";
    }
    return os.str();
}

/// Fits the chosen method to CSV data and writes a report. Returns the process exit code.
inline int cmd_fit(const FitOptions& opt, std::ostream& log = std::clog)
{
    return detail::guarded([&]() -> int {
        const auto xt = csv::read_file(opt.x_path);
        const auto yt = csv::read_file(opt.y_path);
        if (xt.data.rows() != yt.data.rows()) {
            throw InvalidInput("X has " + std::to_string(xt.data.rows()) + " rows but Y has "
                               + std::to_string(yt.data.rows()));
        }
        const auto st = Standardization::fit(xt.data, yt.data, opt.standardize);
        const RegressionData data(st.apply_x(xt.data), st.apply_y(yt.data));

        FitConfig config;
        config.lambda_grid = opt.lambda_grid;
        config.seed = opt.seed;
        if (opt.lambda) config.lambda_grid = {*opt.lambda};
        config.validate();

        std::optional<RegressionData> validation;
        if (!opt.validation_x.empty() || !opt.validation_y.empty()) {
            if (opt.validation_x.empty() || opt.validation_y.empty()) {
                throw InvalidInput("--validation-x and --validation-y must be given together");
            }
            const auto vx = csv::read_file(opt.validation_x);
            const auto vy = csv::read_file(opt.validation_y);
            if (vx.data.rows() != vy.data.rows()) throw InvalidInput("validation X and Y row counts differ");
            if (vx.data.cols() != data.p() || vy.data.cols() != data.n()) {
                throw InvalidInput("validation data column counts differ from training data");
            }
            validation.emplace(st.apply_x(vx.data), st.apply_y(vy.data));
        }

        auto tuning = [&]() -> TuningRule {
            std::string mode = opt.tuning;
            if (mode.empty()) mode = validation ? "validation" : "cv";
            if (mode == "validation") {
                if (!validation) throw InvalidInput("validation tuning needs --validation-x/--validation-y");
                return TuningRule::validation_set(*validation);
            }
            if (mode == "formula") return TuningRule::formula(config.C_tune);
            if (mode == "cv") {
                const int folds = opt.folds.value_or(static_cast<int>(std::min<Index>(10, data.m())));
                return TuningRule::k_fold(folds, opt.seed);
            }
            throw InvalidInput("unknown --tuning '" + mode + "' (expected cv, validation or formula)");
        };

        const std::string& method = opt.method;
        FitReport rep{CoefficientEstimate::zero(data.p(), data.n(), MethodTag::RSC)};
        if (method == "jrrs1") {
            if (!opt.c) throw InvalidInput("--c is required for jrrs1 (12 for theory mode, 3 for practice mode)");
            rep = fit_jrrs_exhaustive(data, PenaltySpec(*opt.c, detail::require_sigma2(opt.sigma2, data)));
        } else if (method == "rcgl") {
            if (!opt.k) throw InvalidInput("--k is required for rcgl");
            if (opt.lambda) {
                rep = fit_rcgl(data, *opt.k, *opt.lambda, config);
            } else {
                const int k = *opt.k;
                config.validate_k(k, data);
                auto t = tuning();
                auto fit_one = [&](const RegressionData& d, double l) {
                    return fit_rcgl(d, static_cast<int>(std::min<Index>({static_cast<Index>(k), d.m(), d.p(), d.n()})),
                                    l, config);
                };
                auto fit_path = [&](const RegressionData& d, const std::vector<double>& ls) {
                    std::vector<FitReport> out;
                    for (auto& e : rcgl_path(d, {k}, ls, config)) {
                        if (!e.report) throw NumericalFailure(e.error);
                        out.push_back(std::move(*e.report));
                    }
                    return out;
                };
                FitConfig raw = config;
                raw.bias_correct = false;
                rep = jrrs::detail::tune_lambda(data, raw, t, k, std::sqrt(detail::require_sigma2(opt.sigma2, data)),
                                                fit_one, fit_path);
            }
        } else if (method == "glasso") {
            const auto t = tuning();
            const double sigma = t.mode == TuningMode::formula ? std::sqrt(detail::require_sigma2(opt.sigma2, data)) : 1.0;
            rep = fit_glasso(data, config, t, sigma);
        } else if (method == "rsc") {
            rep = fit_rsc(data, std::sqrt(detail::require_sigma2(opt.sigma2, data)), config);
        } else if (method == "method1") {
            rep = fit_method1(data, config, tuning(), std::sqrt(detail::require_sigma2(opt.sigma2, data)));
        } else if (method == "method2") {
            if (!opt.c) throw InvalidInput("--c is required for method2 (3 reproduces the simulation protocol)");
            if (opt.k) config.k_grid = {*opt.k};
            rep = fit_method2(data, config, PenaltySpec(*opt.c, detail::require_sigma2(opt.sigma2, data)));
        } else if (method == "method3") {
            rep = fit_method3(data, config, tuning(), std::sqrt(detail::require_sigma2(opt.sigma2, data)));
        } else {
            throw InvalidInput("unknown --method '" + method + "'");
        }

        const double rss = (data.Y() - data.X() * rep.estimate.B()).squaredNorm();
        detail::emit(opt.out, fit_report_text(opt, st, data, rep, rss, xt.header, yt.header));
        log << "fit " << method << ": rank " << rep.estimate.rank() << ", " << rep.estimate.support().size()
            << " predictors selected, training rss " << rss << "\n";
        return exit_ok;
    }, log);
}

inline std::vector<StudyMethod> parse_methods(const std::vector<std::string>& names)
{
    std::vector<StudyMethod> out;
    for (const auto& raw : names) {
        std::string name;
        for (char ch : raw) name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        if (name == "all") {
            for (auto m : all_study_methods()) out.push_back(m);
        } else if (name == "glasso") {
            out.push_back(StudyMethod::GLASSO);
        } else if (name == "rsc") {
            out.push_back(StudyMethod::RSC);
        } else if (name == "method1") {
            out.push_back(StudyMethod::Method1);
        } else if (name == "method2") {
            out.push_back(StudyMethod::Method2);
        } else if (name == "method3") {
            out.push_back(StudyMethod::Method3);
        } else {
            throw InvalidInput("unknown method '" + raw + "'");
        }
    }
    if (out.empty()) throw InvalidInput("no methods given");
    return out;
}

inline SimulationScenario scenario_from(const SimulateOptions& opt)
{
    SimulationScenario s;
    if (opt.preset == "p-gt-m") {
        s = SimulationScenario::p_gt_m(opt.b.value_or(0.5));
    } else if (opt.preset == "m-gt-p") {
        s = SimulationScenario::m_gt_p(opt.b.value_or(0.4));
    } else {
        throw InvalidInput("unknown preset '" + opt.preset + "' (expected p-gt-m or m-gt-p)");
    }
    s.reps = opt.reps;
    s.seed = opt.seed;
    if (opt.validation_size) s.validation_size = *opt.validation_size;
    if (opt.test_size) s.test_size = *opt.test_size;
    s.validate();
    return s;
}

inline json run_report_json(const RunReport& rep)
{
    const auto& s = rep.scenario;
    json j;
    j["schema_version"] = schema_version;
    j["command"] = "simulate";
    j["scenario"] = {{"m", s.m}, {"p", s.p}, {"n", s.n}, {"J_size", s.J_size}, {"r", s.r}, {"rho", s.rho},
                     {"b", s.b}, {"sigma2", s.sigma2}, {"reps", s.reps}, {"seed", s.seed},
                     {"validation_size", s.validation_size}, {"test_size", s.test_size}};
    json methods = json::array();
    for (const auto& m : rep.methods) {
        json reps = json::array();
        for (const auto& r : m.replicates) {
            json jr = {{"replicate", r.replicate}, {"failed", r.failed}};
            if (r.failed) {
                jr["error"] = r.error;
            } else {
                jr["mse"] = r.mse;
                jr["j_hat"] = r.j_hat;
                jr["r_hat"] = r.r_hat;
                jr["misses"] = r.misses;
                jr["false_alarms"] = r.false_alarms;
            }
            reps.push_back(std::move(jr));
        }
        methods.push_back({{"method", std::string(to_string(m.method))},
                           {"mse", m.trimmed_mse},
                           {"j_hat", m.median_j},
                           {"r_hat", m.median_r},
                           {"M", m.miss_rate},
                           {"FA", m.false_alarm_rate},
                           {"failures", m.failures},
                           {"replicates", std::move(reps)}});
    }
    j["methods"] = std::move(methods);
    json diags = json::array();
    for (std::size_t i = 0; i < rep.diagnostics.size(); ++i) {
        const auto& d = rep.diagnostics[i];
        diags.push_back({{"replicate", i}, {"c1", d.c1}, {"c2", d.c2}, {"d_r", d.d_r},
                         {"c1_margin", d.c1_margin}, {"c2_margin", d.c2_margin}});
    }
    j["signal_conditions"] = std::move(diags);
    return j;
}

inline std::string run_report_csv(const RunReport& rep)
{
    std::ostringstream os;
    os << "method,MSE,J_hat,R_hat,M,FA,failures\n";
    for (const auto& m : rep.methods) {
        os << to_string(m.method) << "," << csv::format_double(m.trimmed_mse) << "," << csv::format_double(m.median_j)
           << "," << csv::format_double(m.median_r) << "," << csv::format_double(m.miss_rate) << ","
           << csv::format_double(m.false_alarm_rate) << "," << m.failures << "\n";
    }
    return os.str();
}

/// Human-readable table in the column layout MSE, |J|, R, M, FA.
inline std::string run_report_table(const RunReport& rep)
{
    std::ostringstream os;
    os << std::left << std::setw(10) << "method" << std::right << std::setw(10) << "MSE" << std::setw(8) << "|J|"
       << std::setw(6) << "R" << std::setw(8) << "M" << std::setw(8) << "FA" << "\n";
    for (const auto& m : rep.methods) {
        os << std::left << std::setw(10) << to_string(m.method) << std::right << std::fixed << std::setprecision(1)
           << std::setw(10) << m.trimmed_mse << std::setprecision(1) << std::setw(8) << m.median_j << std::setw(6)
           << m.median_r << std::setprecision(0) << std::setw(7) << m.miss_rate << "%" << std::setw(7)
           << m.false_alarm_rate << "%";
        if (m.failures) os << "  (" << m.failures << " failed)";
        os << "\n";
    }
    return os.str();
}

/// Runs a simulation study from a preset and writes the report. Returns the process exit code.
inline int cmd_simulate(const SimulateOptions& opt, std::ostream& log = std::clog)
{
    return detail::guarded([&]() -> int {
        const auto s = scenario_from(opt);
        const auto methods = parse_methods(opt.methods);
        if (opt.threads < 1) throw InvalidInput("--threads must be >= 1");
        StudyOptions so;
        so.threads = opt.threads;
        const auto rep = run_study(s, methods, FitConfig{}, so);
        const std::string text = opt.format == Format::json ? run_report_json(rep).dump(2) + "\n" : run_report_csv(rep);
        detail::emit(opt.out, text);
        log << run_report_table(rep);
        return exit_ok;
    }, log);
}

/// RSC rank of (possibly standardized) CSV data.
inline int cmd_rank(const RankOptions& opt, std::ostream& log = std::clog)
{
    return detail::guarded([&]() -> int {
        const auto xt = csv::read_file(opt.x_path);
        const auto yt = csv::read_file(opt.y_path);
        if (xt.data.rows() != yt.data.rows()) throw InvalidInput("X and Y row counts differ");
        const auto st = Standardization::fit(xt.data, yt.data, opt.standardize);
        const RegressionData data(st.apply_x(xt.data), st.apply_y(yt.data));
        FitConfig config;
        config.rsc_multiplier = opt.multiplier;
        config.rsc_log_m_correction = opt.log_m_correction;
        const double s2 = detail::require_sigma2(opt.sigma2, data);
        const auto rs = rsc_rank(data, std::sqrt(s2), config);
        json j;
        j["schema_version"] = schema_version;
        j["command"] = "rank";
        j["r_hat"] = rs.r_hat;
        j["threshold"] = rs.threshold;
        j["sigma2_used"] = s2;
        j["sigma2_estimated"] = !opt.sigma2.has_value();
        j["multiplier"] = rs.multiplier;
        j["singular_values"] = to_json(rs.singular_values);
        detail::emit(opt.out, j.dump(2) + "\n");
        log << "rank " << rs.r_hat << " (threshold " << rs.threshold << ")\n";
        return exit_ok;
    }, log);
}

/// Penalty value from (r, |J|, n, p), or the full penalized score of a coefficient CSV.
inline int cmd_penalty_score(const PenaltyOptions& opt, std::ostream& log = std::clog)
{
    return detail::guarded([&]() -> int {
        if (!opt.c) throw InvalidInput("--c is required");
        json j;
        j["schema_version"] = schema_version;
        j["command"] = "penalty-score";
        if (!opt.coef_path.empty()) {
            if (!opt.sigma2) throw InvalidInput("--sigma2 is required");
            const PenaltySpec spec(*opt.c, *opt.sigma2);
            const auto xt = csv::read_file(opt.x_path);
            const auto yt = csv::read_file(opt.y_path);
            const auto bt = csv::read_file(opt.coef_path);
            const RegressionData data(xt.data, yt.data);
            if (bt.data.rows() != data.p() || bt.data.cols() != data.n()) {
                throw InvalidInput("coefficient matrix must be p x n");
            }
            const CoefficientEstimate est(bt.data, MethodTag::JRRS1);
            const auto sc = jrrs_score(est, data, spec);
            j["rss"] = sc.rss;
            j["penalty"] = sc.penalty;
            j["total"] = sc.total;
            j["rank"] = sc.r_used;
            j["support_size"] = sc.j_used;
            j["support"] = to_json_1based(est.support());
        } else {
            if (!opt.rank || !opt.support_size || !opt.n || !opt.p) {
                throw InvalidInput("give --rank, --support-size, --n-responses and --n-predictors, or --coef with --x/--y");
            }
            if (!opt.sigma2) throw InvalidInput("--sigma2 is required");
            const PenaltySpec spec(*opt.c, *opt.sigma2);
            j["penalty"] = jrrs_penalty(*opt.rank, *opt.support_size, *opt.n, *opt.p, spec);
        }
        detail::emit(opt.out, j.dump(2) + "\n");
        return exit_ok;
    }, log);
}

} // namespace jrrs::cli
