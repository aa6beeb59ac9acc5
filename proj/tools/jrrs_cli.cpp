// Command-line front end: fit models on CSV data, run simulation studies, RSC ranks and penalty scores.

#include <iostream>
#include <thread>
#include <CLI11.hpp>
#include <jrrs/commands.hpp>

namespace {

void add_format(CLI::App* cmd, std::string& fmt)
{
    cmd->add_option("--format", fmt, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

} // namespace

int main(int argc, char** argv)
{
    using namespace jrrs::cli;
    CLI::App app{"Joint rank and row selection for multivariate response regression"};
    app.require_subcommand(1);

    FitOptions fit;
    std::string fit_format = "json";
    int fit_threads = 0;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to X and Y given as CSV files");
    fit_cmd->add_option("--x", fit.x_path, "Design matrix CSV (m x p)")->required();
    fit_cmd->add_option("--y", fit.y_path, "Response matrix CSV (m x n)")->required();
    fit_cmd->add_option("--method", fit.method, "Estimator")
        ->check(CLI::IsMember({"jrrs1", "rcgl", "glasso", "rsc", "method1", "method2", "method3"}));
    fit_cmd->add_option("--k", fit.k, "Rank constraint (rcgl) or single rank (method2)");
    fit_cmd->add_option("--lambda", fit.lambda, "Fixed penalty level");
    fit_cmd->add_option("--lambda-grid", fit.lambda_grid, "Explicit lambda grid")->delimiter(',');
    fit_cmd->add_option("--c", fit.c, "Penalty constant (12 theory, 3 practice)");
    fit_cmd->add_option("--sigma2", fit.sigma2, "Noise variance; estimated from residuals when omitted");
    fit_cmd->add_option("--folds", fit.folds, "Cross-validation folds (m gives leave-one-out)");
    fit_cmd->add_option("--tuning", fit.tuning, "cv, validation or formula")
        ->check(CLI::IsMember({"cv", "validation", "formula"}));
    fit_cmd->add_option("--validation-x", fit.validation_x, "Validation design CSV");
    fit_cmd->add_option("--validation-y", fit.validation_y, "Validation response CSV");
    fit_cmd->add_option("--seed", fit.seed, "Seed for fold assignment");
    fit_cmd->add_option("--out", fit.out, "Report path (stdout when omitted)");
    fit_cmd->add_flag("--no-standardize", [&](std::int64_t) { fit.standardize = false; },
                      "Use X and Y as given");
    fit_cmd->add_option("--threads", fit_threads, "Worker threads");
    add_format(fit_cmd, fit_format);

    SimulateOptions sim;
    std::string sim_format = "json";
    auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte-Carlo study from a preset scenario");
    sim_cmd->add_option("--preset", sim.preset, "p-gt-m or m-gt-p")->check(CLI::IsMember({"p-gt-m", "m-gt-p"}));
    sim_cmd->add_option("--b", sim.b, "Signal strength");
    sim_cmd->add_option("--reps", sim.reps, "Replicates");
    sim_cmd->add_option("--seed", sim.seed, "Base seed");
    sim_cmd->add_option("--methods", sim.methods, "all, glasso, rsc, method1, method2, method3")->delimiter(',');
    sim_cmd->add_option("--threads", sim.threads, "Worker threads (default: hardware concurrency)");
    sim_cmd->add_option("--validation-size", sim.validation_size, "Validation rows (default 10000)");
    sim_cmd->add_option("--test-size", sim.test_size, "Test rows (default 10000)");
    sim_cmd->add_option("--out", sim.out, "Report path (stdout when omitted)");
    add_format(sim_cmd, sim_format);
    sim.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    RankOptions rank;
    auto* rank_cmd = app.add_subcommand("rank", "RSC rank estimate of CSV data");
    rank_cmd->add_option("--x", rank.x_path)->required();
    rank_cmd->add_option("--y", rank.y_path)->required();
    rank_cmd->add_option("--sigma2", rank.sigma2);
    rank_cmd->add_option("--multiplier", rank.multiplier, "Threshold multiplier (default sqrt 2)");
    rank_cmd->add_flag("--log-m-correction", rank.log_m_correction, "Replace q by q log(m) in the threshold");
    rank_cmd->add_flag("--no-standardize", [&](std::int64_t) { rank.standardize = false; });
    rank_cmd->add_option("--out", rank.out);

    PenaltyOptions pen;
    auto* pen_cmd = app.add_subcommand("penalty-score", "Joint rank/row penalty or penalized score");
    pen_cmd->add_option("--rank", pen.rank);
    pen_cmd->add_option("--support-size", pen.support_size);
    pen_cmd->add_option("--n-responses", pen.n);
    pen_cmd->add_option("--n-predictors", pen.p);
    pen_cmd->add_option("--x", pen.x_path);
    pen_cmd->add_option("--y", pen.y_path);
    pen_cmd->add_option("--coef", pen.coef_path, "Coefficient CSV (p x n)");
    pen_cmd->add_option("--c", pen.c);
    pen_cmd->add_option("--sigma2", pen.sigma2);
    pen_cmd->add_option("--out", pen.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_user_error;
    }

    if (*fit_cmd) {
        fit.format = parse_format(fit_format);
        if (fit_threads > 0) fit.threads = fit_threads;
        return cmd_fit(fit, std::cerr);
    }
    if (*sim_cmd) {
        sim.format = parse_format(sim_format);
        return cmd_simulate(sim, std::cerr);
    }
    if (*rank_cmd) return cmd_rank(rank, std::cerr);
    if (*pen_cmd) return cmd_penalty_score(pen, std::cerr);
    return exit_user_error;
}
