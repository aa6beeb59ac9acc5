#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>
#include <jrrs/core_types.hpp>
#include <jrrs/glasso.hpp>
#include <jrrs/jrrs_selection.hpp>
#include <jrrs/rank_selection.hpp>
#include <jrrs/rcgl.hpp>

namespace jrrs {

enum class TuningMode
{
    formula,         // lambda = C sigma sqrt(lambda_1(Sigma) k m log(e p))
    validation_set,  // minimize squared error on held-out data
    k_fold,          // minimize cross-validated squared error
};

struct TuningRule
{
    TuningMode mode = TuningMode::k_fold;
    double C_tune = 1.0;
    int folds = 10;
    std::optional<RegressionData> validation;
    std::uint64_t seed = 0;

    static TuningRule formula(double C = 1.0)
    {
        TuningRule t;
        t.mode = TuningMode::formula;
        t.C_tune = C;
        return t;
    }

    static TuningRule validation_set(RegressionData v)
    {
        TuningRule t;
        t.mode = TuningMode::validation_set;
        t.validation = std::move(v);
        return t;
    }

    static TuningRule k_fold(int folds, std::uint64_t seed = 0)
    {
        TuningRule t;
        t.mode = TuningMode::k_fold;
        t.folds = folds;
        t.seed = seed;
        return t;
    }

    void validate(const RegressionData& data) const
    {
        switch (mode) {
        case TuningMode::formula:
            if (!(C_tune > 0.0)) throw InvalidConfig("C_tune must be positive");
            break;
        case TuningMode::validation_set:
            if (!validation) throw InvalidConfig("validation tuning requires validation data");
            if (validation->p() != data.p() || validation->n() != data.n()) {
                throw InvalidInput("validation data has different p or n than training data");
            }
            break;
        case TuningMode::k_fold:
            if (folds < 2 || folds > data.m()) {
                throw InvalidConfig("folds must lie in [2, m]; got " + std::to_string(folds));
            }
            break;
        }
    }
};

/// C sigma sqrt(lambda_1(X'X/m) k m log(e p)).
inline double lambda_formula(const RegressionData& data, int k, double sigma, double C)
{
    if (k < 1) throw InvalidConfig("lambda_formula: k must be >= 1");
    if (!(sigma > 0.0)) throw InvalidInput("sigma must be positive");
    const double m = static_cast<double>(data.m());
    const double lambda1 = data.x_spectral_norm_sq() / m;
    return C * sigma * std::sqrt(lambda1 * k * m * (1.0 + std::log(static_cast<double>(data.p()))));
}

/// config.lambda_grid when set, else lambda_grid_size log-spaced values from
/// max_i ||x_i'Y|| down to lambda_grid_ratio times that.
inline std::vector<double> default_lambda_grid(const RegressionData& data, const FitConfig& config)
{
    if (!config.lambda_grid.empty()) return config.lambda_grid;
    const double lmax = data.xty().rowwise().norm().maxCoeff();
    if (!(lmax > 0.0)) return {0.0};
    const int N = std::max(config.lambda_grid_size, 1);
    std::vector<double> grid(N);
    for (int i = 0; i < N; ++i) {
        const double frac = N == 1 ? 0.0 : static_cast<double>(i) / (N - 1);
        grid[i] = lmax * std::pow(config.lambda_grid_ratio, frac);
    }
    return grid;
}

inline std::vector<int> default_k_grid(const RegressionData& data, const FitConfig& config)
{
    const int kmax = static_cast<int>(std::min({data.q(), data.n(), data.m(), data.p()}));
    if (!config.k_grid.empty()) {
        std::vector<int> out;
        for (int k : config.k_grid) {
            if (k <= kmax) out.push_back(k);
        }
        if (out.empty()) throw InvalidConfig("no k in the grid is admissible for these data");
        return out;
    }
    std::vector<int> out(std::max(kmax, 1));
    std::iota(out.begin(), out.end(), 1);
    return out;
}

/// ||Y - X B||_F^2 on held-out data, through the cached Gram matrices of that data.
inline double holdout_sse(const RegressionData& hold, const Matrix& B)
{
    const double lin = (B.array() * hold.xty().array()).sum();
    const double quad = (B.array() * (hold.gram() * B).array()).sum();
    return std::max(hold.Y().squaredNorm() - 2.0 * lin + quad, 0.0);
}

/// Restricted least squares on the support of the estimate at its rank (clamped to what the
/// restricted design supports). Zero estimates map to zero.
inline CoefficientEstimate bias_correct(const CoefficientEstimate& est, const RegressionData& data)
{
    if (est.rank() == 0 || est.support().empty()) {
        return CoefficientEstimate::zero(data.p(), data.n(), MethodTag::OLS_restricted);
    }
    const Index qJ = data.restrict_columns(est.support()).q();
    const int k = static_cast<int>(std::min<Index>({est.rank(), qJ, data.n()}));
    if (k < 1) return CoefficientEstimate::zero(data.p(), data.n(), MethodTag::OLS_restricted);
    return rrr_fit(data, k, est.support(), MethodTag::OLS_restricted);
}

struct CvParam
{
    int k = 0;
    double lambda = 0.0;
};

struct CvResult
{
    CvParam best;
    std::size_t best_index = 0;
    std::vector<double> errors;  // one per grid entry
};

/// Seeded shuffle of 0..m-1 dealt round-robin into folds.
inline std::vector<std::vector<Index>> make_folds(Index m, int folds, std::uint64_t seed)
{
    std::vector<Index> perm(m);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> out(folds);
    for (Index i = 0; i < m; ++i) out[i % folds].push_back(perm[i]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

using CvFitter = std::function<Matrix(const RegressionData&, const CvParam&)>;

/// K-fold cross-validation. The error of a grid entry is the mean over folds of
/// ||Y_test - X_test B_train||_F^2 / (|test| n). Ties go to the smallest k, then the largest lambda.
inline CvResult cross_validate(const RegressionData& data, const CvFitter& fitter, const std::vector<CvParam>& grid,
                               int folds, std::uint64_t seed)
{
    if (grid.empty()) throw InvalidConfig("cross_validate: empty grid");
    if (folds < 2 || folds > data.m()) {
        throw InvalidConfig("folds must lie in [2, m]; got " + std::to_string(folds));
    }
    const auto parts = make_folds(data.m(), folds, seed);
    CvResult res;
    res.errors.assign(grid.size(), 0.0);
    for (const auto& test_rows : parts) {
        std::vector<char> in_test(data.m(), 0);
        for (auto i : test_rows) in_test[i] = 1;
        std::vector<Index> train_rows;
        for (Index i = 0; i < data.m(); ++i) {
            if (!in_test[i]) train_rows.push_back(i);
        }
        const RegressionData train = data.subset_rows(train_rows);
        const Matrix Xt = linalg::select_rows(data.X(), test_rows);
        const Matrix Yt = linalg::select_rows(data.Y(), test_rows);
        const double denom = static_cast<double>(test_rows.size()) * static_cast<double>(data.n());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Matrix B = fitter(train, grid[g]);
            res.errors[g] += (Yt - Xt * B).squaredNorm() / denom;
        }
    }
    for (double& e : res.errors) e /= static_cast<double>(parts.size());
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double eg = res.errors[g];
        const double eb = res.errors[best];
        if (eg < eb || (eg == eb && (grid[g].k < grid[best].k
                                     || (grid[g].k == grid[best].k && grid[g].lambda > grid[best].lambda)))) {
            best = g;
        }
    }
    res.best_index = best;
    res.best = grid[best];
    return res;
}

/// Group-lasso solutions along a lambda grid (warm-started in grid order), as estimates.
inline std::vector<FitReport> glasso_path(const RegressionData& data, const std::vector<double>& lambdas,
                                          const FitConfig& config)
{
    std::vector<FitReport> out;
    out.reserve(lambdas.size());
    Matrix S = Matrix::Zero(data.p(), data.n());
    std::optional<Matrix> ls;
    for (double lambda : lambdas) {
        Matrix B;
        bool converged = true;
        if (lambda == 0.0) {
            if (!ls) ls = data.pinv_apply(data.Y());
            B = *ls;
        } else {
            auto g = detail::make_gram_form(data.gram(), data.xty(), data.Y().squaredNorm(),
                                            data.x_spectral_norm_sq());
            auto sol = detail::solve_gram(g, lambda, S, config);
            B = std::move(sol.S);
            converged = sol.converged;
        }
        S = B;
        FitReport rep{CoefficientEstimate(B, MethodTag::GLASSO, config.support_tol, config.rank_tol)};
        rep.lambda_used = lambda;
        rep.converged = converged;
        rep.objective_trace = {group_lasso_objective(data.X(), data.Y(), B, lambda)};
        rep.k_used = static_cast<int>(rep.estimate.rank());
        out.push_back(std::move(rep));
    }
    return out;
}

namespace detail {

inline CoefficientEstimate maybe_bias_correct(const CoefficientEstimate& est, const RegressionData& data,
                                              const FitConfig& config)
{
    return config.bias_correct ? bias_correct(est, data) : est;
}

/// Index of the candidate with the smallest validation error; ties keep the earliest.
inline std::size_t argmin_holdout(const std::vector<CoefficientEstimate>& cands, const RegressionData& hold)
{
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const double e = holdout_sse(hold, cands[i].B());
        if (e < best_err) {
            best_err = e;
            best = i;
        }
    }
    return best;
}

/// Tunes lambda for a fixed-k procedure. fit_one(d, lambda) fits one lambda on d;
/// fit_path(d, lambdas) fits the whole grid (warm-started) and must return one entry per lambda.
template <class FitOne, class FitPath>
FitReport tune_lambda(const RegressionData& data, const FitConfig& config, const TuningRule& tuning, int k,
                      double sigma_for_formula, FitOne fit_one, FitPath fit_path)
{
    tuning.validate(data);
    if (tuning.mode == TuningMode::formula) {
        const double lambda = lambda_formula(data, k, sigma_for_formula, tuning.C_tune);
        FitReport rep = fit_one(data, lambda);
        rep.estimate = maybe_bias_correct(rep.estimate, data, config);
        return rep;
    }
    const auto lambdas = default_lambda_grid(data, config);
    if (tuning.mode == TuningMode::validation_set) {
        std::vector<FitReport> path = fit_path(data, lambdas);
        std::vector<CoefficientEstimate> cands;
        cands.reserve(path.size());
        for (auto& r : path) cands.push_back(maybe_bias_correct(r.estimate, data, config));
        const std::size_t best = argmin_holdout(cands, *tuning.validation);
        FitReport rep = std::move(path[best]);
        rep.estimate = cands[best];
        return rep;
    }
    std::vector<CvParam> grid;
    for (double l : lambdas) grid.push_back({k, l});
    CvFitter fitter = [&](const RegressionData& d, const CvParam& prm) {
        return maybe_bias_correct(fit_one(d, prm.lambda).estimate, d, config).B();
    };
    const auto cv = cross_validate(data, fitter, grid, tuning.folds, tuning.seed);
    FitReport rep = fit_one(data, cv.best.lambda);
    rep.estimate = maybe_bias_correct(rep.estimate, data, config);
    return rep;
}

} // namespace detail

/// Group lasso (no rank constraint) with lambda chosen by the tuning rule.
inline FitReport fit_glasso(const RegressionData& data, const FitConfig& config, const TuningRule& tuning,
                            double sigma = 1.0)
{
    config.validate();
    auto fit_path = [&](const RegressionData& d, const std::vector<double>& ls) { return glasso_path(d, ls, config); };
    auto fit_one = [&](const RegressionData& d, double l) { return std::move(glasso_path(d, {l}, config).front()); };
    FitReport rep = detail::tune_lambda(data, config, tuning, static_cast<int>(std::max<Index>(data.q(), 1)), sigma,
                                        fit_one, fit_path);
    rep.estimate = rep.estimate.retagged(MethodTag::GLASSO);
    rep.k_used = static_cast<int>(rep.estimate.rank());
    return rep;
}

/// Reduced-rank regression at the RSC-selected rank using all predictors.
inline FitReport fit_rsc(const RegressionData& data, double sigma, const FitConfig& config)
{
    config.validate();
    const auto rs = rsc_rank(data, sigma, config);
    FitReport rep{rs.r_hat == 0 ? CoefficientEstimate::zero(data.p(), data.n(), MethodTag::RSC)
                                : rrr_fit(data, rs.r_hat, std::nullopt, MethodTag::RSC)};
    rep.k_used = rs.r_hat;
    rep.converged = true;
    if (rs.r_hat == 0) rep.warnings.push_back("RSC selected rank 0; returning the zero estimate");
    return rep;
}

/// RSC picks the rank r, then the rank-r constrained group lasso is tuned over lambda.
inline FitReport fit_method1(const RegressionData& data, const FitConfig& config, const TuningRule& tuning,
                             double sigma)
{
    config.validate();
    const auto rs = rsc_rank(data, sigma, config);
    if (rs.r_hat == 0) {
        FitReport rep{CoefficientEstimate::zero(data.p(), data.n(), MethodTag::Method1)};
        rep.converged = true;
        rep.warnings.push_back("RSC selected rank 0; returning the zero estimate");
        return rep;
    }
    const int k = rs.r_hat;
    auto fit_one = [&](const RegressionData& d, double l) {
        const int kk = static_cast<int>(std::min<Index>({static_cast<Index>(k), d.m(), d.p(), d.n()}));
        return fit_rcgl(d, kk, l, config);
    };
    auto fit_path = [&](const RegressionData& d, const std::vector<double>& ls) {
        std::vector<FitReport> out;
        for (auto& e : rcgl_path(d, {k}, ls, config)) {
            if (!e.report) throw NumericalFailure("RCGL path cell failed: " + e.error);
            out.push_back(std::move(*e.report));
        }
        return out;
    };
    FitReport rep = detail::tune_lambda(data, config, tuning, k, sigma, fit_one, fit_path);
    rep.estimate = rep.estimate.retagged(MethodTag::Method1);
    rep.k_used = k;
    return rep;
}

struct Method2Audit
{
    std::vector<PathEntry> path;                // raw RCGL fits
    std::vector<CoefficientEstimate> candidates;  // bias-corrected, one per successful cell
    std::vector<std::size_t> cell_of_candidate;   // index into path
    CandidateSelection selection;
};

/// RCGL over the (k, lambda) grid, bias-corrected, then the penalized criterion picks the winner.
inline Method2Audit method2_select(const RegressionData& data, const FitConfig& config, const PenaltySpec& spec)
{
    config.validate();
    const auto ks = default_k_grid(data, config);
    const auto lambdas = default_lambda_grid(data, config);
    auto path = rcgl_path(data, ks, lambdas, config);
    std::vector<CoefficientEstimate> cands;
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!path[i].report) continue;
        cands.push_back(detail::maybe_bias_correct(path[i].report->estimate, data, config));
        cells.push_back(i);
    }
    if (cands.empty()) throw NumericalFailure("every RCGL cell failed");
    auto sel = select_from_candidates(cands, data, spec);
    return Method2Audit{std::move(path), std::move(cands), std::move(cells), std::move(sel)};
}

inline FitReport fit_method2(const RegressionData& data, const FitConfig& config, const PenaltySpec& spec)
{
    auto audit = method2_select(data, config, spec);
    const auto& cell = audit.path[audit.cell_of_candidate[audit.selection.winner_index]];
    FitReport rep = *cell.report;
    rep.estimate = audit.selection.winner.retagged(MethodTag::Method2);
    rep.selection_score = audit.selection.scores[audit.selection.winner_index].total;
    rep.k_used = cell.k;
    rep.lambda_used = cell.lambda;
    return rep;
}

/// Group lasso selects predictors, then RSC on the selected predictors fixes the rank of the refit.
inline FitReport fit_method3(const RegressionData& data, const FitConfig& config, const TuningRule& tuning,
                             double sigma)
{
    const FitReport g = fit_glasso(data, config, tuning, sigma);
    const IndexSet& J = g.estimate.support();
    FitReport rep{CoefficientEstimate::zero(data.p(), data.n(), MethodTag::Method3)};
    rep.lambda_used = g.lambda_used;
    rep.converged = g.converged;
    rep.objective_trace = g.objective_trace;
    if (J.empty()) {
        rep.warnings.push_back("group lasso selected no predictors; returning the zero estimate");
        return rep;
    }
    const RegressionData sub = data.restrict_columns(J);
    const auto rs = rsc_rank(sub, sigma, config);
    rep.k_used = rs.r_hat;
    if (rs.r_hat == 0) {
        rep.warnings.push_back("RSC on the selected predictors chose rank 0; returning the zero estimate");
        return rep;
    }
    rep.estimate = rrr_fit(data, rs.r_hat, J, MethodTag::Method3);
    return rep;
}

/// Sufficient condition for the restricted-eigenvalue assumption: Sigma - D positive definite,
/// with D = delta on the diagonal entries indexed by J and zero elsewhere.
inline bool check_assumption_A_sufficient(const RegressionData& data, const IndexSet& J, double delta)
{
    if (J.empty()) throw InvalidInput("J must be non-empty");
    Matrix M = data.gram() / static_cast<double>(data.m());
    for (auto j : J) {
        if (j < 0 || j >= data.p()) throw InvalidInput("index out of range in J");
        M(j, j) -= delta;
    }
    return linalg::min_eigenvalue_sym(M) > 0.0;
}

} // namespace jrrs
