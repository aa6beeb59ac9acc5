#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <jrrs/core_types.hpp>

namespace jrrs {

/// sign(x) * max(|x| - lambda, 0).
inline double soft_threshold_scalar(double x, double lambda)
{
    const double mag = std::abs(x) - lambda;
    if (mag <= 0.0) return 0.0;
    return x > 0.0 ? mag : -mag;
}

/// Shrinks the Euclidean norm of a by lambda, keeping its direction; zero when ||a|| <= lambda.
inline Vector soft_threshold_row(const Vector& a, double lambda)
{
    const double nrm = a.norm();
    if (nrm == 0.0 || nrm <= lambda) return Vector::Zero(a.size());
    return a * (1.0 - lambda / nrm);
}

/// Row-wise soft_threshold_row.
inline Matrix soft_threshold_rows(const Matrix& A, double lambda)
{
    Matrix out(A.rows(), A.cols());
    for (Index i = 0; i < A.rows(); ++i) {
        const double nrm = A.row(i).norm();
        if (nrm == 0.0 || nrm <= lambda) {
            out.row(i).setZero();
        } else {
            out.row(i) = A.row(i) * (1.0 - lambda / nrm);
        }
    }
    return out;
}

/// min_S 1/2 ||R - X S||_F^2 + lambda ||S||_{2,1}.
struct GroupLassoProblem
{
    Matrix X;
    Matrix R;
    double lambda = 0.0;

    GroupLassoProblem(Matrix X_, Matrix R_, double lambda_)
        : X(std::move(X_)), R(std::move(R_)), lambda(lambda_)
    {
        if (X.rows() != R.rows()) throw InvalidInput("X and R row counts differ");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be finite and >= 0");
        linalg::require_finite(X, "X");
        linalg::require_finite(R, "R");
    }
};

struct GroupLassoSolution
{
    Matrix S;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline double group_lasso_objective(const Matrix& X, const Matrix& R, const Matrix& S, double lambda)
{
    return 0.5 * (R - X * S).squaredNorm() + lambda * linalg::norm21(S);
}

/// max_i ||x_i' R||_2: the smallest lambda at which S = 0 solves the problem.
inline double lambda_max(const Matrix& X, const Matrix& R)
{
    const Matrix G = X.transpose() * R;
    return G.rows() ? G.rowwise().norm().maxCoeff() : 0.0;
}

namespace detail {

/// The smooth part expressed through X'X and X'R, so repeated solves never touch m-sized arrays.
struct GramForm
{
    const Matrix* xtx = nullptr;
    Matrix xtr;
    double r_norm_sq = 0.0;
    double lipschitz = 0.0;  // ||X||_2^2
};

inline double gram_objective(const GramForm& g, const Matrix& S, double lambda)
{
    const double lin = (S.array() * g.xtr.array()).sum();
    const double quad = (S.array() * ((*g.xtx) * S).array()).sum();
    return 0.5 * g.r_norm_sq - lin + 0.5 * quad + lambda * linalg::norm21(S);
}

inline Matrix gram_gradient(const GramForm& g, const Matrix& S)
{
    return (*g.xtx) * S - g.xtr;
}

/// Largest per-row violation of the group-lasso optimality conditions:
/// active rows need grad_i + lambda s_i/||s_i|| = 0, inactive rows need ||grad_i|| <= lambda.
inline double kkt_residual_from_gradient(const Matrix& grad, const Matrix& S, double lambda)
{
    double worst = 0.0;
    for (Index i = 0; i < S.rows(); ++i) {
        const double sn = S.row(i).norm();
        double v;
        if (sn > 0.0) {
            v = (grad.row(i) + lambda * S.row(i) / sn).norm();
        } else {
            v = std::max(grad.row(i).norm() - lambda, 0.0);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

inline double step_constant(const GramForm& g, const FitConfig& config)
{
    if (config.K_step) {
        if (!(*config.K_step > 0.5 * g.lipschitz)) {
            throw InvalidConfig("K_step must exceed ||X||_2^2 / 2");
        }
        return *config.K_step;
    }
    return g.lipschitz * (1.0 + 1e-10) + std::numeric_limits<double>::min();
}

/// One application of the thresholding map in Gram form.
inline Matrix gram_threshold_step(const GramForm& g, const Matrix& S, double lambda, double K)
{
    return soft_threshold_rows(S - gram_gradient(g, S) / K, lambda / K);
}

/// Monotone accelerated proximal gradient (MFISTA with restart). The returned objective never
/// exceeds the objective at the starting point.
inline GroupLassoSolution solve_gram(const GramForm& g, double lambda, Matrix S0, const FitConfig& config)
{
    GroupLassoSolution out;
    const double kkt_tol = config.kkt_tol_factor * (1.0 + lambda);
    if (g.lipschitz <= 0.0) {
        // X = 0: every S has the same smooth part, the penalty is minimized at zero.
        out.S = Matrix::Zero(S0.rows(), S0.cols());
        out.objective = gram_objective(g, out.S, lambda);
        out.converged = true;
        return out;
    }
    const double K = step_constant(g, config);

    Matrix x = std::move(S0);
    double fx = gram_objective(g, x, lambda);
    Matrix y = x;
    bool y_is_x = true;
    double t = 1.0;
    int stall = 0;
    int it = 0;
    double kkt = kkt_residual_from_gradient(gram_gradient(g, x), x, lambda);
    while (kkt > kkt_tol && it < config.max_inner_iter) {
        ++it;
        Matrix z = gram_threshold_step(g, y, lambda, K);
        const double fz = gram_objective(g, z, lambda);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        double moved = 0.0;
        if (fz <= fx || y_is_x) {
            // A plain proximal step from x never increases the objective in exact arithmetic,
            // so an apparent increase there is rounding and the step is kept.
            Matrix x_prev = std::move(x);
            x = std::move(z);
            fx = std::min(fz, fx);
            moved = (x - x_prev).norm();
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
            y_is_x = false;
        } else {
            // restart momentum from the incumbent
            y = x;
            t = 1.0;
            y_is_x = true;
        }
        kkt = kkt_residual_from_gradient(gram_gradient(g, x), x, lambda);
        if (!y_is_x) {
            if (moved <= config.inner_rel_tol * (1.0 + x.norm())) {
                if (++stall >= 10) break;
            } else {
                stall = 0;
            }
        }
    }
    fx = gram_objective(g, x, lambda);
    out.S = std::move(x);
    out.objective = fx;
    out.kkt_residual = kkt;
    out.iterations = it;
    out.converged = kkt <= kkt_tol || stall >= 10;
    return out;
}

inline GramForm make_gram_form(const Matrix& xtx, Matrix xtr, double r_norm_sq, double lipschitz)
{
    GramForm g;
    g.xtx = &xtx;
    g.xtr = std::move(xtr);
    g.r_norm_sq = r_norm_sq;
    g.lipschitz = lipschitz;
    return g;
}

} // namespace detail

/// ||x_i'(X S - R)||_2 for each predictor i.
inline Vector kkt_row_scores(const Matrix& X, const Matrix& R, const Matrix& S)
{
    return (X.transpose() * (X * S - R)).rowwise().norm();
}

/// Largest KKT violation of S for the problem (X, R, lambda).
inline double kkt_residual(const Matrix& X, const Matrix& R, const Matrix& S, double lambda)
{
    return detail::kkt_residual_from_gradient(X.transpose() * (X * S - R), S, lambda);
}

/// The thresholding map T_V applied to S:
/// row-wise soft thresholding of (1/K) X'Y V + (I - (1/K) X'X) S at level lambda / K.
inline Matrix threshold_step(const Matrix& S, const Matrix& V, const RegressionData& data, double lambda,
                             double K)
{
    if (!(K > 0.5 * data.x_spectral_norm_sq())) {
        throw InvalidConfig("K must exceed ||X||_2^2 / 2");
    }
    if (V.rows() != data.n() || S.cols() != V.cols() || S.rows() != data.p()) {
        throw InvalidInput("threshold_step: dimension mismatch");
    }
    const Matrix I = Matrix::Identity(V.cols(), V.cols());
    if ((V.transpose() * V - I).norm() > 1e-10) {
        throw InvalidInput("V must have orthonormal columns");
    }
    if (!(lambda >= 0.0)) throw InvalidInput("lambda must be >= 0");
    const Matrix G = data.xty() * V / K + S - data.gram() * S / K;
    return soft_threshold_rows(G, lambda / K);
}

/// Group-lasso solution for the problem, optionally warm-started. lambda = 0 returns the
/// minimum-Frobenius-norm least-squares solution.
inline GroupLassoSolution solve_group_lasso(const GroupLassoProblem& problem, const FitConfig& config,
                                            std::optional<Matrix> warm = std::nullopt)
{
    const Index p = problem.X.cols();
    const Index k = problem.R.cols();
    if (problem.lambda == 0.0) {
        RegressionData d(problem.X, problem.R, config.rank_tol);
        GroupLassoSolution out;
        out.S = d.pinv_apply(problem.R);
        out.objective = group_lasso_objective(problem.X, problem.R, out.S, 0.0);
        out.kkt_residual = kkt_residual(problem.X, problem.R, out.S, 0.0);
        out.converged = true;
        return out;
    }
    const Matrix xtx = problem.X.transpose() * problem.X;
    const double lip = xtx.rows() ? linalg::max_eigenvalue_sym(xtx) : 0.0;
    auto g = detail::make_gram_form(xtx, problem.X.transpose() * problem.R, problem.R.squaredNorm(), lip);
    Matrix S0 = warm ? std::move(*warm) : Matrix::Zero(p, k);
    if (S0.rows() != p || S0.cols() != k) throw InvalidInput("warm start has wrong shape");
    auto out = detail::solve_gram(g, problem.lambda, std::move(S0), config);
    out.objective = group_lasso_objective(problem.X, problem.R, out.S, problem.lambda);
    out.kkt_residual = kkt_residual(problem.X, problem.R, out.S, problem.lambda);
    return out;
}

} // namespace jrrs
