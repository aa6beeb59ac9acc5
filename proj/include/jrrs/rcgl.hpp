#pragma once
#include <cmath>
#include <optional>
#include <string>
#include <vector>
#include <jrrs/core_types.hpp>
#include <jrrs/glasso.hpp>

namespace jrrs {

/// B = S V' with V (n x k) having orthonormal columns.
struct Factorization
{
    Matrix S;
    Matrix V;

    Index k() const { return S.cols(); }
    Matrix B() const { return S * V.transpose(); }
};

/// F(S V'; lambda) = 1/2 ||Y - X S V'||_F^2 + lambda ||S||_{2,1}.
/// Uses ||S V'||_{2,1} = ||S||_{2,1}, valid for orthonormal V.
inline double rcgl_objective(const Factorization& fac, const RegressionData& data, double lambda)
{
    if (fac.S.rows() != data.p() || fac.V.rows() != data.n() || fac.S.cols() != fac.V.cols()) {
        throw InvalidInput("rcgl_objective: dimension mismatch");
    }
    const Matrix resid = data.Y() - (data.X() * fac.S) * fac.V.transpose();
    return 0.5 * resid.squaredNorm() + lambda * linalg::norm21(fac.S);
}

/// Orthonormal V maximizing tr(W'V) for W = Y'X S: the polar factor U_w V_w' of W.
inline Matrix procrustes_from_w(const Matrix& W)
{
    const Index k = W.cols();
    Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix U = svd.matrixU();
    Matrix Vw = svd.matrixV();
    linalg::fix_column_signs(U, Vw);
    Matrix V = U * Vw.transpose();
    const Matrix I = Matrix::Identity(k, k);
    if ((V.transpose() * V - I).norm() > 1e-12) {
        // Degenerate W: re-orthonormalize so V stays on the Stiefel manifold.
        Eigen::HouseholderQR<Matrix> qr(V);
        Matrix Q = qr.householderQ() * Matrix::Identity(V.rows(), k);
        Matrix R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        for (Index j = 0; j < k; ++j) {
            if (R(j, j) < 0) Q.col(j) *= -1.0;
        }
        V = Q;
    }
    return V;
}

/// The V-step. When W = Y'X S has rank r < k the polar factor is not unique; every completion
/// attains the same objective, and the free k - r columns are taken from the leading left singular
/// vectors of Y'X orthogonal to the determined ones, so predictors outside the current support stay
/// visible to the next S-step.
inline Matrix procrustes_v_update(const Matrix& S, const RegressionData& data)
{
    linalg::require_finite(S, "S");
    if (S.rows() != data.p()) throw InvalidInput("procrustes_v_update: S has wrong row count");
    const Matrix W = data.xty().transpose() * S;
    const Index n = W.rows(), k = W.cols();
    Eigen::JacobiSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const Vector& d = svd.singularValues();
    const double cut = d.size() && d(0) > 0.0 ? d(0) * static_cast<double>(n) * 2.2e-16 : 0.0;
    Index r = 0;
    while (r < d.size() && d(r) > cut) ++r;
    if (r == k) return procrustes_from_w(W);

    Matrix U = svd.matrixU().leftCols(r);
    Matrix Vw = svd.matrixV();
    Matrix Vr = Vw.leftCols(r);
    linalg::fix_column_signs(U, Vr);

    // Candidate directions: Y'X projected off span(U), then the standard basis as a fallback.
    Matrix cand = data.xty().transpose();
    cand -= U * (U.transpose() * cand);
    Eigen::JacobiSVD<Matrix> csvd(cand, Eigen::ComputeThinU);
    Matrix basis(n, k);
    basis.leftCols(r) = U;
    Index filled = r;
    auto try_add = [&](Vector v) {
        v -= basis.leftCols(filled) * (basis.leftCols(filled).transpose() * v);
        v -= basis.leftCols(filled) * (basis.leftCols(filled).transpose() * v);
        const double nv = v.norm();
        if (nv <= 1e-8) return;
        basis.col(filled++) = v / nv;
    };
    const Matrix& cu = csvd.matrixU();
    for (Index j = 0; j < cu.cols() && filled < k; ++j) {
        if (csvd.singularValues()(j) > 0.0) try_add(cu.col(j));
    }
    for (Index j = 0; j < n && filled < k; ++j) try_add(Matrix::Identity(n, n).col(j));

    Matrix vw_order(k, k);
    vw_order.leftCols(r) = Vr;
    vw_order.rightCols(k - r) = Vw.rightCols(k - r);
    return basis * vw_order.transpose();
}

/// Initial V: the first k right singular vectors of Y, or the first k coordinate columns.
inline Matrix initial_v(const RegressionData& data, Index k, VInit init)
{
    if (init == VInit::coordinate_columns) {
        return Matrix::Identity(data.n(), k);
    }
    Eigen::JacobiSVD<Matrix> svd(data.Y(), Eigen::ComputeThinU | Eigen::ComputeFullV);
    Matrix U = svd.matrixU();
    Matrix V = svd.matrixV();
    linalg::fix_column_signs(V, U);
    return V.leftCols(k);
}

namespace detail {

/// Step (a): S given V, either solved to KKT tolerance or by M_iter thresholding steps.
inline Matrix rcgl_s_update(const RegressionData& data, const Matrix& V, Matrix S, double lambda,
                            const FitConfig& config, const Matrix* ls_solution)
{
    if (config.inner_variant == InnerVariant::exact_glasso && lambda == 0.0 && ls_solution) {
        return (*ls_solution) * V;
    }
    const Matrix YV = data.Y() * V;
    auto g = make_gram_form(data.gram(), data.xty() * V, YV.squaredNorm(), data.x_spectral_norm_sq());
    if (config.inner_variant == InnerVariant::exact_glasso) {
        return solve_gram(g, lambda, std::move(S), config).S;
    }
    const double K = step_constant(g, config);
    for (int i = 0; i < config.M_iter; ++i) {
        S = gram_threshold_step(g, S, lambda, K);
    }
    return S;
}

} // namespace detail

/// Rank-constrained group lasso: minimizes 1/2||Y - XB||_F^2 + lambda ||B||_{2,1} over r(B) <= k
/// by alternating the S-step with the orthogonal Procrustes V-step.
inline FitReport fit_rcgl(const RegressionData& data, int k, double lambda, const FitConfig& config,
                          std::optional<Factorization> warm = std::nullopt)
{
    config.validate();
    config.validate_k(k, data);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidConfig("lambda must be finite and >= 0");

    Factorization fac;
    if (warm && warm->S.rows() == data.p() && warm->S.cols() == k && warm->V.rows() == data.n()
        && warm->S.squaredNorm() > 0.0) {
        fac = std::move(*warm);
    } else {
        fac.S = Matrix::Zero(data.p(), k);
        fac.V = initial_v(data, k, config.v_init);
    }

    std::optional<Matrix> ls;
    if (lambda == 0.0 && config.inner_variant == InnerVariant::exact_glasso) {
        ls = data.pinv_apply(data.Y());
    }

    std::vector<double> trace;
    trace.push_back(rcgl_objective(fac, data, lambda));
    const double eps = config.eps_outer * (1.0 + trace.front());
    bool converged = false;
    int it = 0;
    while (it < config.max_outer_iter) {
        ++it;
        fac.S = detail::rcgl_s_update(data, fac.V, std::move(fac.S), lambda, config, ls ? &*ls : nullptr);
        fac.V = procrustes_v_update(fac.S, data);
        const double f = rcgl_objective(fac, data, lambda);
        if (!std::isfinite(f)) throw NumericalFailure("non-finite RCGL objective");
        const double prev = trace.back();
        trace.push_back(f);
        if (std::abs(f - prev) < eps) {
            // A flat objective is not enough: S must also solve its subproblem for the updated V.
            if (config.inner_variant == InnerVariant::exact_glasso && lambda > 0.0) {
                const Matrix grad = data.gram() * fac.S - data.xty() * fac.V;
                if (detail::kkt_residual_from_gradient(grad, fac.S, lambda) > config.kkt_tol_factor * (1.0 + lambda)) {
                    continue;
                }
            }
            converged = true;
            break;
        }
    }

    FitReport rep{CoefficientEstimate(fac.B(), MethodTag::RCGL, config.support_tol, config.rank_tol)};
    rep.objective_trace = std::move(trace);
    rep.iterations = it;
    rep.converged = converged;
    rep.lambda_used = lambda;
    rep.k_used = k;
    rep.S = std::move(fac.S);
    rep.V = std::move(fac.V);
    return rep;
}

struct PathEntry
{
    int k = 0;
    double lambda = 0.0;
    std::optional<FitReport> report;
    std::string error;
};

/// One fit per (k, lambda); within each k the lambdas are visited in the given order and warm-started.
inline std::vector<PathEntry> rcgl_path(const RegressionData& data, const std::vector<int>& k_grid,
                                        const std::vector<double>& lambda_grid, const FitConfig& config)
{
    if (k_grid.empty() || lambda_grid.empty()) throw InvalidConfig("rcgl_path: grids must be non-empty");
    std::vector<PathEntry> out;
    out.reserve(k_grid.size() * lambda_grid.size());
    for (int k : k_grid) {
        std::optional<Factorization> warm;
        for (double lambda : lambda_grid) {
            PathEntry e;
            e.k = k;
            e.lambda = lambda;
            try {
                e.report = fit_rcgl(data, k, lambda, config, warm);
                warm = Factorization{*e.report->S, *e.report->V};
            } catch (const Error& err) {
                e.error = err.what();
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

} // namespace jrrs
