#pragma once
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>
#include <jrrs/error.hpp>
#include <jrrs/linalg.hpp>

namespace jrrs {

inline constexpr double default_rank_tol = 1e-8;
inline constexpr double default_support_tol = 1e-8;

/// Count of singular values of M exceeding rank_tol * d_1(M). Zero matrix has rank 0.
inline Index numerical_rank(const Matrix& M, double rank_tol = default_rank_tol)
{
    linalg::require_finite(M, "matrix");
    if (!(rank_tol > 0.0)) throw InvalidInput("rank_tol must be positive");
    return linalg::count_above_relative(linalg::singular_values(M), rank_tol);
}

/// 0-based indices of rows of M whose Euclidean norm exceeds support_tol.
inline IndexSet row_support(const Matrix& M, double support_tol = default_support_tol)
{
    linalg::require_finite(M, "matrix");
    IndexSet out;
    for (Index i = 0; i < M.rows(); ++i) {
        if (M.row(i).norm() > support_tol) out.push_back(i);
    }
    return out;
}

/// The observed pair (X, Y) of the model Y = XA + E with cached decompositions of X.
///
/// The decomposition (thin SVD of X, Gram matrices) is computed on first use and shared
/// between copies; the object is immutable and safe to read from several threads.
class RegressionData
{
public:
    RegressionData(Matrix X, Matrix Y, double rank_tol = default_rank_tol)
        : X_(std::move(X)), Y_(std::move(Y)), rank_tol_(rank_tol),
          cache_(std::make_shared<Cache>())
    {
        if (X_.rows() < 1 || X_.cols() < 1 || Y_.cols() < 1) {
            throw InvalidInput("design and response must be non-empty");
        }
        if (X_.rows() != Y_.rows()) {
            throw InvalidInput("X has " + std::to_string(X_.rows()) + " rows but Y has "
                               + std::to_string(Y_.rows()));
        }
        if (!(rank_tol_ > 0.0)) throw InvalidInput("rank_tol must be positive");
        linalg::require_finite(X_, "X");
        linalg::require_finite(Y_, "Y");
    }

    const Matrix& X() const { return X_; }
    const Matrix& Y() const { return Y_; }
    Index m() const { return X_.rows(); }
    Index p() const { return X_.cols(); }
    Index n() const { return Y_.cols(); }
    double rank_tol() const { return rank_tol_; }

    /// Numerical rank of X.
    Index q() const { return decomp().q; }

    /// Singular values of X, descending.
    const Vector& x_singular_values() const { return decomp().svd.d; }

    /// ||X||_2^2.
    double x_spectral_norm_sq() const
    {
        const auto& d = decomp().svd.d;
        return d.size() ? d(0) * d(0) : 0.0;
    }

    /// Orthonormal basis (m x q) of the column space of X.
    const Matrix& column_basis() const { return decomp().basis; }

    /// P Y computed through the column basis; never forms the m x m projector.
    Matrix project(const Matrix& M) const
    {
        const Matrix& Q = column_basis();
        return Q * (Q.transpose() * M);
    }

    /// Dense m x m projector onto the column space of X.
    Matrix projector() const
    {
        const Matrix& Q = column_basis();
        return Q * Q.transpose();
    }

    /// X'X (p x p).
    const Matrix& gram() const { return grams().xtx; }

    /// X'Y (p x n).
    const Matrix& xty() const { return grams().xty; }

    /// Moore-Penrose pseudo-inverse of X applied to M: X^+ M (p x cols(M)).
    Matrix pinv_apply(const Matrix& M) const
    {
        const auto& dc = decomp();
        const Index q = dc.q;
        Matrix coef = dc.svd.U.leftCols(q).transpose() * M;
        for (Index i = 0; i < q; ++i) coef.row(i) /= dc.svd.d(i);
        return dc.svd.V.leftCols(q) * coef;
    }

    RegressionData with_response(Matrix Y) const { return RegressionData(X_, std::move(Y), rank_tol_); }

    RegressionData restrict_columns(const IndexSet& J) const
    {
        if (J.empty()) throw InvalidInput("column restriction must be non-empty");
        for (auto j : J) {
            if (j < 0 || j >= p()) throw InvalidInput("column index out of range");
        }
        return RegressionData(linalg::select_columns(X_, J), Y_, rank_tol_);
    }

    RegressionData subset_rows(const std::vector<Index>& rows) const
    {
        return RegressionData(linalg::select_rows(X_, rows), linalg::select_rows(Y_, rows), rank_tol_);
    }

private:
    struct Decomp
    {
        linalg::ThinSvd svd;
        Index q = 0;
        Matrix basis;
    };
    struct Grams
    {
        Matrix xtx;
        Matrix xty;
    };
    struct Cache
    {
        std::once_flag decomp_once;
        std::once_flag grams_once;
        Decomp decomp;
        Grams grams;
    };

    const Decomp& decomp() const
    {
        std::call_once(cache_->decomp_once, [this] {
            auto& dc = cache_->decomp;
            dc.svd = linalg::thin_svd(X_);
            dc.q = linalg::count_above_relative(dc.svd.d, rank_tol_);
            dc.basis = dc.svd.U.leftCols(dc.q);
        });
        return cache_->decomp;
    }

    const Grams& grams() const
    {
        std::call_once(cache_->grams_once, [this] {
            cache_->grams.xtx = X_.transpose() * X_;
            cache_->grams.xty = X_.transpose() * Y_;
        });
        return cache_->grams;
    }

    Matrix X_;
    Matrix Y_;
    double rank_tol_;
    std::shared_ptr<Cache> cache_;
};

enum class MethodTag
{
    JRRS1,
    RCGL,
    GLASSO,
    RSC,
    Method1,
    Method2,
    Method3,
    OLS_restricted,
};

inline std::string_view to_string(MethodTag t)
{
    switch (t) {
    case MethodTag::JRRS1: return "JRRS1";
    case MethodTag::RCGL: return "RCGL";
    case MethodTag::GLASSO: return "GLASSO";
    case MethodTag::RSC: return "RSC";
    case MethodTag::Method1: return "Method1";
    case MethodTag::Method2: return "Method2";
    case MethodTag::Method3: return "Method3";
    case MethodTag::OLS_restricted: return "OLS_restricted";
    }
    return "unknown";
}

/// A p x n coefficient matrix with its numerical rank and row support.
///
/// Rank and support are always derived from B with the stored tolerances, so the
/// recorded values can be reproduced from B alone.
class CoefficientEstimate
{
public:
    CoefficientEstimate(Matrix B, MethodTag tag, double support_tol = default_support_tol,
                        double rank_tol = default_rank_tol)
        : B_(std::move(B)), tag_(tag), support_tol_(support_tol), rank_tol_(rank_tol)
    {
        if (!(support_tol_ > 0.0) || !(rank_tol_ > 0.0)) {
            throw InvalidInput("tolerances must be positive");
        }
        support_ = row_support(B_, support_tol_);
        rank_ = numerical_rank(B_, rank_tol_);
    }

    static CoefficientEstimate zero(Index p, Index n, MethodTag tag)
    {
        return CoefficientEstimate(Matrix::Zero(p, n), tag);
    }

    const Matrix& B() const { return B_; }
    Index rank() const { return rank_; }
    const IndexSet& support() const { return support_; }
    MethodTag method() const { return tag_; }
    double support_tol() const { return support_tol_; }
    double rank_tol() const { return rank_tol_; }

    CoefficientEstimate retagged(MethodTag tag) const
    {
        CoefficientEstimate out = *this;
        out.tag_ = tag;
        return out;
    }

    /// Same matrix multiplied by t; support and rank recomputed.
    CoefficientEstimate scaled(double t) const
    {
        return CoefficientEstimate(B_ * t, tag_, support_tol_, rank_tol_);
    }

private:
    Matrix B_;
    MethodTag tag_;
    double support_tol_;
    double rank_tol_;
    IndexSet support_;
    Index rank_ = 0;
};

/// Constants of the joint rank/row penalty. No default for c: the caller picks theory or practice mode.
struct PenaltySpec
{
    double c;
    double sigma2;

    PenaltySpec(double c_, double sigma2_) : c(c_), sigma2(sigma2_)
    {
        if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("penalty constant c must be positive");
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidInput("sigma2 must be positive");
    }

    /// c = 12, the constant under which the oracle inequality is stated.
    static PenaltySpec theory(double sigma2) { return {12.0, sigma2}; }
    /// c = 3, the constant used for the simulation studies.
    static PenaltySpec practice(double sigma2) { return {3.0, sigma2}; }
};

enum class InnerVariant
{
    exact_glasso,  // solve the S-subproblem to KKT tolerance
    thresholding,  // at most M_iter thresholding steps per outer iteration
};

enum class VInit
{
    right_singular_vectors,
    coordinate_columns,
};

struct FitConfig
{
    std::vector<double> lambda_grid;  // empty: log-spaced default from lambda_max
    std::vector<int> k_grid;          // empty: 1..min(q, n)
    double eps_outer = 1e-6;          // stop when |dF| < eps_outer * (1 + F(B0))
    int max_outer_iter = 500;
    InnerVariant inner_variant = InnerVariant::exact_glasso;
    int M_iter = 10;
    std::optional<double> K_step;  // nullopt: ||X||_2^2 with a small margin
    double support_tol = default_support_tol;
    double rank_tol = default_rank_tol;
    double C_tune = 1.0;
    double rsc_multiplier = std::sqrt(2.0);
    bool rsc_log_m_correction = false;
    std::uint64_t seed = 0;

    VInit v_init = VInit::right_singular_vectors;
    int max_inner_iter = 20000;
    double inner_rel_tol = 1e-15;
    double kkt_tol_factor = 1e-6;  // kkt_tol = kkt_tol_factor * (1 + lambda)
    bool bias_correct = true;
    int lambda_grid_size = 30;
    double lambda_grid_ratio = 1e-3;

    void validate() const
    {
        if (!(eps_outer > 0.0)) throw InvalidConfig("eps_outer must be positive");
        if (max_outer_iter < 1) throw InvalidConfig("max_outer_iter must be >= 1");
        if (M_iter < 1) throw InvalidConfig("M_iter must be >= 1");
        if (K_step && !(*K_step > 0.0)) throw InvalidConfig("K_step must be positive");
        if (!(support_tol > 0.0) || !(rank_tol > 0.0)) throw InvalidConfig("tolerances must be positive");
        if (!(C_tune > 0.0)) throw InvalidConfig("C_tune must be positive");
        if (!(rsc_multiplier > 0.0)) throw InvalidConfig("rsc_multiplier must be positive");
        if (max_inner_iter < 1) throw InvalidConfig("max_inner_iter must be >= 1");
        for (double l : lambda_grid) {
            if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidConfig("lambda grid values must be finite and >= 0");
        }
        for (int k : k_grid) {
            if (k < 1) throw InvalidConfig("k grid values must be >= 1");
        }
    }

    /// Checks k against min(m, p, n) for the given data.
    void validate_k(int k, const RegressionData& data) const
    {
        const Index kmax = std::min({data.m(), data.p(), data.n()});
        if (k < 1 || k > kmax) {
            throw InvalidConfig("k = " + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
        }
    }
};

/// Result of a single fit (or a selection among fits).
struct FitReport
{
    explicit FitReport(CoefficientEstimate e) : estimate(std::move(e)) {}

    CoefficientEstimate estimate;
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
    double lambda_used = 0.0;
    int k_used = 0;
    std::optional<double> selection_score;
    std::optional<Matrix> S;  // factor of B = S V' when produced by the alternating solver
    std::optional<Matrix> V;
    std::vector<std::string> warnings;
};

} // namespace jrrs
