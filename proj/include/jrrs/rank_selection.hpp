#pragma once
#include <cmath>
#include <optional>
#include <jrrs/core_types.hpp>

namespace jrrs {

struct RankSelection
{
    int r_hat = 0;
    double threshold = 0.0;
    Vector singular_values;  // d_i(PY), descending
    double sigma_used = 0.0;
    double multiplier = 0.0;
};

/// Rank selection criterion: the number of singular values of PY above
/// multiplier * sigma * (sqrt(n) + sqrt(q)).
///
/// With config.rsc_log_m_correction, q is replaced by q log(m) in the threshold, which is
/// advisable when n + q is small relative to m.
inline RankSelection rsc_rank(const RegressionData& data, double sigma, const FitConfig& config)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be positive");
    const double q = static_cast<double>(data.q());
    const double q_eff = config.rsc_log_m_correction ? q * std::log(static_cast<double>(data.m())) : q;
    RankSelection out;
    out.sigma_used = sigma;
    out.multiplier = config.rsc_multiplier;
    out.threshold = config.rsc_multiplier * sigma * (std::sqrt(static_cast<double>(data.n())) + std::sqrt(q_eff));
    // PY = Q Q'Y shares its nonzero singular values with Q'Y.
    out.singular_values = linalg::singular_values(data.column_basis().transpose() * data.Y());
    for (Index i = 0; i < out.singular_values.size(); ++i) {
        if (out.singular_values(i) > out.threshold) ++out.r_hat;
    }
    return out;
}

/// Rank-k reduced-rank regression, optionally on the predictors in restrict_to only:
/// B_J = X_J^+ Y V_k V_k' with V_k the top-k right singular vectors of P_J Y, zero rows off J.
/// X B is then the best rank-k approximation of P_J Y.
inline CoefficientEstimate rrr_fit(const RegressionData& data, int k,
                                   const std::optional<IndexSet>& restrict_to = std::nullopt,
                                   MethodTag tag = MethodTag::RSC)
{
    if (restrict_to && restrict_to->empty()) throw InvalidInput("restrict_to must be non-empty");
    const RegressionData sub = restrict_to ? data.restrict_columns(*restrict_to) : data;
    const Index kmax = std::min(sub.q(), sub.n());
    if (k < 1 || k > kmax) {
        throw InvalidConfig("rrr_fit: k = " + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
    }
    Eigen::JacobiSVD<Matrix> svd(sub.column_basis().transpose() * sub.Y(), Eigen::ComputeThinV);
    const Matrix Vk = svd.matrixV().leftCols(k);
    const Matrix BJ = sub.pinv_apply(sub.Y() * Vk) * Vk.transpose();
    Matrix B = Matrix::Zero(data.p(), data.n());
    if (restrict_to) {
        for (std::size_t j = 0; j < restrict_to->size(); ++j) {
            B.row((*restrict_to)[j]) = BJ.row(static_cast<Index>(j));
        }
    } else {
        B = BJ;
    }
    return CoefficientEstimate(std::move(B), tag, default_support_tol, data.rank_tol());
}

/// ||Y - PY||_F^2 / ((m - q) n).
inline double estimate_sigma2(const RegressionData& data)
{
    if (data.m() <= data.q()) {
        throw SigmaNotEstimable("sigma^2 is not estimable: m = " + std::to_string(data.m())
                                + " does not exceed rank(X) = " + std::to_string(data.q()));
    }
    const double rss = (data.Y() - data.project(data.Y())).squaredNorm();
    const double s2 = rss / (static_cast<double>(data.m() - data.q()) * static_cast<double>(data.n()));
    if (!(rss > 1e-24 * data.Y().squaredNorm()) || !(s2 > 0.0)) {
        throw SigmaNotEstimable("sigma^2 estimate is zero: the response lies in the column space of X");
    }
    return s2;
}

} // namespace jrrs
