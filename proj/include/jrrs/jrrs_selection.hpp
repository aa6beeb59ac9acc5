#pragma once
#include <cmath>
#include <numbers>
#include <vector>
#include <jrrs/core_types.hpp>
#include <jrrs/rank_selection.hpp>

namespace jrrs {

struct JrrsScore
{
    double rss = 0.0;
    double penalty = 0.0;
    double total = 0.0;
    int r_used = 0;
    int j_used = 0;
};

/// c sigma^2 r {2n + log(2e) j + j log(e p / j)}; zero when r = 0.
inline double jrrs_penalty(int r, int j, int n, int p, const PenaltySpec& spec)
{
    if (r < 0 || j < 0 || n < 1 || p < 1 || j > p) throw InvalidInput("jrrs_penalty: arguments out of range");
    if (j >= 1 && r > std::min(j, n)) {
        throw InvalidInput("jrrs_penalty: rank " + std::to_string(r) + " exceeds min(|J|, n)");
    }
    if (r == 0) return 0.0;
    const double rd = r;
    const double nd = n;
    if (j == 0) return spec.c * spec.sigma2 * rd * 2.0 * nd;
    const double jd = j;
    const double log2e = std::log(2.0) + 1.0;
    return spec.c * spec.sigma2 * rd * (2.0 * nd + log2e * jd + jd * (1.0 + std::log(p / jd)));
}

inline JrrsScore jrrs_score(const CoefficientEstimate& est, const RegressionData& data, const PenaltySpec& spec)
{
    JrrsScore s;
    s.rss = (data.Y() - data.X() * est.B()).squaredNorm();
    s.j_used = static_cast<int>(est.support().size());
    s.r_used = static_cast<int>(std::min<Index>(est.rank(), std::min<Index>(s.j_used, data.n())));
    s.penalty = jrrs_penalty(s.r_used, s.j_used, static_cast<int>(data.n()), static_cast<int>(data.p()), spec);
    s.total = s.rss + s.penalty;
    return s;
}

struct CandidateSelection
{
    std::size_t winner_index = 0;
    CoefficientEstimate winner;
    std::vector<JrrsScore> scores;
};

namespace detail {

/// a precedes b: lower total, then lower rank, then smaller support. Index order is the caller's.
inline bool jrrs_better(const JrrsScore& a, const JrrsScore& b)
{
    if (a.total != b.total) return a.total < b.total;
    if (a.r_used != b.r_used) return a.r_used < b.r_used;
    return a.j_used < b.j_used;
}

} // namespace detail

/// Penalized least-squares choice among arbitrary candidate estimates.
inline CandidateSelection select_from_candidates(const std::vector<CoefficientEstimate>& candidates,
                                                 const RegressionData& data, const PenaltySpec& spec)
{
    if (candidates.empty()) throw InvalidInput("select_from_candidates: empty candidate list");
    std::vector<JrrsScore> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.B().rows() != data.p() || c.B().cols() != data.n()) {
            throw InvalidInput("candidate has wrong shape");
        }
        scores.push_back(jrrs_score(c, data, spec));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (detail::jrrs_better(scores[i], scores[best])) best = i;
    }
    return CandidateSelection{best, candidates[best], std::move(scores)};
}

/// Winning cell of the exhaustive (support, rank) search.
struct JrrsSearchResult
{
    IndexSet support;  // empty: the zero matrix won
    int rank = 0;
    double rss = 0.0;
    double penalty = 0.0;
    double total = 0.0;
    std::size_t cells = 0;
};

inline constexpr int default_jrrs_p_cap = 20;

/// Exhaustive minimization of ||Y - XB||_F^2 + pen(B) over all supports J and ranks k.
///
/// For fixed (J, k) the best fit is the rank-k reduced-rank regression on X_J, with residual
/// ||Y||_F^2 - sum_{i<=k} d_i^2(P_J Y). Supports are visited by increasing size and
/// lexicographically within a size; ties keep the first cell visited.
inline JrrsSearchResult jrrs_exhaustive_search(const RegressionData& data, const PenaltySpec& spec,
                                               int p_cap = default_jrrs_p_cap)
{
    const int p = static_cast<int>(data.p());
    const int n = static_cast<int>(data.n());
    if (p > p_cap) {
        throw RefusedTooLarge("exhaustive search over 2^" + std::to_string(p)
                              + " supports refused (cap " + std::to_string(p_cap)
                              + "); use method1, method2 or method3");
    }
    const double y2 = data.Y().squaredNorm();
    JrrsSearchResult best;
    best.rss = y2;
    best.total = y2;
    best.cells = 1;

    std::vector<Index> comb;
    for (int size = 1; size <= p; ++size) {
        comb.resize(size);
        for (int i = 0; i < size; ++i) comb[i] = i;
        while (true) {
            const RegressionData sub = data.restrict_columns(comb);
            const Vector d = linalg::singular_values(sub.column_basis().transpose() * sub.Y());
            const int kmax = static_cast<int>(std::min<Index>({static_cast<Index>(size), data.n(), sub.q()}));
            double explained = 0.0;
            for (int k = 1; k <= kmax; ++k) {
                explained += d(k - 1) * d(k - 1);
                const double rss = std::max(y2 - explained, 0.0);
                const double pen = jrrs_penalty(k, size, n, p, spec);
                ++best.cells;
                if (rss + pen < best.total) {
                    best.support.assign(comb.begin(), comb.end());
                    best.rank = k;
                    best.rss = rss;
                    best.penalty = pen;
                    best.total = rss + pen;
                }
            }
            // next combination in lexicographic order
            int i = size - 1;
            while (i >= 0 && comb[i] == p - size + i) --i;
            if (i < 0) break;
            ++comb[i];
            for (int j = i + 1; j < size; ++j) comb[j] = comb[j - 1] + 1;
        }
    }
    return best;
}

/// Single-stage joint rank and row selection by exhaustive search (p <= p_cap).
inline FitReport fit_jrrs_exhaustive(const RegressionData& data, const PenaltySpec& spec,
                                     int p_cap = default_jrrs_p_cap)
{
    const auto res = jrrs_exhaustive_search(data, spec, p_cap);
    FitReport rep{res.rank == 0 ? CoefficientEstimate::zero(data.p(), data.n(), MethodTag::JRRS1)
                                : rrr_fit(data, res.rank, res.support, MethodTag::JRRS1)};
    rep.k_used = res.rank;
    rep.selection_score = res.total;
    rep.converged = true;
    return rep;
}

} // namespace jrrs
