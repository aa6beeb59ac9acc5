#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>
#include <jrrs/error.hpp>

namespace jrrs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ordered set of 0-based row (predictor) indices.
using IndexSet = std::vector<Index>;

namespace linalg {

/// Thin singular value decomposition M = U diag(d) V', d sorted descending.
struct ThinSvd
{
    Matrix U;
    Vector d;
    Matrix V;
};

inline void require_finite(const Matrix& M, const std::string& what)
{
    if (!M.allFinite()) {
        throw InvalidInput(what + " contains non-finite entries");
    }
}

inline ThinSvd thin_svd(const Matrix& M)
{
    ThinSvd out;
    if (M.rows() == 0 || M.cols() == 0) {
        out.U = Matrix::Zero(M.rows(), 0);
        out.V = Matrix::Zero(M.cols(), 0);
        out.d = Vector::Zero(0);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU();
    out.d = svd.singularValues();
    out.V = svd.matrixV();
    return out;
}

inline Vector singular_values(const Matrix& M)
{
    if (M.rows() == 0 || M.cols() == 0) return Vector::Zero(0);
    Eigen::BDCSVD<Matrix> svd(M);
    return svd.singularValues();
}

/// Count of entries of a descending spectrum above rel_tol * d(0).
inline Index count_above_relative(const Vector& d, double rel_tol)
{
    if (d.size() == 0 || d(0) <= 0.0) return 0;
    const double cut = rel_tol * d(0);
    Index r = 0;
    for (Index i = 0; i < d.size(); ++i) {
        if (d(i) > cut) ++r;
    }
    return r;
}

/// Flip paired columns of U and V so the largest-magnitude entry of each U column is positive.
inline void fix_column_signs(Matrix& U, Matrix& V)
{
    for (Index j = 0; j < U.cols(); ++j) {
        Index imax = 0;
        U.col(j).cwiseAbs().maxCoeff(&imax);
        if (U(imax, j) < 0) {
            U.col(j) *= -1.0;
            if (j < V.cols()) V.col(j) *= -1.0;
        }
    }
}

inline Vector row_norms(const Matrix& M)
{
    return M.rowwise().norm();
}

/// Sum of Euclidean row norms.
inline double norm21(const Matrix& M)
{
    return M.rows() == 0 ? 0.0 : M.rowwise().norm().sum();
}

/// Columns of M selected by idx, in order.
inline Matrix select_columns(const Matrix& M, const IndexSet& idx)
{
    Matrix out(M.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.col(static_cast<Index>(j)) = M.col(idx[j]);
    }
    return out;
}

inline Matrix select_rows(const Matrix& M, const std::vector<Index>& idx)
{
    Matrix out(static_cast<Index>(idx.size()), M.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.row(static_cast<Index>(i)) = M.row(idx[i]);
    }
    return out;
}

/// Largest eigenvalue of a symmetric matrix.
inline double max_eigenvalue_sym(const Matrix& S)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue_sym(const Matrix& S)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

} // namespace linalg
} // namespace jrrs
