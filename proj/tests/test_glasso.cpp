#include <gtest/gtest.h>
#include <random>
#include <jrrs/glasso.hpp>
#include "oracles.hpp"

using namespace jrrs;

TEST(SoftThreshold, Scalar)
{
    EXPECT_DOUBLE_EQ(soft_threshold_scalar(5.0, 2.5), 2.5);
    EXPECT_DOUBLE_EQ(soft_threshold_scalar(0.0, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold_scalar(-1.0, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(soft_threshold_scalar(-4.0, 1.0), -3.0);
}

TEST(SoftThreshold, Row)
{
    Vector a(2);
    a << 3, 4;
    const Vector out = soft_threshold_row(a, 2.5);
    EXPECT_DOUBLE_EQ(out(0), 1.5);
    EXPECT_DOUBLE_EQ(out(1), 2.0);
    EXPECT_TRUE(soft_threshold_row(Vector::Zero(2), 1.0).isZero(0.0));
    EXPECT_TRUE(soft_threshold_row(a, 5.0).isZero(0.0));
}

TEST(SoftThreshold, RowsMatchRowWiseApplication)
{
    std::mt19937_64 rng(2);
    const Matrix A = oracle::gaussian(7, 3, rng);
    const Matrix out = soft_threshold_rows(A, 1.2);
    for (Index i = 0; i < A.rows(); ++i) {
        EXPECT_LE((out.row(i).transpose() - soft_threshold_row(A.row(i).transpose(), 1.2)).norm(), 1e-15);
    }
}

namespace {

struct Instance
{
    RegressionData data;
    Matrix V;
};

Instance random_instance(std::mt19937_64& rng, Index m, Index p, Index n, Index k)
{
    return {RegressionData(oracle::gaussian(m, p, rng), oracle::gaussian(m, n, rng)),
            oracle::random_stiefel(n, k, rng)};
}

} // namespace

TEST(ThresholdStep, FromZeroIsThresholdedCorrelation)
{
    std::mt19937_64 rng(4);
    auto inst = random_instance(rng, 10, 5, 4, 2);
    const double K = inst.data.x_spectral_norm_sq();
    const double lambda = 1.5;
    const Matrix step = threshold_step(Matrix::Zero(5, 2), inst.V, inst.data, lambda, K);
    const Matrix expect = soft_threshold_rows(inst.data.X().transpose() * inst.data.Y() * inst.V / K, lambda / K);
    EXPECT_LE((step - expect).norm(), 1e-12 * (1.0 + expect.norm()));
}

TEST(ThresholdStep, OrthonormalDesignGivesLeastSquaresInOneStep)
{
    std::mt19937_64 rng(6);
    Eigen::HouseholderQR<Matrix> qr(oracle::gaussian(9, 4, rng));
    const Matrix X = qr.householderQ() * Matrix::Identity(9, 4);
    RegressionData d(X, oracle::gaussian(9, 3, rng));
    const Matrix V = oracle::random_stiefel(3, 2, rng);
    const Matrix S0 = oracle::gaussian(4, 2, rng);
    const Matrix step = threshold_step(S0, V, d, 0.0, 1.0);
    EXPECT_LE((step - X.transpose() * d.Y() * V).norm(), 1e-12);
}

TEST(ThresholdStep, FixedPointIsPreserved)
{
    std::mt19937_64 rng(8);
    auto inst = random_instance(rng, 15, 5, 3, 2);
    const Matrix R = inst.data.Y() * inst.V;
    FitConfig cfg;
    cfg.kkt_tol_factor = 1e-13;
    const auto sol = solve_group_lasso(GroupLassoProblem(inst.data.X(), R, 0.7), cfg);
    const Matrix step = threshold_step(sol.S, inst.V, inst.data, 0.7, inst.data.x_spectral_norm_sq());
    EXPECT_LE((step - sol.S).norm(), 1e-9 * (1.0 + sol.S.norm()));
}

TEST(ThresholdStep, ObjectiveNeverIncreasesWhenKExceedsHalfLipschitz)
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 40; ++trial) {
        const Index m = 8 + trial % 7, p = 3 + trial % 6, n = 2 + trial % 3, k = 1 + trial % n;
        auto inst = random_instance(rng, m, p, n, k);
        const double L = inst.data.x_spectral_norm_sq();
        const double K = L * (0.51 + 0.1 * (trial % 8));
        const double lambda = 0.2 * (trial % 5);
        const Matrix R = inst.data.Y() * inst.V;
        Matrix S = oracle::gaussian(p, k, rng);
        double f = oracle::group_lasso_objective(inst.data.X(), R, S, lambda);
        for (int it = 0; it < 50; ++it) {
            S = threshold_step(S, inst.V, inst.data, lambda, K);
            const double fn = oracle::group_lasso_objective(inst.data.X(), R, S, lambda);
            ASSERT_LE(fn, f + 1e-12 * (1.0 + std::abs(f))) << "trial " << trial << " iter " << it;
            f = fn;
        }
    }
}

TEST(ThresholdStep, RejectsSmallStepConstantAndBadV)
{
    std::mt19937_64 rng(12);
    auto inst = random_instance(rng, 10, 4, 3, 2);
    const double L = inst.data.x_spectral_norm_sq();
    EXPECT_THROW(threshold_step(Matrix::Zero(4, 2), inst.V, inst.data, 1.0, 0.5 * L), InvalidConfig);
    EXPECT_THROW(threshold_step(Matrix::Zero(4, 2), 2.0 * inst.V, inst.data, 1.0, L), InvalidInput);
}

TEST(GroupLasso, ZeroAboveLambdaMax)
{
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix X = oracle::gaussian(12, 6, rng);
        const Matrix R = oracle::gaussian(12, 3, rng);
        const double lmax = lambda_max(X, R);
        const auto sol = solve_group_lasso(GroupLassoProblem(X, R, lmax * (1.0 + 0.1 * trial)), FitConfig{});
        EXPECT_TRUE(sol.S.isZero(0.0));
        EXPECT_LE(kkt_row_scores(X, R, sol.S).maxCoeff(), lmax * (1.0 + 1e-12));
    }
}

TEST(GroupLasso, IdentityDesignLeastSquares)
{
    std::mt19937_64 rng(16);
    const Matrix R = oracle::gaussian(5, 2, rng);
    const auto sol = solve_group_lasso(GroupLassoProblem(Matrix::Identity(5, 5), R, 0.0), FitConfig{});
    EXPECT_LE((sol.S - R).norm(), 1e-12);
}

TEST(GroupLasso, IdentityDesignIsRowSoftThreshold)
{
    std::mt19937_64 rng(18);
    const Matrix R = oracle::gaussian(6, 3, rng);
    FitConfig cfg;
    cfg.kkt_tol_factor = 1e-12;
    const auto sol = solve_group_lasso(GroupLassoProblem(Matrix::Identity(6, 6), R, 1.1), cfg);
    EXPECT_LE((sol.S - soft_threshold_rows(R, 1.1)).norm(), 1e-10);
}

TEST(GroupLasso, MatchesProximalOracleOnSmallProblem)
{
    std::mt19937_64 rng(20);
    const Matrix X = oracle::gaussian(6, 4, rng);
    const Matrix R = oracle::gaussian(6, 2, rng);
    const auto sol = solve_group_lasso(GroupLassoProblem(X, R, 1.0), FitConfig{});
    const Matrix ref = oracle::prox_group_lasso(X, R, 1.0);
    const double f_ref = oracle::group_lasso_objective(X, R, ref, 1.0);
    EXPECT_LE(std::abs(sol.objective - f_ref), 1e-5 * std::abs(f_ref));
    EXPECT_TRUE(sol.converged);
}

TEST(GroupLasso, MatchesCoordinateDescentOracleAcrossShapes)
{
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 25; ++trial) {
        const Index m = 5 + trial % 20, p = 2 + trial % 9, k = 1 + trial % 4;
        const Matrix X = oracle::gaussian(m, p, rng);
        const Matrix R = oracle::gaussian(m, k, rng);
        const double lambda = lambda_max(X, R) * (0.05 + 0.04 * trial);
        const auto sol = solve_group_lasso(GroupLassoProblem(X, R, lambda), FitConfig{});
        const Matrix ref = oracle::bcd_group_lasso(X, R, lambda);
        const double f_ref = oracle::group_lasso_objective(X, R, ref, lambda);
        EXPECT_LE(sol.objective, f_ref + 1e-7 * (1.0 + std::abs(f_ref))) << "trial " << trial;
        EXPECT_LE(sol.kkt_residual, 1e-6 * (1.0 + lambda)) << "trial " << trial;
    }
}

TEST(GroupLasso, WarmStartReachesSameObjective)
{
    std::mt19937_64 rng(24);
    const Matrix X = oracle::gaussian(20, 8, rng);
    const Matrix R = oracle::gaussian(20, 3, rng);
    const double lambda = 0.3 * lambda_max(X, R);
    const auto cold = solve_group_lasso(GroupLassoProblem(X, R, lambda), FitConfig{});
    const auto warm = solve_group_lasso(GroupLassoProblem(X, R, lambda), FitConfig{}, oracle::gaussian(8, 3, rng));
    EXPECT_NEAR(cold.objective, warm.objective, 1e-8 * (1.0 + cold.objective));
}

TEST(GroupLasso, InputValidation)
{
    EXPECT_THROW(GroupLassoProblem(Matrix::Ones(3, 2), Matrix::Ones(4, 1), 1.0), InvalidInput);
    EXPECT_THROW(GroupLassoProblem(Matrix::Ones(3, 2), Matrix::Ones(3, 1), -1.0), InvalidInput);
    GroupLassoProblem ok(Matrix::Ones(3, 2), Matrix::Ones(3, 1), 1.0);
    EXPECT_THROW(solve_group_lasso(ok, FitConfig{}, Matrix::Zero(5, 5)), InvalidInput);
}

TEST(GroupLasso, ZeroDesign)
{
    const auto sol = solve_group_lasso(GroupLassoProblem(Matrix::Zero(4, 3), Matrix::Ones(4, 2), 0.5), FitConfig{});
    EXPECT_TRUE(sol.S.isZero(0.0));
    EXPECT_DOUBLE_EQ(sol.objective, 4.0);
}
