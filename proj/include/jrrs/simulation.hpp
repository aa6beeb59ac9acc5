#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>
#include <jrrs/core_types.hpp>
#include <jrrs/pipelines.hpp>

namespace jrrs {

/// Generator parameters: X rows ~ MVN(0, Sigma) with Sigma_jk = rho^|j-k|,
/// A = [b B0 B1; 0] with B0 (J_size x r) and B1 (r x n) standard normal, E ~ N(0, sigma2).
struct SimulationScenario
{
    int m = 100;
    int p = 25;
    int n = 25;
    int J_size = 15;
    int r = 5;
    double rho = 0.1;
    double b = 0.4;
    double sigma2 = 1.0;
    int reps = 50;
    std::uint64_t seed = 0;
    int validation_size = 10000;
    int test_size = 10000;
    bool permute_support = false;  // place the true rows at random positions instead of the first J_size

    void validate() const
    {
        if (m < 1 || p < 1 || n < 1) throw InvalidConfig("m, p, n must be >= 1");
        if (J_size < 0 || J_size > p) throw InvalidConfig("J_size must lie in [0, p]");
        if (r < 0 || r > std::min(J_size, n)) throw InvalidConfig("r must lie in [0, min(J_size, n)]");
        if (!(rho >= 0.0 && rho < 1.0)) throw InvalidConfig("rho must lie in [0, 1)");
        if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidConfig("b must be finite and >= 0");
        if (!(sigma2 > 0.0)) throw InvalidConfig("sigma2 must be positive");
        if (reps < 1) throw InvalidConfig("reps must be >= 1");
        if (validation_size < 1 || test_size < 1) throw InvalidConfig("holdout sizes must be >= 1");
    }

    /// m = 30, |J| = 15, p = 100, n = 10, r = 2, rho = 0.1, sigma^2 = 1.
    static SimulationScenario p_gt_m(double b)
    {
        SimulationScenario s;
        s.m = 30;
        s.p = 100;
        s.n = 10;
        s.J_size = 15;
        s.r = 2;
        s.b = b;
        return s;
    }

    /// m = 100, |J| = 15, p = 25, n = 25, r = 5, rho = 0.1, sigma^2 = 1.
    static SimulationScenario m_gt_p(double b)
    {
        SimulationScenario s;
        s.b = b;
        return s;
    }
};

/// Independent random streams of one replicate.
enum class Stream : std::uint64_t
{
    coefficients = 1,
    train_design = 2,
    train_noise = 3,
    validation_design = 4,
    validation_noise = 5,
    test_design = 6,
    test_noise = 7,
    support_permutation = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Engine for (seed, replicate, stream); a pure function of the triple.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t replicate, Stream stream)
{
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(replicate + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return std::mt19937_64(h);
}

inline Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> N(0.0, 1.0);
    Matrix M(rows, cols);
    // row-major fill so a prefix of rows does not depend on the total row count
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) M(i, j) = N(rng);
    }
    return M;
}

/// Lower Cholesky factor of Sigma_jk = rho^|j-k|.
inline Matrix ar1_cholesky(int p, double rho)
{
    Matrix Sigma(p, p);
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) Sigma(j, k) = std::pow(rho, std::abs(j - k));
    }
    Eigen::LLT<Matrix> llt(Sigma);
    return llt.matrixL();
}

struct SimulationInstance
{
    RegressionData train;
    CoefficientEstimate truth;
    std::optional<RegressionData> validation;
    RegressionData test;
};

namespace detail {

inline RegressionData draw_sample(const SimulationScenario& s, const Matrix& L, const Matrix& A, int rows,
                                  std::uint64_t replicate, Stream design, Stream noise)
{
    auto rd = stream_engine(s.seed, replicate, design);
    auto rn = stream_engine(s.seed, replicate, noise);
    Matrix X = standard_normal(rows, s.p, rd) * L.transpose();
    Matrix E = standard_normal(rows, s.n, rn) * std::sqrt(s.sigma2);
    Matrix Y = X * A + E;
    return RegressionData(std::move(X), std::move(Y));
}

} // namespace detail

/// Training, validation and test samples of one replicate, all sharing the same A.
inline SimulationInstance generate_instance(const SimulationScenario& s, std::uint64_t replicate,
                                            bool with_validation = true)
{
    s.validate();
    auto rc = stream_engine(s.seed, replicate, Stream::coefficients);
    const Matrix B0 = standard_normal(s.J_size, s.r, rc);
    const Matrix B1 = standard_normal(s.r, s.n, rc);
    Matrix A = Matrix::Zero(s.p, s.n);
    if (s.J_size > 0 && s.r > 0) A.topRows(s.J_size) = s.b * B0 * B1;
    if (s.permute_support) {
        std::vector<Index> perm(s.p);
        std::iota(perm.begin(), perm.end(), Index{0});
        auto rp = stream_engine(s.seed, replicate, Stream::support_permutation);
        std::shuffle(perm.begin(), perm.end(), rp);
        Matrix P = Matrix::Zero(s.p, s.n);
        for (int i = 0; i < s.p; ++i) P.row(perm[i]) = A.row(i);
        A = P;
    }
    const Matrix L = ar1_cholesky(s.p, s.rho);
    auto train = detail::draw_sample(s, L, A, s.m, replicate, Stream::train_design, Stream::train_noise);
    auto test = detail::draw_sample(s, L, A, s.test_size, replicate, Stream::test_design, Stream::test_noise);
    std::optional<RegressionData> validation;
    if (with_validation) {
        validation = detail::draw_sample(s, L, A, s.validation_size, replicate, Stream::validation_design,
                                         Stream::validation_noise);
    }
    return SimulationInstance{std::move(train), CoefficientEstimate(std::move(A), MethodTag::OLS_restricted),
                              std::move(validation), std::move(test)};
}

struct SignalDiagnostics
{
    bool c1 = false;
    bool c2 = false;
    double d_r = 0.0;         // r-th singular value of XA (0 when A = 0)
    double c1_margin = 0.0;   // d_r(XA) - 2 sqrt(2) sigma (sqrt(n) + sqrt(q))
    double c2_margin = 0.0;   // (sqrt(2) - 1)^2 (n + q) / 4 - log ||XA||_F
};

/// Signal-strength and magnitude conditions that make RSC rank selection consistent.
inline SignalDiagnostics check_signal_conditions(const CoefficientEstimate& truth, const RegressionData& train,
                                                 double sigma)
{
    SignalDiagnostics out;
    const Matrix XA = train.X() * truth.B();
    const double n = static_cast<double>(train.n());
    const double q = static_cast<double>(train.q());
    const Vector d = linalg::singular_values(XA);
    const Index r = truth.rank();
    out.d_r = (r >= 1 && r <= d.size()) ? d(r - 1) : 0.0;
    out.c1_margin = out.d_r - 2.0 * std::sqrt(2.0) * sigma * (std::sqrt(n) + std::sqrt(q));
    out.c1 = r >= 1 && out.c1_margin > 0.0;
    const double s = std::sqrt(2.0) - 1.0;
    out.c2_margin = s * s * (n + q) / 4.0 - std::log(XA.norm());
    out.c2 = out.c2_margin >= 0.0;
    return out;
}

/// Mean after sorting and dropping floor(len * trim_fraction / 2) values from each tail.
inline double trimmed_mean(std::vector<double> values, double trim_fraction)
{
    if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) throw InvalidInput("trim_fraction must lie in [0, 1)");
    std::sort(values.begin(), values.end());
    const std::size_t cut = static_cast<std::size_t>(std::floor(values.size() * trim_fraction / 2.0));
    if (values.size() <= 2 * cut) throw InvalidInput("nothing left after trimming");
    double sum = 0.0;
    for (std::size_t i = cut; i < values.size() - cut; ++i) sum += values[i];
    return sum / static_cast<double>(values.size() - 2 * cut);
}

inline double median(std::vector<double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

enum class StudyMethod
{
    GLASSO,
    RSC,
    Method1,
    Method2,
    Method3,
};

inline std::string_view to_string(StudyMethod m)
{
    switch (m) {
    case StudyMethod::GLASSO: return "GLASSO";
    case StudyMethod::RSC: return "RSC";
    case StudyMethod::Method1: return "Method1";
    case StudyMethod::Method2: return "Method2";
    case StudyMethod::Method3: return "Method3";
    }
    return "unknown";
}

inline const std::vector<StudyMethod>& all_study_methods()
{
    static const std::vector<StudyMethod> all{StudyMethod::GLASSO, StudyMethod::RSC, StudyMethod::Method1,
                                              StudyMethod::Method2, StudyMethod::Method3};
    return all;
}

struct ReplicateRecord
{
    int replicate = 0;
    bool failed = false;
    std::string error;
    double mse = 0.0;
    int j_hat = 0;
    int r_hat = 0;
    int misses = 0;
    int false_alarms = 0;
};

struct MethodSummary
{
    StudyMethod method{};
    std::vector<ReplicateRecord> replicates;
    int failures = 0;
    double trimmed_mse = 0.0;
    double median_j = 0.0;
    double median_r = 0.0;
    double miss_rate = 0.0;         // percent
    double false_alarm_rate = 0.0;  // percent
};

struct RunReport
{
    SimulationScenario scenario;
    std::vector<MethodSummary> methods;
    std::vector<SignalDiagnostics> diagnostics;  // per replicate
};

struct StudyOptions
{
    int threads = 1;
    double trim_fraction = 0.4;
    /// Reported MSE = mse_scale * ||X_test (A - Ahat)||_F^2 / (m_test n).
    double mse_scale = 100.0;
};

/// ||X_test (Ahat - A)||_F^2 / (m_test n) through the test Gram matrix.
inline double test_mse(const RegressionData& test, const Matrix& A, const Matrix& Ahat)
{
    const Matrix D = Ahat - A;
    const double sse = (D.array() * (test.gram() * D).array()).sum();
    return std::max(sse, 0.0) / (static_cast<double>(test.m()) * static_cast<double>(test.n()));
}

inline MethodSummary summarize(StudyMethod method, std::vector<ReplicateRecord> reps, int J_size, int p,
                               double trim_fraction)
{
    MethodSummary s;
    s.method = method;
    std::vector<double> mse, jh, rh;
    long misses = 0, fas = 0;
    for (const auto& r : reps) {
        if (r.failed) {
            ++s.failures;
            continue;
        }
        mse.push_back(r.mse);
        jh.push_back(r.j_hat);
        rh.push_back(r.r_hat);
        misses += r.misses;
        fas += r.false_alarms;
    }
    const double ok = static_cast<double>(mse.size());
    if (!mse.empty()) {
        s.trimmed_mse = trimmed_mean(mse, trim_fraction);
        s.median_j = median(jh);
        s.median_r = median(rh);
        s.miss_rate = J_size > 0 ? 100.0 * misses / (ok * J_size) : 0.0;
        s.false_alarm_rate = p > J_size ? 100.0 * fas / (ok * (p - J_size)) : 0.0;
    } else {
        s.trimmed_mse = s.median_j = s.median_r = std::numeric_limits<double>::quiet_NaN();
    }
    s.replicates = std::move(reps);
    return s;
}

/// Fits one study method on a replicate. Tuning follows the reproduction protocol:
/// validation data for GLASSO and Methods 1 and 3, the penalty (c = 3) for Method 2,
/// and the known noise level for every RSC stage.
inline CoefficientEstimate fit_study_method(StudyMethod method, const SimulationInstance& inst,
                                            const SimulationScenario& s, const FitConfig& config)
{
    const double sigma = std::sqrt(s.sigma2);
    auto tuning = [&] {
        if (!inst.validation) throw InvalidConfig("validation data required");
        return TuningRule::validation_set(*inst.validation);
    };
    switch (method) {
    case StudyMethod::GLASSO: return fit_glasso(inst.train, config, tuning(), sigma).estimate;
    case StudyMethod::RSC: return fit_rsc(inst.train, sigma, config).estimate;
    case StudyMethod::Method1: return fit_method1(inst.train, config, tuning(), sigma).estimate;
    case StudyMethod::Method2: return fit_method2(inst.train, config, PenaltySpec::practice(s.sigma2)).estimate;
    case StudyMethod::Method3: return fit_method3(inst.train, config, tuning(), sigma).estimate;
    }
    throw InvalidConfig("unknown method");
}

inline bool needs_validation(const std::vector<StudyMethod>& methods)
{
    return std::any_of(methods.begin(), methods.end(), [](StudyMethod m) {
        return m == StudyMethod::GLASSO || m == StudyMethod::Method1 || m == StudyMethod::Method3;
    });
}

/// Runs every method on reps independent replicates. Replicates are distributed over threads;
/// results are stored by replicate index, so the report does not depend on the thread count.
inline RunReport run_study(const SimulationScenario& s, const std::vector<StudyMethod>& methods,
                           const FitConfig& config, const StudyOptions& opts = {})
{
    s.validate();
    config.validate();
    if (methods.empty()) throw InvalidConfig("no methods requested");
    const bool with_val = needs_validation(methods);
    const std::size_t M = methods.size();
    std::vector<std::vector<ReplicateRecord>> recs(M, std::vector<ReplicateRecord>(s.reps));
    std::vector<SignalDiagnostics> diags(s.reps);

    auto run_one = [&](int rep) {
        std::optional<SimulationInstance> inst;
        std::string gen_error;
        try {
            inst = generate_instance(s, static_cast<std::uint64_t>(rep), with_val);
            diags[rep] = check_signal_conditions(inst->truth, inst->train, std::sqrt(s.sigma2));
        } catch (const std::exception& e) {
            gen_error = e.what();
        }
        for (std::size_t mi = 0; mi < M; ++mi) {
            ReplicateRecord& r = recs[mi][rep];
            r.replicate = rep;
            if (!inst) {
                r.failed = true;
                r.error = gen_error;
                continue;
            }
            try {
                const auto est = fit_study_method(methods[mi], *inst, s, config);
                r.mse = opts.mse_scale * test_mse(inst->test, inst->truth.B(), est.B());
                r.j_hat = static_cast<int>(est.support().size());
                r.r_hat = static_cast<int>(est.rank());
                const auto& truth = inst->truth.support();
                std::vector<char> is_true(s.p, 0);
                for (auto i : truth) is_true[i] = 1;
                int hit = 0;
                for (auto i : est.support()) {
                    if (is_true[i]) ++hit; else ++r.false_alarms;
                }
                r.misses = static_cast<int>(truth.size()) - hit;
            } catch (const std::exception& e) {
                r.failed = true;
                r.error = e.what();
            }
        }
    };

    const int nthreads = std::max(1, std::min(opts.threads, s.reps));
    if (nthreads == 1) {
        for (int rep = 0; rep < s.reps; ++rep) run_one(rep);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&] {
                for (int rep = next++; rep < s.reps; rep = next++) run_one(rep);
            });
        }
        for (auto& th : pool) th.join();
    }

    RunReport report;
    report.scenario = s;
    report.diagnostics = std::move(diags);
    for (std::size_t mi = 0; mi < M; ++mi) {
        report.methods.push_back(summarize(methods[mi], std::move(recs[mi]), s.J_size, s.p, opts.trim_fraction));
    }
    return report;
}

} // namespace jrrs
