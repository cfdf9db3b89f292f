#include "oracles.hpp"
#include "rsc/builtins.hpp"
#include "rsc/eigensolve.hpp"
#include "rsc/simulate.hpp"

#include <gtest/gtest.h>

using namespace rsc;

namespace {

SwitchingModel drifting(std::function<Point(const Point&)> b, double sigma = 1.0) {
    auto m = oracle::telegraph(1.0);
    m.num_regimes = 1;
    m.drift = [b](const Point& x, int, int) { return b(x); };
    m.diffusion = [sigma](const Point&, int) -> SquareMatrix { return SquareMatrix::Constant(1, 1, sigma); };
    m.rates = [](const Point&, int) -> RateMatrix { return RateMatrix::Zero(1, 1); };
    return m;
}

}  // namespace

TEST(Paths, FrozenDynamicsStayPut) {
    auto m = drifting([](const Point&) { return Point::Zero(1); }, 0.0);
    PathConfig cfg;
    cfg.paths = 5;
    cfg.x0 = Point::Constant(1, 0.7);
    const auto b = simulate_paths(m, ControlLaw::constant(0), cfg);
    for (const auto& p : b.paths) EXPECT_EQ(p.x_end[0], 0.7);
}

TEST(Paths, SwitchCountsArePoisson) {
    const auto m = oracle::telegraph(1.0);
    PathConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 2.0;
    cfg.paths = 10000;
    cfg.seed = 4;
    const auto b = simulate_paths(m, ControlLaw::constant(0), cfg, 2);
    double mean = 0.0, occ = 0.0;
    for (const auto& p : b.paths) {
        mean += p.switches;
        occ += p.occupation[0] / b.horizon;
    }
    mean /= cfg.paths;
    occ /= cfg.paths;
    const double T = b.horizon;
    EXPECT_NEAR(mean, T, 3.0 * std::sqrt(T / cfg.paths));
    // Started in regime 0: expected occupation is 1/2 + (1 - e^{-2T}) / (4T).
    const double expected = 0.5 + (1.0 - std::exp(-2.0 * T)) / (4.0 * T);
    EXPECT_NEAR(occ, expected, 0.01);
}

TEST(Paths, TooLargeStepIsRejected) {
    const auto m = oracle::telegraph(100.0);
    PathConfig cfg;
    cfg.step = 0.01;
    cfg.paths = 1;
    EXPECT_THROW(simulate_paths(m, ControlLaw::constant(0), cfg), StepTooLarge);
}

TEST(Paths, IndependentOfWorkerCount) {
    const auto ou = make_builtin("ou2");
    PathConfig cfg;
    cfg.paths = 257;
    cfg.horizon = 2.0;
    cfg.seed = 99;
    const auto a = simulate_paths(ou.model, ControlLaw::constant(1), cfg, 1);
    const auto b = simulate_paths(ou.model, ControlLaw::constant(1), cfg, 5);
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        EXPECT_EQ(a.paths[i].x_end[0], b.paths[i].x_end[0]);
        EXPECT_EQ(a.paths[i].mean_cost, b.paths[i].mean_cost);
    }
}

TEST(Rate, ConstantCostIsExact) {
    auto m = make_builtin("ou2").model;
    m.cost = [](const Point&, int, int) { return 0.3; };
    PathConfig cfg;
    cfg.paths = 500;
    cfg.horizon = 3.0;
    const auto e = estimate_risk_sensitive_rate(m, ControlLaw::constant(0), cfg, 0.3, 2);
    EXPECT_EQ(e.value, 0.3);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_THROW(estimate_risk_sensitive_rate(m, ControlLaw::constant(0), [] {
        PathConfig c;
        c.horizon = 0.5;
        return c;
    }(), 0.3), InvalidArgument);
}

TEST(Rate, LogMeanExpAgainstDirectFormula) {
    const std::vector<double> a{0.1, 0.2, 0.4, 0.05};
    const double T = 2.0;
    double s = 0.0;
    for (double v : a) s += std::exp(T * v);
    const auto e = detail::log_mean_exp_rate(a, T);
    EXPECT_NEAR(e.value, std::log(s / 4.0) / T, 1e-15);
    // No overflow for huge exponents.
    const auto big = detail::log_mean_exp_rate({500.0, 500.0}, 10.0);
    EXPECT_DOUBLE_EQ(big.value, 500.0);
}

TEST(Rate, DoublingPathsShrinksError) {
    const auto ou = make_builtin("ou2");
    PathConfig cfg;
    cfg.horizon = 2.0;
    cfg.paths = 4000;
    const auto a = estimate_risk_sensitive_rate(ou.model, ControlLaw::constant(0), cfg, 0.0);
    cfg.paths = 8000;
    const auto b = estimate_risk_sensitive_rate(ou.model, ControlLaw::constant(0), cfg, 0.0);
    EXPECT_NEAR(a.std_error / b.std_error, std::sqrt(2.0), 0.25);
}

TEST(Rate, HillIndexOfParetoSample) {
    std::mt19937_64 gen(1);
    std::exponential_distribution<double> ex(1.5);
    std::vector<double> logw(20000);
    for (auto& v : logw) v = ex(gen);  // log of Pareto(1.5)
    EXPECT_NEAR(detail::hill_tail_index(logw), 1.5, 0.3);
}

TEST(Interpolate, ExactOnAffineData) {
    const auto g = build_grid(2.0, 9, 2);
    const auto M = static_cast<std::ptrdiff_t>(g.interior_count());
    Vector psi(2 * M);
    for (std::ptrdiff_t i = 0; i < M; ++i) {
        const Point x = g.interior_node(static_cast<std::size_t>(i));
        psi[i] = 1.0 + x[0] + 2.0 * x[1];
        psi[M + i] = 3.0;
    }
    Point x(2);
    x << 0.3, -0.8;
    EXPECT_NEAR(interpolate(g, psi, 0, x), 1.0 + 0.3 - 1.6, 1e-12);
    EXPECT_NEAR(interpolate(g, psi, 1, x), 3.0, 1e-12);
}

TEST(FeynmanKac, ZeroCostGivesHittingProbability) {
    auto m = oracle::telegraph(0.5);
    const auto g = build_grid(3.0, 61, 1);
    EigenPair eig;
    eig.lambda = 0.0;
    eig.psi = Vector::Ones(static_cast<std::ptrdiff_t>(2 * g.interior_count()));
    PathConfig cfg;
    cfg.step = 1e-3;
    cfg.paths = 4000;
    cfg.seed = 8;
    const std::vector<AnnulusStart> starts{{Point::Constant(1, 1.0), 0}, {Point::Constant(1, -2.0), 1}};
    const auto rep = feynman_kac_annulus(m, ControlLaw::constant(0), eig, g, 0.5, starts, cfg, 2);
    // Brownian motion: P(hit r before R from x) = (R - |x|) / (R - r).
    for (const auto& p : rep.points) {
        const double exact = (3.0 - std::abs(p.start.x[0])) / 2.5;
        EXPECT_NEAR(p.estimate, exact, 4.0 * p.std_error + 0.01);
        EXPECT_LE(p.estimate, 1.0);
    }
}

TEST(FeynmanKac, SolvedPairReproducesPsiAndShiftedLambdaDoesNot) {
    const auto ou = make_builtin("ou2");
    const auto g = grid_for_density(3.0, 200, 1);
    const auto sol = solve_semilinear(ou.model, g);
    PathConfig cfg;
    cfg.step = 1e-3;
    cfg.paths = 20000;
    cfg.seed = 3;
    const std::vector<AnnulusStart> starts{{Point::Constant(1, 0.9), 0}, {Point::Constant(1, -1.2), 1}};
    const auto law = ControlLaw::from_policy(g, sol.policy);
    const auto rep = feynman_kac_annulus(ou.model, law, sol.eigen, g, 0.5, starts, cfg, 2);
    EXPECT_TRUE(rep.passed) << rep.max_abs_z;
    const auto off = reevaluate_annulus(rep, sol.eigen.lambda + 0.05);
    EXPECT_FALSE(off.passed);
    // A suboptimal control can only raise the expectation.
    const auto sub = feynman_kac_annulus(ou.model, ControlLaw::constant(0), sol.eigen, g, 0.5, starts, cfg, 2);
    for (const auto& p : sub.points) EXPECT_GE(p.estimate, p.psi - 3.0 * p.std_error);
}

TEST(MeanPosition, ScalingLaws) {
    PathConfig cfg;
    cfg.step = 0.05;
    cfg.paths = 2000;
    const std::vector<double> T{10, 40, 160};
    const auto free = mean_position_diagnostic(drifting([](const Point&) { return Point::Zero(1); }),
                                               ControlLaw::constant(0), cfg, T, 2);
    EXPECT_NEAR(free.decay_exponent, -0.5, 0.1);
    EXPECT_TRUE(free.passed);
    const auto ou = mean_position_diagnostic(drifting([](const Point& x) -> Point { return -x; }),
                                             ControlLaw::constant(0), cfg, T, 2);
    EXPECT_NEAR(ou.decay_exponent, -1.0, 0.1);
    EXPECT_TRUE(ou.passed);
    const auto ballistic = mean_position_diagnostic(drifting([](const Point&) { return Point::Constant(1, 1.0); }),
                                                    ControlLaw::constant(0), cfg, T, 2);
    EXPECT_FALSE(ballistic.passed);
}
