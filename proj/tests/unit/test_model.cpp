#include "oracles.hpp"
#include "rsc/builtins.hpp"
#include "rsc/model.hpp"

#include <gtest/gtest.h>

using namespace rsc;

TEST(Validate, OuModelPassesAllHypotheses) {
    const auto ou = make_builtin("ou2");
    const auto rep = validate_model(ou.model, 5.0, 1000);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    EXPECT_TRUE(rep.all_passed());
}

TEST(Validate, ZeroCouplingDisconnectsRegimes) {
    auto m = oracle::telegraph(0.0);
    const auto rep = validate_model(m, 3.0, 200);
    EXPECT_FALSE(rep.at("A4").passed);
    EXPECT_FALSE(rep.all_passed());
}

TEST(Validate, DegenerateDiffusionFailsEllipticity) {
    auto m = oracle::telegraph(1.0);
    m.diffusion = [](const Point&, int) -> SquareMatrix { return SquareMatrix::Zero(1, 1); };
    const auto rep = validate_model(m, 3.0, 200);
    EXPECT_FALSE(rep.at("A3").passed);
    EXPECT_DOUBLE_EQ(rep.at("A3").value, 0.0);
}

TEST(Validate, BrokenGeneratorIsRejected) {
    auto m = oracle::telegraph(1.0);
    m.rates = [](const Point&, int) -> RateMatrix {
        RateMatrix r(2, 2);
        r << -1, 2, 1, -1;
        return r;
    };
    EXPECT_THROW(validate_model(m, 3.0, 10), InvalidArgument);
}

TEST(Validate, WorkerCountDoesNotChangeTheReport) {
    const auto m = make_builtin("bounded2d").model;
    ValidationOptions a, b;
    a.workers = 1;
    b.workers = 4;
    const auto ra = validate_model(m, 4.0, 300, a), rb = validate_model(m, 4.0, 300, b);
    ASSERT_EQ(ra.checks.size(), rb.checks.size());
    for (std::size_t i = 0; i < ra.checks.size(); ++i) {
        EXPECT_EQ(ra.checks[i].passed, rb.checks[i].passed);
        EXPECT_EQ(ra.checks[i].value, rb.checks[i].value);
    }
}

TEST(Model, CostShiftAddsConstant) {
    const auto m = make_builtin("ou2").model;
    const auto s = with_cost_shift(m, 0.7);
    const Point x = Point::Constant(1, 1.3);
    EXPECT_DOUBLE_EQ(s.cost(x, 1, 0), m.cost(x, 1, 0) + 0.7);
}

TEST(Model, SampleBoxStartsAtOriginAndStaysInside) {
    const auto pts = sample_box(2, 3.0, 50, 9);
    ASSERT_EQ(pts.size(), 50u);
    EXPECT_EQ(pts[0].norm(), 0.0);
    for (const auto& p : pts) EXPECT_LE(p.cwiseAbs().maxCoeff(), 3.0);
}

TEST(Builtins, UnknownParameterIsRejected) {
    EXPECT_THROW(make_builtin("lq", {{"qq", 1.0}}), InvalidArgument);
    EXPECT_THROW(make_builtin("nope"), InvalidArgument);
    EXPECT_NO_THROW(make_builtin("lq", {{"q", 0.1}}));
}

TEST(Builtins, ClosedFormHelperAgreesWithOracle) {
    EXPECT_NEAR(lq_lambda(0.1875, 1.0), oracle::lq_lambda(0.1875, 1.0), 1e-15);
    EXPECT_NEAR(oracle::lq_lambda(0.1875, 1.0), 0.25, 1e-15);
    EXPECT_NEAR(oracle::lq_lambda(0.1875, 2.0), (2.0 - std::sqrt(3.25)) / 2.0, 1e-15);
}
