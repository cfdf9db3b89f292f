#include "rsc/expression.hpp"
#include "rsc/model_config.hpp"

#include <gtest/gtest.h>

using namespace rsc;

namespace {
double eval(const std::string& src, std::initializer_list<double> x = {0.0}, int regime = 0, double xi = 0.0) {
    Point p(static_cast<int>(x.size()));
    int i = 0;
    for (double v : x) p[i++] = v;
    return Expression::parse(src, static_cast<int>(x.size()))(p, regime, Point::Constant(1, xi));
}
}  // namespace

TEST(Expression, Precedence) {
    EXPECT_DOUBLE_EQ(eval("1 + 2 * 3"), 7.0);
    EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3"), 9.0);
    EXPECT_DOUBLE_EQ(eval("2^3^2"), 512.0);
    EXPECT_DOUBLE_EQ(eval("-x1^2", {3.0}), -9.0);
    EXPECT_DOUBLE_EQ(eval("8 / 4 / 2"), 1.0);
    EXPECT_DOUBLE_EQ(eval("1.5e2 - .5"), 149.5);
}

TEST(Expression, NamesAndFunctions) {
    EXPECT_DOUBLE_EQ(eval("x1 * x2", {2.0, 5.0}), 10.0);
    EXPECT_DOUBLE_EQ(eval("k", {0.0}, 2), 3.0);
    EXPECT_DOUBLE_EQ(eval("-xi * x1", {2.0}, 0, 1.5), -3.0);
    EXPECT_DOUBLE_EQ(eval("max(1, x1, 3)", {7.0}), 7.0);
    EXPECT_DOUBLE_EQ(eval("min(1, x1)", {7.0}), 1.0);
    EXPECT_NEAR(eval("exp(log(2)) + sqrt(9) + abs(-1) + cos(pi)"), 5.0, 1e-15);
}

TEST(Expression, ErrorsCarryColumn) {
    try {
        Expression::parse("1 + x3", 2);
        FAIL();
    } catch (const ExpressionError& e) {
        EXPECT_EQ(e.column, 5u);
    }
    EXPECT_THROW(Expression::parse("1 +", 1), ExpressionError);
    EXPECT_THROW(Expression::parse("foo(1)", 1), ExpressionError);
    EXPECT_THROW(Expression::parse("exp(1, 2)", 1), ExpressionError);
    EXPECT_THROW(Expression::parse("(1", 1), ExpressionError);
    EXPECT_THROW(Expression::parse("1 2", 1), InvalidArgument);
}

TEST(Expression, Introspection) {
    EXPECT_TRUE(Expression::parse("xi * x1", 1).uses_control());
    EXPECT_FALSE(Expression::parse("k * x1", 1).uses_control());
    EXPECT_TRUE(Expression::parse("k * x1", 1).uses_regime());
}

TEST(ModelConfig, ExpressionModelMatchesBuiltin) {
    const auto j = nlohmann::json::parse(R"J({
        "dim": 1, "regimes": 1, "controls": [1, 2],
        "expressions": {
            "drift": ["-xi * x1"],
            "diffusion": [["sqrt(2)"]],
            "rates": [["auto"]],
            "cost": "0.1875 * x1^2"
        }
    })J");
    const auto cfg = model_from_json(j);
    const auto lq = make_builtin("lq", {}, {1.0, 2.0});
    for (double x : {-2.0, 0.3, 1.7})
        for (int z = 0; z < 2; ++z) {
            const Point p = Point::Constant(1, x);
            EXPECT_DOUBLE_EQ(cfg.instance.model.drift(p, 0, z)[0], lq.model.drift(p, 0, z)[0]);
            EXPECT_DOUBLE_EQ(cfg.instance.model.cost(p, 0, z), lq.model.cost(p, 0, z));
            EXPECT_DOUBLE_EQ(cfg.instance.model.diffusion(p, 0)(0, 0), lq.model.diffusion(p, 0)(0, 0));
        }
}

TEST(ModelConfig, AutoDiagonalAndCertificate) {
    const auto j = nlohmann::json::parse(R"J({
        "dim": 1, "regimes": 2, "controls": [0],
        "expressions": {
            "drift": ["-x1"], "diffusion": [["1"]],
            "rates": [["auto", "1 + x1^2"], ["2", "auto"]],
            "cost": "x1^2"
        },
        "lyapunov": {"V": "exp(0.25 * x1^2)", "ell": "0.1 * x1^2", "beta": 1, "compact_radius": 1}
    })J");
    const auto cfg = model_from_json(j);
    const auto r = cfg.instance.model.rates(Point::Constant(1, 2.0), 0);
    EXPECT_DOUBLE_EQ(r(0, 1), 5.0);
    EXPECT_DOUBLE_EQ(r(0, 0), -5.0);
    EXPECT_DOUBLE_EQ(r(1, 1), -2.0);
    ASSERT_TRUE(cfg.instance.certificate);
    EXPECT_EQ(cfg.instance.certificate->mode, CertificateMode::InfCompact);
}

TEST(ModelConfig, BuiltinResolvesDefaults) {
    const auto cfg = model_from_json(nlohmann::json::parse(R"J({"builtin": {"name": "lq", "params": {"q": 0.1}}})J"));
    EXPECT_EQ(cfg.resolved["dim"], 1);
    EXPECT_DOUBLE_EQ(cfg.resolved["builtin"]["params"]["q"].get<double>(), 0.1);
    EXPECT_TRUE(cfg.resolved["builtin"]["params"].contains("sigma"));
}

TEST(ModelConfig, Errors) {
    using nlohmann::json;
    EXPECT_THROW(model_from_json(json::parse(R"J({"builtin": {"name": "lq"}, "expressions": {}})J")), InvalidArgument);
    EXPECT_THROW(model_from_json(json::parse(R"J({"dim": 1, "regimes": 1, "controls": [0],
        "expressions": {"drift": ["-x1"], "diffusion": [["xi"]], "rates": [["auto"]], "cost": "0"}})J")),
                 InvalidArgument);
    EXPECT_THROW(model_from_json(json::parse(R"J({"dim": 1, "regimes": 2, "controls": [0],
        "expressions": {"drift": ["-x1"], "diffusion": [["1"]], "rates": [["1", "auto"], ["1", "auto"]], "cost": "0"}})J")),
                 InvalidArgument);
    EXPECT_THROW(model_from_json(json::parse(R"J({"builtin": {"name": "lq", "params": {"q": "a"}}})J")), InvalidArgument);
    EXPECT_THROW(load_model_config("/nonexistent/model.json"), InvalidArgument);
}
