#include "oracles.hpp"
#include "rsc/builtins.hpp"
#include "rsc/discretize.hpp"
#include "rsc/eigensolve.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

using namespace rsc;

namespace {

SwitchingModel one_dim(std::function<double(double)> drift, double a = 1.0) {
    SwitchingModel m;
    m.dim = 1;
    m.controls = {Point::Constant(1, 0.0)};
    m.drift = [drift](const Point& x, int, int) -> Point { return Point::Constant(1, drift(x[0])); };
    const double s = std::sqrt(2.0 * a);
    m.diffusion = [s](const Point&, int) -> SquareMatrix { return SquareMatrix::Constant(1, 1, s); };
    m.rates = [](const Point&, int) -> RateMatrix { return RateMatrix::Zero(1, 1); };
    m.cost = [](const Point&, int, int) { return 0.0; };
    return m;
}

}  // namespace

TEST(Grid, SmallestGrid) {
    const auto g = build_grid(1.0, 3, 1);
    EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
    EXPECT_DOUBLE_EQ(g.node(0)[0], -1.0);
    EXPECT_DOUBLE_EQ(g.node(1)[0], 0.0);
    EXPECT_DOUBLE_EQ(g.node(2)[0], 1.0);
}

TEST(Grid, TwoDimensionalEnumeration) {
    const auto g = build_grid(2.0, 5, 2);
    EXPECT_EQ(g.node_count(), 25u);
    EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
    EXPECT_EQ(g.origin_index(), 12u);
    EXPECT_EQ(g.node(12).norm(), 0.0);
    EXPECT_EQ(g.interior_node(g.interior_origin_index()).norm(), 0.0);
}

TEST(Grid, EvenNodeCountIsRejected) { EXPECT_THROW(build_grid(1.0, 4, 1), InvalidArgument); }

TEST(Grid, NearestInteriorClampsOutside) {
    const auto g = build_grid(2.0, 5, 1);
    EXPECT_EQ(g.nearest_interior(Point::Constant(1, 10.0)), 2u);
    EXPECT_EQ(g.nearest_interior(Point::Constant(1, -10.0)), 0u);
    EXPECT_EQ(g.nearest_interior(Point::Constant(1, 0.4)), 1u);
}

TEST(Assemble, LaplacianSingleRow) {
    const auto m = one_dim([](double) { return 0.0; });
    const auto g = build_grid(1.0, 3, 1);
    const auto op = assemble(m, g, constant_policy(g, 1));
    ASSERT_EQ(op.size(), 1u);
    EXPECT_DOUBLE_EQ(op.matrix.coeff(0, 0), -2.0);
}

TEST(Assemble, UpwindUsesBackwardDifferenceForInwardDrift) {
    // b = -x with h = 0.5; at x = 1 the drift points left.
    const auto m = one_dim([](double x) { return -x; }, 0.0 + 1e-300);
    const auto g = build_grid(2.0, 9, 1);
    const auto op = assemble(m, g, constant_policy(g, 1));
    std::size_t r = 0;
    for (std::size_t i = 0; i < g.interior_count(); ++i)
        if (std::abs(g.interior_node(i)[0] - 1.0) < 1e-12) r = i;
    const double h = 0.5, b = 1.0;
    EXPECT_NEAR(op.matrix.coeff(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(r - 1)), b / h, 1e-12);
    EXPECT_NEAR(op.matrix.coeff(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(r + 1)), 0.0, 1e-12);
    EXPECT_NEAR(op.matrix.coeff(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(r)), -b / h, 1e-12);
}

TEST(Assemble, RandomModelsGiveMetzlerMatrices) {
    std::mt19937_64 gen(3);
    for (int d = 1; d <= 2; ++d)
        for (int N = 1; N <= 3; ++N) {
            const auto m = oracle::random_model({d, N, 2}, gen);
            const auto g = grid_for_density(2.0, d == 1 ? 8 : 3, d);
            const auto op = assemble(m, g, constant_policy(g, N, 1));
            EXPECT_GE(most_negative_off_diagonal(op.matrix), 0.0);
            // Dirichlet elimination: row sums never exceed the local c.
            for (int k = 0; k < N; ++k)
                for (std::size_t i = 0; i < g.interior_count(); ++i) {
                    const auto r = static_cast<std::ptrdiff_t>(op.row(i, k));
                    double sum = 0.0;
                    for (std::ptrdiff_t c = 0; c < op.matrix.cols(); ++c) sum += op.matrix.coeff(r, c);
                    EXPECT_LE(sum, m.cost(g.interior_node(i), k, 1) + 1e-9);
                }
        }
}

TEST(Assemble, StrongAnisotropyIsReported) {
    SwitchingModel m;
    m.dim = 2;
    m.controls = {Point::Constant(1, 0.0)};
    m.drift = [](const Point&, int, int) -> Point { return Point::Zero(2); };
    m.diffusion = [](const Point&, int) -> SquareMatrix {
        SquareMatrix s(2, 2);
        s << 1.0, 0.0, 1.5, 0.1;
        return s;
    };
    m.rates = [](const Point&, int) -> RateMatrix { return RateMatrix::Zero(1, 1); };
    m.cost = [](const Point&, int, int) { return 0.0; };
    const auto g = build_grid(1.0, 5, 2);
    EXPECT_THROW(assemble(m, g, constant_policy(g, 1)), MonotonicityViolation);
}

TEST(Assemble, DirichletLaplacianEigenvalue) {
    const auto m = one_dim([](double) { return 0.0; });
    const auto g = grid_for_density(1.0, 100, 1);
    const auto op = assemble(m, g, constant_policy(g, 1));
    const auto e = principal_eigenpair(op);
    const double h = g.spacing();
    EXPECT_NEAR(e.lambda, oracle::dirichlet_laplacian_top(static_cast<int>(g.interior_count()), h), 1e-9);
    EXPECT_NEAR(e.lambda, -std::numbers::pi * std::numbers::pi / 4.0, 5e-3);
}

TEST(Assemble, MatrixMarketRoundTrip) {
    const auto inst = make_builtin("ou2");
    const auto g = build_grid(1.0, 7, 1);
    const auto op = assemble(inst.model, g, constant_policy(g, 2));
    std::ostringstream os;
    write_matrix_market(op, os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "%%MatrixMarket matrix coordinate real general");
    while (in.peek() == '%') std::getline(in, line);
    long rows = 0, cols = 0, nnz = 0;
    in >> rows >> cols >> nnz;
    EXPECT_EQ(rows, op.matrix.rows());
    EXPECT_EQ(nnz, op.matrix.nonZeros());
    Eigen::MatrixXd back = Eigen::MatrixXd::Zero(rows, cols);
    for (long i = 0; i < nnz; ++i) {
        long r, c;
        double v;
        in >> r >> c >> v;
        back(r - 1, c - 1) = v;
    }
    EXPECT_EQ((back - Eigen::MatrixXd(op.matrix)).cwiseAbs().maxCoeff(), 0.0);
}
