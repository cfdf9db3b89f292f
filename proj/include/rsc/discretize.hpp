#pragma once

// Monotone finite-difference discretization of the fixed-policy operator
//
//   (A^v f)_k = tr(a_k D^2 f_k) + b_k(x, v) . grad f_k + c_k(x, v) f_k + sum_j m_kj(x, v) f_j
//
// on the interior of a tensor grid with homogeneous Dirichlet data. Second
// derivatives use central differences (positive 7-point decomposition for
// mixed terms), drift uses first-order upwinding, and every off-diagonal of
// the assembled matrix is nonnegative (Metzler).

#include "rsc/core.hpp"
#include "rsc/grid.hpp"
#include "rsc/model.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rsc {

class MonotonicityViolation : public Error {
public:
    MonotonicityViolation(std::size_t node_, int regime_, const Point& x, double weight)
        : Error(describe(x, regime_, weight)), node(node_), regime(regime_), location(x) {}
    std::size_t node;
    int regime;
    Point location;

private:
    static std::string describe(const Point& x, int k, double w) {
        std::ostringstream os;
        os << "stencil is not monotone at x = (";
        for (int p = 0; p < x.size(); ++p) os << (p ? ", " : "") << x[p];
        os << "), regime " << k << ": neighbor weight " << w
           << " < 0 (anisotropy too strong for the grid spacing; refine or rotate coordinates)";
        return os.str();
    }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, std::ptrdiff_t>;

struct DiscreteOperator {
    SparseMatrix matrix;
    GridSpec grid;
    int num_regimes = 1;

    std::size_t interior_nodes() const { return grid.interior_count(); }
    std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t row(std::size_t node, int regime) const {
        return static_cast<std::size_t>(regime) * interior_nodes() + node;
    }
    /// Row index of (origin, regime).
    std::size_t origin_row(int regime) const { return row(grid.interior_origin_index(), regime); }
};

namespace detail {

/// Weights of one grid row over the 3^d neighborhood, keyed by base-3 offset code.
struct RowStencil {
    static constexpr int kSlots = 27;
    std::array<double, kSlots> w{};
    int dim = 1;

    static int code(const std::array<int, kMaxDim>& off, int dim) {
        int c = 0;
        for (int p = 0; p < dim; ++p) c = 3 * c + (off[p] + 1);
        return c;
    }
    int center() const {
        std::array<int, kMaxDim> z{};
        return code(z, dim);
    }
    void add(const std::array<int, kMaxDim>& off, double weight) { w[static_cast<std::size_t>(code(off, dim))] += weight; }
    double& diag() { return w[static_cast<std::size_t>(center())]; }
    static std::array<int, kMaxDim> offset(int code, int dim) {
        std::array<int, kMaxDim> off{};
        for (int p = dim - 1; p >= 0; --p) {
            off[p] = code % 3 - 1;
            code /= 3;
        }
        return off;
    }
    int slots() const {
        int s = 1;
        for (int p = 0; p < dim; ++p) s *= 3;
        return s;
    }
};

inline std::array<int, kMaxDim> axis_offset(int p, int sign) {
    std::array<int, kMaxDim> o{};
    o[p] = sign;
    return o;
}

/// tr(a D^2 .) with the positive decomposition of mixed derivatives.
inline void add_diffusion(const SquareMatrix& a, double h, RowStencil& s) {
    const double h2 = h * h;
    for (int p = 0; p < s.dim; ++p) {
        s.add(axis_offset(p, +1), a(p, p) / h2);
        s.add(axis_offset(p, -1), a(p, p) / h2);
        s.diag() -= 2.0 * a(p, p) / h2;
    }
    for (int p = 0; p < s.dim; ++p)
        for (int q = p + 1; q < s.dim; ++q) {
            const double apq = 0.5 * (a(p, q) + a(q, p));
            if (apq == 0.0) continue;
            const double w = std::abs(apq) / h2;
            const int sq = apq > 0.0 ? +1 : -1;
            std::array<int, kMaxDim> o1{}, o2{};
            o1[p] = +1;
            o1[q] = sq;
            o2[p] = -1;
            o2[q] = -sq;
            s.add(o1, w);
            s.add(o2, w);
            s.add(axis_offset(p, +1), -w);
            s.add(axis_offset(p, -1), -w);
            s.add(axis_offset(q, +1), -w);
            s.add(axis_offset(q, -1), -w);
            s.diag() += 2.0 * w;
        }
}

/// b . grad by upwinding: forward difference where b_p >= 0, backward otherwise.
inline void add_drift(const Point& b, double h, RowStencil& s) {
    for (int p = 0; p < s.dim; ++p) {
        const double w = std::abs(b[p]) / h;
        s.add(axis_offset(p, b[p] >= 0.0 ? +1 : -1), w);
        s.diag() -= w;
    }
}

}  // namespace detail

/// Assembles A^v for the policy v on the interior of `grid`.
/// Throws MonotonicityViolation if some neighbor weight is negative.
inline DiscreteOperator assemble(const SwitchingModel& model, const GridSpec& grid, const MarkovPolicy& policy) {
    model.check_structure();
    require(model.dim == grid.dim, "assemble: model and grid dimensions differ");
    const std::size_t M = grid.interior_count();
    const int N = model.num_regimes;
    policy.check(M, N, model.num_controls());

    const double h = grid.spacing();
    std::vector<Eigen::Triplet<double, std::ptrdiff_t>> triplets;
    triplets.reserve(M * static_cast<std::size_t>(N) * (2 * static_cast<std::size_t>(grid.dim) + 1 + N));

    for (int k = 0; k < N; ++k) {
        for (std::size_t m = 0; m < M; ++m) {
            const Point x = grid.interior_node(m);
            const int v = policy(m, k);
            detail::RowStencil st;
            st.dim = grid.dim;
            detail::add_diffusion(model.diffusion_coefficient(x, k), h, st);
            detail::add_drift(model.drift(x, k, v), h, st);
            const RateMatrix rates = model.rates(x, v);
            st.diag() += model.cost(x, k, v) + rates(k, k);

            double scale = 0.0;
            for (int c = 0; c < st.slots(); ++c) scale = std::max(scale, std::abs(st.w[static_cast<std::size_t>(c)]));
            const auto full = grid.interior_multi(m);
            const std::size_t r = static_cast<std::size_t>(k) * M + m;
            for (int c = 0; c < st.slots(); ++c) {
                double w = st.w[static_cast<std::size_t>(c)];
                if (c == st.center()) {
                    triplets.emplace_back(static_cast<std::ptrdiff_t>(r), static_cast<std::ptrdiff_t>(r), w);
                    continue;
                }
                if (std::abs(w) <= 1e-14 * scale) w = 0.0;  // rounding residue of cancelling terms
                if (w < 0.0) throw MonotonicityViolation(m, k, x, w);
                if (w == 0.0) continue;
                const auto off = detail::RowStencil::offset(c, grid.dim);
                auto nb = full;
                for (int p = 0; p < grid.dim; ++p) nb[p] += off[p];
                if (auto col = grid.interior_index(nb))
                    triplets.emplace_back(static_cast<std::ptrdiff_t>(r),
                                          static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * M + *col), w);
            }
            for (int j = 0; j < N; ++j) {
                if (j == k || rates(k, j) == 0.0) continue;
                triplets.emplace_back(static_cast<std::ptrdiff_t>(r),
                                      static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j) * M + m), rates(k, j));
            }
        }
    }

    DiscreteOperator op;
    op.grid = grid;
    op.num_regimes = N;
    const auto n = static_cast<std::ptrdiff_t>(M * static_cast<std::size_t>(N));
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

/// Constant-control policy covering the grid interior.
inline MarkovPolicy constant_policy(const GridSpec& grid, int num_regimes, int control = 0) {
    return MarkovPolicy(grid.interior_count(), num_regimes, control);
}

/// The controlled part b . grad psi_k + c psi_k + sum_j m_kj psi_j of row (node, regime)
/// under `control`, evaluated with the same upwind weights as `assemble`.
inline double controlled_term(const SwitchingModel& model, const GridSpec& grid, const Vector& psi, std::size_t node,
                              int regime, int control) {
    const std::size_t M = grid.interior_count();
    const Point x = grid.interior_node(node);
    const double h = grid.spacing();
    const auto full = grid.interior_multi(node);
    const Point b = model.drift(x, regime, control);
    const double center = psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(regime) * M + node)];

    double value = 0.0;
    for (int p = 0; p < grid.dim; ++p) {
        const double w = std::abs(b[p]) / h;
        auto nb = full;
        nb[p] += b[p] >= 0.0 ? +1 : -1;
        const auto col = grid.interior_index(nb);
        const double neighbor =
            col ? psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(regime) * M + *col)] : 0.0;
        value += w * (neighbor - center);
    }
    const RateMatrix rates = model.rates(x, control);
    value += model.cost(x, regime, control) * center;
    for (int j = 0; j < model.num_regimes; ++j)
        value += rates(regime, j) * psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j) * M + node)];
    return value;
}

/// Returns a copy of `op` with kappa added to every diagonal entry.
inline DiscreteOperator shifted(DiscreteOperator op, double kappa) {
    for (std::ptrdiff_t i = 0; i < op.matrix.rows(); ++i) op.matrix.coeffRef(i, i) += kappa;
    return op;
}

/// Scan for the Metzler sign pattern; returns the most negative off-diagonal (0 if none).
inline double most_negative_off_diagonal(const SparseMatrix& a) {
    double worst = 0.0;
    for (std::ptrdiff_t c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it)
            if (it.row() != it.col()) worst = std::min(worst, it.value());
    return worst;
}

/// Matrix Market coordinate dump (1-based indices, 17 significant digits).
inline void write_matrix_market(const DiscreteOperator& op, std::ostream& os) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << "% interior unknowns ordered regime-major; grid radius " << op.grid.radius << ", nodes per axis "
       << op.grid.nodes_per_axis << ", dim " << op.grid.dim << ", regimes " << op.num_regimes << "\n";
    os << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << op.matrix.nonZeros() << '\n';
    os << std::setprecision(17);
    for (std::ptrdiff_t c = 0; c < op.matrix.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(op.matrix, c); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace rsc
