#pragma once

// Controlled regime-switching diffusion problems and sampling-based checks
// of the standing hypotheses on their coefficients.

#include "rsc/core.hpp"
#include "rsc/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rsc {

/// The full problem datum of a controlled switching diffusion
///
///   dX = b(X, S, Z) dt + sigma(X, S) dW,   S jumps with rates m(X, Z),
///
/// with running cost c(X, S, Z) >= 0. Controls are referred to by their index
/// into `controls`; the coefficient closures must be pure functions.
struct SwitchingModel {
    std::string name;
    int dim = 1;
    int num_regimes = 1;
    std::vector<Point> controls;

    std::function<Point(const Point& x, int regime, int control)> drift;
    std::function<SquareMatrix(const Point& x, int regime)> diffusion;
    /// Full N x N generator: off-diagonals >= 0, rows sum to zero.
    std::function<RateMatrix(const Point& x, int control)> rates;
    std::function<double(const Point& x, int regime, int control)> cost;

    int num_controls() const { return static_cast<int>(controls.size()); }

    /// a = sigma sigma^T / 2.
    SquareMatrix diffusion_coefficient(const Point& x, int regime) const {
        const SquareMatrix s = diffusion(x, regime);
        return 0.5 * s * s.transpose();
    }

    void check_structure() const {
        require(dim >= 1 && dim <= kMaxDim, "model dimension must be in [1, " + std::to_string(kMaxDim) + "]");
        require(num_regimes >= 1 && num_regimes <= kMaxRegimes,
                "number of regimes must be in [1, " + std::to_string(kMaxRegimes) + "]");
        require(!controls.empty(), "model needs at least one control point");
        require(drift && diffusion && rates && cost, "model coefficient functions must all be set");
    }
};

/// Copy of `model` whose cost is c(x, k, xi) + offset(x).
inline SwitchingModel with_cost_offset(SwitchingModel model, std::function<double(const Point&)> offset) {
    auto base = std::move(model.cost);
    model.cost = [base = std::move(base), offset = std::move(offset)](const Point& x, int k, int xi) {
        return base(x, k, xi) + offset(x);
    };
    return model;
}

inline SwitchingModel with_cost_shift(SwitchingModel model, double kappa) {
    return with_cost_offset(std::move(model), [kappa](const Point&) { return kappa; });
}

/// Uniform samples in [-radius, radius]^dim; the first sample is the origin.
inline std::vector<Point> sample_box(int dim, double radius, int samples, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-radius, radius);
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(samples));
    out.push_back(Point::Zero(dim));
    for (int s = 1; s < samples; ++s) {
        Point x(dim);
        for (int d = 0; d < dim; ++d) x[d] = u(gen);
        out.push_back(x);
    }
    return out;
}

struct HypothesisCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;  ///< fitted constant or extremal quantity
    Point witness;       ///< worst sample point
    int regime = -1;
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    const HypothesisCheck& at(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw InvalidArgument("no check named " + name);
    }
};

struct ValidationOptions {
    std::uint64_t seed = 0x5eed;
    double ellipticity_floor = 1e-8;
    double row_sum_tolerance = 1e-12;
    int workers = 1;
};

namespace detail {

inline double min_symmetric_eigenvalue(const SquareMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Throws on a rate matrix that is not a generator (malformed input).
inline void check_generator(const RateMatrix& m, int num_regimes, const Point& x, int control, double tol) {
    require(m.rows() == num_regimes && m.cols() == num_regimes, "rate matrix has wrong shape");
    for (int i = 0; i < num_regimes; ++i) {
        double row = 0.0;
        double scale = 1.0;
        for (int j = 0; j < num_regimes; ++j) {
            if (i != j && !(m(i, j) >= 0.0))
                throw InvalidArgument("negative off-diagonal rate m(" + std::to_string(i) + "," + std::to_string(j) +
                                      ") at control " + std::to_string(control) + ", x = " +
                                      std::to_string(x[0]));
            row += m(i, j);
            scale = std::max(scale, std::abs(m(i, j)));
        }
        if (!(std::abs(row) <= tol * scale))
            throw InvalidArgument("rate matrix row " + std::to_string(i) + " sums to " + std::to_string(row) +
                                  " (must be 0) at control " + std::to_string(control));
    }
}

/// Strong connectivity of a directed graph given as an adjacency matrix.
inline bool strongly_connected(const std::vector<std::vector<bool>>& adj) {
    const std::size_t n = adj.size();
    if (n <= 1) return true;
    auto reach_all = [&](bool transpose) {
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                const bool edge = transpose ? adj[j][i] : adj[i][j];
                if (edge && !seen[j]) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    return reach_all(false) && reach_all(true);
}

}  // namespace detail

/// Sampling-based check of local Lipschitz continuity (A1), affine growth (A2),
/// nondegeneracy (A3) and irreducibility of the regime graph (A4), plus the
/// cost sign. Deterministic for a given seed; worker count does not matter.
///
/// (A4) is certified at sample points only: an edge i -> j exists when
/// min over controls of m_ij is positive at some sample.
inline ValidationReport validate_model(const SwitchingModel& model, double box_radius, int samples,
                                       const ValidationOptions& opt = {}) {
    model.check_structure();
    require(samples >= 1, "validate_model: samples must be >= 1");
    require(box_radius > 0.0, "validate_model: box_radius must be > 0");

    const int N = model.num_regimes;
    const int Z = model.num_controls();
    const auto pts = sample_box(model.dim, box_radius, samples, opt.seed);

    // Per-sample partial results, reduced in sample order.
    struct Local {
        double lip_coarse = 0.0, lip_fine = 0.0;
        double growth = 0.0;
        double min_eig = std::numeric_limits<double>::infinity();
        int min_eig_regime = 0;
        double min_cost = std::numeric_limits<double>::infinity();
        std::vector<char> edges;
    };
    std::vector<Local> local(pts.size());

    std::mt19937_64 dir_gen(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g;
    std::vector<Point> dirs;
    dirs.reserve(pts.size());
    for (std::size_t s = 0; s < pts.size(); ++s) {
        Point u(model.dim);
        for (int d = 0; d < model.dim; ++d) u[d] = g(dir_gen);
        dirs.push_back(u / u.norm());
    }

    // Rates are checked serially first so malformed input fails deterministically.
    for (const auto& x : pts)
        for (int z = 0; z < Z; ++z) detail::check_generator(model.rates(x, z), N, x, z, opt.row_sum_tolerance);

    const double delta = 1e-3 * box_radius;
    parallel_for(pts.size(), opt.workers, [&](std::size_t s) {
        const Point& x = pts[s];
        Local& L = local[s];
        L.edges.assign(static_cast<std::size_t>(N * N), 0);

        auto lipschitz_ratio = [&](double step) {
            const Point y = x + step * dirs[s];
            const double dist2 = (x - y).squaredNorm();
            double worst = 0.0;
            for (int z = 0; z < Z; ++z) {
                const RateMatrix mx = model.rates(x, z), my = model.rates(y, z);
                const double dm = (mx - my).cwiseAbs2().maxCoeff();
                for (int k = 0; k < N; ++k) {
                    const double db = (model.drift(x, k, z) - model.drift(y, k, z)).squaredNorm();
                    const double ds = (model.diffusion(x, k) - model.diffusion(y, k)).squaredNorm();
                    worst = std::max(worst, (db + ds + dm) / dist2);
                }
            }
            return worst;
        };
        L.lip_coarse = lipschitz_ratio(delta);
        L.lip_fine = lipschitz_ratio(0.5 * delta);

        for (int k = 0; k < N; ++k) {
            double radial = 0.0;
            for (int z = 0; z < Z; ++z) {
                radial = std::max(radial, std::max(0.0, model.drift(x, k, z).dot(x)));
                L.min_cost = std::min(L.min_cost, model.cost(x, k, z));
            }
            const double sig = model.diffusion(x, k).squaredNorm();
            L.growth = std::max(L.growth, (radial + sig) / (1.0 + x.squaredNorm()));
            const double e = detail::min_symmetric_eigenvalue(model.diffusion_coefficient(x, k));
            if (e < L.min_eig) {
                L.min_eig = e;
                L.min_eig_regime = k;
            }
        }
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (i == j) continue;
                double floor = std::numeric_limits<double>::infinity();
                for (int z = 0; z < Z; ++z) floor = std::min(floor, model.rates(x, z)(i, j));
                if (floor > 0.0) L.edges[static_cast<std::size_t>(i * N + j)] = 1;
            }
    });

    ValidationReport report;
    HypothesisCheck a1{"A1", false, 0.0, pts[0], -1, ""};
    double coarse = 0.0;
    for (std::size_t s = 0; s < pts.size(); ++s) {
        coarse = std::max(coarse, local[s].lip_coarse);
        if (!(local[s].lip_fine <= a1.value)) {
            a1.value = local[s].lip_fine;
            a1.witness = pts[s];
        }
    }
    a1.passed = std::isfinite(a1.value) && a1.value <= 1.5 * coarse + 1e-9;
    a1.detail = "max squared difference quotient " + std::to_string(a1.value) + " (coarse pairs " +
                std::to_string(coarse) + ")";
    report.checks.push_back(a1);

    HypothesisCheck a2{"A2", false, 0.0, pts[0], -1, ""};
    double half = 0.0;
    for (std::size_t s = 0; s < pts.size(); ++s) {
        if (!(local[s].growth <= a2.value)) {
            a2.value = local[s].growth;
            a2.witness = pts[s];
        }
        if (pts[s].cwiseAbs().maxCoeff() <= 0.5 * box_radius) half = std::max(half, local[s].growth);
    }
    a2.passed = std::isfinite(a2.value) && a2.value <= 1.5 * half + 1e-12;
    a2.detail = "fitted C0 = " + std::to_string(a2.value) + " (half box " + std::to_string(half) + ")";
    report.checks.push_back(a2);

    HypothesisCheck a3{"A3", false, std::numeric_limits<double>::infinity(), pts[0], 0, ""};
    for (std::size_t s = 0; s < pts.size(); ++s)
        if (local[s].min_eig < a3.value) {
            a3.value = local[s].min_eig;
            a3.witness = pts[s];
            a3.regime = local[s].min_eig_regime;
        }
    a3.passed = a3.value >= opt.ellipticity_floor;
    a3.detail = "minimum eigenvalue of a = " + std::to_string(a3.value);
    report.checks.push_back(a3);

    std::vector<std::vector<bool>> adj(static_cast<std::size_t>(N), std::vector<bool>(static_cast<std::size_t>(N)));
    for (const auto& L : local)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                if (L.edges[static_cast<std::size_t>(i * N + j)]) adj[i][j] = true;
    HypothesisCheck a4{"A4", detail::strongly_connected(adj), 0.0, pts[0], -1, ""};
    int edge_count = 0;
    for (const auto& row : adj) edge_count += static_cast<int>(std::count(row.begin(), row.end(), true));
    a4.value = edge_count;
    a4.detail = a4.passed ? "regime graph strongly connected" : "regime graph disconnected";
    report.checks.push_back(a4);

    HypothesisCheck cost{"cost_nonnegative", false, std::numeric_limits<double>::infinity(), pts[0], -1, ""};
    for (std::size_t s = 0; s < pts.size(); ++s)
        if (local[s].min_cost < cost.value) {
            cost.value = local[s].min_cost;
            cost.witness = pts[s];
        }
    cost.passed = cost.value >= 0.0;
    cost.detail = "minimum sampled cost " + std::to_string(cost.value);
    report.checks.push_back(cost);
    return report;
}

/// Reachability matrix of the (A4) regime graph at the given samples.
inline std::vector<std::vector<bool>> regime_reachability(const SwitchingModel& model, const std::vector<Point>& pts) {
    const auto N = static_cast<std::size_t>(model.num_regimes);
    std::vector<std::vector<bool>> reach(N, std::vector<bool>(N, false));
    for (const auto& x : pts)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                double floor = std::numeric_limits<double>::infinity();
                for (int z = 0; z < model.num_controls(); ++z)
                    floor = std::min(floor, model.rates(x, z)(static_cast<int>(i), static_cast<int>(j)));
                if (floor > 0.0) reach[i][j] = true;
            }
    for (std::size_t i = 0; i < N; ++i) reach[i][i] = true;
    // Warshall closure.
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    return reach;
}

}  // namespace rsc
