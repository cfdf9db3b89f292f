#pragma once

// End-to-end checks that tie the eigen solver and the simulator together:
// optimality of the extracted policy, the optimal value as a Monte Carlo
// growth rate, and the near-monotone mode for bounded-coefficient models.

#include "rsc/core.hpp"
#include "rsc/discretize.hpp"
#include "rsc/eigensolve.hpp"
#include "rsc/grid.hpp"
#include "rsc/model.hpp"
#include "rsc/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rsc {

/// `count` policies with i.i.d. uniform controls per (node, regime).
inline std::vector<MarkovPolicy> random_policies(const GridSpec& grid, int num_regimes, int num_controls, int count,
                                                 std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> pick(0, num_controls - 1);
    std::vector<MarkovPolicy> out;
    for (int i = 0; i < count; ++i) {
        MarkovPolicy p(grid.interior_count(), num_regimes);
        for (int& v : p.table) v = pick(gen);
        out.push_back(std::move(p));
    }
    return out;
}

struct PolicyComparison {
    double lambda = 0.0;
    double excess = 0.0;  ///< lambda - lambda*
    bool passed = false;  ///< excess >= -tol
};

struct OptimalityReport {
    double lambda_star = 0.0;
    std::vector<PolicyComparison> alternatives;
    double resolve_lambda_difference = 0.0;  ///< |lambda(v*) - lambda*| on re-solve
    double resolve_psi_difference = 0.0;     ///< normalized sup distance of the re-solved psi
    double selector_residual = 0.0;          ///< relative violation of the selector equation by v*
    bool fixed_point = false;
    bool passed = false;
};

/// Every alternative policy has a principal eigenvalue of at least lambda* - tol,
/// and v* reproduces (lambda*, psi*) when its linear problem is solved again.
inline OptimalityReport verify_optimality(const SwitchingModel& model, const GridSpec& grid,
                                          const SemilinearSolution& sol, const std::vector<MarkovPolicy>& alternatives,
                                          double tol = 1e-8, const EigenOptions& eig = {}, int workers = 1) {
    OptimalityReport rep;
    rep.lambda_star = sol.eigen.lambda;
    rep.alternatives.resize(alternatives.size());
    parallel_for(alternatives.size(), workers, [&](std::size_t i) {
        const EigenPair e = principal_eigenpair(assemble(model, grid, alternatives[i]), eig);
        auto& c = rep.alternatives[i];
        c.lambda = e.lambda;
        c.excess = e.lambda - rep.lambda_star;
        c.passed = c.excess >= -tol;
    });
    const EigenPair again = principal_eigenpair(assemble(model, grid, sol.policy), eig);
    rep.resolve_lambda_difference = std::abs(again.lambda - rep.lambda_star);
    const double scale = std::max(sol.eigen.psi.cwiseAbs().maxCoeff(), 1.0);
    rep.resolve_psi_difference = (again.psi - sol.eigen.psi).cwiseAbs().maxCoeff() / scale;
    rep.selector_residual = selector_residual(model, grid, sol.eigen.psi, sol.policy);
    rep.fixed_point = rep.resolve_lambda_difference <= tol && rep.resolve_psi_difference <= std::max(tol, 1e-8);
    rep.passed = rep.fixed_point &&
                 std::all_of(rep.alternatives.begin(), rep.alternatives.end(), [](const auto& c) { return c.passed; });
    return rep;
}

struct NearMonotoneValidation {
    HypothesisCheck b1;  ///< bounded b, sigma, c: value = fitted C
    HypothesisCheck b2;  ///< rate floor: value = varrho
    HypothesisCheck b3;  ///< radial drift <b, x>^+ / |x| -> 0: value = ratio at the largest radius
    std::vector<double> b3_ladder;
    bool all_passed() const { return b1.passed && b2.passed && b3.passed; }
};

/// Sampling checks for bounded coefficients, a uniform positive switching floor,
/// and vanishing outward radial drift.
///
/// B1 compares sup |b|, sup ||sigma||, sup c over [-R, R]^d with the same sups over
/// the half box; bounded coefficients saturate, so the ratio stays below 1.05.
/// B3 evaluates max <b, x>^+ / |x| on spheres of radius R/8, R/4, R/2, R and passes
/// when the sequence is non-increasing and ends below half its start (or below 1e-9).
inline NearMonotoneValidation validate_near_monotone(const SwitchingModel& model, double box_radius, int samples,
                                                     std::uint64_t seed = 0x5eed) {
    model.check_structure();
    require(samples >= 1, "validate_near_monotone: samples must be >= 1");
    require(box_radius > 0.0, "validate_near_monotone: box_radius must be > 0");
    const int N = model.num_regimes, Z = model.num_controls();
    const auto pts = sample_box(model.dim, box_radius, samples, seed);

    NearMonotoneValidation rep;
    std::array<double, 3> full{}, half{};
    Point worst = pts[0];
    double worst_val = -1.0;
    double floor = std::numeric_limits<double>::infinity();
    Point floor_at = pts[0];
    int floor_regime = -1;
    for (const auto& x : pts) {
        const bool inner = x.cwiseAbs().maxCoeff() <= 0.5 * box_radius;
        for (int z = 0; z < Z; ++z) {
            const RateMatrix m = model.rates(x, z);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    if (i != j && m(i, j) < floor) {
                        floor = m(i, j);
                        floor_at = x;
                        floor_regime = i;
                    }
            for (int k = 0; k < N; ++k) {
                const std::array<double, 3> v{model.drift(x, k, z).norm(), model.diffusion(x, k).norm(),
                                              std::abs(model.cost(x, k, z))};
                for (std::size_t q = 0; q < 3; ++q) {
                    if (!(v[q] <= full[q])) full[q] = v[q];
                    if (inner && !(v[q] <= half[q])) half[q] = v[q];
                    if (!(v[q] <= worst_val)) {
                        worst_val = v[q];
                        worst = x;
                    }
                }
            }
        }
    }
    static const char* names[] = {"drift", "diffusion", "cost"};
    rep.b1 = {"B1", true, 0.0, worst, -1, ""};
    for (std::size_t q = 0; q < 3; ++q) {
        rep.b1.value = std::max(rep.b1.value, full[q]);
        const bool ok = std::isfinite(full[q]) && full[q] <= 1.05 * half[q] + 1e-12;
        if (!ok) {
            rep.b1.passed = false;
            rep.b1.detail += std::string(rep.b1.detail.empty() ? "" : "; ") + names[q] + " grows from " +
                             std::to_string(half[q]) + " (half box) to " + std::to_string(full[q]);
        }
    }
    if (rep.b1.passed) rep.b1.detail = "coefficients bounded by C = " + std::to_string(rep.b1.value);

    if (N == 1) floor = std::numeric_limits<double>::infinity();
    rep.b2 = {"B2", N == 1 || floor > 0.0, N == 1 ? 0.0 : floor, floor_at, floor_regime,
              N == 1 ? "single regime: no switching" : "minimum off-diagonal rate " + std::to_string(floor)};

    // Radial drift on a ladder of spheres.
    std::mt19937_64 gen(seed ^ 0x2545f4914f6cdd1dULL);
    std::normal_distribution<double> g;
    std::vector<Point> dirs;
    const int n_dirs = model.dim == 1 ? 2 : std::max(64, samples / 4);
    for (int s = 0; s < n_dirs; ++s) {
        Point u(model.dim);
        if (model.dim == 1)
            u[0] = s == 0 ? 1.0 : -1.0;
        else
            for (int d = 0; d < model.dim; ++d) u[d] = g(gen);
        dirs.push_back(u / u.norm());
    }
    rep.b3 = {"B3", true, 0.0, pts[0], -1, ""};
    for (double frac : {0.125, 0.25, 0.5, 1.0}) {
        const double r = frac * box_radius;
        double ratio = 0.0;
        for (const auto& u : dirs) {
            const Point x = r * u;
            for (int k = 0; k < N; ++k)
                for (int z = 0; z < Z; ++z) {
                    const double v = std::max(0.0, model.drift(x, k, z).dot(x)) / r;
                    if (!(v <= ratio)) {
                        ratio = v;
                        if (frac == 1.0) rep.b3.witness = x;
                    }
                }
        }
        rep.b3_ladder.push_back(ratio);
    }
    for (std::size_t i = 1; i < rep.b3_ladder.size(); ++i)
        if (!(rep.b3_ladder[i] <= rep.b3_ladder[i - 1] + 1e-12)) rep.b3.passed = false;
    rep.b3.value = rep.b3_ladder.back();
    if (!(rep.b3.value <= 1e-9 || rep.b3.value <= 0.5 * rep.b3_ladder.front())) rep.b3.passed = false;
    rep.b3.detail = "radial drift ratio on radii R/8..R: ";
    for (double v : rep.b3_ladder) rep.b3.detail += std::to_string(v) + " ";
    return rep;
}

/// Exponential growth bound log psi_k(x) - log psi_k(0) <= kappa_hat |x|.
struct GrowthBound {
    double kappa_hat = 0.0;
    double theta = std::numeric_limits<double>::quiet_NaN();  ///< psi = O(V^theta) fit, when V is given
    double fit_residual = 0.0;  ///< largest excess of the bound over the grid (0 when no violation)
    int violations = 0;
    std::size_t nodes_checked = 0;
};

/// kappa_hat is the largest |grad log psi| (one-sided differences) over the inner
/// 75% of the box; the bound is then checked at every interior node. With a
/// Lyapunov function, theta is the largest (log psi - log psi(0)) / log V over
/// nodes with log V >= 1, clamped to [0, 1).
inline GrowthBound fit_growth_bound(const GridSpec& grid, const Vector& psi, int num_regimes,
                                    const std::function<double(const Point&, int)>& lyap = {}) {
    const std::size_t M = grid.interior_count();
    require(static_cast<std::size_t>(psi.size()) == M * static_cast<std::size_t>(num_regimes),
            "fit_growth_bound: psi has wrong size");
    const double h = grid.spacing();
    const std::size_t origin = grid.interior_origin_index();
    GrowthBound gb;
    auto at = [&](int k, std::size_t m) { return psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * M + m)]; };

    for (int k = 0; k < num_regimes; ++k)
        for (std::size_t m = 0; m < M; ++m) {
            const Point x = grid.interior_node(m);
            if (x.cwiseAbs().maxCoeff() > 0.75 * grid.radius) continue;
            const auto multi = grid.interior_multi(m);
            double g2 = 0.0;
            for (int p = 0; p < grid.dim; ++p) {
                double slope = 0.0;
                for (int sgn : {-1, 1}) {
                    auto nb = multi;
                    nb[p] += sgn;
                    if (auto j = grid.interior_index(nb))
                        slope = std::max(slope, std::abs(std::log(at(k, *j)) - std::log(at(k, m))) / h);
                }
                g2 += slope * slope;
            }
            gb.kappa_hat = std::max(gb.kappa_hat, std::sqrt(g2));
        }

    double theta = 0.0;
    bool have_theta = false;
    for (int k = 0; k < num_regimes; ++k) {
        const double log0 = std::log(at(k, origin));
        for (std::size_t m = 0; m < M; ++m) {
            const Point x = grid.interior_node(m);
            const double rise = std::log(at(k, m)) - log0;
            const double excess = rise - gb.kappa_hat * x.norm();
            ++gb.nodes_checked;
            if (excess > 1e-9) {
                ++gb.violations;
                gb.fit_residual = std::max(gb.fit_residual, excess);
            }
            if (lyap) {
                const double lv = std::log(lyap(x, k));
                if (lv >= 1.0) {
                    theta = std::max(theta, rise / lv);
                    have_theta = true;
                }
            }
        }
    }
    if (have_theta) gb.theta = std::clamp(theta, 0.0, std::nextafter(1.0, 0.0));
    return gb;
}

struct NearMonotoneReport {
    NearMonotoneValidation gate;
    bool ran = false;  ///< false when the gate refused the model
    SweepResult sweep;
    bool sweep_converged = false;
    double lambda_star = 0.0;
    double epsilon = 0.01;
    double sublevel_radius = 0.0;        ///< largest |x|_inf in the sub-level set
    std::vector<Point> escaping_nodes;   ///< sub-level nodes outside the strict sub-box
    bool sublevel_compact = false;
    GrowthBound growth;
    bool passed = false;
    std::string detail;
};

/// Near-monotone mode: gate on (B1)-(B3), sweep the domain, then check a
/// posteriori that {x : min_z min_k c <= lambda* + eps} stays inside 0.9 R of the
/// largest box and fit the exponential growth bound of psi*.
///
/// The sweep counts as converged when it is strictly increasing and its last
/// increment is below 1e-3 (1 + |lambda|) and smaller than the one before.
inline NearMonotoneReport near_monotone_suite(const SwitchingModel& model, const std::vector<double>& radii,
                                              int nodes_per_unit, const SolveOptions& opt = {}, double epsilon = 0.01,
                                              int samples = 2000, std::uint64_t seed = 0x5eed, int workers = 1) {
    require(!radii.empty(), "near_monotone_suite: radii must be nonempty");
    NearMonotoneReport rep;
    rep.epsilon = epsilon;
    rep.gate = validate_near_monotone(model, radii.back(), samples, seed);
    if (!rep.gate.all_passed()) {
        rep.detail = "refused: model is outside the (B1)-(B3) class";
        return rep;
    }
    rep.ran = true;
    rep.sweep = domain_sweep(model, radii, nodes_per_unit, opt, workers);
    const auto& e = rep.sweep.entries;
    const double last = e.back().lambda;
    rep.lambda_star = std::max(last, rep.sweep.extrapolated.value_or(last));
    if (e.size() >= 2) {
        const double d_last = e.back().lambda - e[e.size() - 2].lambda;
        const double d_prev = e.size() >= 3 ? e[e.size() - 2].lambda - e[e.size() - 3].lambda
                                            : std::numeric_limits<double>::infinity();
        rep.sweep_converged = rep.sweep.monotonicity_certificate && d_last <= 1e-3 * (1.0 + std::abs(last)) &&
                              d_last < d_prev;
    }

    const GridSpec grid = grid_for_density(radii.back(), nodes_per_unit, model.dim);
    rep.sublevel_compact = true;
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const Point x = grid.node(i);
        double cmin = std::numeric_limits<double>::infinity();
        for (int k = 0; k < model.num_regimes; ++k)
            for (int z = 0; z < model.num_controls(); ++z) cmin = std::min(cmin, model.cost(x, k, z));
        if (cmin > rep.lambda_star + epsilon) continue;
        const double r = x.cwiseAbs().maxCoeff();
        rep.sublevel_radius = std::max(rep.sublevel_radius, r);
        if (r > 0.9 * grid.radius) {
            rep.sublevel_compact = false;
            if (rep.escaping_nodes.size() < 20) rep.escaping_nodes.push_back(x);
        }
    }
    rep.growth = fit_growth_bound(grid, e.back().eigen.psi, model.num_regimes);
    rep.passed = rep.sweep_converged && rep.sublevel_compact && rep.growth.violations == 0;
    rep.detail = rep.passed ? "near-monotone checks passed" : "near-monotone checks failed";
    return rep;
}

struct RateComparison {
    CostEstimate estimate;
    double lambda = 0.0;  ///< principal eigenvalue of the policy's linear problem
    bool passed = false;
};

struct OptimalValueReport {
    double lambda_star = 0.0;
    double horizon_slack = 0.0;  ///< 1/T allowance for the finite-horizon offset
    RateComparison optimal;
    std::vector<RateComparison> random;
    bool flagged = false;  ///< some estimate carries an unreliable or heavy-tail flag
    bool passed = false;
};

/// Monte Carlo growth rates: under v* the rate matches lambda* within 3 standard
/// errors plus 1/T, and no sampled policy beats lambda* by more than that.
///
/// The 1/T term accounts for (1/T) log(psi(x0) E[1/psi(X_T)]), the transient of a
/// finite horizon, which the estimator cannot separate from the rate.
inline OptimalValueReport lambda_equals_optimal_value(const SwitchingModel& model, const GridSpec& grid,
                                                      const SemilinearSolution& sol, int policy_sample_count,
                                                      const PathConfig& cfg, std::uint64_t seed, int workers = 1) {
    OptimalValueReport rep;
    rep.lambda_star = sol.eigen.lambda;
    rep.horizon_slack = 1.0 / cfg.horizon;
    auto band = [&](const CostEstimate& e) { return 3.0 * e.std_error + rep.horizon_slack; };

    PathConfig c = cfg;
    c.seed = seed;
    rep.optimal.estimate = estimate_risk_sensitive_rate(model, ControlLaw::from_policy(grid, sol.policy), c,
                                                        rep.lambda_star, workers);
    rep.optimal.lambda = rep.lambda_star;
    rep.optimal.passed = std::abs(rep.optimal.estimate.value - rep.lambda_star) <= band(rep.optimal.estimate);
    rep.flagged = rep.optimal.estimate.unreliable || rep.optimal.estimate.heavy_tail;

    const auto policies = random_policies(grid, model.num_regimes, model.num_controls(), policy_sample_count, seed + 1);
    for (std::size_t i = 0; i < policies.size(); ++i) {
        RateComparison r;
        r.lambda = principal_eigenpair(assemble(model, grid, policies[i])).lambda;
        c.seed = seed + 2 + i;
        r.estimate = estimate_risk_sensitive_rate(model, ControlLaw::from_policy(grid, policies[i]), c,
                                                  rep.lambda_star, workers);
        r.passed = r.estimate.value >= rep.lambda_star - band(r.estimate);
        rep.flagged = rep.flagged || r.estimate.unreliable || r.estimate.heavy_tail;
        rep.random.push_back(std::move(r));
    }
    rep.passed = rep.optimal.passed &&
                 std::all_of(rep.random.begin(), rep.random.end(), [](const auto& r) { return r.passed; });
    return rep;
}

}  // namespace rsc
