#pragma once

// Principal eigenpairs of Metzler operators and the min-type (Bellman)
// eigenproblem  min_v A^v psi = lambda psi  solved by policy iteration.

#include "rsc/core.hpp"
#include "rsc/discretize.hpp"
#include "rsc/grid.hpp"
#include "rsc/model.hpp"
#include "rsc/parallel.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rsc {

/// Principal eigenpair with psi normalized so that min_k psi_k(origin) = 1.
struct EigenPair {
    double lambda = 0.0;
    Vector psi;
    double residual = 0.0;  ///< ||A psi - lambda psi||_inf / ||psi||_inf before normalization
    int iterations = 0;
};

struct EigenOptions {
    double tol = 1e-10;
    int max_iter = 20000;
    /// Move the shift toward the Collatz-Wielandt upper bound once the iterate is positive.
    bool adaptive_shift = true;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> adjacency(const SparseMatrix& a, bool transpose) {
    std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(a.rows()));
    for (std::ptrdiff_t c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it) {
            if (it.row() == it.col() || it.value() == 0.0) continue;
            const auto i = static_cast<std::size_t>(it.row()), j = static_cast<std::size_t>(it.col());
            if (transpose)
                adj[j].push_back(i);
            else
                adj[i].push_back(j);
        }
    return adj;
}

/// First row unreachable from row 0 along forward or backward edges, or nullopt.
inline std::optional<std::size_t> find_unreached(const SparseMatrix& a) {
    const auto n = static_cast<std::size_t>(a.rows());
    for (bool transpose : {false, true}) {
        const auto adj = adjacency(a, transpose);
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j : adj[i])
                if (!seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i]) return i;
    }
    return std::nullopt;
}

struct PerronResult {
    double lambda = 0.0;
    Vector x;
    double residual = 0.0;
    int iterations = 0;
};

inline double inf_norm(const SparseMatrix& a) {
    Vector row = Vector::Zero(a.rows());
    for (std::ptrdiff_t c = 0; c < a.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(a, c); it; ++it) row[it.row()] += std::abs(it.value());
    return row.size() ? row.maxCoeff() : 0.0;
}

/// Shifted inverse iteration on (sI - A)^{-1} for an irreducible Metzler matrix.
/// The first shift is s = 1 + max_i sum_j A_ij, which makes sI - A a strictly
/// row-diagonally-dominant M-matrix. Later shifts sit above the Collatz-Wielandt
/// bound max_i (Ax)_i / x_i >= lambda for the current positive iterate x, and the
/// factorization is of D^{-1}(sI - A)D with D = diag(x), whose row sums are
/// s - (Ax)_i / x_i > 0. Keeping the factored matrix diagonally dominant is what
/// keeps the solves positive when psi spans many orders of magnitude.
inline PerronResult perron_iteration(const SparseMatrix& a, const EigenOptions& opt, const Vector* initial) {
    const std::ptrdiff_t n = a.rows();
    require(n > 0 && a.cols() == n, "principal_eigenpair: matrix must be square and nonempty");
    require(opt.tol > 0.0, "principal_eigenpair: tol must be > 0");
    if (auto unreached = find_unreached(a)) throw NotIrreducible(*unreached);

    const Vector row_sums = a * Vector::Ones(n);
    double shift = 1.0 + row_sums.maxCoeff();

    Vector x;
    if (initial) {
        require(initial->size() == n, "principal_eigenpair: initial vector has wrong size");
        require(initial->minCoeff() > 0.0, "principal_eigenpair: initial vector must be positive");
        x = *initial / initial->maxCoeff();
    } else {
        x = Vector::Ones(n);
    }

    // Achievable residual is bounded below by rounding in A x.
    const double tol = std::max(opt.tol, 64.0 * std::numeric_limits<double>::epsilon() * inf_norm(a));

    SparseMatrix identity(n, n);
    identity.setIdentity();
    Eigen::SparseLU<SparseMatrix> lu;
    Vector scale = Vector::Ones(n);
    auto factor = [&](double s) {
        SparseMatrix shifted_op = scale.cwiseInverse().asDiagonal() * (s * identity - a) * scale.asDiagonal();
        shifted_op.makeCompressed();
        lu.compute(shifted_op);
        if (lu.info() != Eigen::Success) throw NumericFailure("sparse LU factorization failed: " + lu.lastErrorMessage());
    };
    factor(shift);

    int refactors = 0;
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Vector z = lu.solve(x.cwiseQuotient(scale));
        Vector y = z.cwiseProduct(scale);
        const double ymax = y.maxCoeff();
        if (!(ymax > 0.0) || !std::isfinite(ymax)) throw NumericFailure("inverse iteration lost positivity");
        x = y / ymax;
        const Vector ax = a * x;
        const double lambda = x.dot(ax) / x.dot(x);
        residual = (ax - lambda * x).cwiseAbs().maxCoeff();  // ||x||_inf == 1
        if (residual <= tol) return {lambda, x, residual, it};

        // D^{-1} must stay representable.
        if (opt.adaptive_shift && refactors < 40 && x.minCoeff() > 1e-250) {
            const Vector ratio = ax.cwiseQuotient(x);
            const double hi = ratio.maxCoeff(), lo = ratio.minCoeff();
            const double margin = std::max(hi - lo, 1e-6 * (1.0 + std::abs(hi)));
            const double target = hi + margin;
            if (std::isfinite(target) && shift - hi > 4.0 * margin) {
                shift = target;
                scale = x;
                factor(shift);
                ++refactors;
            }
        }
    }
    throw NoConvergence(opt.max_iter, residual);
}

}  // namespace detail

/// Rightmost eigenpair of an irreducible Metzler operator with positive
/// eigenvector, normalized so that min over regimes of psi at the origin is 1.
inline EigenPair principal_eigenpair(const DiscreteOperator& op, const EigenOptions& opt = {},
                                     const Vector* initial = nullptr) {
    auto r = detail::perron_iteration(op.matrix, opt, initial);
    double anchor = std::numeric_limits<double>::infinity();
    for (int k = 0; k < op.num_regimes; ++k)
        anchor = std::min(anchor, r.x[static_cast<std::ptrdiff_t>(op.origin_row(k))]);
    if (!(anchor > 0.0)) throw NumericFailure("principal eigenvector vanishes at the origin");
    return {r.lambda, r.x / anchor, r.residual, r.iterations};
}

inline EigenPair principal_eigenpair(const DiscreteOperator& op, double tol, int max_iter) {
    EigenOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    return principal_eigenpair(op, opt);
}

/// Pointwise argmin over controls of the discrete Bellman bracket
/// b . grad psi_k + c psi_k + sum_j m_kj psi_j; ties go to the lowest index.
inline MarkovPolicy minimizing_selector(const SwitchingModel& model, const GridSpec& grid, const Vector& psi) {
    const std::size_t M = grid.interior_count();
    require(static_cast<std::size_t>(psi.size()) == M * static_cast<std::size_t>(model.num_regimes),
            "minimizing_selector: psi has wrong size");
    require(psi.minCoeff() > 0.0, "minimizing_selector: psi must be positive");
    MarkovPolicy policy(M, model.num_regimes);
    for (int k = 0; k < model.num_regimes; ++k)
        for (std::size_t m = 0; m < M; ++m) {
            int best = 0;
            double best_value = controlled_term(model, grid, psi, m, k, 0);
            for (int z = 1; z < model.num_controls(); ++z) {
                const double v = controlled_term(model, grid, psi, m, k, z);
                if (v < best_value) {
                    best_value = v;
                    best = z;
                }
            }
            policy(m, k) = best;
        }
    return policy;
}

/// Largest relative violation of the selector equation by `policy` at psi:
/// max over rows of (term(policy) - min_z term(z)) / (|min_z term(z)| + psi).
inline double selector_residual(const SwitchingModel& model, const GridSpec& grid, const Vector& psi,
                                const MarkovPolicy& policy) {
    const std::size_t M = grid.interior_count();
    double worst = 0.0;
    for (int k = 0; k < model.num_regimes; ++k)
        for (std::size_t m = 0; m < M; ++m) {
            double best = std::numeric_limits<double>::infinity();
            for (int z = 0; z < model.num_controls(); ++z)
                best = std::min(best, controlled_term(model, grid, psi, m, k, z));
            const double used = controlled_term(model, grid, psi, m, k, policy(m, k));
            const double scale = std::abs(best) + psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * M + m)];
            worst = std::max(worst, (used - best) / scale);
        }
    return worst;
}

struct SolveOptions {
    double tol = 1e-10;  ///< stop when successive policy-iteration eigenvalues differ by at most tol
    int max_policy_iters = 50;
    EigenOptions eigen{};
};

struct SemilinearSolution {
    EigenPair eigen;
    MarkovPolicy policy;
    std::vector<double> lambda_trace;
    int policy_iterations = 0;
    bool policy_stable = false;
    /// Policy-iteration indices forming a detected cycle (empty when none).
    std::vector<int> cycle;
};

/// Howard policy iteration for min_v A^v psi = lambda psi on the grid interior,
/// starting from the lowest-index constant policy. Each improvement step can
/// only lower the principal eigenvalue, so the trace is non-increasing.
inline SemilinearSolution solve_semilinear(const SwitchingModel& model, const GridSpec& grid,
                                           const SolveOptions& opt = {}) {
    require(opt.max_policy_iters >= 1, "solve_semilinear: max_policy_iters must be >= 1");
    SemilinearSolution out;
    MarkovPolicy policy = constant_policy(grid, model.num_regimes, 0);
    std::vector<MarkovPolicy> history;
    std::vector<EigenPair> pairs;
    Vector warm;

    for (int it = 0; it < opt.max_policy_iters; ++it) {
        const DiscreteOperator op = assemble(model, grid, policy);
        // Warm start from the previous eigenvector; bitwise reproducible either way.
        EigenPair eig = principal_eigenpair(op, opt.eigen, warm.size() ? &warm : nullptr);
        warm = eig.psi;
        out.lambda_trace.push_back(eig.lambda);
        history.push_back(policy);
        pairs.push_back(eig);
        out.policy_iterations = it + 1;

        MarkovPolicy next = minimizing_selector(model, grid, eig.psi);
        const bool stable = next == policy;
        const bool flat = it > 0 && std::abs(out.lambda_trace[it] - out.lambda_trace[it - 1]) <= opt.tol;
        if (stable || flat) {
            out.eigen = std::move(eig);
            out.policy = std::move(policy);
            out.policy_stable = stable;
            return out;
        }
        for (std::size_t h = 0; h < history.size(); ++h) {
            if (history[h] != next) continue;
            // Cycle: accept the member with the smallest eigenvalue.
            std::size_t best = h;
            for (std::size_t c = h; c < history.size(); ++c) {
                out.cycle.push_back(static_cast<int>(c));
                if (pairs[c].lambda < pairs[best].lambda) best = c;
            }
            out.eigen = pairs[best];
            out.policy = history[best];
            return out;
        }
        policy = std::move(next);
    }
    throw NoConvergence(opt.max_policy_iters, out.lambda_trace.size() >= 2
                                                  ? std::abs(out.lambda_trace.back() - out.lambda_trace.end()[-2])
                                                  : 0.0);
}

struct SweepEntry {
    double radius = 0.0;
    int nodes_per_axis = 0;
    double lambda = 0.0;
    MarkovPolicy policy;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> policy_histogram;
    EigenPair eigen;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    double lambda_star = 0.0;  ///< eigenvalue on the largest box
    std::optional<double> extrapolated;
    bool monotonicity_certificate = false;
    std::vector<std::string> red_flags;
};

/// Solves on nested boxes of equal mesh density; the eigenvalues must increase.
inline SweepResult domain_sweep(const SwitchingModel& model, const std::vector<double>& radii, int nodes_per_unit,
                                const SolveOptions& opt = {}, int workers = 1) {
    require(!radii.empty(), "domain_sweep: radii must be nonempty");
    for (std::size_t i = 1; i < radii.size(); ++i)
        require(radii[i] > radii[i - 1], "domain_sweep: radii must be strictly increasing");

    SweepResult out;
    out.entries.resize(radii.size());
    parallel_for(radii.size(), workers, [&](std::size_t i) {
        const GridSpec grid = grid_for_density(radii[i], nodes_per_unit, model.dim);
        SemilinearSolution sol = solve_semilinear(model, grid, opt);
        SweepEntry& e = out.entries[i];
        e.radius = radii[i];
        e.nodes_per_axis = grid.nodes_per_axis;
        e.lambda = sol.eigen.lambda;
        e.iterations = sol.policy_iterations;
        e.residual = sol.eigen.residual;
        e.policy_histogram = sol.policy.histogram(model.num_controls());
        e.policy = std::move(sol.policy);
        e.eigen = std::move(sol.eigen);
    });

    out.monotonicity_certificate = true;
    for (std::size_t i = 1; i < out.entries.size(); ++i) {
        const double d = out.entries[i].lambda - out.entries[i - 1].lambda;
        if (!(d > 0.0)) {
            out.monotonicity_certificate = false;
            if (d < -opt.tol)
                out.red_flags.push_back("eigenvalue decreases from radius " + std::to_string(out.entries[i - 1].radius) +
                                        " to " + std::to_string(out.entries[i].radius) + " by " + std::to_string(-d) +
                                        " (discretization artifact)");
        }
    }
    out.lambda_star = out.entries.back().lambda;

    // Geometric-increment extrapolation when the last increments shrink by a steady ratio.
    if (out.entries.size() >= 3) {
        const std::size_t n = out.entries.size();
        const double d1 = out.entries[n - 2].lambda - out.entries[n - 3].lambda;
        const double d2 = out.entries[n - 1].lambda - out.entries[n - 2].lambda;
        if (d1 > 0.0 && d2 > 0.0 && d2 < d1) {
            const double ratio = d2 / d1;
            out.extrapolated = out.lambda_star + d2 * ratio / (1.0 - ratio);
        }
    }
    return out;
}

struct UniquenessReport {
    int trials = 0;
    std::vector<double> lambdas;
    double max_psi_difference = 0.0;
    double max_lambda_difference = 0.0;
    bool passed = false;
    std::string error;
};

/// Reruns the eigensolver under the optimal policy from random positive starts;
/// normalized eigenvectors must coincide (simplicity of the Perron root).
inline UniquenessReport uniqueness_check(const SwitchingModel& model, const GridSpec& grid, int trials,
                                         std::uint64_t seed, const SolveOptions& opt = {}) {
    require(trials >= 2, "uniqueness_check: trials must be >= 2");
    UniquenessReport rep;
    rep.trials = trials;
    try {
        const SemilinearSolution sol = solve_semilinear(model, grid, opt);
        const DiscreteOperator op = assemble(model, grid, sol.policy);
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        std::vector<EigenPair> runs;
        for (int t = 0; t < trials; ++t) {
            Vector start(static_cast<std::ptrdiff_t>(op.size()));
            for (auto& v : start) v = u(gen);
            runs.push_back(principal_eigenpair(op, opt.eigen, &start));
            rep.lambdas.push_back(runs.back().lambda);
        }
        for (std::size_t i = 0; i < runs.size(); ++i)
            for (std::size_t j = i + 1; j < runs.size(); ++j) {
                const double scale = std::max(runs[i].psi.cwiseAbs().maxCoeff(), 1.0);
                rep.max_psi_difference =
                    std::max(rep.max_psi_difference, (runs[i].psi - runs[j].psi).cwiseAbs().maxCoeff() / scale);
                rep.max_lambda_difference = std::max(rep.max_lambda_difference, std::abs(runs[i].lambda - runs[j].lambda));
            }
        rep.passed = rep.max_psi_difference <= 1e-8 && rep.max_lambda_difference <= 1e-10;
    } catch (const NumericFailure& e) {
        rep.error = e.what();
        rep.passed = false;
    }
    return rep;
}

struct PotentialMonotonicityReport {
    double lambda_base = 0.0;
    double lambda_bumped = 0.0;
    double margin = 0.0;  ///< lambda_bumped - lambda_base
    bool strict_increase = false;
};

/// Solves with c and with c + height * 1{|x - center| <= bump_radius}.
inline PotentialMonotonicityReport potential_monotonicity_check(const SwitchingModel& model, const GridSpec& grid,
                                                                const Point& bump_center, double bump_height,
                                                                double bump_radius = 1.0,
                                                                const SolveOptions& opt = {}) {
    require(bump_height >= 0.0, "potential_monotonicity_check: bump height must be >= 0");
    require(bump_center.size() == model.dim, "potential_monotonicity_check: bump center has wrong dimension");
    const SwitchingModel bumped = with_cost_offset(model, [=](const Point& x) {
        return (x - bump_center).norm() <= bump_radius ? bump_height : 0.0;
    });
    PotentialMonotonicityReport rep;
    rep.lambda_base = solve_semilinear(model, grid, opt).eigen.lambda;
    rep.lambda_bumped = solve_semilinear(bumped, grid, opt).eigen.lambda;
    rep.margin = rep.lambda_bumped - rep.lambda_base;
    rep.strict_increase = rep.margin > 0.0;
    return rep;
}

}  // namespace rsc
