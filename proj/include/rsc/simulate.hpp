#pragma once

// Monte Carlo for the controlled switching diffusion.
//
// X moves by Euler-Maruyama, X += b h + sigma sqrt(h) g, and S jumps within a
// step to j != S with probability h m_Sj(X, v) (categorical draw, evaluated at
// the left endpoint). Every path owns an independent generator seeded from
// (seed, stream, path index), so results do not depend on the worker count,
// and all reductions run in path-index order.

#include "rsc/core.hpp"
#include "rsc/eigensolve.hpp"
#include "rsc/grid.hpp"
#include "rsc/model.hpp"
#include "rsc/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace rsc {

struct PathConfig {
    double step = 1e-2;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    int paths = 1000;
    Point x0;          ///< empty means the origin
    int regime0 = 0;
};

enum class Functional { RiskSensitiveRate, FeynmanKacAnnulus, MeanAbsPosition };

inline const char* to_string(Functional f) {
    switch (f) {
        case Functional::RiskSensitiveRate: return "RiskSensitiveRate";
        case Functional::FeynmanKacAnnulus: return "FeynmanKacAnnulus";
        case Functional::MeanAbsPosition: return "MeanAbsPosition";
    }
    return "?";
}

struct CostEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int paths = 0;
    Functional functional = Functional::RiskSensitiveRate;
    double lambda_ref = std::numeric_limits<double>::quiet_NaN();
    double ess = 0.0;               ///< (sum w)^2 / sum w^2 of the exponential weights
    double tail_index = std::numeric_limits<double>::infinity();  ///< Hill estimate for the weights
    bool unreliable = false;        ///< ESS < 10
    bool heavy_tail = false;        ///< tail index < 2: the weights likely have infinite variance
    double horizon = 0.0;           ///< effective horizon (steps * step)
};

/// Stationary Markov control: either one control everywhere or a grid policy
/// read at the nearest interior node (constant extension outside the grid).
class ControlLaw {
public:
    static ControlLaw constant(int control) {
        ControlLaw c;
        c.fixed_ = control;
        return c;
    }
    static ControlLaw from_policy(const GridSpec& grid, MarkovPolicy policy) {
        require(policy.nodes == grid.interior_count(), "ControlLaw: policy does not match the grid");
        ControlLaw c;
        c.grid_ = grid;
        c.policy_ = std::move(policy);
        return c;
    }
    int operator()(const Point& x, int regime) const {
        if (!grid_) return fixed_;
        return policy_(grid_->nearest_interior(x), regime);
    }
    void check(const SwitchingModel& model) const {
        if (!grid_) {
            require(fixed_ >= 0 && fixed_ < model.num_controls(), "ControlLaw: control index out of range");
            return;
        }
        require(grid_->dim == model.dim, "ControlLaw: grid dimension differs from the model");
        policy_.check(grid_->interior_count(), model.num_regimes, model.num_controls());
    }

private:
    int fixed_ = 0;
    std::optional<GridSpec> grid_;
    MarkovPolicy policy_;
};

/// Raised when step * (total switching rate) exceeds 1/2 at a visited state.
class StepTooLarge : public InvalidArgument {
public:
    StepTooLarge(const Point& x, int regime, int control, double rate, double step)
        : InvalidArgument(describe(x, regime, control, rate, step)), location(x), regime(regime), rate(rate) {}
    Point location;
    int regime;
    double rate;

private:
    static std::string describe(const Point& x, int k, int z, double rate, double step) {
        std::ostringstream os;
        os << "step " << step << " too large: total switching rate " << rate << " at x = (";
        for (int p = 0; p < x.size(); ++p) os << (p ? ", " : "") << x[p];
        os << "), regime " << k << ", control " << z << " gives step * rate = " << step * rate << " > 0.5";
        return os.str();
    }
};

namespace detail {

/// Independent generator for (seed, stream, path).
inline std::mt19937_64 path_generator(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

inline int step_count(double step, double horizon) {
    require(step > 0.0 && std::isfinite(step), "PathConfig: step must be > 0");
    require(horizon > 0.0 && std::isfinite(horizon), "PathConfig: horizon must be > 0");
    const double n = std::ceil(horizon / step - 1e-9);
    require(n <= 1e9, "PathConfig: horizon / step is too large");
    return std::max(1, static_cast<int>(n));
}

/// One Euler-Maruyama step with regime switching. Returns the control used.
struct Stepper {
    const SwitchingModel& model;
    const ControlLaw& law;
    double h;
    double sqrt_h;

    struct State {
        Point x;
        int k = 0;
    };

    /// Advances `s`; `cost` receives c at the left endpoint, `sigma_out` the diffusion matrix used.
    int advance(State& s, std::mt19937_64& gen, std::normal_distribution<double>& normal,
                std::uniform_real_distribution<double>& uniform, double& cost, SquareMatrix* sigma_out = nullptr) const {
        const int z = law(s.x, s.k);
        cost = model.cost(s.x, s.k, z);
        const Point b = model.drift(s.x, s.k, z);
        const SquareMatrix sigma = model.diffusion(s.x, s.k);
        if (sigma_out) *sigma_out = sigma;
        Point g(model.dim);
        for (int p = 0; p < model.dim; ++p) g[p] = normal(gen);
        const int n = model.num_regimes;
        int next = s.k;
        if (n > 1) {
            const RateMatrix m = model.rates(s.x, z);
            const double total = -m(s.k, s.k);
            if (h * total > 0.5 || !std::isfinite(total)) throw StepTooLarge(s.x, s.k, z, total, h);
            double u = uniform(gen);
            for (int j = 0; j < n; ++j) {
                if (j == s.k) continue;
                const double pj = h * m(s.k, j);
                if (u < pj) {
                    next = j;
                    break;
                }
                u -= pj;
            }
        }
        s.x += b * h + sqrt_h * (sigma * g);
        s.k = next;
        return z;
    }
};

inline Point start_point(const SwitchingModel& model, const PathConfig& cfg) {
    if (cfg.x0.size() == 0) return Point::Zero(model.dim);
    require(cfg.x0.size() == model.dim, "PathConfig: x0 has wrong dimension");
    return cfg.x0;
}

}  // namespace detail

struct TrajectoryPoint {
    double t = 0.0;
    Point x;
    int regime = 0;
};

struct PathSummary {
    Point x_end;
    int regime_end = 0;
    double mean_cost = 0.0;  ///< (1/n) sum of c over the n left endpoints
    int switches = 0;
    std::array<double, kMaxRegimes> occupation{};  ///< time spent per regime
};

struct TrajectoryBatch {
    std::vector<PathSummary> paths;
    /// First `record_paths` paths sampled every `record_every` steps (and at the end).
    std::vector<std::vector<TrajectoryPoint>> recorded;
    double horizon = 0.0;
    int steps = 0;
};

struct RecordOptions {
    int record_paths = 0;
    int record_every = 1;
};

/// Simulates cfg.paths independent paths up to the horizon.
inline TrajectoryBatch simulate_paths(const SwitchingModel& model, const ControlLaw& law, const PathConfig& cfg,
                                      int workers = 1, const RecordOptions& rec = {}) {
    model.check_structure();
    law.check(model);
    require(cfg.paths >= 1, "PathConfig: paths must be >= 1");
    require(cfg.regime0 >= 0 && cfg.regime0 < model.num_regimes, "PathConfig: regime0 out of range");
    require(rec.record_every >= 1, "record_every must be >= 1");
    const int n = detail::step_count(cfg.step, cfg.horizon);
    const Point x0 = detail::start_point(model, cfg);
    const detail::Stepper stepper{model, law, cfg.step, std::sqrt(cfg.step)};

    TrajectoryBatch out;
    out.steps = n;
    out.horizon = n * cfg.step;
    out.paths.resize(static_cast<std::size_t>(cfg.paths));
    const auto n_rec = static_cast<std::size_t>(std::clamp(rec.record_paths, 0, cfg.paths));
    out.recorded.resize(n_rec);

    parallel_for(static_cast<std::size_t>(cfg.paths), workers, [&](std::size_t i) {
        auto gen = detail::path_generator(cfg.seed, 0, i);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> uniform;
        detail::Stepper::State s{x0, cfg.regime0};
        PathSummary sum;
        double c0 = 0.0, shifted = 0.0;
        std::vector<TrajectoryPoint>* track = i < n_rec ? &out.recorded[i] : nullptr;
        for (int t = 0; t < n; ++t) {
            if (track && t % rec.record_every == 0) track->push_back({t * cfg.step, s.x, s.k});
            const int before = s.k;
            sum.occupation[static_cast<std::size_t>(before)] += cfg.step;
            double c = 0.0;
            stepper.advance(s, gen, normal, uniform, c);
            if (t == 0) c0 = c;
            shifted += c - c0;  // c0 + mean(c - c0) is exact for constant costs
            if (s.k != before) ++sum.switches;
        }
        if (track) track->push_back({n * cfg.step, s.x, s.k});
        sum.x_end = s.x;
        sum.regime_end = s.k;
        sum.mean_cost = c0 + shifted / n;
        out.paths[i] = sum;
    });
    return out;
}

namespace detail {

/// Hill estimator of the tail index from log-weights (largest sqrt(n) order statistics).
inline double hill_tail_index(std::vector<double> logw) {
    const std::size_t n = logw.size();
    const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
    if (n <= k) return std::numeric_limits<double>::infinity();
    std::sort(logw.begin(), logw.end(), std::greater<>());
    const double base = logw[k];
    double mean = 0.0;
    for (std::size_t i = 0; i < k; ++i) mean += logw[i] - base;
    mean /= static_cast<double>(k);
    return mean > 0.0 ? 1.0 / mean : std::numeric_limits<double>::infinity();
}

/// (1/T) log mean exp(T a_i) with max shift, pairwise sums and delta-method error.
inline CostEstimate log_mean_exp_rate(const std::vector<double>& a, double horizon) {
    CostEstimate est;
    est.paths = static_cast<int>(a.size());
    est.horizon = horizon;
    const double amax = *std::max_element(a.begin(), a.end());
    std::vector<double> logw(a.size()), w(a.size()), w2(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        logw[i] = horizon * (a[i] - amax);
        w[i] = std::exp(logw[i]);
        w2[i] = w[i] * w[i];
    }
    const double n = static_cast<double>(a.size());
    const double sw = pairwise_sum(w), sw2 = pairwise_sum(w2);
    const double mean = sw / n;
    est.value = amax + std::log(mean) / horizon;
    const double var = std::max(0.0, sw2 / n - mean * mean) * n / std::max(n - 1.0, 1.0);
    est.std_error = std::sqrt(var / n) / mean / horizon;
    est.ess = sw * sw / sw2;
    est.tail_index = hill_tail_index(logw);
    est.unreliable = est.ess < 10.0;
    est.heavy_tail = est.tail_index < 2.0;
    return est;
}

}  // namespace detail

/// (1/T) log of the path average of exp(int_0^T c ds), rectangle rule on the Euler grid.
inline CostEstimate estimate_risk_sensitive_rate(const SwitchingModel& model, const ControlLaw& law,
                                                 const PathConfig& cfg, double lambda_ref, int workers = 1) {
    require(cfg.horizon >= 1.0, "estimate_risk_sensitive_rate: horizon must be >= 1");
    const TrajectoryBatch batch = simulate_paths(model, law, cfg, workers);
    std::vector<double> a(batch.paths.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = batch.paths[i].mean_cost;
    CostEstimate est = detail::log_mean_exp_rate(a, batch.horizon);
    est.functional = Functional::RiskSensitiveRate;
    est.lambda_ref = lambda_ref;
    return est;
}

/// Multilinear interpolation of regime block `k` of a grid function on the
/// interior unknowns, with zero boundary values; zero outside the box.
inline double interpolate(const GridSpec& grid, const Vector& psi, int regime, const Point& x) {
    const double h = grid.spacing();
    const std::size_t M = grid.interior_count();
    const int n = grid.nodes_per_axis;
    std::array<int, kMaxDim> lo{};
    std::array<double, kMaxDim> frac{};
    for (int p = 0; p < grid.dim; ++p) {
        const double s = (x[p] + grid.radius) / h;
        if (!(s >= 0.0 && s <= n - 1)) return 0.0;
        int i = static_cast<int>(std::floor(s));
        if (i >= n - 1) i = n - 2;
        lo[p] = i;
        frac[p] = s - i;
    }
    double value = 0.0;
    for (int corner = 0; corner < (1 << grid.dim); ++corner) {
        double weight = 1.0;
        GridSpec::MultiIndex idx{};
        for (int p = 0; p < grid.dim; ++p) {
            const int bit = (corner >> p) & 1;
            idx[p] = lo[p] + bit;
            weight *= bit ? frac[p] : 1.0 - frac[p];
        }
        if (weight == 0.0) continue;
        if (auto m = grid.interior_index(idx))
            value += weight * psi[static_cast<std::ptrdiff_t>(static_cast<std::size_t>(regime) * M + *m)];
    }
    return value;
}

struct AnnulusStart {
    Point x;
    int regime = 0;
};

/// Per-path record of a stopped path; the functional at any lambda is
/// exp(cost_integral - lambda * tau) * psi_end (zero when the box was left first).
struct StoppedPath {
    double cost_integral = 0.0;
    double tau = 0.0;
    double psi_end = 0.0;
    bool hit = false;
    bool capped = false;
};

struct AnnulusPoint {
    AnnulusStart start;
    double psi = 0.0;  ///< psi(x, k) interpolated from the grid
    double estimate = 0.0;
    double std_error = 0.0;
    double z_score = 0.0;
    int hits = 0;
    int exits = 0;
    int capped = 0;
};

struct FeynmanKacReport {
    double lambda = 0.0;
    double r_inner = 0.0;
    double time_cap = 0.0;
    std::vector<AnnulusPoint> points;
    double max_abs_z = 0.0;
    bool passed = false;  ///< all |z| <= 3
    /// Raw per-start samples so the functional can be re-evaluated at other lambda.
    std::vector<std::vector<StoppedPath>> samples;
};

namespace detail {

/// Probability that a Brownian bridge with variance rate s2 over time h,
/// starting and ending at distances d0, d1 > 0 from a flat boundary, touches it.
inline double bridge_crossing(double d0, double d1, double s2, double h) {
    if (d0 <= 0.0 || d1 <= 0.0) return 1.0;
    if (!(s2 > 0.0)) return 0.0;
    return std::exp(-2.0 * d0 * d1 / (s2 * h));
}

inline void evaluate_annulus(FeynmanKacReport& rep, double lambda) {
    rep.lambda = lambda;
    rep.max_abs_z = 0.0;
    rep.passed = true;
    for (std::size_t s = 0; s < rep.points.size(); ++s) {
        auto& pt = rep.points[s];
        const auto& paths = rep.samples[s];
        std::vector<double> v(paths.size()), v2(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const auto& p = paths[i];
            v[i] = p.hit ? std::exp(p.cost_integral - lambda * p.tau) * p.psi_end : 0.0;
            v2[i] = v[i] * v[i];
        }
        const double n = static_cast<double>(paths.size());
        const double mean = pairwise_sum(v) / n;
        const double var = std::max(0.0, pairwise_sum(v2) / n - mean * mean) * n / std::max(n - 1.0, 1.0);
        pt.estimate = mean;
        pt.std_error = std::sqrt(var / n);
        pt.z_score = pt.std_error > 0.0 ? (mean - pt.psi) / pt.std_error
                                        : (mean == pt.psi ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean - pt.psi));
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(pt.z_score));
        if (!(std::abs(pt.z_score) <= 3.0)) rep.passed = false;
    }
}

}  // namespace detail

/// Monte Carlo check of psi_k(x) = E[exp(int_0^tau (c - lambda)) psi(X_tau, S_tau) 1{tau < exit}],
/// tau the first entrance into {|x| <= r_inner}. Crossings of the inner sphere and of the box
/// faces within a step are detected with Brownian-bridge probabilities; the hitting
/// point is projected onto the sphere. Paths still running at 1000 * cfg.horizon are
/// counted as capped and contribute zero.
inline FeynmanKacReport feynman_kac_annulus(const SwitchingModel& model, const ControlLaw& law, const EigenPair& eig,
                                            const GridSpec& grid, double r_inner,
                                            const std::vector<AnnulusStart>& starts, const PathConfig& cfg,
                                            int workers = 1) {
    model.check_structure();
    law.check(model);
    require(grid.dim == model.dim, "feynman_kac_annulus: grid and model dimensions differ");
    require(r_inner > 0.0 && r_inner < grid.radius, "feynman_kac_annulus: need 0 < r_inner < grid radius");
    require(!starts.empty(), "feynman_kac_annulus: no start points");
    require(cfg.paths >= 2, "feynman_kac_annulus: need at least 2 paths");
    require(static_cast<std::size_t>(eig.psi.size()) == grid.interior_count() * static_cast<std::size_t>(model.num_regimes),
            "feynman_kac_annulus: eigenvector does not match the grid");
    const double h = cfg.step;
    detail::step_count(h, cfg.horizon);
    const double cap = 1000.0 * cfg.horizon;
    const long max_steps = static_cast<long>(std::ceil(cap / h));
    const detail::Stepper stepper{model, law, h, std::sqrt(h)};
    const double R = grid.radius;

    FeynmanKacReport rep;
    rep.r_inner = r_inner;
    rep.time_cap = cap;
    rep.samples.resize(starts.size());
    for (const auto& s : starts) {
        require(s.x.size() == model.dim, "feynman_kac_annulus: start point has wrong dimension");
        require(s.regime >= 0 && s.regime < model.num_regimes, "feynman_kac_annulus: start regime out of range");
        require(s.x.norm() > r_inner && s.x.cwiseAbs().maxCoeff() < R, "feynman_kac_annulus: start point not in the annulus");
        AnnulusPoint pt;
        pt.start = s;
        pt.psi = interpolate(grid, eig.psi, s.regime, s.x);
        rep.points.push_back(pt);
    }

    for (std::size_t s = 0; s < starts.size(); ++s) {
        auto& out = rep.samples[s];
        out.resize(static_cast<std::size_t>(cfg.paths));
        parallel_for(out.size(), workers, [&](std::size_t i) {
            auto gen = detail::path_generator(cfg.seed, s + 1, i);
            std::normal_distribution<double> normal;
            std::uniform_real_distribution<double> uniform;
            std::uniform_real_distribution<double> coin;
            // A coin is drawn only when the crossing probability is not negligible.
            auto crosses = [&](double prob) { return prob > 1e-14 && coin(gen) < prob; };
            detail::Stepper::State st{starts[s].x, starts[s].regime};
            StoppedPath p;
            SquareMatrix sigma;
            for (long t = 0; t < max_steps; ++t) {
                const Point before = st.x;
                double c = 0.0;
                stepper.advance(st, gen, normal, uniform, c, &sigma);
                p.cost_integral += c * h;
                p.tau += h;
                const SquareMatrix a2 = sigma * sigma.transpose();  // 2a: variance rate of X

                // Leaving the box (Dirichlet side) is checked first.
                bool exited = st.x.cwiseAbs().maxCoeff() >= R;
                for (int q = 0; q < model.dim && !exited; ++q) {
                    for (int sign : {-1, 1}) {
                        const double d0 = R - sign * before[q], d1 = R - sign * st.x[q];
                        if (crosses(detail::bridge_crossing(d0, d1, a2(q, q), h))) exited = true;
                    }
                }
                if (exited) break;

                const double r1 = st.x.norm();
                bool hit = r1 <= r_inner;
                if (!hit) {
                    const double r0 = before.norm();
                    const Point normal_dir = before / r0;
                    const double s2 = normal_dir.dot(a2 * normal_dir);
                    hit = crosses(detail::bridge_crossing(r0 - r_inner, r1 - r_inner, s2, h));
                }
                if (hit) {
                    const Point proj = r1 > 0.0 ? Point(st.x * (r_inner / r1)) : Point(before * (r_inner / before.norm()));
                    p.hit = true;
                    p.psi_end = interpolate(grid, eig.psi, st.k, proj);
                    break;
                }
                if (t + 1 == max_steps) p.capped = true;
            }
            out[i] = p;
        });
        auto& pt = rep.points[s];
        for (const auto& p : out) {
            if (p.hit)
                ++pt.hits;
            else if (p.capped)
                ++pt.capped;
            else
                ++pt.exits;
        }
    }
    detail::evaluate_annulus(rep, eig.lambda);
    return rep;
}

/// Re-evaluates the stored samples of `rep` at another eigenvalue.
inline FeynmanKacReport reevaluate_annulus(FeynmanKacReport rep, double lambda) {
    detail::evaluate_annulus(rep, lambda);
    return rep;
}

struct MeanPositionReport {
    std::vector<double> horizons;
    std::vector<CostEstimate> estimates;  ///< E|X_T| / T per horizon
    double decay_exponent = 0.0;          ///< least-squares slope of log(E|X_T|/T) against log T
    bool decreasing = false;
    bool passed = false;                  ///< decreasing with decay exponent <= -1/4
};

/// E|X_T|/T along a ladder of horizons; sublinear growth shows as a decreasing
/// sequence with negative log-log slope.
inline MeanPositionReport mean_position_diagnostic(const SwitchingModel& model, const ControlLaw& law,
                                                   const PathConfig& cfg, const std::vector<double>& horizons,
                                                   int workers = 1) {
    require(horizons.size() >= 2, "mean_position_diagnostic: need at least two horizons");
    for (std::size_t i = 1; i < horizons.size(); ++i)
        require(horizons[i] > horizons[i - 1], "mean_position_diagnostic: horizons must increase");
    MeanPositionReport rep;
    rep.horizons = horizons;
    for (std::size_t j = 0; j < horizons.size(); ++j) {
        PathConfig c = cfg;
        c.horizon = horizons[j];
        c.seed = cfg.seed + j;
        const TrajectoryBatch batch = simulate_paths(model, law, c, workers);
        std::vector<double> v(batch.paths.size()), v2(batch.paths.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = batch.paths[i].x_end.norm() / batch.horizon;
            v2[i] = v[i] * v[i];
        }
        const double n = static_cast<double>(v.size());
        CostEstimate e;
        e.functional = Functional::MeanAbsPosition;
        e.paths = static_cast<int>(v.size());
        e.horizon = batch.horizon;
        e.value = pairwise_sum(v) / n;
        e.std_error = std::sqrt(std::max(0.0, pairwise_sum(v2) / n - e.value * e.value) / std::max(n - 1.0, 1.0));
        rep.estimates.push_back(e);
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double m = static_cast<double>(horizons.size());
    rep.decreasing = true;
    for (std::size_t j = 0; j < horizons.size(); ++j) {
        const double lx = std::log(horizons[j]);
        const double ly = std::log(std::max(rep.estimates[j].value, 1e-300));
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
        if (j > 0 && !(rep.estimates[j].value < rep.estimates[j - 1].value)) rep.decreasing = false;
    }
    rep.decay_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    rep.passed = rep.decreasing && rep.decay_exponent <= -0.25;
    return rep;
}

}  // namespace rsc
