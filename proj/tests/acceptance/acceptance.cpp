// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Tolerances are the contract values; detail after the verdict shows the
// measured numbers so a failure can be read without rerunning.

#include "oracles.hpp"
#include "rsc/builtins.hpp"
#include "rsc/eigensolve.hpp"
#include "rsc/lyapunov.hpp"
#include "rsc/simulate.hpp"
#include "rsc/verify.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace rsc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int workers() { return default_workers(); }

// 1. LQ closed form and the radius sweep.
Verdict lq_closed_form() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto lq = make_builtin("lq", {{"q", 0.1875}}, {1.0});
    const auto sol = solve_semilinear(lq.model, grid_for_density(10.0, 100, 1));
    const auto sweep = domain_sweep(lq.model, {2, 4, 6, 8, 10}, 100, {}, workers());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double exact = oracle::lq_lambda(0.1875, 1.0);
    bool increasing = true;
    std::string table;
    for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
        table += fmt("%s%.6f", i ? " " : "", sweep.entries[i].lambda);
        if (i && !(sweep.entries[i].lambda > sweep.entries[i - 1].lambda)) increasing = false;
    }
    const bool toward = std::abs(sweep.entries.back().lambda - exact) <= 1e-2 &&
                        std::abs(sweep.entries.back().lambda - exact) < std::abs(sweep.entries.front().lambda - exact);
    const bool ok = std::abs(sol.eigen.lambda - exact) <= 1e-2 && increasing && toward && secs < 60.0;
    return {ok, fmt("lambda(R=10)=%.7f vs %.6f; sweep [%s]; %.1fs", sol.eigen.lambda, exact, table.c_str(), secs)};
}

// 2. Optimal control selection between xi = 1 and xi = 2.
Verdict control_selection() {
    const auto lq = make_builtin("lq", {{"q", 0.1875}}, {1.0, 2.0});
    const auto sol = solve_semilinear(lq.model, grid_for_density(20.0, 100, 1));
    const double exact = oracle::lq_lambda(0.1875, 2.0);
    const double frac = sol.policy.histogram(2)[1];
    const bool ok = std::abs(sol.eigen.lambda - exact) <= 1e-2 && frac >= 0.99;
    return {ok, fmt("lambda*=%.7f vs %.6f; control 2 at %.2f%% of nodes (R=20, 100 npu)", sol.eigen.lambda, exact,
                    100.0 * frac)};
}

// 3. Agreement with the dense full spectrum on small random instances.
Verdict dense_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(2024);
    int count = 0, bad = 0;
    double worst_l = 0.0, worst_psi = 0.0;
    std::size_t largest = 0;
    for (int rep = 0; rep < 4; ++rep)
        for (int d = 1; d <= 2; ++d)
            for (int N = 1; N <= 3; ++N) {
                const auto m = oracle::random_model({d, N, 2}, gen);
                const int nodes = d == 1 ? 61 : (N == 1 ? 15 : N == 2 ? 11 : 9);
                const auto g = build_grid(d == 1 ? 3.0 : 2.0, nodes, d);
                const auto pol = random_policies(g, N, 2, 1, gen())[0];
                const auto op = assemble(m, g, pol);
                largest = std::max(largest, op.size());
                const auto e = principal_eigenpair(op);
                const auto ref = oracle::dense_rightmost(op.matrix);
                const double dl = std::abs(e.lambda - ref.lambda);
                const double dp = oracle::shape_distance(e.psi, ref.psi);
                worst_l = std::max(worst_l, dl);
                worst_psi = std::max(worst_psi, dp);
                if (dl > 1e-8 || dp > 1e-8) ++bad;
                ++count;
            }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {bad == 0 && count >= 20 && largest <= 200 && secs < 30.0,
            fmt("%d instances (<= %zu unknowns), max |dlambda|=%.2e, max psi diff=%.2e; %.1fs", count, largest,
                worst_l, worst_psi, secs)};
}

// Two identical copies of a one-regime model joined by symmetric switching.
SwitchingModel doubled(const SwitchingModel& base, double rate) {
    SwitchingModel m = base;
    m.num_regimes = 2;
    m.drift = [base](const Point& x, int, int z) { return base.drift(x, 0, z); };
    m.diffusion = [base](const Point& x, int) { return base.diffusion(x, 0); };
    m.cost = [base](const Point& x, int, int z) { return base.cost(x, 0, z); };
    m.rates = [rate](const Point&, int) -> RateMatrix {
        RateMatrix r(2, 2);
        r << -rate, rate, rate, -rate;
        return r;
    };
    return m;
}

// 4. Structural properties on random instances.
Verdict properties() {
    std::mt19937_64 gen(77);
    const int n = 10;
    int shift = 0, potential = 0, domain = 0, symmetry = 0, trace = 0, unique = 0;
    double worst_shift = 0.0, worst_sym = 0.0, min_margin = 1e300, min_gap = 1e300;
    for (int i = 0; i < n; ++i) {
        const int d = 1 + i % 2, N = 1 + i % 3;
        const auto m = oracle::random_model({d, N, 2}, gen);
        const auto g = d == 1 ? grid_for_density(3.0, 10, 1) : grid_for_density(2.0, 4, 2);
        const auto sol = solve_semilinear(m, g);

        const double kappa = 0.25 + 0.5 * std::uniform_real_distribution<double>(0, 1)(gen);
        const double ds = std::abs(solve_semilinear(with_cost_shift(m, kappa), g).eigen.lambda - sol.eigen.lambda - kappa);
        worst_shift = std::max(worst_shift, ds);
        shift += ds <= 1e-10;

        const auto pm = potential_monotonicity_check(m, g, Point::Zero(d), 0.5, 1.0);
        min_margin = std::min(min_margin, pm.margin);
        potential += pm.margin > 0.0;

        const auto small = d == 1 ? grid_for_density(2.0, 10, 1) : grid_for_density(1.5, 4, 2);
        const double gap = sol.eigen.lambda - solve_semilinear(m, small).eigen.lambda;
        min_gap = std::min(min_gap, gap);
        domain += gap > 0.0;

        const auto two = doubled(oracle::random_model({d, 1, 2}, gen), 0.8);
        const auto s2 = solve_semilinear(two, g);
        const auto M = static_cast<std::ptrdiff_t>(g.interior_count());
        const double sym = (s2.eigen.psi.head(M) - s2.eigen.psi.tail(M)).cwiseAbs().maxCoeff() / s2.eigen.psi.maxCoeff();
        worst_sym = std::max(worst_sym, sym);
        symmetry += sym <= 1e-10;

        bool mono = true;
        for (std::size_t k = 1; k < sol.lambda_trace.size(); ++k)
            if (sol.lambda_trace[k] > sol.lambda_trace[k - 1]) mono = false;
        trace += mono;

        unique += uniqueness_check(m, g, 3, gen()).passed;
    }
    const bool ok = shift == n && potential == n && domain == n && symmetry == n && trace == n && unique == n;
    return {ok, fmt("of %d: shift %d (max err %.1e), potential %d (min margin %.3g), domain %d (min gap %.3g), "
                    "symmetry %d (max %.1e), PI trace %d, uniqueness %d",
                    n, shift, worst_shift, potential, min_margin, domain, min_gap, symmetry, worst_sym, trace, unique)};
}

// 5. Feynman-Kac representation on the annulus.
Verdict feynman_kac() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ou = make_builtin("ou2");
    const auto g = grid_for_density(3.0, 1000, 1);
    const auto sol = solve_semilinear(ou.model, g);
    PathConfig cfg;
    cfg.step = 1e-3;
    cfg.paths = 100000;
    cfg.seed = 11;
    const std::vector<AnnulusStart> starts{{Point::Constant(1, 0.8), 0},
                                           {Point::Constant(1, 1.0), 1},
                                           {Point::Constant(1, -1.2), 0},
                                           {Point::Constant(1, 1.5), 1},
                                           {Point::Constant(1, -0.9), 1}};
    const auto rep = feynman_kac_annulus(ou.model, ControlLaw::from_policy(g, sol.policy), sol.eigen, g, 0.5, starts,
                                         cfg, workers());
    const auto off = reevaluate_annulus(rep, sol.eigen.lambda + 0.05);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string zs;
    for (const auto& p : rep.points) zs += fmt("%s%+.2f", zs.empty() ? "" : " ", p.z_score);
    return {rep.passed && !off.passed && secs < 300.0,
            fmt("z = [%s]; lambda+0.05 gives max|z|=%.1f; %.0fs", zs.c_str(), off.max_abs_z, secs)};
}

// 6. No policy beats the semilinear eigenvalue.
Verdict lower_bound() {
    struct Case {
        std::string name;
        BuiltinInstance inst;
        GridSpec grid;
    };
    std::vector<Case> cases{{"lq", make_builtin("lq", {}, {1.0, 2.0}), grid_for_density(8.0, 20, 1)},
                            {"ou2", make_builtin("ou2"), grid_for_density(3.0, 50, 1)},
                            {"bounded2d", make_builtin("bounded2d"), grid_for_density(4.0, 5, 2)},
                            {"nearmono", make_builtin("nearmono"), grid_for_density(6.0, 20, 1)}};
    bool ok = true;
    std::string detail;
    std::uint64_t seed = 600;
    for (const auto& c : cases) {
        const auto& m = c.inst.model;
        const auto sol = solve_semilinear(m, c.grid);
        const auto rep = verify_optimality(m, c.grid, sol,
                                           random_policies(c.grid, m.num_regimes, m.num_controls(), 20, ++seed), 1e-10,
                                           {}, workers());
        double worst = 1e300;
        bool all = true;
        for (const auto& a : rep.alternatives) {
            worst = std::min(worst, a.excess);
            all = all && a.lambda >= sol.eigen.lambda - 1e-10;
        }
        ok = ok && all && rep.alternatives.size() == 20;
        detail += fmt("%s%s min excess %.3g", detail.empty() ? "" : "; ", c.name.c_str(), worst);
    }
    return {ok, detail};
}

// 7. Lyapunov certificates.
Verdict certificates() {
    const auto b = make_builtin("bounded2d");
    const auto g = grid_for_density(8.0, 10, 2);
    const auto good = check_lyapunov(b.model, *b.certificate, g);
    LyapunovCertificate flat;
    flat.lyap = [](const Point&, int) { return 1.0; };
    flat.ell = [](const Point&, int) { return 1.0; };
    flat.beta = 0.0;
    flat.compact_radius = 1.0;
    flat.mode = CertificateMode::Geometric;
    const auto bad = check_lyapunov(b.model, flat, g);
    return {good.status == CertificateStatus::Pass && b.certificate->mode == CertificateMode::Geometric &&
                bad.status == CertificateStatus::Fail,
            fmt("exp(theta sqrt(|x|^2+1)) certificate: %s (margin %.3f); constant V: %s", to_string(good.status),
                good.tightest_margin, to_string(bad.status))};
}

// 8. Risk-sensitive Monte Carlo rate.
Verdict mc_rate() {
    auto constant = make_builtin("ou2").model;
    const double kappa = 0.3;
    constant.cost = [kappa](const Point&, int, int) { return kappa; };
    PathConfig c;
    c.paths = 2000;
    c.horizon = 5.0;
    const auto e0 = estimate_risk_sensitive_rate(constant, ControlLaw::constant(0), c, kappa, workers());

    const auto lq = make_builtin("lq");
    PathConfig cfg;
    cfg.step = 0.01;
    cfg.horizon = 20.0;
    cfg.paths = 100000;
    cfg.seed = 8;
    const auto e = estimate_risk_sensitive_rate(lq.model, ControlLaw::constant(0), cfg, 0.25, workers());
    const bool brackets = std::abs(e.value - 0.25) <= 3.0 * e.std_error;
    const bool flagged = e.heavy_tail || e.unreliable;
    const bool ok = e0.value == kappa && e0.std_error == 0.0 && (brackets || flagged);
    return {ok, fmt("constant cost: %.17g (se %g); lq: %.4f +- %.4f, ESS %.0f, tail index %.2f, %s", e0.value,
                    e0.std_error, e.value, e.std_error, e.ess, e.tail_index,
                    brackets ? (flagged ? "brackets 0.25, heavy-tail flagged" : "brackets 0.25")
                             : "excludes 0.25 but flagged heavy-tail")};
}

// 9. Near-monotone suite.
Verdict near_monotone() {
    const auto nm = make_builtin("nearmono");
    const auto rep = near_monotone_suite(nm.model, {2, 3, 4, 5, 6, 7, 8}, 20, {}, 0.01, 2000, 9, workers());
    const auto lq = near_monotone_suite(make_builtin("lq").model, {2, 4}, 20);
    const bool ok = rep.ran && rep.sweep_converged && rep.sublevel_compact && rep.growth.violations == 0 && rep.passed &&
                    !lq.ran && !lq.gate.b1.passed;
    return {ok, fmt("lambda*=%.5f, sub-level radius %.2f of %.0f, kappa_hat=%.3f, %d violations; lq gate %s", rep.lambda_star,
                    rep.sublevel_radius, rep.sweep.entries.back().radius, rep.growth.kappa_hat, rep.growth.violations,
                    lq.ran ? "ran" : "refused (B1)")};
}

// 10. Byte-identical CLI output across worker counts.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(RSC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict reproducibility() {
    const fs::path root = fs::temp_directory_path() / ("rsc_acceptance_" + std::to_string(::getpid()));
    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve", "solve --builtin ou2 --radius 3 --nodes-per-unit 50"},
        {"sweep", "sweep --builtin lq --radii 2,4,6 --nodes-per-unit 20"},
        {"simulate", "simulate --builtin ou2 --policy optimal --radius 3 --nodes-per-unit 20 --paths 2000 --horizon 2 "
                     "--dump-paths 3"},
        {"validate", "validate --builtin bounded2d --samples 500"},
        {"verify", "verify --builtin ou2 --radius 3 --nodes-per-unit 50 --fk-paths 2000 --fk-step 2e-3 "
                   "--rate-paths 1000 --rate-horizon 2"}};
    int files = 0;
    std::string mismatch;
    for (const auto& [name, args] : commands) {
        std::vector<fs::path> dirs;
        for (int w : {1, 2, 8}) {
            const fs::path dir = root / (name + "_w" + std::to_string(w));
            fs::remove_all(dir);
            const int code = run_cli(args + " --seed 42 --workers " + std::to_string(w) + " --out " + dir.string());
            if (code != 0 && code != 1) return {false, fmt("%s exited with %d", name.c_str(), code)};
            dirs.push_back(dir);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto file = entry.path().filename().string();
            if (file.find(".meta.") != std::string::npos) continue;
            ++files;
            const std::string ref = slurp(entry.path());
            for (std::size_t i = 1; i < dirs.size(); ++i)
                if (slurp(dirs[i] / file) != ref) mismatch += " " + name + "/" + file;
        }
    }
    fs::remove_all(root);
    return {mismatch.empty() && files >= 5,
            mismatch.empty() ? fmt("%d output files identical across 1, 2 and 8 workers", files)
                             : "differs:" + mismatch};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"LQ closed form and monotone sweep", lq_closed_form},
        {"optimal control selection", control_selection},
        {"dense-oracle equivalence", dense_oracle},
        {"structural properties", properties},
        {"Feynman-Kac cross-check", feynman_kac},
        {"lower bound over random policies", lower_bound},
        {"Lyapunov certificate checker", certificates},
        {"risk-sensitive Monte Carlo rate", mc_rate},
        {"near-monotone suite", near_monotone},
        {"reproducibility across workers", reproducibility}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << "criterion " << i + 1 << " [" << (v.pass ? "PASS" : "FAIL") << "] " << criteria[i].first << ": "
                  << v.detail << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
    return failed ? 1 : 0;
}
