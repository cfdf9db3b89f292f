// rsc: command-line front end for the risk-sensitive switching solver.
//
//   rsc solve    --builtin lq --q 0.1875 --radius 8 --nodes-per-unit 100
//   rsc sweep    --builtin lq --radii 2,4,6,8,10
//   rsc simulate --config model.json --policy 1 --horizon 20 --paths 100000
//   rsc verify   --builtin ou2 --radius 3 --nodes-per-unit 200
//   rsc validate --builtin nearmono --box-radius 8
//
// Builtin parameters may be given as --param name=value or directly as
// --name value. Results land in --out (default "."). Exit codes: 0 pass,
// 1 check failed, 2 usage or config error, 3 numeric failure.

#include "commands.hpp"

#include <CLI11.hpp>

namespace {

using namespace rsc::cli;

/// Turns leftover "--name value" / "--name=value" tokens into builtin parameters.
void absorb_extras(const std::vector<std::string>& extras, CommonOptions& c) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw rsc::InvalidArgument("unexpected argument '" + tok + "'");
        std::string key = tok.substr(2), value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw rsc::InvalidArgument("option '" + tok + "' needs a value");
            value = extras[++i];
        }
        const auto v = parse_list(value, "--" + key);
        if (v.size() != 1) throw rsc::InvalidArgument("option '--" + key + "' takes one number");
        c.params[key] = v[0];
    }
}

void parse_params(const std::vector<std::string>& kv, CommonOptions& c) {
    for (const auto& s : kv) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw rsc::InvalidArgument("--param expects name=value, got '" + s + "'");
        const auto v = parse_list(s.substr(eq + 1), "--param " + s.substr(0, eq));
        if (v.size() != 1) throw rsc::InvalidArgument("--param " + s + ": one number expected");
        c.params[s.substr(0, eq)] = v[0];
    }
}

void emit_error(const std::string& out_dir, const std::string& command, const std::string& kind, const std::string& msg,
                int code) {
    json err = {{"error", {{"kind", kind}, {"message", msg}, {"command", command}, {"exit_code", code}}}};
    std::cerr << err.dump() << "\n";
    try {
        std::filesystem::create_directories(out_dir);
        write_text(std::filesystem::path(out_dir) / ((command.empty() ? "rsc" : command) + ".error.json"),
                   err.dump(2) + "\n");
    } catch (...) {
        // The message already went to stderr.
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Principal-eigenvalue solver and checks for risk-sensitive control of switching diffusions"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    CommonOptions common;
    GridOptions grid;
    SweepOptions sweep;
    SimulateOptions sim;
    VerifyOptions ver;
    std::vector<std::string> kv;
    std::string matrix_market;
    double box_radius = 8.0;
    int samples = 2000;

    auto add_common = [&](CLI::App* sub) {
        sub->allow_extras();
        auto* cfg = sub->add_option("--config", common.config_path, "Model config (JSON)");
        sub->add_option("--builtin", common.builtin, "Builtin model: lq, ou2, bounded2d, nearmono")->excludes(cfg);
        sub->add_option("--controls", common.controls, "Comma-separated control values for a builtin");
        sub->add_option("--param", kv, "Builtin parameter name=value (repeatable; --name value also works)");
        sub->add_option("--seed", common.seed, "Seed for all randomness")->capture_default_str();
        sub->add_option("--workers", common.workers, "Worker threads (default: RSC_WORKERS or hardware)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--out", common.out_dir, "Output directory")->capture_default_str();
    };
    auto add_grid = [&](CLI::App* sub, bool radius) {
        if (radius) sub->add_option("--radius", grid.radius, "Half-width of the box")->capture_default_str();
        sub->add_option("--nodes-per-unit", grid.nodes_per_unit, "Grid density")->capture_default_str();
        sub->add_option("--tol", grid.tol, "Eigenvalue tolerance")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--max-policy-iters", grid.max_policy_iters, "Policy-iteration cap")->capture_default_str();
    };

    auto* solve = app.add_subcommand("solve", "Solve the semilinear eigenproblem on one box");
    add_common(solve);
    add_grid(solve, true);
    solve->add_option("--matrix-market", matrix_market, "Also dump the optimal-policy matrix to this file");

    auto* sw = app.add_subcommand("sweep", "Solve on increasing boxes and extrapolate");
    add_common(sw);
    add_grid(sw, false);
    sw->add_option("--radii", sweep.radii, "Comma-separated increasing radii")->capture_default_str();

    auto* simc = app.add_subcommand("simulate", "Monte Carlo estimates under a fixed or optimal control");
    add_common(simc);
    add_grid(simc, true);
    simc->add_option("--step", sim.step, "Euler step")->capture_default_str();
    simc->add_option("--horizon", sim.horizon, "Horizon T")->capture_default_str();
    simc->add_option("--paths", sim.paths, "Number of paths")->capture_default_str();
    simc->add_option("--x0", sim.x0, "Start point, comma-separated (default origin)");
    simc->add_option("--regime0", sim.regime0, "Start regime, 1-based")->capture_default_str();
    simc->add_option("--policy", sim.policy, "'optimal' or a 1-based control index")->capture_default_str();
    simc->add_option("--functional", sim.functional, "rate | mean-position")->capture_default_str();
    simc->add_option("--horizons", sim.horizons, "Horizons for mean-position")->capture_default_str();
    simc->add_option("--dump-paths", sim.dump_paths, "Write this many trajectories to trajectories.csv");
    simc->add_option("--dump-every", sim.dump_every, "Record every n-th step")->capture_default_str();

    auto* vc = app.add_subcommand("verify", "Run the full verification pipeline");
    add_common(vc);
    add_grid(vc, true);
    vc->add_flag("--no-simulate", ver.no_simulate, "Skip the Monte Carlo checks");
    vc->add_flag("--near-monotone", ver.near_monotone, "Also run the near-monotone suite");
    vc->add_option("--near-monotone-radii", ver.radii, "Radii for the near-monotone sweep")->capture_default_str();
    vc->add_option("--epsilon", ver.epsilon, "Sub-level set slack")->capture_default_str();
    vc->add_option("--lambda-offset", ver.lambda_offset, "Perturb lambda in the Feynman-Kac check");
    vc->add_option("--policy-samples", ver.policy_samples, "Random policies for the optimality check")
        ->capture_default_str();
    vc->add_option("--r-inner", ver.r_inner, "Inner sphere radius (default radius/6)");
    vc->add_option("--starts", ver.starts, "Annulus starts 'x1[,x2]:k;...' with k 1-based");
    vc->add_option("--fk-paths", ver.fk_paths, "Paths per Feynman-Kac start")->capture_default_str();
    vc->add_option("--fk-step", ver.fk_step, "Feynman-Kac Euler step")->capture_default_str();
    vc->add_option("--fk-horizon", ver.fk_horizon, "Feynman-Kac time unit (cap is 1000x)")->capture_default_str();
    vc->add_option("--rate-paths", ver.rate_paths, "Paths for growth-rate estimates")->capture_default_str();
    vc->add_option("--rate-step", ver.rate_step, "Euler step for growth rates")->capture_default_str();
    vc->add_option("--rate-horizon", ver.rate_horizon, "Horizon for growth rates")->capture_default_str();
    vc->add_option("--rate-policy-samples", ver.rate_policy_samples, "Random policies simulated")
        ->capture_default_str();

    auto* val = app.add_subcommand("validate", "Check model hypotheses by sampling");
    add_common(val);
    val->add_option("--box-radius", box_radius, "Sampling box half-width")->capture_default_str();
    val->add_option("--samples", samples, "Sample points")->capture_default_str();

    std::string command;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        for (auto* s : app.get_subcommands()) command = s->get_name();
        emit_error(common.out_dir, command, "usage", e.what(), kUsage);
        return kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    command = sub->get_name();
    try {
        parse_params(kv, common);
        absorb_extras(sub->remaining(), common);
        if (command == "solve") return cmd_solve(common, grid, matrix_market);
        if (command == "sweep") return cmd_sweep(common, grid, sweep);
        if (command == "simulate") return cmd_simulate(common, grid, sim);
        if (command == "verify") return cmd_verify(common, grid, ver);
        return cmd_validate(common, box_radius, samples);
    } catch (const rsc::InvalidArgument& e) {
        emit_error(common.out_dir, command, "config", e.what(), kUsage);
        return kUsage;
    } catch (const rsc::NumericFailure& e) {
        emit_error(common.out_dir, command, "numeric", e.what(), kNumeric);
        return kNumeric;
    } catch (const rsc::Error& e) {
        emit_error(common.out_dir, command, "numeric", e.what(), kNumeric);
        return kNumeric;
    } catch (const std::filesystem::filesystem_error& e) {
        emit_error(common.out_dir, command, "io", e.what(), kUsage);
        return kUsage;
    }
}
