#pragma once

// JSON model configs.
//
//   {
//     "dim": 1,
//     "regimes": 2,
//     "controls": [1, 2],                      numbers, or equal-length arrays for vector controls
//     "builtin": {"name": "ou2", "params": {"rho": 0.5}}
//   }
//
// or, instead of "builtin",
//
//     "expressions": {
//       "drift":     ["-xi * x1"],             d entries
//       "diffusion": [["1.2 - 0.2 * (k - 1)"]], d x d, sigma (not a)
//       "rates":     [["auto", "1"], ["1", "auto"]],
//       "cost":      "0.1 * k * x1^2"
//     }
//
// In rate entries k is the row regime. Rate diagonals may be "auto" (minus the
// off-diagonal row sum). An optional
// "lyapunov" block {"V", "ell", "beta", "compact_radius", "mode"} supplies a
// certificate; "mode" is "InfCompact" or "Geometric". Expressions follow the
// grammar in expression.hpp; V and ell may use x and k but not xi.

#include "rsc/builtins.hpp"
#include "rsc/core.hpp"
#include "rsc/expression.hpp"
#include "rsc/lyapunov.hpp"
#include "rsc/model.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace rsc {

struct ModelConfig {
    BuiltinInstance instance;
    nlohmann::json resolved;  ///< the config with defaults filled in
};

namespace detail {

inline std::vector<Point> parse_controls(const nlohmann::json& j, int& control_dim) {
    require(j.is_array() && !j.empty(), "config: 'controls' must be a nonempty array");
    std::vector<Point> out;
    control_dim = j[0].is_array() ? static_cast<int>(j[0].size()) : 1;
    require(control_dim >= 1 && control_dim <= kMaxDim, "config: control vectors must have 1.." +
                                                            std::to_string(kMaxDim) + " entries");
    for (const auto& c : j) {
        Point p(control_dim);
        if (c.is_number()) {
            require(control_dim == 1, "config: mixed scalar and vector controls");
            p[0] = c.get<double>();
        } else {
            require(c.is_array() && static_cast<int>(c.size()) == control_dim,
                    "config: all control vectors must have the same length");
            for (int i = 0; i < control_dim; ++i) p[i] = c[static_cast<std::size_t>(i)].get<double>();
        }
        out.push_back(p);
    }
    return out;
}

inline Expression expr_field(const nlohmann::json& j, const std::string& where, int dim, int control_dim) {
    require(j.is_string() || j.is_number(), "config: " + where + " must be an expression string or number");
    const std::string src = j.is_string() ? j.get<std::string>() : nlohmann::json(j).dump();
    return Expression::parse(src, dim, control_dim);
}

inline SwitchingModel model_from_expressions(const nlohmann::json& e, int dim, int regimes,
                                             const std::vector<Point>& controls, int control_dim) {
    require(e.is_object(), "config: 'expressions' must be an object");
    for (const char* key : {"drift", "diffusion", "rates", "cost"})
        require(e.contains(key), std::string("config: expressions.") + key + " is missing");

    const auto& jd = e["drift"];
    require(jd.is_array() && static_cast<int>(jd.size()) == dim, "config: expressions.drift needs dim entries");
    std::vector<Expression> drift;
    for (int p = 0; p < dim; ++p)
        drift.push_back(expr_field(jd[static_cast<std::size_t>(p)], "drift[" + std::to_string(p) + "]", dim, control_dim));

    const auto& js = e["diffusion"];
    require(js.is_array() && static_cast<int>(js.size()) == dim, "config: expressions.diffusion must be d x d");
    std::vector<Expression> sigma;
    for (int p = 0; p < dim; ++p) {
        const auto& row = js[static_cast<std::size_t>(p)];
        require(row.is_array() && static_cast<int>(row.size()) == dim, "config: expressions.diffusion must be d x d");
        for (int q = 0; q < dim; ++q) {
            Expression ex = expr_field(row[static_cast<std::size_t>(q)], "diffusion", dim, control_dim);
            require(!ex.uses_control(), "config: diffusion may not depend on the control");
            sigma.push_back(std::move(ex));
        }
    }

    const auto& jr = e["rates"];
    require(jr.is_array() && static_cast<int>(jr.size()) == regimes, "config: expressions.rates must be N x N");
    std::vector<Expression> rates;
    std::vector<char> automatic;
    for (int i = 0; i < regimes; ++i) {
        const auto& row = jr[static_cast<std::size_t>(i)];
        require(row.is_array() && static_cast<int>(row.size()) == regimes, "config: expressions.rates must be N x N");
        for (int j = 0; j < regimes; ++j) {
            const auto& cell = row[static_cast<std::size_t>(j)];
            const bool is_auto = cell.is_string() && cell.get<std::string>() == "auto";
            require(!is_auto || i == j, "config: 'auto' is only allowed on the rate diagonal");
            automatic.push_back(is_auto ? 1 : 0);
            rates.push_back(is_auto ? Expression::parse("0", dim, control_dim)
                                    : expr_field(cell, "rates", dim, control_dim));
        }
    }
    const Expression cost = expr_field(e["cost"], "cost", dim, control_dim);

    SwitchingModel m;
    m.name = "expressions";
    m.dim = dim;
    m.num_regimes = regimes;
    m.controls = controls;
    m.drift = [drift, controls](const Point& x, int k, int z) -> Point {
        Point b(static_cast<int>(drift.size()));
        for (std::size_t p = 0; p < drift.size(); ++p)
            b[static_cast<std::ptrdiff_t>(p)] = drift[p](x, k, controls[static_cast<std::size_t>(z)]);
        return b;
    };
    m.diffusion = [sigma, dim](const Point& x, int k) -> SquareMatrix {
        SquareMatrix s(dim, dim);
        const Point none = Point::Zero(1);
        for (int p = 0; p < dim; ++p)
            for (int q = 0; q < dim; ++q) s(p, q) = sigma[static_cast<std::size_t>(p * dim + q)](x, k, none);
        return s;
    };
    m.rates = [rates, automatic, regimes, controls](const Point& x, int z) -> RateMatrix {
        RateMatrix r(regimes, regimes);
        const Point& c = controls[static_cast<std::size_t>(z)];
        for (int i = 0; i < regimes; ++i) {
            double off = 0.0;
            for (int j = 0; j < regimes; ++j) {
                const auto idx = static_cast<std::size_t>(i * regimes + j);
                r(i, j) = rates[idx](x, i, c);
                if (j != i) off += r(i, j);
            }
            if (automatic[static_cast<std::size_t>(i * regimes + i)]) r(i, i) = -off;
        }
        return r;
    };
    m.cost = [cost, controls](const Point& x, int k, int z) { return cost(x, k, controls[static_cast<std::size_t>(z)]); };
    return m;
}

inline LyapunovCertificate certificate_from_json(const nlohmann::json& j, int dim) {
    require(j.is_object(), "config: 'lyapunov' must be an object");
    for (const char* key : {"V", "ell", "beta", "compact_radius"})
        require(j.contains(key), std::string("config: lyapunov.") + key + " is missing");
    const Expression v = expr_field(j["V"], "lyapunov.V", dim, 1);
    const Expression ell = expr_field(j["ell"], "lyapunov.ell", dim, 1);
    require(!v.uses_control() && !ell.uses_control(), "config: lyapunov V and ell may not depend on xi");
    LyapunovCertificate cert;
    const Point none = Point::Zero(1);
    cert.lyap = [v, none](const Point& x, int k) { return v(x, k, none); };
    cert.ell = [ell, none](const Point& x, int k) { return ell(x, k, none); };
    cert.beta = j["beta"].get<double>();
    cert.compact_radius = j["compact_radius"].get<double>();
    const std::string mode = j.value("mode", std::string("InfCompact"));
    require(mode == "InfCompact" || mode == "Geometric", "config: lyapunov.mode must be InfCompact or Geometric");
    cert.mode = mode == "Geometric" ? CertificateMode::Geometric : CertificateMode::InfCompact;
    return cert;
}

inline ModelConfig model_from_json_unchecked(const nlohmann::json& j) {
    require(j.is_object(), "config: top level must be an object");
    require(j.contains("builtin") != j.contains("expressions"),
            "config: exactly one of 'builtin' and 'expressions' is required");
    ModelConfig out;
    out.resolved = j;

    if (j.contains("builtin")) {
        const auto& b = j["builtin"];
        require(b.is_object() && b.contains("name"), "config: builtin needs a name");
        ParamMap params;
        if (b.contains("params")) {
            require(b["params"].is_object(), "config: builtin.params must be an object");
            for (const auto& [key, value] : b["params"].items()) {
                require(value.is_number(), "config: builtin parameter '" + key + "' must be a number");
                params[key] = value.get<double>();
            }
        }
        std::vector<double> controls;
        if (j.contains("controls")) {
            int control_dim = 1;
            for (const Point& p : detail::parse_controls(j["controls"], control_dim)) controls.push_back(p[0]);
            require(control_dim == 1, "config: builtin models take scalar controls");
        }
        out.instance = make_builtin(b["name"].get<std::string>(), params, controls);
        const SwitchingModel& m = out.instance.model;
        if (j.contains("dim")) require(j["dim"].get<int>() == m.dim, "config: dim does not match the builtin model");
        if (j.contains("regimes"))
            require(j["regimes"].get<int>() == m.num_regimes, "config: regimes does not match the builtin model");
        out.resolved["dim"] = m.dim;
        out.resolved["regimes"] = m.num_regimes;
        out.resolved["controls"] = out.instance.controls;
        out.resolved["builtin"]["params"] = out.instance.params;
    } else {
        for (const char* key : {"dim", "regimes", "controls"})
            require(j.contains(key), std::string("config: '") + key + "' is required with expressions");
        const int dim = j["dim"].get<int>();
        const int regimes = j["regimes"].get<int>();
        require(dim >= 1 && dim <= kMaxDim, "config: dim must be in [1, " + std::to_string(kMaxDim) + "]");
        require(regimes >= 1 && regimes <= kMaxRegimes,
                "config: regimes must be in [1, " + std::to_string(kMaxRegimes) + "]");
        int control_dim = 1;
        const auto controls = detail::parse_controls(j["controls"], control_dim);
        out.instance.model = detail::model_from_expressions(j["expressions"], dim, regimes, controls, control_dim);
        if (control_dim == 1)
            for (const Point& p : controls) out.instance.controls.push_back(p[0]);
    }
    if (j.contains("lyapunov"))
        out.instance.certificate = detail::certificate_from_json(j["lyapunov"], out.instance.model.dim);
    if (j.contains("name")) out.instance.model.name = j["name"].get<std::string>();
    return out;
}

}  // namespace detail

/// Builds a model from a parsed config; type errors surface as InvalidArgument.
inline ModelConfig model_from_json(const nlohmann::json& j) {
    try {
        return detail::model_from_json_unchecked(j);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
}

inline ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open model config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("model config '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace rsc
