#pragma once

// Built-in problem instances.
//
//   lq        1D, one regime: b = -xi x, sigma = s, c = q x^2.
//             With s = sqrt(2) and constant control xi the whole-space eigenvalue
//             is (xi - sqrt(xi^2 - 4q)) / 2.
//   ou2       1D, two regimes, mean reversion scaled by the control, constant
//             symmetric switching rate rho, cost q_k x^2 + eta (xi - 1)^2.
//   bounded2d 2D, two regimes, bounded drift -xi kappa_k x / sqrt(1 + |x|^2) plus
//             a bounded rotation, anisotropic diffusion in regime 1, x- and
//             control-dependent rates, bounded cost. Carries the
//             exp(theta sqrt(|x|^2 + 1)) geometric certificate.
//   nearmono  1D, two regimes, bounded inward drift -xi beta_k tanh(x), rates
//             with a positive floor, cost tail - depth_k exp(-x^2) + eta (xi - 1)^2.
//             Its optimal value sits below the tail level, so the cost is
//             near-monotone.

#include "rsc/core.hpp"
#include "rsc/lyapunov.hpp"
#include "rsc/model.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rsc {

using ParamMap = std::map<std::string, double>;

struct BuiltinInstance {
    SwitchingModel model;
    std::optional<LyapunovCertificate> certificate;
    ParamMap params;  ///< fully resolved parameters (defaults filled in)
    std::vector<double> controls;
};

namespace detail {

inline double param(ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end()) {
        p[key] = fallback;
        return fallback;
    }
    return it->second;
}

inline std::vector<Point> scalar_controls(const std::vector<double>& values) {
    std::vector<Point> out;
    for (double v : values) out.push_back(Point::Constant(1, v));
    return out;
}

inline void check_known(const ParamMap& given, const ParamMap& resolved, const std::string& name) {
    for (const auto& [key, value] : given)
        require(resolved.count(key) != 0, "unknown parameter '" + key + "' for builtin model " + name);
}

inline RateMatrix two_state(double m12, double m21) {
    RateMatrix m(2, 2);
    m << -m12, m12, m21, -m21;
    return m;
}

inline BuiltinInstance make_lq(ParamMap p, std::vector<double> controls) {
    BuiltinInstance inst;
    const double q = param(p, "q", 0.1875);
    const double s = param(p, "sigma", std::sqrt(2.0));
    if (controls.empty()) controls = {1.0};
    SwitchingModel& m = inst.model;
    m.name = "lq";
    m.dim = 1;
    m.num_regimes = 1;
    m.controls = scalar_controls(controls);
    m.drift = [controls](const Point& x, int, int z) -> Point { return -controls[static_cast<std::size_t>(z)] * x; };
    m.diffusion = [s](const Point&, int) -> SquareMatrix { return SquareMatrix::Constant(1, 1, s); };
    m.rates = [](const Point&, int) -> RateMatrix { return RateMatrix::Zero(1, 1); };
    m.cost = [q](const Point& x, int, int) { return q * x.squaredNorm(); };

    LyapunovCertificate cert;
    cert.lyap = [](const Point& x, int) { return std::exp(0.25 * x.squaredNorm()); };
    cert.ell = [](const Point& x, int) { return 0.25 * x.squaredNorm() - 1.0; };
    cert.beta = 2.0;
    cert.compact_radius = 2.0;
    cert.mode = CertificateMode::InfCompact;
    inst.certificate = cert;
    inst.params = p;
    inst.controls = controls;
    return inst;
}

inline BuiltinInstance make_ou2(ParamMap p, std::vector<double> controls) {
    BuiltinInstance inst;
    const double q1 = param(p, "q1", 0.1), q2 = param(p, "q2", 0.2);
    const double k1 = param(p, "kappa1", 1.0), k2 = param(p, "kappa2", 1.5);
    const double s1 = param(p, "sigma1", 1.2), s2 = param(p, "sigma2", 1.0);
    const double rho = param(p, "rho", 1.0);
    const double eta = param(p, "eta", 0.1);
    const double theta = param(p, "theta", 0.3);
    if (controls.empty()) controls = {1.0, 2.0};
    SwitchingModel& m = inst.model;
    m.name = "ou2";
    m.dim = 1;
    m.num_regimes = 2;
    m.controls = scalar_controls(controls);
    m.drift = [controls, k1, k2](const Point& x, int k, int z) -> Point {
        return -controls[static_cast<std::size_t>(z)] * (k == 0 ? k1 : k2) * x;
    };
    m.diffusion = [s1, s2](const Point&, int k) -> SquareMatrix {
        return SquareMatrix::Constant(1, 1, k == 0 ? s1 : s2);
    };
    m.rates = [rho](const Point&, int) { return two_state(rho, rho); };
    m.cost = [controls, q1, q2, eta](const Point& x, int k, int z) {
        const double u = controls[static_cast<std::size_t>(z)] - 1.0;
        return (k == 0 ? q1 : q2) * x.squaredNorm() + eta * u * u;
    };

    // V = exp(theta x^2): L V / V <= 2 a theta + (4 a theta^2 - 2 kappa xi theta) x^2.
    // ell keeps a slack of 1/2 below that bound.
    double xi_min = controls.front(), a_max = 0.5 * std::max(s1 * s1, s2 * s2);
    for (double c : controls) xi_min = std::min(xi_min, c);
    const double slope = 2.0 * std::min(k1, k2) * xi_min * theta - 4.0 * a_max * theta * theta;
    LyapunovCertificate cert;
    cert.lyap = [theta](const Point& x, int) { return std::exp(theta * x.squaredNorm()); };
    cert.ell = [slope, a_max, theta](const Point& x, int) { return slope * x.squaredNorm() - 2.0 * a_max * theta - 0.5; };
    cert.beta = 1.0;
    cert.compact_radius = 1.0;
    cert.mode = CertificateMode::InfCompact;
    inst.certificate = cert;
    inst.params = p;
    inst.controls = controls;
    return inst;
}

inline BuiltinInstance make_bounded2d(ParamMap p, std::vector<double> controls) {
    BuiltinInstance inst;
    const double k1 = param(p, "kappa1", 2.0), k2 = param(p, "kappa2", 1.6);
    const double w1 = param(p, "omega1", 0.5), w2 = param(p, "omega2", -0.3);
    const double c1 = param(p, "c1", 0.2), c2 = param(p, "c2", 0.3);
    const double eta = param(p, "eta", 0.05);
    const double theta = param(p, "theta", 0.5);
    const double gamma = param(p, "gamma", 0.45);
    const double beta = param(p, "beta", 20.0);
    const double rk = param(p, "compact_radius", 4.0);
    if (controls.empty()) controls = {1.0, 2.0};
    SwitchingModel& m = inst.model;
    m.name = "bounded2d";
    m.dim = 2;
    m.num_regimes = 2;
    m.controls = scalar_controls(controls);
    m.drift = [controls, k1, k2, w1, w2](const Point& x, int k, int z) -> Point {
        const double r = std::sqrt(1.0 + x.squaredNorm());
        const double pull = controls[static_cast<std::size_t>(z)] * (k == 0 ? k1 : k2);
        const double w = k == 0 ? w1 : w2;
        Point b(2);
        b << (-pull * x[0] - w * x[1]) / r, (-pull * x[1] + w * x[0]) / r;
        return b;
    };
    m.diffusion = [](const Point&, int k) -> SquareMatrix {
        SquareMatrix s(2, 2);
        if (k == 0)
            s << 1.0, 0.0, 0.3, 0.9;
        else
            s << 0.8, 0.0, 0.0, 0.8;
        return s;
    };
    m.rates = [controls](const Point& x, int z) {
        const double y2 = x[1] * x[1];
        return two_state(0.6 + 0.2 * std::sin(x[0]), 0.4 + 0.1 * controls[static_cast<std::size_t>(z)] * y2 / (1.0 + y2));
    };
    m.cost = [controls, c1, c2, eta](const Point& x, int k, int z) {
        const double r2 = x.squaredNorm();
        const double u = controls[static_cast<std::size_t>(z)] - 1.0;
        return (k == 0 ? c1 : c2) * r2 / (1.0 + r2) + eta * u * u;
    };

    LyapunovCertificate cert;
    cert.lyap = [theta](const Point& x, int) { return std::exp(theta * std::sqrt(x.squaredNorm() + 1.0)); };
    cert.ell = [gamma](const Point&, int) { return gamma; };
    cert.beta = beta;
    cert.compact_radius = rk;
    cert.mode = CertificateMode::Geometric;
    inst.certificate = cert;
    inst.params = p;
    inst.controls = controls;
    return inst;
}

inline BuiltinInstance make_nearmono(ParamMap p, std::vector<double> controls) {
    BuiltinInstance inst;
    const double b1 = param(p, "beta1", 0.6), b2 = param(p, "beta2", 0.5);
    const double s1 = param(p, "sigma1", 1.0), s2 = param(p, "sigma2", 0.8);
    const double m12 = param(p, "m12", 0.5), m21 = param(p, "m21", 0.7);
    const double tail = param(p, "tail", 1.0);
    const double d1 = param(p, "depth1", 0.8), d2 = param(p, "depth2", 0.6);
    const double eta = param(p, "eta", 0.05);
    if (controls.empty()) controls = {1.0, 2.0};
    SwitchingModel& m = inst.model;
    m.name = "nearmono";
    m.dim = 1;
    m.num_regimes = 2;
    m.controls = scalar_controls(controls);
    m.drift = [controls, b1, b2](const Point& x, int k, int z) -> Point {
        return Point::Constant(1, -controls[static_cast<std::size_t>(z)] * (k == 0 ? b1 : b2) * std::tanh(x[0]));
    };
    m.diffusion = [s1, s2](const Point&, int k) -> SquareMatrix {
        return SquareMatrix::Constant(1, 1, k == 0 ? s1 : s2);
    };
    m.rates = [m12, m21](const Point&, int) { return two_state(m12, m21); };
    m.cost = [controls, tail, d1, d2, eta](const Point& x, int k, int z) {
        const double u = controls[static_cast<std::size_t>(z)] - 1.0;
        return tail - (k == 0 ? d1 : d2) * std::exp(-x.squaredNorm()) + eta * u * u;
    };
    inst.params = p;
    inst.controls = controls;
    return inst;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"lq", "ou2", "bounded2d", "nearmono"};
    return names;
}

/// Builds a named instance; unknown parameter keys are rejected.
inline BuiltinInstance make_builtin(const std::string& name, const ParamMap& params = {},
                                    const std::vector<double>& controls = {}) {
    BuiltinInstance (*make)(ParamMap, std::vector<double>) = nullptr;
    if (name == "lq")
        make = detail::make_lq;
    else if (name == "ou2")
        make = detail::make_ou2;
    else if (name == "bounded2d")
        make = detail::make_bounded2d;
    else if (name == "nearmono")
        make = detail::make_nearmono;
    else
        throw InvalidArgument("unknown builtin model '" + name + "'");
    // The default instance lists every parameter the model reads.
    detail::check_known(params, make({}, controls).params, name);
    return make(params, controls);
}

/// Constant-control principal eigenvalue of lq with sigma = sqrt(2):
/// psi = exp(g x^2), 4 g^2 - 2 xi g + q = 0, lambda = 2 g (smaller root).
inline double lq_lambda(double q, double xi) { return 0.5 * (xi - std::sqrt(xi * xi - 4.0 * q)); }

}  // namespace rsc
