#pragma once

// Grid check of Lyapunov certificates
//
//   (L V)_k(x, xi) <= beta 1{|x| <= r_K} - ell_k(x) V_k(x)     (inf-compact mode)
//   (L V)_k(x, xi) <= beta 1{|x| <= r_K} - gamma V_k(x)        (geometric mode)
//
// where L is the controlled generator without the cost term. Derivatives of V
// are taken by central differences at the grid spacing h and at h/2; their
// difference serves as the discretization error estimate.

#include "rsc/core.hpp"
#include "rsc/grid.hpp"
#include "rsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace rsc {

enum class CertificateMode { InfCompact, Geometric };

struct LyapunovCertificate {
    std::function<double(const Point& x, int regime)> lyap;
    /// ell_k(x) in inf-compact mode; the constant gamma in geometric mode.
    std::function<double(const Point& x, int regime)> ell;
    double beta = 0.0;
    double compact_radius = 0.0;
    CertificateMode mode = CertificateMode::InfCompact;
};

enum class CertificateStatus { Pass, Fail, Inconclusive };

inline const char* to_string(CertificateStatus s) {
    switch (s) {
        case CertificateStatus::Pass: return "pass";
        case CertificateStatus::Fail: return "fail";
        case CertificateStatus::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct CertificateReport {
    CertificateStatus status = CertificateStatus::Inconclusive;
    /// Drift inequality alone, before the cost condition is folded in.
    CertificateStatus drift_status = CertificateStatus::Inconclusive;
    double tightest_margin = std::numeric_limits<double>::infinity();  ///< (rhs - L V) / V at the tightest node
    double error_estimate = 0.0;                                       ///< same scale, at that node
    Point location;
    int regime = -1;
    int control = -1;
    bool cost_condition = false;  ///< ell - sup c inf-compact, or sup c < gamma
    bool lyap_at_least_one = false;
    std::string detail;
};

namespace detail {

/// (L V)_k(x, xi) with central differences of step h.
inline double generator_of(const SwitchingModel& model, const LyapunovCertificate& cert, const Point& x, int k,
                           int xi, double h) {
    const int d = model.dim;
    const SquareMatrix a = model.diffusion_coefficient(x, k);
    const Point b = model.drift(x, k, xi);
    const double v0 = cert.lyap(x, k);
    double value = 0.0;
    for (int p = 0; p < d; ++p) {
        Point xp = x, xm = x;
        xp[p] += h;
        xm[p] -= h;
        const double vp = cert.lyap(xp, k), vm = cert.lyap(xm, k);
        value += a(p, p) * (vp - 2.0 * v0 + vm) / (h * h);
        value += b[p] * (vp - vm) / (2.0 * h);
        for (int q = p + 1; q < d; ++q) {
            Point xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[p] += h, xpp[q] += h;
            xpm[p] += h, xpm[q] -= h;
            xmp[p] -= h, xmp[q] += h;
            xmm[p] -= h, xmm[q] -= h;
            const double mixed =
                (cert.lyap(xpp, k) - cert.lyap(xpm, k) - cert.lyap(xmp, k) + cert.lyap(xmm, k)) / (4.0 * h * h);
            value += (a(p, q) + a(q, p)) * mixed;
        }
    }
    const RateMatrix m = model.rates(x, xi);
    for (int j = 0; j < model.num_regimes; ++j) value += m(k, j) * cert.lyap(x, j);
    return value;
}

/// Grid proxy for inf-compactness: the function on the outer shell
/// (|x|_inf >= 0.9 R) strictly exceeds its values on the core (|x|_inf <= R/2).
template <typename F>
bool inf_compact_on_grid(const GridSpec& grid, F&& f) {
    double shell_min = std::numeric_limits<double>::infinity();
    double core_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const Point x = grid.node(i);
        const double r = x.cwiseAbs().maxCoeff();
        const double v = f(x);
        if (r >= 0.9 * grid.radius - 1e-12) shell_min = std::min(shell_min, v);
        if (r <= 0.5 * grid.radius + 1e-12) core_max = std::max(core_max, v);
    }
    return shell_min > core_max;
}

}  // namespace detail

inline CertificateReport check_lyapunov(const SwitchingModel& model, const LyapunovCertificate& cert,
                                        const GridSpec& grid) {
    model.check_structure();
    require(cert.lyap && cert.ell, "check_lyapunov: certificate functions must be set");
    require(grid.dim == model.dim, "check_lyapunov: grid and model dimensions differ");
    const double h = grid.spacing();

    CertificateReport rep;
    rep.lyap_at_least_one = true;
    bool certain_fail = false, uncertain = false;
    for (std::size_t m = 0; m < grid.interior_count(); ++m) {
        const Point x = grid.interior_node(m);
        const double indicator = x.norm() <= cert.compact_radius ? cert.beta : 0.0;
        for (int k = 0; k < model.num_regimes; ++k) {
            const double v = cert.lyap(x, k);
            if (!(v >= 1.0 - 1e-12)) rep.lyap_at_least_one = false;
            const double rhs = indicator - cert.ell(x, k) * v;
            for (int z = 0; z < model.num_controls(); ++z) {
                const double coarse = detail::generator_of(model, cert, x, k, z, h);
                const double fine = detail::generator_of(model, cert, x, k, z, 0.5 * h);
                const double margin = (rhs - fine) / v;
                const double err = std::abs(coarse - fine) / (3.0 * v);
                if (margin + err < 0.0) certain_fail = true;
                if (margin - err < 0.0) uncertain = true;
                if (margin < rep.tightest_margin) {
                    rep.tightest_margin = margin;
                    rep.error_estimate = err;
                    rep.location = x;
                    rep.regime = k;
                    rep.control = z;
                }
            }
        }
    }
    rep.drift_status = certain_fail ? CertificateStatus::Fail
                       : uncertain  ? CertificateStatus::Inconclusive
                                    : CertificateStatus::Pass;

    if (cert.mode == CertificateMode::InfCompact) {
        bool ok = true;
        for (int k = 0; k < model.num_regimes && ok; ++k)
            ok = detail::inf_compact_on_grid(grid, [&](const Point& x) {
                double sup_c = -std::numeric_limits<double>::infinity();
                for (int z = 0; z < model.num_controls(); ++z) sup_c = std::max(sup_c, model.cost(x, k, z));
                return cert.ell(x, k) - sup_c;
            });
        rep.cost_condition = ok;
        rep.detail = ok ? "ell - sup c grows toward the box boundary" : "ell - sup c is not inf-compact on the grid";
    } else {
        double sup_c = -std::numeric_limits<double>::infinity();
        double gamma = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            const Point x = grid.node(i);
            for (int k = 0; k < model.num_regimes; ++k) {
                gamma = std::min(gamma, cert.ell(x, k));
                for (int z = 0; z < model.num_controls(); ++z) sup_c = std::max(sup_c, model.cost(x, k, z));
            }
        }
        rep.cost_condition = sup_c < gamma;
        rep.detail = "sup c = " + std::to_string(sup_c) + ", gamma = " + std::to_string(gamma);
    }

    if (rep.drift_status == CertificateStatus::Fail || !rep.cost_condition || !rep.lyap_at_least_one)
        rep.status = CertificateStatus::Fail;
    else
        rep.status = rep.drift_status;
    return rep;
}

}  // namespace rsc
