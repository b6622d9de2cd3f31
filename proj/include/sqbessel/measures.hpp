#pragma once

// Limiting measures mu1, mu2, mu3 read off the spectral curve, the
// constraints rho1, rho3, logarithmic potentials, the Euler-Lagrange
// residuals and balayage onto half lines.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "sqbessel/chebyshev.hpp"
#include "sqbessel/error.hpp"
#include "sqbessel/quadrature.hpp"
#include "sqbessel/spectral.hpp"

namespace sqb {

/// External field acting on the middle measure, x >= 0.
inline double external_field(const ModelParams& mp, double x) {
    if (!(x >= 0.0)) throw DomainError("external_field: requires x >= 0");
    const double t = mp.t;
    const double u = 1.0 - t;
    return x / (t * u) - 2.0 * std::sqrt(mp.a * x) / t - 2.0 * std::sqrt(mp.b * x) / u;
}

/// Prefactor k of rho_j(x) = k |x|^{-1/2}.
inline double rho_coefficient(int which, const ModelParams& mp) {
    if (which == 1) return std::sqrt(mp.a) / (std::numbers::pi * mp.t);
    if (which == 3) return std::sqrt(mp.b) / (std::numbers::pi * (1.0 - mp.t));
    throw DomainError("rho: `which` must be 1 or 3");
}

inline double rho_density(int which, const ModelParams& mp, double x) {
    if (!(x < 0.0)) throw DomainError("rho_density: requires x < 0");
    return rho_coefficient(which, mp) / std::sqrt(-x);
}

/// rho_j mass of the cell [lo, hi] inside the negative axis.
inline double rho_cell_mass(int which, const ModelParams& mp, double lo, double hi) {
    if (!(lo <= hi) || !(hi <= 0.0)) throw DomainError("rho_cell_mass: need lo <= hi <= 0");
    return rho_coefficient(which, mp) * 2.0 * (std::sqrt(-lo) - std::sqrt(-hi));
}

// ---------------------------------------------------------------------------
// Densities straight from the xi boundary values

inline double density_mu2(const SpectralCurve& sc, double x) {
    const auto& bp = sc.branch_points();
    if (!(x > bp.p) || !(x < bp.q)) return 0.0;
    const double v = sc.xi_plus(x).xi[1].imag() / std::numbers::pi;
    return std::max(v, 0.0);
}

namespace detail {

inline double density_outer(const SpectralCurve& sc, int which, double x) {
    if (!(x < 0.0)) throw DomainError("density_mu1/mu3: requires x < 0");
    const auto& bp = sc.branch_points();
    const double r = which == 1 ? bp.r1 : bp.r3;
    const double rho = rho_density(which, sc.params(), x);
    if (x > -r) return rho;  // constraint saturated
    const double im = sc.xi_plus(x).xi[which == 1 ? 0 : 2].imag();
    return std::clamp(rho + im / std::numbers::pi, 0.0, rho);
}

}  // namespace detail

inline double density_mu1(const SpectralCurve& sc, double x) { return detail::density_outer(sc, 1, x); }
inline double density_mu3(const SpectralCurve& sc, double x) { return detail::density_outer(sc, 3, x); }

inline double density_mu2(const ModelParams& mp, double x) { return density_mu2(SpectralCurve(mp), x); }
inline double density_mu1(const ModelParams& mp, double x) { return density_mu1(SpectralCurve(mp), x); }
inline double density_mu3(const ModelParams& mp, double x) { return density_mu3(SpectralCurve(mp), x); }

// ---------------------------------------------------------------------------
// Measures as integrable objects

enum class Edge { Regular, SqrtVanish, InvSqrt };

/// density ~ K1 |y|^{-3/2} + K2 |y|^{-5/2} for y < -Y.
struct PowerTail {
    double Y = 0.0;
    double K1 = 0.0;
    double K2 = 0.0;
    double rel_error = 0.0;  ///< model mismatch measured at 4Y

    double operator()(double y) const {
        const double a = std::abs(y);
        return K1 * std::pow(a, -1.5) + K2 * std::pow(a, -2.5);
    }
    double mass() const { return 2.0 * K1 / std::sqrt(Y) + (2.0 / 3.0) * K2 * std::pow(Y, -1.5); }
};

struct MeasureDensity {
    double lo = 0.0;  ///< -infinity for a half line
    double hi = 1.0;
    double mass = 1.0;
    std::function<double(double)> density;
    Edge lo_edge = Edge::Regular;
    Edge hi_edge = Edge::Regular;
    std::vector<double> breakpoints;  ///< interior points where the density is not smooth
    std::optional<PowerTail> tail;    ///< required when lo is infinite

    bool half_line() const { return std::isinf(lo); }

    double operator()(double x) const {
        if (x < lo || x > hi) return 0.0;
        if (tail && x < -tail->Y) return (*tail)(x);
        return density(x);
    }
};

/// Fits the -3/2 tail of a density on (-inf, hi] from values at -Y and -2Y.
template <class F>
PowerTail fit_power_tail(F&& f, double Y) {
    PowerTail tl;
    tl.Y = Y;
    const double f1 = f(-Y);
    const double f2 = f(-2.0 * Y);
    // f1 = K1 Y^-1.5 + K2 Y^-2.5, f2 = K1 (2Y)^-1.5 + K2 (2Y)^-2.5
    const double a11 = std::pow(Y, -1.5);
    const double a12 = std::pow(Y, -2.5);
    const double a21 = std::pow(2.0 * Y, -1.5);
    const double a22 = std::pow(2.0 * Y, -2.5);
    const double det = a11 * a22 - a12 * a21;
    tl.K1 = (f1 * a22 - a12 * f2) / det;
    tl.K2 = (a11 * f2 - a21 * f1) / det;
    const double f4 = f(-4.0 * Y);
    tl.rel_error = f4 > 0.0 ? std::abs(f4 - tl(-4.0 * Y)) / f4 : 0.0;
    return tl;
}

/// Half-line measure on (-inf, hi] with its tail fitted at -Y.
inline MeasureDensity make_half_line_measure(std::function<double(double)> density, double hi, double mass,
                                             Edge hi_edge, double Y, std::vector<double> breakpoints = {}) {
    MeasureDensity m;
    m.lo = -std::numeric_limits<double>::infinity();
    m.hi = hi;
    m.mass = mass;
    m.hi_edge = hi_edge;
    m.breakpoints = std::move(breakpoints);
    m.tail = fit_power_tail(density, Y);
    m.density = std::move(density);
    return m;
}

/// Integral of g against the measure. Each smooth piece (between support
/// ends, breakpoints and `splits`) is halved and integrated with
/// y = c + u^2 from its left end and y = d - u^2 from its right end, which
/// absorbs square-root edges, inverse square roots and log singularities at
/// the split points. Half lines add the fitted tail via y = -Y / u^2.
template <class G>
quad::Result integrate_measure(const MeasureDensity& m, G&& g, const std::vector<double>& splits = {},
                               double tol = 1e-11) {
    if (m.half_line() && !m.tail) throw DomainError("integrate_measure: half-line measure without a tail model");
    const double lo = m.half_line() ? -m.tail->Y : m.lo;
    const double hi = m.hi;
    std::vector<double> pts{lo, hi};
    for (double b : m.breakpoints)
        if (b > lo && b < hi) pts.push_back(b);
    for (double s : splits)
        if (s > lo && s < hi) pts.push_back(s);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    quad::Result total;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double c = pts[i];
        const double d = pts[i + 1];
        const double mid = 0.5 * (c + d);
        const double w = std::sqrt(mid - c);
        // Rounding can land y exactly on an integrable singularity; that
        // single point carries no mass.
        auto term = [&](double u, double y) {
            const double v = 2.0 * u * g(y) * m.density(y);
            return std::isfinite(v) ? v : 0.0;
        };
        auto left = [&](double u) { return term(u, c + u * u); };
        auto right = [&](double u) { return term(u, d - u * u); };
        const auto r1 = quad::tanh_sinh(left, 0.0, w, tol);
        const auto r2 = quad::tanh_sinh(right, 0.0, w, tol);
        total.value += r1.value + r2.value;
        total.error += r1.error + r2.error;
    }
    if (m.half_line()) {
        const auto& tl = *m.tail;
        const double Y = tl.Y;
        auto tail_f = [&](double u) {
            if (u < 1e-100) return 0.0;  // log-integrable, negligible
            const double y = -Y / (u * u);
            return g(y) * (2.0 * tl.K1 / std::sqrt(Y) + 2.0 * tl.K2 * u * u * std::pow(Y, -1.5));
        };
        auto tail_abs = [&](double u) { return std::abs(tail_f(u)); };
        const auto rt = quad::tanh_sinh(tail_f, 0.0, 1.0, tol);
        const auto ra = quad::tanh_sinh(tail_abs, 0.0, 1.0, 1e-6);
        total.value += rt.value;
        total.error += rt.error + tl.rel_error * ra.value;
    }
    return total;
}

/// U(x) = integral of log(1/|x - y|) against the measure.
inline quad::Result log_potential(const MeasureDensity& m, double x, double tol = 1e-6) {
    auto g = [x](double y) {
        const double d = std::abs(x - y);
        return d > 0.0 ? -std::log(d) : 0.0;
    };
    std::vector<double> splits{x};
    // Keep pieces short relative to their distance from x.
    if (x > m.hi && std::isfinite(m.lo) && x - m.hi < 0.1 * (m.hi - m.lo)) splits.push_back(m.hi - (x - m.hi));
    if (x < m.lo && m.hi - x > 0.0 && m.lo - x < 0.1 * (m.hi - m.lo)) splits.push_back(m.lo + (m.lo - x));
    const auto r = integrate_measure(m, g, splits);
    if (r.error > tol) {
        std::ostringstream os;
        os << "log_potential: error estimate " << r.error << " exceeds " << tol << " at x = " << x;
        if (m.half_line()) os << " (tail fit mismatch " << m.tail->rel_error << " at Y = " << m.tail->Y << ")";
        throw TailBudgetExceeded(os.str());
    }
    return r;
}

inline quad::Result total_mass(const MeasureDensity& m) {
    return integrate_measure(m, [](double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Tabulated limiting measures

struct MeasureOptions {
    double table_tol = 1e-12;
    double truncation_factor = 1e4;  ///< half lines are tabulated on [-factor * max(1, q), 0]
};

/// mu1, mu2, mu3 of one instance as MeasureDensity objects. The densities
/// are Chebyshev tables of the xi boundary values with the edge behaviour
/// factored out, so evaluation is cheap and smooth.
class LimitingMeasures {
public:
    explicit LimitingMeasures(const ModelParams& mp, const MeasureOptions& opt = {})
        : LimitingMeasures(SpectralCurve(mp), opt) {}

    explicit LimitingMeasures(SpectralCurve sc, const MeasureOptions& opt = {}) : sc_(std::move(sc)) {
        const auto& bp = sc_.branch_points();
        Y_ = opt.truncation_factor * std::max(1.0, bp.q);
        build_mu2(opt);
        mu1_ = build_outer(1, opt);
        mu3_ = build_outer(3, opt);
    }

    const SpectralCurve& curve() const { return sc_; }
    const ModelParams& params() const { return sc_.params(); }
    const MeasureDensity& mu1() const { return mu1_; }
    const MeasureDensity& mu2() const { return mu2_; }
    const MeasureDensity& mu3() const { return mu3_; }
    const MeasureDensity& mu(int j) const { return j == 1 ? mu1_ : (j == 2 ? mu2_ : mu3_); }
    double truncation() const { return Y_; }

private:
    void build_mu2(const MeasureOptions& opt) {
        const auto& bp = sc_.branch_points();
        const double p = bp.p;
        const double q = bp.q;
        const SpectralCurve* sc = &sc_;
        mu2_.lo = p;
        mu2_.hi = q;
        mu2_.mass = 1.0;
        mu2_.hi_edge = Edge::SqrtVanish;
        if (p > 0.0) {
            mu2_.lo_edge = Edge::SqrtVanish;
            auto h = ChebyshevTable::build(
                [&](double x) { return density_mu2(*sc, x) / std::sqrt((x - p) * (q - x)); }, p, q, opt.table_tol);
            mu2_.density = [h, p, q](double x) {
                if (!(x > p) || !(x < q)) return 0.0;
                return std::max(0.0, h(x) * std::sqrt((x - p) * (q - x)));
            };
        } else {
            // Hard edge at 0: tabulate in s = sqrt(x).
            mu2_.lo_edge = Edge::InvSqrt;
            const double sq = std::sqrt(q);
            auto h = ChebyshevTable::build(
                [&](double s) { return density_mu2(*sc, s * s) * s / std::sqrt(sq - s); }, 0.0, sq, opt.table_tol);
            mu2_.density = [h, q, sq](double x) {
                if (!(x > 0.0) || !(x < q)) return 0.0;
                const double s = std::sqrt(x);
                return std::max(0.0, h(s) * std::sqrt(sq - s) / s);
            };
        }
    }

    // mu1 (which = 1) or mu3 (which = 3) on (-inf, 0].
    MeasureDensity build_outer(int which, const MeasureOptions& opt) const {
        const auto& bp = sc_.branch_points();
        const double r = which == 1 ? bp.r1 : bp.r3;
        const double k = rho_coefficient(which, sc_.params());
        const double L = std::sqrt(std::max({bp.q, r, 1e-6}));
        const double umax = std::sqrt(Y_ - r);
        const double vmax = (umax - L) / (umax + L);
        const bool active = r > 0.0;
        const SpectralCurve* sc = &sc_;
        // u = sqrt(-r - x) through the Moebius map u = L (1 + v) / (1 - v);
        // the factor strips the edge and tail behaviour.
        auto factor = [L, active](double u) {
            return active ? std::pow((L * L + u * u) / (L * L), 1.5) : u * (L * L + u * u) / (L * L);
        };
        auto table = ChebyshevTable::build(
            [&](double v) {
                const double u = L * (1.0 + v) / (1.0 - v);
                const double x = -r - u * u;
                return detail::density_outer(*sc, which, x) * factor(u);
            },
            -1.0, vmax, opt.table_tol);
        auto dens = [table, factor, L, r, k](double x) {
            if (!(x < 0.0)) return 0.0;
            const double rho = k / std::sqrt(-x);
            if (x > -r) return rho;
            const double u = std::sqrt(-r - x);
            const double v = (u - L) / (u + L);
            return std::clamp(table(v) / factor(u), 0.0, rho);
        };
        std::vector<double> breaks;
        if (active) breaks.push_back(-r);
        MeasureDensity m;
        m.lo = -std::numeric_limits<double>::infinity();
        m.hi = 0.0;
        m.mass = 0.5;
        m.hi_edge = Edge::InvSqrt;
        m.breakpoints = breaks;
        m.tail = fit_power_tail([&](double x) { return detail::density_outer(*sc, which, x); }, Y_);
        m.density = dens;
        return m;
    }

    SpectralCurve sc_;
    double Y_ = 1e4;
    MeasureDensity mu1_;
    MeasureDensity mu2_;
    MeasureDensity mu3_;
};

// ---------------------------------------------------------------------------
// Euler-Lagrange conditions

struct VariationalReport {
    double l = 0.0;
    double eq_residual_max = 0.0;      ///< mu2 equality, interior of [p, q]
    double eq_residual_mu1 = 0.0;      ///< 2U1 - U2 on (-inf, -r1]
    double eq_residual_mu3 = 0.0;
    double ineq_margin_mu2 = std::numeric_limits<double>::infinity();  ///< off [p, q] on R+
    double ineq_margin_mu1 = std::numeric_limits<double>::infinity();  ///< U2 - 2U1 off (-inf, -r1]
    double ineq_margin_mu3 = std::numeric_limits<double>::infinity();
    int n_eq_mu2 = 0;
    int n_ineq_mu2 = 0;
    int n_eq_mu1 = 0;
    int n_ineq_mu1 = 0;
    int n_eq_mu3 = 0;
    int n_ineq_mu3 = 0;
    double quadrature_error = 0.0;  ///< largest potential error estimate used

    bool inequalities_hold() const {
        return ineq_margin_mu2 > 0.0 && ineq_margin_mu1 > 0.0 && ineq_margin_mu3 > 0.0;
    }
};

/// A grid covering the support interior and the regions where each
/// inequality applies, kept away from every branch point.
inline std::vector<double> default_variational_grid(const BranchPoints& bp, int interior = 40) {
    std::vector<double> g;
    const double p = bp.p;
    const double q = bp.q;
    const double w = q - p;
    for (int i = 0; i < interior; ++i) g.push_back(p + w * (0.02 + 0.96 * (i + 0.5) / interior));
    for (double f : {0.05, 0.15, 0.35, 0.75, 1.5, 3.0}) g.push_back(q + w * f);
    if (p > 0.0)
        for (double f : {0.2, 0.5, 0.8}) g.push_back(p * f);
    const double scale = std::max(1.0, q);
    for (double r : {bp.r1, bp.r3}) {
        if (r > 0.0) {
            for (double f : {0.2, 0.5, 0.8}) g.push_back(-r * f);
            for (double f : {1.3, 2.0, 4.0, 10.0}) g.push_back(-r * f);
        }
    }
    for (double f : {0.05, 0.3, 1.0, 3.0, 10.0}) {
        const double x = -f * scale;
        if (std::abs(x + bp.r1) > 0.1 * std::max(bp.r1, 1e-3) && std::abs(x + bp.r3) > 0.1 * std::max(bp.r3, 1e-3))
            g.push_back(x);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

inline VariationalReport variational_check(const LimitingMeasures& lm, const std::vector<double>& grid) {
    const auto& bp = lm.curve().branch_points();
    const auto& mp = lm.params();
    VariationalReport rep;
    std::vector<double> eq_vals;
    std::vector<std::pair<double, double>> off_vals;  // (x, F)
    for (double x : grid) {
        if (x == 0.0) continue;
        const auto u1 = log_potential(lm.mu1(), x);
        const auto u2 = log_potential(lm.mu2(), x);
        const auto u3 = log_potential(lm.mu3(), x);
        rep.quadrature_error = std::max({rep.quadrature_error, u1.error, u2.error, u3.error});
        const double d1 = u2.value - 2.0 * u1.value;
        const double d3 = u2.value - 2.0 * u3.value;
        if (x < 0.0 && x <= -bp.r1) {
            rep.eq_residual_mu1 = std::max(rep.eq_residual_mu1, std::abs(d1));
            ++rep.n_eq_mu1;
        } else {
            rep.ineq_margin_mu1 = std::min(rep.ineq_margin_mu1, d1);
            ++rep.n_ineq_mu1;
        }
        if (x < 0.0 && x <= -bp.r3) {
            rep.eq_residual_mu3 = std::max(rep.eq_residual_mu3, std::abs(d3));
            ++rep.n_eq_mu3;
        } else {
            rep.ineq_margin_mu3 = std::min(rep.ineq_margin_mu3, d3);
            ++rep.n_ineq_mu3;
        }
        if (x > 0.0) {
            const double F = 2.0 * u2.value - u1.value - u3.value + external_field(mp, x);
            if (x > bp.p && x < bp.q) eq_vals.push_back(F);
            else off_vals.emplace_back(x, F);
        }
    }
    if (!eq_vals.empty()) {
        double s = 0.0;
        for (double v : eq_vals) s += v;
        rep.l = s / static_cast<double>(eq_vals.size());
        for (double v : eq_vals) rep.eq_residual_max = std::max(rep.eq_residual_max, std::abs(v - rep.l));
        rep.n_eq_mu2 = static_cast<int>(eq_vals.size());
        for (const auto& [x, F] : off_vals) {
            rep.ineq_margin_mu2 = std::min(rep.ineq_margin_mu2, F - rep.l);
            ++rep.n_ineq_mu2;
        }
    }
    return rep;
}

inline VariationalReport variational_check(const ModelParams& mp, const std::vector<double>& grid) {
    return variational_check(LimitingMeasures(mp), grid);
}

// ---------------------------------------------------------------------------
// Balayage onto K_c = (-inf, -c]

inline double balayage_delta(double s, double c, double x) {
    if (!(s >= 0.0) || !(c >= 0.0)) throw DomainError("balayage_delta: need s >= 0 and c >= 0");
    if (!(x <= -c)) throw DomainError("balayage_delta: x must lie in (-inf, -c]");
    if (x == -c) return std::numeric_limits<double>::infinity();
    return std::sqrt(s + c) / (std::numbers::pi * std::sqrt(std::abs(x + c)) * (s - x));
}

/// Density at x of the balayage of a measure on R+ onto K_c.
inline double balayage_of_measure(const MeasureDensity& m, double c, double x) {
    if (!(m.lo >= 0.0)) throw DomainError("balayage_of_measure: the measure must live on R+");
    if (!(x <= -c)) throw DomainError("balayage_of_measure: x must lie in (-inf, -c]");
    return integrate_measure(m, [c, x](double s) { return balayage_delta(s, c, x); }).value;
}

/// Bal(delta_s, K_c) as a half-line measure.
inline MeasureDensity balayage_delta_measure(double s, double c, double truncation = 1e4) {
    const double Y = truncation * std::max(1.0, s + c);
    auto f = [s, c](double x) { return balayage_delta(s, c, x); };
    return make_half_line_measure(f, -c, 1.0, Edge::InvSqrt, Y);
}

}  // namespace sqb
