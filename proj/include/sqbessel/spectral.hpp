#pragma once

// The quartic spectral curve
//   xi^4 + A xi^3 + B(z) xi^2 + C(z) xi + D(z) = 0
// of the squared Bessel path model: phase classification, branch points and
// sheet-labelled root evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "sqbessel/error.hpp"

namespace sqb {

using cplx = std::complex<double>;

/// Start point a, end point b and rescaled time t of one problem instance.
struct ModelParams {
    double a = 1.0;
    double b = 1.0;
    double t = 0.5;

    void validate() const {
        if (!(std::isfinite(a) && a > 0.0) || !(std::isfinite(b) && b > 0.0) ||
            !(std::isfinite(t) && t > 0.0 && t < 1.0)) {
            std::ostringstream os;
            os << "invalid parameters (a=" << a << ", b=" << b << ", t=" << t
               << "): need a > 0, b > 0, 0 < t < 1";
            throw DomainError(os.str());
        }
    }

    /// The time-reversed instance (b, a, 1 - t).
    ModelParams reversed() const { return {b, a, 1.0 - t}; }
};

enum class Phase { CaseI, CaseIIa, CaseIIb, CaseIII };

inline std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::CaseI: return "I";
        case Phase::CaseIIa: return "IIa";
        case Phase::CaseIIb: return "IIb";
        case Phase::CaseIII: return "III";
    }
    return "?";
}

struct GenericityTolerance {
    double eps_c = 1e-9;  ///< minimum |ab - 1/4|
    double eps_t = 1e-9;  ///< minimum |t - t_i|
};

/// Coefficients of the quartic: A constant, B = B0 + B1/z, C = C1/z,
/// D = D1/z + c/(z^2 t^2 (1-t)^2).
struct CurveCoeffs {
    double a = 0.0;  ///< model parameters, kept so the discriminant can be rebuilt exactly
    double b = 0.0;
    double t = 0.5;
    double A = 0.0;
    double B0 = 0.0;
    double B1 = 0.0;
    double C1 = 0.0;
    double D1 = 0.0;
    double c = 0.0;

    double D2() const { return c / (t * t * (1.0 - t) * (1.0 - t)); }
    cplx B(cplx z) const { return B0 + B1 / z; }
    cplx C(cplx z) const { return C1 / z; }
    cplx D(cplx z) const { return D1 / z + D2() / (z * z); }
};

struct BranchPoints {
    double r1 = 0.0;
    double r3 = 0.0;
    double p = 0.0;
    double q = 0.0;
};

/// The four roots at z, index j holding xi_{j+1}.
struct XiBranches {
    cplx z;
    std::array<cplx, 4> xi;
};

struct XiOptions {
    double reference_height = 1e8;  ///< |z_ref| where labels are read off the asymptotics
    double max_log_step = 0.6931471805599453;  ///< largest log-height step (ratio 1/2)
    double min_log_step = 1e-10;  ///< give up (BranchCollision) below this step
    double real_offset = 0.0;  ///< offset for real z; 0 selects real_axis_offset(x)
};

/// Offset used for boundary values on the real axis.
inline double real_axis_offset(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

/// Critical times t1 <= t2 at which the z-linear discriminant coefficient
/// vanishes; defined for ab < 1/4.
inline std::pair<double, double> critical_times(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("critical_times: need a > 0, b > 0");
    const double d = 1.0 - 4.0 * a * b;
    if (!(d > 0.0)) {
        if (d == 0.0) {
            const double tc = (2.0 * a + 1.0) / (2.0 * (a + b + 1.0));
            return {tc, tc};
        }
        throw DomainError("critical_times: requires ab < 1/4");
    }
    const double s = std::sqrt(d);
    const double den = 2.0 * (a + b + 1.0);
    return {(2.0 * a + 1.0 - s) / den, (2.0 * a + 1.0 + s) / den};
}

inline CurveCoeffs curve_coeffs(const ModelParams& mp, Phase phase) {
    mp.validate();
    const double a = mp.a;
    const double b = mp.b;
    const double t = mp.t;
    const double u = 1.0 - t;
    CurveCoeffs cc;
    cc.a = a;
    cc.b = b;
    cc.t = t;
    cc.A = -2.0 / (t * u);
    cc.B0 = 1.0 / (t * t * u * u);
    cc.B1 = -b / (u * u) - a / (t * t) + 1.0 / (t * u);
    cc.C1 = 2.0 * b / (t * u * u * u) - 1.0 / (t * t * u * u);
    cc.D1 = -b / (t * t * u * u * u * u);
    if (phase == Phase::CaseI) {
        const double s = std::sqrt(a * b) - 0.5;
        cc.c = s * s;
    }
    return cc;
}

namespace detail {

using Poly = std::vector<double>;  // coefficients, lowest degree first

inline Poly poly_mul(const Poly& p, const Poly& q) {
    Poly r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

inline Poly poly_pow(const Poly& p, int k) {
    Poly r{1.0};
    for (int i = 0; i < k; ++i) r = poly_mul(r, p);
    return r;
}

inline void poly_add_shifted(Poly& acc, const Poly& p, double scale, int shift) {
    if (acc.size() < p.size() + shift) acc.resize(p.size() + shift, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i + shift] += scale * p[i];
}

inline double poly_eval(const Poly& p, double z) {
    double v = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) v = v * z + p[i];
    return v;
}

inline double poly_deriv_eval(const Poly& p, double z) {
    double v = 0.0;
    for (std::size_t i = p.size(); i-- > 1;) v = v * z + static_cast<double>(i) * p[i];
    return v;
}

// Roots of a monic-or-not polynomial via balanced companion eigenvalues.
template <int Deg, class Scalar>
std::array<cplx, Deg> companion_roots(const std::array<Scalar, Deg + 1>& low_to_high) {
    Eigen::Matrix<Scalar, Deg + 1, 1> c;
    for (int i = 0; i <= Deg; ++i) c[i] = low_to_high[i];
    Eigen::PolynomialSolver<Scalar, Deg> solver(c);
    std::array<cplx, Deg> out;
    for (int i = 0; i < Deg; ++i) out[i] = cplx(solver.roots()[i]);
    return out;
}

// One Newton step on the monic quartic, kept only if it reduces |P|.
inline cplx polish_quartic_root(const std::array<cplx, 5>& c, cplx x) {
    for (int it = 0; it < 2; ++it) {
        cplx p = 1.0;
        cplx dp = 0.0;
        for (int i = 4; i-- > 0;) {
            dp = dp * x + p;
            p = p * x + c[i];
        }
        if (dp == cplx(0.0)) break;
        const cplx nx = x - p / dp;
        cplx np = 1.0;
        for (int i = 4; i-- > 0;) np = np * nx + c[i];
        if (std::abs(np) < std::abs(p)) x = nx; else break;
    }
    return x;
}

}  // namespace detail

/// Roots of xi^4 + A xi^3 + B xi^2 + C xi + D at z, unlabelled.
inline std::array<cplx, 4> quartic_roots(const CurveCoeffs& cc, cplx z) {
    // low-to-high: D, C, B, A, 1
    const std::array<cplx, 5> c{cc.D(z), cc.C(z), cc.B(z), cplx(cc.A), cplx(1.0)};
    auto r = detail::companion_roots<4, cplx>(c);
    for (auto& x : r) x = detail::polish_quartic_root(c, x);
    return r;
}

namespace detail {

// Simultaneous Aberth iteration from labelled starting guesses. Root j stays
// attached to guess j as long as the guesses are good; returns false when
// the iteration does not settle.
inline bool aberth_refine(const CurveCoeffs& cc, cplx z, std::array<cplx, 4>& x) {
    const std::array<cplx, 5> c{cc.D(z), cc.C(z), cc.B(z), cplx(cc.A), cplx(1.0)};
    bool settled = false;
    for (int it = 0; it < 40; ++it) {
        double step = 0.0;
        double scale = 0.0;
        for (int j = 0; j < 4; ++j) {
            cplx p = 1.0;
            cplx dp = 0.0;
            for (int i = 4; i-- > 0;) {
                dp = dp * x[j] + p;
                p = p * x[j] + c[i];
            }
            if (p == cplx(0.0)) continue;
            if (dp == cplx(0.0)) return false;
            const cplx ratio = p / dp;
            cplx sum = 0.0;
            for (int k = 0; k < 4; ++k)
                if (k != j) sum += 1.0 / (x[j] - x[k]);
            const cplx w = ratio / (1.0 - ratio * sum);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) return false;
            x[j] -= w;
            step = std::max(step, std::abs(w));
            scale = std::max(scale, std::abs(x[j]));
        }
        if (settled) return true;
        // One more sweep after the step drops to rounding level.
        if (step <= 1e-12 * std::max(scale, 1e-300)) settled = true;
    }
    return false;
}

}  // namespace detail

/// Large-|z| expansions that define the sheet labels.
inline std::array<cplx, 4> xi_asymptotic(const ModelParams& mp, cplx z) {
    const cplx s = std::sqrt(z);
    const double t = mp.t;
    const double u = 1.0 - t;
    const cplx l12 = std::sqrt(mp.a) / (t * s);
    const cplx l34 = std::sqrt(mp.b) / (u * s);
    const double top = 1.0 / (t * u);
    return {top + l12, top - l12, l34, -l34};
}

namespace detail {

// Best assignment of `roots` to `targets` over all 24 permutations.
inline std::array<int, 4> best_matching(const std::array<cplx, 4>& roots, const std::array<cplx, 4>& targets) {
    std::array<int, 4> perm{0, 1, 2, 3};
    std::array<int, 4> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int j = 0; j < 4; ++j) cost += std::abs(roots[perm[j]] - targets[j]);
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Each matched root must land within a quarter of the local root
// separation (measured at `from`) of where it was expected.
inline bool unambiguous(const std::array<cplx, 4>& from, const std::array<cplx, 4>& expected,
                        const std::array<cplx, 4>& to) {
    for (int j = 0; j < 4; ++j) {
        double sep = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k)
            if (k != j) sep = std::min(sep, std::abs(from[j] - from[k]));
        if (!(std::abs(to[j] - expected[j]) < 0.25 * sep)) return false;
    }
    return true;
}

inline bool unambiguous(const std::array<cplx, 4>& from, const std::array<cplx, 4>& to) {
    return unambiguous(from, from, to);
}

}  // namespace detail

/// Sheet-labelled roots at z.
///
/// Labels are read off the large-|z| expansions at Re z + i*H (H = 1e8)
/// and carried down the vertical segment to z by root matching with
/// adaptive step halving. The segment stays in the open upper half plane,
/// so it never crosses a cut. Lower half plane values follow from
/// conjugation; real z is evaluated at z + i*delta.
inline XiBranches xi_branches(const CurveCoeffs& cc, const ModelParams& mp, cplx z, const XiOptions& opt = {}) {
    if (z == cplx(0.0)) throw DomainError("xi_branches: z = 0 is a pole of the curve");
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw DomainError("xi_branches: non-finite z");
    cplx w = z;
    if (w.imag() == 0.0)
        w += cplx(0.0, opt.real_offset > 0.0 ? opt.real_offset : real_axis_offset(w.real()));
    const bool flip = w.imag() < 0.0;
    if (flip) w = std::conj(w);

    const double x0 = w.real();
    const double h_end = w.imag();
    double h = std::max(opt.reference_height, h_end);

    std::array<cplx, 4> cur;
    {
        const cplx z0(x0, h);
        const auto roots = quartic_roots(cc, z0);
        const auto pred = xi_asymptotic(mp, z0);
        const auto perm = detail::best_matching(roots, pred);
        for (int j = 0; j < 4; ++j) cur[j] = roots[perm[j]];
        if (!detail::unambiguous(pred, cur))
            throw BranchCollision("xi_branches: asymptotic labels ambiguous at the reference point");
    }

    // Secant predictor in log-height; matching is against the prediction.
    std::array<cplx, 4> prev = cur;
    double prev_dl = 0.0;
    double log_step = opt.max_log_step;
    while (h > h_end) {
        const double h_next = std::max(h * std::exp(-log_step), h_end);
        const double dl = std::log(h / h_next);
        std::array<cplx, 4> pred = cur;
        if (prev_dl > 0.0)
            for (int j = 0; j < 4; ++j) pred[j] += (cur[j] - prev[j]) * (dl / prev_dl);
        std::array<cplx, 4> next = pred;
        if (!detail::aberth_refine(cc, cplx(x0, h_next), next)) {
            const auto roots = quartic_roots(cc, cplx(x0, h_next));
            const auto perm = detail::best_matching(roots, pred);
            for (int j = 0; j < 4; ++j) next[j] = roots[perm[j]];
        }
        if (detail::unambiguous(cur, pred, next)) {
            prev = cur;
            prev_dl = dl;
            cur = next;
            h = h_next;
            log_step = std::min(1.5 * log_step, opt.max_log_step);
        } else {
            log_step *= 0.5;
            if (log_step < opt.min_log_step) {
                std::ostringstream os;
                os << "xi_branches: roots collide along the continuation path near z = " << x0 << " + "
                   << h << "i";
                throw BranchCollision(os.str());
            }
        }
    }
    if (flip)
        for (auto& x : cur) x = std::conj(x);
    return {z, cur};
}

/// Discriminant of the quartic in xi, pole-cleared:
///   Disc(z) = t^10 (1-t)^10 z^6 disc_xi(z),
/// a polynomial of degree <= 4 in z. Coefficients lowest degree first.
inline std::array<double, 5> discriminant_polynomial(const CurveCoeffs& cc) {
    // The expansion cancels heavily for t near 0 or 1, so it runs in 113-bit
    // arithmetic from the model parameters when they are known.
    using R = boost::multiprecision::cpp_bin_float_quad;
    using P = std::vector<R>;
    auto mul = [](const P& p, const P& q) {
        P r(p.size() + q.size() - 1, R(0));
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
        return r;
    };
    auto pow = [&](const P& p, int k) {
        P r{R(1)};
        for (int i = 0; i < k; ++i) r = mul(r, p);
        return r;
    };
    const R t = cc.t;
    const R u = 1 - t;
    R A = cc.A, B0 = cc.B0, B1 = cc.B1, C1 = cc.C1, D1 = cc.D1, D2 = cc.D2();
    if (cc.a > 0.0 && cc.b > 0.0) {
        const R a = cc.a;
        const R b = cc.b;
        A = -2 / (t * u);
        B0 = 1 / (t * t * u * u);
        B1 = -b / (u * u) - a / (t * t) + 1 / (t * u);
        C1 = 2 * b / (t * u * u * u) - 1 / (t * t * u * u);
        D1 = -b / (t * t * u * u * u * u);
        R c = 0;
        if (cc.c != 0.0) {
            const R s = sqrt(a * b) - R(0.5);
            c = s * s;
        }
        D2 = c / (t * t * u * u);
    }
    // z * B, z * C, z^2 * D
    const P Bh{B1, B0};
    const P Ch{C1};
    const P Dh{D2, D1};
    // Each term of the quartic discriminant (leading coefficient 1) as
    // coef * A^i * Bh^j * Ch^k * Dh^l * z^(6 - j - k - 2l).
    struct Term {
        int coef;
        int i, j, k, l;
    };
    static constexpr Term terms[] = {
        {256, 0, 0, 0, 3}, {-192, 1, 0, 1, 2}, {-128, 0, 2, 0, 2}, {144, 0, 1, 2, 1},
        {-27, 0, 0, 4, 0}, {144, 2, 1, 0, 2},  {-6, 2, 0, 2, 1},   {-80, 1, 2, 1, 1},
        {18, 1, 1, 3, 0},  {16, 0, 4, 0, 1},   {-4, 0, 3, 2, 0},   {-27, 4, 0, 0, 2},
        {18, 3, 1, 1, 1},  {-4, 3, 0, 3, 0},   {-4, 2, 3, 0, 1},   {1, 2, 2, 2, 0},
    };
    P acc(8, R(0));
    for (const auto& tm : terms) {
        const P p = mul(mul(pow(Bh, tm.j), pow(Ch, tm.k)), pow(Dh, tm.l));
        const int shift = 6 - tm.j - tm.k - 2 * tm.l;
        R scale = tm.coef;
        for (int i = 0; i < tm.i; ++i) scale *= A;
        for (std::size_t i = 0; i < p.size(); ++i) acc[i + shift] += scale * p[i];
    }
    R norm = 1;
    for (int i = 0; i < 10; ++i) norm *= t * u;
    std::array<double, 5> out{};
    for (int i = 0; i < 5; ++i) out[i] = static_cast<double>(norm * acc[i]);
    return out;
}

/// Pole-cleared discriminant at real z (c = 0 curve of Cases II/III).
inline double discriminant(const ModelParams& mp, double z) {
    const auto p = discriminant_polynomial(curve_coeffs(mp, Phase::CaseIII));
    return detail::poly_eval(detail::Poly(p.begin(), p.end()), z);
}

namespace detail {

// Nonzero real roots of Disc(z)/z for the c = 0 curve, ascending, polished.
inline std::vector<double> nonzero_discriminant_roots(const ModelParams& mp) {
    const auto d = discriminant_polynomial(curve_coeffs(mp, Phase::CaseIII));
    const Poly cubic{d[1], d[2], d[3], d[4]};
    const auto r = companion_roots<3, double>({d[1], d[2], d[3], d[4]});
    std::vector<double> out;
    for (const auto& x : r) {
        const double scale = std::max(1.0, std::abs(x));
        if (std::abs(x.imag()) > 1e-6 * scale) continue;
        double v = x.real();
        for (int it = 0; it < 50; ++it) {
            const double f = poly_eval(cubic, v);
            const double df = poly_deriv_eval(cubic, v);
            if (df == 0.0) break;
            const double nv = v - f / df;
            if (!(std::abs(poly_eval(cubic, nv)) <= std::abs(f))) break;
            const bool done = std::abs(nv - v) <= 1e-15 * std::max(1.0, std::abs(v));
            v = nv;
            if (done) break;
        }
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    // A near-double root (symmetric Case III) is only accurate to ~sqrt(eps)
    // from the cubic itself; take the nearby zero of its derivative instead.
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
        const double scale = std::max(std::abs(out[i]), std::abs(out[i + 1]));
        if (out[i + 1] - out[i] > 1e-6 * scale) continue;
        const Poly deriv{cubic[1], 2.0 * cubic[2], 3.0 * cubic[3]};
        double v = 0.5 * (out[i] + out[i + 1]);
        for (int it = 0; it < 50; ++it) {
            const double df = poly_deriv_eval(deriv, v);
            if (df == 0.0) break;
            const double nv = v - poly_eval(deriv, v) / df;
            const bool done = std::abs(nv - v) <= 1e-15 * std::max(1.0, std::abs(v));
            v = nv;
            if (done) break;
        }
        out[i] = out[i + 1] = v;
    }
    return out;
}

// 0: pair (xi1, xi2) is the non-real one at x; 1: pair (xi3, xi4).
inline int nonreal_pair(const CurveCoeffs& cc, const ModelParams& mp, double x) {
    const auto xb = xi_branches(cc, mp, cplx(x, 0.0));
    const double c12 = std::abs(xb.xi[0].imag()) + std::abs(xb.xi[1].imag());
    const double c34 = std::abs(xb.xi[2].imag()) + std::abs(xb.xi[3].imag());
    if (c12 > 100.0 * c34) return 0;
    if (c34 > 100.0 * c12) return 1;
    std::ostringstream os;
    os << "cannot identify the sheet pair of the cut at x = " << x << " (|Im| sums " << c12 << ", " << c34
       << ")";
    throw RootAssignment(os.str());
}

struct NegativeRoots {
    double r1 = 0.0;
    double r3 = 0.0;
};

// Assigns the negative discriminant roots to r1/r3 by locating which sheet
// pair is non-real on the real axis just to the right of them.
inline NegativeRoots assign_negative_roots(const ModelParams& mp, const std::vector<double>& neg_abs) {
    const CurveCoeffs cc = curve_coeffs(mp, Phase::CaseIII);
    NegativeRoots nr;
    if (neg_abs.size() == 1) {
        const double r = neg_abs[0];
        // On (-r, 0) only the pair whose cut reaches 0 is non-real.
        if (nonreal_pair(cc, mp, -0.5 * r) == 0) nr.r3 = r; else nr.r1 = r;
        return nr;
    }
    if (neg_abs.size() == 2) {
        const double lo = std::min(neg_abs[0], neg_abs[1]);
        const double hi = std::max(neg_abs[0], neg_abs[1]);
        if (hi - lo <= 1e-7 * hi) {
            nr.r1 = nr.r3 = 0.5 * (lo + hi);
            return nr;
        }
        if (nonreal_pair(cc, mp, -0.5 * (lo + hi)) == 0) {
            nr.r1 = lo;
            nr.r3 = hi;
        } else {
            nr.r1 = hi;
            nr.r3 = lo;
        }
        return nr;
    }
    throw RootAssignment("unexpected number of negative branch points");
}

}  // namespace detail

/// Phase of the instance. Rejects parameters within the genericity
/// tolerance of ab = 1/4 or of a critical time.
inline Phase classify(const ModelParams& mp, const GenericityTolerance& tol = {}) {
    mp.validate();
    const double ab = mp.a * mp.b;
    if (std::abs(ab - 0.25) < tol.eps_c) {
        std::ostringstream os;
        os << "non-generic parameters: ab = " << ab << " is within " << tol.eps_c << " of 1/4";
        throw NonGenericPhase(os.str());
    }
    if (ab > 0.25) return Phase::CaseI;
    const auto [t1, t2] = critical_times(mp.a, mp.b);
    if (std::abs(mp.t - t1) < tol.eps_t || std::abs(mp.t - t2) < tol.eps_t) {
        std::ostringstream os;
        os << "non-generic parameters: t = " << mp.t << " is at a critical time (" << t1 << ", " << t2 << ")";
        throw NonGenericPhase(os.str());
    }
    if (mp.t > t1 && mp.t < t2) return Phase::CaseIII;
    const auto roots = detail::nonzero_discriminant_roots(mp);
    std::vector<double> neg;
    for (double r : roots)
        if (r < 0.0) neg.push_back(-r);
    if (neg.size() != 1) throw RootAssignment("Case II expects exactly one negative branch point");
    const auto nr = detail::assign_negative_roots(mp, neg);
    return nr.r1 > 0.0 ? Phase::CaseIIa : Phase::CaseIIb;
}

/// Branch points (r1, r3, p, q). Case I from the closed form; Cases II/III
/// from the real zeros of the pole-cleared discriminant.
inline BranchPoints branch_points(const ModelParams& mp, Phase phase) {
    BranchPoints bp;
    if (phase == Phase::CaseI) {
        const double t = mp.t;
        const double base = (1.0 - t) * std::sqrt(mp.a) + t * std::sqrt(mp.b);
        const double s = std::sqrt(2.0 * t * (1.0 - t));
        const double sp = base - s;
        const double sq = base + s;
        bp.p = sp * sp;
        bp.q = sq * sq;
        return bp;
    }
    const auto roots = detail::nonzero_discriminant_roots(mp);
    std::vector<double> neg;
    std::vector<double> pos;
    for (double r : roots) (r < 0.0 ? neg : pos).push_back(std::abs(r));
    std::sort(pos.begin(), pos.end());
    const bool case3 = phase == Phase::CaseIII;
    const std::size_t want_pos = case3 ? 1 : 2;
    const std::size_t want_neg = case3 ? 2 : 1;
    if (pos.size() != want_pos || neg.size() != want_neg) {
        std::ostringstream os;
        os << "discriminant has " << pos.size() << " positive and " << neg.size()
           << " negative nonzero real roots, inconsistent with Case " << phase_name(phase);
        throw RootAssignment(os.str());
    }
    const auto nr = detail::assign_negative_roots(mp, neg);
    bp.r1 = nr.r1;
    bp.r3 = nr.r3;
    if (case3) {
        bp.p = 0.0;
        bp.q = pos[0];
    } else {
        bp.p = pos[0];
        bp.q = pos[1];
        const bool r1_active = bp.r1 > 0.0;
        if (r1_active != (phase == Phase::CaseIIa))
            throw RootAssignment("negative branch point sheet does not match the Case II subcase");
    }
    return bp;
}

inline BranchPoints branch_points(const ModelParams& mp) { return branch_points(mp, classify(mp)); }

/// Case I closed form for xi_2 on Re sqrt(z) > 0 via the reduced quadratic
/// in eta = sqrt(z) * xi.
inline cplx case1_xi2(const ModelParams& mp, cplx z) {
    mp.validate();
    if (!(mp.a * mp.b > 0.25)) throw DomainError("case1_xi2: only defined in Case I (ab > 1/4)");
    const cplx w = std::sqrt(z);
    if (!(w.real() > 0.0)) throw DomainError("case1_xi2: requires Re sqrt(z) > 0");
    const double t = mp.t;
    const double u = t * (1.0 - t);
    const double sa = std::sqrt(mp.a);
    const double sb = std::sqrt(mp.b);
    const double s0 = -sa / t + sb / (1.0 - t);
    const double p0 = -std::sqrt(mp.a * mp.b) / u + 0.5 / u;
    // u^2 (S^2 - 4P) = w^2 + beta w + gamma
    const double beta = 2.0 * s0 * u - 4.0 * sb * t;
    const double gamma = u * u * (s0 * s0 - 4.0 * p0);
    const double disc = beta * beta - 4.0 * gamma;
    if (!(disc > 0.0)) throw DomainError("case1_xi2: branch points of the reduced curve are not real");
    const double sd = std::sqrt(disc);
    const double wq = 0.5 * (-beta + sd);
    const double wp = 0.5 * (-beta - sd);
    const cplx S = w / u + s0;
    const cplx root = std::sqrt(w - wp) * std::sqrt(w - wq) / u;
    const cplx eta1 = 0.5 * (S + root);
    return eta1 / w;
}

/// Parameters, phase, coefficients and branch points of one instance,
/// computed once.
class SpectralCurve {
public:
    explicit SpectralCurve(const ModelParams& mp, const GenericityTolerance& tol = {})
        : params_(mp), phase_(classify(mp, tol)), coeffs_(curve_coeffs(mp, phase_)),
          bp_(sqb::branch_points(mp, phase_)) {}

    const ModelParams& params() const { return params_; }
    Phase phase() const { return phase_; }
    const CurveCoeffs& coeffs() const { return coeffs_; }
    const BranchPoints& branch_points() const { return bp_; }

    XiBranches xi(cplx z, const XiOptions& opt = {}) const { return xi_branches(coeffs_, params_, z, opt); }

    /// Boundary values xi_j(x + i0). Labels come from continuation to
    /// x + i*delta, with delta shrunk well below the distance to the nearest
    /// branch point; the values are then snapped onto the exact roots at the
    /// real point x, so no O(delta) error remains.
    XiBranches xi_plus(double x) const {
        double dist = std::abs(x);
        for (double c : {-bp_.r1, -bp_.r3, bp_.p, bp_.q})
            if (c != 0.0) dist = std::min(dist, std::abs(x - c));
        XiOptions opt;
        opt.real_offset = real_axis_offset(x);
        if (dist > 0.0) opt.real_offset = std::min(opt.real_offset, 1e-3 * dist);
        auto xb = xi_branches(coeffs_, params_, cplx(x, 0.0), opt);
        const auto exact = quartic_roots(coeffs_, cplx(x, 0.0));
        const auto perm = detail::best_matching(exact, xb.xi);
        std::array<cplx, 4> snapped;
        for (int j = 0; j < 4; ++j) snapped[j] = exact[perm[j]];
        if (detail::unambiguous(xb.xi, snapped)) {
            for (int j = 0; j < 4; ++j) {
                // Real-axis roots: pairs are exact conjugates, singles exactly real.
                if (std::abs(snapped[j].imag()) <= 1e-14 * std::abs(snapped[j])) snapped[j].imag(0.0);
            }
            xb.xi = snapped;
        }
        return xb;
    }

private:
    ModelParams params_;
    Phase phase_;
    CurveCoeffs coeffs_;
    BranchPoints bp_;
};

inline XiBranches xi_branches(const ModelParams& mp, cplx z, Phase phase, const XiOptions& opt = {}) {
    return xi_branches(curve_coeffs(mp, phase), mp, z, opt);
}

}  // namespace sqb
