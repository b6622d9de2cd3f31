#pragma once

// Modified Bessel function of the first kind I_nu(x) for real order and
// non-negative argument, and the squared Bessel transition density built on it.

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sqbessel/error.hpp"

namespace sqb {

/// Bessel order nu > -1.
class BesselOrder {
public:
    explicit BesselOrder(double nu) : nu_(nu) {
        if (!std::isfinite(nu) || nu <= -1.0) {
            std::ostringstream os;
            os << "Bessel order must be finite and > -1, got " << nu;
            throw DomainError(os.str());
        }
    }
    double value() const noexcept { return nu_; }

private:
    double nu_;
};

/// log|value| together with its sign; used wherever quantities span hundreds
/// of orders of magnitude.
struct SignedLog {
    double log_abs = -std::numeric_limits<double>::infinity();
    int sign = 0;

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};

namespace detail {

inline constexpr double kSeriesSwitch = 30.0;

// Power series for x <= kSeriesSwitch, nu > -1: all terms are positive.
inline double log_bessel_i_series(double nu, double x) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 10000; ++k) {
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) + std::log(sum);
}

// Series summed outward from its largest term, entirely in log space.
// Exact but O(x) terms; used only when the asymptotic series cannot reach
// full accuracy (large order relative to the argument).
inline double log_bessel_i_series_scaled(double nu, double x) {
    const double half = 0.5 * x;
    const double q = half * half;
    double kstar = std::floor(0.5 * (-(nu + 2.0) + std::sqrt(nu * nu + 4.0 * q)));
    if (kstar < 0.0) kstar = 0.0;
    const double log_peak =
        (2.0 * kstar + nu) * std::log(half) - std::lgamma(kstar + 1.0) - std::lgamma(kstar + nu + 1.0);
    double sum = 1.0;
    double term = 1.0;
    for (double k = kstar; k < kstar + 1e7; k += 1.0) {
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    term = 1.0;
    for (double k = kstar; k > 0.0; k -= 1.0) {
        term *= (k * (k + nu)) / q;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return log_peak + std::log(sum);
}

// Large-argument asymptotic expansion
//   I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k.
// Returns false when the series does not reach ~1e-16 before diverging.
inline bool log_bessel_i_asymptotic(double nu, double x, double& out) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0;
    double sum = 1.0;
    double prev_abs = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * k * x);
        const double a = std::abs(term);
        if (a > prev_abs) return false;
        sum += term;
        if (a < 1e-17 * std::abs(sum)) {
            out = x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
            return true;
        }
        prev_abs = a;
    }
    return false;
}

inline double log_bessel_i_positive_order(double nu, double x) {
    if (x <= kSeriesSwitch) return log_bessel_i_series(nu, x);
    double out = 0.0;
    if (log_bessel_i_asymptotic(nu, x, out)) return out;
    return log_bessel_i_series_scaled(nu, x);
}

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace detail

/// I_nu(x), or log I_nu(x) when `log_scaled` is set.
///
/// Power series up to x = 30, large-argument asymptotic expansion beyond.
/// The non-log form overflows to +inf past x ~ 700; ensemble code always
/// uses the log form.
inline double bessel_i(BesselOrder order, double x, bool log_scaled = false) {
    const double nu = order.value();
    if (!(x >= 0.0) || !std::isfinite(x)) {
        std::ostringstream os;
        os << "bessel_i: argument must be finite and >= 0, got " << x;
        throw DomainError(os.str());
    }
    if (x == 0.0) {
        if (nu == 0.0) return log_scaled ? 0.0 : 1.0;
        if (nu > 0.0) return log_scaled ? -std::numeric_limits<double>::infinity() : 0.0;
        return std::numeric_limits<double>::infinity();
    }
    const double l = detail::log_bessel_i_positive_order(nu, x);
    return log_scaled ? l : std::exp(l);
}

inline double bessel_i(double nu, double x, bool log_scaled = false) {
    return bessel_i(BesselOrder(nu), x, log_scaled);
}

/// Signed log of I_nu(x) for nu > -2 and x > 0.
///
/// Orders in (-2, -1] appear in the g-basis (I_{alpha-1}); negative integer
/// orders reduce to I_{|nu|}, other orders below -1 can make I_nu negative
/// near the origin.
inline SignedLog log_abs_bessel_i(double nu, double x) {
    if (!(x > 0.0) || !(nu > -2.0)) throw DomainError("log_abs_bessel_i: need x > 0 and nu > -2");
    if (nu == -1.0) nu = 1.0;
    if (nu > -1.0) return {detail::log_bessel_i_positive_order(nu, x), 1};

    // nu in (-2, -1), non-integer.
    if (x <= detail::kSeriesSwitch) {
        const double q = 0.25 * x * x;
        // k = 0 term is the only negative one since Gamma(nu + 1) < 0.
        const double t0 = std::exp(nu * std::log(0.5 * x)) / std::tgamma(nu + 1.0);
        double term = std::exp(nu * std::log(0.5 * x) + std::log(q) - std::lgamma(nu + 2.0));
        double rest = term;
        for (int k = 1; k < 10000; ++k) {
            term *= q / ((k + 1.0) * (k + nu + 1.0));
            rest += term;
            if (term < 1e-17 * rest) break;
        }
        const double v = t0 + rest;
        if (v == 0.0) return {};
        return {std::log(std::abs(v)), v > 0 ? 1 : -1};
    }
    // I_nu = I_{nu+2} + 2 (nu + 1) / x * I_{nu+1}; the second term is a small
    // negative correction for large x.
    const double l2 = detail::log_bessel_i_positive_order(nu + 2.0, x);
    const double l1 = detail::log_bessel_i_positive_order(nu + 1.0, x);
    const double ratio = 2.0 * (nu + 1.0) / x * std::exp(l1 - l2);
    return {l2 + std::log1p(ratio), 1};
}

/// log p_tau^alpha(x, y) of the squared Bessel process.
inline double log_transition_density(BesselOrder alpha, double tau, double x, double y) {
    if (!(tau > 0.0) || !(x >= 0.0) || !(y > 0.0)) {
        std::ostringstream os;
        os << "transition_density: need tau > 0, x >= 0, y > 0 (tau=" << tau << ", x=" << x
           << ", y=" << y << ")";
        throw DomainError(os.str());
    }
    const double a = alpha.value();
    if (x == 0.0) {
        return a * std::log(y) - (a + 1.0) * std::log(2.0 * tau) - std::lgamma(a + 1.0) - y / (2.0 * tau);
    }
    const double arg = std::sqrt(x * y) / tau;
    return -std::log(2.0 * tau) + 0.5 * a * (std::log(y) - std::log(x)) - (x + y) / (2.0 * tau) +
           detail::log_bessel_i_positive_order(a, arg);
}

/// p_tau^alpha(x, y); the x = 0 case uses the Gamma-function form.
inline double transition_density(BesselOrder alpha, double tau, double x, double y) {
    return std::exp(log_transition_density(alpha, tau, x, y));
}

}  // namespace sqb
