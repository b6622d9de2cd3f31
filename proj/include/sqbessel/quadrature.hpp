#pragma once

// Thin wrappers over Boost.Math quadrature plus fixed Gauss-Legendre panels.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace sqb::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
};

/// Double-exponential rule on a finite interval; tolerates integrable
/// endpoint singularities (algebraic, logarithmic).
template <class F>
Result tanh_sinh(F&& f, double a, double b, double tol = 1e-12) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
    if (a == b) return {};
    Result r;
    double l1 = 0.0;
    r.value = integrator.integrate(std::forward<F>(f), a, b, tol, &r.error, &l1);
    return r;
}

/// Adaptive Gauss-Kronrod (15-point) for smooth integrands.
template <class F>
Result kronrod(F&& f, double a, double b, double tol = 1e-12, unsigned max_depth = 25) {
    Result r;
    if (a == b) return r;
    r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(std::forward<F>(f), a, b,
                                                                           max_depth, tol, &r.error);
    return r;
}

/// Nodes and weights of a composite Gauss-Legendre rule with `panels`
/// equal panels of 20 points on [a, b].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_panels(double a, double b,
                                                                                 int panels) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const auto& absc = GL::abscissa();
    const auto& wts = GL::weights();
    std::vector<double> x;
    std::vector<double> w;
    x.reserve(20 * panels);
    w.reserve(20 * panels);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        for (std::size_t i = 0; i < absc.size(); ++i) {
            if (absc[i] == 0.0) {
                x.push_back(mid);
                w.push_back(half * wts[i]);
            } else {
                x.push_back(mid - half * absc[i]);
                w.push_back(half * wts[i]);
                x.push_back(mid + half * absc[i]);
                w.push_back(half * wts[i]);
            }
        }
    }
    return {std::move(x), std::move(w)};
}

/// Fixed 8-point Gauss-Legendre on [a, b].
template <class F>
double gauss8(F&& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 8>::integrate(std::forward<F>(f), a, b);
}

}  // namespace sqb::quad
