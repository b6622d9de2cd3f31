#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace sqb {

/// Chebyshev interpolant on [lo, hi] built adaptively on nested
/// first-kind grids (9, 27, 81, ... points) until the trailing coefficients
/// fall below `rel_tol` of the largest one. The nodes never touch the
/// interval ends, so f may have removable 0/0 forms there.
class ChebyshevTable {
public:
    ChebyshevTable() = default;

    template <class F>
    static ChebyshevTable build(F&& f, double lo, double hi, double rel_tol = 1e-12, int max_points = 2187) {
        ChebyshevTable t;
        t.lo_ = lo;
        t.hi_ = hi;
        int n = 9;
        std::vector<double> values(n);
        for (int j = 0; j < n; ++j) values[j] = f(t.node(j, n));
        for (;;) {
            t.coeffs_ = coefficients(values);
            double cmax = 0.0;
            for (double c : t.coeffs_) cmax = std::max(cmax, std::abs(c));
            double tail = 0.0;
            const int m = static_cast<int>(t.coeffs_.size());
            for (int k = m - std::max(3, m / 8); k < m; ++k) tail = std::max(tail, std::abs(t.coeffs_[k]));
            t.tail_ = cmax > 0.0 ? tail / cmax : 0.0;
            if (tail <= rel_tol * cmax || 3 * n > max_points) break;
            // Old node j is new node 3j + 1.
            const int n3 = 3 * n;
            std::vector<double> v3(n3);
            for (int j = 0; j < n3; ++j) v3[j] = (j % 3 == 1) ? values[j / 3] : f(t.node(j, n3));
            values = std::move(v3);
            n = n3;
        }
        double cmax = 0.0;
        for (double c : t.coeffs_) cmax = std::max(cmax, std::abs(c));
        while (t.coeffs_.size() > 2 && std::abs(t.coeffs_.back()) < 1e-17 * cmax) t.coeffs_.pop_back();
        return t;
    }

    double operator()(double x) const {
        const double s = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
        double b1 = 0.0;
        double b2 = 0.0;
        for (std::size_t k = coeffs_.size(); k-- > 1;) {
            const double b0 = coeffs_[k] + 2.0 * s * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        return coeffs_.empty() ? 0.0 : coeffs_[0] + s * b1 - b2;
    }

    std::size_t size() const { return coeffs_.size(); }
    /// Relative size of the trailing coefficients at the final resolution.
    double tail_ratio() const { return tail_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double node(int j, int n) const {
        const double s = -std::cos(std::numbers::pi * (2.0 * j + 1.0) / (2.0 * n));
        return 0.5 * (lo_ + hi_) + 0.5 * (hi_ - lo_) * s;
    }

    // Values at s_j = -cos(pi (2j+1) / 2n) to coefficients (DCT-II).
    static std::vector<double> coefficients(const std::vector<double>& v) {
        const int n = static_cast<int>(v.size());
        std::vector<double> cosines(4 * n);
        for (int m = 0; m < 4 * n; ++m) cosines[m] = std::cos(std::numbers::pi * m / (2.0 * n));
        std::vector<double> c(n, 0.0);
        for (int k = 0; k < n; ++k) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) sum += v[j] * cosines[(static_cast<long>(k) * (2 * j + 1)) % (4 * n)];
            c[k] = ((k % 2 == 0) ? 2.0 : -2.0) * sum / n;
        }
        c[0] *= 0.5;
        return c;
    }

    double lo_ = -1.0;
    double hi_ = 1.0;
    double tail_ = 0.0;
    std::vector<double> coeffs_;
};

}  // namespace sqb
