#pragma once

// Finite-n correlation kernel of the confluent squared Bessel path ensemble,
// obtained by biorthogonalizing the f- and g-bases numerically.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include "sqbessel/error.hpp"
#include "sqbessel/quadrature.hpp"
#include "sqbessel/spectral.hpp"
#include "sqbessel/specfun.hpp"

namespace sqb {

/// n paths from a at time 0 to b at time 1, observed at time params.t.
struct EnsembleSpec {
    int n = 2;
    double alpha = 0.0;
    ModelParams params;

    int n1() const { return n / 2; }
    int n2() const { return n / 2; }

    void validate() const {
        params.validate();
        static_cast<void>(BesselOrder(alpha));
        if (n < 2 || n % 2 != 0) throw DomainError("ensemble: n must be even and >= 2, got " + std::to_string(n));
    }
};

namespace detail {

inline void check_basis_index(const EnsembleSpec& s, int j, double x) {
    if (j < 1 || j > s.n) throw DomainError("basis index out of range: " + std::to_string(j));
    if (!(x > 0.0)) throw DomainError("basis functions need x > 0");
}

// log of x^{power} e^{-n x / tau} I_nu(2 n sqrt(c x) / tau)
inline SignedLog log_weight(double n, double power, double nu, double c, double tau, double x) {
    const SignedLog i = log_abs_bessel_i(nu, 2.0 * n * std::sqrt(c * x) / tau);
    return {power * std::log(x) - n * x / tau + i.log_abs, i.sign};
}

}  // namespace detail

/// f_{2i-1} = x^{i-1} w11, f_{2i} = x^{i-1} w12 (j is 1-based).
inline SignedLog basis_f(const EnsembleSpec& s, int j, double x) {
    detail::check_basis_index(s, j, x);
    const int i = (j + 1) / 2;
    const double al = s.alpha;
    const double t = s.params.t;
    SignedLog w = (j % 2 == 1) ? detail::log_weight(s.n, 0.5 * al, al, s.params.a, t, x)
                               : detail::log_weight(s.n, 0.5 * (al + 1.0), al + 1.0, s.params.a, t, x);
    w.log_abs += (i - 1) * std::log(x);
    return w;
}

/// g_{2i-1} = x^{i-1} w21, g_{2i} = x^{i-1} w22.
inline SignedLog basis_g(const EnsembleSpec& s, int j, double x) {
    detail::check_basis_index(s, j, x);
    const int i = (j + 1) / 2;
    const double al = s.alpha;
    const double u = 1.0 - s.params.t;
    SignedLog w = (j % 2 == 1) ? detail::log_weight(s.n, -0.5 * al, al, s.params.b, u, x)
                               : detail::log_weight(s.n, -0.5 * (al - 1.0), al - 1.0, s.params.b, u, x);
    w.log_abs += (i - 1) * std::log(x);
    return w;
}

/// Right end of the integration range: beyond it every product f_j g_k is
/// below `rel` times the largest value seen.
inline double kernel_cutoff(const EnsembleSpec& s, double rel = 1e-14) {
    s.validate();
    const double drop = -std::log(rel) + 4.0;
    auto envelope = [&](double x) {
        double bf = -std::numeric_limits<double>::infinity();
        double bg = bf;
        for (int j = 1; j <= s.n; ++j) {
            bf = std::max(bf, basis_f(s, j, x).log_abs);
            bg = std::max(bg, basis_g(s, j, x).log_abs);
        }
        return bf + bg;
    };
    double peak = -std::numeric_limits<double>::infinity();
    double x = 1e-3;
    for (; x < 1e7; x *= 1.05) {
        const double v = envelope(x);
        peak = std::max(peak, v);
        if (v < peak - drop && x > 1.0) break;
    }
    return x;
}

struct KernelOptions {
    int panels = 40;             ///< Gauss-Legendre panels (20 nodes each) in sqrt(x)
    bool orthonormalize = true;  ///< Arnoldi-orthonormalize each basis before forming the mixed Gram
    double max_condition = 1e12;
    double tail_rel = 1e-14;
};

/// Mixed Gram matrix after per-function rescaling:
/// G_jk = exp(-cf_j - cg_k) * int f_j g_k dx.
struct GramMatrix {
    Eigen::MatrixXd G;
    Eigen::VectorXd log_scale_f;
    Eigen::VectorXd log_scale_g;
    double cond_estimate = 0.0;
};

inline double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0.0;
    const double lo = sv(sv.size() - 1);
    return lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
}

namespace detail {

// The odd-index functions differ from the span of the even ones only where
// the weights are tiny, so the kernel is assembled in 113-bit arithmetic.
using kreal = boost::multiprecision::cpp_bin_float_quad;
using KVec = Eigen::Matrix<kreal, Eigen::Dynamic, 1>;
using KMat = Eigen::Matrix<kreal, Eigen::Dynamic, Eigen::Dynamic>;

// x^{power} e^{-n x / tau} I_nu(2 n sqrt(c x) / tau) e^{-shift}
inline kreal weight_value(double n, double power, double nu, double c, double tau, const kreal& x,
                          double shift) {
    using std::exp;
    using std::log;
    using std::sqrt;
    const kreal z = 2 * n * sqrt(c * x) / tau;
    const kreal i = boost::math::cyl_bessel_i(kreal(nu), z);
    return exp(power * log(x) - n * x / tau - shift) * i;
}

// Orthonormal basis of span{x^i u, x^i v : i < n/2} in a discrete inner
// product, built by block Arnoldi (multiply the vector two steps back by x,
// orthogonalize twice). The stored recurrence evaluates the same functions
// anywhere without forming monomials.
class ArnoldiBasis {
public:
    ArnoldiBasis() = default;

    ArnoldiBasis(const KVec& x, const KVec& u, const KVec& v, int n) : n_(n) {
        const Eigen::Index m = x.size();
        Q_.resize(m, n);
        H_ = KMat::Zero(n, n);
        for (int j = 0; j < n; ++j) {
            KVec w = j == 0 ? u : j == 1 ? v : KVec(x.cwiseProduct(Q_.col(j - 2)));
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i < j; ++i) {
                    const kreal h = Q_.col(i).dot(w);
                    H_(i, j) += h;
                    w -= h * Q_.col(i);
                }
            H_(j, j) = w.norm();
            if (!(H_(j, j) > 0)) throw IllConditioned("kernel basis: dependent functions");
            Q_.col(j) = w / H_(j, j);
        }
    }

    const KMat& nodes_matrix() const { return Q_; }

    /// Basis functions at x given the two seed functions there.
    KVec operator()(const kreal& x, const kreal& u, const kreal& v) const {
        KVec q(n_);
        for (int j = 0; j < n_; ++j) {
            kreal w = j == 0 ? u : j == 1 ? v : kreal(x * q(j - 2));
            for (int i = 0; i < j; ++i) w -= H_(i, j) * q(i);
            q(j) = w / H_(j, j);
        }
        return q;
    }

private:
    int n_ = 0;
    KMat Q_;
    KMat H_;
};

inline Eigen::MatrixXd to_double(const KMat& m) {
    Eigen::MatrixXd r(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = static_cast<double>(m(i, j));
    return r;
}

}  // namespace detail

/// K_n(x, y) = sum_{j,k} f_j(x) (G^{-1})_{kj} g_k(y).
class FiniteNKernel {
public:
    explicit FiniteNKernel(const EnsembleSpec& spec, const KernelOptions& opt = {}) : spec_(spec), opt_(opt) {
        using detail::kreal;
        using detail::KMat;
        using detail::KVec;
        spec_.validate();
        if (spec_.n > 24) throw DomainError("kernel: n > 24 is out of range");
        if (opt_.panels < 1) throw DomainError("kernel: panels must be positive");
        xmax_ = kernel_cutoff(spec_, opt_.tail_rel);
        const int n = spec_.n;

        // Composite 20-point Gauss-Legendre in s = sqrt(x), dx = 2 s ds.
        using GL = boost::math::quadrature::gauss<kreal, 20>;
        const auto& absc = GL::abscissa();
        const auto& wts = GL::weights();
        std::vector<kreal> xs, sw;
        const kreal h = kreal(std::sqrt(xmax_)) / opt_.panels;
        for (int p = 0; p < opt_.panels; ++p) {
            const kreal mid = (p + kreal(0.5)) * h;
            for (std::size_t i = 0; i < absc.size(); ++i) {
                const int reps = absc[i] == 0 ? 1 : 2;
                for (int r = 0; r < reps; ++r) {
                    const kreal s = r == 0 ? kreal(mid - h / 2 * absc[i]) : kreal(mid + h / 2 * absc[i]);
                    xs.push_back(s * s);
                    sw.push_back(sqrt(2 * s * h / 2 * wts[i]));
                }
            }
        }
        const Eigen::Index m = static_cast<Eigen::Index>(xs.size());

        // Per-seed scale so that values at the nodes peak near 1.
        for (int c = 0; c < 4; ++c) shift_[c] = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto l = log_weights(static_cast<double>(xs[i]));
            for (int c = 0; c < 4; ++c) shift_[c] = std::max(shift_[c], l[c]);
        }
        KVec X(m);
        KMat seeds(m, 4);
        for (Eigen::Index i = 0; i < m; ++i) {
            X(i) = xs[i];
            const auto w = weights(xs[i]);
            for (int c = 0; c < 4; ++c) seeds(i, c) = sw[i] * w[c];
        }

        // Gram of the rescaled raw bases, for reporting and the raw path.
        KMat F(m, n), Gm(m, n);
        for (Eigen::Index i = 0; i < m; ++i) {
            kreal pw = 1;
            for (int j = 0; j < n; j += 2) {
                F(i, j) = pw * seeds(i, 0);
                F(i, j + 1) = pw * seeds(i, 1);
                Gm(i, j) = pw * seeds(i, 2);
                Gm(i, j + 1) = pw * seeds(i, 3);
                pw *= X(i);
            }
        }
        raw_scale_f_.resize(n);
        raw_scale_g_.resize(n);
        for (int j = 0; j < n; ++j) {
            raw_scale_f_[j] = F.col(j).norm();
            raw_scale_g_[j] = Gm.col(j).norm();
            F.col(j) /= raw_scale_f_[j];
            Gm.col(j) /= raw_scale_g_[j];
        }
        const KMat G = F.transpose() * Gm;
        gram_.G = detail::to_double(G);
        gram_.log_scale_f.resize(n);
        gram_.log_scale_g.resize(n);
        for (int j = 0; j < n; ++j) {
            gram_.log_scale_f(j) = shift_[j % 2] + static_cast<double>(log(raw_scale_f_[j]));
            gram_.log_scale_g(j) = shift_[2 + j % 2] + static_cast<double>(log(raw_scale_g_[j]));
        }
        gram_.cond_estimate = condition_number(gram_.G);

        if (opt_.orthonormalize) {
            bf_ = detail::ArnoldiBasis(X, seeds.col(0), seeds.col(1), n);
            bg_ = detail::ArnoldiBasis(X, seeds.col(2), seeds.col(3), n);
            const KMat H = bf_.nodes_matrix().transpose() * bg_.nodes_matrix();
            mixed_cond_ = condition_number(detail::to_double(H));
            if (mixed_cond_ > opt_.max_condition)
                throw IllConditioned("kernel: mixed Gram condition " + std::to_string(mixed_cond_));
            Minv_t_ = H.partialPivLu().inverse().transpose();
        } else {
            mixed_cond_ = gram_.cond_estimate;
            if (gram_.cond_estimate > opt_.max_condition)
                throw IllConditioned("kernel: Gram condition " + std::to_string(gram_.cond_estimate) +
                                     "; reduce n or orthonormalize");
            Minv_t_ = G.partialPivLu().inverse().transpose();
        }
    }

    const EnsembleSpec& spec() const { return spec_; }
    const GramMatrix& gram() const { return gram_; }
    double cutoff() const { return xmax_; }
    /// Condition number of the matrix actually inverted.
    double condition() const { return mixed_cond_; }

    double operator()(double x, double y) const {
        if (!(x > 0.0) || !(y > 0.0)) throw DomainError("kernel: need x, y > 0");
        return static_cast<double>(side(x, true).dot(Minv_t_ * side(y, false)));
    }

    double diagonal(double x) const { return (*this)(x, x); }
    double mean_density(double x) const { return diagonal(x) / spec_.n; }

private:
    // log w11, log w12, log w21, log w22 (double precision, for scaling only)
    std::array<double, 4> log_weights(double x) const {
        const double al = spec_.alpha;
        const double n = spec_.n;
        const auto& mp = spec_.params;
        const double u = 1.0 - mp.t;
        return {detail::log_weight(n, 0.5 * al, al, mp.a, mp.t, x).log_abs,
                detail::log_weight(n, 0.5 * (al + 1.0), al + 1.0, mp.a, mp.t, x).log_abs,
                detail::log_weight(n, -0.5 * al, al, mp.b, u, x).log_abs,
                detail::log_weight(n, -0.5 * (al - 1.0), al - 1.0, mp.b, u, x).log_abs};
    }

    std::array<detail::kreal, 4> weights(const detail::kreal& x) const {
        const double al = spec_.alpha;
        const double n = spec_.n;
        const auto& mp = spec_.params;
        const double u = 1.0 - mp.t;
        return {detail::weight_value(n, 0.5 * al, al, mp.a, mp.t, x, shift_[0]),
                detail::weight_value(n, 0.5 * (al + 1.0), al + 1.0, mp.a, mp.t, x, shift_[1]),
                detail::weight_value(n, -0.5 * al, al, mp.b, u, x, shift_[2]),
                detail::weight_value(n, -0.5 * (al - 1.0), al - 1.0, mp.b, u, x, shift_[3])};
    }

    detail::KVec side(double xd, bool f_side) const {
        const detail::kreal x = xd;
        const auto w = weights(x);
        const int o = f_side ? 0 : 2;
        if (opt_.orthonormalize) return (f_side ? bf_ : bg_)(x, w[o], w[o + 1]);
        detail::KVec r(spec_.n);
        detail::kreal pw = 1;
        for (int j = 0; j < spec_.n; j += 2) {
            r(j) = pw * w[o] / (f_side ? raw_scale_f_[j] : raw_scale_g_[j]);
            r(j + 1) = pw * w[o + 1] / (f_side ? raw_scale_f_[j + 1] : raw_scale_g_[j + 1]);
            pw *= x;
        }
        return r;
    }

    EnsembleSpec spec_;
    KernelOptions opt_;
    double xmax_ = 0.0;
    std::array<double, 4> shift_{};
    GramMatrix gram_;
    std::vector<detail::kreal> raw_scale_f_, raw_scale_g_;
    detail::ArnoldiBasis bf_, bg_;
    detail::KMat Minv_t_;
    double mixed_cond_ = 0.0;
};

/// Raw (rescaled) Gram matrix; refuses to hand out a matrix too close to
/// singular to invert.
inline GramMatrix gram(const EnsembleSpec& spec, const KernelOptions& opt = {}) {
    KernelOptions o = opt;
    o.orthonormalize = true;
    GramMatrix g = FiniteNKernel(spec, o).gram();
    if (g.cond_estimate > opt.max_condition)
        throw IllConditioned("gram: condition " + std::to_string(g.cond_estimate) + "; reduce n or orthonormalize");
    return g;
}

inline double kernel(const EnsembleSpec& spec, double x, double y, const KernelOptions& opt = {}) {
    return FiniteNKernel(spec, opt)(x, y);
}

inline double mean_density(const EnsembleSpec& spec, double x, const KernelOptions& opt = {}) {
    return FiniteNKernel(spec, opt).mean_density(x);
}

}  // namespace sqb
