#pragma once

// Metropolis-Hastings sampling of the path positions at one time, and
// sequential slice sampling of whole path fans.

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sqbessel/error.hpp"
#include "sqbessel/kernel.hpp"
#include "sqbessel/specfun.hpp"

namespace sqb {

struct SliceSample {
    double time = 0.0;
    std::vector<double> positions;  ///< strictly increasing, > 0
};

/// log|det[phi_j(x_k)]| where column k is produced by `column(x_k, out)`
/// as log-magnitudes with signs. Each column is shifted by its maximum
/// before the LU so the determinant never overflows.
using LogColumn = std::function<void(double, Eigen::Ref<Eigen::VectorXd>, Eigen::Ref<Eigen::VectorXi>)>;

namespace detail {

inline double log_abs_det(const Eigen::MatrixXd& logs, const Eigen::MatrixXi& signs) {
    const Eigen::Index n = logs.rows();
    Eigen::MatrixXd m(n, n);
    double shift = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double c = logs.col(k).maxCoeff();
        if (!std::isfinite(c)) return -std::numeric_limits<double>::infinity();
        shift += c;
        for (Eigen::Index j = 0; j < n; ++j) m(j, k) = signs(j, k) * std::exp(logs(j, k) - c);
    }
    // Row equilibration; the factors go back into the log.
    Eigen::VectorXd rs = m.rowwise().lpNorm<Eigen::Infinity>();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(rs(j) > 0.0)) return -std::numeric_limits<double>::infinity();
        m.row(j) /= rs(j);
        shift += std::log(rs(j));
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    const auto& u = lu.matrixLU();
    double s = shift;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = std::abs(u(i, i));
        if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
        s += std::log(d);
    }
    return s;
}

}  // namespace detail

/// Target density proportional to |det A(x)| |det B(x)| on ordered n-tuples.
class DeterminantalTarget {
public:
    DeterminantalTarget(int n, LogColumn a, LogColumn b) : n_(n), a_(std::move(a)), b_(std::move(b)) {}

    int size() const { return n_; }

    /// Throws DegenerateDeterminant when either determinant vanishes or
    /// underflows.
    double log_density(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != n_) throw DomainError("target: wrong number of points");
        Eigen::MatrixXd la(n_, n_), lb(n_, n_);
        Eigen::MatrixXi sa(n_, n_), sb(n_, n_);
        for (int k = 0; k < n_; ++k) {
            if (!(x[k] > 0.0)) throw DegenerateDeterminant("target: points must be positive");
            a_(x[k], la.col(k), sa.col(k));
            b_(x[k], lb.col(k), sb.col(k));
        }
        const double v = detail::log_abs_det(la, sa) + detail::log_abs_det(lb, sb);
        if (!std::isfinite(v)) throw DegenerateDeterminant("target: determinant underflow");
        return v;
    }

private:
    int n_;
    LogColumn a_;
    LogColumn b_;
};

/// det[f_j(x_k)] det[g_j(x_k)] at time spec.params.t.
inline DeterminantalTarget slice_target(const EnsembleSpec& spec) {
    spec.validate();
    auto fcol = [spec](double x, Eigen::Ref<Eigen::VectorXd> l, Eigen::Ref<Eigen::VectorXi> s) {
        for (int j = 0; j < spec.n; ++j) {
            const SignedLog v = basis_f(spec, j + 1, x);
            l(j) = v.log_abs;
            s(j) = v.sign;
        }
    };
    auto gcol = [spec](double x, Eigen::Ref<Eigen::VectorXd> l, Eigen::Ref<Eigen::VectorXi> s) {
        for (int j = 0; j < spec.n; ++j) {
            const SignedLog v = basis_g(spec, j + 1, x);
            l(j) = v.log_abs;
            s(j) = v.sign;
        }
    };
    return DeterminantalTarget(spec.n, fcol, gcol);
}

/// Metropolis acceptance probability min(1, pi(to) / pi(from)); zero when
/// `to` is degenerate.
inline double acceptance_probability(const DeterminantalTarget& target, const std::vector<double>& from,
                                     const std::vector<double>& to) {
    double lt;
    try {
        lt = target.log_density(to);
    } catch (const DegenerateDeterminant&) {
        return 0.0;
    }
    const double d = lt - target.log_density(from);
    return d >= 0.0 ? 1.0 : std::exp(d);
}

inline double acceptance_probability(const EnsembleSpec& spec, const std::vector<double>& from,
                                     const std::vector<double>& to) {
    return acceptance_probability(slice_target(spec), from, to);
}

struct McmcOptions {
    int samples = 1000;       ///< recorded states
    int thin = 5;             ///< sweeps between recorded states
    int burn_in = 500;        ///< sweeps before recording; the proposal scale adapts only here
    double initial_scale = 0.0;  ///< proposal standard deviation; 0 picks one from the parameters
    double target_acceptance = 0.3;
    bool adapt = true;
};

struct McmcResult {
    std::vector<SliceSample> samples;
    double acceptance_rate = 0.0;  ///< after burn-in
    double proposal_scale = 0.0;
    bool mixing_warning = false;   ///< acceptance outside [0.1, 0.6]
    long degenerate_proposals = 0;
};

/// Single-coordinate random-walk MH on configurations. A move replaces one
/// point by |x + sigma Z| and re-sorts; the density is symmetric in the
/// points, so this is a symmetric proposal on ordered tuples.
class MhChain {
public:
    MhChain(DeterminantalTarget target, std::vector<double> start, double scale, std::uint64_t seed)
        : target_(std::move(target)), x_(std::move(start)), scale_(scale), rng_(seed) {
        std::sort(x_.begin(), x_.end());
        logp_ = target_.log_density(x_);
    }

    const std::vector<double>& state() const { return x_; }
    double scale() const { return scale_; }

    /// One sweep of n proposals; returns the number accepted.
    int sweep() {
        const int n = target_.size();
        int acc = 0;
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int s = 0; s < n; ++s) {
            const int k = pick(rng_);
            std::vector<double> y = x_;
            y[k] = std::abs(y[k] + scale_ * normal_(rng_));
            const double u = unif_(rng_);
            if (!(y[k] > 0.0)) continue;
            std::sort(y.begin(), y.end());
            double ly;
            try {
                ly = target_.log_density(y);
            } catch (const DegenerateDeterminant&) {
                ++degenerate_;
                continue;
            }
            if (std::log(u) < ly - logp_) {
                x_ = std::move(y);
                logp_ = ly;
                ++acc;
            }
        }
        accepted_ += acc;
        proposed_ += n;
        return acc;
    }

    /// Burn-in with Robbins-Monro adaptation of log(scale) toward `target`.
    void burn_in(int sweeps, bool adapt, double target) {
        const int n = target_.size();
        for (int i = 0; i < sweeps; ++i) {
            const double rate = static_cast<double>(sweep()) / n;
            if (adapt) scale_ *= std::exp((rate - target) / std::sqrt(1.0 + i));
        }
    }

    long degenerate_proposals() const { return degenerate_; }
    /// Acceptance rate over every sweep so far.
    double acceptance_rate() const { return proposed_ > 0 ? static_cast<double>(accepted_) / proposed_ : 0.0; }

private:
    DeterminantalTarget target_;
    std::vector<double> x_;
    double logp_ = 0.0;
    double scale_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    long accepted_ = 0;
    long proposed_ = 0;
    long degenerate_ = 0;
};

namespace detail {

inline double default_scale(const EnsembleSpec& spec) {
    const double s = std::sqrt(std::max(spec.params.a, spec.params.b)) + 1.0;
    return 0.5 * s * s / spec.n;
}

inline std::vector<double> spread_start(const EnsembleSpec& spec) {
    const double s = std::sqrt(std::max(spec.params.a, spec.params.b)) + 1.0;
    std::vector<double> x(spec.n);
    for (int k = 0; k < spec.n; ++k) x[k] = s * s * (k + 1.0) / (spec.n + 1.0);
    return x;
}

}  // namespace detail

/// Samples of the positions at time spec.params.t.
inline McmcResult mcmc_positions(const EnsembleSpec& spec, const McmcOptions& opt, std::uint64_t seed) {
    spec.validate();
    if (spec.n > 10) throw DomainError("mcmc_positions: n <= 10 required for practical mixing");
    if (opt.samples < 0 || opt.thin < 1 || opt.burn_in < 0) throw DomainError("mcmc_positions: bad options");
    const double scale = opt.initial_scale > 0.0 ? opt.initial_scale : detail::default_scale(spec);
    MhChain chain(slice_target(spec), detail::spread_start(spec), scale, seed);
    chain.burn_in(opt.burn_in, opt.adapt, opt.target_acceptance);

    McmcResult r;
    r.proposal_scale = chain.scale();
    r.samples.reserve(opt.samples);
    long accepted = 0;
    long proposed = 0;
    for (int s = 0; s < opt.samples; ++s) {
        for (int k = 0; k < opt.thin; ++k) {
            accepted += chain.sweep();
            proposed += spec.n;
        }
        r.samples.push_back({spec.params.t, chain.state()});
    }
    r.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
    r.mixing_warning = r.acceptance_rate < 0.1 || r.acceptance_rate > 0.6;
    r.degenerate_proposals = chain.degenerate_proposals();
    return r;
}

struct PathEnsemble {
    std::vector<double> time_grid;  ///< 0, the requested times, 1
    Eigen::MatrixXd paths;          ///< n x time_grid.size()
    std::uint64_t seed = 0;
    bool mixing_warning = false;
};

/// Slices at the requested times: the first from the single-time target,
/// each later one from det[p_dt(x_i, y_j)] det[g_j(y_k)] started at the
/// previous slice. Times are in the rescaled clock (dt -> dt / 2n).
inline PathEnsemble path_ensemble(const EnsembleSpec& spec, const std::vector<double>& times,
                                  const McmcOptions& opt, std::uint64_t seed) {
    spec.validate();
    if (spec.n > 10) throw DomainError("path_ensemble: n <= 10 required");
    if (times.empty()) throw DomainError("path_ensemble: empty time grid");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0 && times[i] < 1.0)) throw DomainError("path_ensemble: times must lie in (0, 1)");
        if (i > 0 && !(times[i] > times[i - 1])) throw DomainError("path_ensemble: times must increase");
    }
    const int n = spec.n;
    const BesselOrder alpha(spec.alpha);

    PathEnsemble pe;
    pe.seed = seed;
    pe.time_grid.reserve(times.size() + 2);
    pe.time_grid.push_back(0.0);
    pe.time_grid.insert(pe.time_grid.end(), times.begin(), times.end());
    pe.time_grid.push_back(1.0);
    pe.paths.resize(n, static_cast<Eigen::Index>(pe.time_grid.size()));
    pe.paths.col(0).setConstant(spec.params.a);
    pe.paths.col(pe.paths.cols() - 1).setConstant(spec.params.b);

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::vector<std::uint64_t> seeds(times.size());
    {
        std::vector<std::uint32_t> raw(2 * times.size());
        seq.generate(raw.begin(), raw.end());
        for (std::size_t i = 0; i < times.size(); ++i)
            seeds[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
    }

    EnsembleSpec first = spec;
    first.params.t = times[0];
    McmcOptions o1 = opt;
    o1.samples = 1;
    o1.thin = 1;
    McmcResult r1 = mcmc_positions(first, o1, seeds[0]);
    pe.mixing_warning = r1.mixing_warning;
    std::vector<double> x = r1.samples.back().positions;
    double scale = r1.proposal_scale;
    for (int k = 0; k < n; ++k) pe.paths(k, 1) = x[k];

    for (std::size_t m = 1; m < times.size(); ++m) {
        const double tau = (times[m] - times[m - 1]) / (2.0 * n);
        EnsembleSpec next = spec;
        next.params.t = times[m];
        const std::vector<double> prev = x;
        auto pcol = [prev, tau, alpha](double y, Eigen::Ref<Eigen::VectorXd> l, Eigen::Ref<Eigen::VectorXi> s) {
            for (std::size_t i = 0; i < prev.size(); ++i) {
                l(static_cast<Eigen::Index>(i)) = log_transition_density(alpha, tau, prev[i], y);
                s(static_cast<Eigen::Index>(i)) = 1;
            }
        };
        auto gcol = [next](double y, Eigen::Ref<Eigen::VectorXd> l, Eigen::Ref<Eigen::VectorXi> s) {
            for (int j = 0; j < next.n; ++j) {
                const SignedLog v = basis_g(next, j + 1, y);
                l(j) = v.log_abs;
                s(j) = v.sign;
            }
        };
        // Step size on the scale of the increment's spread.
        const double local = std::min(scale, 4.0 * std::sqrt(tau * (1.0 + *std::max_element(prev.begin(), prev.end()))));
        MhChain chain(DeterminantalTarget(n, pcol, gcol), prev, local, seeds[m]);
        chain.burn_in(opt.burn_in, opt.adapt, opt.target_acceptance);
        for (int k = 0; k < opt.thin; ++k) chain.sweep();
        const double rate = chain.acceptance_rate();
        pe.mixing_warning = pe.mixing_warning || rate < 0.1 || rate > 0.6;
        x = chain.state();
        for (int k = 0; k < n; ++k) pe.paths(k, static_cast<Eigen::Index>(m) + 1) = x[k];
    }
    return pe;
}

/// Long format: time,path_index,position; the seed goes in a leading comment.
inline void write_csv(std::ostream& os, const PathEnsemble& pe) {
    char buf[64];
    os << "# seed=" << pe.seed << '\n' << "time,path_index,position\n";
    for (Eigen::Index c = 0; c < pe.paths.cols(); ++c)
        for (Eigen::Index k = 0; k < pe.paths.rows(); ++k) {
            std::snprintf(buf, sizeof buf, "%.16e", pe.time_grid[static_cast<std::size_t>(c)]);
            os << buf << ',' << k << ',';
            std::snprintf(buf, sizeof buf, "%.16e", pe.paths(k, c));
            os << buf << '\n';
        }
}

}  // namespace sqb
