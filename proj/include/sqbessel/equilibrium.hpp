#pragma once

// Direct minimisation of the discretised vector equilibrium problem: an
// oracle for the spectral-curve densities that shares no code path with them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "sqbessel/error.hpp"
#include "sqbessel/measures.hpp"
#include "sqbessel/quadrature.hpp"
#include "sqbessel/spectral.hpp"

namespace sqb {

struct GridSpec {
    std::vector<double> neg_edges;  ///< ascending, -M .. 0
    std::vector<double> pos_edges;  ///< ascending, 0 .. L

    int neg_cells() const { return static_cast<int>(neg_edges.size()) - 1; }
    int pos_cells() const { return static_cast<int>(pos_edges.size()) - 1; }
    double M() const { return -neg_edges.front(); }
    double L() const { return pos_edges.back(); }

    void validate() const {
        auto check = [](const std::vector<double>& e, const char* what) {
            if (e.size() < 2) throw DomainError(std::string("grid: ") + what + " needs at least one cell");
            for (std::size_t i = 0; i + 1 < e.size(); ++i)
                if (!(e[i] < e[i + 1])) throw DomainError(std::string("grid: ") + what + " edges must increase");
        };
        check(neg_edges, "negative");
        check(pos_edges, "positive");
        if (neg_edges.back() != 0.0 || pos_edges.front() != 0.0)
            throw DomainError("grid: cells must meet at 0");
    }
};

/// Upper bound for q that does not consult the spectral curve.
inline double crude_support_bound(const ModelParams& mp) {
    const double s = std::max(std::sqrt(mp.a), std::sqrt(mp.b)) + 1.0;
    return s * s;
}

/// Geometric negative cells on [-M, 0] spanning `decades` decades down to
/// the first cell, positive edges L (k/n)^grading on [0, L]. M and L default to
/// 1e3 * max(1, Q) and 2 Q with Q = crude_support_bound.
inline GridSpec make_grid(const ModelParams& mp, int neg_cells, int pos_cells, double M = 0.0, double L = 0.0,
                          double decades = 8.0, double grading = 2.0) {
    mp.validate();
    if (neg_cells < 1 || pos_cells < 1) throw DomainError("make_grid: cell counts must be positive");
    if (!(grading >= 1.0)) throw DomainError("make_grid: grading must be >= 1");
    const double Q = crude_support_bound(mp);
    if (M <= 0.0) M = 1e3 * std::max(1.0, Q);
    if (L <= 0.0) L = 2.0 * Q;
    GridSpec g;
    g.neg_edges.resize(neg_cells + 1);
    g.neg_edges[0] = -M;
    for (int k = 1; k < neg_cells; ++k)
        g.neg_edges[k] = -M * std::pow(10.0, -decades * static_cast<double>(k) / (neg_cells - 1));
    g.neg_edges[neg_cells] = 0.0;
    if (neg_cells == 1) g.neg_edges = {-M, 0.0};
    g.pos_edges.resize(pos_cells + 1);
    // Power grading resolves a possible x^{-1/2} hard edge at 0.
    for (int k = 0; k <= pos_cells; ++k)
        g.pos_edges[k] = L * std::pow(static_cast<double>(k) / pos_cells, grading);
    g.validate();
    return g;
}

struct DiscreteMeasureTriple {
    Eigen::VectorXd w1;  ///< nu1 on the negative cells
    Eigen::VectorXd w2;  ///< nu2 on the positive cells
    Eigen::VectorXd w3;  ///< nu3 on the negative cells
};

/// Interaction matrices, external field and caps on one grid.
struct EquilibriumProblem {
    ModelParams params;
    GridSpec grid;
    Eigen::MatrixXd Kn;  ///< log interaction among negative cells
    Eigen::MatrixXd Kp;  ///< among positive cells
    Eigen::MatrixXd Kx;  ///< negative x positive
    Eigen::VectorXd V;   ///< external field at positive midpoints
    Eigen::VectorXd caps1;
    Eigen::VectorXd caps3;
    Eigen::VectorXd mid_neg;
    Eigen::VectorXd mid_pos;
    Eigen::VectorXd width_neg;
    Eigen::VectorXd width_pos;
};

namespace detail {

inline void cells(const std::vector<double>& e, Eigen::VectorXd& mid, Eigen::VectorXd& width) {
    const int n = static_cast<int>(e.size()) - 1;
    mid.resize(n);
    width.resize(n);
    for (int i = 0; i < n; ++i) {
        mid[i] = 0.5 * (e[i] + e[i + 1]);
        width[i] = e[i + 1] - e[i];
    }
}

// Self-interaction -log(width) + 3/2 on the diagonal, midpoint rule elsewhere.
inline Eigen::MatrixXd log_interaction(const Eigen::VectorXd& mid, const Eigen::VectorXd& width) {
    const int n = static_cast<int>(mid.size());
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i) {
        K(i, i) = -std::log(width[i]) + 1.5;
        for (int k = i + 1; k < n; ++k) K(i, k) = K(k, i) = -std::log(std::abs(mid[i] - mid[k]));
    }
    return K;
}

}  // namespace detail

inline EquilibriumProblem discretize(const ModelParams& mp, const GridSpec& grid) {
    mp.validate();
    grid.validate();
    EquilibriumProblem pb;
    pb.params = mp;
    pb.grid = grid;
    detail::cells(grid.neg_edges, pb.mid_neg, pb.width_neg);
    detail::cells(grid.pos_edges, pb.mid_pos, pb.width_pos);
    pb.Kn = detail::log_interaction(pb.mid_neg, pb.width_neg);
    pb.Kp = detail::log_interaction(pb.mid_pos, pb.width_pos);
    const int nn = grid.neg_cells();
    const int np = grid.pos_cells();
    pb.Kx.resize(nn, np);
    for (int i = 0; i < nn; ++i)
        for (int k = 0; k < np; ++k) pb.Kx(i, k) = -std::log(pb.mid_pos[k] - pb.mid_neg[i]);
    pb.V.resize(np);
    for (int k = 0; k < np; ++k) pb.V[k] = external_field(mp, pb.mid_pos[k]);
    pb.caps1.resize(nn);
    pb.caps3.resize(nn);
    for (int i = 0; i < nn; ++i) {
        pb.caps1[i] = rho_cell_mass(1, mp, grid.neg_edges[i], grid.neg_edges[i + 1]);
        pb.caps3[i] = rho_cell_mass(3, mp, grid.neg_edges[i], grid.neg_edges[i + 1]);
    }
    if (pb.caps1.sum() < 0.5 || pb.caps3.sum() < 0.5)
        throw Infeasible("discretize: the constraint caps carry less than mass 1/2; enlarge M");
    return pb;
}

inline bool is_feasible(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w, double tol = 1e-9) {
    const auto n = pb.mid_neg.size();
    if (w.w1.size() != n || w.w3.size() != n || w.w2.size() != pb.mid_pos.size()) return false;
    if (std::abs(w.w1.sum() - 0.5) > tol || std::abs(w.w3.sum() - 0.5) > tol || std::abs(w.w2.sum() - 1.0) > tol)
        return false;
    if (w.w2.minCoeff() < -tol || w.w1.minCoeff() < -tol || w.w3.minCoeff() < -tol) return false;
    if ((w.w1 - pb.caps1).maxCoeff() > tol || (w.w3 - pb.caps3).maxCoeff() > tol) return false;
    return true;
}

/// Discretised energy sum I(nu_j) - I(nu1, nu2) - I(nu2, nu3) + int V dnu2.
inline double energy_unchecked(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    return w.w1.dot(pb.Kn * w.w1) + w.w2.dot(pb.Kp * w.w2) + w.w3.dot(pb.Kn * w.w3) -
           w.w1.dot(pb.Kx * w.w2) - w.w3.dot(pb.Kx * w.w2) + pb.V.dot(w.w2);
}

inline double energy(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    if (!is_feasible(pb, w)) throw Infeasible("energy: triple violates the masses, signs or caps");
    return energy_unchecked(pb, w);
}

/// Same energy written as 1/2 I(nu2) + 1/4 I(nu2 - 2 nu1) + 1/4 I(nu2 - 2 nu3)
/// + int V dnu2, using the joint kernel on all cells.
inline double energy_decomposed(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    const auto nn = pb.mid_neg.size();
    const auto np = pb.mid_pos.size();
    Eigen::MatrixXd K(nn + np, nn + np);
    K.topLeftCorner(nn, nn) = pb.Kn;
    K.bottomRightCorner(np, np) = pb.Kp;
    K.topRightCorner(nn, np) = pb.Kx;
    K.bottomLeftCorner(np, nn) = pb.Kx.transpose();
    auto joint = [&](const Eigen::VectorXd& neg, const Eigen::VectorXd& pos) {
        Eigen::VectorXd v(nn + np);
        v << neg, pos;
        return v;
    };
    const Eigen::VectorXd s2 = joint(Eigen::VectorXd::Zero(nn), w.w2);
    const Eigen::VectorXd s21 = joint(-2.0 * w.w1, w.w2);
    const Eigen::VectorXd s23 = joint(-2.0 * w.w3, w.w2);
    return 0.5 * s2.dot(K * s2) + 0.25 * s21.dot(K * s21) + 0.25 * s23.dot(K * s23) + pb.V.dot(w.w2);
}

struct EnergyGradient {
    Eigen::VectorXd g1;
    Eigen::VectorXd g2;
    Eigen::VectorXd g3;
};

inline EnergyGradient energy_gradient(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    EnergyGradient g;
    const Eigen::VectorXd x2 = pb.Kx * w.w2;
    g.g1 = 2.0 * (pb.Kn * w.w1) - x2;
    g.g3 = 2.0 * (pb.Kn * w.w3) - x2;
    g.g2 = 2.0 * (pb.Kp * w.w2) - pb.Kx.transpose() * (w.w1 + w.w3) + pb.V;
    return g;
}

/// Euclidean projection onto {0 <= w <= cap, sum w = mass}; cap may be
/// infinite (plain simplex). Bisection on the shift lambda in
/// w = clamp(v - lambda, 0, cap).
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double mass,
                                              const std::optional<Eigen::VectorXd>& cap = std::nullopt) {
    const auto n = v.size();
    auto sum_at = [&](double lam) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double x = std::max(v[i] - lam, 0.0);
            if (cap) x = std::min(x, (*cap)[i]);
            s += x;
        }
        return s;
    };
    if (cap && cap->sum() < mass) throw Infeasible("projection: caps carry less than the required mass");
    double lo = v.minCoeff() - mass - (cap ? cap->maxCoeff() : 0.0) - 1.0;
    double hi = v.maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (sum_at(mid) > mass ? lo : hi) = mid;
    }
    const double lam = 0.5 * (lo + hi);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = std::max(v[i] - lam, 0.0);
        if (cap) x = std::min(x, (*cap)[i]);
        w[i] = x;
    }
    // Put the bisection round-off on the free coordinates.
    const double defect = mass - w.sum();
    int nfree = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (w[i] > 0.0 && (!cap || w[i] < (*cap)[i])) ++nfree;
    if (nfree > 0)
        for (Eigen::Index i = 0; i < n; ++i)
            if (w[i] > 0.0 && (!cap || w[i] < (*cap)[i])) w[i] += defect / nfree;
    return w;
}

inline DiscreteMeasureTriple uniform_start(const EquilibriumProblem& pb) {
    DiscreteMeasureTriple w;
    w.w2 = pb.width_pos / pb.width_pos.sum();
    w.w1 = pb.caps1 * (0.5 / pb.caps1.sum());
    w.w3 = pb.caps3 * (0.5 / pb.caps3.sum());
    return w;
}

struct MinimizeOptions {
    double tol = 1e-8;       ///< on the projected-gradient sup norm
    int max_iter = 200000;
    int polish_every = 2000;  ///< iterations between active-face Newton attempts (0 disables)
    double armijo_c = 1e-4;
    bool throw_on_failure = false;  ///< raise NonConvergence instead of flagging
};

struct KktReport {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double residual = 0.0;  ///< worst complementarity / stationarity violation
};

struct MinimizeReport {
    double energy = 0.0;
    int iterations = 0;
    double pg_norm = 0.0;
    bool converged = false;
    int energy_increases = 0;  ///< accepted steps that raised the energy (0 by construction)
    KktReport kkt;
};

namespace detail {

// Multiplier and worst violation for one block with bounds [0, cap].
inline void block_kkt(const Eigen::VectorXd& w, const Eigen::VectorXd& g, const Eigen::VectorXd* cap,
                      double& lambda, double& residual) {
    std::vector<double> free;
    const double eps = 1e-13;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const bool at_lo = w[i] <= eps * (cap ? (*cap)[i] : 1.0);
        const bool at_hi = cap && w[i] >= (*cap)[i] * (1.0 - 1e-12);
        if (!at_lo && !at_hi) free.push_back(g[i]);
    }
    if (free.empty()) {
        lambda = 0.0;
        residual = 0.0;
        return;
    }
    std::nth_element(free.begin(), free.begin() + free.size() / 2, free.end());
    lambda = free[free.size() / 2];
    double r = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const bool at_lo = w[i] <= eps * (cap ? (*cap)[i] : 1.0);
        const bool at_hi = cap && w[i] >= (*cap)[i] * (1.0 - 1e-12);
        if (at_lo) r = std::max(r, lambda - g[i]);
        else if (at_hi) r = std::max(r, g[i] - lambda);
        else r = std::max(r, std::abs(g[i] - lambda));
    }
    residual = r;
}

}  // namespace detail

inline KktReport kkt_report(const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    const auto g = energy_gradient(pb, w);
    KktReport k;
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;
    detail::block_kkt(w.w1, g.g1, &pb.caps1, k.lambda1, r1);
    detail::block_kkt(w.w2, g.g2, nullptr, k.lambda2, r2);
    detail::block_kkt(w.w3, g.g3, &pb.caps3, k.lambda3, r3);
    k.residual = std::max({r1, r2, r3});
    return k;
}

namespace detail {

// Minimiser of the energy on the face of the feasible set fixed by the
// current active bounds: one dense KKT solve in the free coordinates.
inline std::optional<DiscreteMeasureTriple> face_minimizer(const EquilibriumProblem& pb,
                                                           const DiscreteMeasureTriple& w,
                                                           const EnergyGradient& g) {
    const int nn = static_cast<int>(pb.mid_neg.size());
    const int np = static_cast<int>(pb.mid_pos.size());
    // Global index: [w1 | w2 | w3].
    std::vector<int> free_idx;
    std::vector<int> block_of;
    auto is_free = [](double x, double cap) { return x > 1e-15 * std::min(cap, 1.0) && x < cap * (1.0 - 1e-12); };
    for (int i = 0; i < nn; ++i)
        if (is_free(w.w1[i], pb.caps1[i])) free_idx.push_back(i), block_of.push_back(0);
    for (int k = 0; k < np; ++k)
        if (is_free(w.w2[k], std::numeric_limits<double>::infinity())) free_idx.push_back(nn + k), block_of.push_back(1);
    for (int i = 0; i < nn; ++i)
        if (is_free(w.w3[i], pb.caps3[i])) free_idx.push_back(nn + np + i), block_of.push_back(2);
    const int nf = static_cast<int>(free_idx.size());
    if (nf == 0) return std::nullopt;
    auto hess = [&](int a, int b) -> double {
        auto blk = [&](int x) { return x < nn ? 0 : (x < nn + np ? 1 : 2); };
        const int ba = blk(a);
        const int bb = blk(b);
        const int ia = ba == 0 ? a : (ba == 1 ? a - nn : a - nn - np);
        const int ib = bb == 0 ? b : (bb == 1 ? b - nn : b - nn - np);
        if (ba == bb) return 2.0 * (ba == 1 ? pb.Kp(ia, ib) : pb.Kn(ia, ib));
        if (ba == 1 && bb != 1) return -pb.Kx(ib, ia);
        if (bb == 1 && ba != 1) return -pb.Kx(ia, ib);
        return 0.0;  // nu1 and nu3 do not interact
    };
    // Newton step on the face: H_FF dx - E dlam = -g_F, E^T dx = 0.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nf + 3, nf + 3);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + 3);
    auto grad_at = [&](int x) {
        return x < nn ? g.g1[x] : (x < nn + np ? g.g2[x - nn] : g.g3[x - nn - np]);
    };
    for (int a = 0; a < nf; ++a) {
        for (int b = a; b < nf; ++b) A(a, b) = A(b, a) = hess(free_idx[a], free_idx[b]);
        A(a, nf + block_of[a]) = -1.0;
        A(nf + block_of[a], a) = -1.0;
        rhs[a] = -grad_at(free_idx[a]);
    }
    for (int b = 0; b < 3; ++b)
        if (A.row(nf + b).cwiseAbs().sum() == 0.0) A(nf + b, nf + b) = 1.0;  // block with no free cell
    const Eigen::VectorXd sol = A.partialPivLu().solve(rhs);
    if (!sol.allFinite()) return std::nullopt;
    DiscreteMeasureTriple out = w;
    for (int a = 0; a < nf; ++a) {
        const int x = free_idx[a];
        if (x < nn) out.w1[x] += sol[a];
        else if (x < nn + np) out.w2[x - nn] += sol[a];
        else out.w3[x - nn - np] += sol[a];
    }
    return out;
}

}  // namespace detail

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking. The energy is quadratic, so the energy along a direction is
/// evaluated in closed form and each iteration costs one product with the
/// interaction matrices.
inline std::pair<DiscreteMeasureTriple, MinimizeReport> minimize(const EquilibriumProblem& pb,
                                                                 const MinimizeOptions& opt = {},
                                                                 std::optional<DiscreteMeasureTriple> start = {}) {
    DiscreteMeasureTriple w = start ? *start : uniform_start(pb);
    if (!is_feasible(pb, w)) throw Infeasible("minimize: starting triple is not feasible");
    auto g = energy_gradient(pb, w);
    double E = energy_unchecked(pb, w);
    double alpha = 1.0;
    MinimizeReport rep;

    auto project = [&](const DiscreteMeasureTriple& v) {
        DiscreteMeasureTriple p;
        p.w1 = project_capped_simplex(v.w1, 0.5, pb.caps1);
        p.w2 = project_capped_simplex(v.w2, 1.0);
        p.w3 = project_capped_simplex(v.w3, 0.5, pb.caps3);
        return p;
    };
    auto pg_norm = [&]() {
        DiscreteMeasureTriple t{w.w1 - g.g1, w.w2 - g.g2, w.w3 - g.g3};
        const auto p = project(t);
        return std::max({(p.w1 - w.w1).lpNorm<Eigen::Infinity>(), (p.w2 - w.w2).lpNorm<Eigen::Infinity>(),
                         (p.w3 - w.w3).lpNorm<Eigen::Infinity>()});
    };

    // Jump to the minimiser on the current face. Kept when the projected
    // gradient drops and the energy does not rise beyond round-off.
    auto try_polish = [&]() {
        // Active-set walk: take the face Newton step as far as the bounds allow,
        // pin the cells that hit a bound, and re-solve on the smaller face.
        DiscreteMeasureTriple pc = w;
        EnergyGradient gc = g;
        for (int pass = 0; pass < 40; ++pass) {
            const auto cand = detail::face_minimizer(pb, pc, gc);
            if (!cand) return false;
            double tau = 1.0;
            auto ratio = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd* cap) {
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double d = y[i] - x[i];
                    if (d < 0.0 && y[i] < 0.0) tau = std::min(tau, x[i] / -d);
                    if (cap && d > 0.0 && y[i] > (*cap)[i]) tau = std::min(tau, ((*cap)[i] - x[i]) / d);
                }
            };
            ratio(pc.w1, cand->w1, &pb.caps1);
            ratio(pc.w2, cand->w2, nullptr);
            ratio(pc.w3, cand->w3, &pb.caps3);
            DiscreteMeasureTriple nx{pc.w1 + tau * (cand->w1 - pc.w1), pc.w2 + tau * (cand->w2 - pc.w2),
                                     pc.w3 + tau * (cand->w3 - pc.w3)};
            pc = project(nx);
            gc = energy_gradient(pb, pc);
            if (tau >= 1.0) break;
        }
        const double Ec = energy_unchecked(pb, pc);
        if (!(Ec <= E + 1e-13 * std::max(1.0, std::abs(E)))) return false;
        const auto keep_w = w;
        const auto keep_g = g;
        w = pc;
        g = gc;
        const double pg = pg_norm();
        if (pg < rep.pg_norm) {
            rep.pg_norm = pg;
            E = Ec;
            return true;
        }
        w = keep_w;
        g = keep_g;
        return false;
    };

    for (rep.iterations = 0; rep.iterations < opt.max_iter; ++rep.iterations) {
        if (rep.iterations % 25 == 0) {
            rep.pg_norm = pg_norm();
            if (rep.pg_norm < opt.tol) {
                rep.converged = true;
                break;
            }
        }
        DiscreteMeasureTriple trial{w.w1 - alpha * g.g1, w.w2 - alpha * g.g2, w.w3 - alpha * g.g3};
        const auto p = project(trial);
        DiscreteMeasureTriple d{p.w1 - w.w1, p.w2 - w.w2, p.w3 - w.w3};
        const double slope = g.g1.dot(d.w1) + g.g2.dot(d.w2) + g.g3.dot(d.w3);
        if (!(slope < 0.0)) {
            rep.pg_norm = pg_norm();
            rep.converged = rep.pg_norm < opt.tol;
            if (rep.converged) break;
            // No descent left at this step length: round-off floor of the
            // first-order method, so hand over to the face solve.
            if (opt.polish_every > 0 && try_polish()) {
                alpha = 1.0;
                continue;
            }
            if (alpha == 1.0) break;
            alpha = 1.0;
            continue;
        }
        // Gradient change along d (Hessian product); E(w + s d) is quadratic in s.
        DiscreteMeasureTriple dd = d;
        EnergyGradient hd;
        {
            const Eigen::VectorXd x2 = pb.Kx * d.w2;
            hd.g1 = 2.0 * (pb.Kn * d.w1) - x2;
            hd.g3 = 2.0 * (pb.Kn * d.w3) - x2;
            hd.g2 = 2.0 * (pb.Kp * d.w2) - pb.Kx.transpose() * (d.w1 + d.w3);
        }
        const double curv = 0.5 * (dd.w1.dot(hd.g1) + dd.w2.dot(hd.g2) + dd.w3.dot(hd.g3));
        double s = 1.0;
        while (E + s * slope + s * s * curv > E + opt.armijo_c * s * slope && s > 1e-20) s *= 0.5;
        const double newE = E + s * slope + s * s * curv;
        if (newE > E) ++rep.energy_increases;
        w.w1 += s * d.w1;
        w.w2 += s * d.w2;
        w.w3 += s * d.w3;
        g.g1 += s * hd.g1;
        g.g2 += s * hd.g2;
        g.g3 += s * hd.g3;
        E = newE;
        // Barzilai-Borwein: s_k = s d, y_k = s Hd.
        const double sy = s * s * 2.0 * curv;
        const double ss = s * s * (d.w1.squaredNorm() + d.w2.squaredNorm() + d.w3.squaredNorm());
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1.0;
        if (rep.iterations % 500 == 499) {
            // Refresh to keep the running gradient and energy exact.
            g = energy_gradient(pb, w);
            E = energy_unchecked(pb, w);
        }
        if (opt.polish_every > 0 && rep.iterations % opt.polish_every == opt.polish_every - 1) {
            rep.pg_norm = pg_norm();
            if (try_polish()) alpha = 1.0;
        }
    }
    // A converged iterate sits on the optimal face; one Newton solve there
    // removes what is left of the first-order error.
    if (rep.converged && opt.polish_every > 0) try_polish();
    // Clean up round-off in the masses.
    w = project(w);
    rep.energy = energy_unchecked(pb, w);
    rep.kkt = kkt_report(pb, w);
    if (!rep.converged) {
        rep.pg_norm = pg_norm();
        if (opt.throw_on_failure) {
            std::ostringstream os;
            os << "minimize: projected-gradient norm " << rep.pg_norm << " after " << rep.iterations
               << " iterations (tolerance " << opt.tol << ")";
            throw NonConvergence(os.str());
        }
    }
    return {w, rep};
}

/// L1 distance between two triples on the same grid (sum over all blocks).
inline double triple_distance(const DiscreteMeasureTriple& a, const DiscreteMeasureTriple& b) {
    return (a.w1 - b.w1).lpNorm<1>() + (a.w2 - b.w2).lpNorm<1>() + (a.w3 - b.w3).lpNorm<1>();
}

struct SpectralComparison {
    double L1_mu1 = 0.0;
    double L1_mu2 = 0.0;
    double L1_mu3 = 0.0;
    double p_est = 0.0;  ///< left edge of the first positive cell above threshold
    double q_est = 0.0;  ///< right edge of the last positive cell above threshold
    double r1_est = 0.0; ///< extent of the capped run of nu1 cells next to 0
    double r3_est = 0.0;
    double cell_width_at_q = 0.0;
    int capped_cells1 = 0;
    int capped_cells3 = 0;
    double min_cap_margin1 = 0.0;  ///< min (cap - w) / cap over nu1 cells
    double min_cap_margin3 = 0.0;
    BranchPoints spectral;
};

namespace detail {

inline double block_l1(const Eigen::VectorXd& w, const std::vector<double>& edges,
                       const std::function<double(double)>& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double a = edges[i];
        const double b = edges[i + 1];
        const double h = w[i] / (b - a);
        s += quad::gauss8([&](double x) { return std::abs(h - f(x)); }, a, b);
    }
    return s;
}

inline int capped_run(const Eigen::VectorXd& w, const Eigen::VectorXd& cap, double rel, double& extent,
                      const std::vector<double>& edges, double& min_margin) {
    int count = 0;
    min_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double m = (cap[i] - w[i]) / cap[i];
        min_margin = std::min(min_margin, m);
        if (m < rel) ++count;
    }
    extent = 0.0;
    for (Eigen::Index i = w.size(); i-- > 0;) {
        if ((cap[i] - w[i]) / cap[i] >= rel) break;
        extent = -edges[i];
    }
    return count;
}

}  // namespace detail

inline SpectralComparison compare_to_spectral(const LimitingMeasures& lm, const EquilibriumProblem& pb,
                                              const DiscreteMeasureTriple& w, double threshold = 1e-3,
                                              double cap_rel = 1e-6) {
    SpectralComparison c;
    c.spectral = lm.curve().branch_points();
    const auto& g = pb.grid;
    c.L1_mu2 = detail::block_l1(w.w2, g.pos_edges, [&](double x) { return lm.mu2()(x); });
    auto mu1 = [&](double x) { return x < 0.0 ? lm.mu1()(x) : 0.0; };
    auto mu3 = [&](double x) { return x < 0.0 ? lm.mu3()(x) : 0.0; };
    // Mass of mu1, mu3 beyond the grid counts as error too.
    const double M = g.M();
    const double out1 = integrate_measure(lm.mu1(), [M](double y) { return y < -M ? 1.0 : 0.0; }, {-M}).value;
    const double out3 = integrate_measure(lm.mu3(), [M](double y) { return y < -M ? 1.0 : 0.0; }, {-M}).value;
    c.L1_mu1 = detail::block_l1(w.w1, g.neg_edges, mu1) + out1;
    c.L1_mu3 = detail::block_l1(w.w3, g.neg_edges, mu3) + out3;

    const double wmax = w.w2.maxCoeff();
    int first = -1;
    int last = -1;
    for (Eigen::Index k = 0; k < w.w2.size(); ++k) {
        if (w.w2[k] > threshold * wmax) {
            if (first < 0) first = static_cast<int>(k);
            last = static_cast<int>(k);
        }
    }
    if (first >= 0) {
        c.p_est = first == 0 ? 0.0 : g.pos_edges[first];
        c.q_est = g.pos_edges[last + 1];
        c.cell_width_at_q = g.pos_edges[last + 1] - g.pos_edges[last];
    }
    c.capped_cells1 = detail::capped_run(w.w1, pb.caps1, cap_rel, c.r1_est, g.neg_edges, c.min_cap_margin1);
    c.capped_cells3 = detail::capped_run(w.w3, pb.caps3, cap_rel, c.r3_est, g.neg_edges, c.min_cap_margin3);
    return c;
}

}  // namespace sqb
