#pragma once

// JSON views of the result types and full-precision CSV formatting.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqbessel/equilibrium.hpp"
#include "sqbessel/measures.hpp"
#include "sqbessel/simulate.hpp"
#include "sqbessel/spectral.hpp"

namespace sqb {

using json = nlohmann::json;

/// 17 significant digits, round-trip exact.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

// Infinite margins have no JSON number; they become null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const ModelParams& mp) { return {{"a", mp.a}, {"b", mp.b}, {"t", mp.t}}; }

inline json to_json(const BranchPoints& bp) { return {{"r1", bp.r1}, {"r3", bp.r3}, {"p", bp.p}, {"q", bp.q}}; }

inline json to_json(const VariationalReport& r) {
    return {{"l", r.l},
            {"eq_residual_max", r.eq_residual_max},
            {"eq_residual_mu1", r.eq_residual_mu1},
            {"eq_residual_mu3", r.eq_residual_mu3},
            {"ineq_margin_mu2", finite_or_null(r.ineq_margin_mu2)},
            {"ineq_margin_mu1", finite_or_null(r.ineq_margin_mu1)},
            {"ineq_margin_mu3", finite_or_null(r.ineq_margin_mu3)},
            {"n_eq_mu2", r.n_eq_mu2},
            {"n_ineq_mu2", r.n_ineq_mu2},
            {"n_eq_mu1", r.n_eq_mu1},
            {"n_ineq_mu1", r.n_ineq_mu1},
            {"n_eq_mu3", r.n_eq_mu3},
            {"n_ineq_mu3", r.n_ineq_mu3},
            {"quadrature_error", r.quadrature_error},
            {"inequalities_hold", r.inequalities_hold()}};
}

inline json to_json(const MinimizeReport& r) {
    return {{"energy", r.energy},
            {"iterations", r.iterations},
            {"pg_norm", r.pg_norm},
            {"converged", r.converged},
            {"energy_increases", r.energy_increases},
            {"kkt",
             {{"lambda1", r.kkt.lambda1},
              {"lambda2", r.kkt.lambda2},
              {"lambda3", r.kkt.lambda3},
              {"residual", r.kkt.residual}}}};
}

inline json to_json(const SpectralComparison& c) {
    return {{"L1_mu1", c.L1_mu1},
            {"L1_mu2", c.L1_mu2},
            {"L1_mu3", c.L1_mu3},
            {"p_est", c.p_est},
            {"q_est", c.q_est},
            {"r1_est", c.r1_est},
            {"r3_est", c.r3_est},
            {"cell_width_at_q", c.cell_width_at_q},
            {"capped_cells1", c.capped_cells1},
            {"capped_cells3", c.capped_cells3},
            {"min_cap_margin1", finite_or_null(c.min_cap_margin1)},
            {"min_cap_margin3", finite_or_null(c.min_cap_margin3)},
            {"spectral", to_json(c.spectral)}};
}

inline json to_json(const GridSpec& g) { return {{"neg_edges", g.neg_edges}, {"pos_edges", g.pos_edges}}; }

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline json to_json(const DiscreteMeasureTriple& w) {
    return {{"w1", to_vector(w.w1)}, {"w2", to_vector(w.w2)}, {"w3", to_vector(w.w3)}};
}

/// paths[k] is the trajectory of the k-th lowest path over time_grid.
inline json to_json(const PathEnsemble& pe) {
    json paths = json::array();
    for (Eigen::Index k = 0; k < pe.paths.rows(); ++k) paths.push_back(to_vector(pe.paths.row(k).transpose()));
    return {{"seed", pe.seed},
            {"n", pe.paths.rows()},
            {"time_grid", pe.time_grid},
            {"paths", paths},
            {"mixing_warning", pe.mixing_warning}};
}

/// Cells of all three blocks: block,lo,hi,weight,cap (cap empty for nu2).
inline void write_weights_csv(std::ostream& os, const EquilibriumProblem& pb, const DiscreteMeasureTriple& w) {
    os << "block,lo,hi,weight,cap\n";
    const auto& ne = pb.grid.neg_edges;
    const auto& pe = pb.grid.pos_edges;
    for (Eigen::Index k = 0; k < w.w1.size(); ++k)
        os << "nu1," << fmt(ne[k]) << ',' << fmt(ne[k + 1]) << ',' << fmt(w.w1(k)) << ',' << fmt(pb.caps1(k)) << '\n';
    for (Eigen::Index k = 0; k < w.w2.size(); ++k)
        os << "nu2," << fmt(pe[k]) << ',' << fmt(pe[k + 1]) << ',' << fmt(w.w2(k)) << ",\n";
    for (Eigen::Index k = 0; k < w.w3.size(); ++k)
        os << "nu3," << fmt(ne[k]) << ',' << fmt(ne[k + 1]) << ',' << fmt(w.w3(k)) << ',' << fmt(pb.caps3(k)) << '\n';
}

}  // namespace sqb
