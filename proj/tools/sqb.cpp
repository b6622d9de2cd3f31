// sqb: command-line front end. JSON goes to stdout, CSV to stdout or --out.
// Exit codes: 1 invalid input, 2 non-generic parameters, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqbessel/io.hpp"
#include "sqbessel/sqbessel.hpp"

namespace {

using sqb::fmt;
using sqb::json;

struct Config {
    double a = 1.0;
    double b = 1.0;
    double t = 0.5;
    double alpha = 0.0;
    int n = 8;
    int grid = 0;
    double tol = 0.0;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    // command specific
    double a_max = 1.0;
    double x_min = std::nan("");
    double x_max = std::nan("");
    int burn_in = 200;
    int thin = 5;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

sqb::ModelParams params(const Config& c) {
    sqb::ModelParams mp{c.a, c.b, c.t};
    mp.validate();
    return mp;
}

// JSON on one line, no trailing whitespace.
void emit_json(const json& j) { std::cout << j.dump() << '\n'; }

// Writes CSV text to --out when given, else stdout.
void emit_csv(const Config& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw UsageError("cannot open output file " + c.out);
    f << text;
}

void check_format(const Config& c, const char* allowed) {
    if (!c.format.empty() && c.format != allowed)
        throw UsageError("--format " + c.format + " is not available for this command (use " + allowed + ")");
}

int run_classify(const Config& c) {
    check_format(c, "json");
    const auto mp = params(c);
    const sqb::Phase ph = sqb::classify(mp);
    json j{{"case", std::string(sqb::phase_name(ph))}};
    if (mp.a * mp.b < 0.25) {
        const auto [t1, t2] = sqb::critical_times(mp.a, mp.b);
        j["t1"] = t1;
        j["t2"] = t2;
    }
    emit_json(j);
    return 0;
}

int run_branch_points(const Config& c) {
    check_format(c, "json");
    emit_json(sqb::to_json(sqb::branch_points(params(c))));
    return 0;
}

int run_density(const Config& c) {
    check_format(c, "csv");
    const sqb::SpectralCurve sc(params(c));
    const auto& bp = sc.branch_points();
    const int m = c.grid > 0 ? c.grid : 200;
    const double lo = std::isnan(c.x_min) ? -std::max({bp.q, 4.0 * bp.r1, 4.0 * bp.r3}) : c.x_min;
    const double hi = std::isnan(c.x_max) ? 1.25 * bp.q : c.x_max;
    if (!(hi > lo) || m < 2) throw UsageError("density: need x-max > x-min and grid >= 2");
    std::vector<std::array<double, 6>> rows(static_cast<std::size_t>(m));
    sqb::parallel_for(rows.size(), [&](std::size_t i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
        if (x == 0.0) x = 1e-12 * (hi - lo);  // every density is singular or split at 0
        auto& r = rows[i];
        r = {x, 0.0, 0.0, 0.0, 0.0, 0.0};
        if (x < 0.0) {
            r[1] = sqb::density_mu1(sc, x);
            r[3] = sqb::density_mu3(sc, x);
            r[4] = sqb::rho_density(1, sc.params(), x);
            r[5] = sqb::rho_density(3, sc.params(), x);
        } else {
            r[2] = sqb::density_mu2(sc, x);
        }
    });
    std::ostringstream os;
    os << "x,mu1,mu2,mu3,rho1,rho3\n";
    for (const auto& r : rows)
        os << fmt(r[0]) << ',' << fmt(r[1]) << ',' << fmt(r[2]) << ',' << fmt(r[3]) << ',' << fmt(r[4]) << ','
           << fmt(r[5]) << '\n';
    emit_csv(c, os.str());
    return 0;
}

int run_variational(const Config& c) {
    check_format(c, "json");
    const sqb::LimitingMeasures lm(params(c));
    const auto grid = sqb::default_variational_grid(lm.curve().branch_points(), c.grid > 0 ? c.grid : 40);
    json j = sqb::to_json(sqb::variational_check(lm, grid));
    j["case"] = std::string(sqb::phase_name(lm.curve().phase()));
    emit_json(j);
    return 0;
}

int run_oracle(const Config& c) {
    check_format(c, "json");
    const auto mp = params(c);
    const int cells = c.grid > 0 ? c.grid : 400;
    const auto pb = sqb::discretize(mp, sqb::make_grid(mp, cells, cells));
    sqb::MinimizeOptions opt;
    if (c.tol > 0.0) opt.tol = c.tol;
    const auto [w, rep] = sqb::minimize(pb, opt);
    json j{{"params", sqb::to_json(mp)},
           {"neg_cells", cells},
           {"pos_cells", cells},
           {"M", -pb.grid.neg_edges.front()},
           {"L", pb.grid.pos_edges.back()},
           {"minimize", sqb::to_json(rep)}};
    // Comparisons only make sense away from the phase boundary.
    if (std::abs(mp.a * mp.b - 0.25) > 1e-6) {
        const sqb::LimitingMeasures lm(mp);
        j["comparison"] = sqb::to_json(sqb::compare_to_spectral(lm, pb, w));
        j["case"] = std::string(sqb::phase_name(lm.curve().phase()));
    } else {
        j["comparison"] = nullptr;
    }
    if (!c.out.empty()) {
        std::ostringstream os;
        sqb::write_weights_csv(os, pb, w);
        emit_csv(c, os.str());
        j["weights_csv"] = c.out;
    } else {
        j["weights"] = sqb::to_json(w);
        j["grid"] = sqb::to_json(pb.grid);
    }
    emit_json(j);
    return 0;
}

int run_kernel(const Config& c) {
    check_format(c, "csv");
    const auto mp = params(c);
    const sqb::EnsembleSpec spec{c.n, c.alpha, mp};
    const sqb::FiniteNKernel K(spec);
    std::optional<sqb::SpectralCurve> sc;
    if (std::abs(mp.a * mp.b - 0.25) > 1e-9) sc.emplace(mp);
    const int m = c.grid > 0 ? c.grid : 200;
    const double hi = std::isnan(c.x_max) ? K.cutoff() : c.x_max;
    const double lo = std::isnan(c.x_min) ? hi / (2.0 * m) : c.x_min;
    if (!(lo > 0.0) || !(hi > lo) || m < 2) throw UsageError("kernel: need 0 < x-min < x-max and grid >= 2");
    std::vector<std::array<double, 3>> rows(static_cast<std::size_t>(m));
    sqb::parallel_for(rows.size(), [&](std::size_t i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
        rows[i] = {x, K.mean_density(x), sc ? sqb::density_mu2(*sc, x) : std::nan("")};
    });
    std::ostringstream os;
    os << "x,mean_density,mu2\n";
    for (const auto& r : rows) os << fmt(r[0]) << ',' << fmt(r[1]) << ',' << fmt(r[2]) << '\n';
    emit_csv(c, os.str());
    return 0;
}

int run_simulate(const Config& c) {
    if (!c.seed) throw UsageError("simulate: --seed is required");
    const auto mp = params(c);
    const sqb::EnsembleSpec spec{c.n, c.alpha, mp};
    const int m = c.grid > 0 ? c.grid : 19;
    std::vector<double> times(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) times[i] = (i + 1.0) / (m + 1.0);
    sqb::McmcOptions opt;
    opt.burn_in = c.burn_in;
    opt.thin = c.thin;
    const auto pe = sqb::path_ensemble(spec, times, opt, *c.seed);
    if (c.format == "json") {
        emit_json(sqb::to_json(pe));
    } else {
        std::ostringstream os;
        sqb::write_csv(os, pe);
        emit_csv(c, os.str());
    }
    if (pe.mixing_warning)
        std::cerr << json{{"warning", "MixingWarning"}, {"message", "acceptance rate outside [0.1, 0.6]"}}.dump()
                  << '\n';
    return 0;
}

int run_phase_diagram(const Config& c) {
    check_format(c, "csv");
    const int m = c.grid > 0 ? c.grid : 64;
    if (!(c.a_max > 0.0) || !(c.b > 0.0)) throw UsageError("phase-diagram: need a-max > 0 and b > 0");
    // Cell centres in t; a on (0, a_max].
    std::vector<std::string> labels(static_cast<std::size_t>(m) * m);
    sqb::parallel_for(labels.size(), [&](std::size_t k) {
        const int i = static_cast<int>(k / m);
        const int j = static_cast<int>(k % m);
        const sqb::ModelParams mp{c.a_max * (i + 1.0) / m, c.b, (j + 0.5) / m};
        try {
            labels[k] = std::string(sqb::phase_name(sqb::classify(mp)));
        } catch (const sqb::NonGenericPhase&) {
            labels[k] = "nongeneric";
        }
    });
    std::ostringstream os;
    os << "t,a,case\n";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            os << fmt((j + 0.5) / m) << ',' << fmt(c.a_max * (i + 1.0) / m) << ','
               << labels[static_cast<std::size_t>(i) * m + j] << '\n';
    emit_csv(c, os.str());
    return 0;
}

int fail(int code, const std::string& kind, const std::string& msg) {
    std::cerr << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-intersecting squared Bessel paths: spectral curve, equilibrium measures, kernels, sampling"};
    app.require_subcommand(1);
    Config c;

    auto model = [&](CLI::App* s) {
        s->add_option("--a", c.a, "start point a > 0");
        s->add_option("--b", c.b, "end point b > 0");
        s->add_option("--t", c.t, "time in (0, 1)");
        s->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    };
    auto* classify = app.add_subcommand("classify", "phase of (a, b, t) as JSON");
    model(classify);
    auto* bps = app.add_subcommand("branch-points", "r1, r3, p, q as JSON");
    model(bps);
    auto* density = app.add_subcommand("density", "mu1, mu2, mu3 and constraint densities as CSV");
    model(density);
    density->add_option("--grid", c.grid, "number of x samples");
    density->add_option("--x-min", c.x_min);
    density->add_option("--x-max", c.x_max);
    density->add_option("--out", c.out, "CSV file (default stdout)");
    auto* var = app.add_subcommand("variational-check", "variational conditions report as JSON");
    model(var);
    var->add_option("--grid", c.grid, "interior support points");
    auto* oracle = app.add_subcommand("oracle", "discrete energy minimization compared with the spectral densities");
    model(oracle);
    oracle->add_option("--grid", c.grid, "cells per half line");
    oracle->add_option("--tol", c.tol, "projected-gradient tolerance");
    oracle->add_option("--out", c.out, "weights CSV file");
    auto* kernel = app.add_subcommand("kernel", "K_n(x,x)/n next to the mu2 density as CSV");
    model(kernel);
    kernel->add_option("--n", c.n, "even number of paths");
    kernel->add_option("--alpha", c.alpha, "Bessel order > -1");
    kernel->add_option("--grid", c.grid, "number of x samples");
    kernel->add_option("--x-min", c.x_min);
    kernel->add_option("--x-max", c.x_max);
    kernel->add_option("--out", c.out, "CSV file (default stdout)");
    auto* simulate = app.add_subcommand("simulate", "path ensemble as CSV (time,path_index,position)");
    model(simulate);
    simulate->add_option("--n", c.n, "even number of paths, at most 10");
    simulate->add_option("--alpha", c.alpha, "Bessel order > -1");
    simulate->add_option("--grid", c.grid, "interior time slices");
    simulate->add_option("--seed", c.seed, "random seed (required)");
    simulate->add_option("--burn-in", c.burn_in, "sweeps per slice");
    simulate->add_option("--thin", c.thin, "extra sweeps per slice");
    simulate->add_option("--out", c.out, "CSV file (default stdout)");
    auto* phase = app.add_subcommand("phase-diagram", "case label on a (t, a) grid for fixed b, as CSV");
    phase->add_option("--b", c.b, "end point b");
    phase->add_option("--a-max", c.a_max, "largest a");
    phase->add_option("--grid", c.grid, "points per axis");
    phase->add_option("--format", c.format)->check(CLI::IsMember({"csv", "json"}));
    phase->add_option("--out", c.out, "CSV file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(1, "UsageError", e.what());
    }

    try {
        if (*classify) return run_classify(c);
        if (*bps) return run_branch_points(c);
        if (*density) return run_density(c);
        if (*var) return run_variational(c);
        if (*oracle) return run_oracle(c);
        if (*kernel) return run_kernel(c);
        if (*simulate) return run_simulate(c);
        if (*phase) return run_phase_diagram(c);
    } catch (const UsageError& e) {
        return fail(1, "UsageError", e.what());
    } catch (const sqb::DomainError& e) {
        return fail(1, e.kind(), e.what());
    } catch (const sqb::NonGenericPhase& e) {
        return fail(2, e.kind(), e.what());
    } catch (const sqb::Error& e) {
        return fail(3, e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail(3, "Error", e.what());
    }
    return fail(1, "UsageError", "no command");
}
