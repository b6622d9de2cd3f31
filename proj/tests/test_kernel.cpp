#include <cmath>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "sqbessel/kernel.hpp"
#include "sqbessel/measures.hpp"
#include "sqbessel/quadrature.hpp"

namespace {

using sqb::EnsembleSpec;
using sqb::FiniteNKernel;
using sqb::ModelParams;

struct KernelValue {
    EnsembleSpec spec;
    double x, y, K;
};

// Biorthogonal system built directly from the transition densities in mpmath
// (40 digits, Gram entries by mpmath.quad).
const KernelValue kOracle[] = {
    {{2, 0.0, {1, 1, 0.5}}, 0.5, 0.5, 1.3389268314221078252},
    {{2, 0.0, {1, 1, 0.5}}, 1.0, 1.0, 0.79522281894502264131},
    {{2, 0.0, {1, 1, 0.5}}, 2.0, 0.7, -0.018378478242029379917},
    {{2, 0.0, {1, 1, 0.5}}, 3.0, 3.0, 0.05925799352270709758},
    {{2, 2.0, {2, 2, 0.5}}, 1.0, 1.0, 0.7256578877680476255},
    {{2, 2.0, {2, 2, 0.5}}, 2.5, 1.5, 0.36373971135721190105},
    {{4, 0.5, {2, 2, 0.5}}, 0.8, 0.8, 1.4188316556933300754},
    {{4, 0.5, {2, 2, 0.5}}, 2.0, 3.0, -0.033775231916904008483},
    {{4, 0.5, {2, 2, 0.5}}, 4.0, 4.0, 0.41521688786551807855},
};

TEST(Kernel, MatchesIndependentReference) {
    for (const auto& c : kOracle) {
        const FiniteNKernel K(c.spec);
        EXPECT_NEAR(K(c.x, c.y), c.K, 1e-9 * std::max(1.0, std::abs(c.K))) << c.spec.n << ' ' << c.spec.alpha;
    }
}

TEST(Basis, WeightProductMatchesDirectFormula) {
    const EnsembleSpec s{4, 0.0, {1, 1, 0.5}};
    const double x = 1.0, n = 4, t = 0.5;
    const double w11 = std::exp(-n * x / t) * std::cyl_bessel_i(0.0, 2 * n * std::sqrt(x) / t);
    const double w21 = std::exp(-n * x / (1 - t)) * std::cyl_bessel_i(0.0, 2 * n * std::sqrt(x) / (1 - t));
    const double got = sqb::basis_f(s, 1, x).value() * sqb::basis_g(s, 1, x).value();
    EXPECT_NEAR(got / (w11 * w21), 1.0, 1e-12);
}

TEST(Basis, PositiveWithMonomialLadder) {
    const EnsembleSpec s{6, 0.5, {1, 2, 0.3}};
    for (double x : {1e-3, 0.4, 2.0, 9.0}) {
        for (int j = 1; j <= 6; ++j) {
            EXPECT_EQ(sqb::basis_f(s, j, x).sign, 1);
            EXPECT_EQ(sqb::basis_g(s, j, x).sign, 1);
        }
        for (int j = 1; j + 2 <= 6; ++j) {
            EXPECT_NEAR(sqb::basis_f(s, j + 2, x).log_abs - sqb::basis_f(s, j, x).log_abs, std::log(x), 1e-12);
            EXPECT_NEAR(sqb::basis_g(s, j + 2, x).log_abs - sqb::basis_g(s, j, x).log_abs, std::log(x), 1e-12);
        }
    }
}

TEST(Basis, RejectsBadArguments) {
    const EnsembleSpec s{4, 0.0, {1, 1, 0.5}};
    EXPECT_THROW(sqb::basis_f(s, 0, 1.0), sqb::DomainError);
    EXPECT_THROW(sqb::basis_f(s, 5, 1.0), sqb::DomainError);
    EXPECT_THROW(sqb::basis_g(s, 1, 0.0), sqb::DomainError);
}

TEST(EnsembleSpec, Validation) {
    EXPECT_THROW((EnsembleSpec{3, 0.0, {1, 1, 0.5}}.validate()), sqb::DomainError);
    EXPECT_THROW((EnsembleSpec{0, 0.0, {1, 1, 0.5}}.validate()), sqb::DomainError);
    EXPECT_THROW((EnsembleSpec{2, -1.0, {1, 1, 0.5}}.validate()), sqb::DomainError);
    EXPECT_THROW((EnsembleSpec{2, 0.0, {1, 1, 1.5}}.validate()), sqb::DomainError);
    EXPECT_THROW(FiniteNKernel(EnsembleSpec{26, 0.0, {1, 1, 0.5}}), sqb::DomainError);
}

TEST(Gram, FinitePositiveEntriesAndConditioningGuard) {
    const auto g = sqb::gram(EnsembleSpec{4, 0.0, {1, 1, 0.5}});
    EXPECT_TRUE(g.G.allFinite());
    EXPECT_GT(g.G.minCoeff(), 0.0);
    EXPECT_LT(g.cond_estimate, 1e12);
    EXPECT_THROW(sqb::gram(EnsembleSpec{12, 0.0, {2, 2, 0.5}}), sqb::IllConditioned);
    sqb::KernelOptions raw;
    raw.orthonormalize = false;
    EXPECT_THROW(FiniteNKernel(EnsembleSpec{12, 0.0, {2, 2, 0.5}}, raw), sqb::IllConditioned);
}

TEST(Kernel, RejectsNonPositiveArguments) {
    const FiniteNKernel K(EnsembleSpec{2, 0.0, {1, 1, 0.5}});
    EXPECT_THROW(K(0.0, 1.0), sqb::DomainError);
    EXPECT_THROW(K(1.0, -1.0), sqb::DomainError);
}

// Composite Gauss-Legendre in s = sqrt(x) over (0, cutoff).
template <class F>
double integrate_half_line(F&& f, double cutoff) {
    const auto [s, w] = sqb::quad::gauss_legendre_panels(0.0, std::sqrt(cutoff), 60);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += w[i] * 2.0 * s[i] * f(s[i] * s[i]);
    return sum;
}

class Identities : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(Identities, TraceReproducingAndBasisInvariance) {
    const auto [n, alpha] = GetParam();
    const EnsembleSpec spec{n, alpha, {1, 1, 0.5}};
    const FiniteNKernel K(spec);
    const double X = K.cutoff();
    EXPECT_NEAR(integrate_half_line([&](double x) { return K(x, x); }, X), n, 1e-6);
    for (auto [x, y] : {std::pair{1.0, 2.0}, std::pair{0.3, 0.9}}) {
        const double rep = integrate_half_line([&](double s) { return K(x, s) * K(s, y); }, X);
        EXPECT_NEAR(rep, K(x, y), 1e-6) << x << ' ' << y;
    }
    for (int i = 1; i <= 100; ++i) EXPECT_GE(K.diagonal(X * i / 101.0), -1e-12);

    // The raw monomial-times-Bessel basis is related to the orthonormalized one
    // by an invertible triangular change within each span.
    sqb::KernelOptions raw;
    raw.orthonormalize = false;
    raw.max_condition = 1e28;
    const FiniteNKernel Kr(spec, raw);
    for (auto [x, y] : {std::pair{0.5, 0.5}, std::pair{1.0, 2.0}, std::pair{2.5, 1.2}}) {
        EXPECT_NEAR(Kr(x, y), K(x, y), 1e-8 * std::max(1.0, std::abs(K(x, y)))) << x << ' ' << y;
    }
}

INSTANTIATE_TEST_SUITE_P(Grid, Identities,
                         ::testing::Combine(::testing::Values(2, 4, 6, 8), ::testing::Values(0.0, 0.5, 2.0)));

double sup_deviation(const FiniteNKernel& K, const sqb::SpectralCurve& sc, const std::vector<double>& xs) {
    double d = 0.0;
    for (double x : xs) d = std::max(d, std::abs(K.mean_density(x) - sqb::density_mu2(sc, x)));
    return d;
}

std::vector<double> interior_points(const sqb::BranchPoints& bp, int m) {
    std::vector<double> xs;
    for (int i = 1; i <= m; ++i) xs.push_back(bp.p + (bp.q - bp.p) * i / (m + 1.0));
    return xs;
}

TEST(MeanDensity, ApproachesLimitingDensity) {
    const ModelParams mp{2, 2, 0.5};
    const sqb::SpectralCurve sc(mp);
    const auto xs = interior_points(sc.branch_points(), 20);
    for (double alpha : {0.0, 2.0}) {
        const double d4 = sup_deviation(FiniteNKernel({4, alpha, mp}), sc, xs);
        const FiniteNKernel K8({8, alpha, mp});
        const double d8 = sup_deviation(K8, sc, xs);
        const double d12 = sup_deviation(FiniteNKernel({12, alpha, mp}), sc, xs);
        EXPECT_LT(d8, 0.15) << alpha;
        EXPECT_LT(d12, d4) << alpha;
        EXPECT_LT(K8.mean_density(6.0), 0.02) << alpha;
    }
}

TEST(MeanDensity, LimitDoesNotDependOnAlpha) {
    const ModelParams mp{2, 2, 0.5};
    const sqb::SpectralCurve sc(mp);
    const auto xs = interior_points(sc.branch_points(), 20);
    const FiniteNKernel K0({12, 0.0, mp}), K2({12, 2.0, mp});
    const double dev = std::max(sup_deviation(K0, sc, xs), sup_deviation(K2, sc, xs));
    double diff = 0.0;
    for (double x : xs) diff = std::max(diff, std::abs(K0.mean_density(x) - K2.mean_density(x)));
    EXPECT_LT(diff, 2.0 * dev);
}

}  // namespace
