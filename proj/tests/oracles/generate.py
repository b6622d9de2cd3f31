"""Reference values for the unit tests, computed with mpmath/sympy at 40 digits.

Run: python3 tests/oracles/generate.py
"""

import mpmath as mp
import sympy as sp

mp.mp.dps = 40


def show(label, v):
    print(f"{label} = {mp.nstr(v, 20)}")


print("# log I_nu(x)")
for nu, x in [(0, "1e-3"), (0, "0.5"), (0.5, "10"), (2, "29.9"), (2, "30.1"), (0, "200"), (2.5, "1000"),
              (7, "0.01"), ("-0.5", "3"), ("-1.5", "0.2"), ("-1.5", "5"), ("-1", "2"), ("-0.3", "0.7")]:
    v = mp.besseli(mp.mpf(nu), mp.mpf(x))
    print(f"nu={nu} x={x}: log|I| = {mp.nstr(mp.log(abs(v)), 20)} sign = {int(mp.sign(v))}")


def p(alpha, tau, x, y):
    alpha, tau, x, y = map(mp.mpf, (alpha, tau, x, y))
    if x == 0:
        return y**alpha / ((2 * tau) ** (alpha + 1) * mp.gamma(alpha + 1)) * mp.exp(-y / (2 * tau))
    return (y / x) ** (alpha / 2) / (2 * tau) * mp.exp(-(x + y) / (2 * tau)) * mp.besseli(alpha, mp.sqrt(x * y) / tau)


print("# log p_tau^alpha(x, y)")
for args in [(0, "0.25", "1", "1"), ("0.5", "0.1", "2", "0.3"), (2, "0.01", "1", "1.2"), (2, "1", "0", "0.7"),
             ("-0.5", "0.3", "0", "0.2"), (0, "0.001", "5", "5.01")]:
    print(args, mp.nstr(mp.log(p(*args)), 20))

print("# transition density integrates to 1")
print(mp.quad(lambda y: p(1.5, 0.3, 2, y), [0, 2, mp.inf]))

print("# critical times, (1/3, 1/4)")
a, b = mp.mpf(1) / 3, mp.mpf(1) / 4
s = mp.sqrt(1 - 4 * a * b)
show("t1", (2 * a + 1 - s) / (2 * (a + b + 1)))
show("t2", (2 * a + 1 + s) / (2 * (a + b + 1)))

print("# discriminant roots of the spectral curve in z")
xi, z = sp.symbols("xi z")


def curve(a, b, t, c):
    u = 1 - t
    A = -2 / (t * u)
    B = 1 / (t**2 * u**2) - b / (z * u**2) - a / (z * t**2) + 1 / (z * t * u)
    C = 2 * b / (z * t * u**3) - 1 / (z * t**2 * u**2)
    D = -b / (z * t**2 * u**4) + c / (z**2 * t**2 * u**2)
    return xi**4 + A * xi**3 + B * xi**2 + C * xi + D


for a, b, t, case1 in [(2, 2, sp.Rational(1, 2), True), (sp.Rational(1, 3), sp.Rational(1, 3), sp.Rational(1, 2), False),
                       (1, sp.Rational(1, 10), sp.Rational(1, 10), False), (sp.Rational(1, 10), 1, sp.Rational(9, 10), False),
                       (sp.Rational(1, 5), sp.Rational(1, 5), sp.Rational(1, 5), False), (sp.Rational(1, 2), 2, sp.Rational(3, 10), True)]:
    c = (sp.sqrt(a * b) - sp.Rational(1, 2)) ** 2 if case1 else 0
    P = sp.expand(curve(a, b, t, c) * z**2)
    disc = sp.factor(sp.discriminant(sp.Poly(P, xi)).as_expr())
    num = sp.Poly(sp.numer(sp.together(disc)), z).sqf_part()
    while num.eval(0) == 0:
        num = sp.Poly(sp.cancel(num.as_expr() / z), z)
    roots = [r for r in num.nroots(n=30, maxsteps=500) if abs(sp.im(r)) < 1e-20]
    print(f"(a,b,t)=({a},{b},{t}) real nonzero roots:", [sp.N(r, 18) for r in sorted(roots, key=lambda r: sp.re(r))])
    if case1:
        sp_ = (1 - t) * sp.sqrt(a) + t * sp.sqrt(b)
        d = sp.sqrt(2 * t * (1 - t))
        print("   closed form p, q:", sp.N((sp_ - d) ** 2, 18), sp.N((sp_ + d) ** 2, 18))

print("# finite-n kernel, n = 2")


def kernel_oracle(n, alpha, a, b, t, pts):
    tau1, tau2 = mp.mpf(t) / (2 * n), (1 - mp.mpf(t)) / (2 * n)
    n1 = (n + 1) // 2
    f, g = [], []
    for j in range(1, n1 + 1):
        f.append(lambda x, j=j: x ** (j - 1) * p(alpha, tau1, a, x))
        if len(f) < n:
            f.append(lambda x, j=j: x ** (j - 1) * p(alpha + 1, tau1, a, x))
        g.append(lambda x, j=j: x ** (j - 1) * p(alpha, tau2, x, b))
        if len(g) < n:
            g.append(lambda x, j=j: x ** (j - 1) * p(alpha - 1, tau2, x, b))
    G = mp.matrix(n, n)
    for j in range(n):
        for k in range(n):
            G[j, k] = mp.quad(lambda x: f[j](x) * g[k](x), [0, 0.25, 1, 2, 4, 8, mp.inf])
    Gi = G**-1

    def K(x, y):
        return sum(f[j](x) * Gi[k, j] * g[k](y) for j in range(n) for k in range(n))

    for x, y in pts:
        print(f"n={n} alpha={alpha} (a,b,t)=({a},{b},{t}) K({x},{y}) = {mp.nstr(K(mp.mpf(x), mp.mpf(y)), 20)}")


kernel_oracle(2, 0, 1, 1, 0.5, [("0.5", "0.5"), ("1", "1"), ("2", "0.7"), ("3", "3")])
kernel_oracle(2, 2, 2, 2, 0.5, [("1", "1"), ("2.5", "1.5")])
kernel_oracle(4, 0.5, 2, 2, 0.5, [("0.8", "0.8"), ("2", "3"), ("4", "4")])

print("# n = 2 joint density, positions (x1, x2), unnormalized log det[f_j(x_i)] det[g_k(x_i)]")
n, alpha, a, b, t = 2, 0, 1, 1, mp.mpf("0.5")
tau1, tau2 = t / (2 * n), (1 - t) / (2 * n)
fs = [lambda x: p(alpha, tau1, a, x), lambda x: p(alpha + 1, tau1, a, x)]
gs = [lambda x: p(alpha, tau2, x, b), lambda x: p(alpha - 1, tau2, x, b)]


def dens(x1, x2):
    F = mp.matrix([[fs[0](x1), fs[1](x1)], [fs[0](x2), fs[1](x2)]])
    H = mp.matrix([[gs[0](x1), gs[1](x1)], [gs[0](x2), gs[1](x2)]])
    return mp.det(F) * mp.det(H)


for p1, p2 in [("0.3", "1.2"), ("0.9", "1.1"), ("2", "0.5")]:
    print(p1, p2, "log ratio to (0.5, 1.5):", mp.nstr(mp.log(dens(mp.mpf(p1), mp.mpf(p2)) / dens(mp.mpf("0.5"), mp.mpf("1.5"))), 20))

print("# cap of [-4, -1] for rho1 at a = 1, t = 1/2")
show("cap", mp.quad(lambda x: mp.sqrt(1) / (mp.pi * mp.mpf(0.5)) / mp.sqrt(-x), [-4, -1]))
print("# external field V(1) at (1, 1, 1/2)")
t = mp.mpf(0.5)
show("V", 1 / (t * (1 - t)) - 2 * mp.sqrt(1) / t - 2 * mp.sqrt(1) / (1 - t))
