#!/usr/bin/env python3
"""Sweep oracle for the hard-coded constants of the builtin nonlinearities.

For h(r) = r^(5/2) / (1 + r) computes
  A   = 2 * sup_r |h''(r)| / min(r^-1/2, r^1/2)
  L_H = 8 * sup_{0<r<=H} |h''''(r)| r^(3/2)   (reported as the global sup, valid for every H)
by a dense log sweep followed by local refinement, in 50-digit arithmetic.
It also prints sympy-generated C++ for the derivatives.
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 50
r = sp.symbols("r", positive=True)
h = r**sp.Rational(5, 2) / (1 + r)
ders = [sp.simplify(sp.diff(h, r, k)) for k in range(5)]
fs = [sp.lambdify(r, d, "mpmath") for d in ders]


def ratio_A(x):
    x = mp.mpf(x)
    return abs(fs[2](x)) / min(1 / mp.sqrt(x), mp.sqrt(x))


def ratio_L(x):
    x = mp.mpf(x)
    return abs(fs[4](x)) * x ** mp.mpf(1.5)


def sup(f, lo=-12, hi=8, n=20001):
    best_x, best = None, -1
    for i in range(n):
        x = mp.mpf(10) ** (lo + (hi - lo) * mp.mpf(i) / (n - 1))
        v = f(x)
        if v > best:
            best, best_x = v, x
    # golden-section refinement in log space around the best sample
    a, b = mp.log(best_x) - mp.mpf("0.01"), mp.log(best_x) + mp.mpf("0.01")
    g = lambda t: -f(mp.e ** t)
    for _ in range(200):
        c = b - (b - a) / mp.phi
        d = a + (b - a) / mp.phi
        if g(c) < g(d):
            b = d
        else:
            a = c
    t = (a + b) / 2
    return max(best, f(mp.e ** t)), mp.e ** t


if __name__ == "__main__":
    for k, d in enumerate(ders):
        print(f"h^({k}) =", d)
        print("   C++:", sp.cxxcode(d))
    sA, xA = sup(ratio_A)
    sL, xL = sup(ratio_L)
    print("sup |h''|/min(r^-1/2,r^1/2) =", mp.nstr(sA, 20), "at r =", mp.nstr(xA, 10))
    print("A   = 2*sup =", mp.nstr(2 * sA, 20))
    print("sup |h''''| r^3/2 =", mp.nstr(sL, 20), "at r =", mp.nstr(xL, 10))
    print("L_H = 8*sup =", mp.nstr(8 * sL, 20))
    # limits
    print("limit r->0 of |h''''| r^3/2 :", sp.limit(sp.Abs(ders[4]) * r**sp.Rational(3, 2), r, 0))
    print("g(1) = 2*sqrt(1)*h''(1) =", mp.nstr(2 * fs[2](1), 20))
