"""Extended-precision reference values frozen into the Rust tests.

Run with `python3 oracle.py`; every printed value is copied verbatim into
`tests/frozen.rs`. Uses mpmath at 50 significant digits and evaluates every
quantity straight from its defining series or product.
"""
import mpmath as mp

mp.mp.dps = 50


def qfac(t, s, nu, q):
    t, s, nu, q = map(mp.mpf, (t, s, nu, q))
    factors = int(mp.ceil(mp.log(mp.mpf(10) ** -55) / mp.log(q)))
    if nu == int(nu) and nu >= 0:
        p = mp.mpf(1)
        for i in range(int(nu)):
            p *= t - q**i * s
        return p
    r = s / t
    p = mp.mpf(1)
    for i in range(factors):
        p *= (1 - r * q**i) / (1 - r * q**(i + nu))
    return t**nu * p


def gamma_q(a, q):
    q = mp.mpf(q)
    return qfac(1, q, mp.mpf(a) - 1, q) / (1 - q) ** (mp.mpf(a) - 1)


def ml(alpha, beta, lam, t, t0, q, terms=50, shift=0):
    s = mp.mpf(0)
    for k in range(terms):
        s += mp.mpf(lam) ** k * qfac(t, t0, alpha * k + shift, q) / gamma_q(alpha * k + beta, q)
    return s


def qbr_fact(k, q):
    q = mp.mpf(q)
    p = mp.mpf(1)
    for j in range(1, k + 1):
        p *= (1 - q**j) / (1 - q)
    return p


def e_small(t, q, terms=60):
    return mp.fsum(mp.mpf(t) ** k / qbr_fact(k, q) for k in range(terms))


def e_big_product(t, q, factors=400):
    q, t = mp.mpf(q), mp.mpf(t)
    p = mp.mpf(1)
    for n in range(factors):
        p /= 1 - q**n * t
    return p


def show(name, v):
    print(f"{name} = {mp.nstr(v, 20)}")


show("qfac(1,0.5,0.5;0.5)", qfac(1, 0.5, 0.5, 0.5))
show("gamma_q(0.5;0.5)", gamma_q(0.5, 0.5))
show("gamma_q(1.5;0.5)", gamma_q(1.5, 0.5))
show("gamma_q(0.3;0.9)", gamma_q(0.3, 0.9))
show("gamma_q(2.4;0.3)", gamma_q(2.4, 0.3))
show("mpmath.qgamma(0.5;0.5)", mp.qgamma(0.5, 0.5))
show("mpmath.qgamma(0.3;0.9)", mp.qgamma(0.3, 0.9))
show("mpmath.qgamma(2.4;0.3)", mp.qgamma(2.4, 0.3))
show("ml(0.5,1,0.4,t=1;0.5)", ml(0.5, 1, 0.4, 1, 0, 0.5))
show("mlmod(0.5,0.5,0.3,t=1;0.5)", ml(0.5, 0.5, 0.3, 1, 0, 0.5, shift=-0.5))
show("e_q(1;0.5)", e_small(1, 0.5))
show("E_q(0.5;0.5) product", e_big_product(0.5, 0.5))
show("E_q(0.5;0.5) series", mp.fsum(mp.mpf(0.5) ** n / mp.qp(0.5, 0.5, n) for n in range(200)))
