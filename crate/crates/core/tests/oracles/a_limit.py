"""Independent value of lim A_{i,delta0} for one point on the unit square.

Fixture: mu = 1/2, frak_m = 3, h = 1, so kappa = (2 - m) mu = -1/2 and
    F(x) = exp(2 pi m mu (gamma(x) - gamma(0))).
With the disk B_rho, rho = 1/2, inscribed in the cell,
    lim A = rho^kappa/mu - (m-2)/(2 pi) [ int_{cell \\ B_rho} r^(kappa-2) F
                                       + int_{B_rho} r^(kappa-2) (F - 1) ].
gamma comes from the theta representation in torus_green.py; the cell
integral uses the eight-fold symmetry of the square and nested adaptive
quadrature. Also prints A(delta0) at delta0 = 0.005 directly.
Run: python3 a_limit.py
"""
import cmath
import math

from scipy.integrate import quad

from torus_green import C, q, mp

MU, M = 0.5, 3.0
KAPPA = (2 - M) * MU
QF = float(q)
CF = float(C)


def log_theta1(x, y):
    # theta_1(z) = 2 sum_n (-1)^n q^{(n+1/2)^2} sin((2n+1) z), z = pi (x + i y)
    z = complex(math.pi * x, math.pi * y)
    s = 0j
    for n in range(12):
        s += (-1) ** n * QF ** ((n + 0.5) ** 2) * cmath.sin((2 * n + 1) * z)
    return math.log(abs(2 * s))


def gamma(x, y):
    r = math.hypot(x, y)
    return -log_theta1(x, y) / (2 * math.pi) + y * y / 2 + CF + math.log(r) / (2 * math.pi)


d1 = float(mp.jtheta(1, 0, q, 1))
GAMMA0 = -math.log(math.pi * d1) / (2 * math.pi) + CF


def logf(r, th):
    return 2 * math.pi * M * MU * (gamma(r * math.cos(th), r * math.sin(th)) - GAMMA0)


def wedge(inner, lo, full):
    # theta in [0, pi/4], edge x = 1/2
    def radial(th):
        big = 0.5 / math.cos(th)
        if full:
            f = lambda r: r ** (KAPPA - 1) * math.exp(logf(r, th))
            return quad(f, lo, big, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        g = lambda r: r ** (KAPPA - 1) * math.expm1(logf(r, th))
        return quad(g, 0.0, inner, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    return 8 * quad(radial, 0, math.pi / 4, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def a_delta(delta):
    return delta ** KAPPA / MU - (M - 2) / (2 * math.pi) * wedge(None, delta, True)


def a_lim():
    rho = 0.5
    outer = wedge(None, rho, True)
    inner = wedge(rho, 0, False)
    return rho ** KAPPA / MU - (M - 2) / (2 * math.pi) * (outer + inner)


if __name__ == "__main__":
    print("A(0.005) =", repr(a_delta(0.005)))
    print("lim A    =", repr(a_lim()))
