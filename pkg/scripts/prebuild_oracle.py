"""High-precision reference values frozen into the test suite.

Everything here is computed with mpmath at 40 significant digits and is
independent of the ``ldpcdo`` package.

    python scripts/prebuild_oracle.py [--convergence]
"""
import argparse

import mpmath as mp

mp.mp.dps = 40


def hbar(a, b):
    return a * mp.log(a / b) + (1 - a) * mp.log((1 - a) / (1 - b))


def pmf(n, p, k):
    p = mp.mpf(p)
    return mp.binomial(n, k) * p**k * (1 - p) ** (n - k)


def worked_example():
    a, b, f, n = mp.mpf("0.1"), mp.mpf("0.2"), mp.mpf("0.03"), 100
    kappa = mp.log(a / (1 - a) * (1 - f) / f)
    bracket = a * (1 - a) * f * (1 - f) / (a - f) ** 2
    prefactor = 1 / (n**1.5 * (b - a) * mp.sqrt(2 * mp.pi * a * (1 - a)))
    exponent = n * hbar(a, f)
    print("hbar(0.1, 0.03)          ", hbar(a, f))
    print("kappa                    ", kappa)
    print("bracket (two ways)       ", mp.e**-kappa / (1 - mp.e**-kappa) ** 2, bracket)
    print("chebyshev bound n=100    ", f * (1 - f) / n / (a - f) ** 2)
    print("prefactor                ", prefactor)
    print("exponent (nats)          ", exponent)
    print("asymptotic value         ", prefactor * bracket * mp.e**-exponent)


def misc():
    print("1 - exp(-1/4)            ", 1 - mp.e ** mp.mpf("-0.25"))
    print("ln 1.05                  ", mp.log(mp.mpf("1.05")))
    print("Phi(1.96)                ", mp.ncdf(mp.mpf("1.96")))
    print("pmf(10^4, 0.1, 1000)     ", pmf(10**4, "0.1", 1000))
    print("P{Bin(50, 0.08) > 6}     ", mp.fsum(pmf(50, "0.08", k) for k in range(7, 51)))


def local_clt():
    for n, alpha in [(100, "0.1"), (1000, "0.1"), (10**4, "0.1"), (10**4, "0.5")]:
        al = mp.mpf(alpha)
        scale = mp.sqrt(2 * mp.pi * n * al * (1 - al))
        k0 = int(mp.ceil(n * al))
        errs = []
        k = k0
        while k - n * al <= mp.mpf(n) ** 0.25:
            errs.append(abs(pmf(n, al, k) * scale - 1))
            k += 1
        print(f"local CLT n={n:6d} alpha={alpha}: first {mp.nstr(errs[0], 6)}, max {mp.nstr(max(errs), 6)}")


def convergence():
    """Exact E[P^prot] at R=0 against the leading-order asymptotic."""
    a, b, f = mp.mpf("0.1"), mp.mpf("0.15"), mp.mpf("0.05")
    kappa = mp.log(a / (1 - a) * (1 - f) / f)
    for n in (200, 400, 800, 1600):
        exact = mp.fsum(
            pmf(n, f, k) * min((mp.mpf(k) / n - a) / (b - a), 1) for k in range(int(n * a) + 1, n + 1)
        )
        g = mp.ceil(n * a) - n * a
        asym = (
            mp.e ** (-kappa * g)
            * (a * (1 - a) * f * (1 - f) / (a - f) ** 2 + g * a * (1 - f) / (a - f))
            / (n**1.5 * (b - a) * mp.sqrt(2 * mp.pi * a * (1 - a)))
            * mp.e ** (-n * hbar(a, f))
        )
        print(f"n={n:5d} exact {mp.nstr(exact, 10)} asymptotic {mp.nstr(asym, 10)} ratio {mp.nstr(asym / exact, 8)}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--convergence", action="store_true", help="also run the slower exact-sum ratios")
    args = parser.parse_args()
    worked_example()
    misc()
    local_clt()
    if args.convergence:
        convergence()
