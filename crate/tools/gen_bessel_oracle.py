#!/usr/bin/env python3
"""Regenerate the modified-Bessel reference fixture used by the test suite.

Samples deterministic points in the open right half-plane (the domain the
kernel evaluations live in), computes K0, K1 and I1 with mpmath at 40
significant digits, and writes them as shortest round-trip f64 decimals.

Usage:
    python3 tools/gen_bessel_oracle.py > crates/elastoscat/tests/data/bessel_oracle.csv
"""

import random

import mpmath as mp

mp.mp.dps = 40

N_POINTS = 1000
SEED = 20260809
ABS_MIN, ABS_MAX = 1e-6, 700.0
# stay strictly inside the right half-plane
ARG_MAX = mp.pi / 2 * mp.mpf("0.999")


def fmt(x):
    f = float(x)
    return repr(f)


def main():
    rng = random.Random(SEED)
    print("# columns: re,im,k0_re,k0_im,k1_re,k1_im,i1_re,i1_im")
    print(f"# seed={SEED} n={N_POINTS} |z| in [{ABS_MIN},{ABS_MAX}] log-uniform")
    for _ in range(N_POINTS):
        r = mp.mpf(ABS_MIN) * (mp.mpf(ABS_MAX) / mp.mpf(ABS_MIN)) ** mp.mpf(
            rng.random()
        )
        phi = mp.mpf(2 * rng.random() - 1) * ARG_MAX
        z = mp.mpc(r * mp.cos(phi), r * mp.sin(phi))
        # round the sample itself to f64 and re-evaluate there, so the
        # fixture states exact-f64 inputs with their exact references
        z64 = mp.mpc(float(mp.re(z)), float(mp.im(z)))
        k0 = mp.besselk(0, z64)
        k1 = mp.besselk(1, z64)
        i1 = mp.besseli(1, z64)
        cols = [
            fmt(mp.re(z64)),
            fmt(mp.im(z64)),
            fmt(mp.re(k0)),
            fmt(mp.im(k0)),
            fmt(mp.re(k1)),
            fmt(mp.im(k1)),
            fmt(mp.re(i1)),
            fmt(mp.im(i1)),
        ]
        print(",".join(cols))


if __name__ == "__main__":
    main()
