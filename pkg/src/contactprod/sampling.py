"""Deterministic sampling of points and polynomial test fields.

All randomness flows through `random.Random` seeded from an explicit
64-bit seed, recorded in every report, so residuals reproduce
bit-for-bit.  Per-check seeds are derived from (master seed, check name)
so the execution order of checks never changes their samples.

Each sample consumes a fixed number of RNG draws, which makes residual
maxima monotone under sample-count extension (the first n samples of a
longer run are identical).
"""

from __future__ import annotations

import hashlib
import random

from . import expr as ex

POLY_TERMS = 3  # constant + linear + quadratic term per component


def derive_seed(master_seed, name):
    """Stable 64-bit seed for a named check under a master seed."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def sample_point(rng: random.Random, M):
    return tuple(lo + rng.random() * (hi - lo) for lo, hi in M.box)


def sample_components(rng: random.Random, dim):
    return tuple(rng.uniform(-1.0, 1.0) for _ in range(dim))


def polynomial_field(rng: random.Random, M, degree=2):
    """Random vector field with polynomial components of degree <= `degree`.

    Fixed RNG consumption per component: one constant, one linear, one
    quadratic term (higher terms dropped when degree < 2).
    """
    comps = []
    for _ in range(M.dim):
        c0 = rng.uniform(-1.0, 1.0)
        c1 = rng.uniform(-1.0, 1.0)
        a = rng.randrange(M.dim)
        c2 = rng.uniform(-1.0, 1.0)
        b = rng.randrange(M.dim)
        c = rng.randrange(M.dim)
        e = ex.const(c0)
        if degree >= 1:
            e = ex.add(e, ex.scale(c1, ex.var(M.coords[a])))
        if degree >= 2:
            e = ex.add(
                e, ex.scale(c2, ex.mul(ex.var(M.coords[b]), ex.var(M.coords[c])))
            )
        comps.append(e)
    return tuple(comps)
