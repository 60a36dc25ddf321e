"""Shared generators for the test suite."""

import numpy as np

from hlddc.lti import RationalTF


def random_tf(rng, n, discrete=False, proper_strict=False):
    """Random real stable SISO transfer function of exact order n."""
    ps = []
    while len(ps) < n:
        if n - len(ps) >= 2 and rng.random() < 0.5:
            if discrete:
                p = rng.uniform(0.2, 0.9) * np.exp(1j * rng.uniform(0.2, 2.9))
            else:
                p = complex(-rng.uniform(0.2, 3), rng.uniform(0.5, 5))
            ps += [p, np.conj(p)]
        else:
            ps.append(rng.uniform(-0.9, 0.9) if discrete else -rng.uniform(0.2, 5))
    nz = n - 1 if proper_strict else n
    zs = rng.uniform(-2, 2, size=nz)
    num = rng.uniform(0.5, 2) * np.poly(zs) if nz else np.array([rng.uniform(0.5, 2)])
    return RationalTF(num, np.real(np.poly(ps)), 0.1 if discrete else None)


def ideal_controller(P: RationalTF, M: RationalTF) -> RationalTF:
    """Exact ``M / (P (1 - M))`` by polynomial algebra."""
    num = np.polymul(M.num, P.den)
    den = np.polymul(P.num, np.polysub(M.den, M.num))
    return RationalTF(num, den)
