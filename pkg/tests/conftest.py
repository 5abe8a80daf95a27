"""Shared builders for test instances and fairness specs."""

from fractions import Fraction

import numpy as np
import pytest

from fairclus import GroupFairnessSpec, make_instance, random_instance


def window_gf(inst, width=Fraction(1, 4), rho=0):
    """Ratio windows of the given width around the global color ratios."""
    counts = inst.color_counts()
    lower, upper = [], []
    for c in counts:
        ratio = Fraction(int(c), inst.n)
        lower.append(max(Fraction(0), ratio - width))
        upper.append(min(Fraction(1), ratio + width))
    return GroupFairnessSpec(lower=tuple(lower), upper=tuple(upper), rho=rho)


def vacuous_gf(m):
    return GroupFairnessSpec(lower=(0,) * m, upper=(1,) * m, rho=0)


def balanced_instance(n, m, seed):
    """Random coords with color counts as equal as possible (round-robin)."""
    rng = np.random.default_rng(seed)
    colors = np.array([i % m for i in range(n)])
    rng.shuffle(colors)
    coords = rng.uniform(0.0, 1.0, size=(n, 2))
    return make_instance(colors, coords=coords, m=m)


def line_instance(positions, colors):
    coords = [[float(p)] for p in positions]
    return make_instance(colors, coords=coords)


@pytest.fixture
def small_random():
    return random_instance(8, 2, seed=7)
