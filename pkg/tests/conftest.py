import numpy as np

from biasedsplines.systems import builtin


def make_builtin(name):
    return builtin(name, {"dim": 2} if name == "flat" else None)


def domain_points(name, n, rng):
    """Random chart points kept away from the system's singular set."""
    if name == "twolink_serial":
        a2 = rng.uniform(0.3, 2.8, n) * rng.choice([-1, 1], n)
        return np.column_stack([rng.uniform(-3, 3, n), a2])
    if name == "twolink_parallel":
        b1 = rng.uniform(-3, 3, n)
        return np.column_stack([b1, b1 + rng.uniform(0.3, 2.8, n)])
    if name.startswith("sphere"):
        return np.column_stack([rng.uniform(-3, 3, n), rng.uniform(-1.3, 1.3, n)])
    return rng.uniform(-3, 3, (n, 2))
