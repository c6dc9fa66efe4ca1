"""Fixed boundary-value problems used to cross-check the solvers."""

from __future__ import annotations

import numpy as np

from .solvers import BoundaryProblem
from .systems import builtin

# name -> (system, params, q0, qf, v0, vf)
_TABLE = {
    "flat_quadratic_dip": ("flat_quadratic", {}, [0.0, 1.0], [2.0, 1.0], [0.0, 0.0], [0.0, 0.0]),
    "sphere_dual_arc": ("sphere_dual", {}, [0.0, 0.2], [1.2, 0.4], [1.0, 0.5], [1.0, -0.5]),
    "sphere_torque_arc": ("sphere_torque", {}, [-0.8, 0.3], [0.8, 0.3], [1.5, 0.6], [1.5, -0.6]),
    "torus_torque_turn": ("torus_torque", {}, [0.0, 0.0], [0.5, 0.8], [0.5, 0.0], [0.5, 0.5]),
    "twolink_serial_reach": ("twolink_serial", {}, [0.3, 1.2], [1.0, 0.8], [0.0, 0.0], [0.0, 0.0]),
    "twolink_parallel_reach": ("twolink_parallel", {}, [0.3, 1.5], [1.0, 1.8], [0.0, 0.0], [0.0, 0.0]),
}

BENCHMARK_NAMES = tuple(_TABLE)


def benchmark(name: str, **kwargs) -> BoundaryProblem:
    """The named benchmark; extra keywords go to :class:`BoundaryProblem`."""
    system, params, q0, qf, v0, vf = _TABLE[name]
    return BoundaryProblem(builtin(system, params), np.array(q0), np.array(qf),
                           np.array(v0), np.array(vf), **kwargs)


def sphere_latitude_pair(phi=0.6, half_width=1.2, speed=1.0, climb=0.3):
    """Symmetric sphere problem with both endpoints on latitude ``phi``.

    Returns the ``(Nt = I, Nt = M^-1)`` pair sharing the same boundary data.
    """
    q0, qf = np.array([-half_width, phi]), np.array([half_width, phi])
    v0, vf = np.array([speed, climb]), np.array([speed, -climb])
    torque = BoundaryProblem(builtin("sphere_torque"), q0, qf, v0, vf)
    dual = BoundaryProblem(builtin("sphere_dual"), q0, qf, v0, vf)
    return torque, dual
