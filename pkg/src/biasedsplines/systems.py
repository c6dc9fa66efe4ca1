"""Example mechanical systems and expression-defined systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import ExpressionError, GeometryError, SystemSpecError
from .expressions import eval_with_partials, parse_expression
from .geometry import TensorField, hstar_field, inverse_field, spd_inverse, torque_cometric

SPHERE_POLE_MARGIN = 1e-3
# the arm is singular when fully stretched or folded (relative angle a multiple of pi)
TWOLINK_SINGULAR_MARGIN = 1e-3


class CompiledSpec(NamedTuple):
    """Selects the compiled jets of a builtin system (see ``_kernels``).

    The cometric is ``blend * target + (1 - blend) * M^-1``.
    """

    metric_kind: int
    metric_params: np.ndarray
    cometric_kind: int
    cometric_params: np.ndarray
    blend: float = 1.0


def _spec(mk, mp, ck, cp):
    return CompiledSpec(mk, np.asarray(mp, dtype=float), ck, np.asarray(cp, dtype=float))


@dataclass(frozen=True, eq=False)
class SystemDefinition:
    """A chart with a kinetic metric and an actuation cometric.

    ``domain`` holds optional ``(low, high)`` open bounds per coordinate and
    ``regular`` an optional predicate on points (both must hold);
    ``periodic`` is informational only (solutions live on the universal cover).
    """

    name: str
    dim: int
    metric: TensorField
    cometric: TensorField
    params: Mapping[str, float] = field(default_factory=dict)
    coords: tuple = ()
    periodic: tuple = ()
    domain: Optional[tuple] = None
    compiled: Optional[CompiledSpec] = None
    regular: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.metric.dim != self.dim or self.cometric.dim != self.dim:
            raise SystemSpecError("metric, cometric and chart dimensions disagree")
        if not self.coords:
            object.__setattr__(self, "coords", default_coordinate_names(self.dim))
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * self.dim)

    @cached_property
    def hstar(self) -> TensorField:
        """Dual of the induced metric ``M Nt M``."""
        return hstar_field(self.metric, self.cometric)

    def in_domain(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        if not np.all(np.isfinite(q)):
            return False
        if self.regular is not None and not np.all(self.regular(q)):
            return False
        if self.domain is None:
            return True
        for k, bounds in enumerate(self.domain):
            if bounds is None:
                continue
            lo, hi = bounds
            if np.any(q[..., k] <= lo) or np.any(q[..., k] >= hi):
                return False
        return True

    def with_cometric(self, cometric: TensorField, name: Optional[str] = None,
                      compiled: Optional[CompiledSpec] = None) -> "SystemDefinition":
        return SystemDefinition(
            name=name or self.name,
            dim=self.dim,
            metric=self.metric,
            cometric=cometric,
            params=dict(self.params),
            coords=self.coords,
            periodic=self.periodic,
            domain=self.domain,
            compiled=compiled,
            regular=self.regular,
        )

    def dual_cometric_system(self) -> "SystemDefinition":
        """Same chart and metric with the cometric replaced by ``M^-1``."""
        spec = None
        if self.compiled is not None:
            spec = self.compiled._replace(cometric_kind=K.COMETRIC_DUAL, cometric_params=np.zeros(0), blend=1.0)
        return self.with_cometric(inverse_field(self.metric), name=f"{self.name}[dual]", compiled=spec)

    def blended(self, s: float) -> "SystemDefinition":
        """Cometric ``s * Nt + (1 - s) * M^-1``; ``s = 0`` is the dual-metric system."""
        if not 0.0 <= s <= 1.0:
            raise ValueError("blend parameter must lie in [0, 1]")
        if s == 1.0:
            return self
        field_ = blend_fields(inverse_field(self.metric), self.cometric, s)
        spec = None
        if self.compiled is not None:
            spec = self.compiled._replace(blend=self.compiled.blend * s)
        return self.with_cometric(field_, name=f"{self.name}[blend={s:g}]", compiled=spec)


def blend_fields(a: TensorField, b: TensorField, s: float) -> TensorField:
    """Pointwise ``(1 - s) a + s b``."""
    if a.dim != b.dim:
        raise SystemSpecError("cannot blend fields of different dimension")

    def mix(fa, fb):
        return lambda q: (1.0 - s) * fa(q) + s * fb(q)

    return TensorField(
        a.dim,
        mix(a.value, b.value),
        mix(a.partials, b.partials),
        mix(a.second_partials, b.second_partials),
        positive=a.positive and b.positive,
        constant=a.constant and b.constant,
    )


def default_coordinate_names(d):
    if d == 1:
        return ("x",)
    if d == 2:
        return ("x", "y")
    if d == 3:
        return ("x", "y", "z")
    return tuple(f"q{i + 1}" for i in range(d))


def _diag_field(d, entries, d_entries=None, dd_entries=None, positive=True):
    """Field whose matrix is diagonal with entries depending on the point.

    ``entries(q)`` returns ``(..., d)`` diagonal values; ``d_entries(q)`` returns
    ``(..., d, d)`` with ``[k, i] = d_k diag_i``; ``dd_entries`` is ``[k, l, i]``.
    """
    idx = np.arange(d)

    def value(q):
        diag = entries(q)
        out = np.zeros(diag.shape[:-1] + (d, d))
        out[..., idx, idx] = diag
        return out

    def first(q):
        dd = d_entries(q)
        out = np.zeros(dd.shape[:-1] + (d, d))
        out[..., idx, idx] = dd
        return out

    def second(q):
        dd = dd_entries(q)
        out = np.zeros(dd.shape[:-1] + (d, d))
        out[..., idx, idx] = dd
        return out

    return TensorField(d, value, first if d_entries else None, second if dd_entries else None, positive)


def _identity_field(d):
    eye = np.eye(d)
    return TensorField(d, lambda q: np.broadcast_to(eye, np.shape(q)[:-1] + (d, d)).copy(), constant=True)


def _sphere_metric():
    def entries(q):
        c = np.cos(q[..., 1])
        return np.stack([c * c, np.ones_like(c)], axis=-1)

    def d_entries(q):
        out = np.zeros(q.shape[:-1] + (2, 2))
        out[..., 1, 0] = -np.sin(2 * q[..., 1])
        return out

    def dd_entries(q):
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = -2 * np.cos(2 * q[..., 1])
        return out

    return _diag_field(2, entries, d_entries, dd_entries)


def _sphere_dual_cometric():
    def entries(q):
        c = np.cos(q[..., 1])
        return np.stack([1.0 / (c * c), np.ones_like(c)], axis=-1)

    def d_entries(q):
        s, c = np.sin(q[..., 1]), np.cos(q[..., 1])
        out = np.zeros(q.shape[:-1] + (2, 2))
        out[..., 1, 0] = 2 * s / c**3
        return out

    def dd_entries(q):
        s, c = np.sin(q[..., 1]), np.cos(q[..., 1])
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 2 / c**2 + 6 * s * s / c**4
        return out

    return _diag_field(2, entries, d_entries, dd_entries)


def _torus_metric(ell):
    def entries(q):
        r = ell + np.cos(q[..., 1])
        return np.stack([r * r, np.ones_like(r)], axis=-1)

    def d_entries(q):
        r = ell + np.cos(q[..., 1])
        out = np.zeros(q.shape[:-1] + (2, 2))
        out[..., 1, 0] = -2 * r * np.sin(q[..., 1])
        return out

    def dd_entries(q):
        s, c = np.sin(q[..., 1]), np.cos(q[..., 1])
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 2 * s * s - 2 * (ell + c) * c
        return out

    return _diag_field(2, entries, d_entries, dd_entries)


def _quadratic_cometric(c):
    def entries(q):
        y = q[..., 1]
        return np.stack([1 + c * y * y, np.ones_like(y)], axis=-1)

    def d_entries(q):
        out = np.zeros(q.shape[:-1] + (2, 2))
        out[..., 1, 0] = 2 * c * q[..., 1]
        return out

    def dd_entries(q):
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 2 * c
        return out

    return _diag_field(2, entries, d_entries, dd_entries)


def _twolink_serial_metric(L1, L2, m):
    # point mass at the distal end; coordinates are the joint angles
    P = np.array([[2.0, 1.0], [1.0, 0.0]])
    base = m * np.array([[L1 * L1 + L2 * L2, L2 * L2], [L2 * L2, L2 * L2]])
    k = m * L1 * L2

    def value(q):
        c2 = np.cos(q[..., 1])[..., None, None]
        return base + k * c2 * P

    def first(q):
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 1, :, :] = -k * np.sin(q[..., 1])[..., None, None] * P
        return out

    def second(q):
        out = np.zeros(q.shape[:-1] + (2, 2, 2, 2))
        out[..., 1, 1, :, :] = -k * np.cos(q[..., 1])[..., None, None] * P
        return out

    return TensorField(2, value, first, second)


def _twolink_parallel_metric(L1, L2, m):
    # coordinates are the absolute link orientations
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    base = m * np.diag([L1 * L1, L2 * L2])
    k = m * L1 * L2

    def value(q):
        cu = np.cos(q[..., 0] - q[..., 1])[..., None, None]
        return base + k * cu * P

    def first(q):
        su = np.sin(q[..., 0] - q[..., 1])[..., None, None]
        out = np.zeros(q.shape[:-1] + (2, 2, 2))
        out[..., 0, :, :] = -k * su * P
        out[..., 1, :, :] = k * su * P
        return out

    def second(q):
        cu = np.cos(q[..., 0] - q[..., 1])[..., None, None]
        out = np.zeros(q.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 0, :, :] = -k * cu * P
        out[..., 1, 1, :, :] = -k * cu * P
        out[..., 0, 1, :, :] = k * cu * P
        out[..., 1, 0, :, :] = k * cu * P
        return out

    return TensorField(2, value, first, second)


_DEFAULTS = {
    "flat": {"dim": 1},
    "flat_quadratic": {"c": 10.0},
    "sphere_dual": {},
    "sphere_torque": {"k1": 1.0, "k2": 1.0},
    "torus_torque": {"ell": 2.0, "k1": 1.0, "k2": 1.0},
    "twolink_serial": {"L1": 1.0, "L2": 1.0, "m": 1.0, "k1": 1.0, "k2": 1.0},
    "twolink_parallel": {"L1": 1.0, "L2": 1.0, "m": 1.0, "k1": 1.0, "k2": 1.0},
}

BUILTIN_NAMES = tuple(_DEFAULTS)


def builtin(name: str, params: Optional[Mapping[str, float]] = None) -> SystemDefinition:
    """One of the catalogued example systems, with analytic first and second partials."""
    if name not in _DEFAULTS:
        raise SystemSpecError(f"unknown system {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")
    p = dict(_DEFAULTS[name])
    for key, val in (params or {}).items():
        if key not in p:
            raise SystemSpecError(f"system {name!r} has no parameter {key!r}")
        try:
            p[key] = float(val)
        except (TypeError, ValueError):
            raise SystemSpecError(f"parameter {key!r} must be a number") from None
        if not np.isfinite(p[key]):
            raise SystemSpecError(f"parameter {key!r} must be finite")

    def positive(*keys):
        for key in keys:
            if p[key] <= 0:
                raise SystemSpecError(f"parameter {key!r} must be positive, got {p[key]}")

    def weights():
        positive("k1", "k2")
        return torque_cometric([p["k1"], p["k2"]])

    sphere_domain = (None, (-np.pi / 2 + SPHERE_POLE_MARGIN, np.pi / 2 - SPHERE_POLE_MARGIN))
    if name == "flat":
        d = int(p["dim"])
        if d != p["dim"] or d < 1:
            raise SystemSpecError("flat system dimension must be a positive integer")
        p["dim"] = d
        return SystemDefinition(name, d, _identity_field(d), _identity_field(d), p,
                                compiled=_spec(K.METRIC_IDENTITY, [], K.COMETRIC_DIAGONAL, np.ones(d)))
    if name == "flat_quadratic":
        if p["c"] < 0:
            raise SystemSpecError("flat_quadratic coefficient c must be nonnegative")
        return SystemDefinition(name, 2, _identity_field(2), _quadratic_cometric(p["c"]), p, ("x", "y"),
                                compiled=_spec(K.METRIC_IDENTITY, [], K.COMETRIC_QUADRATIC, [p["c"]]))
    if name == "sphere_dual":
        return SystemDefinition(name, 2, _sphere_metric(), _sphere_dual_cometric(), p,
                                ("lam", "phi"), (True, False), sphere_domain,
                                _spec(K.METRIC_SPHERE, [], K.COMETRIC_DUAL, []))
    if name == "sphere_torque":
        return SystemDefinition(name, 2, _sphere_metric(), weights(), p,
                                ("lam", "phi"), (True, False), sphere_domain,
                                _spec(K.METRIC_SPHERE, [], K.COMETRIC_DIAGONAL, [p["k1"], p["k2"]]))
    if name == "torus_torque":
        if p["ell"] <= 1:
            raise SystemSpecError(f"torus parameter ell must exceed 1, got {p['ell']}")
        return SystemDefinition(name, 2, _torus_metric(p["ell"]), weights(), p,
                                ("lam", "phi"), (True, True), None,
                                _spec(K.METRIC_TORUS, [p["ell"]], K.COMETRIC_DIAGONAL, [p["k1"], p["k2"]]))
    positive("L1", "L2", "m")
    link = [p["L1"], p["L2"], p["m"]]
    cometric = weights()
    if name == "twolink_serial":
        metric = _twolink_serial_metric(*link)
        spec = _spec(K.METRIC_SERIAL, link, K.COMETRIC_DIAGONAL, [p["k1"], p["k2"]])
        return SystemDefinition(name, 2, metric, cometric, p, ("a1", "a2"), (True, True), None, spec,
                                lambda q: np.abs(np.sin(q[..., 1])) > TWOLINK_SINGULAR_MARGIN)
    metric = _twolink_parallel_metric(*link)
    spec = _spec(K.METRIC_PARALLEL, link, K.COMETRIC_DIAGONAL, [p["k1"], p["k2"]])
    return SystemDefinition(name, 2, metric, cometric, p, ("b1", "b2"), (True, True), None, spec,
                            lambda q: np.abs(np.sin(q[..., 1] - q[..., 0])) > TWOLINK_SINGULAR_MARGIN)


def twolink_position(name, q, L1=1.0, L2=1.0):
    """Planar position of the distal mass for serial or parallel coordinates."""
    q = np.asarray(q, dtype=float)
    th1 = q[..., 0]
    th2 = q[..., 0] + q[..., 1] if name == "twolink_serial" else q[..., 1]
    return np.stack([L1 * np.cos(th1) + L2 * np.cos(th2),
                     L1 * np.sin(th1) + L2 * np.sin(th2)], axis=-1)


# ---------------------------------------------------------------- expressions


def _normalize_entries(entries, d, label):
    if d == 1 and isinstance(entries, (list, tuple)) and len(entries) == 1 \
            and not isinstance(entries[0], (list, tuple)):
        entries = [list(entries)]
    if not isinstance(entries, (list, tuple)) or len(entries) != d:
        raise SystemSpecError(f"{label} must be a {d}x{d} list of entries")
    rows = []
    for row in entries:
        if not isinstance(row, (list, tuple)) or len(row) != d:
            raise SystemSpecError(f"{label} must be a {d}x{d} list of entries")
        rows.append([None if (e is None or (isinstance(e, str) and not e.strip())) else str(e) for e in row])
    return rows


class _ExpressionMatrix:
    """Symmetric matrix of parsed expressions evaluated with hyper-dual partials."""

    def __init__(self, rows, coords, params, label):
        d = len(rows)
        self.d = d
        self.coords = tuple(coords)
        self.params = dict(params)
        self.label = label
        self.slots = {}
        self.mirrors = []
        for i in range(d):
            for j in range(i, d):
                upper, lower = rows[i][j], rows[j][i]
                if upper is None and lower is None:
                    raise SystemSpecError(f"{label}[{i}][{j}] is missing")
                text = upper if upper is not None else lower
                try:
                    expr = parse_expression(text)
                except ExpressionError as exc:
                    raise SystemSpecError(f"{label}[{i}][{j}]: {exc}") from exc
                self._check_identifiers(expr, i, j)
                if upper is not None and lower is not None and "".join(upper.split()) != "".join(lower.split()):
                    other = parse_expression(lower)
                    self._check_identifiers(other, j, i)
                    self.mirrors.append((i, j, expr, other))
                self.slots[(i, j)] = expr
        self.coord_dependent = {
            key: bool(expr.identifiers & set(self.coords)) for key, expr in self.slots.items()
        }

    def _check_identifiers(self, expr, i, j):
        unknown = expr.identifiers - set(self.coords) - set(self.params)
        if unknown:
            raise SystemSpecError(f"{self.label}[{i}][{j}] uses unknown identifiers {sorted(unknown)}")

    def _bindings(self, q):
        env = {name: float(v) for name, v in self.params.items()}
        for k, name in enumerate(self.coords):
            env[name] = q[..., k]
        return env

    def check_symmetry(self, points):
        for i, j, a, b in self.mirrors:
            for q in points:
                env = self._bindings(np.asarray(q, dtype=float))
                if abs(float(a.evaluate(env)) - float(b.evaluate(env))) > 1e-12:
                    raise SystemSpecError(
                        f"{self.label} is not symmetric: entries [{i}][{j}] and [{j}][{i}] "
                        f"differ at {np.asarray(q).tolist()}")

    def jet(self, q, order):
        d = self.d
        lead = q.shape[:-1]
        T = np.zeros(lead + (d, d))
        dT = np.zeros(lead + (d, d, d)) if order >= 1 else None
        ddT = np.zeros(lead + (d, d, d, d)) if order >= 2 else None
        env = self._bindings(q)
        for (i, j), expr in self.slots.items():
            if order == 0 or not self.coord_dependent[(i, j)]:
                val = np.broadcast_to(np.asarray(expr.evaluate(env), dtype=float), lead)
            else:
                val, grad, hess = eval_with_partials(expr, env, wrt=self.coords)
                dT[..., :, i, j] = grad
                dT[..., :, j, i] = grad
                if order >= 2:
                    ddT[..., :, :, i, j] = hess
                    ddT[..., :, :, j, i] = hess
            T[..., i, j] = val
            T[..., j, i] = val
        return T, dT, ddT

    def field(self):
        constant = not any(self.coord_dependent.values())
        return TensorField(
            dim=self.d,
            evaluator=lambda q: self.jet(q, 0)[0],
            first=lambda q: self.jet(q, 1)[1],
            second=lambda q: self.jet(q, 2)[2],
            positive=True,
            constant=constant,
            jet_fn=self.jet,
        )


def _probe_points(d, probe, domain):
    if probe is not None:
        lower, upper, count = probe
        lower, upper = np.broadcast_to(lower, (d,)), np.broadcast_to(upper, (d,))
        axes = [np.linspace(lo, hi, count) for lo, hi in zip(lower, upper)]
        return [np.array(p) for p in itertools.product(*axes)]
    bounds = []
    for k in range(d):
        b = domain[k] if domain is not None and domain[k] is not None else (-1.0, 1.0)
        lo, hi = b
        lo, hi = max(lo, -1.0), min(hi, 1.0)
        bounds.append((lo, hi))
    if d <= 3:
        axes = [np.linspace(lo, hi, 5)[1:-1] if domain is not None and domain[k] is not None
                else np.linspace(lo, hi, 5) for k, (lo, hi) in enumerate(bounds)]
        return [np.array(p) for p in itertools.product(*axes)]
    rng = np.random.default_rng(0)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return list(lo + (hi - lo) * rng.random((50, d)))


def system_from_expressions(
    dim: int,
    metric: Sequence,
    cometric: Sequence,
    params: Optional[Mapping[str, float]] = None,
    coords: Optional[Sequence[str]] = None,
    name: str = "expression",
    probe=None,
    domain=None,
    periodic=None,
) -> SystemDefinition:
    """Build a system from d x d grids of expression strings.

    Symmetric slots may be given once (the mirror left as ``None`` or ``""``).
    Both fields are checked for symmetry and positive definiteness on a probe
    grid (``probe=(lower, upper, count)``; default a small grid in [-1, 1]^d
    clipped to ``domain``).
    """
    if not isinstance(dim, int) or dim < 1:
        raise SystemSpecError("dimension must be a positive integer")
    coords = tuple(coords) if coords else default_coordinate_names(dim)
    if len(coords) != dim or len(set(coords)) != dim:
        raise SystemSpecError(f"need {dim} distinct coordinate names")
    params = {k: float(v) for k, v in (params or {}).items()}
    clash = set(coords) & set(params)
    if clash:
        raise SystemSpecError(f"names used as both coordinate and parameter: {sorted(clash)}")
    M = _ExpressionMatrix(_normalize_entries(metric, dim, "metric"), coords, params, "metric")
    Nt = _ExpressionMatrix(_normalize_entries(cometric, dim, "cometric"), coords, params, "cometric")
    points = _probe_points(dim, probe, domain)
    M.check_symmetry(points)
    Nt.check_symmetry(points)
    mf, nf = M.field(), Nt.field()
    for q in points:
        for label, f in (("metric", mf), ("cometric", nf)):
            try:
                spd_inverse(f.value(q), what=label, point=q)
            except (GeometryError, ExpressionError) as exc:
                raise SystemSpecError(f"{label} probe failed at {np.asarray(q).tolist()}: {exc}") from exc
    return SystemDefinition(name, dim, mf, nf, params, coords, tuple(periodic) if periodic else (),
                            tuple(domain) if domain is not None else None)
