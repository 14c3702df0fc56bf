"""Scalar, vector and matrix fields on box domains of R^n.

All coefficient data in the library (anchors, connection coefficients,
structure functions, sections) is consumed through the field classes here,
which provide a uniform first-derivative service with three modes:

* ``dual``     -- the backing callable accepts dual numbers, derivatives are
                  exact (expression-defined fields use this),
* ``analytic`` -- an explicit gradient callable was supplied,
* ``fd``       -- central differences for opaque callables.

Fields are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import dual as dm
from .defaults import FD_STEP_SCALE


class GeoconnError(Exception):
    """Base class for library errors."""


class DomainError(GeoconnError):
    """A point lies outside the coordinate domain of a field."""


class NumericError(GeoconnError):
    """An evaluation produced a non-finite value or diverged."""


class ShapeError(GeoconnError):
    """Dimensions of the supplied objects do not match."""


@dataclass(frozen=True)
class CoordDomain:
    """Axis-aligned box of chart coordinates."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) < 1:
            raise ShapeError("domain dimension must be at least 1")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ShapeError(f"degenerate interval [{lo}, {hi}]")

    @classmethod
    def box(cls, bounds: Sequence[Sequence[float]]) -> "CoordDomain":
        return cls(tuple((float(lo), float(hi)) for lo, hi in bounds))

    @classmethod
    def cube(cls, dim: int, lo: float = -2.0, hi: float = 2.0) -> "CoordDomain":
        return cls(tuple((float(lo), float(hi)) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def contains(self, point, margin: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            return False
        for v, (lo, hi) in zip(point, self.bounds):
            if v < lo - 1e-12 + margin or v > hi + 1e-12 - margin:
                return False
        return True

    def require(self, point, margin: float = 0.0) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ShapeError(f"expected point of dim {self.dim}, got shape {point.shape}")
        if not self.contains(point, margin):
            raise DomainError(f"point {point.tolist()} outside domain {self.bounds}")
        return point

    def center(self) -> np.ndarray:
        return np.array([(lo + hi) / 2.0 for lo, hi in self.bounds])

    def sample(self, rng: np.random.Generator, count: int, margin_frac: float = 0.05) -> np.ndarray:
        """``count`` interior points, kept a fraction of each axis off the walls."""
        pts = np.empty((count, self.dim))
        for j, (lo, hi) in enumerate(self.bounds):
            pad = (hi - lo) * margin_frac
            pts[:, j] = rng.uniform(lo + pad, hi - pad, size=count)
        return pts

    def grid(self, per_axis: int, margin_frac: float = 0.05) -> np.ndarray:
        """Uniform interior grid with ``per_axis`` points along each axis."""
        axes = []
        for lo, hi in self.bounds:
            pad = (hi - lo) * margin_frac
            axes.append(np.linspace(lo + pad, hi - pad, per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def extend(self, extra_bounds: Sequence[Sequence[float]]) -> "CoordDomain":
        """Product domain, e.g. base box times a fiber box."""
        return CoordDomain(self.bounds + tuple((float(lo), float(hi)) for lo, hi in extra_bounds))


class ScalarField:
    """Real-valued field on a :class:`CoordDomain` with a derivative mode."""

    __slots__ = ("domain", "fn", "mode", "grad", "step", "vectorized")

    def __init__(
        self,
        domain: CoordDomain,
        fn: Callable,
        mode: str = "fd",
        grad: Callable | None = None,
        step: float | None = None,
        vectorized: bool = False,
    ):
        if mode not in ("dual", "analytic", "fd"):
            raise ValueError(f"unknown derivative mode {mode!r}")
        if mode == "analytic" and grad is None:
            raise ValueError("analytic mode requires a gradient callable")
        self.domain = domain
        self.fn = fn
        self.mode = mode
        self.grad = grad
        self.step = step
        self.vectorized = vectorized

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, domain: CoordDomain, value: float) -> "ScalarField":
        c = float(value)
        return cls(domain, lambda p: c, mode="dual", vectorized=True)

    @classmethod
    def coordinate(cls, domain: CoordDomain, axis: int) -> "ScalarField":
        if not 0 <= axis < domain.dim:
            raise ShapeError(f"axis {axis} out of range for dim {domain.dim}")
        return cls(domain, lambda p: p[axis], mode="dual", vectorized=True)

    # -- evaluation ----------------------------------------------------------

    def value(self, point) -> float:
        point = self.domain.require(point)
        v = self.fn(point)
        v = dm.real(v)
        if not np.isfinite(v):
            raise NumericError(f"field evaluated to {v} at {point.tolist()}")
        return float(v)

    def gen(self, values):
        """Evaluate on a sequence of floats or duals, without domain checks.

        Dual inputs require ``mode == 'dual'``.
        """
        if self.mode != "dual" and any(isinstance(v, dm.Dual) for v in values):
            raise NumericError("field does not support dual-number evaluation")
        return self.fn(values)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Values at a batch of points, shape ``(m, dim) -> (m,)``."""
        points = np.asarray(points, dtype=float)
        if self.vectorized:
            out = self.fn([points[:, j] for j in range(self.domain.dim)])
            out = np.broadcast_to(np.asarray(out, dtype=float), (points.shape[0],)).copy()
        else:
            out = np.array([float(dm.real(self.fn(p))) for p in points])
        if not np.all(np.isfinite(out)):
            raise NumericError("field evaluated to a non-finite value in batch")
        return out

    # -- differentiation -----------------------------------------------------

    def _fd_step(self, x_axis: float) -> float:
        return self.step if self.step is not None else FD_STEP_SCALE * max(1.0, abs(x_axis))

    def partial(self, point, axis: int) -> float:
        point = np.asarray(point, dtype=float)
        if not 0 <= axis < self.domain.dim:
            raise ShapeError(f"axis {axis} out of range for dim {self.domain.dim}")
        if self.mode == "analytic":
            self.domain.require(point)
            return float(np.asarray(self.grad(point), dtype=float)[axis])
        if self.mode == "dual":
            self.domain.require(point)
            duals = dm.seed(point)
            out = self.fn(duals)
            return float(out.eps[axis]) if isinstance(out, dm.Dual) else 0.0
        h = self._fd_step(point[axis])
        up = point.copy()
        dn = point.copy()
        up[axis] += h
        dn[axis] -= h
        self.domain.require(up)
        self.domain.require(dn)
        d = (dm.real(self.fn(up)) - dm.real(self.fn(dn))) / (2.0 * h)
        if not np.isfinite(d):
            raise NumericError(f"derivative evaluated to {d} at {point.tolist()}")
        return float(d)

    def gradient(self, point) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        if self.mode == "analytic":
            self.domain.require(point)
            return np.asarray(self.grad(point), dtype=float).copy()
        if self.mode == "dual":
            self.domain.require(point)
            out = self.fn(dm.seed(point))
            if isinstance(out, dm.Dual):
                return out.eps.copy()
            return np.zeros(self.domain.dim)
        return np.array([self.partial(point, j) for j in range(self.domain.dim)])

    def check_derivatives(self, rng: np.random.Generator, samples: int = 100, tol: float | None = None) -> float:
        """Max deviation between the field's own derivatives and central differences.

        Only meaningful for ``dual`` and ``analytic`` modes; raises if the
        deviation exceeds ``tol``.
        """
        from .defaults import FD_MATCH_TOL

        tol = FD_MATCH_TOL if tol is None else tol
        pts = self.domain.sample(rng, samples)
        worst = 0.0
        for p in pts:
            for axis in range(self.domain.dim):
                h = FD_STEP_SCALE * max(1.0, abs(p[axis])) * 100.0
                up, dn = p.copy(), p.copy()
                up[axis] += h
                dn[axis] -= h
                if not (self.domain.contains(up) and self.domain.contains(dn)):
                    continue
                fd = (dm.real(self.fn(up)) - dm.real(self.fn(dn))) / (2.0 * h)
                worst = max(worst, abs(self.partial(p, axis) - fd))
        if worst > tol:
            raise NumericError(f"declared derivatives deviate from differences by {worst}")
        return worst


def differentiate(f: ScalarField, point, axis: int) -> float:
    """Partial derivative of ``f`` along ``axis`` at ``point``."""
    return f.partial(point, axis)


def _common_domain(fields) -> CoordDomain:
    domains = {id(f.domain): f.domain for f in fields}
    vals = list(domains.values())
    for d in vals[1:]:
        if d.bounds != vals[0].bounds:
            raise ShapeError("fields do not share a common domain")
    return vals[0]


class VectorField:
    """Tuple of scalar fields sharing one domain, viewed as a map to R^m."""

    __slots__ = ("domain", "components")

    def __init__(self, components: Sequence[ScalarField]):
        components = tuple(components)
        if not components:
            raise ShapeError("vector field needs at least one component")
        self.domain = _common_domain(components)
        self.components = components

    def __len__(self) -> int:
        return len(self.components)

    @classmethod
    def constant(cls, domain: CoordDomain, values) -> "VectorField":
        return cls([ScalarField.constant(domain, v) for v in np.asarray(values, dtype=float)])

    def value(self, point) -> np.ndarray:
        return np.array([c.value(point) for c in self.components])

    def gen(self, values) -> list:
        return [c.gen(values) for c in self.components]

    def sample(self, points: np.ndarray) -> np.ndarray:
        return np.stack([c.sample(points) for c in self.components], axis=-1)

    def jacobian(self, point) -> np.ndarray:
        return np.stack([c.gradient(point) for c in self.components])

    @property
    def supports_dual(self) -> bool:
        return all(c.mode == "dual" for c in self.components)


class MatrixField:
    """Grid of scalar fields over one shared domain."""

    __slots__ = ("domain", "rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence[ScalarField]]):
        entries = tuple(tuple(row) for row in entries)
        if not entries or not entries[0]:
            raise ShapeError("matrix field needs at least one entry")
        cols = len(entries[0])
        if any(len(row) != cols for row in entries):
            raise ShapeError("ragged matrix field")
        self.rows = len(entries)
        self.cols = cols
        self.entries = entries
        self.domain = _common_domain([f for row in entries for f in row])

    @classmethod
    def constant(cls, domain: CoordDomain, mat) -> "MatrixField":
        mat = np.asarray(mat, dtype=float)
        return cls([[ScalarField.constant(domain, mat[i, j]) for j in range(mat.shape[1])] for i in range(mat.shape[0])])

    @classmethod
    def identity(cls, domain: CoordDomain, n: int) -> "MatrixField":
        return cls.constant(domain, np.eye(n))

    def value(self, point) -> np.ndarray:
        out = np.empty((self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, f in enumerate(row):
                out[i, j] = f.value(point)
        return out

    def gen(self, values) -> list:
        return [[f.gen(values) for f in row] for row in self.entries]

    def sample(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.empty((points.shape[0], self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, f in enumerate(row):
                out[:, i, j] = f.sample(points)
        return out

    def partial(self, point, axis: int) -> np.ndarray:
        out = np.empty((self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, f in enumerate(row):
                out[i, j] = f.partial(point, axis)
        return out

    def column(self, j: int) -> VectorField:
        return VectorField([row[j] for row in self.entries])

    @property
    def supports_dual(self) -> bool:
        return all(f.mode == "dual" for row in self.entries for f in row)


def scale_section(f: ScalarField, vec: VectorField) -> VectorField:
    """Pointwise product of a scalar field with a vector field."""
    if f.domain.bounds != vec.domain.bounds:
        raise ShapeError("fields live on different domains")
    mode = "dual" if f.mode == "dual" and vec.supports_dual else "fd"
    comps = [
        ScalarField(vec.domain, (lambda p, _c=c: f.gen(p) * _c.gen(p)), mode=mode)
        for c in vec.components
    ]
    return VectorField(comps)


def add_sections(a: VectorField, b: VectorField) -> VectorField:
    """Componentwise sum of two vector fields."""
    if len(a) != len(b) or a.domain.bounds != b.domain.bounds:
        raise ShapeError("vector fields are not compatible")
    mode = "dual" if a.supports_dual and b.supports_dual else "fd"
    comps = [
        ScalarField(a.domain, (lambda p, _u=u, _v=v: _u.gen(p) + _v.gen(p)), mode=mode)
        for u, v in zip(a.components, b.components)
    ]
    return VectorField(comps)


def jacobian(field: VectorField, point) -> np.ndarray:
    """Jacobian matrix, entry ``(i, j)`` the j-partial of component i."""
    return field.jacobian(point)


def lie_bracket(x_field: VectorField, y_field: VectorField, point) -> np.ndarray:
    """Bracket of two vector fields on a common domain.

    Component form ``X^j d_j Y^i - Y^j d_j X^i`` evaluated at ``point``.
    """
    if len(x_field) != x_field.domain.dim or len(y_field) != y_field.domain.dim:
        raise ShapeError("lie_bracket needs square vector fields on their domain")
    if x_field.domain.bounds != y_field.domain.bounds:
        raise ShapeError("vector fields live on different domains")
    xv = x_field.value(point)
    yv = y_field.value(point)
    jx = x_field.jacobian(point)
    jy = y_field.jacobian(point)
    return jy @ xv - jx @ yv
