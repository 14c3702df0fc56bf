"""Verification suite: every computable identity as a pass/fail check.

Each check returns a record with the measured residual and the gate it was
held to; the CLI aggregates them into a machine-readable report.  Sampling is
driven by a seeded generator so reruns are reproducible.
"""

from __future__ import annotations

import numpy as np

from .bundle import AnchorBundle
from .connection import Connection, LinearConnection, lift, partial_connection_test
from .defaults import ANCHOR_HOM_TOL
from .derivative import nabla
from .fields import CoordDomain, ScalarField, VectorField, add_sections, scale_section
from .prelie import (
    PreLieStructure,
    anchor_hom_residual,
    contract_curvature,
    curvature_components,
    involutivity_defect,
    star_product,
    star_section,
    torsion,
    torsion_components,
)


def random_linear_section(domain: CoordDomain, size: int, rng: np.random.Generator) -> VectorField:
    """Section with affine components and exact derivatives."""
    const = rng.uniform(-1.0, 1.0, size)
    slope = rng.uniform(-1.0, 1.0, (size, domain.dim))

    def comp(i):
        def fn(p, _a=const[i], _b=slope[i]):
            out = _a
            for j in range(domain.dim):
                out = out + _b[j] * p[j]
            return out

        return ScalarField(domain, fn, mode="dual")

    return VectorField([comp(i) for i in range(size)])


def random_scalar(domain: CoordDomain, rng: np.random.Generator) -> ScalarField:
    const = rng.uniform(-1.0, 1.0)
    slope = rng.uniform(-1.0, 1.0, domain.dim)

    def fn(p):
        out = const
        for j in range(domain.dim):
            out = out + slope[j] * p[j]
        return out

    return ScalarField(domain, fn, mode="dual")


def _record(name: str, residual: float, tolerance: float, **extra) -> dict:
    rec = {"name": name, "residual": residual, "tolerance": tolerance, "passed": bool(residual <= tolerance)}
    rec.update(extra)
    return rec


def check_admissibility(bundle: AnchorBundle, curves, default_tol: float) -> list[dict]:
    out = []
    for idx, curve in enumerate(curves):
        residual = bundle.admissibility_residual(curve)
        out.append(_record(f"admissibility[{idx}]", residual, curve.residual_tol or default_tol))
    return out


def check_partial_connection(conn: Connection, points, rng: np.random.Generator) -> dict:
    witness = None
    passed = True
    for x in points:
        ok, report = partial_connection_test(conn, x, rng=rng)
        if not ok:
            passed = False
            witness = {"x": report["x"], "y": report["witness"]}
            break
    return {"name": "partial_connection", "passed": passed, "witness": witness}


def check_anchor_hom(struct: PreLieStructure, points, tol: float) -> dict:
    residual = max(anchor_hom_residual(struct, x) for x in points)
    return _record("anchor_hom", residual, tol)


def check_lift_linearity(conn: Connection, rng: np.random.Generator, samples: int, tol: float = 1e-10) -> dict:
    """Additivity and function-linearity of the section lift, and the
    projection property of its base component."""
    dom = conn.bundle.base
    k = conn.bundle.k
    worst = 0.0
    pts = dom.sample(rng, samples)
    for x in pts:
        y = rng.uniform(-2.0, 2.0, conn.l)
        s1 = random_linear_section(dom, k, rng)
        s2 = random_linear_section(dom, k, rng)
        f = random_scalar(dom, rng)
        e = (x, y)
        dx1, dy1 = lift(conn, e, s1.value(x))
        dx2, dy2 = lift(conn, e, s2.value(x))
        dxs, dys = lift(conn, e, add_sections(s1, s2).value(x))
        worst = max(worst, float(np.max(np.abs(dxs - dx1 - dx2))), float(np.max(np.abs(dys - dy1 - dy2))))
        dxf, dyf = lift(conn, e, scale_section(f, s1).value(x))
        fv = f.value(x)
        worst = max(worst, float(np.max(np.abs(dxf - fv * dx1))), float(np.max(np.abs(dyf - fv * dy1))))
        rho = conn.bundle.anchor_matrix(x) @ s1.value(x)
        worst = max(worst, float(np.max(np.abs(dx1 - rho))))
    return _record("lift_linearity", worst, tol)


def check_star_leibniz(struct: PreLieStructure, rng: np.random.Generator, samples: int, tol: float = 1e-6) -> dict:
    """Derivation rule of the product in its second argument."""
    dom = struct.bundle.base
    k = struct.bundle.k
    gamma = struct.bundle.gamma
    worst = 0.0
    for x in dom.sample(rng, samples):
        s1 = random_linear_section(dom, k, rng)
        s2 = random_linear_section(dom, k, rng)
        f = random_scalar(dom, rng)
        lhs = star_product(struct, s1, scale_section(f, s2), x)
        rho_s1 = gamma.value(x) @ s1.value(x)
        rhs = f.value(x) * star_product(struct, s1, s2, x) + (rho_s1 @ f.gradient(x)) * s2.value(x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return _record("star_leibniz", worst, tol)


def check_derivative_axioms(conn: LinearConnection, rng: np.random.Generator, samples: int, tol: float = 1e-6) -> dict:
    """Bilinearity, function-linearity in the direction and the product rule."""
    dom = conn.bundle.base
    k, l = conn.bundle.k, conn.l
    worst = 0.0
    for x in dom.sample(rng, samples):
        s1 = random_linear_section(dom, k, rng)
        s2 = random_linear_section(dom, k, rng)
        psi1 = random_linear_section(dom, l, rng)
        psi2 = random_linear_section(dom, l, rng)
        f = random_scalar(dom, rng)
        a, b = rng.uniform(-2.0, 2.0, 2)

        base = nabla(conn, s1, psi1, x)
        lin_s = nabla(conn, add_sections(s1, s2), psi1, x) - base - nabla(conn, s2, psi1, x)
        lin_psi = nabla(conn, s1, add_sections(psi1, psi2), x) - base - nabla(conn, s1, psi2, x)
        worst = max(worst, float(np.max(np.abs(lin_s))), float(np.max(np.abs(lin_psi))))

        scaled_s = VectorField(
            [ScalarField(dom, (lambda p, _c=c, _a=a: _a * _c.gen(p)), mode="dual") for c in s1.components]
        )
        scaled_psi = VectorField(
            [ScalarField(dom, (lambda p, _c=c, _b=b: _b * _c.gen(p)), mode="dual") for c in psi1.components]
        )
        worst = max(worst, float(np.max(np.abs(nabla(conn, scaled_s, psi1, x) - a * base))))
        worst = max(worst, float(np.max(np.abs(nabla(conn, s1, scaled_psi, x) - b * base))))

        fun_lin = nabla(conn, scale_section(f, s1), psi1, x) - f.value(x) * base
        worst = max(worst, float(np.max(np.abs(fun_lin))))

        rho_s1 = conn.bundle.anchor_matrix(x) @ s1.value(x)
        leibniz = (
            nabla(conn, s1, scale_section(f, psi1), x)
            - f.value(x) * base
            - (rho_s1 @ f.gradient(x)) * psi1.value(x)
        )
        worst = max(worst, float(np.max(np.abs(leibniz))))
    return _record("derivative_axioms", worst, tol)


def check_bracket_defect(
    conn: LinearConnection,
    struct: PreLieStructure,
    rng: np.random.Generator,
    samples: int,
    base_tol: float = 1e-6,
    fiber_tol: float = 1e-5,
    hom_tol: float = ANCHOR_HOM_TOL,
) -> dict:
    """Vertical defect of lifted brackets against the curvature contraction.

    The defect fiber equals the curvature contracted in reversed argument
    order (the lift-image orientation), so the residual measured here is
    ``defect + R(s1, s2) y``.
    """
    dom = conn.bundle.base
    k = conn.bundle.k
    worst_base = 0.0
    worst_fiber = 0.0
    for x in dom.sample(rng, samples):
        y = rng.uniform(-2.0, 2.0, conn.l)
        s1 = random_linear_section(dom, k, rng)
        s2 = random_linear_section(dom, k, rng)
        defect = involutivity_defect(conn, struct, s1, s2, (x, y), hom_tol=hom_tol)
        comp = curvature_components(conn, struct, x)
        contraction = contract_curvature(comp, s1.value(x), s2.value(x), y)
        worst_base = max(worst_base, defect.base_max)
        worst_fiber = max(worst_fiber, float(np.max(np.abs(defect.fiber + contraction))))
    rec = _record("bracket_defect", worst_fiber, fiber_tol)
    rec["base_residual"] = worst_base
    rec["base_tolerance"] = base_tol
    rec["passed"] = bool(rec["passed"] and worst_base <= base_tol)
    return rec


def check_torsion_components(conn: LinearConnection, struct: PreLieStructure, points, tol: float = 1e-8) -> dict:
    """Frame-section torsion against the component formula."""
    dom = conn.bundle.base
    k = conn.bundle.k
    basis = [VectorField.constant(dom, np.eye(k)[a]) for a in range(k)]
    worst = 0.0
    for x in points:
        comps = torsion_components(conn, struct, x)
        for a in range(k):
            for b in range(k):
                direct = torsion(conn, struct, basis[a], basis[b], x)
                worst = max(worst, float(np.max(np.abs(direct - comps[a, b]))))
    return _record("torsion_components", worst, tol)


def run_all(cfg) -> dict:
    """Run every check the configured objects support; aggregate a report."""
    rng = np.random.default_rng(cfg.seed)
    points = list(cfg.points) if cfg.points else [p for p in cfg.bundle.base.sample(rng, 5)]
    checks: list[dict] = []
    checks.extend(check_admissibility(cfg.bundle, cfg.curves, cfg.tolerances["admissibility_tol"]))
    if cfg.connection is not None:
        checks.append(check_partial_connection(cfg.connection, points, rng))
        checks.append(check_lift_linearity(cfg.connection, rng, samples=20))
    hom_record = None
    if cfg.structure is not None:
        hom_record = check_anchor_hom(cfg.structure, points, cfg.tolerances["anchor_hom_tol"])
        checks.append(hom_record)
        checks.append(check_star_leibniz(cfg.structure, rng, samples=20))
    if cfg.connection is not None and isinstance(cfg.connection, LinearConnection):
        checks.append(check_derivative_axioms(cfg.connection, rng, samples=20))
        if cfg.structure is not None:
            if hom_record is not None and hom_record["passed"]:
                checks.append(check_bracket_defect(cfg.connection, cfg.structure, rng, samples=10))
            if cfg.connection.l == cfg.bundle.k:
                checks.append(check_torsion_components(cfg.connection, cfg.structure, points))
    return {
        "seed": cfg.seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


__all__ = [
    "check_admissibility",
    "check_anchor_hom",
    "check_bracket_defect",
    "check_derivative_axioms",
    "check_lift_linearity",
    "check_partial_connection",
    "check_star_leibniz",
    "check_torsion_components",
    "random_linear_section",
    "random_scalar",
    "run_all",
    "star_section",
]
