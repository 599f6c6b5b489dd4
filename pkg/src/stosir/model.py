"""Model parameters, derived constants, and the incidence-function catalog.

The system simulated throughout this package is the planar SDE

    dS = [a1 - b1*S - I*f(S,I)] dt + sigma1*S dB1 - I*g(S,I) dB3
    dI = [-b2*I + I*f(S,I)] dt + sigma2*I dB2 + I*g(S,I) dB3

where f is the per-infected (per-capita) incidence rate and g the per-infected
incidence-noise intensity.  The catalog below provides the standard functional
responses in per-capita form; each carries declared Lipschitz/bound constants
that `validate_assumption` spot-checks by quasi-random sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc


class ParameterError(ValueError):
    """Invalid model parameter or incidence coefficient."""


# Kernel dispatch codes shared with the compiled integrator (engine module).
KERNEL_CUSTOM = -1
KERNEL_BILINEAR = 0
KERNEL_HOLLING2 = 1
KERNEL_BEDDINGTON = 2
KERNEL_NONLINEAR = 3
KERNEL_RATIO = 4

CATALOG_KINDS = (
    "bilinear",
    "holling2",
    "beddington_deangelis",
    "nonlinear",
    "ratio_example",
)


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be finite and positive, got {value!r}")
    return value


def _require_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ParameterError(f"{name} must be finite and nonnegative, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Scalar rates and noise intensities of the system.

    a1      recruitment rate
    b1      susceptible death rate
    b2      infected removal rate (death + recovery)
    sigma1  intensity of the S death-rate noise (dB1)
    sigma2  intensity of the I removal-rate noise (dB2)
    """

    a1: float
    b1: float
    b2: float
    sigma1: float
    sigma2: float

    def __post_init__(self) -> None:
        _require_positive("a1", self.a1)
        _require_positive("b1", self.b1)
        _require_positive("b2", self.b2)
        _require_positive("sigma1", self.sigma1)
        _require_nonnegative("sigma2", self.sigma2)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from ModelParams.

    c1 = b1 + sigma1^2/2 and c2 = b2 + sigma2^2/2 are the effective decay
    rates of ln S and ln I; a = 2*c1/sigma1^2 and b = 2*a1/sigma1^2 are the
    shape and scale of the boundary stationary law.  a > 1 always holds
    (a = 1 + 2*b1/sigma1^2).
    """

    c1: float
    c2: float
    a: float
    b: float


def derive_constants(params: ModelParams) -> DerivedConstants:
    """Compute (c1, c2, a, b) from validated parameters."""
    c1 = params.b1 + 0.5 * params.sigma1 ** 2
    c2 = params.b2 + 0.5 * params.sigma2 ** 2
    a = 2.0 * c1 / params.sigma1 ** 2
    b = 2.0 * params.a1 / params.sigma1 ** 2
    return DerivedConstants(c1=c1, c2=c2, a=a, b=b)


@dataclass(frozen=True)
class State:
    """A point in the open positive quadrant."""

    s: float
    i: float

    def __post_init__(self) -> None:
        _require_positive("s", self.s)
        _require_positive("i", self.i)


@dataclass(frozen=True)
class IncidenceModel:
    """The pair (f, g) with declared regularity metadata.

    f and g accept scalars or numpy arrays and are pure.  lipschitz_f and
    lipschitz_g are the declared joint Lipschitz constants (w.r.t. |ds|+|di|),
    bound_k the declared sup of g.  satisfies_assumption is False whenever a
    regularity clause fails structurally; the threshold and simulation layers
    warn but proceed in that case.

    kernel_code/coef drive the compiled integrator for catalog kinds; custom
    models (kernel_code == KERNEL_CUSTOM) take the slower interpreted path.
    """

    kind: str
    f: Callable = field(repr=False)
    g: Callable = field(repr=False)
    lipschitz_f: float
    lipschitz_g: float
    bound_k: float
    satisfies_assumption: bool
    kernel_code: int = KERNEL_CUSTOM
    coef: tuple = ()

    def incidence_rate(self, s, i):
        """Total incidence F(s,i) = i*f(s,i); derived on demand."""
        return np.asarray(i) * self.f(s, i)


def _as_float_result(value):
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _zero_like(s, i):
    return _as_float_result(np.zeros(np.broadcast(np.asarray(s), np.asarray(i)).shape))


def make_catalog_incidence(kind: str, **coefficients: float) -> IncidenceModel:
    """Construct a catalog incidence model in per-capita form.

    bilinear              f = beta*s,                      g = 0
    holling2              f = beta*s/(m1+s),               g = 0
    beddington_deangelis  f = beta*s/(1+m1*s+m2*i),        g = 0
    nonlinear             f = beta*s*i^(l-1)/(1+m2*i^h),   g = 0
    ratio_example         f = c*s/(1+s+i),                 g = m*s/(1+s+i)

    Raises ParameterError for unknown kinds, missing/extra coefficients, or
    nonpositive coefficient values.
    """
    expected = {
        "bilinear": ("beta",),
        "holling2": ("beta", "m1"),
        "beddington_deangelis": ("beta", "m1", "m2"),
        "nonlinear": ("beta", "l", "m2", "h"),
        "ratio_example": ("c", "m"),
    }
    if kind not in expected:
        raise ParameterError(
            f"unknown incidence kind {kind!r}; expected one of {CATALOG_KINDS}"
        )
    names = expected[kind]
    missing = [n for n in names if n not in coefficients]
    extra = [n for n in coefficients if n not in names]
    if missing or extra:
        raise ParameterError(
            f"{kind} takes coefficients {names}; missing {missing}, unexpected {extra}"
        )
    vals = {n: _require_positive(n, coefficients[n]) for n in names}

    if kind == "bilinear":
        beta = vals["beta"]

        def f(s, i):
            return _as_float_result(beta * np.asarray(s, dtype=float))

        return IncidenceModel(
            kind=kind, f=f, g=_zero_like,
            lipschitz_f=beta, lipschitz_g=0.0, bound_k=0.0,
            satisfies_assumption=True,
            kernel_code=KERNEL_BILINEAR, coef=(beta,),
        )

    if kind == "holling2":
        beta, m1 = vals["beta"], vals["m1"]

        def f(s, i):
            s = np.asarray(s, dtype=float)
            return _as_float_result(beta * s / (m1 + s))

        return IncidenceModel(
            kind=kind, f=f, g=_zero_like,
            lipschitz_f=beta / m1, lipschitz_g=0.0, bound_k=0.0,
            satisfies_assumption=True,
            kernel_code=KERNEL_HOLLING2, coef=(beta, m1),
        )

    if kind == "beddington_deangelis":
        beta, m1, m2 = vals["beta"], vals["m1"], vals["m2"]

        def f(s, i):
            s = np.asarray(s, dtype=float)
            i = np.asarray(i, dtype=float)
            return _as_float_result(beta * s / (1.0 + m1 * s + m2 * i))

        # |df/ds| <= beta, |df/di| <= beta*m2*sup_s s/(1+m1*s)^2 = beta*m2/(4*m1)
        lip = beta * max(1.0, m2 / (4.0 * m1))
        return IncidenceModel(
            kind=kind, f=f, g=_zero_like,
            lipschitz_f=lip, lipschitz_g=0.0, bound_k=0.0,
            satisfies_assumption=True,
            kernel_code=KERNEL_BEDDINGTON, coef=(beta, m1, m2),
        )

    if kind == "nonlinear":
        beta, l, m2, h = vals["beta"], vals["l"], vals["m2"], vals["h"]

        def f(s, i):
            s = np.asarray(s, dtype=float)
            i = np.asarray(i, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                if l == 1.0:
                    ipow = np.ones_like(i)
                else:
                    # i^(l-1): limit 0 at i=0 for l>1, singular for l<1
                    ipow = np.where(i > 0.0, i ** (l - 1.0),
                                    0.0 if l > 1.0 else np.inf)
                val = beta * s * ipow / (1.0 + m2 * i ** h)
                val = np.where(np.asarray(s) == 0.0, 0.0, val)
            return _as_float_result(val)

        # Not globally Lipschitz: the i-slope scales with s (and diverges at
        # i=0 when l<1).  Declared constant is the nominal s-direction slope.
        return IncidenceModel(
            kind=kind, f=f, g=_zero_like,
            lipschitz_f=beta, lipschitz_g=0.0, bound_k=0.0,
            satisfies_assumption=False,
            kernel_code=KERNEL_NONLINEAR, coef=(beta, l, m2, h),
        )

    # ratio_example
    c, m = vals["c"], vals["m"]

    def f(s, i):
        s = np.asarray(s, dtype=float)
        i = np.asarray(i, dtype=float)
        return _as_float_result(c * s / (1.0 + s + i))

    def g(s, i):
        s = np.asarray(s, dtype=float)
        i = np.asarray(i, dtype=float)
        return _as_float_result(m * s / (1.0 + s + i))

    return IncidenceModel(
        kind=kind, f=f, g=g,
        lipschitz_f=c, lipschitz_g=m, bound_k=m,
        satisfies_assumption=True,
        kernel_code=KERNEL_RATIO, coef=(c, m),
    )


def make_custom_incidence(
    f: Callable,
    g: Callable,
    *,
    lipschitz_f: float,
    lipschitz_g: float,
    bound_k: float,
    satisfies_assumption: bool = True,
) -> IncidenceModel:
    """Wrap user-supplied pure callables as an IncidenceModel.

    The declared constants are taken on trust here; run validate_assumption
    to spot-check them.  Custom models are integrated by the interpreted
    engine path.
    """
    return IncidenceModel(
        kind="custom", f=f, g=g,
        lipschitz_f=_require_nonnegative("lipschitz_f", lipschitz_f),
        lipschitz_g=_require_nonnegative("lipschitz_g", lipschitz_g),
        bound_k=_require_nonnegative("bound_k", bound_k),
        satisfies_assumption=bool(satisfies_assumption),
    )


@dataclass(frozen=True)
class ClauseResult:
    name: str
    passed: bool
    worst: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Per-clause outcome of the regularity spot-check (report-only)."""

    kind: str
    n_samples: int
    s_max: float
    i_max: float
    tolerance: float
    clauses: tuple[ClauseResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def to_text(self) -> str:
        lines = [
            f"incidence kind      {self.kind}",
            f"samples             {self.n_samples}",
            f"box                 [0, {self.s_max:g}] x [0, {self.i_max:g}]",
            f"tolerance           {self.tolerance:g}",
        ]
        for c in self.clauses:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:<38s} {status}  worst={c.worst:.6g}  {c.detail}")
        lines.append(f"all clauses         {'pass' if self.all_passed else 'FAIL'}")
        return "\n".join(lines)


def _sample_box(n: int, s_max: float, i_max: float) -> np.ndarray:
    pts = qmc.Halton(d=2, scramble=False).random(n)
    pts[:, 0] *= s_max
    pts[:, 1] *= i_max
    return pts


def _edge_ladder(s_max: float, i_max: float) -> np.ndarray:
    # Pair seeds hugging the axes: difference quotients there expose the
    # catalog's known singularities (e.g. i^(l-1) with l<1 near i=0).
    small = np.geomspace(1e-10, 1.0, 25)
    svals = np.array([0.0, 0.5, 1.0, 0.1 * s_max, s_max])
    pts = [(s, i) for s in svals for i in small]
    pts += [(s, 0.0) for s in svals]
    pts += [(i, s) for s in svals for i in small]  # mirrored: small s
    return np.asarray(pts, dtype=float)


def _eval_pair(fn: Callable, pts: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
    if out.shape != (pts.shape[0],):
        out = np.array([float(fn(s, i)) for s, i in pts])
    return out


def validate_assumption(
    model: IncidenceModel,
    sample_budget: int = 10_000,
    tolerance: float = 1e-9,
    s_max: float = 100.0,
    i_max: float = 100.0,
) -> ValidationReport:
    """Spot-check the regularity clauses over a quasi-random box sample.

    Clauses checked (all sampled, never proved): nonnegativity of f and g,
    f(0,i)=0 and g(0,i)=0 exactly, joint Lipschitz bounds against the declared
    constants, the s-only bound |i*g(s1,i)-i*g(s2,i)| <= G|s1-s2|, and
    g <= K.  Always returns a report; never raises for clause failures.
    """
    if sample_budget < 1000:
        raise ParameterError("sample_budget must be at least 1000")

    pts = np.vstack([_sample_box(sample_budget, s_max, i_max),
                     _edge_ladder(s_max, i_max)])
    with np.errstate(all="ignore"):
        fv = _eval_pair(model.f, pts)
        gv = _eval_pair(model.g, pts)

    tol = tolerance
    clauses: list[ClauseResult] = []

    def check(name: str, passed: bool, worst: float, detail: str = "") -> None:
        clauses.append(ClauseResult(name, bool(passed), float(worst), detail))

    # +inf is nonnegative (it shows up as a Lipschitz failure instead);
    # NaN or a negative value fails the clause.
    def nonneg_clause(name, vals):
        nans = np.isnan(vals)
        worst = float(np.min(vals[~nans])) if (~nans).any() else math.nan
        check(name, not nans.any() and worst >= 0.0, worst,
              f"{int(nans.sum())} NaN values" if nans.any() else "")

    nonneg_clause("f nonnegative", fv)
    nonneg_clause("g nonnegative", gv)
    finite_g = np.isfinite(gv)

    i_axis = np.linspace(0.0, i_max, 257)
    with np.errstate(all="ignore"):
        f0 = _eval_pair(model.f, np.column_stack([np.zeros_like(i_axis), i_axis]))
        g0 = _eval_pair(model.g, np.column_stack([np.zeros_like(i_axis), i_axis]))
    worst = float(np.max(np.abs(f0))) if np.isfinite(f0).all() else math.inf
    check("f(0,i) = 0 exactly", worst == 0.0, worst)
    worst = float(np.max(np.abs(g0))) if np.isfinite(g0).all() else math.inf
    check("g(0,i) = 0 exactly", worst == 0.0, worst)

    # Pairs: consecutive quasi-random points plus near-axis ladder neighbours.
    p1 = pts[0:-1:2]
    p2 = pts[1::2]
    ladder = _edge_ladder(s_max, i_max)
    lp1 = ladder[:-1]
    lp2 = ladder[1:]
    a = np.vstack([p1, lp1])
    bpts = np.vstack([p2, lp2])
    dist = np.abs(a[:, 0] - bpts[:, 0]) + np.abs(a[:, 1] - bpts[:, 1])
    keep = dist > 0.0
    a, bpts, dist = a[keep], bpts[keep], dist[keep]
    with np.errstate(all="ignore"):
        dfa = _eval_pair(model.f, a) - _eval_pair(model.f, bpts)
        dga = _eval_pair(model.g, a) - _eval_pair(model.g, bpts)

    def lipschitz_clause(name, diffs, constant):
        bound = constant * dist
        excess = np.abs(diffs) - bound * (1.0 + tol)
        excess = np.where(np.isfinite(diffs), excess, math.inf)
        worst = float(np.max(excess / np.maximum(dist, 1e-300)))
        check(name, worst <= 0.0, worst,
              f"declared constant {constant:g}")

    lipschitz_clause("f Lipschitz (joint, const F)", dfa, model.lipschitz_f)
    lipschitz_clause("g Lipschitz (joint, const G)", dga, model.lipschitz_g)

    # |i*g(s1,i) - i*g(s2,i)| <= G|s1-s2|: same i, varying s.
    s1 = a[:, 0]
    s2 = bpts[:, 0]
    ii = a[:, 1]
    ds = np.abs(s1 - s2)
    sel = ds > 0.0
    with np.errstate(all="ignore"):
        ig1 = ii[sel] * _eval_pair(model.g, np.column_stack([s1[sel], ii[sel]]))
        ig2 = ii[sel] * _eval_pair(model.g, np.column_stack([s2[sel], ii[sel]]))
    excess = np.abs(ig1 - ig2) - model.lipschitz_g * ds[sel] * (1.0 + tol)
    excess = np.where(np.isfinite(ig1 - ig2), excess, math.inf)
    worst = float(np.max(excess / np.maximum(ds[sel], 1e-300))) if sel.any() else 0.0
    check("i*g Lipschitz in s (const G)", worst <= 0.0, worst,
          f"declared constant {model.lipschitz_g:g}")

    worst = float(np.max(gv[finite_g])) if finite_g.any() else math.inf
    ok = finite_g.all() and worst <= model.bound_k * (1.0 + tol) + 1e-300
    check("g bounded (g <= K)", ok, worst, f"declared bound {model.bound_k:g}")

    return ValidationReport(
        kind=model.kind,
        n_samples=int(pts.shape[0]),
        s_max=s_max,
        i_max=i_max,
        tolerance=tolerance,
        clauses=tuple(clauses),
    )
