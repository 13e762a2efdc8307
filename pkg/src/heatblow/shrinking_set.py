"""Shrinking-set membership, first exit and the intermediate-region check."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .similarity import (QuadratureError, SimilaritySlice, SpectralDecomp, decompose, kappa,
                         to_similarity)
from .solver_core import Field, ProblemSpec


class ExitConstraint(str, enum.Enum):
    Q0_PLUS = "Q0_PLUS"
    Q0_MINUS = "Q0_MINUS"
    Q1_PLUS = "Q1_PLUS"
    Q1_MINUS = "Q1_MINUS"
    Q2 = "Q2"
    QMINUS = "QMINUS"
    QE = "QE"
    R2 = "R2"
    AMBIGUOUS = "AMBIGUOUS"

    @property
    def is_square(self) -> bool:
        return self in SQUARE


SQUARE = {ExitConstraint.Q0_PLUS, ExitConstraint.Q0_MINUS, ExitConstraint.Q1_PLUS, ExitConstraint.Q1_MINUS}
FAMILIES = ("q0", "q1", "q2", "qminus", "qe", "R2")


@dataclass
class VMargins:
    m_q0: float
    m_q1: float
    m_q2: float
    m_qminus: float
    m_qe: float
    m_R2: float
    # margins divided by their bound, comparable across families
    normalized: dict = dc_field(default_factory=dict, repr=False)
    q0: float = 0.0
    q1: float = 0.0
    s: float = math.nan
    quad_error: float = 0.0

    @property
    def inside(self) -> bool:
        return min(self.m_q0, self.m_q1, self.m_q2, self.m_qminus, self.m_qe, self.m_R2) >= 0

    @property
    def inside_square(self) -> bool:
        return min(self.m_q0, self.m_q1) >= 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("m_q0", "m_q1", "m_q2", "m_qminus", "m_qe", "m_R2")}


@dataclass
class ExitEvent:
    s_star: float
    t_star: float
    exit_constraint: ExitConstraint
    phi_value: tuple[float, float]
    margins: VMargins | None = None

    def to_dict(self) -> dict:
        return {
            "s_star": self.s_star,
            "t_star": self.t_star,
            "exit_constraint": self.exit_constraint.value,
            "phi": list(self.phi_value),
            "margins_at_exit": self.margins.as_dict() if self.margins else None,
        }


def bounds(s: float, A: float) -> dict[str, float]:
    return {
        "q01": A / s**2,
        "q2": A**2 * math.log(s) / s**2,
        "qminus": A / s**2,
        "qe": A**2 / math.sqrt(s),
    }


def r2_sup(field: Field, spec: ProblemSpec, x: np.ndarray | None = None) -> float:
    if x is None:
        x = spec.omega_domain[0] + field.dx * np.arange(field.values.size)
    far = np.abs(x - spec.target_point) >= spec.eps0 / 2
    return float(np.max(np.abs(field.values[far]))) if np.any(far) else 0.0


def check_membership(sl: SimilaritySlice, dec: SpectralDecomp, field: Field | None,
                     spec: ProblemSpec) -> VMargins:
    s = dec.s
    A = spec.A_const
    b = bounds(s, A)
    wz = b["qminus"] * (1 + np.abs(dec.z_grid) ** 3)
    m_qm = float(np.min(wz - np.abs(dec.q_minus)))
    n_qm = float(np.min(1 - np.abs(dec.q_minus) / wz))
    ysup = r2_sup(field, spec) if field is not None else 0.0
    m = VMargins(
        m_q0=b["q01"] - abs(dec.q0),
        m_q1=b["q01"] - abs(dec.q1),
        m_q2=b["q2"] - abs(dec.q2),
        m_qminus=m_qm,
        m_qe=b["qe"] - dec.qe_sup,
        m_R2=spec.eta0 - ysup,
        q0=dec.q0,
        q1=dec.q1,
        s=s,
    )
    m.normalized = {
        "q0": m.m_q0 / b["q01"],
        "q1": m.m_q1 / b["q01"],
        "q2": m.m_q2 / b["q2"],
        "qminus": n_qm,
        "qe": m.m_qe / b["qe"],
        "R2": m.m_R2 / spec.eta0,
    }
    return m


def classify(m: VMargins, families: Sequence[str] = FAMILIES, tie_tol: float = 1e-9) -> ExitConstraint | None:
    """Most-violated constraint among ``families``; None when inside."""
    vals = sorted((m.normalized[f], f) for f in families)
    if vals[0][0] >= 0:
        return None
    if len(vals) > 1 and vals[1][0] < 0 and vals[1][0] - vals[0][0] <= tie_tol:
        return ExitConstraint.AMBIGUOUS
    fam = vals[0][1]
    if fam == "q0":
        return ExitConstraint.Q0_PLUS if m.q0 > 0 else ExitConstraint.Q0_MINUS
    if fam == "q1":
        return ExitConstraint.Q1_PLUS if m.q1 > 0 else ExitConstraint.Q1_MINUS
    return {"q2": ExitConstraint.Q2, "qminus": ExitConstraint.QMINUS,
            "qe": ExitConstraint.QE, "R2": ExitConstraint.R2}[fam]


def phi_of(m: VMargins, A: float) -> tuple[float, float]:
    return (m.s**2 / A * m.q0, m.s**2 / A * m.q1)


def margins_of(field: Field, spec: ProblemSpec, T: float | None = None,
               strict: bool = True) -> VMargins:
    sl = to_similarity(field, spec, T)
    try:
        dec = decompose(sl, spec.K0)
    except QuadratureError:
        if strict:
            raise
        # under-resolved states (an early spike) are still classified
        dec = decompose(sl, spec.K0, rel_tol=None)
    m = check_membership(sl, dec, field, spec)
    m.quad_error = dec.quad_error
    return m


class MembershipMonitor:
    """Snapshot callback that records margins and flags the first exit.

    ``families`` selects the constraints that count as an exit; the full
    margins are recorded either way so the first full-set exit can be read
    off afterwards.
    """

    def __init__(self, spec: ProblemSpec, families: Sequence[str] = FAMILIES,
                 T: float | None = None, s_min: float | None = None):
        self.spec = spec
        self.T = spec.target_time if T is None else T
        self.families = tuple(families)
        self.s_min = s_min
        self.history: list[tuple[Field, VMargins]] = []
        self.first_full: int | None = None
        self.first_flagged: int | None = None

    def __call__(self, f: Field) -> bool:
        if f.time >= self.T:
            return True
        m = margins_of(f, self.spec, self.T, strict=False)
        self.history.append((f, m))
        i = len(self.history) - 1
        if self.first_full is None and not m.inside:
            self.first_full = i
        if classify(m, self.families) is not None:
            self.first_flagged = i
            return True
        return False


Advance = Callable[[Field, float], Field]


def _locate(history, i: int, spec: ProblemSpec, T: float, families, advance: Advance | None,
            ds_tol: float) -> ExitEvent:
    f1, m1 = history[i]
    if i == 0:
        c = classify(m1, families)
        return ExitEvent(m1.s, f1.time, c, phi_of(m1, spec.A_const), m1)
    f0, m0 = history[i - 1]
    if advance is not None:
        lo_f, lo_m, hi_f, hi_m = f0, m0, f1, m1
        while hi_m.s - lo_m.s > ds_tol:
            s_mid = 0.5 * (lo_m.s + hi_m.s)
            t_mid = T - math.exp(-s_mid)
            f_mid = advance(lo_f, t_mid)
            m_mid = margins_of(f_mid, spec, T, strict=False)
            if classify(m_mid, families) is None:
                lo_f, lo_m = f_mid, m_mid
            else:
                hi_f, hi_m = f_mid, m_mid
        c = classify(hi_m, families)
        return ExitEvent(hi_m.s, hi_f.time, c, phi_of(hi_m, spec.A_const), hi_m)
    # secant on the most-violated normalized margin
    c = classify(m1, families)
    fam = _family_of(c) if c is not ExitConstraint.AMBIGUOUS else min(
        families, key=lambda k: m1.normalized[k])
    a0, a1 = m0.normalized[fam], m1.normalized[fam]
    theta = a0 / (a0 - a1) if a0 != a1 else 1.0
    theta = min(max(theta, 0.0), 1.0)
    s_star = m0.s + theta * (m1.s - m0.s)
    q0 = m0.q0 + theta * (m1.q0 - m0.q0)
    q1 = m0.q1 + theta * (m1.q1 - m0.q1)
    phi = (s_star**2 / spec.A_const * q0, s_star**2 / spec.A_const * q1)
    return ExitEvent(s_star, T - math.exp(-s_star), c, phi, m1)


def _family_of(c: ExitConstraint) -> str:
    return {
        ExitConstraint.Q0_PLUS: "q0", ExitConstraint.Q0_MINUS: "q0",
        ExitConstraint.Q1_PLUS: "q1", ExitConstraint.Q1_MINUS: "q1",
        ExitConstraint.Q2: "q2", ExitConstraint.QMINUS: "qminus",
        ExitConstraint.QE: "qe", ExitConstraint.R2: "R2",
    }[c]


def first_exit_from_history(history, spec: ProblemSpec, *, T: float | None = None,
                            families: Sequence[str] = FAMILIES, advance: Advance | None = None,
                            ds_tol: float = 1e-3) -> ExitEvent | None:
    T = spec.target_time if T is None else T
    for i, (_, m) in enumerate(history):
        if classify(m, families) is not None:
            return _locate(history, i, spec, T, families, advance, ds_tol)
    return None


def first_exit(trajectory: Sequence[Field], spec: ProblemSpec, *, T: float | None = None,
               families: Sequence[str] = FAMILIES, advance: Advance | None = None,
               ds_tol: float = 1e-3) -> ExitEvent | None:
    """First snapshot leaving the set, refined to ``ds_tol`` in s.

    Returns None when the trajectory stays inside throughout. Without an
    ``advance`` callback the crossing is placed by secant interpolation of the
    violated margin between neighbouring snapshots.
    """
    T = spec.target_time if T is None else T
    history = [(f, margins_of(f, spec, T)) for f in trajectory if f.time < T]
    return first_exit_from_history(history, spec, T=T, families=families, advance=advance, ds_tol=ds_tol)


# --------------------------------------------------------------------------
# intermediate region


def y_star(x0: float, a: float, p: float) -> float:
    d = abs(x0 - a)
    return ((p - 1) ** 2 * d**2 / (8 * p * abs(math.log(d)))) ** (-1 / (p - 1))


def U_K0(tau: float, K0: float, p: float) -> float:
    return kappa(p) * ((1 - tau) + (p - 1) * K0**2 / (4 * p)) ** (-1 / (p - 1))


def t0_of(x0: float, spec: ProblemSpec, T: float | None = None) -> float:
    """Solve ``|x0 - a| = K0 sqrt((T-t0)|log(T-t0)|)`` for ``t0`` in ``[0, T)``."""
    T = spec.target_time if T is None else T
    d = abs(x0 - spec.target_point)
    K0 = spec.K0
    hi = min(T, math.exp(-1))

    def g(tau):
        return K0 * math.sqrt(tau * abs(math.log(tau))) - d

    if g(hi) < 0:
        raise ValueError("no t0 in [0, T): |x0 - a| exceeds K0 sqrt(T |log T|)")
    tau = brentq(g, 1e-300, hi, xtol=1e-300, rtol=1e-14)
    return T - tau


@dataclass
class IntermediateReport:
    x0: float
    y_star: float
    t0: float
    max_ratio: float
    max_profile_gap: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def intermediate_diagnostic(trajectory: Sequence[Field], x0: float, spec: ProblemSpec,
                            T: float | None = None) -> IntermediateReport:
    T = spec.target_time if T is None else T
    a = spec.target_point
    d = abs(x0 - a)
    if not 0 < d < spec.eps0:
        raise ValueError("x0 must satisfy 0 < |x0 - a| < eps0")
    p = spec.exponent
    ys = y_star(x0, a, p)
    t0 = t0_of(x0, spec, T)
    U1 = U_K0(1.0, spec.K0, p)
    ratio = 0.0
    gap = 0.0
    n = 0
    for f in trajectory:
        if f.time < t0 or f.time >= T:
            continue
        x = spec.omega_domain[0] + f.dx * np.arange(f.values.size)
        yv = abs(float(np.interp(x0, x, f.values)))
        tau = (f.time - t0) / (T - t0)
        ratio = max(ratio, yv / ys)
        gap = max(gap, abs(yv / ys - U_K0(tau, spec.K0, p) / U1))
        n += 1
    return IntermediateReport(x0, ys, t0, ratio, gap, n)
