"""Variational planning of the flat output.

A quadratic functional ``J = int 1/2 y^T Q y dt`` of the derivative vector
``y = [y1', ..., y1^(6)]`` is stationary along solutions of a 12th-order
linear constant-coefficient ODE.  Its characteristic roots give a basis of
exponential-polynomial-trigonometric terms whose 12 coefficients follow from
the boundary conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Literal

import numpy as np
from scipy.integrate import simpson

from flatplan.errors import ConditioningError
from flatplan.flatmodel import FlatBoundaryConditions, FlatSample, ReducedFlatParams

STRATEGIES = ("polynomial", "min_control_effort", "min_potential_energy", "mixed")

ZERO_COEFF_TOL = 1e-12
CLUSTER_TOL = 1e-6
ROOT_RESIDUAL_TOL = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class StrategySpec:
    """Planning strategy.

    ``r`` weights the squared motor torque and ``p`` the squared second
    derivative of the flat output; both enter the cost raised to the 8th
    power so that practical values stay below ~1000.
    """

    kind: str = "polynomial"
    r: float = 150.0
    p: float = 17.0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if not (np.isfinite(self.r) and np.isfinite(self.p)):
            raise ValueError("weighting factors must be finite")
        if self.r < 0 or self.p < 0:
            raise ValueError(f"weighting factors must be non-negative (r={self.r}, p={self.p})")


@dataclass(frozen=True)
class QuadraticCost:
    """6x6 weighting of derivative orders 1..6; ``q[i-1, j-1]`` is ``q_ij``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (6, 6):
            raise ValueError(f"Q must be 6x6, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("Q must be finite")
        scale = max(np.abs(q).max(), 1.0)
        if not np.allclose(q, q.T, rtol=0, atol=1e-14 * scale):
            raise ValueError("Q must be symmetric")
        q = 0.5 * (q + q.T)
        if np.linalg.eigvalsh(q).min() < -1e-9 * scale:
            raise ValueError("Q must be positive semidefinite")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def entry(self, i: int, j: int) -> float:
        """``q_ij`` with 1-based derivative orders."""
        return float(self.q[i - 1, j - 1])

    def scaled(self, factor: float) -> "QuadraticCost":
        return QuadraticCost(factor * self.q)


def cost_from_strategy(spec: StrategySpec, params: ReducedFlatParams) -> QuadraticCost:
    """Weighting matrix for a planning strategy.

    For the torque-based strategies the entries are ``r^8 v v^T`` with
    ``v`` the coefficients of ``y1''``, ``y1^(4)`` and ``y1^(5)`` in the
    feed-forward torque, so that ``1/2 y^T Q y = 1/2 (y1^(6))^2 + 1/2 r^8 tau^2``.
    """
    q = np.zeros((6, 6))
    q[5, 5] = 1.0
    if spec.kind in ("min_control_effort", "mixed"):
        i1, i2, k, c = params.i_star_prev, params.i_star_last, params.stiffness, params.damping
        gap = i1 - i2
        v = np.zeros(6)
        v[1] = i1
        v[3] = i2 * gap / k
        v[4] = -i2 * gap * c / k**2
        w = np.outer(v, v) * spec.r**8
        q += w
    if spec.kind in ("min_potential_energy", "mixed"):
        q[1, 1] += spec.p**8
    return QuadraticCost(q)


@dataclass(frozen=True)
class OdeCoefficients:
    """``c[m]`` multiplies ``y1^(m)``, m = 0..12, with ``c[12] > 0``."""

    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (13,):
            raise ValueError("expected 13 coefficients")
        if c[12] == 0:
            raise ValueError("leading coefficient vanishes")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def order(self) -> int:
        return 12


def ele_ode(cost: QuadraticCost) -> OdeCoefficients:
    """Euler-Lagrange ODE of the quadratic functional.

    Expanding ``sum_k (-1)^k d^k/dt^k dL/dy^(k)`` collects ``(-1)^k q_kj``
    on ``y^(k+j)``.  Cross terms with ``k + j`` odd cancel pairwise.  The
    result is normalized so that the leading coefficient is ``q66 > 0``.
    """
    q = cost.q
    if q[5, 5] <= 0:
        raise ValueError("q66 must be positive; the ODE order would collapse below 12")
    c = np.zeros(13)
    for k in range(1, 7):
        for j in range(1, 7):
            c[k + j] += (-1) ** k * q[k - 1, j - 1]
    c[1::2] = 0.0
    return OdeCoefficients(c)


@dataclass(frozen=True)
class RootSet:
    """Distinct characteristic roots with multiplicities (conjugates listed)."""

    roots: tuple

    def __post_init__(self):
        total = sum(m for _, m in self.roots)
        if total != 12:
            raise ValueError(f"multiplicities sum to {total}, expected 12")

    def zero_multiplicity(self) -> int:
        return sum(m for z, m in self.roots if z == 0)

    def values(self) -> np.ndarray:
        """All 12 roots repeated by multiplicity."""
        return np.array([z for z, m in self.roots for _ in range(m)], dtype=complex)


def _companion_eigenvalues(coeffs_high_first: np.ndarray) -> np.ndarray:
    a = np.asarray(coeffs_high_first, dtype=float)
    a = a / a[0]
    n = a.size - 1
    if n == 0:
        return np.array([], dtype=complex)
    comp = np.zeros((n, n))
    comp[0, :] = -a[1:]
    comp[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(comp)


def _poly_residual(c: np.ndarray, z: complex) -> float:
    """|P(z)| relative to the sum of term magnitudes."""
    powers = z ** np.arange(c.size)
    terms = c * powers
    denom = np.abs(terms).sum()
    return float(abs(terms.sum()) / denom) if denom else 0.0


def characteristic_roots(ode: OdeCoefficients) -> RootSet:
    """Roots of ``sum_m c[m] beta^m`` with multiplicities.

    Trailing coefficients below ``1e-12 max|c|`` are stripped exactly and
    counted as the zero root.  The remaining roots come from companion
    matrix eigenvalues, are grouped into multiplicity clusters with relative
    tolerance 1e-6 and symmetrized into exact conjugate pairs.

    Raises
    ------
    ValueError
        If a clustered root fails the back-substitution residual check.
    """
    c = ode.c.copy()
    cut = ZERO_COEFF_TOL * np.abs(c).max()
    n_zero = 0
    while n_zero < 12 and abs(c[n_zero]) <= cut:
        n_zero += 1
    reduced = c[n_zero:]
    raw = _companion_eigenvalues(reduced[::-1])

    # real vs complex classification
    vals = []
    for z in raw:
        if abs(z.imag) <= CLUSTER_TOL * abs(z):
            z = complex(z.real, 0.0)
        vals.append(z)

    clusters: list[list[complex]] = []
    for z in sorted(vals, key=lambda v: (v.real, v.imag)):
        for cl in clusters:
            ref = np.mean(cl)
            if abs(z - ref) <= CLUSTER_TOL * max(abs(z), abs(ref)):
                cl.append(z)
                break
        else:
            clusters.append([z])

    groups: list[tuple[complex, int]] = []
    if n_zero:
        groups.append((0j, n_zero))
    upper = [(complex(np.mean(cl)), len(cl)) for cl in clusters if np.mean(cl).imag > 0]
    lower = [(complex(np.mean(cl)), len(cl)) for cl in clusters if np.mean(cl).imag < 0]
    real = [(complex(np.mean(cl).real, 0.0), len(cl)) for cl in clusters if np.mean(cl).imag == 0]
    if len(upper) != len(lower):
        raise ValueError("complex roots do not pair into conjugates")
    for z, m in upper:
        partner = min(lower, key=lambda w: abs(w[0] - z.conjugate()))
        if partner[1] != m or abs(partner[0] - z.conjugate()) > CLUSTER_TOL * abs(z):
            raise ValueError(f"root {z} has no matching conjugate")
        lower.remove(partner)
        zc = complex(0.5 * (z.real + partner[0].real), 0.5 * (z.imag - partner[0].imag))
        groups.append((zc, m))
        groups.append((zc.conjugate(), m))
    groups.extend(real)

    # rescaled polynomial residual check, skipping the exact zero roots
    for z, _ in groups:
        if z == 0:
            continue
        res = _poly_residual(reduced, z)
        if res > ROOT_RESIDUAL_TOL:
            raise ValueError(f"root {z} has residual {res:.3g} above {ROOT_RESIDUAL_TOL}")
    return RootSet(tuple(groups))


@dataclass(frozen=True)
class BasisTerm:
    """One solution of the ODE.

    Evaluates ``exp(alpha (t - anchor)) (t - origin)^power trig(omega (t - anchor))``
    where ``trig`` is 1, cos or sin.
    """

    alpha: float
    omega: float
    power: int
    trig: Literal["none", "cosine", "sine"]
    anchor: float
    origin: float

    def __post_init__(self):
        if (self.trig == "none") != (self.omega == 0):
            raise ValueError("trig must be 'none' exactly when omega == 0")
        if self.omega < 0 or self.power < 0:
            raise ValueError("omega and power must be non-negative")

    def _complex_derivative(self, t, order: int) -> np.ndarray:
        # Leibniz rule on (t - origin)^k exp(z (t - anchor))
        t = np.asarray(t, dtype=float)
        z = complex(self.alpha, self.omega)
        s = t - self.origin
        k = self.power
        acc = np.zeros(np.shape(t), dtype=complex)
        for j in range(min(order, k) + 1):
            zp = z ** (order - j) if order > j else 1.0
            if zp == 0:
                continue
            acc = acc + comb(order, j) * (factorial(k) // factorial(k - j)) * s ** (k - j) * zp
        return acc * np.exp(z * (t - self.anchor))

    def derivative(self, t, order: int = 0):
        """Exact derivative of the given order."""
        val = self._complex_derivative(t, order)
        return val.imag if self.trig == "sine" else val.real

    def envelope(self, t, order: int = 0):
        """Modulus of the complex derivative; bounds ``|derivative(t, order)|``."""
        return np.abs(self._complex_derivative(t, order))


def build_basis(roots: RootSet, bounds: FlatBoundaryConditions) -> list[BasisTerm]:
    """Solution basis from the characteristic roots.

    Growing exponentials are anchored at ``t_end`` so that every term stays
    bounded by its polynomial factor on the interval.
    """
    terms = []
    # decaying before growing: z and -z have equal modulus, so ordering on it
    # alone would let the last bit decide
    ordered = sorted(roots.roots, key=lambda zm: (np.sign(zm[0].real), abs(zm[0]), zm[0].imag))
    for z, m in ordered:
        if z.imag < 0:
            continue
        anchor = bounds.t_end if z.real > 0 else bounds.t_start
        for k in range(m):
            if z.imag == 0:
                terms.append(BasisTerm(z.real, 0.0, k, "none", anchor, bounds.t_start))
            else:
                terms.append(BasisTerm(z.real, z.imag, k, "cosine", anchor, bounds.t_start))
                terms.append(BasisTerm(z.real, z.imag, k, "sine", anchor, bounds.t_start))
    if len(terms) != 12:
        raise ValueError(f"basis has {len(terms)} terms, expected 12")
    return terms


def collocation_matrix(basis, bounds: FlatBoundaryConditions) -> np.ndarray:
    """Rows: derivative orders 0..5 at ``t_start`` then at ``t_end``."""
    a = np.empty((12, len(basis)))
    for j, term in enumerate(basis):
        for i in range(6):
            a[i, j] = term.derivative(bounds.t_start, i)
            a[6 + i, j] = term.derivative(bounds.t_end, i)
    return a


@dataclass(frozen=True)
class MotionLaw:
    """Solved flat-output law on ``[t_start, t_end]``, frozen outside it."""

    basis: tuple
    coeffs: np.ndarray
    bounds: FlatBoundaryConditions
    condition_number: float

    def derivative(self, t, order: int = 0):
        """Derivative of ``y1`` on the motion interval, no hold-phase clamp."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.shape(t))
        for c, term in zip(self.coeffs, self.basis):
            if c != 0:
                out = out + c * term.derivative(t, order)
        return out

    def evaluate(self, t) -> FlatSample:
        """Flat output and derivatives 1..6; holds the end value after ``t_end``."""
        t = np.asarray(t, dtype=float)
        b = self.bounds
        before = t < b.t_start
        after = t > b.t_end
        tc = np.clip(t, b.t_start, b.t_end)
        rows = []
        for n in range(7):
            v = self.derivative(tc, n)
            if n == 0:
                v = np.where(before, b.y_start, np.where(after, b.y_end, v))
            else:
                v = np.where(before | after, 0.0, v)
            rows.append(v if v.ndim else float(v))
        return FlatSample.from_array(rows)

    def boundary_residuals(self) -> np.ndarray:
        """Relative residuals of the 12 conditions."""
        b = self.bounds
        got = np.array(
            [self.derivative(b.t_start, i) for i in range(6)]
            + [self.derivative(b.t_end, i) for i in range(6)],
            dtype=float,
        )
        want = b.vector()
        scale = np.abs(want).max() or 1.0
        return np.abs(got - want) / scale


def solve_motion_law(basis, bounds: FlatBoundaryConditions) -> MotionLaw:
    """Coefficients enforcing the 12 boundary conditions.

    Raises
    ------
    ConditioningError
        If the collocation matrix condition number exceeds 1e12.
    """
    basis = tuple(basis)
    if len(basis) != 12:
        raise ValueError(f"need 12 basis terms, got {len(basis)}")
    a = collocation_matrix(basis, bounds)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(
            f"boundary system condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}; "
            "weighting is near-degenerate",
            condition_number=cond,
        )
    rhs = bounds.vector()
    coeffs = np.linalg.solve(a, rhs)
    # one step of iterative refinement
    coeffs = coeffs + np.linalg.solve(a, rhs - a @ coeffs)
    coeffs.setflags(write=False)
    return MotionLaw(basis=basis, coeffs=coeffs, bounds=bounds, condition_number=cond)


def eval_motion_law(law: MotionLaw, t) -> FlatSample:
    return law.evaluate(t)


def plan_motion(
    spec: StrategySpec, params: ReducedFlatParams, bounds: FlatBoundaryConditions
) -> MotionLaw:
    """Full planning chain: cost, ODE, roots, basis, boundary solve."""
    cost = cost_from_strategy(spec, params)
    roots = characteristic_roots(ele_ode(cost))
    return solve_motion_law(build_basis(roots, bounds), bounds)


def ode_residual(law: MotionLaw, ode: OdeCoefficients, t) -> np.ndarray:
    """``|sum_m c[m] y1^(m)(t)|`` relative to the summed term magnitudes.

    The scale is ``sum_j |a_j| max_m |c[m]| env_j^(m)(t)`` where ``env`` is
    the modulus of the complex form of basis term ``j``.  The law's own
    high derivatives cancel between terms and are no usable reference.
    """
    t = np.asarray(t, dtype=float)
    total = np.zeros(np.shape(t))
    scale = np.zeros(np.shape(t))
    for a, term in zip(law.coeffs, law.basis):
        parts = np.array([ode.c[m] * term.derivative(t, m) for m in range(13)])
        env = np.array([abs(ode.c[m]) * term.envelope(t, m) for m in range(13)])
        total = total + a * parts.sum(axis=0)
        scale = scale + abs(a) * env.max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(total) / scale


def cost_value(law: MotionLaw, cost: QuadraticCost, n_points: int = 2001) -> float:
    """``J = int 1/2 y^T Q y dt`` by composite Simpson over the motion interval."""
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points >= 3")
    b = law.bounds
    t = np.linspace(b.t_start, b.t_end, n_points)
    return functional_value(t, [law.derivative(t, n) for n in range(1, 7)], cost)


def functional_value(t, derivs, cost: QuadraticCost) -> float:
    """Simpson quadrature of ``1/2 y^T Q y`` given derivative rows 1..6 on grid ``t``."""
    y = np.asarray(derivs, dtype=float)
    integrand = 0.5 * np.einsum("it,ij,jt->t", y, cost.q, y)
    return float(simpson(integrand, x=t))
