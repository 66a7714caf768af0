"""Classical dynamics: trajectories, sections, Lyapunov exponents, thresholds.

The flow derives from

    h(t) = omega0 (q^2 + p^2)/2 + (2 sqrt(2)/3) g3 q^3 + g4 q^4
           + sqrt(2) Omega_d p cos(omega_d t)

with canonical (q, p).  Stroboscopic sampling uses the same drive phase
convention as the quantum stack (samples at t = T_d/4 + k T_d), so the
double-well structure lies along the q axis in section plots.

The batched engines integrate many orbits as one vectorized ODE system;
orbits that leave the region of interest (|q| or |p| beyond a few times the
outer hyperbolic point) are frozen and flagged rather than aborting a scan.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import label as _connected_label
from scipy.optimize import brentq

from .errors import IntegrationError, RootBracketError
from .model import (
    ClassicalParams,
    SnailParams,
    _critical_abscissas,
    params_from_targets,
    snail_coefficients,
    snail_potential,
)

__all__ = [
    "ClassicalParams",
    "Trajectory",
    "CriticalPoint",
    "CriticalPointSet",
    "Lemniscate",
    "LyapunovResult",
    "ThresholdFamily",
    "ProbeSpec",
    "ThresholdResult",
    "hamilton_rhs",
    "static_energy",
    "integrate",
    "poincare_section",
    "stroboscopic_fixed_point",
    "tangent_map",
    "lyapunov",
    "lyapunov_batch",
    "critical_points",
    "lemniscate",
    "FullSnailFlow",
    "full_snail_rhs",
    "threshold_scan",
    "lyapunov_field",
    "INNER_ONSET_PRODUCT",
    "MERGE_PRODUCT",
]

# empirical Gamma*K/omega0 products bounding the local-chaos regimes: the
# first marks where the Lyapunov exponent turns positive near the well
# center, the second where that region merges with the surrounding sea
INNER_ONSET_PRODUCT = 0.0187
MERGE_PRODUCT = 0.03347

#: stroboscopic sampling phase (fraction of a period) aligning the wells
#: with the q axis
SECTION_PHASE = 0.25


@dataclass
class Trajectory:
    """Sampled phase-space path; ``escaped_at`` marks early termination."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    escaped_at: float | None = None


@dataclass(frozen=True)
class CriticalPoint:
    q: float
    p: float
    kind: str  # "center" or "hyperbolic"
    rate: float  # oscillation frequency (center) or instability rate


@dataclass(frozen=True)
class CriticalPointSet:
    points: tuple[CriticalPoint, ...]
    single_well: bool


@dataclass(frozen=True)
class Lemniscate:
    """Figure-eight separatrix geometry of the inner double well."""

    center_q: float
    curve: np.ndarray  # (n, 2) samples of the two lobes
    area: float
    n_in: float
    focal_distance: float


@dataclass(frozen=True)
class LyapunovResult:
    """Largest Lyapunov exponent with its finite-time convergence band."""

    value: float
    band: float
    escaped: bool

    @property
    def chaotic_above(self) -> float:
        """Smallest cutoff at which this orbit would be called chaotic."""
        return max(3.0 * self.band, 1e-3)


def hamilton_rhs(t, q, p, cp: ClassicalParams):
    """Flow field: dq/dt = w0 p + sqrt(2) Od cos(wd t); dp/dt = -dV/dq."""
    dq = cp.omega0 * p + math.sqrt(2.0) * cp.Omega_d * np.cos(cp.omega_d * t)
    dp = -(cp.omega0 * q + 2.0 * math.sqrt(2.0) * cp.g3 * q**2 + 4.0 * cp.g4 * q**3)
    return dq, dp


def static_energy(q, p, cp: ClassicalParams):
    """Undriven energy h0(q, p)."""
    return (
        0.5 * cp.omega0 * (np.asarray(q) ** 2 + np.asarray(p) ** 2)
        + (2.0 * math.sqrt(2.0) / 3.0) * cp.g3 * np.asarray(q) ** 3
        + cp.g4 * np.asarray(q) ** 4
    )


def _curvature(q, cp: ClassicalParams):
    """Second derivative of the static potential."""
    return cp.omega0 + 4.0 * math.sqrt(2.0) * cp.g3 * q + 12.0 * cp.g4 * q**2


def escape_radius(cp: ClassicalParams, factor: float = 3.0) -> float:
    """|q| or |p| beyond which an orbit has left the region of interest."""
    _, d_plus = _critical_abscissas(cp.omega0, cp.g3, cp.g4)
    if d_plus is None:
        return math.inf
    return factor * abs(d_plus)


def _rhs_flat(t, y, cp: ClassicalParams):
    """Vectorized flow for stacked orbits, y = [q..., p...]."""
    half = y.size // 2
    q, p = y[:half], y[half:]
    dq, dp = hamilton_rhs(t, q, p, cp)
    return np.concatenate((dq, dp))


def _rhs_var_flat(t, y, cp: ClassicalParams):
    """Vectorized flow plus tangent flow, y = [q, p, dq, dp] blocks."""
    n = y.size // 4
    q, p, vq, vp = y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n :]
    dq, dp = hamilton_rhs(t, q, p, cp)
    dvq = cp.omega0 * vp
    dvp = -_curvature(q, cp) * vq
    return np.concatenate((dq, dp, dvq, dvp))


def integrate(
    ic: tuple[float, float],
    cp: ClassicalParams,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    t_eval: np.ndarray | None = None,
    escape: bool = True,
) -> Trajectory:
    """Adaptive eighth-order-class integration of a single orbit.

    The escape event (|q| or |p| exceeding three times the outer hyperbolic
    abscissa) terminates the orbit and is reported on the trajectory.
    """
    r_esc = escape_radius(cp) if escape else math.inf

    def rhs(t, y):
        dq, dp = hamilton_rhs(t, y[0], y[1], cp)
        return (dq, dp)

    events = None
    if math.isfinite(r_esc):

        def esc_event(t, y):
            return r_esc - max(abs(y[0]), abs(y[1]))

        esc_event.terminal = True
        esc_event.direction = -1
        events = esc_event

    sol = solve_ivp(
        rhs,
        t_span,
        np.asarray(ic, dtype=float),
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval,
        events=events,
        dense_output=False,
    )
    if not sol.success and sol.status != 1:
        raise IntegrationError(f"orbit integration failed: {sol.message}")
    escaped_at = None
    if sol.status == 1 and events is not None and len(sol.t_events[0]):
        escaped_at = float(sol.t_events[0][0])
    return Trajectory(t=sol.t, q=sol.y[0], p=sol.y[1], escaped_at=escaped_at)


def _batched_strobe(
    ics: np.ndarray,
    cp: ClassicalParams,
    n_periods: int,
    tol: float,
    t0: float,
    variational: bool,
    renorm_every: int = 0,
    collect_samples: bool = True,
):
    """Chunked vectorized stroboscopic integration of many orbits.

    Returns stroboscopic samples (if collected), accumulated tangent log
    norms (if variational), and per-orbit escape period (-1 when retained).
    """
    t_d = 2.0 * math.pi / cp.omega_d
    r_esc = escape_radius(cp)
    m = ics.shape[0]
    q = ics[:, 0].astype(float).copy()
    p = ics[:, 1].astype(float).copy()
    active = np.ones(m, dtype=bool)
    escaped_period = np.full(m, -1, dtype=int)
    samples = np.full((n_periods + 1, m, 2), np.nan) if collect_samples else None
    if collect_samples:
        samples[0, :, 0] = q
        samples[0, :, 1] = p

    if variational:
        vq = np.ones(m)
        vp = np.zeros(m)
        log_norms = np.zeros(m)
    rhs = _rhs_var_flat if variational else _rhs_flat

    chunk = max(1, renorm_every) if variational else max(1, n_periods)
    k = 0
    while k < n_periods:
        span = min(chunk, n_periods - k)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        if variational:
            y0 = np.concatenate((q[idx], p[idx], vq[idx], vp[idx]))
        else:
            y0 = np.concatenate((q[idx], p[idx]))
        t_lo = t0 + k * t_d
        t_hi = t_lo + span * t_d
        t_eval = t_lo + t_d * np.arange(1, span + 1) if collect_samples else (t_hi,)
        sol = solve_ivp(
            rhs,
            (t_lo, t_hi),
            y0,
            args=(cp,),
            method="DOP853",
            rtol=tol,
            atol=tol * 1e-2,
            t_eval=np.asarray(t_eval),
        )
        if not sol.success:
            raise IntegrationError(f"batched integration failed: {sol.message}")
        n_act = idx.size
        y_t = sol.y.reshape(4 if variational else 2, n_act, -1)
        if collect_samples:
            samples[k + 1 : k + 1 + span, idx, 0] = y_t[0].T
            samples[k + 1 : k + 1 + span, idx, 1] = y_t[1].T
        q[idx] = y_t[0, :, -1]
        p[idx] = y_t[1, :, -1]
        if variational:
            vq[idx] = y_t[2, :, -1]
            vp[idx] = y_t[3, :, -1]
            norms = np.hypot(vq[idx], vp[idx])
            log_norms[idx] += np.log(norms)
            vq[idx] /= norms
            vp[idx] /= norms
        # freeze escaped orbits; their samples stay NaN from here on
        esc = (np.abs(q) > r_esc) | (np.abs(p) > r_esc)
        newly = esc & active
        escaped_period[newly] = k + span
        active &= ~esc
        k += span

    out = {"escaped_period": escaped_period, "q": q, "p": p}
    if collect_samples:
        out["samples"] = samples
    if variational:
        out["log_norms"] = log_norms
    return out


def poincare_section(
    ics,
    cp: ClassicalParams,
    n_periods: int = 200,
    tol: float = 1e-10,
    phase: float = SECTION_PHASE,
):
    """Stroboscopic samples for many initial conditions, keyed by orbit.

    Samples are taken at t = phase*T_d + k T_d.  Returns a list of (k, q, p)
    arrays, one per initial condition; escaped orbits are truncated.
    """
    ics = np.atleast_2d(np.asarray(ics, dtype=float))
    t_d = 2.0 * math.pi / cp.omega_d
    res = _batched_strobe(
        ics, cp, n_periods, tol, t0=phase * t_d, variational=False,
        collect_samples=True,
    )
    sections = []
    for i in range(ics.shape[0]):
        qs = res["samples"][:, i, 0]
        ps = res["samples"][:, i, 1]
        keep = ~np.isnan(qs)
        ks = np.flatnonzero(keep)
        sections.append(np.column_stack((ks, qs[keep], ps[keep])))
    return sections


def tangent_map(
    ic: tuple[float, float],
    cp: ClassicalParams,
    n_periods: int = 1,
    tol: float = 1e-12,
    phase: float = SECTION_PHASE,
) -> np.ndarray:
    """2x2 tangent matrix of the stroboscopic map along an orbit."""
    t_d = 2.0 * math.pi / cp.omega_d
    y0 = np.array([ic[0], ic[0], ic[1], ic[1], 1.0, 0.0, 0.0, 1.0])
    # two copies of the orbit carrying the two tangent basis vectors
    sol = solve_ivp(
        _rhs_var_flat,
        (phase * t_d, phase * t_d + n_periods * t_d),
        y0,
        args=(cp,),
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
    )
    if not sol.success:
        raise IntegrationError(f"tangent-map integration failed: {sol.message}")
    y = sol.y[:, -1]
    return np.array([[y[4], y[6]], [y[5], y[7]]])


def lyapunov(
    ic: tuple[float, float],
    cp: ClassicalParams,
    n_periods: int = 1000,
    renorm_every: int = 10,
    tol: float = 1e-10,
    phase: float = SECTION_PHASE,
    escape: bool = True,
) -> LyapunovResult:
    """Largest Lyapunov exponent of one orbit via the variational flow.

    The tangent vector is renormalized every ``renorm_every`` periods; the
    convergence band is the spread of the finite-time estimate over the last
    quarter of the run.  Escaped orbits are flagged unreliable.
    """
    t_d = 2.0 * math.pi / cp.omega_d
    checkpoints = []
    total = 0.0
    periods_done = 0
    escaped = False
    cur = np.array([ic[0], ic[1], 1.0, 0.0])
    r_esc = escape_radius(cp) if escape else math.inf
    while periods_done < n_periods:
        span = min(renorm_every, n_periods - periods_done)
        t_lo = phase * t_d + periods_done * t_d
        sol = solve_ivp(
            _rhs_var_flat,
            (t_lo, t_lo + span * t_d),
            cur,
            args=(cp,),
            method="DOP853",
            rtol=tol,
            atol=tol * 1e-2,
        )
        if not sol.success:
            raise IntegrationError(f"Lyapunov integration failed: {sol.message}")
        cur = sol.y[:, -1]
        norm = math.hypot(cur[2], cur[3])
        total += math.log(norm)
        cur[2] /= norm
        cur[3] /= norm
        periods_done += span
        checkpoints.append(total / (periods_done * t_d))
        if abs(cur[0]) > r_esc or abs(cur[1]) > r_esc:
            escaped = True
            break
    lam = checkpoints[-1]
    tail = checkpoints[max(0, 3 * len(checkpoints) // 4) :]
    band = max(abs(x - lam) for x in tail) if len(tail) > 1 else abs(lam)
    if escaped:
        warnings.warn("orbit escaped; Lyapunov exponent unreliable", stacklevel=2)
    return LyapunovResult(value=float(lam), band=float(band), escaped=escaped)


def lyapunov_batch(
    ics,
    cp: ClassicalParams,
    n_periods: int = 1000,
    renorm_every: int = 10,
    tol: float = 1e-8,
    phase: float = SECTION_PHASE,
):
    """Largest Lyapunov exponents of many orbits at once.

    Returns (values, escaped_mask).  Escaped orbits keep the estimate
    accumulated up to their escape but are flagged.
    """
    ics = np.atleast_2d(np.asarray(ics, dtype=float))
    t_d = 2.0 * math.pi / cp.omega_d
    res = _batched_strobe(
        ics, cp, n_periods, tol, t0=phase * t_d, variational=True,
        renorm_every=renorm_every, collect_samples=False,
    )
    escaped = res["escaped_period"] >= 0
    spans = np.where(escaped, res["escaped_period"], n_periods).astype(float)
    lam = res["log_norms"] / (spans * t_d)
    return lam, escaped


def stroboscopic_fixed_point(
    cp: ClassicalParams,
    guess: tuple[float, float] = (0.0, 0.0),
    tol: float = 1e-10,
    max_iter: int = 30,
    phase: float = SECTION_PHASE,
) -> np.ndarray:
    """Newton solve for the near-origin fixed point of the period map.

    This is the hyperbolic center of the inner double-well structure (the
    well bottoms themselves are period-2 points of the map and not fixed).
    """
    t_d = 2.0 * math.pi / cp.omega_d
    z = np.asarray(guess, dtype=float)
    for _ in range(max_iter):
        y0 = np.array([z[0], z[0], z[1], z[1], 1.0, 0.0, 0.0, 1.0])
        sol = solve_ivp(
            _rhs_var_flat,
            (phase * t_d, (phase + 1.0) * t_d),
            y0,
            args=(cp,),
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
        )
        y = sol.y[:, -1]
        f = np.array([y[0] - z[0], y[2] - z[1]])
        if np.max(np.abs(f)) < tol:
            return z
        jac = np.array([[y[4] - 1.0, y[6]], [y[5], y[7] - 1.0]])
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError("singular Jacobian in fixed-point Newton") from exc
        # guarded step: never jump further than a well width
        cap = 1.0 + abs(z[0]) + abs(z[1])
        norm = np.max(np.abs(step))
        if norm > cap:
            step *= cap / norm
        z = z - step
    raise IntegrationError(
        f"stroboscopic fixed point did not converge within {max_iter} iterations"
    )


def critical_points(cp: ClassicalParams) -> CriticalPointSet:
    """Stationary points of the undriven Hamiltonian with stability labels.

    Linearizing the flow about (q_c, 0) gives eigenvalues
    lambda^2 = -omega0 * V''(q_c): imaginary (center, frequency
    sqrt(omega0 V'')) or real (hyperbolic, rate sqrt(-omega0 V'')).
    """
    d_minus, d_plus = _critical_abscissas(cp.omega0, cp.g3, cp.g4)

    def classify(q_c: float) -> CriticalPoint:
        curv = _curvature(q_c, cp)
        if curv >= 0:
            return CriticalPoint(q_c, 0.0, "center", math.sqrt(cp.omega0 * curv))
        return CriticalPoint(q_c, 0.0, "hyperbolic", math.sqrt(-cp.omega0 * curv))

    if d_plus is None:
        return CriticalPointSet(points=(classify(0.0),), single_well=True)
    return CriticalPointSet(
        points=(classify(0.0), classify(d_minus), classify(d_plus)),
        single_well=False,
    )


def lemniscate(scales, n_points: int = 720) -> Lemniscate:
    """Figure-eight separatrix r^2 = 4 Gamma cos(2 theta) of the inner well.

    Sampled about the sqrt(2) Pi displaced center along q; encloses area
    4 Gamma, has focal distance sqrt(2 Gamma), and admits n_in = 2 Gamma/pi
    semiclassical levels.
    """
    gamma = scales.Gamma
    if gamma < 0:
        raise ValueError(f"Gamma must be non-negative for the separatrix, got {gamma}")
    if not scales.inner_well_valid:
        warnings.warn(
            "inner double well is not geometrically valid; the curve is formal",
            stacklevel=2,
        )
    center = math.sqrt(2.0) * scales.Pi
    half = n_points // 2
    if half % 2 == 0:
        half += 1  # odd count puts a sample exactly on the lobe tip
    theta = np.linspace(-math.pi / 4.0, math.pi / 4.0, half)
    r = np.sqrt(4.0 * gamma * np.cos(2.0 * theta))
    right = np.column_stack((center + r * np.cos(theta), r * np.sin(theta)))
    left = np.column_stack((center - r * np.cos(theta), -r * np.sin(theta)))
    curve = np.vstack((right, left[::-1]))
    return Lemniscate(
        center_q=center,
        curve=curve,
        area=4.0 * gamma,
        n_in=2.0 * gamma / math.pi,
        focal_distance=math.sqrt(2.0 * gamma),
    )


# ---------------------------------------------------------------------------
# Full (unexpanded) array potential flow for validation
# ---------------------------------------------------------------------------


class FullSnailFlow:
    """Classical flow of the unexpanded array potential in (q, p).

    Coordinates are the same rescaled (q, p) as the quartic flow:
    phi = M phi_min + sqrt(2 hbar_eff) q and n = p / (sqrt(2) hbar_eff^{3/2}),
    evolved in lab time, so this flow equals hbar_eff times the quartic
    classical flow of the mapped parameters in the small-amplitude limit.
    The constraint root phi_s[phi] is tracked by a guarded Newton iteration
    continued from the previous evaluation.
    """

    def __init__(self, sp: SnailParams, Omega_d_tilde: float = 0.0,
                 omega_d: float | None = None):
        self.sp = sp
        self.expansion = snail_coefficients(sp, Omega_d_tilde=Omega_d_tilde,
                                            omega_d=omega_d)
        self.hbar_eff = self.expansion.hbar_eff
        self.E_L = self.expansion.E_L
        self.Omega_d_tilde = Omega_d_tilde
        self.omega_d = self.expansion.params.omega_d
        self.phi_center = sp.M * self.expansion.phi_min
        self._last_root = self.expansion.phi_min

    def phi_of_q(self, q):
        return self.phi_center + math.sqrt(2.0 * self.hbar_eff) * np.asarray(q)

    def phi_s(self, phi: float, guess: float | None = None,
              tol: float = 1e-12, max_iter: int = 60) -> float:
        """Root of the flux-partition constraint for a given total phase."""
        sp = self.sp
        x = self._last_root if guess is None else guess

        def g(xs):
            return (
                sp.alpha * math.sin(xs)
                - math.sin((sp.phi_ext - xs) / sp.m)
                + sp.xi_J * (sp.M * xs - phi)
            )

        def gp(xs):
            return (
                sp.alpha * math.cos(xs)
                + math.cos((sp.phi_ext - xs) / sp.m) / sp.m
                + sp.xi_J * sp.M
            )

        for _ in range(max_iter):
            val = g(x)
            if abs(val) < tol:
                self._last_root = x
                return x
            deriv = gp(x)
            if deriv <= 0:  # monotone for xi_J M > alpha + 1/m; guard anyway
                deriv = max(deriv, 1e-6)
            step = val / deriv
            cap = 0.5 * (1.0 + abs(x))
            if abs(step) > cap:
                step = math.copysign(cap, step)
            x -= step
        raise IntegrationError(
            f"flux-partition Newton failed at phi={phi:.6g} "
            f"(last root {self._last_root:.6g}, residual {g(x):.2e})"
        )

    def potential(self, phi: float) -> float:
        """Array potential at total phase phi (frequency units)."""
        ps = self.phi_s(phi)
        sp = self.sp
        return (
            sp.M * sp.E_J * snail_potential(ps, sp)
            + 0.5 * self.E_L * (phi - sp.M * ps) ** 2
        )

    def rhs(self, t: float, q: float, p: float):
        """Lab-time flow field in (q, p)."""
        sp = self.sp
        h = self.hbar_eff
        phi = float(self.phi_of_q(q))
        ps = self.phi_s(phi)
        # dU/dphi collapses to E_L (phi - M phi_s) on the constraint manifold
        du = self.E_L * (phi - sp.M * ps)
        dq = (4.0 * sp.E_C / h**2) * p + (
            self.Omega_d_tilde / math.sqrt(h)
        ) * math.cos(self.omega_d * t)
        dp = -math.sqrt(2.0) * h**1.5 * du
        return dq, dp

    def __call__(self, t, y):
        dq, dp = self.rhs(t, y[0], y[1])
        return (dq, dp)


def full_snail_rhs(t, q, p, sp: SnailParams, drive=(0.0, None)):
    """One-off evaluation of the unexpanded-potential flow field.

    ``drive`` is (Omega_d_tilde, omega_d); prefer constructing a
    :class:`FullSnailFlow` when integrating, so the constraint root is
    continued between evaluations.
    """
    flow = FullSnailFlow(sp, Omega_d_tilde=drive[0], omega_d=drive[1])
    return flow.rhs(t, q, p)


# ---------------------------------------------------------------------------
# Chaos-threshold scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdFamily:
    """One-parameter ray through the (K/omega0, Gamma) plane.

    ``mode='gamma'`` varies Gamma at fixed K/omega0; ``mode='kerr'`` varies
    K/omega0 at fixed Gamma.  Members are realized through the exact-Kerr
    parameter solver at hbar_eff = 1.
    """

    mode: str = "kerr"
    fixed: float = 80.0
    lo: float = 1e-4
    hi: float = 8e-4
    C: float = 10.0
    omega_d_over_w0: float = 1.999866

    def __post_init__(self):
        if self.mode not in ("gamma", "kerr"):
            raise ValueError(f"mode must be 'gamma' or 'kerr', got {self.mode!r}")
        if not (self.lo < self.hi):
            raise ValueError("ray bounds must satisfy lo < hi")

    def member(self, x: float) -> tuple[ClassicalParams, float, float]:
        """Classical parameters and (Gamma, K) of the ray point x."""
        if self.mode == "gamma":
            gamma, k = x, self.fixed
        else:
            gamma, k = self.fixed, x
        params = params_from_targets(
            k, gamma, C=self.C, omega_d_over_w0=self.omega_d_over_w0
        )
        cp = ClassicalParams(
            omega0=params.omega0, g3=params.g3, g4=params.g4,
            omega_d=params.omega_d, Omega_d=params.Omega_d,
        )
        return cp, gamma, k


@dataclass(frozen=True)
class ProbeSpec:
    """Settings of the Lyapunov probes used by the threshold scans."""

    n_ics: int = 25
    radius_factor: float = 0.2
    n_periods: int = 600
    renorm_every: int = 10
    tol: float = 1e-8
    seed: int = 0
    chaos_floor: float = 1e-3
    band_factor: float = 3.0
    grid_n: int = 201
    grid_periods: int = 250
    box_factor: float = 1.2
    bisection_steps: int = 7


@dataclass(frozen=True)
class ThresholdResult:
    """Gamma*K/omega0 products at the two classical chaos events."""

    inner: float
    merge: float
    inner_bracket: tuple[float, float]
    merge_bracket: tuple[float, float]


def _probe_disk_ics(center: np.ndarray, radius: float, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((center[0] + r * np.cos(th), center[1] + r * np.sin(th)))


def _regular_reference(cp: ClassicalParams, probe: ProbeSpec,
                       n_periods: int) -> LyapunovResult:
    """Finite-time exponent of a known regular orbit at the same parameters.

    A small-amplitude orbit at the bottom of the deep outer well stays
    regular across the whole scanned family (the chaotic sea lives near the
    separatrices), so its finite-time estimate calibrates how fast a regular
    exponent decays at this horizon.
    """
    d_minus, d_plus = _critical_abscissas(cp.omega0, cp.g3, cp.g4)
    if d_minus is None:
        ic = (0.05, 0.0)
    else:
        ic = (d_minus + 0.02 * (d_plus - d_minus), 0.0)
    return lyapunov(
        ic, cp, n_periods=n_periods,
        renorm_every=probe.renorm_every, tol=probe.tol, escape=False,
    )


def _chaos_cutoff(cp: ClassicalParams, probe: ProbeSpec, n_periods: int) -> float:
    ref = _regular_reference(cp, probe, n_periods)
    return max(
        probe.band_factor * ref.band,
        probe.band_factor * abs(ref.value),
        probe.chaos_floor * cp.omega0,
    )


def _median_probe_lambda(cp: ClassicalParams, gamma: float, probe: ProbeSpec,
                         seed_salt: int) -> tuple[float, float]:
    """(median lambda over the probe disk, chaos cutoff) at one ray point.

    Orbits that escape the region of interest are counted as chaotic in the
    vote (confined regular motion cannot leave the well structure).
    """
    saddle = stroboscopic_fixed_point(cp)
    radius = probe.radius_factor * math.sqrt(2.0 * gamma)
    ics = _probe_disk_ics(saddle, radius, probe.n_ics, probe.seed + seed_salt)
    lam, escaped = lyapunov_batch(
        ics, cp, n_periods=probe.n_periods,
        renorm_every=probe.renorm_every, tol=probe.tol,
    )
    lam = np.where(escaped, math.inf, lam)
    cutoff = _chaos_cutoff(cp, probe, probe.n_periods)
    return float(np.median(lam)), cutoff


def lyapunov_field(
    cp: ClassicalParams,
    q_axis: np.ndarray,
    p_axis: np.ndarray,
    n_periods: int = 250,
    renorm_every: int = 10,
    tol: float = 1e-8,
) -> np.ndarray:
    """Largest-Lyapunov-exponent field on a (q0, p0) grid (rows over p)."""
    qq, pp = np.meshgrid(q_axis, p_axis)
    ics = np.column_stack((qq.ravel(), pp.ravel()))
    lam, escaped = lyapunov_batch(
        ics, cp, n_periods=n_periods, renorm_every=renorm_every, tol=tol,
    )
    lam = np.where(escaped, np.nan, lam)
    return lam.reshape(len(p_axis), len(q_axis))


def _merged(cp: ClassicalParams, gamma: float, probe: ProbeSpec) -> bool:
    """Flood-fill test: does center chaos connect to the surrounding sea?"""
    saddle = stroboscopic_fixed_point(cp)
    half_q = probe.box_factor * 2.0 * math.sqrt(gamma)
    half_p = probe.box_factor * math.sqrt(gamma / 2.0)
    n = probe.grid_n
    q_axis = saddle[0] + np.linspace(-half_q, half_q, n)
    p_axis = saddle[1] + np.linspace(-half_p, half_p, n)
    lam = lyapunov_field(
        cp, q_axis, p_axis, n_periods=probe.grid_periods,
        renorm_every=probe.renorm_every, tol=probe.tol,
    )
    cutoff = _chaos_cutoff(cp, probe, probe.grid_periods)
    chaotic = np.nan_to_num(lam, nan=np.inf) > cutoff  # escaped cells count as sea
    labels, _ = _connected_label(chaotic)

    qq, pp = np.meshgrid(q_axis - saddle[0], p_axis - saddle[1])
    center_cells = (qq**2 + pp**2) < (0.15 * math.sqrt(2.0 * gamma)) ** 2
    center_labels = set(np.unique(labels[center_cells & chaotic])) - {0}
    if not center_labels:
        return False
    ring = np.zeros_like(chaotic)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    ring_labels = set(np.unique(labels[ring & chaotic])) - {0}
    return bool(center_labels & ring_labels)


def _bisect_ray(family: ThresholdFamily, predicate, probe: ProbeSpec):
    """Bisection for the smallest ray coordinate where predicate turns True."""
    lo, hi = family.lo, family.hi
    cp_lo, g_lo, k_lo = family.member(lo)
    cp_hi, g_hi, k_hi = family.member(hi)
    if predicate(cp_lo, g_lo):
        raise RootBracketError(
            f"ray start {lo:g} is already past the transition; lower it"
        )
    if not predicate(cp_hi, g_hi):
        raise RootBracketError(
            f"ray end {hi:g} has not reached the transition; raise it"
        )
    for _ in range(probe.bisection_steps):
        mid = math.sqrt(lo * hi)
        cp, g_mid, _ = family.member(mid)
        if predicate(cp, g_mid):
            hi = mid
        else:
            lo = mid
    def product(x):
        _, g, k = family.member(x)
        return g * k
    return product(math.sqrt(lo * hi)), (product(lo), product(hi))


def threshold_scan(
    family: ThresholdFamily,
    probe: ProbeSpec = ProbeSpec(),
) -> ThresholdResult:
    """Locate the two classical chaos thresholds along a parameter ray.

    Inner onset: the median largest Lyapunov exponent over a probe disk
    around the inner-well center first exceeds the chaos cutoff.  Merge: the
    chaotic cells at the field center first connect (4-neighbor flood fill)
    to the sea at the edge of a box spanning the separatrix bounding box.
    Both events are reported as Gamma*K/omega0 products.
    """
    salt = 1

    def inner_pred(cp: ClassicalParams, gamma: float) -> bool:
        nonlocal salt
        salt += 1
        med, cutoff = _median_probe_lambda(cp, gamma, probe, seed_salt=salt)
        return med > cutoff

    inner, inner_bracket = _bisect_ray(family, inner_pred, probe)

    def merge_pred(cp: ClassicalParams, gamma: float) -> bool:
        return _merged(cp, gamma, probe)

    merge, merge_bracket = _bisect_ray(family, merge_pred, probe)
    return ThresholdResult(
        inner=inner, merge=merge,
        inner_bracket=inner_bracket, merge_bracket=merge_bracket,
    )
