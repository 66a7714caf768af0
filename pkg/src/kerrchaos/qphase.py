"""Quantum phase-space diagnostics: coherent states, Husimi fields, entropy.

Phase-space coordinates map to coherent labels through
``alpha = (q + i p) / sqrt(2 hbar_eff)``; the quantum stack itself always
uses a unit commutator, so ``hbar_eff`` only rescales the (q, p) axes.

Convention: the stroboscopic sampling phase of the drive is chosen so that
the double well of the stroboscopic dynamics lies along the position axis
(see ``floquet``); the coherent cat targets below therefore sit on the real
alpha axis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ContractError, TruncationError
from .floquet import FloquetSolution
from .model import DerivedScales, FockSpace

__all__ = [
    "CoherentState",
    "CatPair",
    "HusimiField",
    "PhaseGrid",
    "coherent_state",
    "coherent_from_phase_point",
    "participation_ratio",
    "find_cat_pair",
    "husimi",
    "wehrl_entropy",
    "adaptive_phase_grid",
]


@dataclass(frozen=True)
class CoherentState:
    """Truncated coherent state |alpha> with its phase-space scaling."""

    alpha: complex
    vector: np.ndarray
    hbar_eff: float


@dataclass(frozen=True)
class CatPair:
    """The two Floquet states most supported on the double-well bottoms.

    ``quality`` is the mean projector weight of the pair on the two coherent
    targets at the well minima (1 for ideal cat superpositions); ``n_min``
    holds the photon-number expectation of each member.  ``splitting`` is
    the quasienergy distance of the pair measured modulo omega_d / 2: the
    drive-parity structure offsets the two members by exactly half the
    quasienergy circle, and the physical (tunneling) splitting is the
    deviation from that offset.
    """

    indices: tuple[int, int]
    quality: float
    n_min: tuple[float, float]
    splitting: float
    mean_spacing: float


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular (q, p) grid specification."""

    q_min: float
    q_max: float
    n_q: int
    p_min: float
    p_max: float
    n_p: int

    def __post_init__(self):
        if self.q_max <= self.q_min or self.p_max <= self.p_min:
            raise ValueError("grid bounds must be increasing")
        if self.n_q < 2 or self.n_p < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def q_axis(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.n_q)

    @property
    def p_axis(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / (self.n_q - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    def translated(self, dq: float, dp: float) -> "PhaseGrid":
        return PhaseGrid(
            self.q_min + dq, self.q_max + dq, self.n_q,
            self.p_min + dp, self.p_max + dp, self.n_p,
        )

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(
            self.q_min, self.q_max, factor * (self.n_q - 1) + 1,
            self.p_min, self.p_max, factor * (self.n_p - 1) + 1,
        )


@dataclass(frozen=True)
class HusimiField:
    """Husimi density Q = |<alpha|psi>|^2 / pi sampled on a (q, p) grid."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # shape (n_p, n_q), row-major over p then q
    hbar_eff: float

    @property
    def dq(self) -> float:
        return float(self.q_axis[1] - self.q_axis[0])

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0])

    @property
    def normalization(self) -> float:
        """Quadrature of Q over d^2 alpha = dq dp / (2 hbar_eff); ~1 when resolved."""
        return float(
            np.trapezoid(np.trapezoid(self.values, self.q_axis, axis=1), self.p_axis)
            / (2.0 * self.hbar_eff)
        )


def _log_coherent_amplitudes(alpha: complex, n: int) -> np.ndarray:
    ns = np.arange(n)
    if alpha == 0:
        v = np.zeros(n, dtype=complex)
        v[0] = 1.0
        return v
    log_mag = -0.5 * abs(alpha) ** 2 + ns * math.log(abs(alpha)) - 0.5 * gammaln(ns + 1)
    return np.exp(log_mag + 1j * ns * np.angle(alpha))


def coherent_state(
    alpha: complex,
    space: FockSpace | int,
    hbar_eff: float = 1.0,
) -> CoherentState:
    """Truncated coherent state with amplitudes exp(-|a|^2/2) a^n / sqrt(n!).

    Amplitudes are evaluated through log-domain factorials so large |alpha|
    cannot overflow.  Raises when the truncated tail holds more than 1e-10
    of the norm (rule of thumb: N > |alpha|^2 + 8 |alpha|).
    """
    n = space.N if isinstance(space, FockSpace) else int(space)
    vec = _log_coherent_amplitudes(alpha, n)
    norm_sq = float(np.sum(np.abs(vec) ** 2))
    tail = 1.0 - norm_sq
    if tail >= 1e-10:
        raise TruncationError(
            f"coherent state |alpha|^2 = {abs(alpha) ** 2:.3g} leaves "
            f"{tail:.2e} of its population beyond N = {n}; "
            f"need N > |alpha|^2 + 8 |alpha| ~ "
            f"{abs(alpha) ** 2 + 8 * abs(alpha):.0f}"
        )
    return CoherentState(alpha=alpha, vector=vec / math.sqrt(norm_sq), hbar_eff=hbar_eff)


def coherent_from_phase_point(
    q: float, p: float, space: FockSpace | int, hbar_eff: float = 1.0
) -> CoherentState:
    """Coherent state centered at the phase-space point (q, p)."""
    alpha = (q + 1j * p) / math.sqrt(2.0 * hbar_eff)
    return coherent_state(alpha, space, hbar_eff)


def participation_ratio(state: CoherentState | np.ndarray, floquet: FloquetSolution) -> float:
    """Inverse fourth-power overlap sum of a state over all Floquet states.

    The sum runs over the complete Floquet basis (converged or not) so that
    the overlaps resolve unity; a warning is raised when more than 1% of the
    state leaks onto non-converged (truncation-artifact) states.
    """
    vec = state.vector if isinstance(state, CoherentState) else np.asarray(state)
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-8:
        raise ContractError(f"input state norm deviates from 1 by {abs(norm - 1):.2e}")
    overlaps = np.abs(floquet.states.conj().T @ vec) ** 2
    total = overlaps.sum()
    if abs(total - 1.0) > 1e-8:
        raise ContractError(
            f"Floquet-basis completeness defect {abs(total - 1):.2e}; "
            "states matrix is not unitary"
        )
    leak = overlaps[~floquet.converged].sum()
    if leak > 0.01:
        warnings.warn(
            f"{leak:.1%} of the state lives on non-converged Floquet states; "
            "enlarge the Fock dimension",
            stacklevel=2,
        )
    return float(1.0 / np.sum(overlaps**2))


def find_cat_pair(
    floquet: FloquetSolution,
    scales: DerivedScales,
    hbar_eff: float = 1.0,
    include_displacement: bool = True,
) -> CatPair:
    """Rank Floquet states by weight on the two well-bottom coherent targets.

    The targets sit at alpha = +-sqrt(Gamma) shifted by the well-center
    displacement Pi / sqrt(hbar_eff) along the position axis (the shift is
    configurable off).  Only truncation-converged states compete.  Quality
    degrades gracefully and is reported rather than raised on.
    """
    if not scales.inner_well_valid:
        warnings.warn(
            "inner double well is not geometrically valid at these parameters; "
            "returning the best-effort pair",
            stacklevel=2,
        )
    gamma = max(scales.Gamma, 0.0)
    offset = scales.Pi / math.sqrt(hbar_eff) if include_displacement else 0.0
    a_min = math.sqrt(gamma)
    t_plus = coherent_state(+a_min + offset, floquet.N, hbar_eff).vector
    t_minus = coherent_state(-a_min + offset, floquet.N, hbar_eff).vector
    weight = (
        np.abs(t_plus.conj() @ floquet.states) ** 2
        + np.abs(t_minus.conj() @ floquet.states) ** 2
    )
    if floquet.converged.sum() >= 2:
        ranked = np.where(floquet.converged, weight, -1.0)
    else:
        # deep post-disintegration regime: nothing converges at desk-scale
        # truncations, rank everything and let quality tell the story
        warnings.warn(
            "fewer than 2 converged Floquet states; ranking the full basis",
            stacklevel=2,
        )
        ranked = weight
    order = np.argsort(ranked)[::-1]
    i, j = int(order[0]), int(order[1])

    circumference = 2.0 * math.pi / floquet.T_d
    half = 0.5 * circumference
    delta = abs(floquet.quasienergies[i] - floquet.quasienergies[j]) % half
    splitting = min(delta, half - delta)
    n_retained = max(int(floquet.converged.sum()), 1)
    return CatPair(
        indices=(i, j),
        quality=float(0.5 * (weight[i] + weight[j])),
        n_min=(float(floquet.mean_n[i]), float(floquet.mean_n[j])),
        splitting=float(splitting),
        mean_spacing=circumference / n_retained,
    )


def _overlap_grid(
    state: np.ndarray,
    grid: PhaseGrid,
    hbar_eff: float,
    chunk: int = 4096,
) -> np.ndarray:
    """|<alpha(q,p)|psi>|^2 on the grid, chunked to bound memory."""
    n = state.shape[0]
    q = grid.q_axis
    p = grid.p_axis
    qq, pp = np.meshgrid(q, p)
    alphas = (qq + 1j * pp).ravel() / math.sqrt(2.0 * hbar_eff)
    ns = np.arange(n)
    log_fact_half = 0.5 * gammaln(ns + 1)
    out = np.empty(alphas.size)
    for start in range(0, alphas.size, chunk):
        al = alphas[start : start + chunk]
        mag = np.abs(al)
        zero_rows = mag == 0
        log_mag = np.log(np.where(zero_rows, 1.0, mag))
        log_terms = (
            -0.5 * mag[:, None] ** 2
            + ns[None, :] * log_mag[:, None]
            - log_fact_half[None, :]
        )
        amps = np.exp(log_terms - 1j * ns[None, :] * np.angle(al)[:, None])
        if np.any(zero_rows):
            amps[zero_rows] = 0.0
            amps[zero_rows, 0] = 1.0
        out[start : start + chunk] = np.abs(amps @ state) ** 2
    return out.reshape(grid.n_p, grid.n_q)


def husimi(
    state: np.ndarray | CoherentState,
    grid: PhaseGrid,
    hbar_eff: float = 1.0,
    boundary_warn_ratio: float = 1e-6,
) -> HusimiField:
    """Husimi density of a state vector on a rectangular (q, p) grid.

    Warns when the grid boundary still carries weight above
    ``boundary_warn_ratio`` of the peak (coverage too small).
    """
    vec = state.vector if isinstance(state, CoherentState) else np.asarray(state)
    values = _overlap_grid(vec, grid, hbar_eff) / math.pi
    peak = values.max()
    boundary = max(
        values[0, :].max(), values[-1, :].max(),
        values[:, 0].max(), values[:, -1].max(),
    )
    if peak > 0 and boundary > boundary_warn_ratio * peak:
        warnings.warn(
            f"Husimi boundary weight {boundary / peak:.1e} of peak; "
            "the grid may not cover the state",
            stacklevel=2,
        )
    return HusimiField(
        q_axis=grid.q_axis, p_axis=grid.p_axis, values=values, hbar_eff=hbar_eff
    )


def wehrl_entropy(
    state: np.ndarray | CoherentState | HusimiField,
    grid: PhaseGrid | None = None,
    hbar_eff: float = 1.0,
    prefactor: str = "as-published",
) -> float:
    """Shannon entropy of the Husimi density by trapezoid quadrature.

    ``prefactor='as-published'`` applies the 1/pi normalization in front of
    the integral -int Q ln Q d^2 alpha; ``'wehrl'`` drops it (standard Wehrl
    convention, exactly pi times larger).  Escalates the coverage warning to
    an error when the grid boundary carries more than 1e-3 of the peak.
    """
    if prefactor not in ("as-published", "wehrl"):
        raise ValueError(f"unknown prefactor convention {prefactor!r}")
    if isinstance(state, HusimiField):
        field = state
    else:
        if grid is None:
            raise ValueError("a PhaseGrid is required unless a HusimiField is given")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            field = husimi(state, grid, hbar_eff)
    values = field.values
    peak = values.max()
    boundary = max(
        values[0, :].max(), values[-1, :].max(),
        values[:, 0].max(), values[:, -1].max(),
    )
    if peak > 0 and boundary > 1e-3 * peak:
        raise ContractError(
            f"Husimi boundary weight {boundary / peak:.1e} of peak exceeds 1e-3; "
            "enlarge the entropy grid"
        )
    q_ln_q = np.where(values > 0.0, values * np.log(np.where(values > 0, values, 1.0)), 0.0)
    integral = (
        np.trapezoid(np.trapezoid(q_ln_q, field.q_axis, axis=1), field.p_axis)
        / (2.0 * field.hbar_eff)
    )
    s = -integral
    if prefactor == "as-published":
        s /= math.pi
    return float(s)


def adaptive_phase_grid(
    scales: DerivedScales,
    hbar_eff: float = 1.0,
    points_per_unit: float = 4.0,
    box_factor: float = 1.5,
    pad_widths: float = 4.0,
) -> PhaseGrid:
    """Grid sized to the figure-eight bounding box plus coherent-width padding.

    The box spans ``box_factor`` times the separatrix extent (2 sqrt(Gamma)
    in q, sqrt(Gamma/2) in p, centered at the sqrt(2) Pi displaced well
    center) padded by ``pad_widths`` coherent widths sqrt(hbar_eff).
    """
    gamma = max(scales.Gamma, 1.0)
    center = math.sqrt(2.0) * scales.Pi
    pad = pad_widths * math.sqrt(hbar_eff)
    half_q = box_factor * 2.0 * math.sqrt(gamma) + pad
    half_p = box_factor * math.sqrt(gamma / 2.0) + pad
    n_q = max(32, int(round(2 * half_q * points_per_unit)) + 1)
    n_p = max(32, int(round(2 * half_p * points_per_unit)) + 1)
    return PhaseGrid(
        center - half_q, center + half_q, n_q,
        -half_p, half_p, n_p,
    )
