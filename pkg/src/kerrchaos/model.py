"""Physical parameters, derived scales, Fock-space operators, and Hamiltonians.

Unit convention: every frequency-like quantity is expressed in units of the
bare oscillator frequency, so ``omega0 = 1`` is the default and all inputs
and outputs are effectively ratios to omega0.  The quantum stack always uses
a unit commutator; the dimensionless effective Planck constant ``hbar_eff``
enters only through coherent-state scaling and the classical parameter map.

The undriven Hamiltonian is

    H0 = omega0 * adag a + (g3 / 3) (a + adag)^3 + (g4 / 4) (a + adag)^4

and the drive couples through -i (a - adag) cos(omega_d t) with amplitude
Omega_d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    FluxConfigurationError,
    RootBracketError,
    StabilityError,
    TruncationError,
)

__all__ = [
    "OscillatorParams",
    "ClassicalParams",
    "DerivedScales",
    "FockSpace",
    "SnailParams",
    "SnailExpansion",
    "build_static_hamiltonian",
    "build_drive_operator",
    "kerr_nonlinearity",
    "second_order_kerr",
    "squeezing_amplitude",
    "derived_scales",
    "params_from_targets",
    "snail_coefficients",
    "classical_from_quantum",
    "quantum_from_classical",
    "default_fock_dimension",
]

#: reference ratio of drive to oscillator frequency used for all benchmark runs
DEFAULT_DRIVE_RATIO = 1.999866


@dataclass(frozen=True)
class OscillatorParams:
    """Drive and nonlinearity parameters of the driven oscillator.

    Attributes
    ----------
    g3, g4 : float
        Third- and fourth-rank nonlinearity coefficients (units of omega0).
    omega_d, Omega_d : float
        Drive frequency and amplitude.
    omega0 : float
        Bare oscillator frequency; keep at 1 unless you know why not.
    hbar_eff : float
        Dimensionless effective Planck constant (phase-space volume scale).
    """

    g3: float
    g4: float
    omega_d: float
    Omega_d: float = 0.0
    omega0: float = 1.0
    hbar_eff: float = 1.0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.omega_d <= 0:
            raise ValueError(f"omega_d must be positive, got {self.omega_d}")
        if self.hbar_eff <= 0:
            raise ValueError(f"hbar_eff must be positive, got {self.hbar_eff}")
        if abs(self.g3) > 0.1 * self.omega0:
            warnings.warn(
                f"g3/omega0 = {self.g3 / self.omega0:.3g} is not small; "
                "the quartic treatment of the potential becomes questionable",
                stacklevel=2,
            )
        if self.g4 > 0 and not self.has_double_well:
            warnings.warn(
                "g3^2 - 2 g4 omega0 <= 0: the static cubic-quartic potential has "
                "no real off-center turning points (single-well configuration)",
                stacklevel=2,
            )

    @property
    def has_double_well(self) -> bool:
        """True when the static potential has real off-center critical points."""
        return self.g4 > 0 and self.g3**2 - 2.0 * self.g4 * self.omega0 > 0


@dataclass(frozen=True)
class ClassicalParams:
    """Oscillator parameters after the classical rescaling by hbar_eff."""

    g3: float
    g4: float
    omega_d: float
    Omega_d: float = 0.0
    omega0: float = 1.0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.omega_d <= 0:
            raise ValueError(f"omega_d must be positive, got {self.omega_d}")

    @property
    def has_double_well(self) -> bool:
        return self.g4 > 0 and self.g3**2 - 2.0 * self.g4 * self.omega0 > 0


@dataclass(frozen=True)
class DerivedScales:
    """Derived drive/well scales of a parameter set.

    ``Pi`` is the linear-response displacement parameter, ``Gamma = g3 Pi / K``
    sets the separation of the inner double well (minima at +-sqrt(2 Gamma)
    relative to the well center), ``n_in = 2 Gamma / pi`` is the semiclassical
    count of levels inside the figure-eight separatrix, and ``d_minus``,
    ``d_plus`` are the off-center critical-point abscissas of the static
    potential (None when the quartic has no real ones).
    """

    K: float
    K2: float
    eps2: float
    Pi: float
    Gamma: float
    n_in: float
    d_minus: float | None
    d_plus: float | None
    T_d: float
    inner_well_valid: bool

    @property
    def delta_K(self) -> float:
        """Absolute difference between the exact and second-order Kerr values."""
        return abs(self.K - self.K2)


class FockSpace:
    """Truncated bosonic basis with dense ladder and quadrature matrices.

    The annihilation matrix is exact in the truncated basis
    (``a|n> = sqrt(n)|n-1>``); the commutator ``[a, adag]`` deviates from the
    identity only in the last diagonal entry, which is the usual truncation
    artifact.
    """

    def __init__(self, n: int):
        if n < 4:
            raise TruncationError(f"Fock dimension must be >= 4, got {n}")
        self.N = int(n)
        self.a = np.diag(np.sqrt(np.arange(1.0, n)), k=1)
        self.adag = self.a.T.copy()
        self.n_op = np.diag(np.arange(n, dtype=float))
        self.x = (self.a + self.adag) / math.sqrt(2.0)

    def __repr__(self):
        return f"FockSpace(N={self.N})"


def default_fock_dimension(gamma: float) -> int:
    """Default truncation dimension for a target well-depth parameter Gamma."""
    return max(64, int(math.ceil(8.0 * max(gamma, 0.0))))


def build_static_hamiltonian(params: OscillatorParams, space: FockSpace) -> np.ndarray:
    """Dense undriven Hamiltonian in the truncated Fock basis (real symmetric)."""
    q = space.a + space.adag
    q2 = q @ q
    h = params.omega0 * space.n_op
    if params.g3 != 0.0:
        h = h + (params.g3 / 3.0) * (q @ q2)
    if params.g4 != 0.0:
        h = h + (params.g4 / 4.0) * (q2 @ q2)
    # matrix powers of a symmetric band matrix are symmetric up to rounding;
    # symmetrize so downstream eigensolvers see an exactly Hermitian input
    return 0.5 * (h + h.T)


def build_drive_operator(space: FockSpace) -> np.ndarray:
    """Hermitian drive coupling -i (a - adag).

    The full driven Hamiltonian at time t is
    ``H0 + Omega_d * build_drive_operator(space) * cos(omega_d t)``.
    """
    return -1j * (space.a - space.adag)


def _lowest_levels(params: OscillatorParams, n: int, k: int = 3) -> np.ndarray:
    h = build_static_hamiltonian(params, FockSpace(n))
    return np.linalg.eigvalsh(h)[:k]


_KERR_CONVERGENCE_RTOL = 1e-10


def _kerr_dim_cap(params: OscillatorParams, max_dim: int) -> int:
    """Largest safe truncation for the lowest-levels diagnostic.

    Beyond the barrier, the static potential turns negative at
    q ~ -0.667/g3 (for the quartic family scaling); once the Fock basis
    reaches that region (extent ~ sqrt(2N)), variational states localize on
    the outer slope and the lowest eigenvalues no longer describe the
    oscillator well.  Keep sqrt(2N) safely inside.
    """
    if params.g3 == 0.0 or not params.has_double_well:
        return max_dim
    # first zero of the static potential beyond the barrier, times a margin
    q_neg = 0.6 * 0.667 * params.omega0 / abs(params.g3)
    return min(max_dim, max(8, int(q_neg**2 / 2.0)))


def kerr_nonlinearity(
    params: OscillatorParams,
    space: FockSpace | None = None,
    max_dim: int = 2048,
) -> float:
    """Exact Kerr nonlinearity from the three lowest levels of H0.

    K = (w10 - w21) / 2 with w_ij the transition frequencies between
    eigenvalues of H0.  With ``space`` given, the spectrum is required to be
    converged at that truncation (doubling N must move the lowest levels by
    less than 1e-10 relative); otherwise the dimension is grown
    automatically.  The truncation is capped so the basis cannot resolve the
    unphysical outer slope of the quartic (see :func:`_kerr_dim_cap`).
    """
    cap = _kerr_dim_cap(params, max_dim)
    if space is not None:
        dim2 = min(2 * space.N, cap)
        if dim2 <= space.N:
            raise ConvergenceError(
                f"N={space.N} already exceeds the safe truncation {cap} for the "
                "lowest-level diagnostic at these nonlinearities"
            )
        e1 = _lowest_levels(params, space.N)
        e2 = _lowest_levels(params, dim2)
        scale = max(abs(e2[-1]), params.omega0)
        if np.max(np.abs(e1 - e2)) > _KERR_CONVERGENCE_RTOL * scale:
            raise ConvergenceError(
                f"lowest levels of H0 not converged at N={space.N}; "
                f"try N={dim2} or larger"
            )
        levels = e2
    else:
        if cap < 12:
            raise ConvergenceError(
                "nonlinearities too strong for the quartic treatment: the "
                "oscillator well holds almost no basis states"
            )
        n = min(64, cap // 2 * 2)
        levels = _lowest_levels(params, n)
        while True:
            nxt_dim = min(2 * n, cap)
            if nxt_dim <= n:
                raise ConvergenceError(
                    f"lowest levels of H0 still drifting at the safe truncation "
                    f"cap N={cap}; the requested nonlinearities are outside the "
                    "quartic regime"
                )
            nxt = _lowest_levels(params, nxt_dim)
            scale = max(abs(nxt[-1]), params.omega0)
            if np.max(np.abs(levels - nxt)) <= _KERR_CONVERGENCE_RTOL * scale:
                levels = nxt
                break
            n = nxt_dim
            levels = nxt
    e0, e1, e2 = levels
    return 0.5 * (2.0 * e1 - e0 - e2)


def second_order_kerr(params: OscillatorParams) -> float:
    """Second-order effective Kerr amplitude -3 g4/2 + 10 g3^2 / (3 omega0)."""
    return -1.5 * params.g4 + 10.0 * params.g3**2 / (3.0 * params.omega0)


def squeezing_amplitude(params: OscillatorParams) -> float:
    """Second-order squeezing amplitude 2 g3 Omega_d / (3 omega0)."""
    return 2.0 * params.g3 * params.Omega_d / (3.0 * params.omega0)


def _critical_abscissas(omega0: float, g3: float, g4: float):
    """Off-center critical points d_-, d_+ of the static potential, or Nones."""
    if g4 == 0.0:
        return None, None
    disc = g3**2 - 2.0 * g4 * omega0
    if disc < 0.0:
        return None, None
    root = math.sqrt(disc)
    d_minus = math.sqrt(2.0) * (-g3 - root) / (4.0 * g4)
    d_plus = math.sqrt(2.0) * (-g3 + root) / (4.0 * g4)
    return d_minus, d_plus


def derived_scales(
    params: OscillatorParams,
    K: float | None = None,
) -> DerivedScales:
    """Populate every derived scale of a parameter set.

    Pass ``K`` to reuse a previously computed exact Kerr value; otherwise it
    is recomputed from the spectrum of H0.
    """
    if K is None:
        K = kerr_nonlinearity(params)
    if K == 0.0:
        raise ValueError(
            "K = 0: the well-depth parameter Gamma = g3 Pi / K is undefined; "
            "check the nonlinearity settings (g3, g4)"
        )
    if params.omega_d == params.omega0:
        raise ValueError("omega_d must differ from omega0 (response pole)")
    w0, wd = params.omega0, params.omega_d
    pi_resp = params.Omega_d * wd / (wd**2 - w0**2)
    gamma = params.g3 * pi_resp / K
    d_minus, d_plus = _critical_abscissas(w0, params.g3, params.g4)
    if d_plus is not None and gamma >= 0.0:
        valid = abs(math.sqrt(2.0) * pi_resp) + math.sqrt(2.0 * gamma) < abs(d_plus)
    else:
        valid = False
    return DerivedScales(
        K=K,
        K2=second_order_kerr(params),
        eps2=squeezing_amplitude(params),
        Pi=pi_resp,
        Gamma=gamma,
        n_in=2.0 * gamma / math.pi,
        d_minus=d_minus,
        d_plus=d_plus,
        T_d=2.0 * math.pi / wd,
        inner_well_valid=valid,
    )


def _quartic_coefficient_ratio(C: float) -> float:
    """g4 = ratio * g3^2 / omega0 for the family with K2 = C g4."""
    if C == -1.5:
        raise ValueError("C = -3/2 makes the quartic coefficient degenerate")
    return 20.0 / (3.0 * (2.0 * C + 3.0))


def params_from_targets(
    K_over_w0: float,
    Gamma: float,
    C: float = 10.0,
    omega_d_over_w0: float = DEFAULT_DRIVE_RATIO,
    rel_tol: float = 1e-6,
    hbar_eff: float = 1.0,
) -> OscillatorParams:
    """Solve for oscillator parameters hitting an exact Kerr target and Gamma.

    g3 is found by a bracketed scalar root-find so that the exact Kerr
    nonlinearity of H0 equals ``K_over_w0`` (omega0 = 1) within ``rel_tol``
    relative, with g4 tied to g3 through the family constant ``C`` (the
    second-order Kerr equals C g4).  The drive amplitude then follows from
    Gamma = g3 Pi / K.
    """
    if K_over_w0 == 0.0:
        raise RootBracketError("target K = 0 is degenerate (no nonlinearity)")
    ratio = _quartic_coefficient_ratio(C)
    if ratio < 0.0:
        raise ValueError(
            f"C = {C} requires a negative quartic coefficient g4; "
            "this family is not supported"
        )
    if K_over_w0 * C <= 0.0:
        raise RootBracketError(
            f"target K/omega0 = {K_over_w0} has the wrong sign for C = {C}"
        )

    sign = 1.0 if C > 0 else -1.0

    def exact_k(g3: float) -> float:
        p = OscillatorParams(
            g3=g3, g4=ratio * g3**2, omega_d=omega_d_over_w0, Omega_d=0.0
        )
        return kerr_nonlinearity(p)

    target = K_over_w0

    # quadratic leading behavior gives a sharp initial guess
    g3_guess = math.sqrt(abs(target) / abs(C * ratio))
    lo, hi = g3_guess / 1.25, 1.25 * g3_guess
    f = lambda g3: sign * (exact_k(g3) - target)
    try:
        f_lo, f_hi = f(lo), f(hi)
        for _ in range(4):
            if f_lo < 0.0 <= f_hi:
                break
            if f_lo >= 0.0:
                lo /= 1.6
                f_lo = f(lo)
            if f_hi < 0.0:
                hi *= 1.6
                f_hi = f(hi)
        else:
            raise RootBracketError(
                f"could not bracket g3 for K/omega0 = {K_over_w0} with C = {C}; "
                "the target is outside the supported quartic family"
            )
    except ConvergenceError as exc:
        raise RootBracketError(
            f"K/omega0 = {K_over_w0} is unreachable within the quartic regime "
            f"for C = {C}: {exc}"
        ) from exc
    g3 = brentq(f, lo, hi, xtol=1e-12, rtol=8.9e-16)
    k_got = exact_k(g3)
    if abs(k_got - target) > rel_tol * abs(target):
        raise ConvergenceError(
            f"root-find left a residual Kerr mismatch of "
            f"{abs(k_got - target) / abs(target):.2e} relative"
        )

    wd = omega_d_over_w0
    pi_resp = Gamma * k_got / g3
    omega_drive = pi_resp * (wd**2 - 1.0) / wd
    return OscillatorParams(
        g3=g3,
        g4=ratio * g3**2,
        omega_d=wd,
        Omega_d=omega_drive,
        omega0=1.0,
        hbar_eff=hbar_eff,
    )


# ---------------------------------------------------------------------------
# SNAIL circuit pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SnailParams:
    """Circuit parameters of an array of M flux-threaded junction loops.

    ``alpha`` is the small-junction energy ratio, ``m`` the large-junction
    count per loop, ``phi_ext`` the reduced external flux in radians, ``E_C``
    and ``E_J`` the charging and Josephson energies (frequency units), and
    ``xi_J`` the junction-to-linear-inductance ratio.
    """

    alpha: float
    m: int
    phi_ext: float
    M: int = 1
    E_C: float = 1.0
    E_J: float = 1.0
    xi_J: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if self.M < 1 or int(self.M) != self.M:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.E_C <= 0 or self.E_J <= 0:
            raise ValueError("E_C and E_J must be positive")
        if self.xi_J <= 0:
            raise ValueError(f"xi_J must be positive, got {self.xi_J}")


@dataclass(frozen=True)
class SnailExpansion:
    """Taylor data of the loop potential around its minimum plus the mapping."""

    phi_min: float
    c: tuple[float, float, float, float, float]
    cbar: tuple[float, float, float]
    p: float
    hbar_eff: float
    E_L: float
    params: OscillatorParams


def snail_potential(phi_s: float, sp: SnailParams) -> float:
    """Single-loop inductive potential in units of E_J."""
    return -sp.alpha * np.cos(phi_s) - sp.m * np.cos((sp.phi_ext - phi_s) / sp.m)


def _snail_c(phi: float, sp: SnailParams) -> tuple[float, ...]:
    a, m, pe = sp.alpha, sp.m, sp.phi_ext
    cos_r = math.cos((pe - phi) / m)
    sin_r = math.sin((pe - phi) / m)
    c0 = -a * math.cos(phi) - m * cos_r
    c1 = a * math.sin(phi) - sin_r
    c2 = a * math.cos(phi) + cos_r / m
    c3 = -a * math.sin(phi) + sin_r / m**2
    c4 = -a * math.cos(phi) - cos_r / m**3
    return c0, c1, c2, c3, c4


def snail_coefficients(
    sp: SnailParams,
    Omega_d_tilde: float = 0.0,
    omega_d: float | None = None,
) -> SnailExpansion:
    """Expand the loop potential at its minimum and map to oscillator params.

    Finds phi_min with c1(phi_min) = 0 on (-pi, pi], combines the loop
    coefficients into array coefficients via p = M xi_J / (c2 + M xi_J),
    and returns hbar_eff together with the mapped quantum parameters:
    omega0 = 2 hbar_eff^2 cbar2 E_J, g3 = hbar_eff^3 cbar3 E_J / 2,
    g4 = hbar_eff^4 cbar4 E_J / 6, Omega_d = Omega_d_tilde / (sqrt(2) hbar_eff).
    """
    grid = np.linspace(-math.pi, math.pi, 2049)
    c1_vals = np.array([_snail_c(phi, sp)[1] for phi in grid])
    roots = []
    for i in range(len(grid) - 1):
        lo, hi = c1_vals[i], c1_vals[i + 1]
        if lo == 0.0:
            roots.append(grid[i])
        elif lo * hi < 0.0:
            roots.append(brentq(lambda x: _snail_c(x, sp)[1], grid[i], grid[i + 1], xtol=1e-14))
    if c1_vals[-1] == 0.0:
        roots.append(grid[-1])
    # keep roots in the half-open principal branch
    roots = [r for r in roots if -math.pi < r <= math.pi]
    if not roots:
        raise FluxConfigurationError(
            "no stationary point of the loop potential on (-pi, pi]"
        )
    minima = [r for r in roots if _snail_c(r, sp)[2] > 0.0]
    if not minima:
        raise StabilityError(
            "every stationary point on the principal branch has c2 <= 0"
        )
    phi_min = min(minima, key=lambda r: snail_potential(r, sp))
    c = _snail_c(phi_min, sp)
    c2, c3, c4 = c[2], c[3], c[4]

    m_arr = sp.M
    p = m_arr * sp.xi_J / (c2 + m_arr * sp.xi_J)
    cbar2 = (p / m_arr) * c2
    cbar3 = (p**3 / m_arr**2) * c3
    cbar4 = (p**4 / m_arr**3) * (c4 - 3.0 * c3**2 / c2 * (1.0 - p))
    if cbar2 <= 0.0:
        raise StabilityError(f"array curvature cbar2 = {cbar2:.3g} is not positive")

    hbar_eff = (2.0 * sp.E_C / (cbar2 * sp.E_J)) ** 0.25
    omega0 = 2.0 * hbar_eff**2 * cbar2 * sp.E_J
    g3 = hbar_eff**3 * cbar3 * sp.E_J / 2.0
    g4 = hbar_eff**4 * cbar4 * sp.E_J / 6.0
    if omega_d is None:
        omega_d = DEFAULT_DRIVE_RATIO * omega0
    params = OscillatorParams(
        g3=g3,
        g4=g4,
        omega_d=omega_d,
        Omega_d=Omega_d_tilde / (math.sqrt(2.0) * hbar_eff),
        omega0=omega0,
        hbar_eff=hbar_eff,
    )
    return SnailExpansion(
        phi_min=phi_min,
        c=c,
        cbar=(cbar2, cbar3, cbar4),
        p=p,
        hbar_eff=hbar_eff,
        E_L=sp.xi_J * sp.E_J,
        params=params,
    )


def classical_from_quantum(
    params: OscillatorParams, hbar_eff: float | None = None
) -> ClassicalParams:
    """Rescale quantum parameters to their classical counterparts.

    omega0 -> omega0/hbar_eff, g3 -> g3/hbar_eff^(3/2), g4 -> g4/hbar_eff^2,
    Omega_d -> Omega_d/sqrt(hbar_eff); the drive frequency is unchanged.
    """
    h = params.hbar_eff if hbar_eff is None else hbar_eff
    if h <= 0:
        raise ValueError(f"hbar_eff must be positive, got {h}")
    return ClassicalParams(
        omega0=params.omega0 / h,
        g3=params.g3 / h**1.5,
        g4=params.g4 / h**2,
        omega_d=params.omega_d,
        Omega_d=params.Omega_d / math.sqrt(h),
    )


def quantum_from_classical(cp: ClassicalParams, hbar_eff: float = 1.0) -> OscillatorParams:
    """Inverse of :func:`classical_from_quantum`."""
    if hbar_eff <= 0:
        raise ValueError(f"hbar_eff must be positive, got {hbar_eff}")
    return OscillatorParams(
        omega0=cp.omega0 * hbar_eff,
        g3=cp.g3 * hbar_eff**1.5,
        g4=cp.g4 * hbar_eff**2,
        omega_d=cp.omega_d,
        Omega_d=cp.Omega_d * math.sqrt(hbar_eff),
        hbar_eff=hbar_eff,
    )
