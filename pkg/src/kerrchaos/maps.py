"""Parameter sweeps: the chaos map over (K/omega0, Gamma) and the
cat-disintegration scan, with lossless persistence and provenance.

Every cell/point is a pure function of its coordinates plus the sweep
settings, so evaluation order cannot change results and per-cell failures
are recorded in flags instead of aborting the sweep.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _code_version
from .classical import INNER_ONSET_PRODUCT, MERGE_PRODUCT
from .errors import ContractError, SchemaError
from .floquet import floquet_solve, spacing_ratio
from .model import default_fock_dimension, derived_scales, params_from_targets
from .qphase import adaptive_phase_grid, find_cat_pair, husimi, wehrl_entropy

__all__ = [
    "GridSpec",
    "ChaosMapGrid",
    "DisintegrationScan",
    "ScanPoint",
    "map_cell_dimension",
    "chaos_map",
    "disintegration_scan",
    "save_map",
    "load_map",
    "save_scan",
    "load_scan",
]

SCHEMA_VERSION = 1

# sweep-axis bounds matching the experimentally accessible window
K_AXIS_DEFAULT = (33e-6, 33e-4)
GAMMA_AXIS_DEFAULT = (5.0, 100.0)


@dataclass(frozen=True)
class GridSpec:
    """Axes of a chaos map: K/omega0 (geometric) by Gamma (linear)."""

    k_values: tuple[float, ...]
    gamma_values: tuple[float, ...]

    @classmethod
    def from_bounds(
        cls,
        k_min: float = K_AXIS_DEFAULT[0],
        k_max: float = K_AXIS_DEFAULT[1],
        n_k: int = 24,
        gamma_min: float = GAMMA_AXIS_DEFAULT[0],
        gamma_max: float = GAMMA_AXIS_DEFAULT[1],
        n_gamma: int = 24,
        k_scale: str = "log",
    ) -> "GridSpec":
        if k_scale == "log":
            ks = np.geomspace(k_min, k_max, n_k)
        elif k_scale == "linear":
            ks = np.linspace(k_min, k_max, n_k)
        else:
            raise ValueError(f"k_scale must be 'log' or 'linear', got {k_scale!r}")
        gs = np.linspace(gamma_min, gamma_max, n_gamma)
        return cls(tuple(float(k) for k in ks), tuple(float(g) for g in gs))

    def validate_bounds(self, allow_outside: bool = False) -> None:
        k_lo, k_hi = K_AXIS_DEFAULT
        g_lo, g_hi = GAMMA_AXIS_DEFAULT
        bad_k = [k for k in self.k_values if not (k_lo <= k <= k_hi)]
        bad_g = [g for g in self.gamma_values if not (g_lo <= g <= g_hi)]
        if (bad_k or bad_g) and not allow_outside:
            raise ValueError(
                f"grid leaves the supported window: K outside {K_AXIS_DEFAULT}: "
                f"{bad_k[:3]}...; Gamma outside {GAMMA_AXIS_DEFAULT}: {bad_g[:3]}"
                if bad_k and bad_g
                else f"grid leaves the supported window (K {bad_k[:3]} / Gamma {bad_g[:3]})"
            )


@dataclass
class ChaosMapGrid:
    """Renormalized spacing-ratio field over (K/omega0, Gamma)."""

    k_values: np.ndarray
    gamma_values: np.ndarray
    r_bar: np.ndarray  # shape (n_gamma, n_k)
    r_tilde: np.ndarray
    retained: np.ndarray  # int levels per cell
    valid: np.ndarray  # bool per cell
    messages: dict  # (i_gamma, i_k) -> failure text
    C: float
    omega_d_over_w0: float
    provenance: dict = field(default_factory=dict)

    @property
    def threshold_products(self) -> tuple[float, float]:
        """Gamma*K/omega0 constants of the overlay hyperbolas."""
        return (INNER_ONSET_PRODUCT, MERGE_PRODUCT)


@dataclass(frozen=True)
class ScanPoint:
    k_over_w0: float
    n_min: float
    s_min: float
    quality: float
    splitting: float
    regime: str
    post_disintegration: bool


@dataclass
class DisintegrationScan:
    """Cat-state size and entropy along a Kerr-amplitude ray at fixed Gamma."""

    gamma: float
    points: list[ScanPoint]
    C: float
    omega_d_over_w0: float
    provenance: dict = field(default_factory=dict)

    @property
    def regime_flips(self) -> int:
        labels = [p.regime for p in self.points]
        return sum(1 for a, b in zip(labels, labels[1:]) if a != b)


def map_cell_dimension(
    gamma: float,
    k_over_w0: float,
    omega_d_over_w0: float = 1.999866,
    wraps: float = 4.0,
    margin: float = 1.5,
) -> int:
    """Fock dimension for one chaos-map cell.

    Two requirements: hold the double-well states (scales with Gamma), and
    hold enough levels that the folded quasienergy comb wraps the principal
    window several times, so the spacing statistic probes level correlations
    rather than the rigid low-lying comb.  The Kerr-induced spread across n
    retained levels is ~K n^2, giving the sqrt term.
    """
    n_struct = default_fock_dimension(gamma)
    n_scramble = int(math.ceil(margin * math.sqrt(wraps * omega_d_over_w0 / abs(k_over_w0))))
    return max(n_struct, n_scramble)


def _config_digest(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()[:12]


def _provenance(kind: str, settings: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "code_version": _code_version,
        "settings": settings,
        "config_hash": _config_digest(settings),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def _cell_seed(base: int, i: int, j: int) -> int:
    digest = hashlib.sha256(f"{base}:{i}:{j}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _chaos_cell(args):
    """One map cell; returns (i, j, r_tilde, r_bar, retained, valid, message).

    State selection is adaptive: converged states when enough of them
    survive the truncation filter; otherwise the statistic falls back to
    the bulk window <n> <= 0.6 N of the full spectrum (deep in the chaotic
    regime the physical states outgrow any desk-scale truncation, but the
    bulk of the truncated spectrum away from the truncation-edge pileup
    still carries the level-repulsion signal).  Fallback cells are tagged
    in the messages, not invalidated.
    """
    (i, j, gamma, k, C, wd, steps, stats_floor, max_dim, selection) = args
    try:
        params = params_from_targets(k, gamma, C=C, omega_d_over_w0=wd)
        n = min(map_cell_dimension(gamma, k, wd), max_dim)
        t_d = 2.0 * math.pi / params.omega_d
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            while True:
                sol = floquet_solve(params, n=n, steps=steps, t0=t_d / 4.0)
                retained = int(sol.converged.sum())
                if retained >= stats_floor or 2 * n > max_dim:
                    break
                n *= 2
            use_window = selection == "full" or (
                selection == "auto" and retained < stats_floor
            )
            if use_window:
                keep = sol.mean_n <= 0.6 * n
                stats = spacing_ratio(
                    sol.quasienergies[keep], 2.0 * math.pi / sol.T_d, min_levels=3
                )
                return (i, j, stats.r_tilde, stats.r_bar, retained, True,
                        f"bulk-window statistics over {int(keep.sum())} of "
                        f"N={n} states ({retained} converged)")
            if retained < 3:
                return (i, j, math.nan, math.nan, retained, False,
                        f"only {retained} converged levels at N={n}")
            stats = sol.spacing_stats(min_levels=3)
        valid = retained >= stats_floor
        msg = "" if valid else f"below statistics floor at N={n}"
        return (i, j, stats.r_tilde, stats.r_bar, retained, valid, msg)
    except Exception as exc:  # per-cell failures must not kill the sweep
        return (i, j, math.nan, math.nan, 0, False, f"{type(exc).__name__}: {exc}")


def chaos_map(
    grid: GridSpec,
    C: float = 10.0,
    omega_d_over_w0: float = 1.999866,
    floquet_steps: int = 4096,
    stats_floor: int = 50,
    max_dim: int = 1600,
    workers: int = 1,
    seed: int = 0,
    allow_outside: bool = False,
    selection: str = "auto",
    progress=None,
) -> ChaosMapGrid:
    """Evaluate the spacing-ratio chaos map cell by cell.

    Cells are independent; failures are recorded per cell.  ``seed`` is kept
    in the provenance (cell evaluation is deterministic, the seed feeds any
    stochastic sub-probes derived per cell).
    """
    if selection not in ("auto", "converged", "full"):
        raise ValueError(f"selection must be auto/converged/full, got {selection!r}")
    grid.validate_bounds(allow_outside)
    n_g, n_k = len(grid.gamma_values), len(grid.k_values)
    jobs = [
        (i, j, grid.gamma_values[i], grid.k_values[j], C, omega_d_over_w0,
         floquet_steps, stats_floor, max_dim, selection)
        for i in range(n_g)
        for j in range(n_k)
    ]
    r_bar = np.full((n_g, n_k), np.nan)
    r_tilde = np.full((n_g, n_k), np.nan)
    retained = np.zeros((n_g, n_k), dtype=int)
    valid = np.zeros((n_g, n_k), dtype=bool)
    messages: dict = {}

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chaos_cell, jobs))
    else:
        results = []
        for idx, job in enumerate(jobs):
            results.append(_chaos_cell(job))
            if progress is not None:
                progress(idx + 1, len(jobs))

    for (i, j, rt, rb, ret, ok, msg) in results:
        r_tilde[i, j] = rt
        r_bar[i, j] = rb
        retained[i, j] = ret
        valid[i, j] = ok
        if msg:
            messages[(i, j)] = msg

    settings = {
        "C": C,
        "omega_d_over_w0": omega_d_over_w0,
        "floquet_steps": floquet_steps,
        "stats_floor": stats_floor,
        "max_dim": max_dim,
        "selection": selection,
        "seed": seed,
        "k_values": list(grid.k_values),
        "gamma_values": list(grid.gamma_values),
    }
    return ChaosMapGrid(
        k_values=np.asarray(grid.k_values),
        gamma_values=np.asarray(grid.gamma_values),
        r_bar=r_bar,
        r_tilde=r_tilde,
        retained=retained,
        valid=valid,
        messages=messages,
        C=C,
        omega_d_over_w0=omega_d_over_w0,
        provenance=_provenance("chaos_map", settings),
    )


def disintegration_scan(
    gamma: float,
    k_list,
    C: float = 10.0,
    omega_d_over_w0: float = 1.999866,
    floquet_steps: int = 4096,
    n_override: int | None = None,
    entropy_points_per_unit: float = 3.0,
    quality_floor: float = 0.3,
    emit_fields: bool = False,
) -> DisintegrationScan:
    """n_min and Husimi entropy of the cat pair along a Kerr-amplitude list.

    The regime label compares Gamma*K/omega0 against the merge constant; the
    post-disintegration flag marks points whose cat quality fell below
    ``quality_floor`` (their n_min is still reported).  With ``emit_fields``
    the Husimi field of the better cat state is attached to each point as
    ``point_fields`` on the returned scan.
    """
    points = []
    fields = []
    for k in k_list:
        params = params_from_targets(k, gamma, C=C, omega_d_over_w0=omega_d_over_w0)
        scales = derived_scales(params)
        n = n_override or default_fock_dimension(gamma)
        t_d = scales.T_d
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = floquet_solve(params, n=n, steps=floquet_steps, t0=t_d / 4.0)
            pair = find_cat_pair(sol, scales)
            state = sol.states[:, pair.indices[0]]
            # post-disintegration states spread; grow the quadrature box
            # until the boundary carries no weight
            box = 2.0
            while True:
                grid = adaptive_phase_grid(
                    scales,
                    points_per_unit=entropy_points_per_unit,
                    box_factor=box,
                    pad_widths=6.0,
                )
                fld = husimi(state, grid)
                try:
                    s_min = wehrl_entropy(fld)
                    break
                except ContractError:
                    box *= 1.5
                    if box > 12.0:
                        raise
        product = gamma * k
        points.append(
            ScanPoint(
                k_over_w0=float(k),
                n_min=float(np.mean(pair.n_min)),
                s_min=float(s_min),
                quality=float(pair.quality),
                splitting=float(pair.splitting),
                regime="chaotic" if product > MERGE_PRODUCT else "regular",
                post_disintegration=bool(pair.quality < quality_floor),
            )
        )
        fields.append(fld if emit_fields else None)
    settings = {
        "gamma": gamma,
        "C": C,
        "omega_d_over_w0": omega_d_over_w0,
        "floquet_steps": floquet_steps,
        "n_override": n_override,
        "k_list": [float(k) for k in k_list],
        "entropy_points_per_unit": entropy_points_per_unit,
        "quality_floor": quality_floor,
    }
    scan = DisintegrationScan(
        gamma=gamma,
        points=points,
        C=C,
        omega_d_over_w0=omega_d_over_w0,
        provenance=_provenance("disintegration_scan", settings),
    )
    scan.point_fields = fields
    return scan


# ---------------------------------------------------------------------------
# Persistence: self-describing CSV + JSON provenance sidecar
# ---------------------------------------------------------------------------

_MAP_HEADER = "i_gamma,i_k,gamma,k_over_w0,r_tilde,r_bar,retained,valid"
_SCAN_HEADER = (
    "k_over_w0,n_min,s_min,quality,splitting,regime,post_disintegration"
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _sidecar(path) -> str:
    return str(path) + ".provenance.json"


def _write_provenance(path, provenance: dict, extra: dict) -> None:
    doc = dict(provenance)
    doc.update(extra)
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_provenance(path) -> dict:
    try:
        with open(_sidecar(path), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError(f"{path}: missing provenance sidecar") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: corrupted provenance sidecar: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema version {version!r} needs migration "
            f"(this code reads {SCHEMA_VERSION})"
        )
    return doc


def save_map(chaos: ChaosMapGrid, path) -> None:
    """Lossless CSV + provenance sidecar for a chaos map."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kerrchaos chaos-map v{SCHEMA_VERSION}\n")
        fh.write(_MAP_HEADER + "\n")
        for i, g in enumerate(chaos.gamma_values):
            for j, k in enumerate(chaos.k_values):
                fh.write(
                    f"{i},{j},{_fmt(g)},{_fmt(k)},{_fmt(chaos.r_tilde[i, j])},"
                    f"{_fmt(chaos.r_bar[i, j])},{chaos.retained[i, j]},"
                    f"{int(chaos.valid[i, j])}\n"
                )
    _write_provenance(
        path,
        chaos.provenance,
        {
            "C": chaos.C,
            "omega_d_over_w0": chaos.omega_d_over_w0,
            "threshold_products": list(chaos.threshold_products),
            "messages": {f"{i},{j}": m for (i, j), m in chaos.messages.items()},
        },
    )


def load_map(path) -> ChaosMapGrid:
    """Inverse of :func:`save_map`; rejects unknown or corrupted layouts."""
    doc = _read_provenance(path)
    if doc.get("kind") != "chaos_map":
        raise SchemaError(f"{path}: sidecar kind {doc.get('kind')!r} is not a chaos map")
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if not magic.startswith(f"# kerrchaos chaos-map v{SCHEMA_VERSION}"):
            raise SchemaError(f"{path}: unrecognized map header {magic!r}")
        header = fh.readline().strip()
        if header != _MAP_HEADER:
            raise SchemaError(f"{path}: unexpected column layout {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    k_values = sorted({float(r[3]) for r in rows})
    gamma_values = sorted({float(r[2]) for r in rows})
    settings = doc["settings"]
    if list(map(float, settings["k_values"])) != k_values or list(
        map(float, settings["gamma_values"])
    ) != gamma_values:
        # order by the sidecar's axis records, not the sorted distinct values
        k_values = [float(x) for x in settings["k_values"]]
        gamma_values = [float(x) for x in settings["gamma_values"]]
    n_g, n_k = len(gamma_values), len(k_values)
    r_tilde = np.full((n_g, n_k), np.nan)
    r_bar = np.full((n_g, n_k), np.nan)
    retained = np.zeros((n_g, n_k), dtype=int)
    valid = np.zeros((n_g, n_k), dtype=bool)
    for r in rows:
        if len(r) != 8:
            raise SchemaError(f"{path}: malformed row {r!r}")
        i, j = int(r[0]), int(r[1])
        if not (0 <= i < n_g and 0 <= j < n_k):
            raise SchemaError(f"{path}: cell index ({i},{j}) outside the grid")
        r_tilde[i, j] = float(r[4])
        r_bar[i, j] = float(r[5])
        retained[i, j] = int(r[6])
        valid[i, j] = bool(int(r[7]))
    messages = {
        tuple(int(x) for x in key.split(",")): val
        for key, val in doc.get("messages", {}).items()
    }
    return ChaosMapGrid(
        k_values=np.asarray(k_values),
        gamma_values=np.asarray(gamma_values),
        r_bar=r_bar,
        r_tilde=r_tilde,
        retained=retained,
        valid=valid,
        messages=messages,
        C=float(doc["C"]),
        omega_d_over_w0=float(doc["omega_d_over_w0"]),
        provenance={k: doc[k] for k in
                    ("schema_version", "kind", "code_version", "settings",
                     "config_hash", "created_utc")},
    )


def save_scan(scan: DisintegrationScan, path) -> None:
    """Lossless CSV + provenance sidecar for a disintegration scan."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kerrchaos disintegration-scan v{SCHEMA_VERSION}\n")
        fh.write(_SCAN_HEADER + "\n")
        for pt in scan.points:
            fh.write(
                f"{_fmt(pt.k_over_w0)},{_fmt(pt.n_min)},{_fmt(pt.s_min)},"
                f"{_fmt(pt.quality)},{_fmt(pt.splitting)},{pt.regime},"
                f"{int(pt.post_disintegration)}\n"
            )
    _write_provenance(
        path,
        scan.provenance,
        {"gamma": scan.gamma, "C": scan.C,
         "omega_d_over_w0": scan.omega_d_over_w0,
         "threshold_products": [INNER_ONSET_PRODUCT, MERGE_PRODUCT]},
    )


def load_scan(path) -> DisintegrationScan:
    doc = _read_provenance(path)
    if doc.get("kind") != "disintegration_scan":
        raise SchemaError(
            f"{path}: sidecar kind {doc.get('kind')!r} is not a disintegration scan"
        )
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if not magic.startswith(f"# kerrchaos disintegration-scan v{SCHEMA_VERSION}"):
            raise SchemaError(f"{path}: unrecognized scan header {magic!r}")
        header = fh.readline().strip()
        if header != _SCAN_HEADER:
            raise SchemaError(f"{path}: unexpected column layout {header!r}")
        points = []
        for line in fh:
            if not line.strip():
                continue
            r = line.strip().split(",")
            if len(r) != 7 or r[5] not in ("regular", "chaotic"):
                raise SchemaError(f"{path}: malformed row {r!r}")
            points.append(
                ScanPoint(
                    k_over_w0=float(r[0]),
                    n_min=float(r[1]),
                    s_min=float(r[2]),
                    quality=float(r[3]),
                    splitting=float(r[4]),
                    regime=r[5],
                    post_disintegration=bool(int(r[6])),
                )
            )
    return DisintegrationScan(
        gamma=float(doc["gamma"]),
        points=points,
        C=float(doc["C"]),
        omega_d_over_w0=float(doc["omega_d_over_w0"]),
        provenance={k: doc[k] for k in
                    ("schema_version", "kind", "code_version", "settings",
                     "config_hash", "created_utc")},
    )
