#!/usr/bin/env python3
"""Render publication-style figures from emitted data files.

Usage: render.py <recipe.json> [more recipes...]

Recipes point at files produced by the ``kerrchaos`` CLI (self-describing
CSV with JSON provenance sidecars, plus the compact binary grid format
documented in the main README).  This renderer only reads those artifacts;
it never recomputes physics.  Rendering is deterministic for fixed inputs
and never mutates them.
"""

from __future__ import annotations

import json
import math
import struct
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SUPPORTED_SCHEMA = 1

# Gamma*K/omega0 products of the overlay hyperbolas (falls back to these
# when the provenance sidecar does not carry them)
DEFAULT_THRESHOLDS = (0.0187, 0.03347)

_GRID_HEADER = struct.Struct("<4sHHII4d")


class RecipeError(RuntimeError):
    pass


def read_binary_grid(path):
    """Reader for the documented little-endian binary grid format."""
    raw = Path(path).read_bytes()
    if len(raw) < _GRID_HEADER.size:
        raise RecipeError(f"{path}: shorter than a grid header")
    magic, version, _, n_q, n_p, q0, q1, p0, p1 = _GRID_HEADER.unpack_from(raw)
    if magic != b"KCGB" or version != SUPPORTED_SCHEMA:
        raise RecipeError(f"{path}: unsupported grid format {magic!r} v{version}")
    expected = _GRID_HEADER.size + 8 * n_q * n_p
    if len(raw) != expected:
        raise RecipeError(f"{path}: truncated grid payload")
    values = np.frombuffer(raw, dtype="<f8", offset=_GRID_HEADER.size)
    return (
        np.linspace(q0, q1, n_q),
        np.linspace(p0, p1, n_p),
        values.reshape(n_p, n_q),
    )


def load_csv(path, required=()):
    """CSV reader that skips '#' comment lines and checks required columns."""
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise RecipeError(f"{path}: no header row")
    for col in required:
        if col not in header:
            raise RecipeError(f"{path}: missing column {col!r}")
    idx = {name: i for i, name in enumerate(header)}
    return header, idx, rows


def check_provenance(data_path):
    sidecar = Path(str(data_path) + ".provenance.json")
    if not sidecar.exists():
        raise RecipeError(f"{data_path}: missing provenance sidecar")
    doc = json.loads(sidecar.read_text())
    version = doc.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise RecipeError(
            f"{data_path}: provenance schema {version!r} is unknown to this "
            f"renderer (supports {SUPPORTED_SCHEMA})"
        )
    return doc


def _overlay_hyperbolas(ax, k_range, thresholds, gamma_limits):
    ks = np.geomspace(k_range[0], k_range[1], 200)
    inner, merge = thresholds
    for value, style, label in (
        (inner, "-", "inner-chaos onset"),
        (merge, "--", "inner/outer merge"),
    ):
        gs = value / ks
        keep = (gs >= gamma_limits[0]) & (gs <= gamma_limits[1])
        ax.plot(ks[keep], gs[keep], style, color="black", lw=1.4, label=label)


def render_chaos_map(recipe, base):
    path = base / recipe["inputs"]["map"]
    doc = check_provenance(path)
    _, idx, rows = load_csv(
        path, required=("gamma", "k_over_w0", "r_bar", "valid")
    )
    ks = sorted({float(r[idx["k_over_w0"]]) for r in rows})
    gs = sorted({float(r[idx["gamma"]]) for r in rows})
    field = np.full((len(gs), len(ks)), np.nan)
    for r in rows:
        i = gs.index(float(r[idx["gamma"]]))
        j = ks.index(float(r[idx["k_over_w0"]]))
        if int(r[idx["valid"]]):
            field[i, j] = float(r[idx["r_bar"]])
    lo, hi = recipe.get("color_scale", (0.0, 1.0))
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    mesh = ax.pcolormesh(
        ks, gs, np.clip(field, lo, hi), shading="nearest",
        cmap="RdYlBu_r", vmin=lo, vmax=hi,
    )
    ax.set_xscale("log")
    ax.set_xlabel(r"$K/\omega_0$")
    ax.set_ylabel(r"$\Gamma$")
    fig.colorbar(mesh, ax=ax, label=r"$\bar{r}$")
    if recipe.get("overlay_thresholds", True):
        thresholds = tuple(doc.get("threshold_products", DEFAULT_THRESHOLDS))
        _overlay_hyperbolas(ax, (min(ks), max(ks)), thresholds, (min(gs), max(gs)))
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title(recipe.get("title", "Spacing-ratio chaos map"))
    return fig


def render_phase_portrait(recipe, base):
    inputs = recipe["inputs"]
    prefix = base / inputs["prefix"]
    check_provenance(Path(str(prefix)))  # provenance sits at <prefix>.provenance.json

    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    if "participation" in inputs or (Path(str(prefix) + "-participation.kcgb")).exists():
        q, p, vals = read_binary_grid(str(prefix) + "-participation.kcgb")
        vals = np.where(vals < 0, np.nan, vals)
        mesh = ax.pcolormesh(q, p, vals, shading="nearest", cmap="Blues_r")
        fig.colorbar(mesh, ax=ax, label="participation ratio")
    _, idx, rows = load_csv(str(prefix) + "-poincare.csv", required=("orbit", "q", "p"))
    pts = np.array([[float(r[idx["q"]]), float(r[idx["p"]])] for r in rows])
    ax.plot(pts[:, 0], pts[:, 1], ".", color="black", ms=0.8, alpha=0.7,
            label="stroboscopic sections")
    _, lidx, lrows = load_csv(str(prefix) + "-lemniscate.csv", required=("q", "p"))
    curve = np.array([[float(r[lidx["q"]]), float(r[lidx["p"]])] for r in lrows])
    ax.plot(curve[:, 0], curve[:, 1], "-", color="crimson", lw=1.6,
            label="figure-eight separatrix")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(recipe.get("title", "Phase portrait"))
    return fig


def render_phase_lambda(recipe, base, fig=None):
    """Companion Lyapunov field panel of a phase portrait."""
    prefix = base / recipe["inputs"]["prefix"]
    q, p, lam = read_binary_grid(str(prefix) + "-lambda.kcgb")
    lam = np.where(lam < 0, np.nan, lam)
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    mesh = ax.pcolormesh(q, p, lam, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=r"largest Lyapunov exponent [$\omega_0$]")
    ax.set_xlabel("$q_0$")
    ax.set_ylabel("$p_0$")
    ax.set_title(recipe.get("title", "Lyapunov field"))
    return fig


def render_disintegration(recipe, base):
    path = base / recipe["inputs"]["scan"]
    doc = check_provenance(path)
    _, idx, rows = load_csv(
        path, required=("k_over_w0", "n_min", "s_min", "regime")
    )
    ks = np.array([float(r[idx["k_over_w0"]]) for r in rows])
    n_min = np.array([float(r[idx["n_min"]]) for r in rows])
    s_min = np.array([float(r[idx["s_min"]]) for r in rows])
    gamma = float(doc["gamma"])
    merge = doc.get("threshold_products", DEFAULT_THRESHOLDS)[1]
    k_border = merge / gamma

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.4))
    for ax, values, label in (
        (axes[0], n_min, r"$n_{\min}$"),
        (axes[1], s_min, r"$S_{\min}$"),
    ):
        lo, hi = min(ks), max(ks)
        if lo < k_border:
            ax.axvspan(lo, min(k_border, hi), color="#c8d8f0", alpha=0.5)
        if hi > k_border:
            ax.axvspan(max(k_border, lo), hi, color="#f6c9a0", alpha=0.5)
        ax.plot(ks, values, "s-", color="black", ms=5)
        ax.set_ylabel(label)
        ax.axvline(k_border, color="black", ls="--", lw=1.2)
    axes[1].set_xlabel(r"$K/\omega_0$")
    axes[0].set_title(
        recipe.get("title", f"Cat-state disintegration, Gamma = {gamma:g}")
    )

    insets = recipe["inputs"].get("husimi", [])
    for spec in insets:
        q, p, vals = read_binary_grid(base / spec["grid"])
        pos = spec.get("position", [0.65, 0.65, 0.3, 0.3])
        sub = axes[0].inset_axes(pos)
        sub.pcolormesh(q, p, vals, shading="nearest", cmap="magma")
        sub.set_xticks([])
        sub.set_yticks([])
    return fig


RENDERERS = {
    "chaos-map": render_chaos_map,
    "phase-portrait": render_phase_portrait,
    "lyapunov-field": render_phase_lambda,
    "disintegration": render_disintegration,
}


def render(recipe_path):
    """Render one recipe; returns the written image path."""
    recipe_path = Path(recipe_path)
    recipe = json.loads(recipe_path.read_text())
    kind = recipe.get("figure")
    if kind not in RENDERERS:
        raise RecipeError(
            f"{recipe_path}: unknown figure kind {kind!r} "
            f"(supported: {sorted(RENDERERS)})"
        )
    base = recipe_path.parent
    fig = RENDERERS[kind](recipe, base)
    out = base / recipe.get("output", recipe_path.stem + ".png")
    fig.savefig(out, dpi=recipe.get("dpi", 150))
    plt.close(fig)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print(__doc__, file=sys.stderr)
        return 2
    try:
        for recipe in argv:
            print(render(recipe))
    except (RecipeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
