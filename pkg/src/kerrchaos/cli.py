"""Command-line surface: subcommands, config parsing, artifact emission.

Configs are INI files with one section per concern; flags override file
values.  Outputs land in --out (or $KERRCHAOS_OUT, default ./out) and every
data file is named ``<subcommand>-<confighash>.<ext>`` with a JSON
provenance sidecar.  Validation failures report every offending key at once
as machine-readable JSON on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import KerrChaosError
from .classical import (
    ProbeSpec,
    SECTION_PHASE,
    ThresholdFamily,
    lemniscate,
    lyapunov_field,
    poincare_section,
    stroboscopic_fixed_point,
    threshold_scan,
)
from .floquet import floquet_solve
from .gridio import format_float, write_binary_grid
from .maps import (
    GridSpec,
    chaos_map,
    disintegration_scan,
    save_map,
    save_scan,
)
from .model import (
    ClassicalParams,
    OscillatorParams,
    SnailParams,
    classical_from_quantum,
    default_fock_dimension,
    derived_scales,
    params_from_targets,
    snail_coefficients,
)
from .qphase import PhaseGrid, adaptive_phase_grid, coherent_from_phase_point, participation_ratio

_ENV_OUT = "KERRCHAOS_OUT"

_KNOWN_KEYS = {
    "model": {"omega0", "g3", "g4", "omega_d", "Omega_d", "hbar_eff"},
    "targets": {"K_over_w0", "Gamma", "C", "omega_d_over_w0"},
    "floquet": {"n", "steps", "order", "tail_fraction", "tail_weight_max"},
    "map": {
        "k_min", "k_max", "k_points", "k_scale",
        "gamma_min", "gamma_max", "gamma_points",
        "stats_floor", "max_dim", "allow_outside",
    },
    "scan": {"gamma", "k_list", "n", "quality_floor", "points_per_unit",
             "emit_husimi"},
    "portrait": {"n_orbits", "n_periods", "lambda_grid", "lambda_periods",
                 "participation_grid"},
    "thresholds": {"mode", "fixed", "ray_lo", "ray_hi", "n_ics", "n_periods",
                   "grid_n", "grid_periods", "bisection_steps", "tol"},
    "snail": {"alpha", "m", "phi_ext", "M", "E_C", "E_J", "xi_J",
              "Omega_d_tilde", "omega_d"},
    "output": {"dir"},
}

_INT_KEYS = {"k_points", "gamma_points", "stats_floor", "max_dim", "n", "steps",
             "order", "m", "M", "n_orbits", "n_periods", "lambda_grid",
             "lambda_periods", "participation_grid", "n_ics", "grid_n",
             "grid_periods", "bisection_steps"}
_BOOL_KEYS = {"allow_outside", "emit_husimi"}
_STR_KEYS = {"k_scale", "mode", "dir", "k_list"}


class ConfigError(KerrChaosError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    """Fully validated, flattened configuration of one invocation."""

    sections: dict
    out_dir: Path
    workers: int
    seed: int
    verbose: bool

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.sections, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def _parse_value(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"boolean key {key} got {raw!r}")
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def load_config(path: str | None, overrides: list[str]) -> dict:
    """Read an INI config plus ``section.key=value`` overrides.

    Unknown sections or keys are collected and reported together.
    """
    problems = []
    sections: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # [snail] distinguishes m from M
        read = parser.read(path)
        if not read:
            raise ConfigError([f"config file {path!r} not found"])
        for sec in parser.sections():
            if sec not in _KNOWN_KEYS:
                problems.append(f"unknown section [{sec}]")
                continue
            sections[sec] = {}
            for key, raw in parser.items(sec):
                canonical = _canonical_key(sec, key)
                if canonical is None:
                    problems.append(f"unknown key {sec}.{key}")
                    continue
                try:
                    sections[sec][canonical] = _parse_value(canonical, raw)
                except ValueError as exc:
                    problems.append(f"bad value for {sec}.{key}: {exc}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            problems.append(f"override {item!r} is not section.key=value")
            continue
        target, raw = item.split("=", 1)
        sec, key = target.split(".", 1)
        if sec not in _KNOWN_KEYS:
            problems.append(f"unknown section [{sec}]")
            continue
        canonical = _canonical_key(sec, key)
        if canonical is None:
            problems.append(f"unknown key {sec}.{key}")
            continue
        try:
            sections.setdefault(sec, {})[canonical] = _parse_value(canonical, raw)
        except ValueError as exc:
            problems.append(f"bad value for {sec}.{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return sections


def _canonical_key(section: str, key: str) -> str | None:
    if key in _KNOWN_KEYS[section]:
        return key
    candidates = [k for k in _KNOWN_KEYS[section] if k.lower() == key.lower()]
    return candidates[0] if len(candidates) == 1 else None


def _resolve_params(cfg: RunConfig) -> OscillatorParams:
    """Oscillator parameters from [model] or [targets]."""
    model = cfg.sections.get("model")
    targets = cfg.sections.get("targets")
    if model and targets:
        raise ConfigError(["give either [model] or [targets], not both"])
    if model:
        missing = {"g3", "g4", "omega_d"} - set(model)
        if missing:
            raise ConfigError([f"[model] missing key {k}" for k in sorted(missing)])
        return OscillatorParams(
            g3=model["g3"], g4=model["g4"], omega_d=model["omega_d"],
            Omega_d=model.get("Omega_d", 0.0), omega0=model.get("omega0", 1.0),
            hbar_eff=model.get("hbar_eff", 1.0),
        )
    if targets:
        missing = {"K_over_w0", "Gamma"} - set(targets)
        if missing:
            raise ConfigError([f"[targets] missing key {k}" for k in sorted(missing)])
        return params_from_targets(
            targets["K_over_w0"], targets["Gamma"],
            C=targets.get("C", 10.0),
            omega_d_over_w0=targets.get("omega_d_over_w0", 1.999866),
        )
    raise ConfigError(["need a [model] or [targets] section"])


def _emit_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _log(cfg: RunConfig, message: str) -> None:
    if cfg.verbose:
        print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_chaos_map(cfg: RunConfig) -> int:
    sec = cfg.sections.get("map", {})
    grid = GridSpec.from_bounds(
        k_min=sec.get("k_min", 33e-6), k_max=sec.get("k_max", 33e-4),
        n_k=sec.get("k_points", 24),
        gamma_min=sec.get("gamma_min", 5.0), gamma_max=sec.get("gamma_max", 100.0),
        n_gamma=sec.get("gamma_points", 24),
        k_scale=sec.get("k_scale", "log"),
    )
    targets = cfg.sections.get("targets", {})
    fl = cfg.sections.get("floquet", {})
    done = [0]

    def progress(i, n):
        if cfg.verbose and (i % max(1, n // 20) == 0 or i == n):
            print(f"chaos-map: {i}/{n} cells", file=sys.stderr)

    result = chaos_map(
        grid,
        C=targets.get("C", 10.0),
        omega_d_over_w0=targets.get("omega_d_over_w0", 1.999866),
        floquet_steps=fl.get("steps", 4096),
        stats_floor=sec.get("stats_floor", 50),
        max_dim=sec.get("max_dim", 1600),
        workers=cfg.workers,
        seed=cfg.seed,
        allow_outside=sec.get("allow_outside", False),
        progress=progress,
    )
    out = cfg.out_dir / f"chaos-map-{cfg.config_hash}.csv"
    result.provenance["subcommand"] = "chaos-map"
    result.provenance["config_hash"] = cfg.config_hash
    save_map(result, out)
    print(out)
    return 0


def _cmd_disintegration(cfg: RunConfig) -> int:
    sec = cfg.sections.get("scan", {})
    targets = cfg.sections.get("targets", {})
    fl = cfg.sections.get("floquet", {})
    if "gamma" not in sec or "k_list" not in sec:
        raise ConfigError([f"[scan] missing key {k}"
                           for k in ("gamma", "k_list") if k not in sec])
    k_list = [float(tok) for tok in str(sec["k_list"]).split(",") if tok.strip()]
    scan = disintegration_scan(
        gamma=sec["gamma"],
        k_list=k_list,
        C=targets.get("C", 10.0),
        omega_d_over_w0=targets.get("omega_d_over_w0", 1.999866),
        floquet_steps=fl.get("steps", 4096),
        n_override=sec.get("n"),
        entropy_points_per_unit=sec.get("points_per_unit", 3.0),
        quality_floor=sec.get("quality_floor", 0.3),
        emit_fields=sec.get("emit_husimi", False),
    )
    out = cfg.out_dir / f"disintegration-{cfg.config_hash}.csv"
    scan.provenance["subcommand"] = "disintegration"
    scan.provenance["config_hash"] = cfg.config_hash
    save_scan(scan, out)
    if sec.get("emit_husimi", False):
        for pt, fld in zip(scan.points, scan.point_fields):
            tag = f"{pt.k_over_w0:.6e}".replace(".", "p")
            write_binary_grid(
                cfg.out_dir / f"disintegration-{cfg.config_hash}-husimi-{tag}.kcgb",
                fld.q_axis, fld.p_axis, fld.values,
            )
    print(out)
    return 0


def _cmd_floquet_spectrum(cfg: RunConfig) -> int:
    params = _resolve_params(cfg)
    fl = cfg.sections.get("floquet", {})
    scales = derived_scales(params)
    n = fl.get("n") or default_fock_dimension(scales.Gamma)
    sol = floquet_solve(
        params, n=n,
        steps=fl.get("steps", 4096),
        order=fl.get("order", 4),
        tail_fraction=fl.get("tail_fraction", 0.1),
        tail_weight_max=fl.get("tail_weight_max", 1e-8),
        t0=SECTION_PHASE * scales.T_d,
    )
    out = cfg.out_dir / f"floquet-spectrum-{cfg.config_hash}.csv"
    sol.write_csv(out)
    _emit_json(
        Path(str(out) + ".provenance.json"),
        {
            "schema_version": 1,
            "kind": "floquet_spectrum",
            "subcommand": "floquet-spectrum",
            "config_hash": cfg.config_hash,
            "code_version": __version__,
            "settings": {
                "params": params.__dict__,
                "n": n,
                "steps": fl.get("steps", 4096),
                "Gamma": scales.Gamma,
                "K": scales.K,
            },
        },
    )
    print(out)
    return 0


def _cmd_phase_portrait(cfg: RunConfig) -> int:
    params = _resolve_params(cfg)
    cp = classical_from_quantum(params)
    scales = derived_scales(params)
    sec = cfg.sections.get("portrait", {})
    fl = cfg.sections.get("floquet", {})
    rng = np.random.default_rng(cfg.seed)
    gamma = max(scales.Gamma, 1.0)
    center = stroboscopic_fixed_point(cp)

    n_orbits = sec.get("n_orbits", 40)
    half_q, half_p = 2.4 * math.sqrt(gamma), 1.4 * math.sqrt(gamma)
    ics = np.column_stack(
        (center[0] + rng.uniform(-half_q, half_q, n_orbits),
         center[1] + rng.uniform(-half_p, half_p, n_orbits))
    )
    _log(cfg, "phase-portrait: sections...")
    sections = poincare_section(ics, cp, n_periods=sec.get("n_periods", 200))
    base = cfg.out_dir / f"phase-portrait-{cfg.config_hash}"
    with open(f"{base}-poincare.csv", "w", encoding="utf-8") as fh:
        fh.write("orbit,period,q,p\n")
        for i, pts in enumerate(sections):
            for k, q, p in pts:
                fh.write(f"{i},{int(k)},{format_float(q)},{format_float(p)}\n")

    _log(cfg, "phase-portrait: Lyapunov field...")
    n_grid = sec.get("lambda_grid", 41)
    q_axis = center[0] + np.linspace(-half_q, half_q, n_grid)
    p_axis = center[1] + np.linspace(-half_p, half_p, n_grid)
    lam = lyapunov_field(cp, q_axis, p_axis,
                         n_periods=sec.get("lambda_periods", 200))
    write_binary_grid(f"{base}-lambda.kcgb", q_axis, p_axis,
                      np.nan_to_num(lam, nan=-1.0))
    with open(f"{base}-lambda.csv", "w", encoding="utf-8") as fh:
        fh.write("q0,p0,lambda\n")
        for ip, p in enumerate(p_axis):
            for iq, q in enumerate(q_axis):
                fh.write(f"{format_float(q)},{format_float(p)},"
                         f"{format_float(lam[ip, iq])}\n")

    _log(cfg, "phase-portrait: participation field...")
    n_part = sec.get("participation_grid", 33)
    sol = floquet_solve(params, steps=fl.get("steps", 2048),
                        t0=SECTION_PHASE * scales.T_d)
    pq = center[0] + np.linspace(-half_q, half_q, n_part)
    pp = center[1] + np.linspace(-half_p, half_p, n_part)
    part = np.empty((n_part, n_part))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for ip, p in enumerate(pp):
            for iq, q in enumerate(pq):
                try:
                    cs = coherent_from_phase_point(q, p, sol.N, params.hbar_eff)
                    part[ip, iq] = participation_ratio(cs, sol)
                except KerrChaosError:
                    part[ip, iq] = np.nan
    write_binary_grid(f"{base}-participation.kcgb", pq, pp,
                      np.nan_to_num(part, nan=-1.0))
    with open(f"{base}-participation.csv", "w", encoding="utf-8") as fh:
        fh.write("q,p,value\n")
        for ip, p in enumerate(pp):
            for iq, q in enumerate(pq):
                fh.write(f"{format_float(q)},{format_float(p)},"
                         f"{format_float(part[ip, iq])}\n")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lem = lemniscate(scales)
    with open(f"{base}-lemniscate.csv", "w", encoding="utf-8") as fh:
        fh.write("q,p\n")
        for q, p in lem.curve:
            fh.write(f"{format_float(q)},{format_float(p)}\n")

    _emit_json(
        Path(f"{base}.provenance.json"),
        {
            "schema_version": 1,
            "kind": "phase_portrait",
            "subcommand": "phase-portrait",
            "config_hash": cfg.config_hash,
            "code_version": __version__,
            "settings": {
                "params": params.__dict__,
                "seed": cfg.seed,
                "Gamma": scales.Gamma,
                "K": scales.K,
                "center": [float(center[0]), float(center[1])],
            },
        },
    )
    print(base)
    return 0


def _cmd_thresholds(cfg: RunConfig, gamma_ray: str | None) -> int:
    sec = dict(cfg.sections.get("thresholds", {}))
    if gamma_ray:
        lo, _, hi = gamma_ray.partition(":")
        sec["mode"], sec["ray_lo"], sec["ray_hi"] = "gamma", float(lo), float(hi)
    targets = cfg.sections.get("targets", {})
    family = ThresholdFamily(
        mode=sec.get("mode", "kerr"),
        fixed=sec.get("fixed", 80.0),
        lo=sec.get("ray_lo", 1e-4),
        hi=sec.get("ray_hi", 8e-4),
        C=targets.get("C", 10.0),
        omega_d_over_w0=targets.get("omega_d_over_w0", 1.999866),
    )
    probe = ProbeSpec(
        n_ics=sec.get("n_ics", 25),
        n_periods=sec.get("n_periods", 600),
        tol=sec.get("tol", 1e-8),
        seed=cfg.seed,
        grid_n=sec.get("grid_n", 201),
        grid_periods=sec.get("grid_periods", 250),
        bisection_steps=sec.get("bisection_steps", 7),
    )
    result = threshold_scan(family, probe)
    payload = {
        "inner_GammaK_over_w0": result.inner,
        "merge_GammaK_over_w0": result.merge,
        "inner_bracket": list(result.inner_bracket),
        "merge_bracket": list(result.merge_bracket),
        "family": family.__dict__,
        "config_hash": cfg.config_hash,
    }
    out = cfg.out_dir / f"thresholds-{cfg.config_hash}.json"
    _emit_json(out, payload)
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_snail_params(cfg: RunConfig) -> int:
    sec = cfg.sections.get("snail")
    if not sec:
        raise ConfigError(["need a [snail] section"])
    missing = {"alpha", "m", "phi_ext"} - set(sec)
    if missing:
        raise ConfigError([f"[snail] missing key {k}" for k in sorted(missing)])
    sp = SnailParams(
        alpha=sec["alpha"], m=int(sec["m"]), phi_ext=sec["phi_ext"],
        M=int(sec.get("M", 1)), E_C=sec.get("E_C", 1.0),
        E_J=sec.get("E_J", 1.0), xi_J=sec.get("xi_J", 1.0),
    )
    ex = snail_coefficients(
        sp, Omega_d_tilde=sec.get("Omega_d_tilde", 0.0),
        omega_d=sec.get("omega_d"),
    )
    payload = {
        "phi_min": ex.phi_min,
        "c": list(ex.c),
        "cbar": list(ex.cbar),
        "p": ex.p,
        "hbar_eff": ex.hbar_eff,
        "params": ex.params.__dict__,
        "ratios": {
            "g3_over_w0": ex.params.g3 / ex.params.omega0,
            "g4_over_w0": ex.params.g4 / ex.params.omega0,
        },
        "config_hash": cfg.config_hash,
    }
    out = cfg.out_dir / f"snail-params-{cfg.config_hash}.json"
    _emit_json(out, payload)
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_validate(cfg: RunConfig) -> int:
    """Fast invariant battery over every module; nonzero exit on failure."""
    from .validate import run_validation

    failures = run_validation(verbose=cfg.verbose)
    for name, ok, detail in failures:
        status = "pass" if ok else "FAIL"
        print(f"{status:4s}  {name}{'' if ok else ': ' + detail}")
    bad = [f for f in failures if not f[1]]
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrchaos",
        description="Regularity-to-chaos maps and cat-qubit diagnostics for "
                    "driven Kerr parametric oscillators",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", help="output directory (default $KERRCHAOS_OUT or ./out)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verbose", action="store_true")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="SECTION.KEY=VALUE", help="override a config value",
    )
    sub.add_parser("chaos-map", parents=[common])
    sub.add_parser("disintegration", parents=[common])
    sub.add_parser("floquet-spectrum", parents=[common])
    sub.add_parser("phase-portrait", parents=[common])
    thr = sub.add_parser("thresholds", parents=[common])
    thr.add_argument("--gamma-ray", help="lo:hi Gamma ray at fixed K/omega0")
    sub.add_parser("snail-params", parents=[common])
    sub.add_parser("validate", parents=[common])
    return parser


_DISPATCH = {
    "chaos-map": _cmd_chaos_map,
    "disintegration": _cmd_disintegration,
    "floquet-spectrum": _cmd_floquet_spectrum,
    "phase-portrait": _cmd_phase_portrait,
    "snail-params": _cmd_snail_params,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sections = load_config(args.config, args.overrides)
        out_dir = Path(
            args.out or os.environ.get(_ENV_OUT, "out")
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg = RunConfig(
            sections=sections,
            out_dir=out_dir,
            workers=args.workers,
            seed=args.seed,
            verbose=args.verbose,
        )
        if args.command == "thresholds":
            return _cmd_thresholds(cfg, args.gamma_ray)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        json.dump(
            {"error": "config", "problems": exc.problems},
            sys.stderr.buffer and sys.stderr, indent=2,
        )
        sys.stderr.write("\n")
        return 2
    except KerrChaosError as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)}, sys.stderr, indent=2
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
