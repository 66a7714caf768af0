"""Fast cross-module invariant battery backing the ``validate`` subcommand.

Each check is desk-scale (seconds) and returns (name, ok, detail).  The
pytest suite covers the same ground more thoroughly; this battery exists so
a deployment can self-check without a test environment.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .classical import (
    ClassicalParams,
    integrate,
    lyapunov,
    static_energy,
    tangent_map,
)
from .floquet import floquet_solve, spacing_ratio
from .model import (
    FockSpace,
    OscillatorParams,
    build_drive_operator,
    build_static_hamiltonian,
    classical_from_quantum,
    derived_scales,
    params_from_targets,
)
from .qphase import PhaseGrid, coherent_state, husimi, wehrl_entropy


def _check(name, fn):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            detail = fn()
        return (name, True, detail or "")
    except AssertionError as exc:
        return (name, False, str(exc))
    except Exception as exc:  # noqa: BLE001 - report, do not crash the battery
        return (name, False, f"{type(exc).__name__}: {exc}")


def run_validation(verbose: bool = False):
    checks = []
    params = params_from_targets(8e-4, 6.0)
    scales = derived_scales(params)
    cp = classical_from_quantum(params)

    def hermiticity():
        space = FockSpace(48)
        h = build_static_hamiltonian(params, space)
        dev = np.max(np.abs(h - h.T)) / max(np.max(np.abs(h)), 1.0)
        assert dev < 1e-12, f"Hermiticity deviation {dev:.2e}"
        v = build_drive_operator(space)
        devv = np.max(np.abs(v - v.conj().T))
        assert devv < 1e-12, f"drive operator deviation {devv:.2e}"

    checks.append(_check("operators Hermitian", hermiticity))

    def scale_identity():
        lhs = scales.Gamma * scales.K / params.omega0
        rhs = (params.g3 * params.Omega_d * params.omega_d
               / (params.omega0 * (params.omega_d**2 - params.omega0**2)))
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1e-30), f"{lhs} vs {rhs}"

    checks.append(_check("Gamma*K identity", scale_identity))

    sol_holder = {}

    def unitarity():
        sol = floquet_solve(params, n=96, steps=512,
                            t0=0.25 * scales.T_d)
        sol_holder["sol"] = sol
        dev = np.max(np.abs(sol.U.conj().T @ sol.U - np.eye(sol.N)))
        assert dev < 1e-9, f"unitarity defect {dev:.2e}"
        assert sol.max_residual < 1e-8, f"eigen residual {sol.max_residual:.2e}"

    checks.append(_check("Floquet unitarity and residual", unitarity))

    def spacing_calibration():
        picket = np.arange(100) / 100.0
        st = spacing_ratio(picket, 1.0, min_levels=3)
        assert abs(st.r_tilde - 1.0) < 1e-12, f"picket r_tilde {st.r_tilde}"
        rng = np.random.default_rng(7)
        st2 = spacing_ratio(np.sort(rng.uniform(0, 1, 20000)), 1.0)
        assert abs(st2.r_tilde - (2 * math.log(2) - 1)) < 0.02, st2.r_tilde

    checks.append(_check("spacing-ratio calibration", spacing_calibration))

    def husimi_norm():
        cs = coherent_state(1.5 + 0.5j, 64)
        grid = PhaseGrid(-4, 8, 97, -5, 7, 97)
        field = husimi(cs.vector, grid)
        assert abs(field.normalization - 1.0) < 0.01, field.normalization
        s = wehrl_entropy(field)
        ref = (1.0 + math.log(math.pi)) / math.pi
        assert abs(s - ref) / ref < 0.005, f"coherent entropy {s} vs {ref}"

    checks.append(_check("Husimi normalization and coherent entropy", husimi_norm))

    def energy_drift():
        cp0 = ClassicalParams(omega0=1.0, g3=cp.g3, g4=cp.g4,
                              omega_d=cp.omega_d, Omega_d=0.0)
        span = 2.0 * math.pi / cp.omega_d * 30
        tr = integrate((1.2, 0.3), cp0, (0.0, span), tol=1e-11)
        h0 = static_energy(tr.q, tr.p, cp0)
        drift = np.max(np.abs(h0 - h0[0])) / abs(h0[0])
        assert drift < 1e-8, f"energy drift {drift:.2e}"

    checks.append(_check("undriven energy conservation", energy_drift))

    def area_preservation():
        m = tangent_map((0.8, 0.1), cp)
        det = float(np.linalg.det(m))
        assert abs(det - 1.0) < 1e-6, f"det {det}"

    checks.append(_check("stroboscopic area preservation", area_preservation))

    def harmonic_lyapunov():
        cph = ClassicalParams(omega0=1.0, g3=0.0, g4=0.0,
                              omega_d=1.999866, Omega_d=0.0)
        res = lyapunov((1.0, 0.0), cph, n_periods=100, renorm_every=10)
        assert abs(res.value) < max(3 * res.band, 1e-3), (res.value, res.band)

    checks.append(_check("harmonic orbit has zero exponent", harmonic_lyapunov))

    def completeness():
        sol = sol_holder["sol"]
        cs = coherent_state(math.sqrt(scales.Gamma), sol.N)
        total = np.sum(np.abs(sol.states.conj().T @ cs.vector) ** 2)
        assert abs(total - 1.0) < 1e-8, f"completeness defect {abs(total - 1):.2e}"

    checks.append(_check("Floquet-basis completeness", completeness))

    return checks
