import json
import math
import warnings

import numpy as np
import pytest

from kerrchaos.errors import SchemaError
from kerrchaos.gridio import read_binary_grid, write_binary_grid
from kerrchaos.maps import (
    GridSpec,
    _chaos_cell,
    chaos_map,
    disintegration_scan,
    load_map,
    load_scan,
    map_cell_dimension,
    save_map,
    save_scan,
)

TOY_STEPS = 512


@pytest.fixture(scope="module")
def toy_map():
    grid = GridSpec(k_values=(1.6e-3, 3.3e-3), gamma_values=(5.0, 6.0))
    return chaos_map(grid, floquet_steps=TOY_STEPS, stats_floor=30, max_dim=512)


class TestGridSpec:
    def test_from_bounds_log(self):
        grid = GridSpec.from_bounds(1e-4, 1e-3, 4, 10.0, 20.0, 3)
        assert len(grid.k_values) == 4
        assert grid.k_values[0] == pytest.approx(1e-4)
        ratios = np.diff(np.log(np.array(grid.k_values)))
        assert np.allclose(ratios, ratios[0])

    def test_bounds_enforced(self):
        grid = GridSpec(k_values=(1e-2,), gamma_values=(8.0,))
        with pytest.raises(ValueError, match="window"):
            grid.validate_bounds()
        grid.validate_bounds(allow_outside=True)

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            GridSpec.from_bounds(k_scale="cubic")


def test_cell_dimension_rule():
    # structure term dominates at large Gamma, scrambling term at small K
    assert map_cell_dimension(80.0, 25e-4) == 640
    assert map_cell_dimension(8.5, 0.53e-4) > 500
    assert map_cell_dimension(5.0, 33e-4) == 74


class TestChaosMap:
    def test_cells_complete_and_finite(self, toy_map):
        assert toy_map.r_bar.shape == (2, 2)
        assert np.all(np.isfinite(toy_map.r_bar))
        assert np.all(toy_map.valid)
        # strongly driven cells legitimately fall back to the bulk window
        for (i, j), msg in toy_map.messages.items():
            assert "bulk-window" in msg

    def test_order_independence(self, toy_map):
        # evaluating the same cells in any order gives bit-identical values
        grid = GridSpec(k_values=(1.6e-3, 3.3e-3), gamma_values=(5.0, 6.0))
        jobs = [
            (i, j, grid.gamma_values[i], grid.k_values[j], 10.0, 1.999866,
             TOY_STEPS, 30, 512, "auto")
            for i in (1, 0)
            for j in (1, 0)
        ]
        for (i, j, rt, rb, ret, ok, msg) in map(_chaos_cell, jobs):
            assert rt == toy_map.r_tilde[i, j]
            assert rb == toy_map.r_bar[i, j]
            assert ret == toy_map.retained[i, j]

    def test_failures_recorded_not_fatal(self):
        bad = _chaos_cell((0, 0, 8.0, 0.0, 10.0, 1.999866, TOY_STEPS, 30, 256,
                           "auto"))
        assert not bad[5]
        assert "RootBracketError" in bad[6]

    def test_threshold_products_attached(self, toy_map):
        inner, merge = toy_map.threshold_products
        assert inner == pytest.approx(0.0187)
        assert merge == pytest.approx(0.03347)


class TestMapPersistence:
    def test_round_trip(self, toy_map, tmp_path):
        path = tmp_path / "map.csv"
        save_map(toy_map, path)
        loaded = load_map(path)
        assert np.array_equal(loaded.r_bar, toy_map.r_bar)
        assert np.array_equal(loaded.r_tilde, toy_map.r_tilde)
        assert np.array_equal(loaded.retained, toy_map.retained)
        assert np.array_equal(loaded.valid, toy_map.valid)
        assert loaded.C == toy_map.C
        assert loaded.messages == toy_map.messages

    def test_provenance_complete(self, toy_map, tmp_path):
        path = tmp_path / "map.csv"
        save_map(toy_map, path)
        doc = json.loads((tmp_path / "map.csv.provenance.json").read_text())
        for key in ("schema_version", "kind", "code_version", "settings",
                    "config_hash", "created_utc", "threshold_products"):
            assert key in doc
        assert doc["settings"]["floquet_steps"] == TOY_STEPS

    def test_corrupted_header_rejected(self, toy_map, tmp_path):
        path = tmp_path / "map.csv"
        save_map(toy_map, path)
        body = path.read_text().splitlines()
        rng = np.random.default_rng(4)
        for mutation in ("magic", "columns", "row"):
            target = tmp_path / f"bad_{mutation}.csv"
            lines = list(body)
            if mutation == "magic":
                lines[0] = "# some other tool v9"
            elif mutation == "columns":
                lines[1] = lines[1].replace("r_bar", "rbar")
            else:
                lines[2] = lines[2] + ",0,0,junk"
            target.write_text("\n".join(lines) + "\n")
            (tmp_path / f"bad_{mutation}.csv.provenance.json").write_text(
                (tmp_path / "map.csv.provenance.json").read_text()
            )
            with pytest.raises(SchemaError):
                load_map(target)

    def test_schema_version_mismatch(self, toy_map, tmp_path):
        path = tmp_path / "map.csv"
        save_map(toy_map, path)
        sidecar = tmp_path / "map.csv.provenance.json"
        doc = json.loads(sidecar.read_text())
        doc["schema_version"] = 99
        sidecar.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="migration"):
            load_map(path)

    def test_missing_sidecar(self, toy_map, tmp_path):
        path = tmp_path / "map.csv"
        save_map(toy_map, path)
        (tmp_path / "map.csv.provenance.json").unlink()
        with pytest.raises(SchemaError, match="sidecar"):
            load_map(path)


class TestDisintegrationScan:
    @pytest.fixture(scope="class")
    def toy_scan(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return disintegration_scan(
                6.0, [1.5e-3, 3.3e-3], floquet_steps=TOY_STEPS, n_override=96,
            )

    def test_points_and_labels(self, toy_scan):
        assert len(toy_scan.points) == 2
        for pt in toy_scan.points:
            assert math.isfinite(pt.n_min) and math.isfinite(pt.s_min)
            expected = "chaotic" if 6.0 * pt.k_over_w0 > 0.03347 else "regular"
            assert pt.regime == expected

    def test_single_label_flip_along_ray(self, toy_scan):
        # the label is monotone in K at fixed Gamma, so at most one flip
        assert toy_scan.regime_flips <= 1

    def test_round_trip(self, toy_scan, tmp_path):
        path = tmp_path / "scan.csv"
        save_scan(toy_scan, path)
        loaded = load_scan(path)
        assert loaded.gamma == toy_scan.gamma
        assert len(loaded.points) == len(toy_scan.points)
        for a, b in zip(loaded.points, toy_scan.points):
            assert a == b

    def test_wrong_kind_rejected(self, toy_scan, toy_map, tmp_path):
        path = tmp_path / "scan.csv"
        save_scan(toy_scan, path)
        with pytest.raises(SchemaError, match="kind"):
            load_map(path)


class TestBinaryGrid:
    def test_round_trip(self, tmp_path):
        q = np.linspace(-2, 3, 17)
        p = np.linspace(-1, 1, 9)
        values = np.outer(np.sin(p), np.cos(q))
        path = tmp_path / "field.kcgb"
        write_binary_grid(path, q, p, values)
        q2, p2, v2 = read_binary_grid(path)
        assert np.allclose(q2, q) and np.allclose(p2, p)
        assert np.array_equal(v2, values)

    def test_header_fuzzing_rejected(self, tmp_path):
        q = np.linspace(0, 1, 5)
        p = np.linspace(0, 1, 4)
        path = tmp_path / "field.kcgb"
        write_binary_grid(path, q, p, np.zeros((4, 5)))
        raw = bytearray(path.read_bytes())
        cases = {
            "magic": (0, b"XXXX"),
            "version": (4, (99).to_bytes(2, "little")),
            "dims": (8, (0).to_bytes(4, "little")),
        }
        for name, (offset, patch) in cases.items():
            bad = bytearray(raw)
            bad[offset : offset + len(patch)] = patch
            target = tmp_path / f"bad_{name}.kcgb"
            target.write_bytes(bytes(bad))
            with pytest.raises(SchemaError):
                read_binary_grid(target)
        truncated = tmp_path / "trunc.kcgb"
        truncated.write_bytes(bytes(raw[:-16]))
        with pytest.raises(SchemaError, match="size"):
            read_binary_grid(truncated)
