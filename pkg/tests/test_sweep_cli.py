from __future__ import annotations

import csv
import io
import json

import pytest

from jscc_bounds.cli import EXIT_INPUT, EXIT_NO, EXIT_OK, main, run_properties
from jscc_bounds.errors import InvalidProblemError, ValidationError
from jscc_bounds.outer import OuterGrid
from jscc_bounds.sweep import (
    CSV_HEADER,
    CURVES,
    SweepSpec,
    db_to_linear,
    revalidate_hybrid_rows,
    rows_to_csv,
    run_sweep,
)

FAST = dict(budget=150, uncoded_resolution=21, outer_grid=OuterGrid(21, 11, 11), outer_tol=1e-6)


@pytest.fixture(scope="module")
def small_sweep():
    spec = SweepSpec(grid=(0.0, 10.0), **FAST)
    return spec, run_sweep(spec)


class TestSpec:
    def test_empty_curve_set(self):
        with pytest.raises(ValidationError):
            SweepSpec(curves=())

    def test_unknown_curve(self):
        with pytest.raises(ValidationError):
            SweepSpec(curves=("digital",))

    @pytest.mark.parametrize("grid", [(), (1.0, 1.0), (5.0, 2.0)])
    def test_bad_grid(self, grid):
        with pytest.raises(ValidationError):
            SweepSpec(grid=grid)

    def test_infeasible_correlations(self):
        with pytest.raises(InvalidProblemError):
            SweepSpec(rho01=0.9, rho02=-0.9, rho12=0.9)

    def test_round_trip(self):
        spec = SweepSpec(grid=(1.0, 2.0), **FAST)
        assert SweepSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            SweepSpec.from_dict({"gird": [1]})

    def test_db_scale(self):
        assert db_to_linear(10.0) == pytest.approx(10.0)
        spec = SweepSpec(grid=(0.0, 4.0), scale="linear", **FAST)
        assert spec.powers()[1] == (pytest.approx(6.0206, abs=1e-4), 4.0)


class TestRun:
    def test_single_point_one_row_per_curve(self):
        spec = SweepSpec(grid=(3.0,), **FAST)
        rows = run_sweep(spec)
        assert [r.curve for r in rows] == list(CURVES)
        assert all(r.error is None for r in rows)

    def test_curve_subset(self):
        spec = SweepSpec(grid=(3.0,), curves=("outer_common",), **FAST)
        assert [r.curve for r in run_sweep(spec)] == ["outer_common"]

    @pytest.mark.parametrize("curve", ["hybrid_no_common", "hybrid_common", "uncoded_common"])
    def test_subset_matches_full_sweep(self, small_sweep, curve):
        spec, rows = small_sweep
        alone = run_sweep(SweepSpec(grid=spec.grid, curves=(curve,), **FAST))
        assert rows_to_csv(alone) == rows_to_csv([r for r in rows if r.curve == curve])

    def test_zero_power_is_unit_distortion(self):
        rows = run_sweep(SweepSpec(grid=(0.0,), scale="linear", **FAST))
        for r in rows:
            assert r.d1 == pytest.approx(1.0, abs=1e-6), r.curve

    def test_ordering(self, small_sweep):
        _, rows = small_sweep
        d = {(r.curve, r.param_db): r.d1 for r in rows}
        for pdb in (0.0, 10.0):
            for suffix in ("common", "no_common"):
                assert d["outer_" + suffix, pdb] <= d["hybrid_" + suffix, pdb] + 1e-6
                assert d["hybrid_" + suffix, pdb] <= d["uncoded_" + suffix, pdb] + 1e-9

    def test_hybrid_rows_revalidate(self, small_sweep):
        spec, rows = small_sweep
        assert revalidate_hybrid_rows(rows, spec)

    def test_csv(self, small_sweep):
        _, rows = small_sweep
        text = rows_to_csv(rows)
        parsed = list(csv.reader(io.StringIO(text)))
        assert tuple(parsed[0]) == CSV_HEADER
        assert len(parsed) == 1 + len(rows)
        assert all(line[-1] == "" for line in parsed[1:])

    def test_repeatable(self, small_sweep):
        spec, rows = small_sweep
        assert rows_to_csv(run_sweep(spec)) == rows_to_csv(rows)


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestCli:
    def test_outer_member(self, capsys):
        code, out = _run(capsys, "outer", "--d1", "1", "--d2", "1")
        assert code == EXIT_OK and json.loads(out)["member"] is True

    def test_outer_not_member(self, capsys):
        code, _ = _run(capsys, "outer", "--d1", "1e-6", "--d2", "1e-6", "--power", "1")
        assert code == EXIT_NO

    def test_outer_needs_target(self, capsys):
        assert _run(capsys, "outer")[0] == EXIT_INPUT

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        assert _run(capsys, "--config", str(path), "outer", "--d1", "1", "--d2", "1")[0] \
            == EXIT_INPUT

    def test_bad_correlations(self, capsys):
        code, _ = _run(capsys, "inner-uncoded", "--rho01", "0.9", "--rho02", "-0.9",
                       "--rho12", "0.9")
        assert code == EXIT_INPUT

    def test_hybrid_zero_budget(self, capsys):
        code, out = _run(capsys, "inner-hybrid", "--budget", "0")
        assert code == EXIT_NO and json.loads(out)["found"] is False

    def test_uncoded_targets(self, capsys):
        code, out = _run(capsys, "inner-uncoded", "--power", "10", "--d1", "0.5", "--d2", "0.5")
        data = json.loads(out)
        assert code == EXIT_OK and data["d1"] <= 0.5
        assert _run(capsys, "inner-uncoded", "--power", "10", "--d1", "0.01", "--d2", "0.01")[0] \
            == EXIT_NO

    def test_flags_after_subcommand(self, capsys):
        a = _run(capsys, "--seed", "4", "properties", "--suite", "dpi", "--count", "5")[1]
        b = _run(capsys, "properties", "--suite", "dpi", "--count", "5", "--seed", "4")[1]
        assert a == b and json.loads(a)["seed"] == 4

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "out.json"
        assert main(["--out", str(path), "outer", "--d1", "1", "--d2", "1"]) == EXIT_OK
        assert json.loads(path.read_text())["member"] is True

    def test_discrete_certify(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"source": {"names": ["S1", "S2"],
                                               "table": [[0.25, 0.25], [0.25, 0.25]]},
                                    "channel": "noiseless", "d1": 0.0, "d2": 0.0}))
        code, out = _run(capsys, "--config", str(path), "discrete-certify")
        data = json.loads(out)
        assert code == EXIT_OK and data["revalidated"] is True


class TestProperties:
    @pytest.mark.parametrize("suite", ["lemma-chain", "dpi", "tensorization"])
    def test_seed_replay(self, suite):
        a = run_properties(suite, 20, 11)
        b = run_properties(suite, 20, 11)
        assert a.to_dict() == b.to_dict() and a.passed

    def test_bad_count(self):
        with pytest.raises(ValidationError):
            run_properties("dpi", 0, 0)
