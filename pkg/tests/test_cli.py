import json

import pytest

from flashbias import Rng, read_fbf1, write_dbm1
from flashbias.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_verify_default_passes(capsys):
    code, out, _ = run_cli(capsys, "verify", "--instances", "6")
    assert code == 0
    report = json.loads(out)
    assert report["tool_version"]
    assert all(r["passed"] for r in report["results"])


def test_verify_perturbed_bias_fails_with_reported_diff(capsys):
    code, out, _ = run_cli(capsys, "verify", "--instances", "6",
                           "--perturb-bias", "1e-3")
    assert code == 1
    report = json.loads(out)
    bad = [r for r in report["results"] if r["name"] == "factored_matches_reference"]
    assert bad and not bad[0]["passed"]
    assert bad[0]["error"] >= 1e-4


def test_verify_empty_sweep_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--instances", "0"])
    assert exc.value.code == 2


def test_decompose_exact_alibi(capsys, tmp_path):
    out_path = tmp_path / "alibi.fbf"
    code, out, _ = run_cli(capsys, "decompose", "--gen", "alibi:64,64",
                           "--method", "exact", "--out", str(out_path))
    assert code == 0
    report = json.loads(out)
    row = report["results"][0]
    assert row["rank_used"] == 2
    assert row["max_abs_err"] == 0.0
    fb = read_fbf1(out_path)
    assert fb.rank == 2 and fb.origin == "exact"


def test_decompose_exact_rejects_other_generators(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["decompose", "--gen", "spherical:16", "--method", "exact",
              "--out", "/tmp/x.fbf"])
    assert exc.value.code == 2


def test_decompose_svd_energy_on_known_rank_file(capsys, tmp_path):
    rng = Rng(5)
    mat = rng.normal(576, 24) @ rng.normal(576, 24).T
    dbm = tmp_path / "learned_bias.dbm"
    write_dbm1(dbm, mat)
    out_path = tmp_path / "learned_bias.fbf"
    code, out, _ = run_cli(capsys, "decompose", "--in", str(dbm),
                           "--method", "svd", "--energy", "0.995",
                           "--out", str(out_path))
    assert code == 0
    report = json.loads(out)
    assert report["results"][0]["rank_used"] <= 24
    assert read_fbf1(out_path).fq.shape[0] == 576


def test_decompose_neural_reports_loss_trace(capsys, tmp_path):
    out_path = tmp_path / "sph.fbf"
    code, out, _ = run_cli(capsys, "decompose", "--gen", "spherical:12,3",
                           "--method", "neural", "--rank", "4",
                           "--hidden", "16", "--iters", "40",
                           "--out", str(out_path))
    assert code == 0
    row = json.loads(out)["results"][0]
    assert row["origin"] == "neural"
    with open(row["loss_trace"]) as f:
        losses = json.load(f)["losses"]
    assert len(losses) == 40
    assert row["final_loss"] == losses[-1]


def test_cost_single_point_matches_library(capsys):
    from flashbias import CostParams, count_flashbias
    code, out, _ = run_cli(capsys, "cost", "--n", "1024", "--c", "64",
                           "--r", "32", "--format", "json")
    assert code == 0
    rows = json.loads(out)["results"]
    p = CostParams(n=1024, m=1024, c=64, r=32, sram_bytes=100 * 1024,
                   dtype_bytes=2)
    expect = count_flashbias(p)
    got = next(r for r in rows if r["algorithm"] == "flashbias")
    assert got["total"] == expect.total
    assert got["b_q"] == expect.b_q


def test_cost_emits_ratio_band_row(capsys):
    code, out, _ = run_cli(capsys, "cost", "--n", "16384", "--c", "64",
                           "--r", "64", "--format", "json")
    assert code == 0
    rows = json.loads(out)["results"]
    fb = next(r for r in rows if r["algorithm"] == "flashbias")
    assert 4.8 <= fb["theta_ratio_vs_flash_dense_bias"] <= 7.2


def test_cost_sweep_monotone_in_sram(capsys):
    totals = []
    for sram in (64 * 1024, 128 * 1024, 256 * 1024):
        code, out, _ = run_cli(capsys, "cost", "--n", "8192", "--c", "64",
                               "--r", "32", "--sram-bytes", str(sram),
                               "--format", "json")
        assert code == 0
        rows = json.loads(out)["results"]
        totals.append(next(r["total"] for r in rows
                           if r["algorithm"] == "flashbias"))
    assert totals[0] >= totals[1] >= totals[2]


def test_cost_csv_header(capsys):
    code, out, _ = run_cli(capsys, "cost", "--n", "256", "--format", "csv")
    assert code == 0
    header = out.splitlines()[0]
    assert header.startswith("algorithm,n,m,c,r,sram,dtype,reads,writes,total,b_q,b_kv,t")
    assert "ratio_vs_flash_dense_bias" in header


def test_cost_empty_sweep_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["cost", "--n", ""])
    assert exc.value.code == 2


def test_bench_json_rows_and_exit(capsys):
    code, out, _ = run_cli(capsys, "bench", "--n", "48,64", "--c", "8",
                           "--r", "4", "--runs", "1", "--warmup", "0")
    assert code == 0
    rows = json.loads(out)["results"]
    assert len(rows) == 6
    scenarios = {r["scenario"] for r in rows}
    assert scenarios == {"reference_dense", "tiled_dense", "flashbias"}


def test_bench_respects_bias_cap(capsys):
    code, out, _ = run_cli(capsys, "bench", "--n", "128", "--c", "8",
                           "--r", "4", "--runs", "1", "--warmup", "0",
                           "--max-bias-bytes", "1024")
    assert code == 0
    rows = json.loads(out)["results"]
    skipped = [r for r in rows if r["skipped"]]
    assert {r["scenario"] for r in skipped} == {"reference_dense", "tiled_dense"}


def test_unknown_generator_is_config_error(capsys):
    code, _, err = run_cli(capsys, "decompose", "--gen", "mystery:4",
                           "--method", "svd", "--rank", "2",
                           "--out", "/tmp/x.fbf")
    assert code == 2
    assert "unknown generator" in err


def test_decompose_neural_from_dense_file(capsys, tmp_path):
    # with no source coordinates, the CLI feeds normalized indices
    rng = Rng(6)
    mat = rng.normal(10, 2) @ rng.normal(8, 2).T
    dbm = tmp_path / "m.dbm"
    write_dbm1(dbm, mat)
    out_path = tmp_path / "m.fbf"
    code, out, _ = run_cli(capsys, "decompose", "--in", str(dbm),
                           "--method", "neural", "--rank", "3",
                           "--hidden", "8", "--iters", "30",
                           "--out", str(out_path))
    assert code == 0
    fb = read_fbf1(out_path)
    assert fb.fq.shape == (10, 3) and fb.fk.shape == (8, 3)


def test_bench_sram_derived_tiles(capsys):
    code, out, _ = run_cli(capsys, "bench", "--n", "64", "--c", "8",
                           "--r", "4", "--runs", "1", "--warmup", "0",
                           "--sram-bytes", "8192")
    assert code == 0
    rows = json.loads(out)["results"]
    assert len(rows) == 3


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "flashbias", "cost",
                           "--n", "512", "--format", "csv"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("algorithm,")
