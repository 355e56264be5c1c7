import json

import pytest
from hypothesis import given, strategies as st

from smcgen.cli import ConfigError, ExperimentConfig, main


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


configs = st.builds(
    ExperimentConfig,
    model=st.sampled_from(["neutral", "bounded(a=2,eps=0.5)", "hmm"]),
    scheme=st.sampled_from(["multinomial", "systematic", "residual_stratified"]),
    N=st.integers(2, 10**6), T=st.integers(0, 10**6), n=st.integers(1, 50),
    reps=st.integers(1, 10**5), seed=st.integers(0, 2**63),
    grid=st.lists(st.floats(0, 100, allow_nan=False), max_size=6).map(lambda g: tuple(sorted(g))),
    alpha=st.floats(1e-6, 0.5), csmc=st.booleans(), out=st.sampled_from(["out", "a/b c"]),
    workers=st.integers(0, 64),
)


@given(configs)
def test_config_round_trip(cfg):
    assert ExperimentConfig.parse(cfg.emit()) == cfg


def test_config_hash_ignores_runtime_fields():
    a = ExperimentConfig(seed=3)
    assert a.config_hash() == ExperimentConfig(seed=3, out="x", workers=9).config_hash()
    assert a.config_hash() != ExperimentConfig(seed=4).config_hash()


def test_config_parse_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("bogus=1")
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("N=abc")
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("N 4")
    with pytest.raises(ConfigError):
        ExperimentConfig(N=4, n=5).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(grid=(2.0, 1.0)).validate()


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--model", "neutral", "--N", "12", "--T", "6", "--reps", "2",
            "--seed", "11", "--workers", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    fa, fb = _files(tmp_path / "a"), _files(tmp_path / "b")
    fa.pop(next(k for k in fa if k.name == "config.txt"))
    fb.pop(next(k for k in fb if k.name == "config.txt"))
    assert fa == fb


def test_worker_pool_matches_serial(tmp_path):
    args = ["simulate", "--model", "bounded(a=2)", "--scheme", "systematic", "--N", "8", "--T",
            "5", "--reps", "3", "--seed", "2"]
    assert main(args + ["--workers", "1", "--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--workers", "2", "--out", str(tmp_path / "p")]) == 0
    for r in range(3):
        rep = f"rep_{r:05d}"
        assert ((tmp_path / "s" / rep / "ancestry.csv").read_bytes()
                == (tmp_path / "p" / rep / "ancestry.csv").read_bytes())


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--N", "4", "--n", "5", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--scheme", "nope", "--out", str(tmp_path)]) == 2
    assert main(["genealogy", "--trace", str(tmp_path / "missing"), "--out",
                 str(tmp_path / "g")]) == 2
    assert main(["validate", "nope"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_degenerate_weights_exit_code(tmp_path, monkeypatch):
    from smcgen import cli
    from smcgen.smc import DegenerateWeightsError

    def boom(cfg, r):
        raise DegenerateWeightsError(4)

    monkeypatch.setattr(cli, "_simulate_one", boom)
    assert main(["simulate", "--out", str(tmp_path), "--workers", "1"]) == 3


def test_bounded_zhat_positive(tmp_path):
    out = tmp_path / "b"
    assert main(["simulate", "--model", "bounded(a=2)", "--scheme", "systematic", "--N", "64",
                 "--T", "200", "--out", str(out)]) == 0
    meta = json.loads((out / "rep_00000" / "meta.json").read_text())
    assert meta["Zhat"] > 0


def test_outputs_declare_seed_and_hash(tmp_path):
    out = tmp_path / "s"
    assert main(["simulate", "--N", "5", "--T", "3", "--seed", "9", "--out", str(out)]) == 0
    cfg = ExperimentConfig.parse((out / "config.txt").read_text())
    head = f"# seed=9 config_hash={cfg.config_hash()}"
    for name in ("ancestry.csv", "weights.csv"):
        assert (out / "rep_00000" / name).read_text().splitlines()[0] == head
    assert (out / "summary.csv").read_text().splitlines()[0] == head


def test_genealogy_from_trace_and_censoring(tmp_path, capsys):
    sim = tmp_path / "sim"
    assert main(["simulate", "--N", "30", "--T", "2", "--reps", "3", "--out", str(sim)]) == 0
    out = tmp_path / "gen"
    assert main(["genealogy", "--trace", str(sim), "--N", "30", "--T", "2", "--reps", "3",
                 "--n", "2", "--grid", "0,5", "--out", str(out)]) == 0
    pooled = (out / "genealogy_pooled.csv").read_text().splitlines()
    assert pooled[1] == "replicate,blocks_t0.0,blocks_t5.0,pair_time"
    rows = [line.split(",") for line in pooled[2:]]
    assert len(rows) == 3
    assert all(r[1] == "2" for r in rows)
    # clock over two generations cannot reach 5 unless the pair has merged
    assert all((r[2] == "NA") == (r[3] == "NA") for r in rows)
    resc = (out / "rep_00000" / "rescaled.csv").read_text().splitlines()
    assert resc[1] == "t,n_blocks"
    gen = (out / "rep_00000" / "genealogy.csv").read_text().splitlines()
    assert gen[1] == "t,n_blocks,c_N,D_N,cum_clock" and len(gen) == 2 + 3


def test_genealogy_inline_pair_times(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["genealogy", "--simulate-inline", "--N", "40", "--T", "2000", "--n", "2",
                 "--reps", "40", "--pooled-only", "--out", str(out)]) == 0
    rows = (out / "genealogy_pooled.csv").read_text().splitlines()[2:]
    assert len(rows) == 40
    times = [float(r.split(",")[-1]) for r in rows]
    assert all(t > 0 for t in times)
    assert "KS vs Exp(1)" in capsys.readouterr().out


def test_validate_suite_exit_0(capsys):
    assert main(["validate", "timescale"]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") >= 4


def test_kingman_table(tmp_path, capsys):
    assert main(["kingman-table", "--n", "3", "--grid", "0,1", "--stdout"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "k,prob" and lines[2:5] == ["1,0.0", "2,0.0", "3,1.0"]
    assert main(["kingman-table", "--n", "3", "--grid", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "kingman_n3_t1.0.csv").is_file()


def test_compare_timescales(tmp_path, capsys):
    assert main(["compare-timescales", "--model", "bounded(a=2)", "--N", "16", "--T", "20",
                 "--stdout"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("t,cN_multinomial,cN_stochastic_rounding,delta")
    vals = [line.split(",") for line in lines[2:]]
    assert len(vals) == 20
    assert all(float(v[3]) >= -1e-12 for v in vals)
