from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfuzz.config import MODES, ConfigError, EngineConfig, parse_duration
from hybridfuzz.coordinator import load_report, run_campaign
from hybridfuzz.fuzzer import FUZZ, INITIAL, SAMPLE, SOLVE, Seed
from hybridfuzz.harness.cli import main
from hybridfuzz.harness.labels import (
    RB,
    RB_ANCESTOR,
    SAMPLING,
    SAMPLING_ANCESTOR,
    MissingLineage,
    label_crash,
)
from hybridfuzz.harness.targets import bundled_targets, load_target


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(MODES),
    st.floats(0, 1),
    st.floats(-300, 0),
    st.one_of(st.none(), st.floats(0, 1e4)),
    st.integers(1, 40),
    st.floats(1e-3, 1e4),
    st.one_of(st.none(), st.integers(1, 10**9)),
    st.booleans(),
    st.integers(0, 2**31),
)
def test_config_roundtrip(mode, lam, dlog, gamma, k, budget, max_execs, lockstep, seed):
    cfg = EngineConfig(mode=mode, lam=lam, delta_log10=dlog, gamma=gamma, k_dim=k, budget=budget,
                       max_execs=max_execs, lockstep=lockstep, seed=seed)
    assert EngineConfig.from_text(cfg.to_text()) == cfg


def test_config_overrides_and_errors():
    cfg = EngineConfig.from_text("mode = NS\nlambda = 0.3  # comment\n", seed=7)
    assert (cfg.mode, cfg.lam, cfg.seed) == ("NS", 0.3, 7)
    with pytest.raises(ConfigError):
        EngineConfig.from_text("nope = 1")
    with pytest.raises(ConfigError):
        EngineConfig(lam=1.5)
    with pytest.raises(ConfigError):
        EngineConfig(mode="AFL")


def test_gamma_switch():
    cfg = EngineConfig()
    assert cfg.gamma_for(9_999) == 80 and cfg.gamma_for(10_000) == 300
    assert EngineConfig(gamma=5).gamma_for(10**6) == 5


def test_parse_duration():
    assert parse_duration("30s") == 30 and parse_duration("2m") == 120 and parse_duration("250ms") == 0.25
    with pytest.raises(ConfigError):
        parse_duration("soon")


def test_fixture_corpus():
    names = set(bundled_targets())
    assert {"b1", "doctype", "b3", "twopaths", "collide", "loopy", "mulgate", "divcrash", "samplecrash"} <= names
    for n in names:
        load_target(n)


# labels --------------------------------------------------------------------------


def _seed(i, origin, parent=None, retrieved=False):
    return Seed(i, b"", parent, origin, "", 0.0, retrieved=retrieved)


def test_label_examples():
    init = _seed(0, INITIAL)
    assert label_crash(init, {0: init}) == set()
    s = _seed(1, SAMPLE, 0)
    assert label_crash(s, {0: init, 1: s}) == {SAMPLING}
    rb = _seed(2, SOLVE, 0, retrieved=True)
    child = _seed(3, FUZZ, 2)
    assert label_crash(child, {0: init, 2: rb, 3: child}) == {RB_ANCESTOR}
    plain = _seed(4, SOLVE, 0, retrieved=False)
    assert label_crash(plain, {0: init, 4: plain}) == set()


def test_multiple_labels():
    init = _seed(0, INITIAL)
    s = _seed(1, SAMPLE, 0)
    rb = _seed(2, SOLVE, 1, retrieved=True)
    assert label_crash(rb, {0: init, 1: s, 2: rb}) == {RB, SAMPLING_ANCESTOR}


def test_missing_lineage():
    child = _seed(5, FUZZ, 99)
    with pytest.raises(MissingLineage):
        label_crash(child, {5: child})


_ORIGINS = st.sampled_from([FUZZ, SOLVE, SAMPLE])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(_ORIGINS, st.booleans()), min_size=1, max_size=8))
def test_label_soundness(chain):
    lineage = {0: _seed(0, INITIAL)}
    for i, (origin, retrieved) in enumerate(chain, 1):
        lineage[i] = _seed(i, origin, i - 1, retrieved and origin == SOLVE)
    trigger = lineage[len(chain)]
    labels = label_crash(trigger, lineage)
    assert (RB in labels) == (trigger.origin == SOLVE and trigger.retrieved)
    assert (SAMPLING in labels) <= (trigger.origin == SAMPLE)
    anc = [lineage[i] for i in range(len(chain))]
    assert (RB_ANCESTOR in labels) == any(a.origin == SOLVE and a.retrieved for a in anc)
    assert (SAMPLING_ANCESTOR in labels) == any(a.origin == SAMPLE for a in anc)


# reports and CLI -----------------------------------------------------------------


@pytest.mark.parametrize("mode", ["FULL", "LOB", "FuzzOnly"])
def test_report_monotone(mode):
    rep = run_campaign(load_target("loopy"), EngineConfig(mode=mode, budget=10.0, period=1.0, seed=3)).report
    tl = rep["coverage_timeline"]
    assert rep["schema"] == 1
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(tl, tl[1:]))
    assert tl[-1][1] == rep["final_edge_coverage"]


def test_cli_run_report_replay(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--target", "divcrash", "--mode", "FULL", "--budget", "5s", "--seed", "1",
                 "--lockstep", "--out", str(out), "--dump-pc"]) == 0
    rep = load_report(str(out / "report.json"))
    assert rep["target"] == "divcrash.tgt" and rep["mode"] == "FULL"
    assert (out / "pc_dump.txt").exists()
    crashes = sorted((out / "corpus" / "crashes").glob("DivByZero__*.bin"))
    assert crashes
    capsys.readouterr()

    assert main(["report", str(out / "report.json"), "--format", "csv"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "t,edges" and int(rows[-1].split(",")[1]) == rep["final_edge_coverage"]
    assert main(["report", str(out / "report.json"), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == 1

    deep = [c for c in crashes if c.stem.count("-") == 2]
    assert deep
    assert main(["replay", str(deep[0]), "--target", "divcrash"]) == 0
    text = capsys.readouterr().out
    assert "Crash(DivByZero)" in text and "3 frames" in text
    assert main(["replay", str(deep[0]), "--target", "divcrash", "--fail-on-crash"]) != 0


def test_cli_compare(tmp_path, capsys):
    csv_path = tmp_path / "rows.csv"
    assert main(["compare", "--target", "twopaths", "--modes", "FULL,LOB", "--budget", "3s",
                 "--trials", "2", "--lockstep", "--csv", str(csv_path)]) == 0
    table = capsys.readouterr().out
    assert "FULL" in table and "LOB" in table
    assert len(csv_path.read_text().strip().splitlines()) == 1 + 4


def test_cli_dump_pc(capsys):
    assert main(["dump-pc", "--target", "doctype", "--ordinal", "0"]) == 0
    assert "== 60" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--target", "no-such-target", "--budget", "1s", "--out", str(tmp_path)]) == 2
    assert main(["run", "--target", "b1", "--budget=-1s", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err.lower()
