import json
from pathlib import Path

import pytest

from rectiplace import data_path
from rectiplace.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_NO_LEGAL_ACTION, main
from rectiplace.geometry import RectilinearShape
from rectiplace.netlist import Macro, MacroPin, Netlist, load_netlist, netlist_to_dict
from rectiplace.placement import MacroPlacement, Placement, load_placement
from rectiplace.render import InconsistentPlacement, render_svg
from rectiplace.geometry import Side

GOLDEN = Path(__file__).parent / "golden"
TOY6 = str(data_path("toy6.json"))
TINY3 = str(data_path("tiny3.json"))


def run(*args):
    return main([str(a) for a in args])


def test_group_prints_count(tmp_path, capsys):
    assert run("group", "--netlist", TINY3, "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "G=2"
    doc = json.loads((tmp_path / "groups.json").read_text())
    assert sorted(map(sorted, doc["groups"].values())) == [["top/cpu/ram0", "top/cpu/ram1"], ["top/dsp/rom0"]]


def test_group_override_echoed(tmp_path, capsys):
    src = tmp_path / "mine.json"
    src.write_text('{"all": ["top/cpu/ram0", "top/cpu/ram1", "top/dsp/rom0"]}\n')
    assert run("group", "--netlist", TINY3, "--groups", src, "--out", tmp_path / "o") == 0
    assert (tmp_path / "o" / "groups.json").read_bytes() == src.read_bytes()
    assert "G=1" in capsys.readouterr().out


def test_malformed_netlist(tmp_path, capsys):
    doc = netlist_to_dict(load_netlist(TINY3))
    doc["macros"][1]["name"] = doc["macros"][0]["name"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert run("group", "--netlist", bad, "--out", tmp_path) == EXIT_INVALID
    err = capsys.readouterr().err
    assert err.startswith("error:") and "top/cpu/ram0" in err


def test_bad_override(tmp_path):
    src = tmp_path / "g.json"
    src.write_text('{"a": ["top/cpu/ram0"]}')
    assert run("group", "--netlist", TINY3, "--groups", src, "--out", tmp_path) == EXIT_INVALID


def test_place_random_writes_artifacts(tmp_path):
    assert run("place", "--netlist", TOY6, "--random", "--seed", 2, "--out", tmp_path) == 0
    for f in ("placement.json", "costs.json", "layout.svg"):
        assert (tmp_path / f).exists()
    costs = json.loads((tmp_path / "costs.json").read_text())
    assert costs["reward"] == -costs["weighted_total"]


def test_place_requires_one_mode(tmp_path):
    assert run("place", "--netlist", TOY6, "--out", tmp_path) == EXIT_INVALID
    assert run("place", "--netlist", TOY6, "--random", "--sa", "--out", tmp_path) == EXIT_INVALID


def test_place_post_refines(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sa": {"sweeps": 20}}))
    assert run("place", "--netlist", TOY6, "--random", "--post", "--config", cfg, "--out", tmp_path / "o") == 0
    costs = json.loads((tmp_path / "o" / "costs.json").read_text())
    assert costs["weighted_total"] <= costs["pre_refinement"] + 1e-12
    assert (tmp_path / "o" / "sa_trace.csv").exists()


def test_place_sa(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sa": {"sweeps": 5}}))
    assert run("place", "--netlist", TINY3, "--sa", "--config", cfg, "--out", tmp_path / "o") == 0


def test_no_legal_action_exit_code(tmp_path):
    canvas = RectilinearShape.rectangle(20, 10)
    sq = RectilinearShape.rectangle(10, 10)
    big = RectilinearShape.rectangle(15, 10)
    n = Netlist("full", canvas, (Macro("a/x", big), Macro("a/y", sq)))
    p = tmp_path / "n.json"
    p.write_text(json.dumps(netlist_to_dict(n)))
    assert run("place", "--netlist", p, "--random", "--out", tmp_path / "o") == EXIT_NO_LEGAL_ACTION


def test_train_zero_updates_and_checkpoint(tmp_path):
    assert run("train", "--netlist", TINY3, "--updates", 0, "--out", tmp_path) == 0
    assert (tmp_path / "metrics.csv").read_text().count("\n") == 1
    assert run("place", "--netlist", TINY3, "--checkpoint", tmp_path / "checkpoint.json",
               "--out", tmp_path / "p") == 0


def test_train_rows_and_snapshots(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ppo": {"episodes_per_update": 4, "minibatch": 8}, "snapshot_every": 1}))
    assert run("train", "--netlist", TINY3, "--updates", 2, "--config", cfg, "--out", tmp_path / "o") == 0
    assert (tmp_path / "o" / "metrics.csv").read_text().count("\n") == 3
    assert sorted(p.name for p in (tmp_path / "o" / "snapshots").iterdir()) == ["update_00001.svg", "update_00002.svg"]


def test_train_divergence_exit_code(tmp_path, monkeypatch):
    from rectiplace.agent import ppo

    def boom(*a, **k):
        raise ppo.NonFiniteLoss("loss became nan")

    monkeypatch.setattr("rectiplace.agent.train.ppo_update", boom)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ppo": {"episodes_per_update": 2}}))
    assert run("train", "--netlist", TINY3, "--updates", 1, "--config", cfg, "--out", tmp_path) == EXIT_DIVERGED


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"sweeps": 3}')
    assert run("group", "--netlist", TINY3, "--config", cfg, "--out", tmp_path) == EXIT_INVALID


def test_config_grid_override_limit(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"grid": [4, 200]}')
    assert run("group", "--netlist", TINY3, "--config", cfg, "--out", tmp_path) == EXIT_INVALID


def test_eval_and_render(tmp_path, capsys):
    toy10 = str(data_path("toy10.json"))
    pl = GOLDEN / "toy10_placement.json"
    assert run("eval", "--netlist", toy10, "--placement", pl, "--out", tmp_path) == 0
    assert "weighted" in capsys.readouterr().out
    assert run("render", "--netlist", toy10, "--placement", pl, "--out", tmp_path) == 0
    assert (tmp_path / "layout.svg").read_bytes() == (GOLDEN / "toy10_layout.svg").read_bytes()


@pytest.mark.parametrize("cmd", [
    ("place", "--netlist", TOY6, "--random", "--seed", 4),
    ("place", "--netlist", TINY3, "--sa", "--seed", 4),
])
def test_rerun_is_byte_identical(tmp_path, cmd):
    assert run(*cmd, "--out", tmp_path / "a") == 0
    assert run(*cmd, "--out", tmp_path / "b") == 0
    for f in ("placement.json", "costs.json", "layout.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


# -- renderer -------------------------------------------------------------------

def one_macro():
    canvas = RectilinearShape.rectangle(40, 40)
    m = Macro("m", RectilinearShape.rectangle(10, 10), (MacroPin("p", (10, 5), Side.E),), group_id=0)
    return Netlist("one", canvas, (m,))


def test_render_single_macro():
    svg = render_svg(Placement({"m": MacroPlacement(5, 5)}), one_macro())
    assert svg.count("<rect") == 1 and svg.count("<polygon") == 1 and svg.count("<line") == 1


def test_render_two_groups_two_colors():
    canvas = RectilinearShape.rectangle(40, 40)
    sq = RectilinearShape.rectangle(10, 10)
    n = Netlist("two", canvas, (Macro("a", sq, group_id=0), Macro("b", sq, group_id=1), Macro("c", sq, group_id=1)))
    pl = Placement({"a": MacroPlacement(0, 0), "b": MacroPlacement(20, 0), "c": MacroPlacement(20, 20)})
    svg = render_svg(pl, n)
    fills = {line.split('fill="')[1].split('"')[0] for line in svg.splitlines() if line.startswith("<rect")}
    assert len(fills) == 2


def test_render_l_macro_has_two_rects():
    canvas = RectilinearShape.rectangle(40, 40)
    L = RectilinearShape.from_corners([(0, 0), (0, 20), (10, 20), (10, 10), (20, 10), (20, 0)])
    n = Netlist("l", canvas, (Macro("l", L, group_id=0),))
    assert render_svg(Placement({"l": MacroPlacement(0, 0)}), n).count("<rect") == 2


def test_render_inconsistent():
    n = one_macro()
    with pytest.raises(InconsistentPlacement):
        render_svg(Placement({}), n)
    with pytest.raises(InconsistentPlacement):
        render_svg(Placement({"m": MacroPlacement(0, 0), "zz": MacroPlacement(0, 0)}), n)
    with pytest.raises(InconsistentPlacement):
        render_svg(Placement({"m": MacroPlacement(0, 0)}, {7: (1.0, 1.0)}), n)
