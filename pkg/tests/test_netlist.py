import json

import pytest

from rectiplace import data_path
from rectiplace.netlist import (
    MAX_NET_PINS,
    Net,
    ParseError,
    PinKind,
    PinRef,
    ValidationError,
    load_netlist,
    netlist_from_dict,
    netlist_to_dict,
    save_netlist,
    validate_netlist,
)

SQUARE = [[0, 0], [0, 10], [10, 10], [10, 0]]


def minimal_doc():
    return {
        "name": "min",
        "canvas": {"corners": [[0, 0], [0, 20], [20, 20], [20, 0]]},
        "macros": [{"name": "m0", "corners": SQUARE,
                    "pins": [{"name": "a", "offset": [10, 5], "side": "E"}]}],
        "ports": [{"name": "p0", "position": [0, 10]}],
        "nets": [{"id": 0, "pins": [{"kind": "macro", "owner": "m0", "pin": "a"},
                                    {"kind": "port", "owner": "p0"}]}],
    }


def test_minimal_instance(tmp_path):
    p = tmp_path / "min.json"
    p.write_text(json.dumps(minimal_doc()))
    n = load_netlist(p)
    assert n.num_macros == 1
    assert n.stats() == {"macros": 1, "clusters": 0, "ports": 1, "nets": 1}


def test_unknown_macro_rejected():
    doc = minimal_doc()
    doc["nets"][0]["pins"][0]["owner"] = "ghost"
    with pytest.raises(ValidationError) as err:
        netlist_from_dict(doc)
    assert "unknown macro 'ghost'" in str(err.value)


def test_fixture_stats(toy6):
    assert toy6.stats()["macros"] == 6
    assert toy6.stats()["nets"] == 9


@pytest.mark.parametrize("name", ["toy6.json", "toy10.json", "tiny3.json"])
def test_fixtures_valid(name):
    assert validate_netlist(load_netlist(data_path(name))) == []


def test_one_pin_net_violation():
    n = netlist_from_dict(minimal_doc())
    bad = Net(3, (PinRef(PinKind.PORT, "p0"),))
    n = type(n)(n.name, n.canvas, n.macros, n.clusters, n.ports, n.nets + (bad,))
    assert validate_netlist(n) == ["net 3: fewer than 2 pins"]


def test_duplicate_macro_violation():
    doc = minimal_doc()
    doc["macros"].append(dict(doc["macros"][0]))
    with pytest.raises(ValidationError) as err:
        netlist_from_dict(doc)
    assert err.value.violations == ["duplicate macro name 'm0'"]


def test_fanout_cap():
    doc = minimal_doc()
    doc["macros"] = [{"name": f"m{i}", "corners": SQUARE} for i in range(MAX_NET_PINS + 1)]
    doc["nets"] = [{"id": 0, "pins": [{"kind": "macro", "owner": f"m{i}"} for i in range(MAX_NET_PINS + 1)]}]
    with pytest.raises(ValidationError, match="fan-out"):
        netlist_from_dict(doc)


def test_pin_side_inconsistent():
    doc = minimal_doc()
    doc["macros"][0]["pins"][0]["side"] = "W"
    with pytest.raises(ValidationError, match="inconsistent"):
        netlist_from_dict(doc)


def test_pin_off_boundary():
    doc = minimal_doc()
    doc["macros"][0]["pins"][0]["offset"] = [5, 5]
    with pytest.raises(ValidationError, match="not on shape boundary"):
        netlist_from_dict(doc)


def test_port_off_boundary():
    doc = minimal_doc()
    doc["ports"][0]["position"] = [5, 5]
    with pytest.raises(ValidationError, match="canvas boundary"):
        netlist_from_dict(doc)


def test_bad_canvas_is_validation_error():
    doc = minimal_doc()
    doc["canvas"]["corners"] = [[0, 0], [1, 1], [2, 0]]
    with pytest.raises(ValidationError, match="NotAxisParallel"):
        netlist_from_dict(doc)


@pytest.mark.parametrize("text", ["{", "[]", '{"name": "x"}', '{"canvas": {"corners": [[0, "a"]]}}'])
def test_malformed_is_parse_error(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_netlist(p)


def test_macro_frame_normalized():
    doc = minimal_doc()
    doc["macros"][0]["corners"] = [[5, 5], [5, 15], [15, 15], [15, 5]]
    doc["macros"][0]["pins"][0]["offset"] = [15, 10]
    n = netlist_from_dict(doc)
    assert n.macros[0].shape.bbox[:2] == (0, 0)
    assert n.macros[0].pins[0].offset == (10, 5)


@pytest.mark.parametrize("name", ["toy6.json", "toy10.json"])
def test_round_trip(tmp_path, name):
    n = load_netlist(data_path(name))
    out = tmp_path / "rt.json"
    save_netlist(n, out)
    m = load_netlist(out)
    assert m == n
    assert netlist_to_dict(m) == netlist_to_dict(n)
