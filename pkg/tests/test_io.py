import json

import numpy as np

from orthoagp import expand, two_site_example
from orthoagp.io import config_hash, expansion_dump, format_float, header, render_csv, render_json


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 123456789.123456789):
        s = format_float(x)
        assert float(s) == x
    assert format_float(np.float64(0.1)) == "0.10000000000000001"
    assert format_float(True) == "1" and format_float(None) == ""
    assert format_float(float("nan")) == "nan"


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1.0, 2]}) == config_hash({"b": [1.0, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_layout():
    meta = header({"x": 1})
    text = render_csv(["lambda", "j"], [[0.5, 1.0]], meta)
    lines = text.splitlines()
    assert lines[0].startswith("# version: ")
    assert lines[1].startswith("# config_hash: ")
    assert lines[2] == "# kappa: 1"
    assert lines[3:] == ["lambda,j", "0.5,1"]


def test_json_and_expansion_dump():
    lb, sc, rep = expand(two_site_example())
    dump = expansion_dump(lb, sc, rep)
    assert [layer["labels"] for layer in dump["layers"]][1] == ["yI", "Iy"]
    mono = dump["structure_constants"][0]["monomials"][0]
    assert set(mono) == {"sign", "j_pow", "lam_pow", "scale"}
    doc = json.loads(render_json(dump, header({})))
    assert doc["meta"]["kappa"] == 1.0 and doc["report"]["n_agp"] == 6
