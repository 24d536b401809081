"""Smoke test for the adrnav Python extension.

Build and install first:  pip install ./crates/py   (or maturin develop)
"""

import json
import math
import pathlib

import adrnav

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    m = adrnav.GridMap(4, 4, 1.0, obstacles=[(1, 1)])
    cells, cost, (rows, cols, total) = m.plan((0, 0), (3, 3))
    assert cells[0] == (0, 0) and cells[-1] == (3, 3)
    assert cost == 6.0 and (rows, cols, total) == (3, 3, 6)

    assert adrnav.decode_tag("00-01-11") == "AtSource"
    assert adrnav.encode_tag(1, 3) == "01-10-11"
    try:
        adrnav.decode_tag("11-11-11")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid code decoded")

    assert adrnav.conv_size(224, 3, stride=1, pad=1) == 224
    assert adrnav.pool_size(224, 2, stride=2) == 112
    assert len(adrnav.roi_bins(8, 8, 3, 3)) == 3
    for w, h in adrnav.anchors():
        assert min(abs(w * h - s * s) for s in (128, 256, 512)) < 1e-6
    assert adrnav.smooth_l1(0.5) == 0.125
    assert adrnav.loc_loss([2, -2, 0.5, 1], [0, 0, 0, 0]) == 3.625

    doc = {
        "grid": {"rows": 4, "cols": 4, "cell_size_m": 1.0},
        "tags": [{"pos": [0, 0], "code": "00-01-11"}, {"pos": [3, 3], "code": "00-10-11"}],
        "detector": {"accuracy": 1.0, "seed": 1},
        "rfid": {"min_rpm": 200, "relocalization_s": 75, "read_probability": 1.0},
        "mission": {"source": [0, 0], "dest": [3, 3]},
    }
    s = adrnav.Scenario.from_json(json.dumps(doc))
    r = s.run(seed=3)
    assert r.outcome == "success", r
    assert r.total_distance == 12.0 and r.relocalizations == 2
    step = 1.0 / (200 / 60 * math.pi * 0.1)
    assert abs(r.total_time - (12 * step + 150 + 120)) < 1e-9
    assert adrnav.Scenario.from_json(s.to_json()).to_json() == s.to_json()

    grids = adrnav.Scenario.load(str(ROOT / "scenarios" / "calibrated_grids.json"))
    rows = grids.sweep(trials=20, seed=1)
    assert [v for v, *_ in rows] == list(range(4, 13))
    assert all(0.0 <= rate <= 1.0 for *_, rate in rows)

    print("smoke test ok")


if __name__ == "__main__":
    main()
