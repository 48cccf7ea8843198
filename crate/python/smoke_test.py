"""Smoke test for the pmeobs extension module.

Build and install first, e.g. `pip install ./crates/py` or
`maturin develop -m crates/py/Cargo.toml`.
"""

import json
import pathlib

import pmeobs

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    grid = pmeobs.Grid([(0.0, 1.0)], [21], 21, 1.0)
    assert grid.dim == 1 and grid.n_space == [21]

    constant = pmeobs.Field.constant(grid, 3.0)
    u, stages = pmeobs.solve_obstacle(constant, 2.0)
    assert abs(u.sup() - 3.0) < 1e-12 and abs(u.min() - 3.0) < 1e-12
    assert json.loads(stages)[-1]["sweeps"] >= 1

    value = pmeobs.barenblatt([0.0], 1.0, 2.0, 1, 1.0)
    assert abs(value - 1.0) < 1e-12

    text = (ROOT / "corpus" / "case_bump.json").read_text()
    u, report = pmeobs.run_config(text)
    report = json.loads(report)
    assert report["pass"], report
    cert = json.loads(pmeobs.certify_supersolution(u, 2.0))
    assert cert["pass"], cert

    again = pmeobs.Field.from_csv(u.to_csv())
    assert again.sup_distance(u) == 0.0

    boxes = grid.enumerate_boxes(1)
    assert boxes[0] == (0, 0, [0], [20], 0), boxes[0]

    try:
        pmeobs.Grid([(0.0, 1.0)], [1], 3, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate grid accepted")

    print(f"pmeobs smoke test ok: {report['summary']}")


if __name__ == "__main__":
    main()
