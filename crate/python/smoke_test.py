"""Smoke test for the pyotcpcc extension module.

Build the extension and copy it next to this script first:

    cargo build -p pyotcpcc --release
    cp target/release/libpyotcpcc.so python/pyotcpcc.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyotcpcc as ot  # noqa: E402

TREE = """
{"name": "root", "children": [
  {"name": "left", "children": [{"label": "a"}, {"label": "b"}]},
  {"label": "c"}
]}
"""


def close(x, y, tol=1e-9):
    return abs(x - y) <= tol


def main():
    a = ot.PointSet([[0.0, 0.0], [1.0, 0.0]])
    b = ot.PointSet([[0.0, 1.0], [1.0, 1.0]])
    assert len(a) == 2 and a.dim == 2
    assert a.weights == [0.5, 0.5]

    value, plan = ot.emd(a, b)
    assert close(value, 1.0), value
    assert plan.shape == (2, 2) and plan.nnz() <= 3
    assert plan.is_feasible(a.weights, b.weights)
    assert close(plan.total_mass(), 1.0)

    for method in ot.METHODS:
        d = ot.distance(method, a, b)
        assert math.isfinite(d) and d >= 0.0, (method, d)
    assert close(ot.distance("l2", a, b), 1.0)

    s = ot.sinkhorn(a, b, epsilon=0.01, max_iters=5000)
    assert s["plan"].is_feasible(a.weights, b.weights)
    assert abs(s["value"] - 1.0) < 0.02

    assert close(ot.emd_1d([0.0, 2.0], [1.0, 3.0]), 1.0)
    g = ot.greedy_flow_matching([0.5, 0.5], [0.25, 0.75])
    assert g.entries == [(0, 0, 0.25), (0, 1, 0.25), (1, 1, 0.5)]

    tree = ot.LabelTree.from_json(TREE)
    assert sorted(tree.labels) == ["a", "b", "c"]
    assert tree.distance("a", "b") == 2.0 and tree.distance("a", "c") == 3.0

    data = {
        "a": [[0.0, 0.0], [0.5, 0.0]],
        "b": [[1.0, 0.0], [1.5, 0.5]],
        "c": [[6.0, 6.0], [7.0, 6.0]],
    }
    res = ot.cpcc(data, tree, backend="emd", gradient=True)
    assert -1.0 <= res["value"] <= 1.0 and not res["degenerate"]
    assert len(res["pairs"]) == 3
    assert set(res["gradients"]) == {"a", "b", "c"}

    r, degenerate = ot.pearson([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert close(r, 1.0) and not degenerate
    r, degenerate = ot.pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    assert r == 0.0 and degenerate

    err, passed = ot.gradient_check("l2", n=3, d=2, seed=1)
    assert passed and err < 1e-4

    try:
        ot.distance("bogus", a, b)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")
    try:
        ot.cpcc(data, tree, backend="twd", gradient=True)
    except NotImplementedError:
        pass
    else:
        raise AssertionError("twd gradient should be unsupported")

    print("pyotcpcc smoke test passed")


if __name__ == "__main__":
    main()
