"""Smoke test for the glab Python bindings."""

import math
import sys

import glab


def main() -> int:
    assert abs(glab.seq_norm("l2", [3.0, 4.0, 0.0]) - 5.0) < 1e-12
    assert abs(glab.seq_norm("l1", [1.0, -2.0]) - 3.0) < 1e-12

    b = glab.Basis.thm_a(4)
    assert b.dim == 2 ** 6 - 4
    e0 = [1.0] + [0.0] * (b.dim - 1)
    assert b.coeff_norm(e0) > 0.0
    g = b.tga(e0, 1)
    assert abs(g[0] - 1.0) < 1e-12 and all(abs(x) < 1e-12 for x in g[1:])
    quantity, scale, value, kind, _, seed = b.ktilde(b.dim // 2, trials=10, seed=7)
    assert quantity == "ktilde" and kind == "lower" and seed == 7 and value >= 1.0 - 1e-12

    a = glab.Basis.main_a(5)
    _, _, qg, _, _, _ = a.quasi_greedy()
    assert math.isfinite(qg) and qg > 1.0

    passed, verdicts, rows = glab.run_suite("rotation")
    assert passed and len(verdicts) == 5 and rows
    for criterion, check, ok, detail in verdicts:
        print(f"criterion {criterion} {check}: {'PASS' if ok else 'FAIL'} ({detail})")

    try:
        glab.run_suite("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown suite accepted")

    print(f"glab {glab.__version__} smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
