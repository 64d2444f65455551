"""Smoke test for the Python bindings: pip install --no-build-isolation ./crates/py"""

import json
import math

import drcc_py

SMALL = """
[fleet]
n_buildings = 10

[profile]
n_periods = 6
peak_kw = 20.0

[scenarios]
n_samples = 20

[solver]
time_limit = 10.0
"""


def main():
    assert "n_buildings = 100" in drcc_py.default_config()
    assert math.isclose(drcc_py.omega_coefficient(0.0, 1.0, 0.2), 2.0)
    assert math.isclose(drcc_py.omega_coefficient(0.5, 1.0, 0.2), math.sqrt(5.0))
    assert math.isclose(drcc_py.wasserstein_lhs(9.0, [10.0, 8.0, 6.0, 4.0], 0.3, 20.0), 0.05)

    periods = json.loads(drcc_py.solve_day(SMALL, "drcc-w2"))
    assert len(periods) == 6
    assert all(p["result"]["status"] == "optimal" for p in periods)
    assert all(21.5 - 1e-9 <= x <= 24.5 + 1e-9 for p in periods for x in p["temps"])

    scan = SMALL + '\n[model]\nadj_w_method = "load-scan"\n'
    r = json.loads(drcc_py.solve_period(3, scan, "adj-w-free"))
    assert r["status"] == "optimal" and r["alpha"] is not None

    assert "Binaries" in drcc_py.export_model(2, SMALL, "drcc-w1")
    try:
        drcc_py.solve_period(0, SMALL, "milp9")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown kind accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
