"""Smoke test for the bargain_py extension.

Build the extension first:

    cargo build --release -p bargain-py --features extension-module

then run this script from anywhere. It imports bargain_py from
target/release (or target/debug) by copying the shared library to a
temporary directory under the importable name.
"""

import importlib
import math
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[3]


def load_module():
    try:
        return importlib.import_module("bargain_py")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libbargain_py.so", "libbargain_py.dylib", "bargain_py.dll"):
            built = ROOT / "target" / profile / name
            if built.exists():
                suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
                tmp = Path(tempfile.mkdtemp())
                shutil.copy(built, tmp / f"bargain_py{suffix}")
                sys.path.insert(0, str(tmp))
                return importlib.import_module("bargain_py")
    sys.exit("bargain_py is not built; run cargo build --release -p bargain-py --features extension-module")


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    bp = load_module()

    game = bp.Game.example_one(0.2)
    assert game.num_agents == 2 and game.dimension == 1
    assert game.preferred_states == [[0.0], [1.0]]

    assert close(bp.dibs_step(game, [0.25], 0.1)[0], 0.30, 1e-15)
    assert bp.naive_step(game, [0.3], 0.1) == [0.3]

    report = bp.solve(game, "dibs", [0.2])
    assert report.termination == "converged", report
    assert close(report.final_state[0], 0.5, 1e-6)
    assert close(sum(report.stationarity_weights), 1.0, 1e-9)

    transformed = bp.Game.example_one(0.2, transformed=True)
    dibs = bp.solve(transformed, "dibs", [0.2])
    ksbs = bp.solve(transformed, "ksbs", [0.2])
    assert close(dibs.final_state[0], 0.5, 1e-6)
    assert abs(ksbs.final_state[0] - 0.5) > 0.02
    assert close(ksbs.final_state[0], (math.sqrt(5) - 1) / 2, 1e-4)

    projected = bp.project_simplex([0.5, 0.5, 0.5])
    assert all(close(p, 1 / 3, 1e-15) for p in projected)

    residual, weights = bp.stationarity_residual(game, [0.25])
    assert residual < 1e-9 and close(weights[0], 0.75, 1e-9)
    assert close(bp.ksbs_ratio_spread(game, [0.25]), 0.5, 1e-15)
    assert bp.relative_error([1.0, 0.0], [0.5, 0.0], [0.0, 0.0]) == 0.5

    try:
        bp.solve(game, "nbs", [1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("non-rational start accepted")

    lines = bp.run_experiment('experiment = "toy"\nmethods = ["dibs"]\nx0 = [0.3]\n')
    assert len(lines) == 2 and '"method":"dibs"' in lines[0]

    print("bargain_py smoke test passed")


if __name__ == "__main__":
    main()
