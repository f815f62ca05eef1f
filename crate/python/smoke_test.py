"""Smoke test for the Python extension.

Build first:
    cargo build --release -p dampnls-py --features extension-module
then run:
    python3 python/smoke_test.py [path/to/libdampnls_py.so]
"""

import importlib.util
import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load(lib_path):
    tmp = Path(tempfile.mkdtemp())
    target = tmp / "dampnls.so"
    shutil.copy(lib_path, target)
    spec = importlib.util.spec_from_file_location("dampnls", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    lib = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "target/release/libdampnls_py.so"
    if not lib.exists():
        sys.exit(f"extension not found at {lib}; build it first")
    nls = load(lib)

    gs = nls.GroundState(1)
    assert abs(gs.mass - math.sqrt(3) * math.pi / 2) < 1e-8, gs.mass
    assert abs(gs.energy) < 1e-8

    grid = nls.Grid(1, 512, 20.0)
    u = gs.sample(grid)
    obs = u.observables()
    assert abs(obs["mass"] - gs.mass) < 1e-8
    assert gs.gn_certificate(u) > -1e-6

    m0 = u.mass()
    u.step(1e-3, 0.1, steps=100)
    assert abs(u.mass() - m0 * math.exp(-2 * 0.1 * 0.1)) < 1e-10 * m0

    est = nls.decompose(gs.sample(grid, lam=0.8, gamma=0.3))
    assert abs(est["lambda"] - 0.8) < 1e-6 and est["converged"], est

    p = nls.profile(0.2)
    assert p["r_b"] > 0 and p["mass_qb"] > gs.mass

    t = [1 - 10 ** (-k / 20) for k in range(0, 120)]
    fit = nls.fit_blowup(t, [math.sqrt(0.2 * (1 - s)) for s in t], [0.1] * len(t))
    assert abs(fit["t_hat"] - 1) < 1e-6, fit

    cfg = {
        "d": 1, "a": 0.01, "grid": {"d": 1, "n": 256, "half_width": 12.0},
        "dt0": 1e-2, "cfl": 0.01, "t_end": 0.1, "lambda_floor": 1e-4,
        "gradnorm_ceiling": 1e8, "snapshot_stride": 0, "seed": 0,
        "initial_data": {"kind": "scaled_ground_state", "c": 0.9},
    }
    out = nls.simulate(json.dumps(cfg))
    assert out["status"] == "completed" and len(out["rows"]) == 11, out["status"]

    try:
        nls.Grid(5, 64, 1.0)
    except nls.NlsError:
        pass
    else:
        raise AssertionError("d = 5 accepted")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
