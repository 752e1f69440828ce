"""Build the extension module, import it and exercise the main entry points.

    python3 python/smoke_test.py
"""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_module(dest):
    subprocess.run(
        ["cargo", "build", "-p", "qbattery-py", "--release", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    lib = os.path.join(target, "release", "libqbattery_py.so")
    shutil.copy(lib, os.path.join(dest, "qbattery.so"))


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    workdir = tempfile.mkdtemp(prefix="qbattery-smoke-")
    build_module(workdir)
    sys.path.insert(0, workdir)
    import qbattery as qb

    print("qbattery", qb.__version__, "calibrated omega", qb.CALIBRATED_OMEGA)

    chain = qb.SpinChain(2, 0.5, lam=0.5, jz=0.2)
    spectrum = chain.spectrum()
    assert len(spectrum) == 4 and spectrum == sorted(spectrum)
    assert close(spectrum[-1] - spectrum[0], 2.0615528128088303, 1e-10)

    ground = chain.ground_state()
    top = chain.top_state()
    e0, w0 = chain.energy_and_ergotropy(ground)
    e1, w1 = chain.energy_and_ergotropy(top)
    assert close(e0, 0.0) and close(w0, 0.0)
    assert close(e1, 1.0) and close(w1, 1.0)
    assert close(qb.purity(top), 1.0)
    assert close(qb.trace_distance(ground, top), 1.0)

    hc = qb.charging_hamiltonian(2, 0.5)
    assert len(hc) == 4 and close(hc[0][1].real, 0.25)

    cfg = qb.Config.reference_charging(2)
    cfg.t_max = 2.0
    out = qb.run(cfg)
    records = out["records"]
    assert len(records) == 41
    assert records[0]["energy"] < 1e-12
    assert out["health"]["max_trace_error"] < 1e-9
    print("charging N=2 summary:", out["summary"])

    back = qb.Config.from_toml(cfg.to_toml())
    assert back.to_toml() == cfg.to_toml()

    dis = qb.Config.reference_discharging(2, "z", 0.05)
    dis.t_max = 1.0
    d = qb.run_discharging(dis)
    assert close(d["records"][0]["energy"], 1.0, 1e-12)
    assert d["records"][-1]["energy"] < 1.0

    table = qb.sweep(cfg, "noise_strength", [0.0, 0.1])
    assert [row["value"] for row in table] == [0.0, 0.1]
    assert all("summary" in row for row in table)

    try:
        cfg.gamma_minus = 0.01
        qb.run(cfg)
    except ValueError as e:
        print("rejected as expected:", e)
    else:
        raise AssertionError("charging with relaxation must be rejected")

    checks = qb.validate(seed=3)
    for c in checks:
        print("  {:32s} {}".format(c["name"], "PASS" if c["passed"] else "FAIL"))
    assert all(c["passed"] for c in checks)

    print("smoke test passed")


if __name__ == "__main__":
    main()
