"""Smoke test for the fdelab Python extension.

Build and install first:
    cd crates/fdelab-py && maturin develop --release
or
    maturin build --release -m crates/fdelab-py/Cargo.toml && pip install target/wheels/fdelab-*.whl
"""

import json
import math
import pathlib
import sys

import fdelab

ROOT = pathlib.Path(__file__).resolve().parent.parent


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    p_c, p_0 = fdelab.critical_exponents(4.0)
    check(p_c == 0.5 and p_0 == 0.5, "critical exponents at m = 4")

    data = fdelab.exponent_summary(0.75, 4.0, beta=1.0)
    s17 = math.sqrt(17.0)
    check(abs(data["beta1"] - (5 - s17) / 2) < 1e-12, "beta roots")
    check(abs(data["gamma"] - 4.0) < 1e-12, "gamma at beta = 1")

    q = fdelab.q_admissible(0.75, 3.0, 2.0, "Cor6_5")
    check("admissible_interval" in q, "q interval")

    val, d_v, d_x = fdelab.sigma_i({"kind": "power", "c": 1.0, "a": 1.0}, 0.75, 0.0, 0.0, 2.0)
    check(val > 0 and d_x == 0.0, "regime-I scaled nonlinearity")
    fdelab.sigma_ii('{"kind": "zero"}', 0.75, 0.0, 0.0, 2.0)

    try:
        fdelab.Config("schema_version = 1\nbogus = 1\n[exponents]\np = 0.75\nm = 3\n")
    except ValueError as e:
        check("bogus" in str(e), "unknown keys rejected")
    else:
        check(False, "unknown keys rejected")

    cfg = fdelab.Config.load(str(ROOT / "configs" / "hsz.toml"))
    reports = cfg.run()
    check(all(r["pass"] for r in reports), f"{len(reports)} estimate reports pass")
    check(reports[0]["C_star"] > 0, "C* reported")

    first = cfg.run_json()[0]
    again = fdelab.Config(first).run_json()[0]
    check(first == again, "report re-run is byte-identical")

    csv = fdelab.Config(
        "schema_version = 1\n[exponents]\np = 0.75\nm = 3\n[[tasks]]\nkind = \"exponents\"\n"
    ).sweep("m", [4.0, 5.0, 10.0])
    check(len(csv.strip().splitlines()) == 4, "sweep csv")
    print(json.dumps({"version": fdelab.__version__, "tasks": cfg.tasks}))


if __name__ == "__main__":
    main()
