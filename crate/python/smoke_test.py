"""Smoke test for the pygaseq extension.

Build and install first:
    pip install --no-build-isolation ./crates/py
Then run from the repository root:
    python3 python/smoke_test.py
"""

from pathlib import Path

import pygaseq

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> None:
    # Monopoly: q = (10 - 2) / (1 + 2) = 8/3, price = 10 - q.
    mono = pygaseq.Scenario.load(SCENARIOS / "monopoly.toml")
    assert mono.validate() == []
    sol = mono.solve()
    q = sol.value("qC[F1,n1,t1]")
    assert abs(q - 8 / 3) < 1e-9, q
    assert abs(sol.value("lambdaC[n1,t1]") - (10 - 8 / 3)) < 1e-9
    assert max(sol.residuals[:2]) < 1e-9

    again = pygaseq.Scenario.from_toml(mono.to_toml())
    assert again.labels() == mono.labels()

    bad = pygaseq.Scenario.load(SCENARIOS / "invalid_theta.toml")
    assert bad.validate(), "theta above one must be rejected"
    try:
        bad.solve()
    except pygaseq.ValidationError:
        pass
    else:
        raise AssertionError("inadmissible scenario solved")

    cf = pygaseq.Scenario.load(SCENARIOS / "hub_cf.toml").explore(jobs=2)
    bc = pygaseq.Scenario.load(SCENARIOS / "hub_bc.toml").explore(jobs=2)
    assert cf.ambiguous > 0
    widths = {g: w for g, w, _ in cf.groups()}
    assert widths["sZ"] < 1e-6 and widths["lambdaZ"] < 1e-6, widths
    rows = cf.compare(bc)
    assert len(rows) == len(cf.intervals())
    assert "Maximum difference" in cf.report_text()

    print(f"pygaseq smoke test passed: {len(rows)} components compared, {cf.ambiguous} ambiguous under CF")


if __name__ == "__main__":
    main()
