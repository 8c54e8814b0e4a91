"""Smoke test for the lerwlab_py extension: python python/smoke_test.py"""

import math
import tempfile
from pathlib import Path

import lerwlab_py as lab


def main():
    d = lab.Domain.rectangle(-3, 3, -3, 3)
    assert len(d) == 49 and d.contains((0, 0)) and d.is_simply_connected()
    assert len(d.boundary_edges()) == 28
    assert lab.radial_identity_residual(lab.Domain.rectangle(-1, 1, -1, 0)) < 1e-10

    dom, a, b = lab.marked_domain(20)
    path = lab.sample_radial_lerw(dom, a, 7)
    assert path[0] == a[1] and path[-1] == (0, 0)
    assert len(set(path)) == len(path)
    assert path == lab.sample_radial_lerw(dom, a, 7)
    chord = lab.sample_chordal_lerw(dom, a, b, 7)
    assert chord[0] == a[1] and chord[-1] == b[1]
    assert abs(lab.m_lerw(dom, a, b, [a[1]], a[0]) - 1.0) < 1e-12

    ens = lab.reweight_lerw(dom, a, b, 0.3, 20.0, 200, 3)
    assert len(ens["weights"]) == 200 and min(ens["weights"]) >= 0.0
    assert 0.0 < ens["ess"] <= 200.0

    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "d.txt"
        dom.write(str(p), 20)
        assert lab.Domain.read(str(p)).sites() == dom.sites()
        try:
            lab.Domain.read(str(Path(tmp) / "missing.txt"))
        except IOError:
            pass
        else:
            raise AssertionError("missing file should raise IOError")

        cfg = "ns = [16, 32]\n"
        r = lab.run("domain", str(Path(tmp) / "out"), cfg)
        assert r["passed"] and r["config_hash"] == lab.config_hash(cfg)
        assert "domains.csv" in r["files"]

    try:
        lab.Domain([(5, 5)])
    except ValueError:
        pass
    else:
        raise AssertionError("domain without the origin should raise ValueError")

    assert abs(lab.hcap([(0.0, 0.0), (0.0, 0.5), (0.0, 1.0)]) - 0.25) < 1e-9

    trace = lab.radial_sle2(0.5, 11)
    assert trace[0][0] == 0.0 and abs(trace[0][1] - 1.0) < 1e-12
    assert all(math.hypot(x, y) <= 1.0 + 1e-9 for _, x, y in trace)

    seg = [(k / 10, k / 10, 0.0) for k in range(11)]
    assert abs(lab.content(seg, 1.0) / 2.0 - 1.0) < 0.05
    lifted = [(t, x, y + 0.5) for t, x, y in seg]
    value, pairs = lab.rho(seg, lifted)
    assert abs(value - 0.5) < 1e-12 and pairs[0] == (0, 0)
    assert abs(lab.rho_hat(seg, lifted) - 0.5) < 1e-12

    assert "seed" in lab.default_config()
    print("lerwlab_py smoke test passed")


if __name__ == "__main__":
    main()
