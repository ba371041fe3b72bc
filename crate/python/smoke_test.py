"""Smoke test for the pyskipfree extension.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import math

import pyskipfree as sf


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    bd = sf.LatticeModel.birth_death(1.0, 2.0)
    an = sf.LatticeAnalysis(bd, horizon=30)
    close(an.g[0][0], 1.0, 1e-10)
    close(an.r[0][0], 1.0, 1e-10)
    close(an.h[0][0], 1.0, 1e-10)
    assert an.regime[0] == "C1_negative_drift"
    close(an.two_sided_exit(2, 3)[0][0], (1 - 2**-3) / (1 - 2**-5), 1e-10)
    w = an.scale(5)
    assert w[0][0][0] == 0.0 and len(w) == 6

    text = '{"type":"lattice","phases":1,"blocks":{"-1":[[2]],"0":[[-3]],"1":[[1]]},"extra_killing":[1]}'
    killed = sf.load_model(text)
    assert killed.is_defective
    ka = sf.LatticeAnalysis(killed)
    cells, mass, tail = ka.extrema("max")
    assert 1 - 1e-6 <= mass + tail <= 1 + 1e-9
    mean, se = sf.simulate_lattice(killed, "extrema", n_paths=20000, seed=7, m=1, l=0)
    exact = next(p for (m, l, p) in cells if (m, l) == (1, 0))[0][0]
    assert abs(mean[0][0] - exact) <= 4 * se[0][0] + 1e-12, (mean, exact, se)

    failed = [c for c in sf.verify_lattice(bd) if c[1] == "fail"]
    assert not failed, failed

    bm = sf.MmbmModel([-1.0], [2.0], [[0.0]], [1.0])
    ma = sf.MmbmAnalysis(bm)
    close(ma.g[0][0], (1 - math.sqrt(5)) / 2, 1e-10)
    assert ma.creeping_residual(1.0) < 1e-8

    try:
        sf.LatticeAnalysis(sf.LatticeModel.birth_death(1.0, 1.0)).occupation(0)
    except sf.SkipfreeError as e:
        assert "NullRecurrent" in str(e)
    else:
        raise AssertionError("null-recurrent occupation should raise")

    print("pyskipfree", sf.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
