"""Smoke test for the mpcs extension module.

Build and install the module first, e.g. from the repository root:

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release

then run ``python python/smoke_test.py``.
"""

import math

import mpcs


def main():
    params = mpcs.SystemParams()
    assert params.g_f == 63.0 and params.order == 3

    basis = mpcs.DressedBasis(4)
    assert basis.dim == 9
    assert basis.labels()[:3] == ["|0)", "|1)+", "|1)-"]
    a = basis.operator("a")
    assert abs(a[0][1] - 1 / math.sqrt(2)) < 1e-12

    assert mpcs.bloch_index_count(3, 2) == 13
    assert abs(mpcs.two_state_rho00(1 / math.sqrt(2), 1.0, 1.0) - 13 / 17) < 1e-12

    sol = mpcs.solve_steady(params.with_scan_delta(1.0), params.g_f, q=1)
    assert sol.residual < 1e-10
    assert abs(sum(sol.rho0()[i][i] for i in range(9)) - 1) < 1e-12
    print(f"steady npcr at g~=1, delta3~=1: {sol.npcr():.3e}")

    est = mpcs.estimate_npcr(params.with_scan_delta(1.0), params.g_f, cutoff=1)
    print(f"pathway estimate: {est:.3e} (ratio {est / sol.npcr():.2f})")
    assert 0.4 < est / sol.npcr() < 2.5

    spec = mpcs.spectrum(params, "-1:1:0.5")
    assert len(spec["npcr"]) == 5 and min(spec["npcr"]) >= 0

    bg = mpcs.background(params, "0:1:0.5", nodes=[(40.0, 0.5), (63.0, 0.5)])
    for i, d in enumerate(bg["delta3_npcr"]):
        want = bg["npcr"][i] - bg["npcr_e1_off"][i] - bg["npcr_e2_off"][i] + bg["npcr_e12_off"][i]
        assert abs(d - want) < 1e-15

    try:
        mpcs.SystemParams(gamma_i=-1.0)
    except ValueError as e:
        assert "gamma_I" in str(e)
    else:
        raise AssertionError("negative gamma_I accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
