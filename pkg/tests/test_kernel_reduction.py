import math

import numpy as np
import pytest

from bosonlab.kernel_reduction import (
    RadialProfile,
    change_of_variable,
    cos_star,
    kernel_check,
    oracle_I,
    reduce_I,
    rows_csv,
    temporal_bound,
)

ONE = RadialProfile.indicator(1.0, 2.0)


def massless_indicator(tau, xi):
    """Closed form for phi = psi = 1_[1, 2], m = 0, |tau| < xi."""
    lo = max(1.0, 1.0 + tau, 0.5 * (tau + xi))
    hi = min(2.0, 2.0 + tau)
    if hi <= lo:
        return 0.0
    prim = lambda r: r**3 / 3 - tau * r**2 / 2  # noqa: E731
    return 2 * math.pi / xi * (prim(hi) - prim(lo))


def test_zero_profile_gives_zero():
    z = RadialProfile.zero()
    assert reduce_I(z, ONE, 0.0, 1.0, 1.0) == 0.0
    assert reduce_I(ONE, z, 0.0, 1.0, 0.0) == 0.0
    assert oracle_I(z, ONE, 0.0, 1.0, 1.0).value == 0.0


def test_indicator_at_rest():
    assert reduce_I(ONE, ONE, 0.0, 1.0, 0.0) == pytest.approx(14 * math.pi / 3, rel=1e-10)


@pytest.mark.parametrize("tau, xi", [(0.5, 1.0), (-0.5, 1.0), (0.3, 2.0), (-1.2, 2.0), (0.1, 0.5)])
def test_massless_indicator_closed_form(tau, xi):
    assert reduce_I(ONE, ONE, tau, xi, 0.0) == pytest.approx(massless_indicator(tau, xi), rel=1e-9, abs=1e-12)


def test_gaussian_matches_oracle():
    phi, psi = RadialProfile.gaussian(1.5, 0.4), RadialProfile.gaussian(1.2, 0.5)
    red = reduce_I(phi, psi, 0.3, 0.8, 1.0)
    orc = oracle_I(phi, psi, 0.3, 0.8, 1.0)
    assert orc.converged
    assert red == pytest.approx(orc.value, rel=1e-2)


def test_oracle_is_rotation_invariant():
    phi, psi = RadialProfile.gaussian(1.5, 0.4), RadialProfile.gaussian(1.2, 0.5)
    kw = dict(eps_delta=2e-2, n_rho=64, n_cos=1024)
    a = oracle_I(phi, psi, 0.2, 1.0, 1.0, **kw).value
    b = oracle_I(phi, psi, 0.2, 1.0, 1.0, direction=(1.0, 0.0, 0.0), n_az=512, **kw).value
    assert b == pytest.approx(a, rel=1e-4)


def test_vanishes_beyond_temporal_bound():
    phi, psi = RadialProfile.gaussian(1.5, 0.4), RadialProfile.gaussian(1.2, 0.5)
    for m in (0.0, 1.0):
        for xi in (0.5, 2.0):
            bound = temporal_bound(phi, xi, m)
            for tau in (1.1 * bound, -1.1 * bound):
                assert reduce_I(phi, psi, tau, xi, m) == 0.0


def test_temporal_bound_formula():
    phi = RadialProfile.indicator(0.0, 3.0)
    assert temporal_bound(phi, 1.0, 0.0) == pytest.approx(7.0)
    assert temporal_bound(phi, 1.0, 2.0) == pytest.approx(7.0 / 4.0)
    assert temporal_bound(RadialProfile.zero(), 1.0, 0.0) == 0.0


def test_massless_change_of_variable_is_a_shift():
    rng = np.random.default_rng(0)
    tau = rng.uniform(-2, 2, 20)
    rho = np.abs(tau) + rng.uniform(0.01, 5, 20)
    for t, r in zip(tau, rho):
        assert change_of_variable(t, r, 0.0) == pytest.approx(r - t, rel=1e-14)


def test_constraint_geometry():
    """On the constraint, |xi - eta| computed from the cosine equals chi."""
    rng = np.random.default_rng(1)
    m, xi = 1.0, 1.3
    for _ in range(20):
        rho = rng.uniform(0.5, 3.0)
        tau = rng.uniform(-0.5, 0.5)
        a = float(cos_star(tau, rho, xi, m))
        if abs(a) > 1 or math.sqrt(rho * rho + m * m) - tau < m:
            continue
        dist = math.sqrt(xi * xi + rho * rho - 2 * xi * rho * a)
        assert dist == pytest.approx(float(change_of_variable(tau, rho, m)), rel=1e-12)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        reduce_I(ONE, ONE, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        reduce_I(ONE, ONE, 0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        reduce_I(ONE, ONE, 0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        oracle_I(ONE, ONE, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        RadialProfile.indicator(2.0, 1.0)
    with pytest.raises(ValueError):
        RadialProfile("triangle")
    with pytest.raises(ValueError):
        RadialProfile.tabulated([0.0, 0.5, 0.4], [1.0, 1.0, 1.0])


def test_profiles_evaluate():
    g = RadialProfile.gaussian(1.0, 0.5)
    assert float(g(1.0)) == 1.0 and float(g(10.0)) == 0.0
    t = RadialProfile.tabulated([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
    assert float(t(0.5)) == pytest.approx(1.0)
    assert t.support == (0.0, 2.0)
    assert ONE.to_dict() == {"kind": "indicator", "params": [1.0, 2.0]}


def test_kernel_check_rows_and_csv():
    phi, psi = RadialProfile.gaussian(1.5, 0.4), RadialProfile.gaussian(1.2, 0.5)
    rows = kernel_check(phi, psi, taus=(0.0, 50.0), xis=(1.0,), masses=(1.0,), n_rho=64, n_cos=1024, eps_delta=1e-2)
    assert len(rows) == 2
    assert rows[1].both_vanish and rows[1].rel_err == 0.0
    assert not rows[0].both_vanish and rows[0].rel_err < 0.05
    text = rows_csv(rows)
    assert text.splitlines()[0] == "tau,ximag,m,reduced,oracle,rel_err"
    assert len(text.splitlines()) == 3
