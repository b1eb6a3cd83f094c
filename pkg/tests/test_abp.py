import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abpcap.abp import (
    CircleProfile,
    GeneratorSpec,
    abp_measure_exact,
    abp_measure_mc,
    cell_diagnostics,
    check_crossing_structure,
    chebyshev_grid,
    crossing_count,
    fuzz_abp,
    phi_H,
    phi_K,
    phi_scan,
    replay_config,
    sample_disk,
)
from abpcap.convexbody import ContactConfig
from abpcap.errors import InvalidLambda, NearBreakpoint, NoCellMeetsDisk
from abpcap.geom2d import ConvexCell, cap_area_absolute, cap_volume, cell_disk_area
from abpcap.partition import CellPartition, build_cells

from conftest import facet_config, lambdas, random_config, seeds, strip_config, two_point_config

ONE = ContactConfig([[0.3, 0.4]], [[0.6, 0.8]], [1.0])


# ------------------------------------------------------------- measure


def test_single_contact_measure_is_half_disk():
    assert abp_measure_exact(build_cells(ONE), 0.0).value == pytest.approx(math.pi / 2, abs=1e-12)


def test_two_point_measure():
    res = abp_measure_exact(build_cells(two_point_config()), 0.0)
    assert res.value == pytest.approx(3 * math.pi / 4, abs=1e-12)
    assert res.per_cell == pytest.approx((3 * math.pi / 8, 3 * math.pi / 8), abs=1e-12)


@pytest.mark.parametrize("lam", [-0.7, 0.0, 0.4, 0.95])
def test_facet_measure_equals_cap(lam):
    part = build_cells(facet_config((0.3, -0.1, 0.5, 0.2)))
    assert abp_measure_exact(part, lam).value == pytest.approx(cap_volume(2, lam, 1.0), abs=1e-12)


def test_measure_rejects_bad_lambda():
    with pytest.raises(InvalidLambda):
        abp_measure_exact(build_cells(ONE), 1.0)


def test_sample_disk_is_inside():
    z = sample_disk(np.random.default_rng(0), 5000, 2.0)
    assert z.shape == (5000, 2)
    assert np.all(np.hypot(z[:, 0], z[:, 1]) < 2.0)


@pytest.mark.parametrize(
    "cfg,lam,expected",
    [
        (ONE, 0.0, math.pi / 2),
        (two_point_config(), 0.0, 3 * math.pi / 4),
        (facet_config(), 0.999, cap_volume(2, 0.999, 1.0)),
    ],
    ids=["one", "two_point", "thin_cap"],
)
def test_monte_carlo_oracle(cfg, lam, expected):
    res = abp_measure_mc(cfg, lam, 1.0, 10**6, 11)
    assert abs(res.value - expected) <= 3 * res.stderr + 1e-12


@settings(max_examples=8, deadline=None)
@given(seeds, lambdas)
def test_exact_matches_monte_carlo(seed, lam):
    cfg = random_config(seed)
    exact = abp_measure_exact(build_cells(cfg), lam).value
    mc = abp_measure_mc(cfg, lam, 1.0, 10**6, seed)
    # 4 sigma keeps the false-failure rate negligible over many draws
    assert abs(exact - mc.value) <= 4 * mc.stderr + 1e-12


@settings(max_examples=150, deadline=None)
@given(seeds, lambdas)
def test_abp_inequality(seed, lam):
    part = build_cells(random_config(seed))
    assert abp_measure_exact(part, lam).value >= cap_volume(2, lam, 1.0) - 1e-9


@settings(max_examples=100, deadline=None)
@given(seeds, lambdas, st.floats(min_value=0.05, max_value=0.99))
def test_scaled_inequality(seed, lam, r):
    part = build_cells(random_config(seed))
    assert abp_measure_exact(part, lam, r).value >= cap_area_absolute(lam, r) - 1e-9


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_measure_and_phi_are_monotone(seed):
    part = build_cells(random_config(seed))
    grid = chebyshev_grid(65)
    meas = np.array([abp_measure_exact(part, t).value for t in grid])
    assert np.all(np.diff(meas) <= 1e-12)
    assert np.all(np.diff(phi_K(part, grid)) <= 1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=6), lambdas)
def test_refinement_shrinks_cells_and_keeps_bound(seed, extra, lam):
    rng = np.random.default_rng(seed)
    fine = random_config(seed, n=int(rng.integers(2, 10)) + extra)
    coarse = fine.subset(list(range(len(fine) - extra)))
    a, b = build_cells(coarse), build_cells(fine)
    for i in coarse_active(a):
        assert cell_disk_area(b.cells[i], 2.0) <= cell_disk_area(a.cells[i], 2.0) + 1e-9
    assert abp_measure_exact(b, lam).value >= cap_volume(2, lam, 1.0) - 1e-9


def coarse_active(part):
    return [i for i in part.active if not part.cells[i].empty]


# ----------------------------------------------------------------- phi


def test_phi_H_values():
    assert phi_H(0.0) == pytest.approx(math.pi, abs=1e-15)
    assert phi_H(0.5) == pytest.approx(2.0943951023931953, abs=1e-15)


def test_two_point_phi():
    assert phi_K(build_cells(two_point_config()), 0.0) == pytest.approx(1.5 * math.pi, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_phi_endpoints(seed):
    part = build_cells(random_config(seed))
    lo, hi = phi_K(part, np.array([-1.0, 1.0]))
    assert lo == pytest.approx(2 * math.pi, abs=1e-9)
    assert hi == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_slice_inequality_and_derivative(seed):
    scan = phi_scan(build_cells(random_config(seed)), 129)
    assert scan.min_margin >= -1e-9
    assert scan.max_derivative_error <= 1e-4


def test_scan_single_cell_is_tight():
    scan = phi_scan(build_cells(ONE), 101)
    assert np.max(np.abs(scan.margin)) <= 1e-12


def test_scan_two_point_is_strict():
    assert phi_scan(build_cells(two_point_config()), 101).min_margin > 0


def test_scan_facet_is_tight():
    scan = phi_scan(build_cells(facet_config((0.3, -0.1, 0.5, 0.2))), 257)
    assert np.max(np.abs(scan.margin)) <= 1e-9


def test_scan_rows_and_grid():
    grid = chebyshev_grid(9)
    assert np.all(np.abs(grid) < 1) and np.all(np.diff(grid) > 0)
    assert grid == pytest.approx(-grid[::-1], abs=1e-15)
    rows = list(phi_scan(build_cells(ONE), 9).rows())
    assert len(rows) == 9 and all(r[4] == 2 for r in rows)
    with pytest.raises(ValueError):
        phi_scan(build_cells(ONE), 1)


def test_scan_nudges_breakpoint_levels():
    # two-point arcs end at levels cos(3pi/4) and 1; force the grid to hit 0
    part = build_cells(ContactConfig([[0, 1], [0, -1]], [[0, 1], [0, -1]], [0, 0]))
    prof = CircleProfile(part)
    assert prof.distance_to_breakpoint(0.0)[0] == pytest.approx(0.0, abs=1e-15)
    scan = phi_scan(part, 3)
    assert abs(scan.lam[1]) == pytest.approx(1e-8)


# ----------------------------------------------------------- crossings


@pytest.mark.parametrize("lam", [-0.9, 0.0, 0.6])
def test_single_cell_crossings(lam):
    assert crossing_count(build_cells(ONE), lam) == 2


def test_two_point_crossings_above_l():
    assert crossing_count(build_cells(two_point_config()), 0.9) >= 2


@pytest.mark.parametrize("lam", [-0.55, 0.13, 0.77])
def test_facet_crossings_are_two(lam):
    assert crossing_count(build_cells(facet_config((0.3, -0.1, 0.5, 0.2))), lam) == 2


def test_crossing_count_near_breakpoint():
    part = build_cells(two_point_config())
    with pytest.raises(NearBreakpoint):
        crossing_count(part, -math.sqrt(2) / 2)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_crossing_structure(seed):
    chk = check_crossing_structure(build_cells(random_config(seed)))
    assert chk.ok
    if chk.m2_minus_l is not None:
        assert chk.m2_minus_l >= -1e-9


# --------------------------------------------------------- diagnostics


def test_single_cell_diagnostics():
    d = cell_diagnostics(build_cells(ONE))
    assert (d.entry[0], d.exit[0]) == (-1.0, 1.0)
    assert not d.disconnecting[0]
    assert d.Lambda == -1.0
    assert d.l is None and d.m2 is None


def test_two_point_diagnostics():
    d = cell_diagnostics(build_cells(two_point_config()))
    s = math.sqrt(2) / 2
    assert d.entry == pytest.approx([-s, -s], abs=1e-12)
    assert d.exit == pytest.approx([1.0, 1.0], abs=1e-12)
    assert d.l == pytest.approx(s, abs=1e-12)
    assert d.m2 >= d.l
    assert d.origin == 0 and d.ordering == [0, 1]


def test_strip_is_disconnecting_and_sides_are_free():
    part = build_cells(strip_config())
    d = cell_diagnostics(part, check_pointprop=True)
    assert d.disconnecting == [True, False, False]
    assert d.extremal[0]
    assert d.origin == 0
    # each side holds one cap cell reaching its apex
    assert d.M_bar == pytest.approx(1.0, abs=1e-12)
    assert d.l == pytest.approx(math.sqrt(3) / 2, abs=1e-12)


def test_no_cell_meets_disk():
    part = CellPartition.from_cells([ConvexCell.nothing()], [[1.0, 0.0]])
    with pytest.raises(NoCellMeetsDisk):
        cell_diagnostics(part)


# ---------------------------------------------------------------- fuzz


def test_fuzz_at_zero_has_no_violations():
    rep = fuzz_abp(GeneratorSpec(kinds=("polygon",), lam=0.0), 300, seed=3)
    assert rep.violations == [] and rep.min_margin >= -1e-9


def test_fuzz_equal_normals_is_tight():
    rep = fuzz_abp(GeneratorSpec(equal_normals=True, phi_grid=33), 200, seed=4)
    assert rep.violations == []
    assert abs(rep.min_margin) <= 1e-9 and abs(rep.min_phi_margin) <= 1e-9


def test_fuzz_is_deterministic_and_thread_independent(monkeypatch):
    gen = GeneratorSpec(vertex_prob=0.3, phi_grid=17, structure=True)
    a = fuzz_abp(gen, 60, seed=9).to_json()
    monkeypatch.setenv("ABPCAP_THREADS", "2")
    b = fuzz_abp(gen, 60, seed=9).to_json()
    assert a == b
    assert a["violations"] == []


def test_replay_reproduces_trial():
    gen = GeneratorSpec()
    cfg, lam = replay_config(gen, 5, 7)
    again, lam2 = replay_config(gen, 5, 7)
    assert lam == lam2 and np.array_equal(cfg.points, again.points)


def test_fuzz_rejects_zero_trials():
    with pytest.raises(ValueError):
        fuzz_abp(GeneratorSpec(), 0, seed=0)
