import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import DenseWalk, coin_entries
from stepcoin.errors import ResourceBudgetError, ValidationError
from stepcoin.walk import (
    CoinParams,
    InitialState,
    Mode,
    Wavefunction,
    apply_coin,
    apply_shift,
    canonical_angle,
    coin_matrix,
    evolve,
    step,
    trajectory,
)

PI = math.pi
angles = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)
DEFAULT = np.array([1, 1j, 0, 0]) / math.sqrt(2)


def single(site, comp, step_=0):
    a = np.zeros(4, complex)
    a[comp] = 1.0
    return Wavefunction.from_mapping({site: a}, step=step_)


class TestCoinMatrix:
    def test_zero_angles_give_identity(self):
        c = coin_matrix(CoinParams(0.0, 0.0, 0.0), 7)
        assert np.array_equal(c.entries, np.eye(4))

    def test_quarter_pi_step_two(self):
        c = coin_matrix(CoinParams.symmetric(PI / 4), 2).entries
        expected = np.zeros((4, 4), complex)
        for i, j in [(0, 3), (3, 0), (1, 2), (2, 1)]:
            expected[i, j] = -1j
        np.testing.assert_allclose(c, expected, atol=1e-15)

    def test_matches_term_by_term_construction(self):
        p = CoinParams(PI / 3, PI / 7, 0.1)
        c = coin_matrix(p, 3)
        np.testing.assert_allclose(c.entries, coin_entries(PI / 3, PI / 7, 0.1, 3), atol=1e-15)
        assert c.is_unitary(1e-12)

    def test_sic_uses_first_step(self):
        p = CoinParams(0.4, 1.1, 0.3, Mode.SIC)
        for t in (1, 2, 17):
            np.testing.assert_array_equal(coin_matrix(p, t).entries, coin_entries(0.4, 1.1, 0.3, 1))
            assert coin_matrix(p, t).step == 1

    def test_sparsity_pattern(self):
        c = coin_matrix(CoinParams(0.3, 0.8, 0.2), 5).entries
        mask = np.zeros((4, 4), bool)
        for i, j in [(0, 0), (0, 3), (3, 0), (3, 3), (1, 1), (1, 2), (2, 1), (2, 2)]:
            mask[i, j] = True
        assert np.all(c[~mask] == 0)

    def test_step_zero_rejected(self):
        with pytest.raises(ValidationError):
            coin_matrix(CoinParams(0.1, 0.1), 0)

    def test_unitary_on_random_draws(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(1000):
            th1, th2, ph = rng.uniform(-PI, PI, 3)
            t = int(rng.integers(1, 500))
            c = coin_matrix(CoinParams(th1, th2, ph), t).entries
            worst = max(worst, np.max(np.abs(c @ c.conj().T - np.eye(4))))
        assert worst <= 1e-12

    def test_entries_read_only(self):
        c = coin_matrix(CoinParams(0.2, 0.2), 1)
        with pytest.raises(ValueError):
            c.entries[0, 0] = 2.0


class TestCanonicalAngle:
    @given(angles)
    def test_range_and_periodicity(self, x):
        r = canonical_angle(x)
        assert -PI < r <= PI
        assert abs(math.remainder(r - x, 2 * PI)) < 1e-9

    def test_pi_stays_pi(self):
        assert canonical_angle(PI) == PI
        assert canonical_angle(-PI) == PI

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            CoinParams(float("nan"), 0.0)
        with pytest.raises(ValidationError):
            CoinParams(0.0, float("inf"))


class TestCoinAndShift:
    def test_identity_coin_keeps_state(self):
        psi = InitialState().wavefunction()
        out = apply_coin(psi, coin_matrix(CoinParams(0, 0), 1))
        np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)

    def test_first_coin_on_default_state(self):
        psi = apply_coin(InitialState().wavefunction(), coin_matrix(CoinParams.symmetric(PI / 4), 1))
        np.testing.assert_allclose(psi.amplitude_at(0, 0), [0.5, 0.5j, 0.5, -0.5j], atol=1e-15)

    def test_shift_component_zero(self):
        out = apply_shift(single((0, 0), 0))
        assert out.step == 1
        np.testing.assert_array_equal(out.amplitude_at(1, 1), [1, 0, 0, 0])
        assert len(out) == 1

    def test_shift_component_three(self):
        out = apply_shift(single((2, 0), 3))
        np.testing.assert_array_equal(out.amplitude_at(1, -1), [0, 0, 0, 1])

    def test_shift_splits_four_components(self):
        psi = Wavefunction.from_mapping({(0, 0): np.array([0.5, 0.5j, 0.5, -0.5j])})
        out = apply_shift(psi)
        assert out.as_mapping().keys() == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        np.testing.assert_allclose(out.amplitude_at(1, 1), [0.5, 0, 0, 0])
        np.testing.assert_allclose(out.amplitude_at(1, -1), [0, 0.5j, 0, 0])
        np.testing.assert_allclose(out.amplitude_at(-1, 1), [0, 0, 0.5, 0])
        np.testing.assert_allclose(out.amplitude_at(-1, -1), [0, 0, 0, -0.5j])

    def test_shift_merges_colliding_components(self):
        psi = Wavefunction.from_mapping({(0, 0): np.array([0.6, 0, 0, 0]), (2, 2): np.array([0, 0, 0, 0.8])})
        out = apply_shift(psi)
        np.testing.assert_allclose(out.amplitude_at(1, 1), [0.6, 0, 0, 0.8])
        assert len(out) == 1

    @settings(max_examples=50, deadline=None)
    @given(angles, angles, angles, st.integers(1, 50))
    def test_coin_preserves_norm(self, th1, th2, ph, t):
        rng = np.random.default_rng(abs(hash((th1, th2, ph, t))) % 2**32)
        amps = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
        amps /= np.linalg.norm(amps)
        psi = Wavefunction(0, [(0, 0), (2, 0), (0, 2), (-2, 2), (4, 4)], amps)
        out = apply_coin(psi, coin_matrix(CoinParams(th1, th2, ph), t))
        assert abs(out.norm_squared() - 1.0) <= 1e-12


class TestStep:
    def test_one_step_quarter_probabilities(self):
        psi = step(InitialState().wavefunction(), CoinParams.symmetric(PI / 4))
        p = dict(zip(map(tuple, psi.sites.tolist()), psi.site_probabilities()))
        assert set(p) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        for v in p.values():
            assert v == pytest.approx(0.25, abs=1e-15)

    def test_zero_angle_is_ballistic(self):
        spinor = np.array([1, 2, 3, 4j]) / math.sqrt(30)
        psi = InitialState(spinor).wavefunction()
        for _ in range(3):
            psi = step(psi, CoinParams(0, 0))
        np.testing.assert_allclose(psi.amplitude_at(3, 3), [spinor[0], 0, 0, 0])
        np.testing.assert_allclose(psi.amplitude_at(3, -3), [0, spinor[1], 0, 0])
        np.testing.assert_allclose(psi.amplitude_at(-3, 3), [0, 0, spinor[2], 0])
        np.testing.assert_allclose(psi.amplitude_at(-3, -3), [0, 0, 0, spinor[3]])

    @given(angles, angles, angles)
    @settings(max_examples=30, deadline=None)
    def test_sdc_equals_sic_at_step_one(self, th1, th2, ph):
        init = InitialState().wavefunction()
        a = step(init, CoinParams(th1, th2, ph, Mode.SDC))
        b = step(init, CoinParams(th1, th2, ph, Mode.SIC))
        np.testing.assert_array_equal(a.sites, b.sites)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)


class TestEvolve:
    def test_zero_steps(self):
        out = evolve(InitialState(), CoinParams.symmetric(0.3), 0)
        assert len(out) == 1 and out[0].step == 0
        np.testing.assert_array_equal(out[0].amplitude_at(0, 0), DEFAULT)

    def test_two_steps_by_hand(self):
        # step 1 leaves 1/2 at (1,1)[0], i/2 at (1,-1)[1], 1/2 at (-1,1)[2], -i/2 at (-1,-1)[3];
        # the t=2 coin swaps 0<->3 and 1<->2 with a factor -i, sending everything back to the origin
        out = evolve(InitialState(), CoinParams.symmetric(PI / 4), 2)
        psi1, psi2 = out[1], out[2]
        np.testing.assert_allclose(psi1.amplitude_at(1, 1), [0.5, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(psi1.amplitude_at(1, -1), [0, 0.5j, 0, 0], atol=1e-15)
        np.testing.assert_allclose(psi1.amplitude_at(-1, 1), [0, 0, 0.5, 0], atol=1e-15)
        np.testing.assert_allclose(psi1.amplitude_at(-1, -1), [0, 0, 0, -0.5j], atol=1e-15)
        assert psi2.as_mapping().keys() == {(0, 0)}
        np.testing.assert_allclose(psi2.amplitude_at(0, 0), [-0.5, -0.5j, 0.5, -0.5j], atol=1e-15)

    def test_snapshot_only(self):
        p = CoinParams(0.3, 0.9, 0.2)
        full = evolve(InitialState(), p, 15)
        snap = evolve(InitialState(), p, 15, snapshot_only=True)
        assert len(snap) == 1
        np.testing.assert_array_equal(snap[0].amplitudes, full[-1].amplitudes)

    def test_norm_after_hundred_steps(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            th1, th2, ph = rng.uniform(-PI, PI, 3)
            psi = evolve(InitialState(), CoinParams(th1, th2, ph), 100, snapshot_only=True)[0]
            assert abs(psi.norm_squared() - 1.0) <= 1e-10

    def test_negative_steps(self):
        with pytest.raises(ValidationError):
            evolve(InitialState(), CoinParams(0.1, 0.1), -1)

    def test_site_budget(self):
        with pytest.raises(ResourceBudgetError):
            evolve(InitialState(), CoinParams(0.1, 0.1), 100, site_budget=150)
        evolve(InitialState(), CoinParams(0.1, 0.1), 10, site_budget=21)

    @settings(max_examples=25, deadline=None)
    @given(angles, angles, angles, st.sampled_from([Mode.SDC, Mode.SIC]), st.integers(-5, 5), st.integers(-5, 5))
    def test_parity_and_light_cone(self, th1, th2, ph, mode, m0, n0):
        init = InitialState(DEFAULT, (m0, n0))
        for psi in trajectory(init, CoinParams(th1, th2, ph, mode), 25):
            psi.check_invariants()
            rel = psi.sites - np.array([m0, n0])
            # walk stays on the two diagonals through the origin
            assert np.all((rel[:, 0] == rel[:, 1]) | (rel[:, 0] == -rel[:, 1]))


class TestOracle:
    @pytest.mark.parametrize("theta", [PI / 3, PI / 4, PI / 7, PI / 8, PI / 11, PI / 12])
    @pytest.mark.parametrize("mode", [Mode.SDC, Mode.SIC])
    def test_general_spinor_and_angles(self, theta, mode):
        spinor = np.array([0.3 + 0.1j, -0.5j, 0.6, 0.2 - 0.4j])
        spinor /= np.linalg.norm(spinor)
        p = CoinParams(theta, 0.7 * theta, 0.37, mode)
        dense = DenseWalk(spinor, 16, p.theta1, p.theta2, p.phi, sic=mode is Mode.SIC)
        for psi in trajectory(InitialState(spinor), p, 15):
            if psi.step:
                dense.step()
            got = np.zeros_like(dense.grid)
            for (m, n), a in zip(psi.sites, psi.amplitudes):
                got[:, m + 16, n + 16] = a
            assert np.max(np.abs(got - dense.grid)) <= 1e-12


class TestWavefunctionType:
    def test_duplicate_sites_rejected(self):
        with pytest.raises(ValidationError):
            Wavefunction(0, [(0, 0), (0, 0)], np.zeros((2, 4)))

    def test_sorted_and_frozen(self):
        psi = Wavefunction(0, [(2, 0), (0, 0)], np.eye(4)[:2])
        assert psi.sites.tolist() == [[0, 0], [2, 0]]
        np.testing.assert_array_equal(psi.amplitude_at(2, 0), [1, 0, 0, 0])
        with pytest.raises(ValueError):
            psi.amplitudes[0, 0] = 3

    def test_mapping_round_trip(self):
        m = {(1, 1): np.array([0.6, 0, 0, 0]), (-1, 1): np.array([0, 0, 0.8j, 0])}
        back = Wavefunction.from_mapping(m, step=1).as_mapping()
        assert back.keys() == m.keys()
        for k in m:
            np.testing.assert_array_equal(back[k], m[k])

    def test_unnormalized_spinor_rejected(self):
        with pytest.raises(ValidationError):
            InitialState(np.array([1, 1, 0, 0]))

    def test_invariant_checker_catches_bad_parity(self):
        psi = Wavefunction(1, [(0, 0)], [[1, 0, 0, 0]])
        with pytest.raises(ValidationError):
            psi.check_invariants()
