from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import DELTA_HALF, random_spinor_vectors, random_unitary
from lzsm import ode
from lzsm.aim import (
    FAR_BASIS_AFTER,
    FAR_BASIS_BEFORE,
    AsymptoticRegimeWarning,
    NonUnitaryError,
    PassageConfig,
    TransferMatrix,
    adiabatic_stage,
    adiabatic_transfer_matrix,
    final_probability_adiabatic,
    final_probability_diabatic,
    generalized_composition,
    lzsm_transfer_matrix,
    propagate,
    single_passage_matrix,
    theta,
    theta_offset,
    unitarity_defect,
    zeta_asymptotic,
    zeta_exact,
)
from lzsm.core import Basis, BasisMismatchError, DomainError, Spinor, arg_gamma_series, basis_matrix, lz_probability, stokes_phase


def zeta_quad(tau, delta):
    val, _ = quad(lambda s: math.sqrt(2 * delta + s * s), 0.0, abs(tau), epsabs=1e-13, epsrel=1e-13)
    return math.copysign(val, tau)


def spinor(alpha, phi):
    return Spinor(alpha, math.sqrt(1 - alpha * alpha) * np.exp(1j * phi))


class TestZeta:
    def test_examples(self):
        assert zeta_exact(3.0, 0.0) == pytest.approx(4.5, abs=1e-14)
        # Quadrature of sqrt(2 + s^2) over [0, 2].
        assert zeta_exact(2.0, 1.0) == pytest.approx(3.5957055775637669, abs=1e-12)

    def test_against_quadrature(self, rng):
        for tau, d in zip(rng.uniform(-30, 30, 100), rng.uniform(0, 5, 100)):
            assert zeta_exact(tau, d) == pytest.approx(zeta_quad(tau, d), abs=1e-10, rel=1e-12)

    def test_odd(self, rng):
        tau, d = rng.uniform(0, 30, 100), rng.uniform(0, 5, 100)
        assert np.allclose(zeta_exact(-tau, d), -zeta_exact(tau, d), atol=0, rtol=1e-15)

    def test_asymptotic_examples(self):
        assert zeta_asymptotic(4.0, 0.0) == pytest.approx(8.0, abs=1e-14)
        assert abs(zeta_asymptotic(20.0, 1.0) - zeta_exact(20.0, 1.0)) < 1e-2
        assert abs(zeta_asymptotic(10.0, DELTA_HALF) - zeta_exact(10.0, DELTA_HALF)) < 1e-3
        with pytest.raises(DomainError):
            zeta_asymptotic(0.0, 1.0)

    def test_asymptotic_bound(self):
        d, t = np.meshgrid(np.linspace(0, 2, 41), np.linspace(10, 200, 96))
        err = np.abs(zeta_exact(t, d) - zeta_asymptotic(t, d))
        assert np.all(err <= 10 * d * d / (t * t) + 1e-12)


class TestLzsmMatrix:
    def test_limits(self):
        # Adiabatic following swaps the diabatic states; the Stokes phase vanishes.
        assert np.allclose(lzsm_transfer_matrix(50.0).matrix, [[0, 1], [-1, 0]], atol=2e-3)
        assert np.allclose(lzsm_transfer_matrix(1e4).matrix, [[0, 1], [-1, 0]], atol=1e-4)
        n0 = lzsm_transfer_matrix(0.0).matrix
        assert abs(n0[0, 0]) == 1.0 and abs(n0[0, 1]) == 0.0
        nh = lzsm_transfer_matrix(DELTA_HALF).matrix
        assert abs(nh[0, 0]) == pytest.approx(1 / math.sqrt(2)) and abs(nh[0, 1]) == pytest.approx(1 / math.sqrt(2))

    def test_structure(self, rng):
        for d in rng.uniform(0, 5, 100):
            n = lzsm_transfer_matrix(d).matrix
            p = lz_probability(d)
            assert unitarity_defect(n) < 1e-12
            assert abs(n[0, 0]) == pytest.approx(math.sqrt(p), abs=1e-14)
            assert abs(n[0, 1]) == pytest.approx(math.sqrt(1 - p), abs=1e-14)
            if p < 1:
                # The off-diagonal carries half of the phase of T = (1 - P) exp(2 i phi_S).
                assert np.angle(n[0, 1]) == pytest.approx(stokes_phase(d), abs=1e-12)
            assert n[1, 0] == pytest.approx(-np.conj(n[0, 1]))

    def test_transfer_matrix_type(self):
        with pytest.raises(NonUnitaryError):
            TransferMatrix(np.array([[1, 0.1], [0, 1]]))
        with pytest.raises(ValueError):
            TransferMatrix(np.eye(3))
        a = TransferMatrix.identity()
        with pytest.raises(BasisMismatchError):
            a @ TransferMatrix.identity(Basis.ADIABATIC)
        n = lzsm_transfer_matrix(0.3)
        assert np.allclose((n @ n.dagger).matrix, np.eye(2), atol=1e-14)


class TestSinglePassage:
    def test_symmetric_specialization(self):
        d, ta = 0.3, 20.0
        n = single_passage_matrix(PassageConfig.symmetric(d, ta)).matrix
        z = zeta_exact(ta, d)
        p = lz_probability(d)
        assert n[0, 0] == pytest.approx(math.sqrt(p))
        assert n[0, 1] == pytest.approx(math.sqrt(1 - p) * np.exp(1j * (2 * z + stokes_phase(d))))

    def test_equals_three_stage_product(self, rng):
        for d, ti, tf in zip(rng.uniform(0, 3, 50), rng.uniform(-40, -5, 50), rng.uniform(5, 40, 50)):
            ref = (adiabatic_stage(zeta_exact(tf, d), before=False) @ lzsm_transfer_matrix(d)
                   @ adiabatic_stage(zeta_exact(-ti, d), before=True)).matrix
            n = single_passage_matrix(PassageConfig(d, ti, tf)).matrix
            assert np.max(np.abs(n - ref)) < 1e-12
            assert unitarity_defect(n) < 1e-12

    def test_adiabatic_limit_and_magnitudes(self):
        n = single_passage_matrix(PassageConfig(40.0, -20.0, 20.0)).matrix
        assert abs(n[0, 0]) < 1e-50 and abs(abs(n[0, 1]) - 1) < 1e-14
        mags = [np.abs(single_passage_matrix(PassageConfig(0.4, ti, tf)).matrix)
                for ti, tf in ((-5, 5), (-20, 7), (-13, 50))]
        assert np.allclose(mags[0], mags[1], atol=1e-15) and np.allclose(mags[0], mags[2], atol=1e-15)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            PassageConfig(0.3, 1.0, 20.0)
        with pytest.raises(DomainError):
            PassageConfig(0.3, -20.0, -1.0)
        with pytest.raises(DomainError):
            PassageConfig(-0.1, -20.0, 20.0)
        with pytest.warns(AsymptoticRegimeWarning):
            PassageConfig(0.3, -3.0, 20.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            PassageConfig(0.3, -5.0, 5.0)

    @pytest.mark.parametrize("delta", [0.05, 0.3, 1.0])
    def test_phase_convention_against_ode(self, delta):
        """With exact basis maps at the real endpoint biases the matrix matches the integrator entrywise."""
        ti, tf = -20.0, 25.0
        u = ode.passage_propagator(delta, ti, tf)
        gap = 2 * math.sqrt(delta)
        eps_i, eps_f = math.sqrt(2) * ti, math.sqrt(2) * tf
        n = single_passage_matrix(PassageConfig(delta, ti, tf)).matrix
        dressed = basis_matrix(eps_f, gap).T @ FAR_BASIS_AFTER @ n @ basis_matrix(eps_i, gap)
        assert np.max(np.abs(dressed - u)) < 2e-3
        # Putting 2 phi_S on the off-diagonal instead is clearly wrong.
        wrong = n.copy()
        wrong[0, 1] *= np.exp(1j * stokes_phase(delta))
        wrong[1, 0] = -np.conj(wrong[0, 1])
        wrong = basis_matrix(eps_f, gap).T @ FAR_BASIS_AFTER @ wrong @ basis_matrix(eps_i, gap)
        assert np.max(np.abs(wrong - u)) > 0.05


class TestPropagate:
    def test_examples(self):
        s = spinor(0.6, 0.3)
        assert np.allclose(propagate(s, TransferMatrix.identity()).vector, s.vector)
        out = propagate(Spinor(1.0, 0.0), lzsm_transfer_matrix(DELTA_HALF))
        assert out.populations[0] == pytest.approx(0.5, abs=1e-14)
        with pytest.raises(BasisMismatchError):
            propagate(Spinor(1.0, 0.0, Basis.ADIABATIC), TransferMatrix.identity())

    def test_norm_preserved(self, rng):
        for vec in random_spinor_vectors(rng, 1000):
            u = random_unitary(rng)
            raw = u @ vec
            assert abs(np.linalg.norm(raw) - 1) < 1e-12
            assert abs(np.linalg.norm(propagate(Spinor.from_vector(vec), TransferMatrix(u)).vector) - 1) < 1e-12


class TestTheta:
    def test_small_delta_example(self):
        t = theta(0.0, -math.sqrt(math.pi / 4), 0.0, zeta_mode="asymptotic")
        assert t.value == pytest.approx(math.pi / 2, abs=1e-14)

    def test_components(self):
        d, ta = DELTA_HALF, 10.0
        t = theta(d, -ta, 0.4, zeta_mode="asymptotic")
        assert t.value == pytest.approx(sum(t.components.values()), abs=1e-15)
        # Term by term with the series evaluation of Arg Gamma.
        ref = math.pi / 4 + arg_gamma_series(d) + ta * ta + 2 * d * math.log(math.sqrt(2) * ta) + 0.4
        assert t.value == pytest.approx(ref, abs=1e-10)

    def test_exact_mode_matches_matrix_phase(self, rng):
        for d, ti in zip(rng.uniform(0, 3, 50), rng.uniform(-40, -5, 50)):
            t = theta(d, ti, 0.0).value
            assert math.cos(t) == pytest.approx(math.cos(theta_offset(d, ti)), abs=1e-12)
            assert t == pytest.approx(2 * zeta_exact(-ti, d) + stokes_phase(d), abs=1e-9)

    def test_periodicity_and_errors(self):
        a = theta(0.3, -10.0, 0.2).value
        b = theta(0.3, -10.0, 0.2 + 2 * math.pi).value
        assert math.cos(a) == pytest.approx(math.cos(b), abs=1e-12)
        with pytest.raises(DomainError):
            theta(0.3, 0.0, 0.0)
        with pytest.raises(ValueError):
            theta(0.3, -10.0, 0.0, zeta_mode="bogus")


class TestFinalProbability:
    def test_examples(self):
        for phi in (0.0, 1.0, -2.0):
            assert final_probability_diabatic(1.0, phi, 0.4, -20.0) == pytest.approx(lz_probability(0.4))
        off = theta_offset(DELTA_HALF, -20.0)
        assert final_probability_diabatic(0.6, -off, DELTA_HALF, -20.0) == pytest.approx(0.98, abs=1e-12)
        assert final_probability_diabatic(0.6, math.pi - off, DELTA_HALF, -20.0) == pytest.approx(0.02, abs=1e-12)
        with pytest.raises(DomainError):
            final_probability_diabatic(1.2, 0.0, 0.3, -20.0)

    def test_matches_matrix(self, rng):
        n = 1000
        alpha, phi = rng.uniform(0, 1, n), rng.uniform(-math.pi, math.pi, n)
        delta, ti, tf = rng.uniform(0, 3, n), rng.uniform(-40, -5, n), rng.uniform(5, 40, n)
        for a, p, d, i, f in zip(alpha, phi, delta, ti, tf):
            out = single_passage_matrix(PassageConfig(d, i, f)).matrix @ spinor(a, p).vector
            assert final_probability_diabatic(a, p, d, i) == pytest.approx(abs(out[0]) ** 2, abs=1e-12)
            assert abs(out[0]) ** 2 + abs(out[1]) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_final_time_independence(self):
        s = spinor(0.55, 1.1)
        probs = [abs((single_passage_matrix(PassageConfig(0.37, -12.0, tf)).matrix @ s.vector)[0]) ** 2
                 for tf in (5.0, 10.0, 50.0)]
        assert max(probs) - min(probs) < 1e-12


class TestAdiabaticBasis:
    def test_limits_and_unitarity(self, rng):
        assert np.allclose(np.abs(adiabatic_transfer_matrix(40.0, 20.0).matrix), np.eye(2), atol=1e-12)
        assert np.allclose(np.abs(adiabatic_transfer_matrix(0.0, 20.0).matrix), [[0, 1], [1, 0]], atol=1e-15)
        for d, ta in zip(rng.uniform(0, 5, 100), rng.uniform(5, 50, 100)):
            assert unitarity_defect(adiabatic_transfer_matrix(d, ta).matrix) < 1e-12

    def test_conjugation_by_far_field_maps(self, rng):
        for d, ta in zip(rng.uniform(0, 3, 50), rng.uniform(5, 50, 50)):
            n = single_passage_matrix(PassageConfig.symmetric(d, ta)).matrix
            ref = FAR_BASIS_AFTER @ n @ FAR_BASIS_BEFORE.T
            assert np.max(np.abs(adiabatic_transfer_matrix(d, ta).matrix - ref)) < 1e-12

    def test_probability_examples(self):
        assert final_probability_adiabatic(1.0, 0.3, 0.4, 20.0) == pytest.approx(1 - lz_probability(0.4))
        off = theta_offset(DELTA_HALF, 20.0)
        b = 1 / math.sqrt(2)
        values = {round(final_probability_adiabatic(b, phi - off, DELTA_HALF, 20.0), 12) for phi in (0, math.pi)}
        assert values == {0.0, 1.0}

    def test_end_to_end_through_diabatic_pipeline(self, rng):
        big = 1e13
        for _ in range(200):
            b1, phi, d, ta = rng.uniform(0, 1), rng.uniform(-3, 3), rng.uniform(0, 3), rng.uniform(5, 40)
            gap = 2 * math.sqrt(d)
            ad_in = spinor(b1, phi).vector
            dia_in = basis_matrix(-big, gap).T @ ad_in
            dia_out = single_passage_matrix(PassageConfig.symmetric(d, ta)).matrix @ dia_in
            ad_out = basis_matrix(big, gap) @ dia_out
            p = final_probability_adiabatic(b1, phi, d, ta)
            assert abs(ad_out[0]) ** 2 == pytest.approx(p, abs=1e-10)


class TestGeneralizedComposition:
    def test_identity(self):
        s = spinor(0.6, 0.8)
        out, p = generalized_composition(np.eye(2), 1.3, 2.1, s)
        assert p == pytest.approx(0.36, abs=1e-14)
        assert out.populations[0] == pytest.approx(0.36, abs=1e-14)

    def test_specializes_to_single_passage(self, rng):
        for _ in range(100):
            a, phi, d, ta = rng.uniform(0, 1), rng.uniform(-3, 3), rng.uniform(0, 3), rng.uniform(5, 40)
            z = zeta_exact(ta, d)
            out, p = generalized_composition(lzsm_transfer_matrix(d), z, z, spinor(a, phi))
            ref = final_probability_diabatic(a, phi, d, -ta)
            assert p == pytest.approx(ref, abs=1e-12)
            assert out.populations[0] == pytest.approx(ref, abs=1e-12)

    def test_random_unitaries(self, rng):
        for vec in random_spinor_vectors(rng, 1000):
            u = random_unitary(rng)
            z1, z2 = rng.uniform(-50, 50, 2)
            s = Spinor.from_vector(vec)
            out, p = generalized_composition(u, z1, z2, s)
            explicit = np.diag([np.exp(1j * z2), np.exp(-1j * z2)]) @ u @ np.diag([np.exp(-1j * z1), np.exp(1j * z1)]) @ vec
            assert p == pytest.approx(abs(explicit[0]) ** 2, abs=1e-12)
            assert np.max(np.abs(out.vector - explicit)) < 1e-12

    def test_non_unitary_rejected(self):
        with pytest.raises(NonUnitaryError):
            generalized_composition(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.0, 0.0, Spinor(1.0, 0.0))


class TestOracleAgreement:
    """Closed form against direct integration on a (delta, alpha, phi) grid."""

    DELTAS = (0.05, DELTA_HALF, 0.5, 1.0, 2.0)
    ALPHAS = np.linspace(0.2, 1.0, 5)
    PHIS = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    CFG = ode.IntegratorConfig(rtol=1e-11, atol=1e-13)

    def _errors(self, tau):
        errs = []
        for d in self.DELTAS:
            rep = ode.compare_aim_vs_ode(self.ALPHAS[:, None], self.PHIS[None, :], d, tau, self.CFG)
            errs.append(rep.error)
        return np.array(errs)

    def test_error_bounded_by_endpoint_mismatch(self):
        # Finite sweeps start and end O(Delta / eps) away from the diabatic states.
        for tau in (10.0, 20.0, 40.0):
            errs = self._errors(tau)
            for d, e in zip(self.DELTAS, errs):
                assert e.max() <= math.sqrt(2 * d) * 2 / tau

    def test_error_decreases_with_sweep_amplitude(self):
        means = [self._errors(tau).mean() for tau in (10.0, 20.0, 40.0)]
        assert means[0] > means[1] > means[2]

    def test_dressed_model_agrees_tightly(self):
        for d in self.DELTAS:
            gap = 2 * math.sqrt(d)
            u = ode.passage_propagator(d, -20.0, 20.0, self.CFG)
            n = single_passage_matrix(PassageConfig.symmetric(d, 20.0)).matrix
            dressed = basis_matrix(20 * math.sqrt(2), gap).T @ FAR_BASIS_AFTER @ n @ basis_matrix(-20 * math.sqrt(2), gap)
            a = self.ALPHAS[:, None]
            vec = np.stack([a + 0 * self.PHIS, np.sqrt(1 - a * a) * np.exp(1j * self.PHIS)])
            diff = np.abs((dressed @ vec.reshape(2, -1))[0]) ** 2 - np.abs((u @ vec.reshape(2, -1))[0]) ** 2
            assert np.max(np.abs(diff)) < 1e-3
