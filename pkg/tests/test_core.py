from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DELTA_HALF, random_spinor_vectors
from lzsm.core import (
    Basis,
    BasisMismatchError,
    BlochVector,
    DegeneratePointError,
    DimensionlessTime,
    DomainError,
    Spinor,
    SystemParams,
    adiabaticity,
    arg_gamma_one_minus_i_delta,
    arg_gamma_series,
    basis_matrix,
    basis_transform,
    bloch,
    bloch_components,
    complex_log_gamma,
    gamma_pm,
    lz_probability,
    stokes_phase,
    time_to_tau,
    tau_to_time,
    wrap_phase,
)

# Reference values from mpmath at 30 digits.
ARG_GAMMA_REF = {0.5: 0.24405829890542776, 1.0: 0.3016403204675332, 2.0: -0.12964631630978831,
                 10.0: -13.802912974229901}
STOKES_REF = {0.5: 0.18288287202290342, 1.0: 0.087038483864981508, 10.0: 0.0083361191080044558}


class TestSpinor:
    def test_normalization_enforced(self):
        with pytest.raises(ValueError):
            Spinor(1.0, 0.1)
        s = Spinor(1 / math.sqrt(2), 1j / math.sqrt(2))
        assert s.basis is Basis.DIABATIC

    def test_basis_tag_required_type(self):
        with pytest.raises(TypeError):
            Spinor(1.0, 0.0, "diabatic")

    def test_cross_basis_overlap_rejected(self):
        a = Spinor(1.0, 0.0, Basis.DIABATIC)
        b = Spinor(1.0, 0.0, Basis.ADIABATIC)
        with pytest.raises(BasisMismatchError):
            a.overlap(b)
        assert a.overlap(Spinor(0.0, 1.0)) == 0

    def test_from_population(self):
        s = Spinor.from_population(0.36, 0.7)
        assert s.populations[0] == pytest.approx(0.36, abs=1e-15)
        assert s.relative_phase == pytest.approx(0.7, abs=1e-15)
        with pytest.raises(DomainError):
            Spinor.from_population(1.2)


class TestUnits:
    def test_adiabaticity_examples(self):
        assert adiabaticity(2.0, 1.0) == 1.0
        assert adiabaticity(0.0, 5.0) == 0.0
        gap = math.sqrt(8 * math.log(2) / (2 * math.pi))
        assert adiabaticity(gap, 2.0) == pytest.approx(DELTA_HALF, rel=1e-14)

    def test_adiabaticity_rejects_bad_velocity(self):
        for v in (0.0, -1.0):
            with pytest.raises(DomainError):
                adiabaticity(1.0, v)

    def test_system_params(self):
        p = SystemParams(2.0, 1.0)
        assert p.adiabaticity == 1.0
        assert SystemParams.from_adiabaticity(0.3, 2.5).adiabaticity == pytest.approx(0.3, rel=1e-14)
        with pytest.raises(DomainError):
            SystemParams(-1.0, 1.0)
        with pytest.raises(DomainError):
            SystemParams(1.0, 0.0)

    @given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
    def test_time_round_trip(self, tau, v):
        assert time_to_tau(tau_to_time(tau, v), v) == pytest.approx(tau, rel=1e-14, abs=1e-14)
        assert DimensionlessTime.from_time(DimensionlessTime(tau).to_time(v), v).tau == pytest.approx(
            tau, rel=1e-14, abs=1e-14)

    def test_wrap_phase_interval(self):
        x = np.linspace(-20, 20, 1001)
        w = wrap_phase(x)
        assert np.all(w > -math.pi) and np.all(w <= math.pi)
        assert np.allclose(np.exp(1j * w), np.exp(1j * x))
        assert wrap_phase(-math.pi) == pytest.approx(math.pi)


class TestLzProbability:
    def test_examples(self):
        assert lz_probability(0.0) == 1.0
        assert lz_probability(DELTA_HALF) == pytest.approx(0.5, abs=1e-15)
        assert lz_probability(math.log(math.sqrt(2)) / math.pi) == pytest.approx(0.5, abs=1e-15)

    def test_monotone_on_grid(self):
        d = np.linspace(0, 20, 2001)
        p = lz_probability(d)
        assert np.all(p > 0) and np.all(p <= 1)
        assert np.all(np.diff(p) < 0)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            lz_probability(-0.1)


class TestArgGamma:
    def test_log_gamma_matches_mpmath(self, rng):
        for z in rng.uniform(0.05, 30, 50) + 1j * rng.uniform(-40, 40, 50):
            ref = complex(mpmath.loggamma(z))
            assert abs(complex_log_gamma(z) - ref) < 1e-12 * max(1.0, abs(ref))

    def test_reference_values(self):
        assert arg_gamma_one_minus_i_delta(0.0) == 0.0
        for d, ref in ARG_GAMMA_REF.items():
            assert arg_gamma_one_minus_i_delta(d) == pytest.approx(ref, abs=1e-12)
        assert arg_gamma_series(0.5) == pytest.approx(0.2441, abs=1e-4)

    def test_conjugation_antisymmetry(self):
        plus = float(mpmath.arg(mpmath.gamma(1 + 1j)))
        assert arg_gamma_one_minus_i_delta(1.0) == pytest.approx(-plus, abs=1e-13)

    def test_two_paths_agree(self):
        # Stirling path against the product-series path.
        for d in np.linspace(0, 20, 81):
            assert abs(arg_gamma_one_minus_i_delta(d) - arg_gamma_series(d)) < 1e-10

    def test_branch_is_continuous(self):
        d = np.linspace(0, 20, 20001)
        vals = arg_gamma_one_minus_i_delta(d)
        assert np.max(np.abs(np.diff(vals))) < 0.01


class TestStokesPhase:
    def test_limits_and_references(self):
        assert stokes_phase(0.0) == pytest.approx(math.pi / 4, abs=1e-15)
        assert stokes_phase(1e-12) == pytest.approx(math.pi / 4, abs=1e-10)
        for d, ref in STOKES_REF.items():
            assert stokes_phase(d) == pytest.approx(ref, abs=1e-12)
        assert abs(stokes_phase(10.0)) < 0.01

    def test_finite_and_continuous(self):
        d = np.linspace(1e-9, 20, 20001)
        s = stokes_phase(d)
        assert np.all(np.isfinite(s))
        assert np.max(np.abs(np.diff(s))) < 0.02

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            stokes_phase(-1.0)


class TestBasis:
    def test_gamma_examples(self):
        gp, gm = gamma_pm(0.0, 1.0)
        assert gp == pytest.approx(1 / math.sqrt(2)) and gm == pytest.approx(1 / math.sqrt(2))
        gp, gm = gamma_pm(3.0, 4.0)
        assert gp == pytest.approx(math.sqrt(0.8), abs=1e-15)
        assert gm == pytest.approx(math.sqrt(0.2), abs=1e-15)
        gp, gm = gamma_pm(1e12, 1.0)
        assert gp == pytest.approx(1.0) and gm < 1e-11
        with pytest.raises(DegeneratePointError):
            gamma_pm(0.0, 0.0)

    def test_gamma_definition(self, rng):
        for eps, gap in zip(rng.normal(0, 10, 500), rng.uniform(0, 10, 500)):
            gp, gm = gamma_pm(eps, gap)
            r = math.hypot(eps, gap)
            assert gp * gp + gm * gm == pytest.approx(1.0, abs=1e-14)
            assert gp * gp == pytest.approx(0.5 * (1 + eps / r), abs=1e-14)

    def test_orthogonality(self, rng):
        for eps, gap in zip(rng.normal(0, 10, 1000), rng.uniform(0, 10, 1000)):
            m = basis_matrix(eps, gap)
            assert np.max(np.abs(m.T @ m - np.eye(2))) < 1e-12

    def test_transform_examples(self):
        out = basis_transform(Spinor(1.0, 0.0), 0.0, 1.0, Basis.ADIABATIC)
        assert out.basis is Basis.ADIABATIC
        assert np.allclose(out.vector, [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)
        with pytest.raises(BasisMismatchError):
            basis_transform(out, 0.0, 1.0, Basis.ADIABATIC)

    def test_far_field_maps_basis_states(self):
        up = basis_transform(Spinor(1.0, 0.0), 1e8, 1.0, Basis.ADIABATIC)
        down = basis_transform(Spinor(1.0, 0.0), -1e8, 1.0, Basis.ADIABATIC)
        assert abs(up.a1) == pytest.approx(1.0) and abs(down.a0) == pytest.approx(1.0)

    def test_round_trip(self, rng):
        for vec, eps, gap in zip(random_spinor_vectors(rng, 200), rng.normal(0, 5, 200), rng.uniform(0, 5, 200)):
            s = Spinor.from_vector(vec)
            back = basis_transform(basis_transform(s, eps, gap, Basis.ADIABATIC), eps, gap, Basis.DIABATIC)
            assert np.max(np.abs(back.vector - s.vector)) < 1e-12

    def test_adiabatic_states_are_eigenvectors(self, rng):
        # Rows of M are the upper/lower eigenvectors of H = -(gap sx + eps sz) / 2.
        for eps, gap in zip(rng.normal(0, 5, 50), rng.uniform(0.1, 5, 50)):
            h = -0.5 * np.array([[eps, gap], [gap, -eps]])
            m = basis_matrix(eps, gap)
            e = 0.5 * math.hypot(eps, gap)
            assert np.allclose(h @ m[0], e * m[0], atol=1e-12)
            assert np.allclose(h @ m[1], -e * m[1], atol=1e-12)


class TestBloch:
    def test_examples(self):
        s = 1 / math.sqrt(2)
        assert bloch(Spinor(1, 0)) == BlochVector(0.0, 0.0, 1.0)
        assert np.allclose(bloch(Spinor(s, s)).as_array(), [1, 0, 0])
        assert np.allclose(bloch(Spinor(s, 1j * s)).as_array(), [0, 1, 0])

    def test_unit_norm(self, rng):
        vecs = random_spinor_vectors(rng, 1000)
        norms = np.linalg.norm(bloch_components(vecs), axis=1)
        assert np.max(np.abs(norms - 1)) < 1e-10
        assert bloch(Spinor.from_vector(vecs[0])).norm == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=50)
    @given(st.floats(0, 1), st.floats(-math.pi, math.pi))
    def test_matches_vectorized(self, p0, phi):
        s = Spinor.from_population(p0, phi)
        assert np.allclose(bloch(s).as_array(), bloch_components(s.vector[None, :])[0], atol=1e-15)
