from __future__ import annotations

import math

import numpy as np
import pytest

# Adiabaticity at which exp(-2 pi delta) = 1/2.
DELTA_HALF = math.log(2.0) / (2.0 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_spinor_vectors(rng, n):
    v = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return v / np.linalg.norm(v, axis=1)[:, None]


def random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
