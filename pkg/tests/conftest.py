"""Session-wide fixtures: the expensive surgery chain is built once.

The chain seed -> graft -> rebalance -> primitive -> embedded primitive is
the canonical input for the bundle, certificate, and tangency tests; every
stage is deterministic, so sharing it across tests is safe.
"""

import numpy as np
import pytest

from engelforge import (
    ensure_embedded,
    graft,
    primitive,
    rebalance,
    shipped_seed,
)


@pytest.fixture(scope="session")
def seed_pair():
    """(convex seed curve, its graftable arc)."""
    return shipped_seed()


@pytest.fixture(scope="session")
def grafted_once(seed_pair):
    """One-wiggle graft of the shipped seed at homotopy time 1."""
    curve, arc = seed_pair
    return graft(curve, arc, 1, 1.0)


@pytest.fixture(scope="session")
def fiber_curve(grafted_once):
    """Zero-integral reparametrization of the one-wiggle graft."""
    out, _diffeo = rebalance(grafted_once)
    return out


@pytest.fixture(scope="session")
def nu_embedded(fiber_curve):
    """Embedded fibrewise primitive of the zero-integral fiber curve."""
    return ensure_embedded(primitive(fiber_curve), rng=np.random.default_rng(0))
