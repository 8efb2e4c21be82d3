import subprocess
import sys

import numpy as np
import pytest

from subsidylab import _fallback, kernels

compiled = pytest.importorskip("subsidylab._kernels", reason="compiled extension not built")


@pytest.mark.parametrize("n", [1, 3, 6, 10])
@pytest.mark.parametrize("mode", [0, 1])
def test_forcing_transform_backends_agree(n, mode):
    rng = np.random.default_rng(n + 10 * mode)
    table = rng.integers(0, 2, 1 << n).astype(np.float64)
    p = rng.uniform(0, 1, n)
    p[0] = 0.0
    if n > 1:
        p[1] = 1.0
    a = _fallback.forcing_transform(table, p, mode)
    b = compiled.forcing_transform(table, p, mode)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("n", [1, 4, 8])
def test_nash_masks_backends_agree(n):
    rng = np.random.default_rng(n)
    phi = rng.uniform(0, 1, 1 << n)
    c = rng.uniform(-0.5, 0.5, n)
    assert np.array_equal(_fallback.nash_mask(phi, c, 1e-9), compiled.nash_mask(phi, c, 1e-9))
    cmat = rng.uniform(-0.5, 0.5, (50, n))
    assert np.array_equal(_fallback.nash_mask_batch(phi, cmat, 1e-9), compiled.nash_mask_batch(phi, cmat, 1e-9))


def test_nash_mask_ties_are_equilibria_on_both_backends():
    # two states with identical reliability: the agent is indifferent at zero cost
    phi = np.array([0.5, 0.5])
    for impl in (_fallback, compiled):
        assert impl.nash_mask(phi, np.array([0.0]), 1e-9).tolist() == [True, True]


def test_csg_mask_backends_agree():
    from subsidylab.game import CostSharingGame

    rng = np.random.default_rng(3)
    for _ in range(20):
        N, A = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        avail = [set(rng.choice(N, size=int(rng.integers(1, N + 1)), replace=False).tolist()) for _ in range(A)]
        for i in range(N):
            avail[int(rng.integers(A))].add(i)
        g = CostSharingGame(N, tuple(f"a{k}" for k in range(A)), tuple(avail), ((1.0, rng.integers(0, 5, A)),))
        prof, opts = g.profiles(), g.option_matrix()
        net = g.expected_costs() - rng.uniform(0, 1, A)
        a = _fallback.csg_nash_mask(prof, net, opts, 1e-9)
        b = compiled.csg_nash_mask(prof, net, opts, 1e-9)
        assert np.array_equal(a, b)


def test_pure_env_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "import subsidylab.kernels as k; print(k.BACKEND)"],
        env={"SUBSIDYLAB_PURE": "1", "PATH": ""}, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == "cython"
