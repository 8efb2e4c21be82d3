"""Numpy implementations of the hot loops; same signatures as ``_kernels``."""
import numpy as np


def forcing_transform(table, p, mode=0):
    """Average (mode 0) or take the support minimum (mode 1) over each free component.

    Entry ``w`` of the result treats components whose bit is set in ``w`` as
    repaired (pinned to 1) and the others as random under ``p``.
    """
    t = np.array(table, dtype=np.float64)
    n = len(p)
    for i in range(n):
        v = t.reshape(-1, 2, 1 << i)
        lo = v[:, 0, :]
        hi = v[:, 1, :]
        pi = float(p[i])
        if mode == 0:
            new = pi * hi + (1.0 - pi) * lo
        elif pi <= 0.0:
            new = lo.copy()
        elif pi >= 1.0:
            new = hi.copy()
        else:
            new = np.minimum(lo, hi)
        v[:, 0, :] = new
    return t


def nash_mask(phi, c, tol):
    phi = np.asarray(phi, dtype=np.float64)
    n = len(c)
    words = np.arange(1 << n)
    ok = np.ones(1 << n, dtype=bool)
    for i in range(n):
        bit = 1 << i
        gain = phi - phi[words ^ bit]
        has = (words & bit) != 0
        ok &= np.where(has, c[i] <= gain + tol, c[i] >= -gain - tol)
    return ok


def nash_mask_batch(phi, cmat, tol):
    phi = np.asarray(phi, dtype=np.float64)
    cmat = np.asarray(cmat, dtype=np.float64)
    rows, n = cmat.shape
    words = np.arange(1 << n)
    ok = np.ones((rows, 1 << n), dtype=bool)
    for i in range(n):
        bit = 1 << i
        gain = phi - phi[words ^ bit]
        has = (words & bit) != 0
        ci = cmat[:, i : i + 1]
        ok &= np.where(has, ci <= gain + tol, ci >= -gain - tol)
    return ok


def csg_nash_mask(profiles, net, options, tol):
    """Equilibrium mask over cost-sharing profiles.

    ``net[a]`` is the cost of action ``a`` left after its subsidy, and
    ``options`` is an (agents x width) matrix of available action indices padded
    with -1.
    """
    profiles = np.asarray(profiles)
    P, N = profiles.shape
    A = len(net)
    rows = np.arange(P)
    counts = np.zeros((P, A), dtype=np.int32)
    for i in range(N):
        counts[rows, profiles[:, i]] += 1
    ok = np.ones(P, dtype=bool)
    for i in range(N):
        own = profiles[:, i]
        own_cost = net[own] / counts[rows, own]
        for a in options[i]:
            if a < 0:
                break
            k = counts[:, a] + (own != a)
            ok &= own_cost <= net[a] / k + tol
    return ok
