"""Vectorized survival-recursion kernel.

All transcendental quantities (decay factors, their running products) are
computed by the caller with numpy in both backends, so this kernel and its
compiled twin perform the same plain arithmetic in the same order and
return bit-identical arrays. The kernel owns the sequential parts: the
loaded survival recursion, the default-mass bookkeeping, and the draw of
each path's default time from its terminal conditional law.

Shapes: xi is (n, T) clipped Brownian increments; gfac and explam are
(K, n, T) with gfac[k, :, t-1] the one-step survival decay exp(-lambda*dt)
for step t and explam the running product up to and including that step;
uniforms is (n, K); loadings is (K,). clip is the absolute bound on xi.
"""

from __future__ import annotations

import numpy as np

# cap just below the level that would push the survival product to 1
ETA_HEADROOM = 0.999


def simulate_chunk(xi, gfac, explam, uniforms, loadings, clip):
    """Run the loaded survival recursion for one chunk of paths.

    Returns a dict with, per default k: L and Z levels (K, n, T+1), the
    survival-martingale increments dN and the realized loadings eta
    (K, n, T), integer default steps tau (K, n) where T+1 means never, and
    event counters for the monitored positivity invariants.
    """
    n, T = xi.shape
    K = len(loadings)
    L = np.empty((K, n, T + 1))
    Z = np.empty((K, n, T + 1))
    dN = np.empty((K, n, T))
    eta = np.empty((K, n, T))
    tau = np.empty((K, n), dtype=np.int64)
    z_out = 0
    scale_neg = 0

    for k in range(K):
        alpha = loadings[k]
        L[k, :, 0] = 1.0
        Z[k, :, 0] = 1.0
        # masses[s-1] holds the running conditional mass of {tau = s}
        masses = np.zeros((T, n))
        for t in range(1, T + 1):
            g = gfac[k, :, t - 1]
            zprev = Z[k, :, t - 1]
            cap = ETA_HEADROOM * (1.0 / (g * zprev) - 1.0) / clip
            e = np.minimum(alpha * (1.0 - zprev), cap)
            e = np.maximum(e, 0.0)
            eta[k, :, t - 1] = e
            step = 1.0 + e * xi[:, t - 1]
            L[k, :, t] = L[k, :, t - 1] * step
            Z[k, :, t] = L[k, :, t] * explam[k, :, t - 1]
            dN[k, :, t - 1] = explam[k, :, t - 1] * (L[k, :, t] - L[k, :, t - 1])

            if t == 1:
                masses[0] = 1.0 - Z[k, :, 1]
            else:
                new = zprev * (1.0 - g)
                den = 1.0 - zprev
                num = (1.0 - Z[k, :, t]) - new
                scale_neg += int(np.count_nonzero(num < 0.0))
                scale = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
                scale = np.maximum(scale, 0.0)
                masses[: t - 1] *= scale[None, :]
                masses[t - 1] = new
        z_out += int(np.count_nonzero((Z[k, :, 1:] <= 0.0) | (Z[k, :, 1:] >= 1.0)))

        # tau from the terminal conditional law: first level whose
        # cumulative mass exceeds the draw; all T levels below the draw
        # means the survivor mass won and tau lands on T+1, never
        cum = np.cumsum(masses, axis=0)
        tau[k] = 1 + np.sum(cum < uniforms[:, k][None, :], axis=0)

    return {
        "L": L,
        "Z": Z,
        "dN": dN,
        "eta": eta,
        "tau": tau,
        "z_out_of_unit": z_out,
        "scale_clipped": scale_neg,
    }
