"""Numpy kernel for batches of Gram-Schmidt walks.

All replicates advance in lockstep: one pass of the loop performs one walk
iteration for every replicate that is not yet integral.

Randomness protocol (shared with the Cython kernel): replicate ``r`` owns the
row ``uniforms[r]`` of length ``2n``. The k-th pivot selection reads
``uniforms[r, k]`` and picks the ``floor(U * |alive|)``-th alive unit in index
order; iteration ``t`` reads ``uniforms[r, n + t]`` and takes the positive step
when ``U < delta_minus / (delta_plus + delta_minus)``.
"""

from __future__ import annotations

import numpy as np

DEGENERATE_STEP = 1e-12


def _pick(alive: np.ndarray, draws: np.ndarray) -> np.ndarray:
    counts = alive.sum(axis=1)
    target = np.minimum(np.floor(draws * counts).astype(np.int64), counts - 1)
    ranks = np.cumsum(alive, axis=1) - 1
    hit = alive & (ranks == target[:, None])
    return np.argmax(hit, axis=1)


def gsw_walk(xs: np.ndarray, phi: float, eps: float, uniforms: np.ndarray) -> np.ndarray:
    """Run one walk per row of ``uniforms``.

    ``xs`` holds the covariate rows already divided by their maximum norm
    (zeros when the covariate block is absent). Returns an ``int8`` array of
    shape ``(R, n)`` with entries in {-1, +1}.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    n, d = xs.shape
    uniforms = np.asarray(uniforms, dtype=float)
    reps = uniforms.shape[0]
    if uniforms.shape[1] < 2 * n:
        raise ValueError(f"need {2 * n} uniforms per replicate, got {uniforms.shape[1]}")
    c = 1.0 - phi
    use_x = c > 0.0 and d > 0 and np.any(xs)

    z = np.zeros((reps, n))
    alive = np.ones((reps, n), dtype=bool)
    kdraw = np.zeros(reps, dtype=np.int64)
    piv = _pick(alive, uniforms[:, 0])
    kdraw += 1
    rows_all = np.arange(reps)
    cols = np.arange(n)

    for t in range(n):
        active = alive.any(axis=1)
        if not active.any():
            break
        r = rows_all[active]
        al = alive[r]
        zr = z[r]
        p = piv[r]

        lost = ~al[np.arange(r.size), p]
        if lost.any():
            rl = r[lost]
            piv[rl] = _pick(alive[rl], uniforms[rl, kdraw[rl]])
            kdraw[rl] += 1
            p = piv[r]

        free = al & (cols[None, :] != p[:, None])
        u = np.zeros_like(zr)
        if use_x:
            g = np.einsum("rj,ja,jb->rab", free.astype(float), xs, xs) * c
            g += phi * np.eye(d)[None, :, :]
            w = np.linalg.solve(g, xs[p][:, :, None])[:, :, 0]
            u = -c * (w @ xs.T)
            u[~free] = 0.0
        u[np.arange(r.size), p] = 1.0

        moving = al & (u != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            au = np.abs(u)
            toward = np.where(u > 0, 1.0 - zr, 1.0 + zr) / au
            away = np.where(u > 0, 1.0 + zr, 1.0 - zr) / au
        toward = np.where(moving, toward, np.inf)
        away = np.where(moving, away, np.inf)
        i_plus = np.argmin(toward, axis=1)
        i_minus = np.argmin(away, axis=1)
        ridx = np.arange(r.size)
        d_plus = toward[ridx, i_plus]
        d_minus = away[ridx, i_minus]
        s_plus = np.sign(u[ridx, i_plus])
        s_minus = -np.sign(u[ridx, i_minus])

        degenerate = (d_plus <= DEGENERATE_STEP) | (d_minus <= DEGENERATE_STEP)
        go_plus = uniforms[r, n + t] < d_minus / (d_plus + d_minus)
        delta = np.where(go_plus, d_plus, -d_minus)
        delta[degenerate] = 0.0
        zr = zr + delta[:, None] * u

        ok = ~degenerate
        blk = np.where(go_plus, i_plus, i_minus)
        face = np.where(go_plus, s_plus, s_minus)
        zr[ridx[ok], blk[ok]] = face[ok]
        if degenerate.any():
            dg = np.flatnonzero(degenerate)
            small_p = d_plus[dg] <= DEGENERATE_STEP
            zr[dg[small_p], i_plus[dg[small_p]]] = s_plus[dg[small_p]]
            small_m = d_minus[dg] <= DEGENERATE_STEP
            zr[dg[small_m], i_minus[dg[small_m]]] = s_minus[dg[small_m]]

        snap = al & (np.abs(zr) >= 1.0 - eps)
        zr[snap] = np.sign(zr[snap])
        z[r] = zr
        alive[r] = al & ~snap

    return np.where(z > 0, 1, -1).astype(np.int8)
