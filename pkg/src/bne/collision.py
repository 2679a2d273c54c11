"""Truncated collision operator evaluated by FFT convolutions.

Internally every array is kept in FFT order (index ``a`` along an axis
means integer ``a mod n``), which makes all index sums plain modular
arithmetic.  Public functions take and return centered-order arrays like
the rest of the package.

Fourier-space pieces (``q1c``, ``q2c``) return coefficients; trilinear
pieces return physical values, matching how they are assembled.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft
from numpy.lib.stride_tricks import sliding_window_view

from .grid import fft_c, ifft_c
from .kernels import KernelTable


class BlowUpError(FloatingPointError):
    """Raised when the distribution leaves the representable range."""

    def __init__(self, message: str, max_abs: float, time: float | None = None):
        super().__init__(message)
        self.max_abs = max_abs
        self.time = time


def _realify(a):
    """Drop an imaginary part that is pure round-off."""
    if np.abs(a.imag).max(initial=0.0) <= 1e-13 * max(np.abs(a.real).max(initial=0.0), 1e-300):
        return np.ascontiguousarray(a.real)
    return a


def _to_f(a, axes):
    return sfft.ifftshift(a, axes=axes)


def _to_c(a, axes):
    return sfft.fftshift(a, axes=axes)


class CollisionWorkspace:
    """Per-table scratch data and the two frame-dependent scale factors.

    Parameters
    ----------
    table : KernelTable
    alpha_eff : float
        Quantum coefficient in G-variables.
    c_pre : float
        Collision prefactor in G-variables.
    workers : int
        Threads handed to ``scipy.fft``.
    chunk : int, optional
        Number of shift indices processed together in the trilinear gain.
    blowup_bound : float
        Largest admissible ``max |G|``.
    """

    def __init__(self, table: KernelTable, alpha_eff: float = 0.0, c_pre: float = 1.0, workers: int = 1,
                 chunk: int | None = None, blowup_bound: float = 1e6):
        self.table = table
        self.grid = table.grid
        self.alpha_eff = float(alpha_eff)
        self.c_pre = float(c_pre)
        self.workers = workers
        self.blowup_bound = blowup_bound
        d = self.grid.dim
        self.axes = tuple(range(d))
        self.paxes = tuple(range(1, d + 1))
        rows = table.active_rows()
        self.rows = rows
        self.alpha = _to_f(table.alpha[rows], self.paxes)
        self.alpha_prime = _to_f(table.alpha_prime[rows], self.paxes)
        self.beta_diag = _to_f(table.beta_diag, self.axes)
        # physical kernels A_p = IDFT(alpha_p), A'_p = IDFT(alpha'_p)
        self.A = _realify(sfft.ifftn(self.alpha, axes=self.paxes, norm="forward", workers=workers))
        self.Ap = _realify(sfft.ifftn(self.alpha_prime, axes=self.paxes, norm="forward", workers=workers))
        n = self.grid.n
        if chunk is None:
            chunk = max(1, min(n ** (d - 1), 2**21 // n**d)) if d > 1 else 1
        self.chunk = chunk
        self.imag_residue = 0.0
        self.pair_weight = _pair_rows(self.alpha, self.alpha_prime)

    def check(self, G: np.ndarray) -> None:
        m = float(np.max(np.abs(G))) if G.size else 0.0
        if not np.isfinite(m) or m > self.blowup_bound:
            raise BlowUpError(f"max |G| = {m:.3e} exceeds {self.blowup_bound:.1e}", m)

    # FFT helpers (FFT order, no shifts)
    def fwd(self, a, axes=None):
        return sfft.fftn(a, axes=axes or self.axes, norm="forward", workers=self.workers)

    def inv(self, a, axes=None):
        return sfft.ifftn(a, axes=axes or self.axes, norm="forward", workers=self.workers)


def _pair_rows(alpha, alpha_prime):
    """Weights that merge rows whose trilinear products coincide.

    When ``alpha_q = c alpha'_p`` and ``alpha'_q = alpha_p / c`` the gain
    products of rows ``p`` and ``q`` are equal for ``F = G``, so row ``q`` is
    dropped and row ``p`` counted twice.  This is the reduction available
    when the two radial factors of the kernel coincide.
    """
    P = alpha.shape[0]
    w = np.ones(P)
    flat_a = alpha.reshape(P, -1)
    flat_b = alpha_prime.reshape(P, -1)
    for p in range(P):
        if w[p] == 0:
            continue
        ib = int(np.argmax(np.abs(flat_b[p])))
        if flat_b[p, ib] == 0:
            continue
        for q in range(p + 1, P):
            if w[q] == 0 or flat_b[q, ib] == 0:
                continue
            c = flat_a[q, ib] / flat_b[p, ib]
            if c != 0 and np.allclose(flat_a[q], c * flat_b[p], rtol=1e-13, atol=1e-14 * np.abs(flat_a[q]).max()) \
                    and np.allclose(flat_b[q] * c, flat_a[p], rtol=1e-13, atol=1e-14 * np.abs(flat_a[p]).max()):
                w[p] += 1.0
                w[q] = 0.0
                break
    return w


def _ws(table_or_ws) -> CollisionWorkspace:
    if isinstance(table_or_ws, CollisionWorkspace):
        return table_or_ws
    return CollisionWorkspace(table_or_ws)


def _check_shape(ws, *arrs):
    for a in arrs:
        if np.shape(a) != ws.grid.shape:
            raise ValueError(f"field shape {np.shape(a)} does not match grid {ws.grid.shape}")


# FFT-order kernels


def _q1c_f(ws, Fh, Gh):
    ph = ws.inv(ws.alpha * Fh[None], ws.paxes) * ws.inv(ws.alpha_prime * Gh[None], ws.paxes)
    return ws.table.weight_C * ws.fwd(ph.sum(axis=0))


def _q2c_f(ws, Fh, Gh):
    return ws.fwd(ws.inv(Fh) * ws.inv(ws.beta_diag * Gh))


def _q34_f(ws, Gh, Hh, first, second):
    conv = ws.fwd(ws.inv(first * Gh[None], ws.paxes) * ws.inv(Hh)[None], ws.paxes)
    return ws.table.weight_C * ws.inv((second * conv).sum(axis=0))


def _q1q_f(ws, F, G, H):
    """Trilinear gain by the shift algorithm; physical FFT-order inputs.

    ``Q_hat[n] = C n^-d sum_p sum_j H_j e^{-2 i pi n.j/N} Phi_pj[n] Psi_pj[n]``
    where ``Phi_pj = DFT(A_p(y) G(y + j))`` and ``Psi_pj = DFT(A'_p(y) F(y + j))``.
    This is the shifted-argument form of the product of
    ``DFT(A_p(. - j) G)`` and ``DFT(A'_p(. - j) F)``.  When every input is
    real only the half spectrum is formed.
    """
    grid = ws.grid
    n, d = grid.n, grid.dim
    nd = n**d
    real = not any(np.iscomplexobj(a) for a in (F, G, H, ws.A, ws.Ap))
    tile = (2,) * d
    # lazy views: window j of G holds G(y + j); chunks are gathered on demand
    Gw = sliding_window_view(np.tile(G, tile), grid.shape)[(slice(0, n),) * d]
    Fw = Gw if F is G else sliding_window_view(np.tile(F, tile), grid.shape)[(slice(0, n),) * d]
    yaxes = tuple(range(1, d + 1))
    if real:
        hshape = grid.shape[:-1] + (n // 2 + 1,)
        fft = sfft.rfftn
    else:
        hshape = grid.shape
        fft = sfft.fftn
    nh = int(np.prod(hshape))
    jidx = np.indices(grid.shape).reshape(d, nd)
    kidx = np.indices(hshape).reshape(d, nh)
    # twiddle factors by table lookup on (j.k) mod n
    twiddle = np.exp((-2j * np.pi / n) * np.arange(n))
    Hflat = H.reshape(nd)
    same = F is G
    rows = [(p, w) for p, w in enumerate(ws.pair_weight if same else np.ones(ws.alpha.shape[0])) if w > 0]
    acc = np.zeros(nh, dtype=complex)
    for j0 in range(0, nd, ws.chunk):
        js = slice(j0, min(j0 + ws.chunk, nd))
        phase = twiddle[(jidx[:, js].T @ kidx) % n] * Hflat[js, None]
        jsel = tuple(jidx[:, js])
        gw = Gw[jsel]
        fw = gw if same else Fw[jsel]
        prod = None
        for p, w in rows:
            phi = fft(ws.A[p] * gw, axes=yaxes, norm="forward", workers=ws.workers)
            phi *= fft(ws.Ap[p] * fw, axes=yaxes, norm="forward", workers=ws.workers)
            if w != 1:
                phi *= w
            prod = phi if prod is None else prod + phi
        acc += np.einsum("jn,jn->n", phase, prod.reshape(prod.shape[0], nh))
    Qh = (ws.table.weight_C / nd) * acc.reshape(hshape)
    if real:
        return sfft.irfftn(Qh, s=grid.shape, axes=ws.axes, norm="forward", workers=ws.workers)
    return ws.inv(Qh)


# public centered-order API


def q1c(table, Fh, Gh):
    """Classical gain in Fourier space: ``sum_{k+l=n} beta(k,l) F_k G_l``."""
    ws = _ws(table)
    _check_shape(ws, Fh, Gh)
    ax = ws.axes
    return _to_c(_q1c_f(ws, _to_f(Fh, ax), _to_f(Gh, ax)), ax)


def q2c(table, Fh, Gh):
    """Classical loss in Fourier space: ``F_hat * (beta(l,l) G_hat)``."""
    ws = _ws(table)
    _check_shape(ws, Fh, Gh)
    ax = ws.axes
    return _to_c(_q2c_f(ws, _to_f(Fh, ax), _to_f(Gh, ax)), ax)


def q1q_fast(table, G, F=None, H=None):
    """Trilinear gain ``Q1q(F, G, H)`` in physical space (``F = H = G`` by default)."""
    ws = _ws(table)
    F = G if F is None else F
    H = G if H is None else H
    _check_shape(ws, F, G, H)
    for a in (F, G, H):
        ws.check(a)
    ax = ws.axes
    return _to_c(_q1q_f(ws, _to_f(F, ax), _to_f(G, ax), _to_f(H, ax)), ax)


def q2q(table, F, Gh, Hh):
    """``F * Q1c(G, H)`` in physical space."""
    ws = _ws(table)
    _check_shape(ws, F, Gh, Hh)
    return F * ifft_c(q1c(ws, Gh, Hh))


def q3q(table, F, Gh, Hh):
    """``F * IDFT(sum_p alpha_p (alpha'_p G_hat) * H_hat)``."""
    ws = _ws(table)
    _check_shape(ws, F, Gh, Hh)
    ax = ws.axes
    inner = _q34_f(ws, _to_f(Gh, ax), _to_f(Hh, ax), ws.alpha_prime, ws.alpha)
    return F * _to_c(inner, ax)


def q4q(table, F, Gh, Hh):
    """Mirror of :func:`q3q` with alpha and alpha' exchanged."""
    ws = _ws(table)
    _check_shape(ws, F, Gh, Hh)
    ax = ws.axes
    inner = _q34_f(ws, _to_f(Gh, ax), _to_f(Hh, ax), ws.alpha, ws.alpha_prime)
    return F * _to_c(inner, ax)


def collision_pieces(ws: CollisionWorkspace, G: np.ndarray, quantum: bool = True) -> dict:
    """All six pieces on ``F = G = H``, physical values, FFT order kept internal."""
    _check_shape(ws, G)
    ws.check(G)
    ax = ws.axes
    g = _to_f(np.asarray(G), ax)
    gh = ws.fwd(g)
    q1 = _q1c_f(ws, gh, gh)
    out = {"q1c": ws.inv(q1), "q2c": ws.inv(_q2c_f(ws, gh, gh))}
    if quantum:
        out["q1q"] = _q1q_f(ws, g, g, g)
        out["q2q"] = g * out["q1c"]
        out["q3q"] = g * _q34_f(ws, gh, gh, ws.alpha_prime, ws.alpha)
        out["q4q"] = g * _q34_f(ws, gh, gh, ws.alpha, ws.alpha_prime)
    return {k: _to_c(v, ax) for k, v in out.items()}


def assemble_Q(ws: CollisionWorkspace, table: KernelTable | None = None, G=None) -> np.ndarray:
    """``c_pre (Q1c - Q2c - alpha_eff (Q1q + Q2q - Q3q - Q4q))`` as real values.

    The imaginary residue before truncation is stored in ``ws.imag_residue``
    relative to ``max |Q|``.
    """
    if G is None:
        raise ValueError("G is required")
    if table is not None and table is not ws.table:
        raise ValueError("table does not belong to this workspace")
    G = np.asarray(G)
    if G.dtype.kind == "c":
        G = G.real
    quantum = ws.alpha_eff != 0.0
    pc = collision_pieces(ws, G, quantum)
    Q = pc["q1c"] - pc["q2c"]
    if quantum:
        Q = Q - ws.alpha_eff * (pc["q1q"] + pc["q2q"] - pc["q3q"] - pc["q4q"])
    Q = ws.c_pre * Q
    scale = max(np.abs(Q).max(initial=0.0), 1e-300)
    ws.imag_residue = float(np.abs(Q.imag).max(initial=0.0) / scale)
    if not np.all(np.isfinite(Q)):
        raise BlowUpError("non-finite collision operator", float("inf"))
    return Q.real


# direct sums


def _beta_matrix(table: KernelTable) -> np.ndarray:
    """``beta(a, b)`` for all FFT-order flat indices ``a, b``."""
    d = table.grid.dim
    paxes = tuple(range(1, d + 1))
    P = table.alpha.shape[0]
    al = _to_f(table.alpha, paxes).reshape(P, -1)
    ap = _to_f(table.alpha_prime, paxes).reshape(P, -1)
    return table.weight_C * al.T @ ap


def _flat_sum_index(shape, n):
    """``idx[a, b] = flat index of (a + b) mod n`` and ``neg[a] = flat index of -a``."""
    d = len(shape)
    mi = np.indices(shape).reshape(d, -1)
    add = (mi[:, :, None] + mi[:, None, :]) % n
    sub = (-mi) % n
    return np.ravel_multi_index(tuple(add), shape), np.ravel_multi_index(tuple(sub), shape)


def direct_pieces(table: KernelTable, F, G, H=None) -> dict:
    """Literal Fourier-space sums over ``I_N`` for every piece (coefficients, centered).

    Bilinear pieces use ``F, G``; trilinear pieces use ``F, G, H`` where the
    pointwise factor of Q2q..Q4q is ``F``.  The sums use the full matrix
    ``beta(a, b)`` and never its separable form.  With ``j = m - k`` and
    ``GH[s, l] = G_l H_{s-l}`` the trilinear pieces read

        Q1q[m] = sum_k F_k sum_l beta(k + j - l, j) GH[j, l]
        Q2q[m] = sum_k F_k sum_l beta(l, j - l) GH[j, l]
        Q3q[m] = sum_k F_k sum_l beta(j, l) GH[j, l]
        Q4q[m] = sum_k F_k sum_l beta(l, j) GH[j, l]

    so only Q1q costs ``O(n^{3d})``.  Inputs with one extra leading axis
    are a batch of fields; the outputs then carry the same leading axis.
    """
    grid = table.grid
    n, d = grid.n, grid.dim
    if (d == 3 and n > 8) or (d == 2 and n > 16):
        raise ValueError("direct sums are limited to n <= 16 (2D) and n <= 8 (3D)")
    H = G if H is None else H
    F, G, H = (np.asarray(x) for x in (F, G, H))
    batched = F.ndim == d + 1
    if not batched:
        F, G, H = F[None], G[None], H[None]
    nb = F.shape[0]
    ax = tuple(range(1, d + 1))
    nd = n**d
    Fh, Gh, Hh = (_to_f(fft_c(x, axes=ax), ax).reshape(nb, nd) for x in (F, G, H))
    B = _beta_matrix(table)
    add, neg = _flat_sum_index(grid.shape, n)
    idx = np.arange(nd)
    sub = add[:, neg]  # sub[a, b] = flat index of a - b
    # GH[b, s, l] = G_l H_{s - l}
    GH = Gh[:, None, :] * Hh[:, sub]

    def conv_F(X):
        """``sum_k F_k X[m - k]`` for every ``m``."""
        return np.einsum("bk,bmk->bm", Fh, X[:, sub])

    def conv_F2(Y):
        """``sum_k F_k Y[m - k, k]`` for every ``m``."""
        return np.einsum("bk,bmk->bm", Fh, Y[:, sub, idx[None, :]])

    out = {
        "q1c": np.einsum("mk,bk,bmk->bm", B[idx[None, :], sub], Fh, Gh[:, sub]),
        "q2c": np.einsum("mk,bk,bmk->bm", B[sub, sub], Fh, Gh[:, sub]),
        "q2q": conv_F(np.einsum("sl,bsl->bs", B[idx[None, :], sub], GH)),
        "q3q": conv_F(np.einsum("sl,bsl->bs", B, GH)),
        "q4q": conv_F(np.einsum("sl,bsl->bs", B.T, GH)),
    }
    Y = np.empty((nb, nd, nd), dtype=complex)
    for j in range(nd):
        # Mj[l, k] = beta(k + j - l, j)
        Mj = B[add[sub[j]], j]
        g = GH[:, j, :]
        Y[:, j, :] = g.real @ Mj + 1j * (g.imag @ Mj)
    out["q1q"] = conv_F2(Y)
    res = {k: _to_c(v.reshape((nb,) + grid.shape), ax) for k, v in out.items()}
    return res if batched else {k: v[0] for k, v in res.items()}


def direct_Q_oracle(table: KernelTable, G, alpha_eff: float = 0.0) -> np.ndarray:
    """Physical ``Q1c - Q2c - alpha_eff (Q1q + Q2q - Q3q - Q4q)`` from literal sums."""
    pc = direct_pieces(table, G, G, G)
    Qh = pc["q1c"] - pc["q2c"]
    if alpha_eff != 0.0:
        Qh = Qh - alpha_eff * (pc["q1q"] + pc["q2q"] - pc["q3q"] - pc["q4q"])
    return ifft_c(Qh)
