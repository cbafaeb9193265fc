"""Compiled inner loops: negacyclic NTT and RNS basis conversion.

All kernels work on uint64 arrays holding residues below 2^31, so a product
of two residues fits in 63 bits and Shoup's precomputed-quotient trick can
be used for multiplication by fixed twiddles.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_U32 = np.uint64(32)


@nb.njit(cache=True, nogil=True)
def _ntt_rows(a, p, psi, psi_sh):
    comps, rows, n = a.shape
    for c in range(comps):
        for r in range(rows):
            q = p[r]
            t = n
            m = 1
            while m < n:
                t >>= 1
                for i in range(m):
                    w = psi[r, m + i]
                    ws = psi_sh[r, m + i]
                    j1 = 2 * i * t
                    for j in range(j1, j1 + t):
                        u = a[c, r, j]
                        v = a[c, r, j + t]
                        hi = (v * ws) >> _U32
                        v = v * w - hi * q
                        if v >= q:
                            v -= q
                        x = u + v
                        if x >= q:
                            x -= q
                        a[c, r, j] = x
                        a[c, r, j + t] = u + q - v if u < v else u - v
                m <<= 1


@nb.njit(cache=True, nogil=True)
def _intt_rows(a, p, ipsi, ipsi_sh, ninv, ninv_sh):
    comps, rows, n = a.shape
    for c in range(comps):
        for r in range(rows):
            q = p[r]
            t = 1
            m = n
            while m > 1:
                h = m >> 1
                j1 = 0
                for i in range(h):
                    w = ipsi[r, h + i]
                    ws = ipsi_sh[r, h + i]
                    for j in range(j1, j1 + t):
                        u = a[c, r, j]
                        v = a[c, r, j + t]
                        x = u + v
                        if x >= q:
                            x -= q
                        a[c, r, j] = x
                        d = u + q - v if u < v else u - v
                        hi = (d * ws) >> _U32
                        d = d * w - hi * q
                        if d >= q:
                            d -= q
                        a[c, r, j + t] = d
                    j1 += 2 * t
                t <<= 1
                m = h
            w = ninv[r]
            ws = ninv_sh[r]
            for j in range(n):
                v = a[c, r, j]
                hi = (v * ws) >> _U32
                v = v * w - hi * q
                if v >= q:
                    v -= q
                a[c, r, j] = v


def ntt_forward(a: np.ndarray, p, psi, psi_sh) -> None:
    """In-place forward negacyclic NTT of ``a[c, r]`` modulo ``p[r]``; bit-reversed output."""
    _ntt_rows(a, p, psi, psi_sh)


def ntt_inverse(a: np.ndarray, p, ipsi, ipsi_sh, ninv, ninv_sh) -> None:
    """In-place inverse of :func:`ntt_forward`."""
    _intt_rows(a, p, ipsi, ipsi_sh, ninv, ninv_sh)


@nb.njit(cache=True, nogil=True)
def _basis_extend(x, src, qhat_inv, src_inv_f, conv, src_mod, dst, out):
    # x: (C, La, N) residues in base `src`; out: (C, Lb, N) in base `dst`.
    # Centered lift: the integer represented lies in (-A/2, A/2].
    c_count, la, n = x.shape
    lb = dst.shape[0]
    y = np.empty(la, dtype=np.uint64)
    for c in range(c_count):
        for j in range(n):
            frac = 0.0
            for i in range(la):
                yi = (x[c, i, j] * qhat_inv[i]) % src[i]
                y[i] = yi
                frac += float(yi) * src_inv_f[i]
            v = np.uint64(np.int64(frac + 0.5))
            for k in range(lb):
                b = dst[k]
                s = np.uint64(0)
                for i in range(la):
                    s += y[i] * conv[i, k]
                    if i & 7 == 7:
                        s %= b
                s %= b
                w = (v * src_mod[k]) % b
                out[c, k, j] = s + b - w if s < w else s - w


def basis_extend(x, src, qhat_inv, src_inv_f, conv, src_mod, dst) -> np.ndarray:
    out = np.empty((x.shape[0], dst.shape[0], x.shape[2]), dtype=np.uint64)
    _basis_extend(x, src, qhat_inv, src_inv_f, conv, src_mod, dst, out)
    return out



@nb.njit(cache=True, nogil=True, inline="always")
def _barrett(x, q, mu):
    # x < 2^60, 2^29 < q < 2^30, mu = floor(2^60 / q)
    r = x - (((x >> np.uint64(29)) * mu) >> np.uint64(31)) * q
    r = r - q if r >= q else r
    r = r - q if r >= q else r
    return r - q if r >= q else r


@nb.njit(cache=True, nogil=True)
def _tensor_accumulate(acc, a0, a1, b0, b1, d, p, mu):
    # acc[0..2] += d * (a0 b0, a0 b1 + a1 b0, a1 b1), all in NTT form.
    l_count, n = a0.shape
    for k in range(l_count):
        q = p[k]
        u = mu[k]
        for j in range(n):
            dj = d[k, j]
            u0 = _barrett(a0[k, j] * dj, q, u)
            u1 = _barrett(a1[k, j] * dj, q, u)
            x0 = b0[k, j]
            x1 = b1[k, j]
            acc[0, k, j] = _barrett(acc[0, k, j] + u0 * x0, q, u)
            s1 = acc[1, k, j] + _barrett(u0 * x1, q, u) + _barrett(u1 * x0, q, u)
            while s1 >= q:
                s1 -= q
            acc[1, k, j] = s1
            acc[2, k, j] = _barrett(acc[2, k, j] + u1 * x1, q, u)


def tensor_accumulate(acc, a0, a1, b0, b1, d, p, mu) -> None:
    """In-place ``acc += d * (a ⊗ b)`` over NTT-domain residues."""
    _tensor_accumulate(acc, a0, a1, b0, b1, d, p, mu)


@nb.njit(cache=True, nogil=True)
def _mulmod(a, b, p, mu, out):
    c_count, l_count, n = a.shape
    for c in range(c_count):
        for k in range(l_count):
            q = p[k]
            u = mu[k]
            for j in range(n):
                out[c, k, j] = _barrett(a[c, k, j] * b[k, j], q, u)


def mulmod(a, b, p, mu) -> np.ndarray:
    """``a[c] * b mod p`` for every component ``c`` of ``a``."""
    out = np.empty_like(a)
    _mulmod(a, b, p, mu, out)
    return out


@nb.njit(cache=True, nogil=True)
def _keyswitch_accumulate(digits_ntt, key_b, key_a, p, mu, acc):
    # digits_ntt: (D, L, N); keys: (D, L, N); acc[0] = sum_d digit_d * b_d, acc[1] likewise.
    d_count, l_count, n = digits_ntt.shape
    for k in range(l_count):
        q = p[k]
        u = mu[k]
        for j in range(n):
            sb = np.uint64(0)
            sa = np.uint64(0)
            for d in range(d_count):
                x = digits_ntt[d, k, j]
                sb += _barrett(x * key_b[d, k, j], q, u)
                sa += _barrett(x * key_a[d, k, j], q, u)
            acc[0, k, j] = sb % q
            acc[1, k, j] = sa % q


def keyswitch_accumulate(digits_ntt, key_b, key_a, p, mu) -> np.ndarray:
    """Inner product of gadget digits with a key-switching key, shape (2, L, N)."""
    acc = np.empty((2,) + digits_ntt.shape[1:], dtype=np.uint64)
    _keyswitch_accumulate(digits_ntt, key_b, key_a, p, mu, acc)
    return acc
