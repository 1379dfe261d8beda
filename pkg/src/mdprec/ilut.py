"""Dual-threshold incomplete LU factorization (ILUT) and sparse sweeps.

Row-wise IKJ elimination with Saad's dual dropping strategy: computed
entries smaller in magnitude than tau times the 2-norm of the original
row are dropped, and at most floor(p * original-row-nnz) largest entries
are kept in each of the strictly-lower and upper parts; the diagonal is
always kept. No pivoting is performed -- a vanishing pivot is a hard
error naming the row.

The elimination kernel and the triangular/Gauss-Seidel sweeps are numba
jitted; they are the innermost loops of every multigrid cycle.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit


@dataclass
class IlutFactors:
    """Unit lower factor (strict lower pattern) and upper factor with diagonal."""

    l: sp.csr_matrix
    u: sp.csr_matrix

    def solve(self, b):
        """x = U^{-1} L^{-1} b."""
        y = _lsolve_unit(self.l.indptr, self.l.indices, self.l.data, np.asarray(b, dtype=np.float64))
        return _usolve(self.u.indptr, self.u.indices, self.u.data, y)


def ilut_factor(a, p, tau):
    """ILUT(p, tau) of a square CSR matrix.

    p scales the per-row fill cap relative to the original row count
    (fractional values allowed); tau is the relative drop tolerance.
    """
    if a.shape[0] != a.shape[1]:
        raise ValueError("ilut_factor expects a square matrix")
    if p < 0 or tau < 0:
        raise ValueError("fill cap p and drop tolerance tau must be >= 0")
    a = a.tocsr()
    a.sort_indices()
    n = a.shape[0]
    (status, badrow, l_indptr, l_indices, l_data,
     u_indptr, u_indices, u_data) = _ilut_kernel(
        n, a.indptr.astype(np.int64), a.indices.astype(np.int64),
        a.data.astype(np.float64), float(p), float(tau))
    if status != 0:
        raise ValueError(f"ilut: zero pivot encountered in row {badrow}")
    l = sp.csr_matrix((l_data, l_indices, l_indptr), shape=(n, n))
    u = sp.csr_matrix((u_data, u_indices, u_indptr), shape=(n, n))
    return IlutFactors(l=l, u=u)


@njit(cache=True)
def _ilut_kernel(n, indptr, indices, data, p, tau):
    cap_guess = max(2 * len(data) + n, 16)
    l_indptr = np.zeros(n + 1, dtype=np.int64)
    u_indptr = np.zeros(n + 1, dtype=np.int64)
    l_indices = np.empty(cap_guess, dtype=np.int64)
    l_data = np.empty(cap_guess, dtype=np.float64)
    u_indices = np.empty(cap_guess, dtype=np.int64)
    u_data = np.empty(cap_guess, dtype=np.float64)
    u_diag = np.zeros(n, dtype=np.float64)
    u_diag_pos = np.empty(n, dtype=np.int64)  # position of row's diagonal in u_data

    w = np.zeros(n, dtype=np.float64)
    active = np.zeros(n, dtype=np.uint8)
    lower = np.empty(n, dtype=np.int64)  # sorted active columns < i
    upper = np.empty(n, dtype=np.int64)  # active columns >= i (unsorted)

    ln = 0
    un = 0
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        row_nnz = hi - lo
        norm2 = 0.0
        for t in range(lo, hi):
            norm2 += data[t] * data[t]
        droptol = tau * np.sqrt(norm2)
        cap = int(p * row_nnz)

        n_low = 0
        n_up = 0
        for t in range(lo, hi):
            j = indices[t]
            w[j] = data[t]
            active[j] = 1
            if j < i:
                # indices arrive sorted, so append keeps `lower` sorted
                lower[n_low] = j
                n_low += 1
            else:
                upper[n_up] = j
                n_up += 1
        if active[i] == 0:
            w[i] = 0.0
            active[i] = 1
            upper[n_up] = i
            n_up += 1

        # eliminate in ascending k; fill with k < j < i is inserted in order
        t = 0
        while t < n_low:
            k = lower[t]
            lk = w[k] / u_diag[k]
            if abs(lk) < droptol:
                w[k] = 0.0  # dropped multiplier: no update with it
                t += 1
                continue
            w[k] = lk
            dlo = u_diag_pos[k] + 1  # skip the stored diagonal of row k
            dhi = u_indptr[k + 1]
            for s in range(dlo, dhi):
                j = u_indices[s]
                upd = lk * u_data[s]
                if active[j] == 1:
                    w[j] -= upd
                else:
                    w[j] = -upd
                    active[j] = 1
                    if j < i:
                        # sorted insert into lower[t+1 : n_low]
                        pos = t + 1
                        while pos < n_low and lower[pos] < j:
                            pos += 1
                        for q in range(n_low, pos, -1):
                            lower[q] = lower[q - 1]
                        lower[pos] = j
                        n_low += 1
                    else:
                        upper[n_up] = j
                        n_up += 1
            t += 1

        # gather surviving lower entries
        keep_l_idx = np.empty(n_low, dtype=np.int64)
        keep_l_val = np.empty(n_low, dtype=np.float64)
        m_low = 0
        for t in range(n_low):
            k = lower[t]
            if w[k] != 0.0:
                keep_l_idx[m_low] = k
                keep_l_val[m_low] = w[k]
                m_low += 1
        # cap: keep the largest-magnitude entries
        if m_low > cap:
            mags = np.abs(keep_l_val[:m_low])
            order = np.argsort(mags)
            sel = order[m_low - cap:]
            sel = np.sort(sel)
            tmp_i = np.empty(cap, dtype=np.int64)
            tmp_v = np.empty(cap, dtype=np.float64)
            for q in range(cap):
                tmp_i[q] = keep_l_idx[sel[q]]
                tmp_v[q] = keep_l_val[sel[q]]
            keep_l_idx, keep_l_val, m_low = tmp_i, tmp_v, cap

        # gather surviving upper entries (diagonal handled separately)
        keep_u_idx = np.empty(n_up, dtype=np.int64)
        keep_u_val = np.empty(n_up, dtype=np.float64)
        m_up = 0
        for t in range(n_up):
            j = upper[t]
            if j != i and abs(w[j]) >= droptol and w[j] != 0.0:
                keep_u_idx[m_up] = j
                keep_u_val[m_up] = w[j]
                m_up += 1
        if m_up > cap:
            mags = np.abs(keep_u_val[:m_up])
            order = np.argsort(mags)
            sel = order[m_up - cap:]
            sel = np.sort(sel)
            tmp_i = np.empty(cap, dtype=np.int64)
            tmp_v = np.empty(cap, dtype=np.float64)
            for q in range(cap):
                tmp_i[q] = keep_u_idx[sel[q]]
                tmp_v[q] = keep_u_val[sel[q]]
            keep_u_idx, keep_u_val, m_up = tmp_i, tmp_v, cap
        srt = np.argsort(keep_u_idx[:m_up])

        diag = w[i]
        if diag == 0.0:
            return (1, i, l_indptr, l_indices, l_data, u_indptr, u_indices, u_data)

        # grow output buffers if needed
        need_l = ln + m_low
        if need_l > len(l_indices):
            new_cap = max(2 * len(l_indices), need_l)
            tmp = np.empty(new_cap, dtype=np.int64)
            tmp[:ln] = l_indices[:ln]
            l_indices = tmp
            tmpv = np.empty(new_cap, dtype=np.float64)
            tmpv[:ln] = l_data[:ln]
            l_data = tmpv
        need_u = un + m_up + 1
        if need_u > len(u_indices):
            new_cap = max(2 * len(u_indices), need_u)
            tmp = np.empty(new_cap, dtype=np.int64)
            tmp[:un] = u_indices[:un]
            u_indices = tmp
            tmpv = np.empty(new_cap, dtype=np.float64)
            tmpv[:un] = u_data[:un]
            u_data = tmpv

        for q in range(m_low):  # already in ascending column order
            l_indices[ln] = keep_l_idx[q]
            l_data[ln] = keep_l_val[q]
            ln += 1
        l_indptr[i + 1] = ln

        u_diag[i] = diag
        u_diag_pos[i] = un
        u_indices[un] = i
        u_data[un] = diag
        un += 1
        for q in range(m_up):
            u_indices[un] = keep_u_idx[srt[q]]
            u_data[un] = keep_u_val[srt[q]]
            un += 1
        u_indptr[i + 1] = un

        # reset workspace
        for t in range(n_low):
            k = lower[t]
            w[k] = 0.0
            active[k] = 0
        for t in range(n_up):
            j = upper[t]
            w[j] = 0.0
            active[j] = 0

    return (0, -1, l_indptr, l_indices[:ln], l_data[:ln], u_indptr, u_indices[:un], u_data[:un])


@njit(cache=True)
def _lsolve_unit(indptr, indices, data, b):
    n = len(indptr) - 1
    x = b.copy()
    for i in range(n):
        s = x[i]
        for t in range(indptr[i], indptr[i + 1]):
            s -= data[t] * x[indices[t]]
        x[i] = s
    return x


@njit(cache=True)
def _usolve(indptr, indices, data, b):
    n = len(indptr) - 1
    x = b.copy()
    for i in range(n - 1, -1, -1):
        s = x[i]
        diag = 0.0
        for t in range(indptr[i], indptr[i + 1]):
            j = indices[t]
            if j == i:
                diag = data[t]
            else:
                s -= data[t] * x[j]
        x[i] = s / diag
    return x


@njit(cache=True)
def gauss_seidel_sweep(indptr, indices, data, x, b, forward):
    """One in-place Gauss-Seidel sweep over the full CSR matrix."""
    n = len(indptr) - 1
    if forward:
        for i in range(n):
            s = b[i]
            diag = 0.0
            for t in range(indptr[i], indptr[i + 1]):
                j = indices[t]
                if j == i:
                    diag = data[t]
                else:
                    s -= data[t] * x[j]
            x[i] = s / diag
    else:
        for i in range(n - 1, -1, -1):
            s = b[i]
            diag = 0.0
            for t in range(indptr[i], indptr[i + 1]):
                j = indices[t]
                if j == i:
                    diag = data[t]
                else:
                    s -= data[t] * x[j]
            x[i] = s / diag
    return x
