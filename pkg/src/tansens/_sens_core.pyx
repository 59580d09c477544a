# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch sensitivity kernel.

Mirrors ``_kernels_py.frob_sq_batch`` but walks every sample's active neuron
set explicitly: the Gram-chain sandwiches run on gathered active blocks only,
which cuts the flop count roughly by the cube of the active fraction.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def frob_sq_batch(double[:, ::1] gram1,
                  double[:, :, ::1] wpad,
                  cnp.int64_t[::1] hidden_widths,
                  unsigned char[:, ::1] gates,
                  int d_in,
                  int d_out,
                  int chunk=0):
    cdef Py_ssize_t n_samples = gates.shape[0]
    cdef int H = <int>hidden_widths.shape[0]
    cdef int maxw = 0, maxn, j
    for j in range(H):
        if hidden_widths[j] > maxw:
            maxw = <int>hidden_widths[j]
    maxn = maxw if maxw > d_out else d_out

    out_arr = np.empty(n_samples, dtype=np.float64)
    cdef double[::1] out = out_arr

    offs_arr = np.zeros(H + 1, dtype=np.int64)
    offs_arr[1:] = np.cumsum(np.asarray(hidden_widths))
    cdef cnp.int64_t[::1] offs = offs_arr

    cdef int[:, ::1] act = np.empty((H, max(maxw, 1)), dtype=np.int32)
    cdef int[::1] nact = np.empty(H, dtype=np.int32)
    cdef double[::1] dcur = np.empty(max(maxn, 1), dtype=np.float64)
    cdef double[::1] dnew = np.empty(max(maxw, 1), dtype=np.float64)
    cdef double[::1] sqd = np.empty(max(H, 1), dtype=np.float64)
    cdef double[:, ::1] A = np.empty((max(maxw, 1), max(maxw, 1)), dtype=np.float64)
    cdef double[:, ::1] A2 = np.empty_like(np.asarray(A))
    cdef double[:, ::1] Cbuf = np.empty_like(np.asarray(A))
    cdef double[:, ::1] Wb = np.empty_like(np.asarray(A))

    cdef Py_ssize_t s
    cdef int cnt, base, n, a, aprev, acur, nnext
    cdef int p, q, r, vi, v
    cdef double acc, ssum, tr, total, av, bv

    with nogil:
        for s in range(n_samples):
            for j in range(H):
                cnt = 0
                base = <int>offs[j]
                for n in range(<int>hidden_widths[j]):
                    if gates[s, base + n]:
                        act[j, cnt] = n
                        cnt += 1
                nact[j] = cnt

            # backward products on active sets
            nnext = d_out
            for p in range(d_out):
                dcur[p] = 1.0
            for j in range(H - 1, -1, -1):
                a = nact[j]
                ssum = 0.0
                if j == H - 1:
                    for vi in range(a):
                        v = act[j, vi]
                        acc = 0.0
                        for p in range(nnext):
                            acc += wpad[j, v, p] * dcur[p]
                        dnew[vi] = acc
                        ssum += acc * acc
                else:
                    for vi in range(a):
                        v = act[j, vi]
                        acc = 0.0
                        for p in range(nnext):
                            acc += wpad[j, v, act[j + 1, p]] * dcur[p]
                        dnew[vi] = acc
                        ssum += acc * acc
                sqd[j] = ssum
                for vi in range(a):
                    dcur[vi] = dnew[vi]
                nnext = a

            # forward Gram chain on active sets
            aprev = nact[0]
            tr = 0.0
            for p in range(aprev):
                v = act[0, p]
                tr += gram1[v, v]
            total = d_in * sqd[0]
            if H == 1:
                total += tr * d_out
            else:
                total += tr * sqd[1]
                for p in range(aprev):
                    v = act[0, p]
                    for q in range(aprev):
                        A[p, q] = gram1[v, act[0, q]]
                for j in range(1, H):
                    acur = nact[j]
                    for r in range(aprev):
                        v = act[j - 1, r]
                        for q in range(acur):
                            Wb[r, q] = wpad[j - 1, v, act[j, q]]
                    # Cbuf = A @ Wb
                    for p in range(aprev):
                        for q in range(acur):
                            Cbuf[p, q] = 0.0
                        for r in range(aprev):
                            av = A[p, r]
                            for q in range(acur):
                                Cbuf[p, q] += av * Wb[r, q]
                    # A2 = Wb^T @ Cbuf
                    for p in range(acur):
                        for q in range(acur):
                            A2[p, q] = 0.0
                    for r in range(aprev):
                        for p in range(acur):
                            bv = Wb[r, p]
                            for q in range(acur):
                                A2[p, q] += bv * Cbuf[r, q]
                    tr = 0.0
                    for p in range(acur):
                        tr += A2[p, p]
                    if j + 1 < H:
                        total += tr * sqd[j + 1]
                    else:
                        total += tr * d_out
                    for p in range(acur):
                        for q in range(acur):
                            A[p, q] = A2[p, q]
                    aprev = acur
            out[s] = total
    return out_arr
