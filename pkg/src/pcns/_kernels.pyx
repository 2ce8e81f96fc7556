# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair sums for the time-dependent counterterms (see _kernels_py)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void proj(double* k, double kk, double* P) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            P[3 * i + j] = (1.0 if i == j else 0.0) - k[i] * k[j] / kk


cdef inline void matmul(double* A, double* B, double* C) noexcept nogil:
    cdef int i, j, l
    cdef double acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for l in range(3):
                acc += A[3 * i + l] * B[3 * l + j]
            C[3 * i + j] = acc


cdef inline void matvec(double* A, double* v, double* out) noexcept nogil:
    cdef int i
    for i in range(3):
        out[i] = A[3 * i] * v[0] + A[3 * i + 1] * v[1] + A[3 * i + 2] * v[2]


cdef inline double quad(double* u, double* A, double* v) noexcept nogil:
    cdef double w[3]
    matvec(A, v, w)
    return u[0] * w[0] + u[1] * w[1] + u[2] * w[2]


def pair_bins(cnp.int64_t[:, ::1] modes, double[::1] weights, long cutoff,
              long amax, long bmax, long chunk=0):
    """Return (bins_c2, bins_c11, bins_c12) of shape (amax+1, bmax+1, 9)."""
    cdef Py_ssize_t n = modes.shape[0]
    out2_np = np.zeros((amax + 1, bmax + 1, 9))
    out11_np = np.zeros((amax + 1, bmax + 1, 9))
    out12_np = np.zeros((amax + 1, bmax + 1, 9))
    cdef double[:, :, ::1] out2 = out2_np
    cdef double[:, :, ::1] out11 = out11_np
    cdef double[:, :, ::1] out12 = out12_np
    cdef Py_ssize_t p, r, i, j
    cdef long q0, q1, q2, a, n1i, n2i, nqi
    cdef double k1[3]
    cdef double k2[3]
    cdef double q[3]
    cdef double P1[9]
    cdef double P2[9]
    cdef double Pq[9]
    cdef double T1[9]
    cdef double T2[9]
    cdef double t3[3]
    cdef double t4[3]
    cdef double u[3]
    cdef double v[3]
    cdef double x[3]
    cdef double y[3]
    cdef double x1[3]
    cdef double x2[3]
    cdef double y2[3]
    cdef double s, n1, n2, nq, pre2, pre1, sc, s11
    with nogil:
        for p in range(n):
            n1i = modes[p, 0] * modes[p, 0] + modes[p, 1] * modes[p, 1] + modes[p, 2] * modes[p, 2]
            n1 = <double> n1i
            for i in range(3):
                k1[i] = <double> modes[p, i]
            proj(k1, n1, P1)
            for r in range(n):
                q0 = modes[p, 0] + modes[r, 0]
                q1 = modes[p, 1] + modes[r, 1]
                q2 = modes[p, 2] + modes[r, 2]
                if q0 > cutoff or q0 < -cutoff or q1 > cutoff or q1 < -cutoff \
                        or q2 > cutoff or q2 < -cutoff:
                    continue
                if q0 == 0 and q1 == 0 and q2 == 0:
                    continue
                n2i = modes[r, 0] * modes[r, 0] + modes[r, 1] * modes[r, 1] + modes[r, 2] * modes[r, 2]
                nqi = q0 * q0 + q1 * q1 + q2 * q2
                a = n1i + n2i + nqi
                n2 = <double> n2i
                nq = <double> nqi
                for i in range(3):
                    k2[i] = <double> modes[r, i]
                q[0] = <double> q0
                q[1] = <double> q1
                q[2] = <double> q2
                s = weights[p] * weights[r]
                proj(k2, n2, P2)
                proj(q, nq, Pq)

                # C2
                matmul(P1, Pq, T1)
                matmul(Pq, T1, T2)
                sc = quad(q, P2, q)
                matvec(P1, q, t3)
                matvec(Pq, t3, u)
                matvec(P2, q, t3)
                matvec(Pq, t3, v)
                pre2 = s / (2.0 * n1 * n2 * <double> a)
                for i in range(3):
                    for j in range(3):
                        out2[a, nqi, 3 * i + j] += pre2 * (sc * T2[3 * i + j] + u[i] * v[j])

                # C11
                pre1 = -s / (4.0 * n1 * n2 * <double> a)
                matmul(Pq, P2, T1)
                matmul(P2, T1, T2)
                s11 = quad(q, P1, k2)
                matvec(P1, k2, t3)
                matvec(Pq, t3, t4)
                matvec(P2, t4, x)
                matvec(P2, q, y)
                for i in range(3):
                    for j in range(3):
                        out11[a, n2i, 3 * i + j] += pre1 * (s11 * T2[3 * i + j] + x[i] * y[j])

                # C12
                matvec(Pq, k2, t3)
                matvec(P1, t3, t4)
                matvec(P2, t4, x1)
                matvec(P1, q, t3)
                matvec(P2, t3, x2)
                matvec(Pq, k2, t3)
                matvec(P2, t3, y2)
                for i in range(3):
                    for j in range(3):
                        out12[a, n2i, 3 * i + j] += pre1 * (x1[i] * y[j] + x2[i] * y2[j])
    return out2_np, out11_np, out12_np
