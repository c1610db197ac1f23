# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernel; same algorithm as ``_pykernel``."""

import numpy as np

from libc.math cimport sqrt, log1p, exp, expm1, fabs, nextafter, pow, INFINITY
from libc.stdlib cimport malloc, realloc, free

from ._tableau import A as _A, B as _B, C as _C, E3 as _E3, E5 as _E5, N_STAGES as _NS

cdef enum:
    NS = 12

cdef double TA[NS][NS]
cdef double TB[NS]
cdef double TE5[NS + 1]
cdef double TE3[NS + 1]

cdef int _s, _j
for _s in range(NS):
    for _j in range(NS):
        TA[_s][_j] = 0.0
    for _j in range(_s):
        TA[_s][_j] = _A[_s][_j]
    TB[_s] = _B[_s]
for _s in range(NS + 1):
    TE5[_s] = _E5[_s]
    TE3[_s] = _E3[_s]
assert _NS == NS

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double ERROR_EXPONENT = -1.0 / 8.0

cdef struct Params:
    double w
    double a_sun
    double xi
    double beta

cdef struct Buffer:
    double *data
    Py_ssize_t n
    Py_ssize_t cap


cdef inline void rhs(const double *y, const Params *p, double *out) noexcept nogil:
    cdef double x = y[0], yy = y[1], z = y[2]
    cdef double r2 = x * x + yy * yy + z * z
    cdef double r = sqrt(r2)
    cdef double inv_r3 = 1.0 / (r2 * r)
    cdef double xi_x = x * p.xi, xi_y = yy * p.xi, xi_z = z * p.xi
    cdef double q = 2.0 * xi_x + xi_x * xi_x + xi_y * xi_y + xi_z * xi_z
    cdef double lq = log1p(q)
    cdef double f = exp(-1.5 * lq)
    cdef double g = -expm1(-1.5 * lq)
    cdef double w2 = p.w * p.w
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] = (p.a_sun * (p.beta * (1.0 + xi_x) * f + g - xi_x * f)
              + w2 * x + 2.0 * p.w * y[4] - x * inv_r3)
    out[4] = -p.a_sun * (1.0 - p.beta) * xi_y * f + w2 * yy - 2.0 * p.w * y[3] - yy * inv_r3
    out[5] = -p.a_sun * (1.0 - p.beta) * xi_z * f - z * inv_r3


cdef inline void step(const double *y, const double *f0, double h, const Params *p,
                      double K[][6], double *y_new) noexcept nogil:
    cdef int s, i, j
    cdef double ys[6]
    cdef double acc
    for i in range(6):
        K[0][i] = f0[i]
    for s in range(1, NS):
        for i in range(6):
            acc = 0.0
            for j in range(s):
                acc += TA[s][j] * K[j][i]
            ys[i] = y[i] + h * acc
        rhs(ys, p, K[s])
    for i in range(6):
        acc = 0.0
        for j in range(NS):
            acc += TB[j] * K[j][i]
        y_new[i] = y[i] + h * acc
    rhs(y_new, p, K[NS])


cdef inline double error_norm(double K[][6], double h, const double *y, const double *y_new,
                              double rtol, double atol) noexcept nogil:
    cdef double e5 = 0.0, e3 = 0.0, sc, s5, s3
    cdef int i, j
    for i in range(6):
        sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(y_new[i]) else fabs(y_new[i]))
        s5 = 0.0
        s3 = 0.0
        for j in range(NS + 1):
            s5 += TE5[j] * K[j][i]
            s3 += TE3[j] * K[j][i]
        s5 /= sc
        s3 /= sc
        e5 += s5 * s5
        e3 += s3 * s3
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return fabs(h) * e5 / sqrt((e5 + 0.01 * e3) * 6.0)


cdef double initial_step(const double *y, const double *f0, const Params *p,
                         double rtol, double atol) noexcept nogil:
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1
    cdef double y1[6]
    cdef double f1[6]
    cdef int i
    for i in range(6):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = sqrt(d0 / 6.0)
    d1 = sqrt(d1 / 6.0)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    for i in range(6):
        y1[i] = y[i] + h0 * f0[i]
    rhs(y1, p, f1)
    for i in range(6):
        sc = atol + rtol * fabs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = sqrt(d2 / 6.0) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = pow(0.01 / (d1 if d1 > d2 else d2), 1.0 / 8.0)
    return 100.0 * h0 if 100.0 * h0 < h1 else h1


cdef inline double radius_minus_one(const double *y) noexcept nogil:
    return sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - 1.0


cdef inline double radial_rate(const double *y) noexcept nogil:
    return y[0] * y[3] + y[1] * y[4] + y[2] * y[5]


cdef double polish(const double *y, const double *f0, double h_lo, double h_hi, double g_lo,
                   double g_hi, int kind, const Params *p, double K[][6],
                   double *y_root) noexcept nogil:
    cdef double lo = h_lo, hi = h_hi, flo = g_lo, fhi = g_hi
    cdef double hm, gm, h_root = h_hi
    cdef int side = 0, it
    for it in range(100):
        if fhi != flo:
            hm = hi - fhi * (hi - lo) / (fhi - flo)
        else:
            hm = 0.5 * (lo + hi)
        if not (lo < hm and hm < hi):
            hm = 0.5 * (lo + hi)
        step(y, f0, hm, p, K, y_root)
        gm = radius_minus_one(y_root) if kind == 0 else radial_rate(y_root)
        h_root = hm
        if gm == 0.0 or fabs(gm) < 1e-15:
            break
        if (gm > 0.0) == (fhi > 0.0):
            hi = hm
            fhi = gm
            if side == 1:
                flo *= 0.5
            side = 1
        else:
            lo = hm
            flo = gm
            if side == -1:
                fhi *= 0.5
            side = -1
        if hi - lo <= 4e-16 * fabs(hi):
            break
    return h_root


cdef int push(Buffer *buf, double t, const double *y) noexcept nogil:
    cdef double *grown
    cdef int i
    if buf.n == buf.cap:
        buf.cap = buf.cap * 2 + 16
        grown = <double *> realloc(buf.data, buf.cap * 7 * sizeof(double))
        if grown == NULL:
            return -1
        buf.data = grown
    buf.data[buf.n * 7] = t
    for i in range(6):
        buf.data[buf.n * 7 + 1 + i] = y[i]
    buf.n += 1
    return 0


cdef void apsis(const double *y, const double *f0, double rd_prev, double rd_new, double h,
                double t, const Params *p, double K[][6], Buffer *peri, Buffer *apo) noexcept nogil:
    cdef double yp[6]
    cdef double hp
    if rd_prev < 0.0 and rd_new >= 0.0:
        hp = polish(y, f0, 0.0, h, rd_prev, rd_new, 1, p, K, yp)
        push(peri, t + hp, yp)
    elif rd_prev > 0.0 and rd_new <= 0.0:
        hp = polish(y, f0, 0.0, h, rd_prev, rd_new, 1, p, K, yp)
        push(apo, t + hp, yp)


cdef int run(double *y, double *t_out, const Params *p, double t_max, double rtol, double atol,
             double r_escape, long max_steps, long sample_every,
             Buffer *samples, Buffer *peri, Buffer *apo, long *nsteps_out, long *nfev_out) noexcept nogil:
    cdef double K[NS + 1][6]
    cdef double f0[6]
    cdef double y_new[6]
    cdef double y_imp[6]
    cdef double f_new[6]
    cdef double t = 0.0, h_abs, h, h_next = 0.0, err, factor, min_step
    cdef double g_prev, g_new, rd_prev, rd_new, h_imp, h_top, g_top
    cdef long nsteps = 0, nfev
    cdef int status = 2, rejected, last, i
    rhs(y, p, f0)
    nfev = 1
    h_abs = initial_step(y, f0, p, rtol, atol)
    nfev += 1
    if sample_every > 0:
        push(samples, t, y)
    g_prev = radius_minus_one(y)
    rd_prev = radial_rate(y)
    while True:
        if nsteps >= max_steps:
            status = 3
            break
        min_step = 10.0 * fabs(nextafter(t, INFINITY) - t)
        if h_abs < min_step:
            h_abs = min_step
        rejected = 0
        while True:
            if h_abs < min_step:
                t_out[0] = t
                nsteps_out[0] = nsteps
                nfev_out[0] = nfev
                return 3
            h = h_abs
            last = 0
            if t + h >= t_max:
                h = t_max - t
                last = 1
            step(y, f0, h, p, K, y_new)
            nfev += NS
            err = error_norm(K, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * pow(err, ERROR_EXPONENT)
                    if factor > MAX_FACTOR:
                        factor = MAX_FACTOR
                if rejected and factor > 1.0:
                    factor = 1.0
                h_next = h_abs * factor
                break
            factor = SAFETY * pow(err, ERROR_EXPONENT)
            h_abs *= factor if factor > MIN_FACTOR else MIN_FACTOR
            rejected = 1
        nsteps += 1
        for i in range(6):
            f_new[i] = K[NS][i]

        g_new = radius_minus_one(y_new)
        rd_new = radial_rate(y_new)
        if g_new <= 0.0 and (g_prev > 0.0 or (rd_prev > 0.0 and rd_new < 0.0)):
            if g_prev > 0.0:
                h_imp = polish(y, f0, 0.0, h, g_prev, g_new, 0, p, K, y_imp)
            else:
                # launched from the surface and back down within one step
                h_top = polish(y, f0, 0.0, h, rd_prev, rd_new, 1, p, K, y_imp)
                g_top = radius_minus_one(y_imp)
                if g_top > 0.0:
                    h_imp = polish(y, f0, h_top, h, g_top, g_new, 0, p, K, y_imp)
                else:
                    h_imp = 0.0
                    for i in range(6):
                        y_imp[i] = y[i]
            nfev += 100
            apsis(y, f0, rd_prev, radial_rate(y_imp), h_imp, t, p, K, peri, apo)
            t = t + h_imp
            for i in range(6):
                y[i] = y_imp[i]
            status = 0
            break
        apsis(y, f0, rd_prev, rd_new, h, t, p, K, peri, apo)
        t = t_max if last else t + h
        for i in range(6):
            y[i] = y_new[i]
            f0[i] = f_new[i]
        g_prev = g_new
        rd_prev = rd_new
        if sample_every > 0 and nsteps % sample_every == 0:
            push(samples, t, y)
        if g_new + 1.0 > r_escape and rd_new > 0.0:
            status = 1
            break
        if last:
            status = 2
            break
        h_abs = h_next
    t_out[0] = t
    nsteps_out[0] = nsteps
    nfev_out[0] = nfev
    return status


cdef object to_array(Buffer *buf):
    cdef Py_ssize_t k
    out = np.empty((buf.n, 7), dtype=np.float64)
    cdef double[:, ::1] view = out
    for k in range(buf.n * 7):
        view[k // 7, k % 7] = buf.data[k]
    return out


def propagate(y0, params, double t_max, double rtol, double atol, double r_escape,
              long max_steps, long sample_every):
    """See ``_pykernel.propagate``; sample/event rows are returned as arrays."""
    cdef double y[6]
    cdef Params p
    cdef Buffer samples, peri, apo
    cdef double t = 0.0
    cdef long nsteps = 0, nfev = 0
    cdef int status, i
    for i in range(6):
        y[i] = y0[i]
    p.w, p.a_sun, p.xi, p.beta = params
    samples.data = NULL; samples.n = 0; samples.cap = 0
    peri.data = NULL; peri.n = 0; peri.cap = 0
    apo.data = NULL; apo.n = 0; apo.cap = 0
    try:
        with nogil:
            status = run(y, &t, &p, t_max, rtol, atol, r_escape, max_steps, sample_every,
                         &samples, &peri, &apo, &nsteps, &nfev)
        if sample_every > 0 and (samples.n == 0 or samples.data[(samples.n - 1) * 7] != t):
            push(&samples, t, y)
        result = {
            "status": status,
            "t": t,
            "y": [y[i] for i in range(6)],
            "samples": to_array(&samples),
            "peri": to_array(&peri),
            "apo": to_array(&apo),
            "nsteps": nsteps,
            "nfev": nfev,
        }
    finally:
        free(samples.data)
        free(peri.data)
        free(apo.data)
    return result


def rhs_py(y0, params):
    cdef double y[6]
    cdef double out[6]
    cdef Params p
    cdef int i
    for i in range(6):
        y[i] = y0[i]
    p.w, p.a_sun, p.xi, p.beta = params
    rhs(y, &p, out)
    return [out[i] for i in range(6)]


def eval_rhs(y0, params):
    """Right-hand side at one state, for cross-checks against the Python kernel."""
    cdef double y[6]
    cdef double out[6]
    cdef Params p
    cdef int i
    for i in range(6):
        y[i] = y0[i]
    p.w, p.a_sun, p.xi, p.beta = params
    rhs(y, &p, out)
    return [out[i] for i in range(6)]
