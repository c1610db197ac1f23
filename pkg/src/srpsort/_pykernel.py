"""Pure-Python propagation kernel.

Mirrors ``_ckernel.pyx`` statement for statement so both backends follow the
same step sequence. State and time are in the asteroid-centric co-rotating
frame, lengths in asteroid radii and time in sqrt(R^3/mu_A).

``params`` is ``(w, a_sun, xi_scale, beta)``:

w
    frame rate Omega_R in kernel units
a_sun
    solar gravity at the asteroid, mu_S/d^2, in kernel units
xi_scale
    R/d, converts kernel lengths to heliocentric-distance units
beta
    lightness number
"""

import math

from ._tableau import A, B, C, E3, E5, N_STAGES

REIMPACT = 0
ESCAPE = 1
TIMEOUT = 2
FAILED = 3

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0


def rhs(y, params):
    w, a_sun, xi_scale, beta = params
    x, yy, z, vx, vy, vz = y
    r2 = x * x + yy * yy + z * z
    r = math.sqrt(r2)
    inv_r3 = 1.0 / (r2 * r)
    xi_x = x * xi_scale
    xi_y = yy * xi_scale
    xi_z = z * xi_scale
    q = 2.0 * xi_x + xi_x * xi_x + xi_y * xi_y + xi_z * xi_z
    lq = math.log1p(q)
    f = math.exp(-1.5 * lq)
    g = -math.expm1(-1.5 * lq)
    w2 = w * w
    ax = a_sun * (beta * (1.0 + xi_x) * f + g - xi_x * f) + w2 * x + 2.0 * w * vy - x * inv_r3
    ay = -a_sun * (1.0 - beta) * xi_y * f + w2 * yy - 2.0 * w * vx - yy * inv_r3
    az = -a_sun * (1.0 - beta) * xi_z * f - z * inv_r3
    return [vx, vy, vz, ax, ay, az]


def reduced_jacobi(y, params):
    """Jacobi integral with the constant heliocentric part removed (kernel units)."""
    w, a_sun, xi_scale, beta = params
    x, yy, z, vx, vy, vz = y
    r = math.sqrt(x * x + yy * yy + z * z)
    xi_x = x * xi_scale
    q = 2.0 * xi_x + (x * x + yy * yy + z * z) * xi_scale * xi_scale
    h = math.expm1(-0.5 * math.log1p(q))
    u = 0.5 * w * w * (x * x + yy * yy) + (a_sun / xi_scale) * ((1.0 - beta) * h + xi_x) + 1.0 / r
    return 2.0 * u - (vx * vx + vy * vy + vz * vz)


def _step(y, f0, h, params, K):
    """One DOP853 step of size h. Fills K (N_STAGES + 1 rows)."""
    K[0] = f0
    for s in range(1, N_STAGES):
        a = A[s]
        ys = [0.0] * 6
        for i in range(6):
            acc = 0.0
            for j in range(s):
                acc += a[j] * K[j][i]
            ys[i] = y[i] + h * acc
        K[s] = rhs(ys, params)
    y_new = [0.0] * 6
    for i in range(6):
        acc = 0.0
        for j in range(N_STAGES):
            acc += B[j] * K[j][i]
        y_new[i] = y[i] + h * acc
    f_new = rhs(y_new, params)
    K[N_STAGES] = f_new
    return y_new, f_new


def _error_norm(K, h, y, y_new, rtol, atol):
    e5 = 0.0
    e3 = 0.0
    for i in range(6):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        s5 = 0.0
        s3 = 0.0
        for j in range(N_STAGES + 1):
            s5 += E5[j] * K[j][i]
            s3 += E3[j] * K[j][i]
        s5 /= sc
        s3 /= sc
        e5 += s5 * s5
        e3 += s3 * s3
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * 6.0)


def _initial_step(y, f0, params, rtol, atol):
    d0 = 0.0
    d1 = 0.0
    for i in range(6):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / 6.0)
    d1 = math.sqrt(d1 / 6.0)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = [y[i] + h0 * f0[i] for i in range(6)]
    f1 = rhs(y1, params)
    d2 = 0.0
    for i in range(6):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / 6.0) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1)


def _radius_minus_one(y):
    return math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - 1.0


def _radial_rate(y):
    return y[0] * y[3] + y[1] * y[4] + y[2] * y[5]


def _polish(y, f0, h_lo, h_hi, g_lo, g_hi, kind, params, K):
    """Root of g(step(y, h)) on (h_lo, h_hi] by Illinois regula falsi.

    kind 0: radius - 1, kind 1: radial rate. Returns (h, y_at_root).
    """
    lo, hi = h_lo, h_hi
    flo, fhi = g_lo, g_hi
    y_root = None
    h_root = h_hi
    side = 0
    for _ in range(100):
        if fhi != flo:
            hm = hi - fhi * (hi - lo) / (fhi - flo)
        else:
            hm = 0.5 * (lo + hi)
        if not (lo < hm < hi):
            hm = 0.5 * (lo + hi)
        ym, _ = _step(y, f0, hm, params, K)
        gm = _radius_minus_one(ym) if kind == 0 else _radial_rate(ym)
        y_root, h_root = ym, hm
        if gm == 0.0 or abs(gm) < 1e-15:
            break
        if (gm > 0.0) == (fhi > 0.0):
            hi, fhi = hm, gm
            if side == 1:
                flo *= 0.5
            side = 1
        else:
            lo, flo = hm, gm
            if side == -1:
                fhi *= 0.5
            side = -1
        if hi - lo <= 4e-16 * max(abs(hi), 1e-300):
            break
    return h_root, y_root


def propagate(y0, params, t_max, rtol, atol, r_escape, max_steps, sample_every):
    """Integrate until re-impact, escape, timeout or failure.

    Returns a dict with status, final time/state, samples, apsis events and
    counters. Each sample/event row is ``[t, x, y, z, vx, vy, vz]``.
    """
    K = [None] * (N_STAGES + 1)
    y = list(y0)
    t = 0.0
    f0 = rhs(y, params)
    nfev = 1
    h_abs = _initial_step(y, f0, params, rtol, atol)
    nfev += 1
    samples = [[t] + y] if sample_every > 0 else []
    peri = []
    apo = []
    g_prev = _radius_minus_one(y)
    rd_prev = _radial_rate(y)
    status = TIMEOUT
    nsteps = 0
    while True:
        if nsteps >= max_steps:
            status = FAILED
            break
        min_step = 10.0 * abs(math.nextafter(t, math.inf) - t)
        if h_abs < min_step:
            h_abs = min_step
        rejected = False
        while True:
            if h_abs < min_step:
                return _result(FAILED, t, y, samples, peri, apo, nsteps, nfev)
            h = h_abs
            last = False
            if t + h >= t_max:
                h = t_max - t
                last = True
            y_new, f_new = _step(y, f0, h, params, K)
            nfev += N_STAGES
            err = _error_norm(K, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT)
                if rejected:
                    factor = min(1.0, factor)
                h_next = h_abs * factor
                break
            h_abs *= max(MIN_FACTOR, SAFETY * err**ERROR_EXPONENT)
            rejected = True
        nsteps += 1

        g_new = _radius_minus_one(y_new)
        rd_new = _radial_rate(y_new)
        if g_new <= 0.0 and (g_prev > 0.0 or (rd_prev > 0.0 and rd_new < 0.0)):
            if g_prev > 0.0:
                h_imp, y_imp = _polish(y, f0, 0.0, h, g_prev, g_new, 0, params, K)
            else:
                # launched from the surface and back down within one step
                h_top, y_top = _polish(y, f0, 0.0, h, rd_prev, rd_new, 1, params, K)
                g_top = _radius_minus_one(y_top)
                if g_top > 0.0:
                    h_imp, y_imp = _polish(y, f0, h_top, h, g_top, g_new, 0, params, K)
                else:
                    h_imp, y_imp = 0.0, list(y)
            nfev += 100
            rd_imp = _radial_rate(y_imp)
            _apsis(y, f0, rd_prev, rd_imp, h_imp, t, params, K, peri, apo)
            t = t + h_imp
            y = y_imp
            status = REIMPACT
            break
        _apsis(y, f0, rd_prev, rd_new, h, t, params, K, peri, apo)
        t = t_max if last else t + h
        y = y_new
        f0 = f_new
        g_prev = g_new
        rd_prev = rd_new
        if sample_every > 0 and nsteps % sample_every == 0:
            samples.append([t] + y)
        if g_new + 1.0 > r_escape and rd_new > 0.0:
            status = ESCAPE
            break
        if last:
            status = TIMEOUT
            break
        h_abs = h_next
    return _result(status, t, y, samples, peri, apo, nsteps, nfev)


def _apsis(y, f0, rd_prev, rd_new, h, t, params, K, peri, apo):
    if rd_prev < 0.0 and rd_new >= 0.0:
        hp, yp = _polish(y, f0, 0.0, h, rd_prev, rd_new, 1, params, K)
        peri.append([t + hp] + yp)
    elif rd_prev > 0.0 and rd_new <= 0.0:
        hp, yp = _polish(y, f0, 0.0, h, rd_prev, rd_new, 1, params, K)
        apo.append([t + hp] + yp)


def _result(status, t, y, samples, peri, apo, nsteps, nfev):
    if samples and samples[-1][0] != t:
        samples.append([t] + list(y))
    return {
        "status": status,
        "t": t,
        "y": list(y),
        "samples": samples,
        "peri": peri,
        "apo": apo,
        "nsteps": nsteps,
        "nfev": nfev,
    }
