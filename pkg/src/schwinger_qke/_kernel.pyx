# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) stepper for one kinetic mode.

The state is (u, v, w, eA): the three Bloch-like auxiliaries plus the
coupled potential, which is advanced as d(eA)/dt = -eE so that no special
functions are evaluated inside the loop. Only (u, v, w) enter the error
norm. Mirrors ``_pykernel.evolve`` operation for operation.
"""

from libc.math cimport cos, exp, sqrt, fabs, pow

import numpy as np

cdef double SAFETY = 0.9
cdef double BETA = 0.04
cdef double EXPO1 = 0.2 - BETA * 0.75
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0

# Dormand-Prince coefficients
cdef double A21 = 0.2
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef struct Pulse:
    int model
    double E0
    double omega
    double omega2
    double tau
    double kE
    double phi
    double support
    double p_par
    double eps_perp2
    double eps_perp


cdef inline double efield(const Pulse* p, double t) noexcept nogil:
    cdef double env
    if fabs(t) > p.support:
        return 0.0
    env = exp(-t * t / (2.0 * p.tau * p.tau))
    if p.model == 0:
        return p.E0 * cos(p.omega * t + p.phi) * env
    elif p.model == 1:
        return p.E0 * (cos(p.omega * t) + p.kE * cos(p.omega2 * t)) * env
    return p.E0 * (1.0 + p.kE * cos(p.omega2 * t)) * env


cdef inline void rhs(const Pulse* p, double t, const double* y, double* dy) noexcept nogil:
    # d(u, v, w, eA)/dt
    cdef double E = efield(p, t)
    cdef double P = p.p_par - y[3]
    cdef double eps2 = p.eps_perp2 + P * P
    cdef double eps = sqrt(eps2)
    cdef double lam = E * p.eps_perp / eps2
    dy[0] = lam * y[2] - 2.0 * eps * y[1]
    dy[1] = 2.0 * eps * y[0]
    dy[2] = -lam * y[0]
    dy[3] = -E


cdef inline double occupation(const double* y) noexcept nogil:
    # (1 - w)/2 rewritten via 1 - w^2 = u^2 + v^2 to avoid cancellation near w = 1
    if y[2] > 0.0:
        return (y[0] * y[0] + y[1] * y[1]) / (2.0 * (1.0 + y[2]))
    return 0.5 * (1.0 - y[2])


def evolve(int model, double E0, double omega, double omega2, double tau,
           double kE, double phi, double support,
           double p_par, double p_perp, double t0, double t1, double eA0,
           double rtol, double atol, double max_step, double h_init,
           long stride, long max_steps):
    """Integrate one mode from the vacuum state at t0 to t1.

    Returns ``(status, f, u, v, w, eA, drift, n_accepted, n_rejected,
    traj_t, traj_f)``; status 0 is success, 1 step-size underflow, 2 step
    budget exhausted.
    """
    cdef Pulse p
    p.model = model
    p.E0 = E0
    p.omega = omega
    p.omega2 = omega2
    p.tau = tau
    p.kE = kE
    p.phi = phi
    p.support = support
    p.p_par = p_par
    p.eps_perp2 = 1.0 + p_perp * p_perp
    p.eps_perp = sqrt(p.eps_perp2)

    cdef double y[4]
    cdef double yn[4]
    cdef double yt[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double k7[4]
    cdef double t = t0, h, err, sc, d, fac, fac11, norm_dev
    cdef double err_old = 1e-4, drift = 0.0
    cdef long n_acc = 0, n_rej = 0
    cdef int i, status = 0
    cdef bint last_rejected = False, last_step = False
    cdef double h_floor

    traj_t = []
    traj_f = []

    y[0] = 0.0
    y[1] = 0.0
    y[2] = 1.0
    y[3] = eA0
    if stride > 0:
        traj_t.append(t)
        traj_f.append(0.0)

    h = h_init if h_init < max_step else max_step
    rhs(&p, t, y, k1)

    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        h_floor = 1e-13 * (fabs(t) if fabs(t) > 1.0 else 1.0)
        if h < h_floor:
            status = 1
            break
        last_step = t + h >= t1 - 1e-14 * fabs(t1)
        if last_step:
            h = t1 - t

        for i in range(4):
            yt[i] = y[i] + h * A21 * k1[i]
        rhs(&p, t + 0.2 * h, yt, k2)
        for i in range(4):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(&p, t + 0.3 * h, yt, k3)
        for i in range(4):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(&p, t + 0.8 * h, yt, k4)
        for i in range(4):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(&p, t + (8.0 / 9.0) * h, yt, k5)
        for i in range(4):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(&p, t + h, yt, k6)
        for i in range(4):
            yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        rhs(&p, t + h, yn, k7)

        err = 0.0
        for i in range(3):
            d = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
            err += (d / sc) * (d / sc)
        err = sqrt(err / 3.0)

        fac11 = pow(err, EXPO1)
        if err <= 1.0:
            fac = fac11 / pow(err_old, BETA) / SAFETY
            if fac < 1.0 / FAC_MAX:
                fac = 1.0 / FAC_MAX
            elif fac > 1.0 / FAC_MIN:
                fac = 1.0 / FAC_MIN
            t = t1 if last_step else t + h
            for i in range(4):
                y[i] = yn[i]
                k1[i] = k7[i]
            n_acc += 1
            norm_dev = fabs(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] - 1.0)
            if norm_dev > drift:
                drift = norm_dev
            if stride > 0 and (n_acc % stride == 0 or t >= t1):
                traj_t.append(t)
                traj_f.append(occupation(y))
            err_old = err if err > 1e-4 else 1e-4
            # no growth directly after a rejected attempt
            if last_rejected and fac < 1.0:
                fac = 1.0
            h = h / fac
            if h > max_step:
                h = max_step
            last_rejected = False
        else:
            fac = fac11 / SAFETY
            if fac > 1.0 / FAC_MIN:
                fac = 1.0 / FAC_MIN
            h = h / fac
            n_rej += 1
            last_rejected = True

    return (status, occupation(y), y[0], y[1], y[2], y[3], drift, n_acc, n_rej,
            np.asarray(traj_t, dtype=float), np.asarray(traj_f, dtype=float))
