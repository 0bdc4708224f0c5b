"""Pure-Python Dormand-Prince 5(4) stepper, used when ``_kernel`` is not built.

Arithmetic follows ``_kernel.pyx`` statement by statement so both backends
agree to rounding; see that module for the state layout.
"""

from math import cos, exp, fabs, sqrt

import numpy as np

SAFETY = 0.9
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
FAC_MIN = 0.2
FAC_MAX = 10.0

A21 = 0.2
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0
B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0


def _make_rhs(model, E0, omega, omega2, tau, kE, phi, support, p_par, p_perp):
    eps_perp2 = 1.0 + p_perp * p_perp
    eps_perp = sqrt(eps_perp2)
    two_tau2 = 2.0 * tau * tau

    if model == 0:
        def efield(t):
            return E0 * cos(omega * t + phi) * exp(-t * t / two_tau2)
    elif model == 1:
        def efield(t):
            return E0 * (cos(omega * t) + kE * cos(omega2 * t)) * exp(-t * t / two_tau2)
    else:
        def efield(t):
            return E0 * (1.0 + kE * cos(omega2 * t)) * exp(-t * t / two_tau2)

    def rhs(t, u, v, w, a):
        E = 0.0 if fabs(t) > support else efield(t)
        P = p_par - a
        eps2 = eps_perp2 + P * P
        eps = sqrt(eps2)
        lam = E * eps_perp / eps2
        return lam * w - 2.0 * eps * v, 2.0 * eps * u, -lam * u, -E

    return rhs


def _occupation(u, v, w):
    if w > 0.0:
        return (u * u + v * v) / (2.0 * (1.0 + w))
    return 0.5 * (1.0 - w)


def evolve(model, E0, omega, omega2, tau, kE, phi, support,
           p_par, p_perp, t0, t1, eA0,
           rtol, atol, max_step, h_init, stride, max_steps):
    rhs = _make_rhs(model, E0, omega, omega2, tau, kE, phi, support, p_par, p_perp)
    t = t0
    y = (0.0, 0.0, 1.0, eA0)
    err_old = 1e-4
    drift = 0.0
    n_acc = n_rej = 0
    status = 0
    last_rejected = False
    traj_t, traj_f = [], []
    if stride > 0:
        traj_t.append(t)
        traj_f.append(0.0)

    h = h_init if h_init < max_step else max_step
    k1 = rhs(t, *y)

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

        yt = [y[i] + h * A21 * k1[i] for i in range(4)]
        k2 = rhs(t + 0.2 * h, *yt)
        yt = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(4)]
        k3 = rhs(t + 0.3 * h, *yt)
        yt = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(4)]
        k4 = rhs(t + 0.8 * h, *yt)
        yt = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in range(4)]
        k5 = rhs(t + (8.0 / 9.0) * h, *yt)
        yt = [
            y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            for i in range(4)
        ]
        k6 = rhs(t + h, *yt)
        yn = [
            y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            for i in range(4)
        ]
        k7 = rhs(t + h, *yn)

        err = 0.0
        for i in range(3):
            d = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
            err += (d / sc) * (d / sc)
        err = sqrt(err / 3.0)

        fac11 = err ** EXPO1
        if err <= 1.0:
            fac = fac11 / err_old ** BETA / SAFETY
            if fac < 1.0 / FAC_MAX:
                fac = 1.0 / FAC_MAX
            elif fac > 1.0 / FAC_MIN:
                fac = 1.0 / FAC_MIN
            t = t1 if last_step else t + h
            y = yn
            k1 = k7
            n_acc += 1
            norm_dev = fabs(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] - 1.0)
            if norm_dev > drift:
                drift = norm_dev
            if stride > 0 and (n_acc % stride == 0 or t >= t1):
                traj_t.append(t)
                traj_f.append(_occupation(y[0], y[1], y[2]))
            err_old = err if err > 1e-4 else 1e-4
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

    return (status, _occupation(y[0], y[1], y[2]), y[0], y[1], y[2], y[3], drift, n_acc, n_rej,
            np.asarray(traj_t, dtype=float), np.asarray(traj_f, dtype=float))
