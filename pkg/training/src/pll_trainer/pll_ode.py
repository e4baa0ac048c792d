"""Reference dynamics of the synchronous-reference-frame PLL.

The tracked state is (theta, xi) where xi is the loop filter's integrator:

    theta' = w0 + kp*v_q + xi
    xi'    = ki*v_q

with v_q the q-axis projection of the terminal voltage seen from theta.
Training targets come from integrating these equations across one coarse
step with RK4 at 1/1000 of the step.

The surrogate receives the three instantaneous phase samples as they stand
at the *end* of the step (that is how the simulator feeds its PLL), so the
reference treats them as the final snapshot of a positive-sequence vector
turning at nominal speed and rotates it backwards before integrating.  A
locked state then advances by exactly w0*dt.
"""

import numpy as np

F0 = 50.0
W0 = 2.0 * np.pi * F0
KP = 25.0
KI = 300.0

N_SUB = 1000  # RK4 substeps per coarse step


def clarke(v_abc):
    """Amplitude-invariant (alpha, beta) pair of three phase samples."""
    v = np.asarray(v_abc, dtype=float)
    al = (2.0 * v[..., 0] - v[..., 1] - v[..., 2]) / 3.0
    be = (v[..., 1] - v[..., 2]) / np.sqrt(3.0)
    return al, be


def vq_of(theta, al, be):
    """q-axis component of the stationary-frame vector (al, be) at angle theta."""
    return be * np.cos(theta) - al * np.sin(theta)


def oracle_step(theta, xi, v_abc, dt, kp=KP, ki=KI, w0=W0, n_sub=N_SUB):
    """True next (theta, xi) after one coarse step of length dt.

    Vectorized over leading axes: theta, xi of shape (n,), v_abc of shape
    (n, 3), dt scalar or (n,).  Scalars work too.  theta is returned
    unwrapped so (theta_next - theta)/dt is a clean average rate; dt = 0
    entries come back unchanged.
    """
    th = np.array(theta, dtype=float, copy=True)
    x = np.array(xi, dtype=float, copy=True)
    al_end, be_end = clarke(v_abc)
    dt = np.asarray(dt, dtype=float)
    h = dt / n_sub

    def rates(th_s, x_s, t_s):
        # voltage vector rotated back from its end-of-step snapshot
        ang = w0 * (t_s - dt)
        c, s = np.cos(ang), np.sin(ang)
        al = al_end * c - be_end * s
        be = al_end * s + be_end * c
        vq = vq_of(th_s, al, be)
        return w0 + kp * vq + x_s, ki * vq

    for k in range(n_sub):
        t0 = k * h
        d1t, d1x = rates(th, x, t0)
        d2t, d2x = rates(th + 0.5 * h * d1t, x + 0.5 * h * d1x, t0 + 0.5 * h)
        d3t, d3x = rates(th + 0.5 * h * d2t, x + 0.5 * h * d2x, t0 + 0.5 * h)
        d4t, d4x = rates(th + h * d3t, x + h * d3x, t0 + h)
        th = th + (h / 6.0) * (d1t + 2.0 * d2t + 2.0 * d3t + d4t)
        x = x + (h / 6.0) * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)
    return th, x


def balanced(amp, phase):
    """Three phase samples of a balanced set at the given amplitude/angle."""
    amp = np.asarray(amp, dtype=float)
    phase = np.asarray(phase, dtype=float)
    shifts = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
    return amp[..., None] * np.cos(phase[..., None] + shifts)


def disturbance_response(jump=0.0, dip=1.0, t_end=0.6, dt=1e-4,
                         kp=KP, ki=KI, w0=W0, n_sub=20):
    """Integrator excursion while the PLL rides through disturbances.

    The grid vector spins at w0; at t = 0.1 s its angle jumps by `jump` rad
    and its amplitude drops to `dip`, recovering 0.1 s later (the shape of
    the benchmark's fault events).  `jump` and `dip` may be equal-length
    arrays, in which case all cases integrate side by side.  Returns the xi
    trajectory on the coarse grid, shape (n_steps + 1,) + case shape; the
    sampling domain for the integrator feature is measured from it.
    """
    jump = np.asarray(jump, dtype=float)
    dip = np.asarray(dip, dtype=float)
    jump, dip = np.broadcast_arrays(jump, dip)
    n = int(round(t_end / dt))
    th = np.zeros(jump.shape)
    x = np.zeros(jump.shape)
    xs = np.empty((n + 1,) + jump.shape)
    xs[0] = x
    for k in range(1, n + 1):
        t = k * dt
        faulted = 0.1 <= t < 0.2
        amp = np.where(faulted, dip, 1.0)
        ph = w0 * t + np.where(t >= 0.1, jump, 0.0)
        v = balanced(amp, ph)
        th, x = oracle_step(th, x, v, dt, kp=kp, ki=ki, w0=w0, n_sub=n_sub)
        xs[k] = x
    return xs
