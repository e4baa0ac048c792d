"""Synchronous-frame converter control: Park transforms, PI blocks, PLL.

Conventions (amplitude-invariant Park, q axis such that a locked PLL sees
v_q = 0 and v_d = |V|):

    d =  2/3 * ( cos(th)*a + cos(th-2pi/3)*b + cos(th+2pi/3)*c )
    q = -2/3 * ( sin(th)*a + sin(th-2pi/3)*b + sin(th+2pi/3)*c )

With per-unit peak bases the instantaneous powers are p = v_d*i_d + v_q*i_q
and q = v_d*i_q - v_q*i_d (sign chosen so "PI on (Q* - Q)" is negative
feedback).  The PLL is a PI on v_q driving the frequency deviation; theta is
kept in [0, 2pi).
"""

import math
from dataclasses import dataclass, field, replace

from .errors import NoConvergence

TWO_PI = 2.0 * math.pi
_C23 = 2.0 / 3.0
_COS_G = -0.5                      # cos(2pi/3)
_SIN_G = math.sqrt(3.0) / 2.0      # sin(2pi/3)


def wrap_angle(theta):
    return theta % TWO_PI


def park(v_abc, theta):
    """abc -> (d, q, zero) at rotor angle theta."""
    a, b, c = v_abc
    ct = math.cos(theta)
    st = math.sin(theta)
    # cos/sin of theta -/+ 2pi/3 from angle-sum identities (2 trig calls total)
    cb = ct * _COS_G + st * _SIN_G
    sb = st * _COS_G - ct * _SIN_G
    cc = ct * _COS_G - st * _SIN_G
    sc = st * _COS_G + ct * _SIN_G
    d = _C23 * (ct * a + cb * b + cc * c)
    q = -_C23 * (st * a + sb * b + sc * c)
    z = (a + b + c) / 3.0
    return d, q, z


def inverse_park(v_dq0, theta):
    """(d, q, zero) -> abc at rotor angle theta."""
    d, q, z = v_dq0
    ct = math.cos(theta)
    st = math.sin(theta)
    cb = ct * _COS_G + st * _SIN_G
    sb = st * _COS_G - ct * _SIN_G
    cc = ct * _COS_G - st * _SIN_G
    sc = st * _COS_G + ct * _SIN_G
    a = ct * d - st * q + z
    b = cb * d - sb * q + z
    c = cc * d - sc * q + z
    return a, b, c


def clarke_power(v_abc, i_abc):
    """Instantaneous (p, q) from abc samples, frame-free (pu, peak bases)."""
    va, vb, vc = v_abc
    ia, ib, ic = i_abc
    v_al = _C23 * (va - 0.5 * vb - 0.5 * vc)
    v_be = (vb - vc) / math.sqrt(3.0)
    i_al = _C23 * (ia - 0.5 * ib - 0.5 * ic)
    i_be = (ib - ic) / math.sqrt(3.0)
    return v_al * i_al + v_be * i_be, v_al * i_be - v_be * i_al


@dataclass
class PiState:
    integ: float = 0.0
    prev_error: float = 0.0
    limits: tuple = None


def pi_step(state, error, kp, ki, dt):
    """Trapezoidal PI step.  Returns (output, new state).

    The integrator is frozen (not accumulated) on any step whose raw output
    lands outside the limits; the output itself is clamped.
    """
    integ = state.integ + ki * dt * (error + state.prev_error) / 2.0
    out = kp * error + integ
    if state.limits is not None:
        lo, hi = state.limits
        if out < lo or out > hi:
            out = min(max(out, lo), hi)
            integ = state.integ
    return out, PiState(integ, error, state.limits)


@dataclass
class PllState:
    theta: float
    omega_integ: float = 0.0
    t: float = 0.0
    v_q_prev: float = 0.0
    omega: float = TWO_PI * 50.0  # the stepper's own frequency estimate


@dataclass
class ControlParams:
    kp_pll: float = 25.0
    ki_pll: float = 300.0
    kp_pc: float = 0.5
    ki_pc: float = 30.0
    kp_cc: float = 0.1
    ki_cc: float = 20.0
    omega0: float = TWO_PI * 50.0
    l_c: float = 0.1  # pu, for the current-loop decoupling terms


def pll_step_delayed(s, v_abc, p, dt):
    """One PLL step with v_q taken at the previous angle (opens the loop)."""
    _, v_q, _ = park(v_abc, s.theta)
    omega = p.omega0 + p.kp_pll * v_q + s.omega_integ
    integ = s.omega_integ + p.ki_pll * dt * (v_q + s.v_q_prev) / 2.0
    theta = wrap_angle(s.theta + omega * dt)
    return PllState(theta, integ, s.t + dt, v_q, omega)


def pll_step_iterative(s, v_abc, p, dt, tol=1e-12, max_iter=50):
    """Implicit trapezoidal PLL step, v_q evaluated at the new angle.

    Both states integrate trapezoidally; eliminating the integrator leaves a
    scalar residual in theta solved by Newton (dv_q/dtheta = -v_d comes free
    from the same Park evaluation).  Returns (new state, iterations).
    """
    f_old = p.omega0 + p.kp_pll * s.v_q_prev + s.omega_integ
    gain = 0.5 * dt * (p.kp_pll + 0.5 * p.ki_pll * dt)
    const = s.theta + dt * (p.omega0 + s.omega_integ) + gain * s.v_q_prev

    theta = s.theta + f_old * dt  # explicit predictor
    v_d, v_q, _ = park(v_abc, theta)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r = theta - const - gain * v_q
        dr = 1.0 + gain * v_d  # d(v_q)/d(theta) = -v_d
        step = r / dr
        theta -= step
        v_d, v_q, _ = park(v_abc, theta)
        if abs(step) <= tol:
            break
    else:
        raise NoConvergence(
            f"PLL Newton exceeded {max_iter} iterations", iterations=max_iter,
            residual=abs(theta - const - gain * v_q),
        )
    integ = s.omega_integ + p.ki_pll * dt * (s.v_q_prev + v_q) / 2.0
    omega = p.omega0 + p.kp_pll * v_q + integ
    return PllState(wrap_angle(theta), integ, s.t + dt, v_q, omega), iterations


@dataclass
class Measurements:
    v_abc: tuple  # PCC voltage samples (pu)
    i_abc: tuple  # converter-side current samples (pu)
    p: float      # instantaneous active power at the PCC (pu)
    q: float      # instantaneous reactive power at the PCC (pu)


@dataclass
class ControlState:
    pll: PllState
    outer_d: PiState = field(default_factory=PiState)
    outer_q: PiState = field(default_factory=PiState)
    inner_d: PiState = field(default_factory=PiState)
    inner_q: PiState = field(default_factory=PiState)
    e_d: float = 0.0
    e_q: float = 0.0
    e_abc: tuple = (0.0, 0.0, 0.0)
    v_q: float = 0.0


PLL_MODES = ("delayed", "iterative", "pinn")


def control_chain_step(cs, meas, setpoints, p, dt, pll_mode, pinn_params=None):
    """Advance PLL -> outer power PI -> inner current PI -> modulation.

    Returns (new ControlState, e_abc command for the next network step,
    PLL iteration count).  The command is synthesized at theta + omega*dt so
    that, applied one step later, it stays rotation-consistent.
    """
    if pll_mode == "delayed":
        pll = pll_step_delayed(cs.pll, meas.v_abc, p, dt)
        iterations = 0
    elif pll_mode == "iterative":
        pll, iterations = pll_step_iterative(cs.pll, meas.v_abc, p, dt)
    elif pll_mode == "pinn":
        from .pinn_inference import pll_step_pinn

        pll = pll_step_pinn(pinn_params, cs.pll, meas.v_abc, dt)
        iterations = 0
    else:
        raise ValueError(f"unknown pll mode {pll_mode!r}")

    theta = pll.theta
    omega = pll.omega
    v_d, v_q, _ = park(meas.v_abc, theta)
    i_d, i_q, _ = park(meas.i_abc, theta)

    p_ref, q_ref = setpoints
    id_ref, outer_d = pi_step(cs.outer_d, p_ref - meas.p, p.kp_pc, p.ki_pc, dt)
    iq_ref, outer_q = pi_step(cs.outer_q, q_ref - meas.q, p.kp_pc, p.ki_pc, dt)

    u_d, inner_d = pi_step(cs.inner_d, id_ref - i_d, p.kp_cc, p.ki_cc, dt)
    u_q, inner_q = pi_step(cs.inner_q, iq_ref - i_q, p.kp_cc, p.ki_cc, dt)

    w_pu_lc = (omega / p.omega0) * p.l_c
    e_d = v_d + u_d - w_pu_lc * i_q
    e_q = v_q + u_q + w_pu_lc * i_d
    e_abc = inverse_park((e_d, e_q, 0.0), wrap_angle(theta + omega * dt))

    new_cs = ControlState(pll, outer_d, outer_q, inner_d, inner_q, e_d, e_q, e_abc, v_q)
    return new_cs, e_abc, iterations
