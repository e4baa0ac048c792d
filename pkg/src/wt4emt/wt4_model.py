"""Type-4 wind turbine benchmark: grid + LCL filter + converter control.

Everything is simulated in per-unit on peak bases (v_base = sqrt(2/3)*V_g,
z_base = V_g^2/S_b), so a 1 pu source is a unit-amplitude cosine and the
Table values r/L/C in pu become R = r, L = l/omega0, C = c/omega0 in the
companion formulas.  The three phases are three solution columns of a single
nodal system (balanced model, no mutual coupling).

Steady-state initialization solves the phasor power flow using the *discrete*
branch admittances Y(z) = (g + b/z)/(1 - a/z) at z = exp(j*omega0*dt), i.e.
the admittance the trapezoidal recursion itself exhibits for a sampled
sinusoid.  Histories and control integrators seeded from that solution make
the first simulated step an exact fixed point of the discrete system, not
just an O(dt^2) approximation of the continuous one.
"""

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import circuit
from .circuit import GROUND, Element, NodalSystem
from .control import (
    ControlParams,
    ControlState,
    Measurements,
    PiState,
    PllState,
    clarke_power,
    inverse_park,
    wrap_angle,
)
from .errors import NoEquilibrium, NonPositiveValue, StepOutOfRange

# node / branch / source layout of the single-line diagram
NODE_CONV, NODE_PCC, NODE_GRID = 0, 1, 2
BRANCH_CONV, BRANCH_CAP, BRANCH_GRID = 0, 1, 2
SRC_CONV, SRC_GRID = 0, 1

# phase rotations a, b, c for sampling balanced phasors
_PHASE_ROT = np.exp(-1j * 2.0 * np.pi / 3.0 * np.arange(3))

DT_MIN, DT_MAX = 1e-6, 1e-4


@dataclass
class Wt4Params:
    """Benchmark parameters (filter values in pu, bases in SI)."""

    s_b: float = 100e6        # rated power, VA
    v_g: float = 100e3        # nominal grid voltage, V
    f_0: float = 50.0         # rated frequency, Hz
    r_c: float = 0.005        # converter-side inductor, pu
    l_c: float = 0.1
    r_f: float = 0.0757       # filter capacitor branch, pu
    c_f: float = 0.00184
    r_lg: float = 0.005       # grid-side inductor, pu
    l_g: float = 0.1
    dt: float = 1e-4          # seconds
    grid_phase: float = math.pi / 6.0  # source angle at t=0, rad
    control: ControlParams = field(default_factory=ControlParams)

    def __post_init__(self):
        for name in ("s_b", "v_g", "f_0", "r_c", "l_c", "r_f", "c_f", "r_lg", "l_g"):
            if not getattr(self, name) > 0.0:
                raise NonPositiveValue(f"{name} must be > 0")
        if not DT_MIN <= self.dt <= DT_MAX:
            raise StepOutOfRange(f"dt must lie in [{DT_MIN}, {DT_MAX}] s, got {self.dt}")
        # the decoupling terms must track the physical converter inductance
        self.control = replace(self.control, omega0=self.omega0, l_c=self.l_c)

    @property
    def omega0(self):
        return 2.0 * math.pi * self.f_0

    @property
    def v_base(self):
        """Peak phase voltage base, V."""
        return math.sqrt(2.0 / 3.0) * self.v_g

    @property
    def z_base(self):
        return self.v_g ** 2 / self.s_b

    @property
    def i_base(self):
        """Peak phase current base, A."""
        return self.v_base / self.z_base


@dataclass
class Wt4System:
    params: Wt4Params
    network: NodalSystem
    control: ControlState
    setpoints: tuple = (0.0, 0.0)
    node_conv: int = NODE_CONV
    node_pcc: int = NODE_PCC
    node_grid: int = NODE_GRID
    meas0: Measurements = None  # measurements consistent with the seeded state


def _elements(p):
    w0 = p.omega0
    return [
        Element(circuit.INDUCTOR, (NODE_CONV, NODE_PCC), p.l_c / w0,
                series_resistance=p.r_c),
        Element(circuit.CAPACITOR, (NODE_PCC, GROUND), p.c_f / w0,
                series_resistance=p.r_f),
        Element(circuit.INDUCTOR, (NODE_PCC, NODE_GRID), p.l_g / w0,
                series_resistance=p.r_lg),
        Element(circuit.VOLTAGE_SOURCE, (NODE_CONV, GROUND), 1.0),
        Element(circuit.VOLTAGE_SOURCE, (NODE_GRID, GROUND), 1.0),
    ]


def grid_source_values(p, t, scale=1.0):
    """Per-phase grid source samples at time t (pu)."""
    ang = p.omega0 * t + p.grid_phase
    return (scale * math.cos(ang),
            scale * math.cos(ang - 2.0 * math.pi / 3.0),
            scale * math.cos(ang + 2.0 * math.pi / 3.0))


def build(p):
    """Assemble the three-phase network with a neutral control state."""
    net = NodalSystem.assemble(_elements(p), p.dt, columns=3)
    theta0 = wrap_angle(p.grid_phase)
    pll = PllState(theta0, 0.0, 0.0, 0.0, p.omega0)
    cs = ControlState(pll)
    cs.e_d, cs.e_q = 1.0, 0.0
    cs.e_abc = inverse_park((1.0, 0.0, 0.0), wrap_angle(theta0 + p.omega0 * p.dt))
    return Wt4System(p, net, cs)


def _discrete_admittance(branch, dt, omega):
    """Steady-state admittance the companion recursion presents at omega."""
    zinv = cmath.exp(-1j * omega * dt)
    return (branch.g_eq + branch.b_coef * zinv) / (1.0 - branch.a_coef * zinv)


def _sample(phasor, angle_shift=0.0):
    """Balanced three-phase samples of a pu phasor (a-phase reference)."""
    return np.real(phasor * _PHASE_ROT * cmath.exp(1j * angle_shift))


def init_steady_state(p, setpoints):
    """Build the system seeded at the exact discrete equilibrium for (P*, Q*).

    The measured powers use the converter-side current at the PCC voltage,
    matching what the outer control loop regulates.
    """
    p_ref, q_ref = setpoints
    if abs(p_ref) > 1.0 or abs(q_ref) > 1.0:
        raise NoEquilibrium(
            f"setpoints ({p_ref}, {q_ref}) exceed the 1 pu converter rating"
        )
    net = NodalSystem.assemble(_elements(p), p.dt, columns=3)
    y_c = _discrete_admittance(net.branches[BRANCH_CONV], p.dt, p.omega0)
    y_f = _discrete_admittance(net.branches[BRANCH_CAP], p.dt, p.omega0)
    y_g = _discrete_admittance(net.branches[BRANCH_GRID], p.dt, p.omega0)

    v_src = cmath.exp(1j * p.grid_phase)  # 1 pu grid source phasor
    s_ref = complex(p_ref, q_ref)

    def mismatch(x):
        v_f = complex(x[0], x[1])
        # converter current required for the setpoint vs. KCL at the PCC
        i_need = s_ref / v_f.conjugate()
        r = i_need - y_f * v_f - y_g * (v_f - v_src)
        return [r.real, r.imag]

    x, _info, ier, msg = scipy.optimize.fsolve(
        mismatch, [v_src.real, v_src.imag], full_output=True, xtol=1e-13
    )
    if ier != 1 or max(abs(r) for r in mismatch(x)) > 1e-9:
        raise NoEquilibrium(f"phasor power flow did not converge: {msg}")
    v_f = complex(x[0], x[1])
    i_c = s_ref / v_f.conjugate()
    i_g = y_g * (v_f - v_src)
    i_f = y_f * v_f
    e_conv = v_f + i_c / y_c

    # seed histories from the step at t = 0 so that the first network solve
    # (at t = dt) continues the steady sinusoid exactly
    for idx, (v_br, i_br) in enumerate(
        ((e_conv - v_f, i_c), (v_f, i_f), (v_f - v_src, i_g))
    ):
        br = net.branches[idx]
        br.history[...] = br.a_coef * _sample(i_br) + br.b_coef * _sample(v_br)
        net.branch_currents[idx, :] = _sample(i_br)
    net.set_source_values(np.array([_sample(e_conv), _sample(v_src)]))

    # control state locked on the PCC phasor: frame d-axis along v_f
    theta0 = wrap_angle(cmath.phase(v_f))
    frame = cmath.exp(-1j * cmath.phase(v_f))
    i_dq = i_c * frame
    e_dq = e_conv * frame
    v_d = abs(v_f)
    u_dq = e_dq - v_d - 1j * p.l_c * i_dq  # invert the decoupling relations

    pll = PllState(theta0, 0.0, 0.0, 0.0, p.omega0)
    cs = ControlState(
        pll,
        outer_d=PiState(integ=i_dq.real),
        outer_q=PiState(integ=i_dq.imag),
        inner_d=PiState(integ=u_dq.real),
        inner_q=PiState(integ=u_dq.imag),
        e_d=e_dq.real,
        e_q=e_dq.imag,
        v_q=0.0,
    )
    cs.e_abc = tuple(_sample(e_conv, p.omega0 * p.dt))

    v_abc0 = tuple(_sample(v_f))
    i_abc0 = tuple(_sample(i_c))
    p0, q0 = clarke_power(v_abc0, i_abc0)
    meas0 = Measurements(v_abc0, i_abc0, p0, q0)
    return Wt4System(p, net, cs, setpoints=(p_ref, q_ref), meas0=meas0)
