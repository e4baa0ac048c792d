"""Trapezoidal companion models and the nodal network solver.

Every dynamic branch is replaced by a conductance in parallel with a history
current source (Dommel's method).  All branch kinds share the recovery law

    i(t) = g_eq * v(t) + I_hist(t)

and differ only in how the history is advanced:

    inductor  (+ series r):  I_hist(t) = a*i(t-dt) + g_eq*v(t-dt)
    capacitor (+ series r):  I_hist(t) = a*i(t-dt) - g_eq*v(t-dt)
    resistor:                I_hist = 0

with a = (2L/dt - r)/(2L/dt + r) resp. (r - dt/2C)/(r + dt/2C); the pure-L and
pure-C limits are a = 1 and a = -1.  Ideal voltage sources are carried as extra
unknowns (their currents) in an extended, still-symmetric system.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    IsolatedNode,
    NonPositiveStep,
    NonPositiveValue,
    SingularMatrix,
)

GROUND = -1

RESISTOR = "resistor"
INDUCTOR = "inductor"
CAPACITOR = "capacitor"
VOLTAGE_SOURCE = "voltage_source"

_KINDS = (RESISTOR, INDUCTOR, CAPACITOR, VOLTAGE_SOURCE)

# numerical singularity threshold for the extended nodal matrix
_COND_LIMIT = 1e12


@dataclass
class Element:
    """One physical two-terminal element.

    nodes are (from, to) indices, GROUND (-1) allowed.  value is ohms, henries,
    farads, or the source magnitude; series_resistance models lossy L/C branches
    (e.g. a damped filter capacitor) without adding a node.
    """

    kind: str
    nodes: tuple
    value: float
    series_resistance: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind != VOLTAGE_SOURCE and not self.value > 0.0:
            raise NonPositiveValue(f"{self.kind} value must be > 0, got {self.value}")
        if self.series_resistance < 0.0:
            raise NonPositiveValue("series_resistance must be >= 0")
        k, m = self.nodes
        if k == m:
            raise ValueError("element nodes must differ")
        if min(k, m) < GROUND:
            raise ValueError(f"bad node index in {self.nodes}")


@dataclass
class CompanionBranch:
    """Discrete companion of one element: i = g_eq*v + history."""

    kind: str
    nodes: tuple
    g_eq: float
    history: np.ndarray  # one entry per solution column (phase)
    a_coef: float        # history = a_coef*i_prev + b_coef*v_prev
    b_coef: float


def companion_of(element, dt):
    """Build the trapezoidal companion branch for one R/L/C element."""
    if not dt > 0.0:
        raise NonPositiveStep(f"dt must be > 0, got {dt}")
    if element.kind == VOLTAGE_SOURCE:
        raise ValueError("ideal sources have no companion branch; assemble() handles them")
    if not element.value > 0.0:
        raise NonPositiveValue(f"{element.kind} value must be > 0")
    r = element.series_resistance
    if element.kind == RESISTOR:
        g, a, b = 1.0 / element.value, 0.0, 0.0
    elif element.kind == INDUCTOR:
        den = 2.0 * element.value / dt + r
        g = 1.0 / den
        a = (2.0 * element.value / dt - r) / den
        b = g
    else:  # capacitor
        den = r + dt / (2.0 * element.value)
        g = 1.0 / den
        a = (r - dt / (2.0 * element.value)) / den
        b = -g
    return CompanionBranch(element.kind, element.nodes, g, np.zeros(1), a, b)


def update_history(branch, v_branch, i_branch):
    """Advance one branch's history from its solved voltage and current."""
    hist = branch.a_coef * np.asarray(i_branch, float) + branch.b_coef * np.asarray(v_branch, float)
    return replace(branch, history=np.atleast_1d(hist))


@dataclass
class NodalSystem:
    """Assembled network: symmetric Y extended with ideal-source constraints.

    Solution columns let several identical single-phase networks (the three
    phases of a balanced system) share one factorization.
    """

    n_nodes: int
    columns: int
    y: np.ndarray
    m_ext: np.ndarray
    lu: tuple
    m_inv: np.ndarray
    branches: list
    source_nodes: list           # node index per ideal source, in element order
    source_values: np.ndarray    # (n_sources, columns), set before each solve
    dt: float
    # hot-path mirrors of the branch lists
    _br_k: np.ndarray = field(default=None, repr=False)
    _br_m: np.ndarray = field(default=None, repr=False)
    _br_g: np.ndarray = field(default=None, repr=False)
    _br_a: np.ndarray = field(default=None, repr=False)
    _br_b: np.ndarray = field(default=None, repr=False)
    _hist: np.ndarray = field(default=None, repr=False)
    _last_rhs: np.ndarray = field(default=None, repr=False)
    _last_x: np.ndarray = field(default=None, repr=False)
    branch_currents: np.ndarray = field(default=None, repr=False)

    # -- assembly ----------------------------------------------------------

    @classmethod
    def assemble(cls, elements, dt, columns=1):
        """Stamp companion conductances into Y and extend with source rows."""
        if not dt > 0.0:
            raise NonPositiveStep(f"dt must be > 0, got {dt}")
        n = 0
        for e in elements:
            n = max(n, e.nodes[0] + 1, e.nodes[1] + 1)
        if n == 0:
            raise ValueError("no nodes in element list")

        branches, sources = [], []
        for e in elements:
            if e.kind == VOLTAGE_SOURCE:
                k, m = e.nodes
                if m != GROUND:
                    raise ValueError("ideal sources must connect node-to-ground here")
                sources.append(k)
            else:
                br = companion_of(e, dt)
                br.history = np.zeros(columns)
                branches.append(br)

        touched = set()
        y = np.zeros((n, n))
        for br in branches:
            k, m = br.nodes
            g = br.g_eq
            if k != GROUND:
                y[k, k] += g
                touched.add(k)
            if m != GROUND:
                y[m, m] += g
                touched.add(m)
            if k != GROUND and m != GROUND:
                y[k, m] -= g
                y[m, k] -= g
        touched.update(sources)
        for node in range(n):
            if node not in touched:
                raise IsolatedNode(f"node {node} has no connected element")

        ns = len(sources)
        m_ext = np.zeros((n + ns, n + ns))
        m_ext[:n, :n] = y
        for j, node in enumerate(sources):
            m_ext[node, n + j] = -1.0   # source current injected into the node
            m_ext[n + j, node] = 1.0    # constraint row: v_node = e
        try:
            lu = scipy.linalg.lu_factor(m_ext)
        except scipy.linalg.LinAlgError as exc:
            raise SingularMatrix(str(exc)) from exc
        if not np.all(np.isfinite(lu[0])) or np.linalg.cond(m_ext) > _COND_LIMIT:
            raise SingularMatrix("extended nodal matrix is numerically singular")
        m_inv = scipy.linalg.lu_solve(lu, np.eye(n + ns))

        sys = cls(
            n_nodes=n,
            columns=columns,
            y=y,
            m_ext=m_ext,
            lu=lu,
            m_inv=m_inv,
            branches=branches,
            source_nodes=sources,
            source_values=np.zeros((ns, columns)),
            dt=dt,
        )
        sys._rebuild_mirrors()
        return sys

    def _rebuild_mirrors(self):
        nb = len(self.branches)
        self._br_k = np.array([b.nodes[0] for b in self.branches], dtype=int)
        self._br_m = np.array([b.nodes[1] for b in self.branches], dtype=int)
        # ground maps onto a padded zero row during gather
        self._br_k[self._br_k == GROUND] = self.n_nodes
        self._br_m[self._br_m == GROUND] = self.n_nodes
        self._br_g = np.array([b.g_eq for b in self.branches])[:, None]
        self._br_a = np.array([b.a_coef for b in self.branches])[:, None]
        self._br_b = np.array([b.b_coef for b in self.branches])[:, None]
        self._hist = np.zeros((nb, self.columns))
        for i, b in enumerate(self.branches):
            self._hist[i, :] = b.history
            b.history = self._hist[i]  # branch views the shared row
        self.branch_currents = np.zeros((nb, self.columns))
        self._vpad = np.zeros((self.n_nodes + 1, self.columns))
        self._rhs = np.zeros((self.n_nodes + len(self.source_nodes), self.columns))
        # incidence matrix turns the history stamp into one small matmul;
        # the extra row swallows ground (index n_nodes)
        self._stamp_inc = np.zeros((self.n_nodes + 1, nb))
        for j in range(nb):
            self._stamp_inc[self._br_k[j], j] += 1.0
            self._stamp_inc[self._br_m[j], j] -= 1.0

    # -- per-step operations ------------------------------------------------

    def set_source_values(self, values):
        values = np.asarray(values, float)
        if values.shape != self.source_values.shape:
            raise DimensionMismatch(
                f"expected source values {self.source_values.shape}, got {values.shape}"
            )
        self.source_values[...] = values

    def solve_step(self, injections, t=0.0):
        """Solve M x = [i - I_hist; e] with the cached factorization.

        Returns node voltages shaped (n_nodes, columns); the full extended
        solution (with source currents) stays cached for advance()/residual().
        """
        inj = np.asarray(injections, float)
        if inj.ndim == 1:
            inj = inj[:, None] * np.ones((1, self.columns))
        if inj.shape != (self.n_nodes, self.columns):
            raise DimensionMismatch(
                f"expected injections ({self.n_nodes}, {self.columns}), got {inj.shape}"
            )
        rhs = self._rhs
        # history stamp: +hist leaves the from-node, enters the to-node
        stamp = self._stamp_inc @ self._hist
        rhs[: self.n_nodes] = inj - stamp[: self.n_nodes]
        rhs[self.n_nodes :] = self.source_values
        x = self.m_inv @ rhs
        self._last_rhs = rhs
        self._last_x = x
        return x[: self.n_nodes]

    def advance(self, v_nodes):
        """Recover branch currents at the solved instant and roll histories."""
        self._vpad[: self.n_nodes] = v_nodes
        vb = self._vpad[self._br_k] - self._vpad[self._br_m]
        i = self._br_g * vb + self._hist
        self.branch_currents[...] = i
        self._hist[...] = self._br_a * i + self._br_b * vb
        return i

    def residual(self):
        """Relative KCL residual of the most recent solve, max over columns."""
        if self._last_x is None:
            return 0.0
        r = self.m_ext @ self._last_x - self._last_rhs
        scale = max(float(np.max(np.abs(self._last_rhs))), 1.0)
        return float(np.max(np.abs(r))) / scale

    def source_currents(self):
        """Currents delivered by the ideal sources in the last solve."""
        return self._last_x[self.n_nodes :]
