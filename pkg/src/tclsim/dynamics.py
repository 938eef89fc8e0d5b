"""Five-level TCL master equation and its time integration.

The density matrix lives in the basis ``(g, e1, e2, m1, m2)``. Every
transition ``upper -> lower`` has a jump operator ``S = |lower><upper|`` and a
time-dependent rate from :mod:`tclsim.rates`. Transitions sharing a bath
interfere through cross terms weighted by an alignment ``p``. Under the
default flags the equation is written in the interaction picture, so the
cross terms between the e1 and e2 channels carry the phase
``exp(+/- i Delta t)`` and no Hamiltonian term appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rates import RateFunction, cross_rate

LEVELS = ("g", "e1", "e2", "m1", "m2")
DIM = len(LEVELS)

#: Sample-level diagnostics thresholds; a run aborts at 10x these.
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-8
ABORT_FACTOR = 10.0


class IntegrationError(RuntimeError):
    """Numerical failure while integrating (step underflow, NaN)."""


class InvariantBreach(IntegrationError):
    """Trace or Hermiticity drifted beyond the abort threshold."""


def level_index(label: str) -> int:
    try:
        return LEVELS.index(label)
    except ValueError:
        raise ValueError(f"unknown level {label!r}; expected one of {LEVELS}") from None


def projector(label_a: str, label_b: Optional[str] = None) -> np.ndarray:
    """``|a><b|`` as a dense complex matrix."""
    out = np.zeros((DIM, DIM), dtype=complex)
    out[level_index(label_a), level_index(label_b or label_a)] = 1.0
    return out


@dataclass(frozen=True)
class Transition:
    """A dissipative channel ``upper -> lower`` coupled to bath ``bath_id``."""

    name: str
    upper: str
    lower: str
    bath_id: str
    rate: RateFunction
    nbar: float = 0.0

    def __post_init__(self):
        if self.upper == self.lower:
            raise ValueError(f"transition {self.name!r} must join two distinct levels")
        level_index(self.upper)
        level_index(self.lower)
        if not (self.nbar >= 0 and math.isfinite(self.nbar)):
            raise ValueError(f"nbar of {self.name!r} must be finite and >= 0, got {self.nbar!r}")

    @property
    def jump(self) -> np.ndarray:
        return projector(self.lower, self.upper)


@dataclass(frozen=True)
class LevelSystem:
    energies: tuple  # rad/fs, aligned with LEVELS
    delta_split: float
    transitions: tuple = ()

    def __post_init__(self):
        if len(self.energies) != DIM or not all(math.isfinite(e) for e in self.energies):
            raise ValueError("need five finite level energies")
        e1, e2 = self.energy("e1"), self.energy("e2")
        if abs((e1 - e2) - self.delta_split) > 1e-12 * max(1.0, abs(e1)):
            raise ValueError("e1 - e2 must equal delta_split")

    def energy(self, label: str) -> float:
        return self.energies[level_index(label)]

    def transition_omega(self, tr: Transition) -> float:
        return self.energy(tr.upper) - self.energy(tr.lower)

    def transition(self, name: str) -> Transition:
        for tr in self.transitions:
            if tr.name == name:
                return tr
        raise KeyError(name)

    def hamiltonian(self) -> np.ndarray:
        return np.diag(np.asarray(self.energies, dtype=complex))

    def baths(self) -> dict:
        out: dict = {}
        for tr in self.transitions:
            out.setdefault(tr.bath_id, []).append(tr)
        return out


@dataclass(frozen=True)
class ModelFlags:
    secular: bool = False
    free_evolution: bool = False
    nonsecular_phase: bool = True
    dephasing: bool = True


@dataclass(frozen=True)
class SolverSettings:
    """``max_step`` doubles as the fixed step of the ``rk4`` method."""

    method: str = "rk45"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1.0
    sample_interval: float = 1.0

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown solver method {self.method!r}")
        for name in ("rel_tol", "abs_tol", "max_step", "sample_interval"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")


def _alignment(bath_id: str, p_hot: float, p_cold: float) -> float:
    return {"hot": p_hot, "cold1": p_cold}.get(bath_id, 0.0)


def _channel_pairs(system: LevelSystem, p_hot: float, p_cold: float, flags: ModelFlags):
    """Yield ``(tr_i, tr_j, p)`` for every dissipator term: diagonal pairs
    with ``p = 1`` and same-bath cross pairs with the bath alignment."""
    for bath_id, trs in system.baths().items():
        p = _alignment(bath_id, p_hot, p_cold)
        for a in trs:
            for b in trs:
                if a is b:
                    yield a, b, 1.0
                elif not flags.secular and p != 0.0:
                    yield a, b, p


def liouvillian_apply(rho, t: float, system: LevelSystem, p_hot: float, p_cold: float,
                      flags: ModelFlags = ModelFlags(), tau2_inv: float = 0.0) -> np.ndarray:
    """Right-hand side ``d rho / dt`` evaluated with plain matrix products.

    For each pair of channels ``(i, j)`` on one bath,

        w_e (S_j rho S_i^+ - {S_i^+ S_j, rho}/2)
      + w_a (S_i^+ rho S_j - {S_j S_i^+, rho}/2)

    with ``w_e = c_ij sqrt((n_i+1)(n_j+1))`` and ``w_a = c_ij sqrt(n_i n_j)``,
    where ``c_ii = gamma_i(t)`` and ``c_ij = p sqrt(gamma_i gamma_j)`` times
    ``exp(i (w_i - w_j) t)`` when ``flags.nonsecular_phase``. For ``i == j``
    this is the usual Lindblad dissipator with ``(n+1)`` emission and ``n``
    absorption.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (DIM, DIM):
        raise ValueError(f"rho must be {DIM}x{DIM}, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho contains NaN or inf")
    out = np.zeros_like(rho)
    for ti, tj, p in _channel_pairs(system, p_hot, p_cold, flags):
        if ti is tj:
            c = complex(ti.rate.value(t))
        else:
            c = complex(cross_rate(t, ti.rate, tj.rate, p))
            if flags.nonsecular_phase:
                dw = system.transition_omega(ti) - system.transition_omega(tj)
                c *= complex(math.cos(dw * t), math.sin(dw * t))
        Si, Sj = ti.jump, tj.jump
        Sid = Si.conj().T
        we = c * math.sqrt((ti.nbar + 1.0) * (tj.nbar + 1.0))
        wa = c * math.sqrt(ti.nbar * tj.nbar)
        if we != 0:
            K = Sid @ Sj
            out += we * (Sj @ rho @ Sid - 0.5 * (K @ rho + rho @ K))
        if wa != 0:
            K = Sj @ Sid
            out += wa * (Sid @ rho @ Sj - 0.5 * (K @ rho + rho @ K))
    if flags.dephasing and tau2_inv:
        a, b = level_index("e1"), level_index("e2")
        out[a, b] -= tau2_inv * rho[a, b]
        out[b, a] -= tau2_inv * rho[b, a]
    if flags.free_evolution:
        H = system.hamiltonian()
        out += -1j * (H @ rho - rho @ H)
    return out


def _spre(A):
    return np.kron(A, np.eye(DIM))


def _spost(A):
    return np.kron(np.eye(DIM), A.T)


def _sprepost(A, B):
    # row-major vec: vec(A X B) = (A kron B^T) vec(X)
    return np.kron(A, B.T)


class Liouvillian:
    """The same generator as :func:`liouvillian_apply`, assembled once as a
    stack of 25x25 superoperators whose time-dependent weights are combined
    on each call. Used by the integrators."""

    def __init__(self, system: LevelSystem, p_hot: float = 1.0, p_cold: float = 1.0,
                 flags: ModelFlags = ModelFlags(), tau2_inv: float = 0.0):
        for name, p in (("p_hot", p_hot), ("p_cold", p_cold)):
            if not -1.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {p!r}")
        self.system = system
        self.flags = flags
        self.rates = [tr.rate for tr in system.transitions]
        idx = {id(tr): k for k, tr in enumerate(system.transitions)}

        supers, ii, jj, weights, dws = [], [], [], [], []
        for ti, tj, p in _channel_pairs(system, p_hot, p_cold, flags):
            Si, Sj = ti.jump, tj.jump
            Sid = Si.conj().T
            dw = 0.0
            if ti is not tj and flags.nonsecular_phase:
                dw = system.transition_omega(ti) - system.transition_omega(tj)
            for w, sup in (
                (p * math.sqrt((ti.nbar + 1.0) * (tj.nbar + 1.0)),
                 lambda: _sprepost(Sj, Sid) - 0.5 * (_spre(Sid @ Sj) + _spost(Sid @ Sj))),
                (p * math.sqrt(ti.nbar * tj.nbar),
                 lambda: _sprepost(Sid, Sj) - 0.5 * (_spre(Sj @ Sid) + _spost(Sj @ Sid))),
            ):
                if w == 0.0:
                    continue
                supers.append(sup())
                ii.append(idx[id(ti)])
                jj.append(idx[id(tj)])
                weights.append(w)
                dws.append(dw)

        self._stack = np.array(supers).reshape(len(supers), DIM * DIM, DIM * DIM) if supers \
            else np.zeros((0, DIM * DIM, DIM * DIM), dtype=complex)
        self._i = np.array(ii, dtype=int)
        self._j = np.array(jj, dtype=int)
        self._w = np.array(weights, dtype=float)
        self._dw = np.array(dws, dtype=float)
        self._has_phase = bool(np.any(self._dw != 0.0))

        static = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
        if flags.dephasing and tau2_inv:
            a, b = level_index("e1"), level_index("e2")
            static[a * DIM + b, a * DIM + b] -= tau2_inv
            static[b * DIM + a, b * DIM + a] -= tau2_inv
        if flags.free_evolution:
            H = system.hamiltonian()
            static += -1j * (_spre(H) - _spost(H))
        self._static = static

    def coefficients(self, t: float) -> np.ndarray:
        g = np.array([r.value(t) for r in self.rates], dtype=float)
        c = self._w * np.sqrt(g[self._i] * g[self._j])
        if self._has_phase:
            return c * np.exp(1j * self._dw * t)
        return c.astype(complex)

    def matrix(self, t: float) -> np.ndarray:
        if not len(self._w):
            return self._static.copy()
        return np.tensordot(self.coefficients(t), self._stack, axes=1) + self._static

    def apply(self, rho, t: float) -> np.ndarray:
        return (self.matrix(t) @ np.asarray(rho, dtype=complex).reshape(-1)).reshape(DIM, DIM)


@dataclass
class RawTrajectory:
    """Sampled states straight from the integrator.

    ``hermiticity_drift`` is the largest ``max|rho - rho^+|`` seen before
    re-symmetrization over the steps leading to each sample.
    """

    times: np.ndarray
    states: np.ndarray
    trace_error: np.ndarray
    hermiticity_drift: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0
    info: dict = field(default_factory=dict)


def sample_times(horizon: float, interval: float) -> np.ndarray:
    n = int(math.floor(horizon / interval + 1e-9))
    ts = interval * np.arange(n + 1, dtype=float)
    if horizon - ts[-1] > 1e-9 * interval:
        ts = np.append(ts, horizon)
    return ts


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _symmetrize(y: np.ndarray) -> tuple[np.ndarray, float]:
    m = y.reshape(DIM, DIM)
    drift = float(np.max(np.abs(m - m.conj().T)))
    return (0.5 * (m + m.conj().T)).reshape(-1), drift


class _Stepper:
    def __init__(self, gen: Liouvillian, settings: SolverSettings):
        self.gen = gen
        self.s = settings
        self.n_steps = 0
        self.n_rejected = 0
        self.trace0 = 1.0

    def f(self, t, y):
        return self.gen.matrix(t) @ y


def _check(t: float, y: np.ndarray, drift: float, trace0: float) -> float:
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t={t:.6g} fs")
    tr_err = abs(complex(np.trace(y.reshape(DIM, DIM))) - trace0)
    if tr_err > ABORT_FACTOR * TRACE_TOL:
        raise InvariantBreach(f"trace error {tr_err:.3e} at t={t:.6g} fs exceeds {ABORT_FACTOR * TRACE_TOL:.1e}")
    if drift > ABORT_FACTOR * HERMITICITY_TOL:
        raise InvariantBreach(
            f"hermiticity drift {drift:.3e} at t={t:.6g} fs exceeds {ABORT_FACTOR * HERMITICITY_TOL:.1e}")
    return tr_err


def integrate(scenario) -> RawTrajectory:
    """Propagate ``scenario.initial_rho()`` to ``scenario.horizon_fs``.

    ``scenario`` needs ``system``, ``p_hot``, ``p_cold``, ``tau2_inv``,
    ``flags``, ``solver``, ``horizon_fs`` and ``initial_rho()``; see
    :class:`tclsim.model.Scenario`.
    """
    gen = Liouvillian(scenario.system, scenario.p_hot, scenario.p_cold, scenario.flags, scenario.tau2_inv)
    rho0 = np.asarray(scenario.initial_rho(), dtype=complex)
    return propagate(gen, rho0, scenario.horizon_fs, scenario.solver)


def propagate(gen: Liouvillian, rho0, horizon: float, settings: SolverSettings) -> RawTrajectory:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ts = sample_times(horizon, settings.sample_interval)
    y, _ = _symmetrize(np.asarray(rho0, dtype=complex).reshape(-1))
    states = np.empty((ts.size, DIM, DIM), dtype=complex)
    trace_err = np.empty(ts.size)
    drift = np.zeros(ts.size)
    states[0] = y.reshape(DIM, DIM)
    # measured against the initial trace, which is 1 for every valid state
    trace0 = complex(np.trace(states[0]))
    trace_err[0] = 0.0

    st = _Stepper(gen, settings)
    st.trace0 = trace0
    advance = _advance_rk45 if settings.method == "rk45" else _advance_rk4
    t = 0.0
    carry = {}
    for k in range(1, ts.size):
        y, worst = advance(st, t, ts[k], y, carry)
        t = ts[k]
        states[k] = y.reshape(DIM, DIM)
        trace_err[k] = abs(complex(np.trace(states[k])) - trace0)
        drift[k] = worst
    return RawTrajectory(ts, states, trace_err, drift, st.n_steps, st.n_rejected,
                         {"method": settings.method})


def _advance_rk4(st: _Stepper, t0: float, t1: float, y: np.ndarray, carry) -> tuple[np.ndarray, float]:
    h0 = st.s.max_step
    n = max(1, int(math.ceil((t1 - t0) / h0 - 1e-9)))
    h = (t1 - t0) / n
    worst = 0.0
    t = t0
    for m in range(n):
        k1 = st.f(t, y)
        k2 = st.f(t + h / 2, y + h / 2 * k1)
        k3 = st.f(t + h / 2, y + h / 2 * k2)
        k4 = st.f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (m + 1) * h
        y, d = _symmetrize(y)
        worst = max(worst, d)
        _check(t, y, d, st.trace0)
        st.n_steps += 1
    return y, worst


def _advance_rk45(st: _Stepper, t0: float, t1: float, y: np.ndarray, carry) -> tuple[np.ndarray, float]:
    s = st.s
    h = carry.get("h", min(s.max_step, t1 - t0))
    k_first = carry.get("k_first")
    if k_first is None:
        k_first = st.f(t0, y)
    t = t0
    worst = 0.0
    while t < t1:
        h = min(h, s.max_step)
        last = t + h >= t1 - 1e-12 * max(1.0, t1)
        h_try = t1 - t if last else h
        if h_try < 1e-10 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow (h={h_try:.3e}) at t={t:.6g} fs")
        ks = [k_first]
        for i in range(1, 7):
            yi = y + h_try * sum(a * kk for a, kk in zip(_A[i], ks) if a != 0.0)
            ks.append(st.f(t + _C[i] * h_try, yi))
        y_new = y + h_try * sum(b * kk for b, kk in zip(_B, ks) if b != 0.0)
        err_vec = h_try * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
        scale = s.abs_tol + s.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(over="ignore"):
            err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t1 if last else t + h_try
            y, d = _symmetrize(y_new)
            worst = max(worst, d)
            _check(t, y, d, st.trace0)
            # FSAL: the generator preserves Hermiticity, so f(sym y) = sym f(y)
            k7 = ks[6].reshape(DIM, DIM)
            k_first = (0.5 * (k7 + k7.conj().T)).reshape(-1)
            st.n_steps += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if not last or fac < 1.0:
                h = h_try * fac
        else:
            st.n_rejected += 1
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-10 * max(1.0, abs(t)):
                raise IntegrationError(
                    f"step size underflow at t={t:.6g} fs (local error norm {err:.3e})")
    carry["h"] = h
    carry["k_first"] = k_first
    return y, worst


def steady_state_detect(traj, window: float, eps: float) -> Optional[float]:
    """Earliest sample time ``t`` at which ``|rho_e1e2|`` stays within a band
    of width ``eps * |rho_e1e2(0)|`` over ``[t, t + window]``.

    ``traj`` needs ``times`` and ``abs_c`` arrays. Returns ``None`` when no
    such window exists.
    """
    ts = np.asarray(traj.times, dtype=float)
    c = np.asarray(traj.abs_c, dtype=float)
    if window <= 0:
        raise ValueError("window must be positive")
    if ts.size == 0 or ts[-1] - ts[0] < window:
        raise ValueError(f"window {window} fs is longer than the trajectory")
    band = eps * c[0]
    ends = np.searchsorted(ts, ts + window * (1 + 1e-12), side="right")
    for k in range(ts.size):
        if ts[k] + window > ts[-1] * (1 + 1e-12):
            break
        seg = c[k:ends[k]]
        spread = float(seg.max() - seg.min())
        if spread < band or spread == 0.0:
            return float(ts[k])
    return None
