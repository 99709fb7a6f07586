"""Closed-loop composition and deterministic integration.

Loops are stacked into one flat state vector and integrated with
fixed-step or embedded-error Runge-Kutta. The two gradient flows in these
loops (coefficient learning and the feedforward solver) run at gains that
make the stacked system stiff by design; the split method variants treat
those blocks exactly -- one frozen-coefficient linear update per accepted
step -- and step the remaining states explicitly. Every integrator here is
deterministic: identical configuration gives bit-identical trajectories on
one platform.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import feedforward, imodel, matcore, plants, regulator
from .errors import (
    ConfigError,
    NonFiniteState,
    ShapeMismatch,
    SingularXi,
    StepUnderflow,
    WindowTooShort,
)

METHODS = ("rk4-fixed", "rk45-adaptive", "rk4-split", "rk45-split")


@dataclass
class IntegratorConfig:
    """How to integrate: method, horizon, step control, and sample stride.

    dt is the fixed step for the rk4 methods and the initial step for the
    adaptive ones. The tolerances and dt bounds drive the embedded-error
    controller. sample_dt = 0 records every accepted step; a positive value
    records one sample per stride crossing (plus the first and last
    points).
    """

    method: str = "rk4-fixed"
    t_end: float = 10.0
    dt: float = 1e-3
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    dt_min: float = 1e-7
    dt_max: float = 0.05
    sample_dt: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown integration method {self.method!r}")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ConfigError("integration tolerances must be positive")
        if self.dt_min <= 0.0 or self.dt_max <= self.dt_min:
            raise ConfigError("need 0 < dt_min < dt_max")
        if self.sample_dt < 0.0:
            raise ConfigError("sample_dt must be nonnegative")


@dataclass(eq=False)
class Trajectory:
    """Recorded run: times, stacked state snapshots, and derived signals."""

    times: np.ndarray
    states: np.ndarray
    labels: tuple = ()
    derived: dict = field(default_factory=dict)

    def signal(self, name):
        """A recorded column by derived-signal name or state label."""
        if name in self.derived:
            return self.derived[name]
        if name in self.labels:
            return self.states[:, self.labels.index(name)]
        raise KeyError(f"no signal named {name!r}")


@dataclass
class ConvergenceReport:
    """Least-squares exponential fit of a signal over a window."""

    exp_rate: float
    final_error: float
    settle_time: float = float("nan")
    window: tuple = (0.0, 0.0)


@dataclass(eq=False)
class StiffBlock:
    """Slice of the stacked state with dynamics z' = -gain G^T (G z - c).

    assemble(x) returns the current (G, c); both are frozen across one
    step, which is exact in the limit where the block is much faster than
    everything else -- the regime these gains put it in.
    """

    sl: slice
    gain: float
    assemble: object


@dataclass(eq=False)
class LoopSystem:
    """A composed closed loop: initial state, full right-hand side, stiff
    block descriptors for the split integrators, state labels, and a hook
    that recomputes per-sample outputs from recorded snapshots."""

    x0: np.ndarray
    rhs: object
    labels: tuple
    stiff: tuple = ()
    derive: object = None


def _exact_gradient_step(z, G, c, gain, dt):
    """Advance z' = -gain G^T (G z - c) exactly by dt with (G, c) frozen.

    Eigendecomposes G^T G and advances each mode by its scalar solution;
    zero eigenvalues (pure drift directions) are handled by the series
    limit of the phi function, so no conditioning is lost for any
    gain * lambda * dt from 0 up to overflow.
    """
    H = G.T @ G
    lam, V = np.linalg.eigh(H)
    lam = np.clip(lam, 0.0, None)
    w = V.T @ z
    f = V.T @ (G.T @ c)
    x = gain * lam * dt
    decay = np.exp(-x)
    phi = np.where(
        x > 1e-8,
        -np.expm1(-x) / np.where(x > 0.0, x, 1.0),
        1.0 - x / 2.0 + x * x / 6.0,
    )
    return V @ (w * decay + f * (gain * dt) * phi)


class _Recorder:
    def __init__(self, sample_dt):
        self.sample_dt = sample_dt
        self.next_mark = None
        self.times = []
        self.states = []

    def record(self, t, x, force=False):
        if self.next_mark is None:
            self.next_mark = t + self.sample_dt
            self.times.append(t)
            self.states.append(x.copy())
            return
        if self.sample_dt == 0.0 or force or t >= self.next_mark - 1e-12:
            if self.times and self.times[-1] == t:
                return
            self.times.append(t)
            self.states.append(x.copy())
            while self.sample_dt > 0.0 and self.next_mark <= t + 1e-12:
                self.next_mark += self.sample_dt

    def build(self, labels):
        return Trajectory(
            times=np.array(self.times),
            states=np.array(self.states),
            labels=tuple(labels),
        )


def _check_finite(t, x):
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"state left the finite range at t = {t:.6g}")


def _rk4_step(rhs, t, x, h):
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau; the fifth-order weights propagate, the
# difference against the fourth-order weights estimates the local error.
_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
          11.0 / 84.0, 0.0)
_DP_B4 = (5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
          -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0)


def _advance_stiff(x, blocks, h):
    for blk in blocks:
        G, c = blk.assemble(x)
        x[blk.sl] = _exact_gradient_step(x[blk.sl], G, c, blk.gain, h)


def _run_fixed(rhs, x0, cfg, blocks, rec):
    t = 0.0
    x = x0
    rec.record(t, x)
    while t < cfg.t_end - 1e-12:
        h = min(cfg.dt, cfg.t_end - t)
        x = _rk4_step(rhs, t, x, h)
        t = t + h
        if blocks:
            _advance_stiff(x, blocks, h)
        _check_finite(t, x)
        rec.record(t, x)
    rec.record(t, x, force=True)


def _run_adaptive(rhs, x0, cfg, blocks, rec):
    t = 0.0
    x = x0
    h = min(cfg.dt, cfg.dt_max)
    rec.record(t, x)
    K = [None] * 7
    while t < cfg.t_end - 1e-12:
        h = min(h, cfg.t_end - t, cfg.dt_max)
        K[0] = rhs(t, x)
        for i in range(1, 7):
            xi = x.copy()
            for j, aij in enumerate(_DP_A[i]):
                if aij != 0.0:
                    xi += (h * aij) * K[j]
            K[i] = rhs(t + _DP_C[i] * h, xi)
        x5 = x.copy()
        x4 = x.copy()
        for j in range(7):
            if _DP_B5[j] != 0.0:
                x5 += (h * _DP_B5[j]) * K[j]
            if _DP_B4[j] != 0.0:
                x4 += (h * _DP_B4[j]) * K[j]
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.sqrt(np.mean(np.square((x5 - x4) / scale))))
        if not np.isfinite(err):
            err = 10.0
        if err <= 1.0:
            t = t + h
            x = x5
            if blocks:
                _advance_stiff(x, blocks, h)
            _check_finite(t, x)
            rec.record(t, x)
        # a zero estimate (exactly resolved step) takes the full growth cap
        h = h * min(5.0, max(0.2, 0.9 * max(err, 1e-16) ** -0.2))
        if h < cfg.dt_min:
            raise StepUnderflow(
                f"step controller hit dt = {h:.3e} < dt_min at t = {t:.6g}"
            )
    rec.record(t, x, force=True)


def integrate(rhs, x0, cfg, stiff=(), labels=()):
    """Integrate x' = rhs(t, x) from x0 under an IntegratorConfig.

    rhs must return a fresh derivative array on every call. For the split
    methods each StiffBlock slice is frozen during the explicit stages
    (its derivative entries zeroed) and then advanced by the exact
    frozen-coefficient update once per accepted step, in listed order.
    The plain methods integrate the full right-hand side and ignore the
    block structure. Raises StepUnderflow or NonFiniteState on failure.
    """
    x0 = np.array(x0, dtype=float).reshape(-1)
    if labels and len(labels) != x0.size:
        raise ShapeMismatch("labels must match the state dimension")
    split = cfg.method in ("rk4-split", "rk45-split")
    blocks = tuple(stiff) if split else ()
    step_rhs = rhs
    if blocks:
        def step_rhs(t, x, _rhs=rhs, _blocks=blocks):
            d = _rhs(t, x)
            for blk in _blocks:
                d[blk.sl] = 0.0
            return d
    rec = _Recorder(cfg.sample_dt)
    if cfg.method in ("rk4-fixed", "rk4-split"):
        _run_fixed(step_rhs, x0, cfg, blocks, rec)
    else:
        _run_adaptive(step_rhs, x0, cfg, blocks, rec)
    return rec.build(labels)


def simulate(loop, cfg):
    """Integrate a composed loop and attach its derived signals."""
    started = time.perf_counter()
    traj = integrate(loop.rhs, loop.x0, cfg, stiff=loop.stiff, labels=loop.labels)
    if loop.derive is not None:
        rows = [loop.derive(t, x) for t, x in zip(traj.times, traj.states)]
        for key in rows[0]:
            traj.derived[key] = np.array([row[key] for row in rows])
    traj.derived["_runtime_seconds"] = time.perf_counter() - started
    return traj


def _float_or_nan(fn):
    try:
        return float(fn())
    except SingularXi:
        return float("nan")


def _omega_slots(a_hat, n_slots):
    try:
        est = imodel.frequencies_from_a(a_hat)
        omegas = list(est.omegas[:n_slots])
    except Exception:
        omegas = []
    while len(omegas) < n_slots:
        omegas.append(float("nan"))
    return omegas


def compose_regulation_loop(plant, exo, spec, gain, estimator, sat=None,
                            z0=(0.0, 0.0), y0=0.0):
    """Stack a learning regulation loop into one flat system.

    With a LorenzPlant the state is (z, y, v, eta, a_hat[, k_hat]): the
    control is the fixed or adaptive law around the gated read-out, the
    filter is driven by the control, and the coefficient estimate follows
    the learning flow. With plant=None the loop degenerates to the observer
    wiring used for frequency estimation: the filter is driven by the
    generator output itself and the state is (v, eta, a_hat).
    """
    n = spec.n
    n_exo = exo.n
    k1 = estimator.k1
    Phi_exo = exo.Phi
    M, N = spec.M, spec.N
    n_omega = max(n // 2, 1)

    if estimator.eta.size != 2 * n or estimator.a_hat.size != n:
        raise ShapeMismatch("estimator state does not match the filter order")

    if plant is None:
        i_v = slice(0, n_exo)
        i_eta = slice(n_exo, n_exo + 2 * n)
        i_a = slice(n_exo + 2 * n, n_exo + 3 * n)
        dim = n_exo + 3 * n
        a_true = exo.a if n_exo == n else None

        def rhs(t, x):
            out = np.empty(dim)
            v = x[i_v]
            eta = x[i_eta]
            out[i_v] = Phi_exo @ v
            out[i_eta] = M @ eta + N * v[0]
            Theta = matcore.hankel(eta)
            out[i_a] = -k1 * (Theta.T @ (Theta @ x[i_a] + eta[n:]))
            return out

        def assemble_learning(x):
            eta = x[i_eta]
            return matcore.hankel(eta), -eta[n:]

        def derive(t, x):
            v = x[i_v]
            eta = x[i_eta]
            a_hat = x[i_a]
            y_ref = float(v[0])
            y_hat = _float_or_nan(lambda: imodel.reconstruct_output(spec, eta, a_hat))
            d = {
                "y0": y_ref,
                "u": y_ref,
                "y_hat": y_hat,
                "ybar": y_hat - y_ref,
                "cond_theta": float(np.linalg.cond(matcore.hankel(eta))),
            }
            for idx, w in enumerate(_omega_slots(a_hat, n_omega)):
                d[f"omega_hat_{idx + 1}"] = w
            if a_true is not None:
                d["abar_norm"] = float(np.linalg.norm(a_hat - a_true))
                a_eta = imodel.direct_a_estimate(spec, eta)
                d["a_eta_err"] = (
                    float("nan") if a_eta is None
                    else float(np.linalg.norm(a_eta - a_true))
                )
                if spec.Q is not None:
                    d["eta_err_norm"] = float(np.linalg.norm(eta - spec.Q @ v))
            return d

        labels = (
            [f"v{i + 1}" for i in range(n_exo)]
            + [f"eta{i + 1}" for i in range(2 * n)]
            + [f"a_hat{i + 1}" for i in range(n)]
        )
        x0 = np.concatenate([exo.v0, estimator.eta, estimator.a_hat])
        return LoopSystem(
            x0=x0,
            rhs=rhs,
            labels=tuple(labels),
            stiff=(StiffBlock(i_a, k1, assemble_learning),),
            derive=derive,
        )

    if not isinstance(plant, plants.LorenzPlant):
        raise ShapeMismatch("regulation loops support LorenzPlant or plant=None")
    if n != 4:
        raise ShapeMismatch("the rotation-tracking loop needs a fourth-order filter")
    sat = sat if sat is not None else imodel.SaturationConfig()
    adaptive = gain.mode == "adaptive"
    a_true = plant.generator_coeffs()

    i_z = slice(0, 2)
    i_y = 2
    i_v = slice(3, 3 + n_exo)
    i_eta = slice(3 + n_exo, 3 + n_exo + 2 * n)
    i_a = slice(3 + n_exo + 2 * n, 3 + n_exo + 3 * n)
    dim = 3 + n_exo + 3 * n + (1 if adaptive else 0)
    i_k = dim - 1

    def control(x):
        e = float(x[i_y] - x[i_v][0])
        chi_s = imodel.chi_saturated(spec, x[i_eta], x[i_a], sat)
        if adaptive:
            gain.k_hat = float(x[i_k])
            u = regulator.control_adaptive(gain, e, chi_s)
        else:
            u = regulator.control_fixed(gain, e, chi_s)
        return e, u, chi_s

    def rhs(t, x):
        e, u, _ = control(x)
        z_dot, y_dot = plants.lorenz_rhs(plant, x[i_z], x[i_y], x[i_v], u)
        out = np.empty(dim)
        out[i_z] = z_dot
        out[i_y] = y_dot
        out[i_v] = Phi_exo @ x[i_v]
        eta = x[i_eta]
        out[i_eta] = M @ eta + N * u
        Theta = matcore.hankel(eta)
        out[i_a] = -k1 * (Theta.T @ (Theta @ x[i_a] + eta[n:]))
        if adaptive:
            out[i_k] = regulator.adaptive_gain_rhs(gain, e)
        return out

    def assemble_learning(x):
        eta = x[i_eta]
        return matcore.hankel(eta), -eta[n:]

    def derive(t, x):
        e, u, chi_s = control(x)
        a_hat = x[i_a]
        d = {
            "e": e,
            "u": u,
            "chi_s": chi_s,
            "abar_norm": float(np.linalg.norm(a_hat - a_true)),
            "cond_theta": float(np.linalg.cond(matcore.hankel(x[i_eta]))),
        }
        if adaptive:
            d["k_hat"] = float(x[i_k])
        for idx, w in enumerate(_omega_slots(a_hat, n_omega)):
            d[f"omega_hat_{idx + 1}"] = w
        return d

    labels = (
        ["z1", "z2", "y"]
        + [f"v{i + 1}" for i in range(n_exo)]
        + [f"eta{i + 1}" for i in range(2 * n)]
        + [f"a_hat{i + 1}" for i in range(n)]
        + (["k_hat"] if adaptive else [])
    )
    parts = [np.asarray(z0, dtype=float).reshape(-1), [float(y0)], exo.v0,
             estimator.eta, estimator.a_hat]
    if adaptive:
        parts.append([float(gain.k_hat)])
    x0 = np.concatenate(parts)
    if x0.size != dim:
        raise ShapeMismatch("initial conditions do not match the loop layout")
    return LoopSystem(
        x0=x0,
        rhs=rhs,
        labels=tuple(labels),
        stiff=(StiffBlock(i_a, k1, assemble_learning),),
        derive=derive,
    )


def compose_feedforward_loop(plant, exo, spec, estimator, sol, t_on=0.0,
                             x0=None):
    """Stack the certainty-equivalence feedforward loop.

    State: (v, eta, x, a_hat, zeta_hat). The filter observes the generator
    output, the learning flow estimates the coefficients, the equation
    flow tracks the feedforward solution at the current estimate, and the
    control law activates at t_on (zero before). The system matrix is
    cached and rebuilt only when the estimate has moved by more than one
    part in 1e9, which keeps the cache exact to well below every tolerance
    used downstream.
    """
    n = spec.n
    n_x = plant.n_x
    if plant.n != n or exo.n != n:
        raise ShapeMismatch("plant forcing, generator and filter orders must agree")
    if estimator.eta.size != 2 * n or estimator.a_hat.size != n:
        raise ShapeMismatch("estimator state does not match the filter order")
    if sol.n_x != n_x or sol.n != n:
        raise ShapeMismatch("feedforward solution does not match the plant")
    k1 = estimator.k1
    Phi_exo = exo.Phi
    M, N = spec.M, spec.N
    A, B, P = plant.A, plant.B, plant.P
    n_omega = max(n // 2, 1)
    nz = (n_x + 1) * n

    i_v = slice(0, n)
    i_eta = slice(n, 3 * n)
    i_x = slice(3 * n, 3 * n + n_x)
    i_a = slice(3 * n + n_x, 4 * n + n_x)
    i_zeta = slice(4 * n + n_x, 4 * n + n_x + nz)
    dim = 4 * n + n_x + nz

    _, b = feedforward.assemble_regulator_system(plant, estimator.a_hat)
    b_scale = float(np.linalg.norm(b))
    work = feedforward.RegulatorSolution(
        zeta_hat=np.array(sol.zeta_hat), n_x=n_x, n=n, k2=sol.k2
    )
    cache = {"a": None, "G": None}

    def system_matrix(a_hat):
        prev = cache["a"]
        if prev is None or np.max(np.abs(a_hat - prev)) > 1e-9 * (
            1.0 + float(np.max(np.abs(a_hat)))
        ):
            cache["G"], _ = feedforward.assemble_regulator_system(plant, a_hat)
            cache["a"] = a_hat.copy()
        return cache["G"]

    def control(t, x):
        if t < t_on:
            return 0.0
        work.zeta_hat = x[i_zeta]
        return feedforward.feedforward_control(
            plant, work, spec, x[i_eta], x[i_a], x[i_x]
        )

    def rhs(t, x):
        out = np.empty(dim)
        v = x[i_v]
        eta = x[i_eta]
        out[i_v] = Phi_exo @ v
        out[i_eta] = M @ eta + N * v[0]
        u = control(t, x)
        out[i_x] = A @ x[i_x] + B * u + P @ v
        Theta = matcore.hankel(eta)
        out[i_a] = -k1 * (Theta.T @ (Theta @ x[i_a] + eta[n:]))
        G = system_matrix(x[i_a])
        work.zeta_hat = x[i_zeta]
        out[i_zeta] = feedforward.gradient_flow_rhs(work, G, b)
        return out

    def assemble_learning(x):
        eta = x[i_eta]
        return matcore.hankel(eta), -eta[n:]

    def assemble_equation(x):
        return system_matrix(x[i_a]), b

    def derive(t, x):
        v = x[i_v]
        a_hat = x[i_a]
        u = control(t, x)
        e = float(plant.C @ x[i_x] + plant.D * u + plant.F @ v)
        G_now, _ = feedforward.assemble_regulator_system(plant, a_hat)
        resid = float(np.linalg.norm(G_now @ x[i_zeta] - b))
        d = {
            "e": e,
            "u": u,
            "y0": float(v[0]),
            "abar_norm": float(np.linalg.norm(a_hat - exo.a)),
            "resid_rel": resid / (b_scale if b_scale > 0.0 else 1.0),
            "cond_theta": float(np.linalg.cond(matcore.hankel(x[i_eta]))),
        }
        if spec.Q is not None:
            d["eta_err_norm"] = float(np.linalg.norm(x[i_eta] - spec.Q @ v))
        for idx, w in enumerate(_omega_slots(a_hat, n_omega)):
            d[f"omega_hat_{idx + 1}"] = w
        return d

    labels = (
        [f"v{i + 1}" for i in range(n)]
        + [f"eta{i + 1}" for i in range(2 * n)]
        + [f"x{i + 1}" for i in range(n_x)]
        + [f"a_hat{i + 1}" for i in range(n)]
        + [f"zeta{i + 1}" for i in range(nz)]
    )
    x_plant = np.zeros(n_x) if x0 is None else np.asarray(x0, float).reshape(-1)
    if x_plant.size != n_x:
        raise ShapeMismatch("plant initial state does not match its dimension")
    x0 = np.concatenate(
        [exo.v0, estimator.eta, x_plant, estimator.a_hat, sol.zeta_hat]
    )
    return LoopSystem(
        x0=x0,
        rhs=rhs,
        labels=tuple(labels),
        stiff=(
            StiffBlock(i_a, k1, assemble_learning),
            StiffBlock(i_zeta, sol.k2, assemble_equation),
        ),
        derive=derive,
    )


def fit_exponential_rate(traj, signal, window=None, threshold=None, floor=1e-14):
    """Exponential-rate fit of |signal| over a time window.

    signal is a derived-signal name, state label, or an array aligned with
    traj.times. window is (t_lo, t_hi), defaulting to the second half of
    the horizon. Returns the least-squares slope of log |signal| (floored
    at floor), the final absolute value, and -- when a threshold is given
    -- the first time after which |signal| stays below it (nan if never).
    """
    y = traj.signal(signal) if isinstance(signal, str) else np.asarray(signal, float)
    t = traj.times
    if y.shape != t.shape:
        raise ShapeMismatch("signal must align with the recorded times")
    if window is None:
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    mask = (t >= window[0]) & (t <= window[1])
    if int(mask.sum()) < 3:
        raise WindowTooShort(
            f"window {window} holds {int(mask.sum())} samples; need at least 3"
        )
    z = np.log(np.maximum(np.abs(y[mask]), floor))
    slope = float(np.polyfit(t[mask], z, 1)[0])
    settle = float("nan")
    if threshold is not None:
        below = np.abs(y) < threshold
        if below[-1]:
            above = np.nonzero(~below)[0]
            settle = float(t[0]) if above.size == 0 else float(t[above[-1] + 1])
    return ConvergenceReport(
        exp_rate=slope,
        final_error=float(abs(y[-1])),
        settle_time=settle,
        window=(float(window[0]), float(window[1])),
    )
