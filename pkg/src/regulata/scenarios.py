"""Scenario configuration: parsing, construction, execution, verification.

A scenario file is one flat JSON object. The required "scenario" key names
the kind; every other key overrides that kind's default and must belong to
its key set -- unknown keys are rejected rather than ignored, so a typo
cannot silently run a different experiment. Vector-valued keys accept a
literal 0 as shorthand for the zero vector of the right size.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import feedforward, imodel, matcore, plants, regulator, simkit
from .errors import (
    ComplexPairingFailure,
    ConfigError,
    RegulataError,
    SingularSystem,
    WindowTooShort,
)


def _repeated_pole_filter(q):
    """Ascending coefficients of (s + 1)**q with the leading term dropped."""
    return [float(math.comb(q, k)) for k in range(q)]


def _spread_pole_filter():
    # Eighth-order stable filter whose poles spread across the band the
    # rotation scenarios excite; the slowest pair sits near Re = -0.2, so
    # the filter neither swamps nor starves the learning flow there.
    return [1.0, 5.1503, 13.301, 22.2016, 25.7518, 21.6013, 12.8005, 5.2001]


_COMMON = {
    "t_end": 100.0,
    "method": "rk45-split",
    "dt": 1e-3,
    "abs_tol": 1e-10,
    "rel_tol": 1e-8,
    "dt_min": 1e-7,
    "dt_max": 0.05,
    "sample_dt": 0.01,
    "out_dir": None,
    "emit_csv": True,
    "emit_svg": True,
    "emit_report": True,
}

DEFAULTS = {
    "regulation-lorenz": {
        **_COMMON,
        "sigma": 1.0 / 3.0,
        "l_bar": [10.0, 8.0 / 3.0, -28.0],
        "w": [0.0, 0.0, 0.0],
        "b": 1.0,
        "k1": 1.0,
        "delta": 1e6,
        "gain_mode": "adaptive",
        "k": 1.0,
        "k_hat_0": 1.0,
        "rho_coeffs": [1.0, 1.0],
        "m_coeffs": _spread_pole_filter(),
        "z_0": [0.0, 0.0],
        "y_0": 3.0,
        "v_0": [10.0, 2.0],
        "eta_0": 0,
        "a_hat_0": 0,
    },
    "frequency-estimation": {
        **_COMMON,
        "t_end": 40.0,
        "rel_tol": 1e-9,
        "abs_tol": 1e-12,
        "a_coeffs": [100.0, 0.0, 29.0, 0.0],
        "v_0": [0.0, 7.0, 0.0, -133.0],
        "m_coeffs": _repeated_pole_filter(8),
        "k1": 1e7,
        "eta_0": 0,
        "a_hat_0": 0,
    },
    "suspension-feedforward": {
        **_COMMON,
        "rel_tol": 1e-9,
        "abs_tol": 1e-12,
        "sample_dt": 0.02,
        "m_s": 2.40,
        "m_u": 0.36,
        "b_s": 9.8,
        "k_s": 160.0,
        "k_t": 1600.0,
        "b_t": 0.0,
        "k_x": [0.0, 0.0, 0.0, 0.0],
        "a_coeffs": [100.0, 0.0, 29.0, 0.0],
        "v_0": [0.0, 7.0, 0.0, -133.0],
        "m_coeffs": _repeated_pole_filter(8),
        "k1": 1e7,
        "k2": 8000.0,
        "t_on": 40.0,
        "x_0": [0.5962, 6.8197, 0.4243, 0.7145],
        "eta_0": 0,
        "a_hat_0": 0,
        "zeta_0": 0,
    },
    "custom-lti": {
        **_COMMON,
        "t_end": 20.0,
        "method": "rk45-adaptive",
        "dt_max": 0.01,
        "A": [[-1.0]],
        "B": [1.0],
        "P": [[0.0, 0.0]],
        "C": [1.0],
        "D": 0.0,
        "F": [-1.0, 0.0],
        "k_x": [0.0],
        "a_coeffs": [4.0, 0.0],
        "v_0": [2.0, 0.0],
        "m_coeffs": _repeated_pole_filter(4),
        "k1": 100.0,
        "k2": 50.0,
        "t_on": 0.0,
        "x_0": 0,
        "eta_0": 0,
        "a_hat_0": 0,
        "zeta_0": 0,
    },
}

KINDS = tuple(DEFAULTS)


@dataclass(eq=False)
class ScenarioConfig:
    """A scenario kind plus its fully resolved key-value map."""

    kind: str
    values: dict


def parse_config(data):
    """Validate a decoded config object and overlay it onto the defaults."""
    if not isinstance(data, dict):
        raise ConfigError("a scenario config must be a JSON object")
    kind = data.get("scenario")
    if kind not in DEFAULTS:
        raise ConfigError(
            f"unknown scenario {kind!r}; expected one of {', '.join(KINDS)}"
        )
    unknown = sorted(set(data) - set(DEFAULTS[kind]) - {"scenario"})
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {', '.join(unknown)}")
    values = json.loads(json.dumps(DEFAULTS[kind]))
    for key, val in data.items():
        if key != "scenario":
            values[key] = val
    return ScenarioConfig(kind=kind, values=values)


def load_config(path):
    """Read and validate one scenario file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def integrator_config(cfg):
    v = cfg.values
    return simkit.IntegratorConfig(
        method=v["method"],
        t_end=_scalar(v, "t_end"),
        dt=_scalar(v, "dt"),
        abs_tol=_scalar(v, "abs_tol"),
        rel_tol=_scalar(v, "rel_tol"),
        dt_min=_scalar(v, "dt_min"),
        dt_max=_scalar(v, "dt_max"),
        sample_dt=_scalar(v, "sample_dt"),
    )


def _scalar(values, key):
    try:
        return float(values[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r} must be a number") from exc


def _vector(values, key, size):
    raw = values[key]
    if isinstance(raw, (int, float)) and raw == 0:
        return np.zeros(size)
    try:
        arr = np.asarray(raw, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r} must be a number list") from exc
    if size is not None and arr.size != size:
        raise ConfigError(f"key {key!r} must have {size} entries, got {arr.size}")
    return arr


def _matrix(values, key, rows=None, cols=None):
    try:
        arr = np.asarray(values[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r} must be a matrix (list of rows)") from exc
    if arr.ndim != 2:
        raise ConfigError(f"key {key!r} must be a matrix (list of rows)")
    if rows is not None and arr.shape[0] != rows:
        raise ConfigError(f"key {key!r} must have {rows} rows")
    if cols is not None and arr.shape[1] != cols:
        raise ConfigError(f"key {key!r} must have {cols} columns")
    return arr


def _filter_coeffs(values, n):
    m = _vector(values, "m_coeffs", None)
    if m.size != 2 * n:
        raise ConfigError(
            f"m_coeffs must have {2 * n} entries for an order-{n} generator"
        )
    return m


def _build_lorenz(v):
    sigma = _scalar(v, "sigma")
    b_gain = _scalar(v, "b")
    if b_gain == 1.0:
        b_fun = plants.unit_input_gain
    else:
        def b_fun(_v, _w, _g=b_gain):
            return _g
    plant = plants.LorenzPlant(
        L_bar=tuple(_vector(v, "l_bar", 3)),
        w=tuple(_vector(v, "w", 3)),
        sigma=sigma,
        b_fun=b_fun,
    )
    # v_0 is given in the rotation frame (position, velocity/sigma); the
    # companion-form generator carries the derivative itself.
    v0_rot = _vector(v, "v_0", 2)
    exo = plants.Exosystem(
        a=(sigma * sigma, 0.0), v0=(v0_rot[0], sigma * v0_rot[1])
    )
    spec = imodel.InternalModelSpec.build(_filter_coeffs(v, 4))
    gain = regulator_law(v)
    estimator = imodel.EstimatorState(
        eta=_vector(v, "eta_0", 8),
        a_hat=_vector(v, "a_hat_0", 4),
        k1=_scalar(v, "k1"),
    )
    sat = imodel.SaturationConfig(delta=_scalar(v, "delta"))
    loop = simkit.compose_regulation_loop(
        plant, exo, spec, gain, estimator, sat,
        z0=_vector(v, "z_0", 2), y0=_scalar(v, "y_0"),
    )
    ctx = {
        "spec": spec,
        "exo": exo,
        "a_true": plant.generator_coeffs(),
        "adaptive": gain.mode == "adaptive",
    }
    return loop, ctx


def regulator_law(v):
    return regulator.GainLaw(
        mode=v["gain_mode"],
        k=_scalar(v, "k"),
        k_hat=_scalar(v, "k_hat_0"),
        rho_coeffs=tuple(_vector(v, "rho_coeffs", None)),
    )


def _build_frequency(v):
    a = _vector(v, "a_coeffs", None)
    n = a.size
    exo = plants.Exosystem(a=a, v0=_vector(v, "v_0", n))
    spec = imodel.InternalModelSpec.build(_filter_coeffs(v, n), a=a)
    estimator = imodel.EstimatorState(
        eta=_vector(v, "eta_0", 2 * n),
        a_hat=_vector(v, "a_hat_0", n),
        k1=_scalar(v, "k1"),
    )
    loop = simkit.compose_regulation_loop(None, exo, spec, None, estimator)
    return loop, {"spec": spec, "exo": exo, "a_true": a}


def _linear_parts_suspension(v, n):
    qc = plants.QuarterCarPlant(
        m_s=_scalar(v, "m_s"),
        m_u=_scalar(v, "m_u"),
        b_s=_scalar(v, "b_s"),
        k_s=_scalar(v, "k_s"),
        k_t=_scalar(v, "k_t"),
        b_t=_scalar(v, "b_t"),
    )
    A, B, B_d = plants.quarter_car_matrices(qc)
    P = np.zeros((4, n))
    P[:, 0] = B_d
    return feedforward.LinearPlant(
        A=A,
        B=B,
        P=P,
        C=np.array([1.0, 0.0, 0.0, 0.0]),
        D=0.0,
        F=np.zeros(n),
        K_x=_vector(v, "k_x", 4),
    )


def _build_feedforward(v, lin, a):
    n = a.size
    exo = plants.Exosystem(a=a, v0=_vector(v, "v_0", n))
    spec = imodel.InternalModelSpec.build(_filter_coeffs(v, n), a=a)
    estimator = imodel.EstimatorState(
        eta=_vector(v, "eta_0", 2 * n),
        a_hat=_vector(v, "a_hat_0", n),
        k1=_scalar(v, "k1"),
    )
    sol = feedforward.RegulatorSolution(
        zeta_hat=_vector(v, "zeta_0", (lin.n_x + 1) * n),
        n_x=lin.n_x,
        n=n,
        k2=_scalar(v, "k2"),
    )
    t_on = _scalar(v, "t_on")
    loop = simkit.compose_feedforward_loop(
        lin, exo, spec, estimator, sol, t_on=t_on,
        x0=_vector(v, "x_0", lin.n_x),
    )
    ctx = {
        "spec": spec,
        "exo": exo,
        "a_true": a,
        "plant": lin,
        "t_on": t_on,
    }
    return loop, ctx


def _build_suspension(v):
    a = _vector(v, "a_coeffs", None)
    lin = _linear_parts_suspension(v, a.size)
    return _build_feedforward(v, lin, a)


def _build_custom(v):
    a = _vector(v, "a_coeffs", None)
    n = a.size
    A = _matrix(v, "A")
    n_x = A.shape[0]
    if A.shape[1] != n_x:
        raise ConfigError("key 'A' must be square")
    lin = feedforward.LinearPlant(
        A=A,
        B=_vector(v, "B", n_x),
        P=_matrix(v, "P", n_x, n),
        C=_vector(v, "C", n_x),
        D=_scalar(v, "D"),
        F=_vector(v, "F", n),
        K_x=_vector(v, "k_x", n_x),
    )
    return _build_feedforward(v, lin, a)


_BUILDERS = {
    "regulation-lorenz": _build_lorenz,
    "frequency-estimation": _build_frequency,
    "suspension-feedforward": _build_suspension,
    "custom-lti": _build_custom,
}


def build_scenario(cfg):
    """Construct the composed loop and its bookkeeping context."""
    try:
        return _BUILDERS[cfg.kind](cfg.values)
    except ConfigError:
        raise
    except (RegulataError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {cfg.kind} configuration: {exc}") from exc


def run_scenario(cfg):
    """Build, integrate, and summarize one scenario.

    Returns (trajectory, report). Configuration problems raise ConfigError;
    integration failures raise the SimulationError family.
    """
    loop, ctx = build_scenario(cfg)
    traj = simkit.simulate(loop, integrator_config(cfg))
    return traj, _build_report(cfg, ctx, traj)


def _a_hat_end(traj, n):
    return np.array([traj.signal(f"a_hat{i + 1}")[-1] for i in range(n)])


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x)))) if x.size else float("nan")


def _fit(report, traj, name, key, **kw):
    try:
        rep = simkit.fit_exponential_rate(traj, name, **kw)
    except (WindowTooShort, KeyError):
        return None
    report["fitted_rates"][key] = rep.exp_rate
    if not math.isnan(rep.settle_time):
        report["settle_times"][key] = rep.settle_time
    return rep


def _build_report(cfg, ctx, traj):
    report = {
        "scenario": cfg.kind,
        "config": {"scenario": cfg.kind, **dict(sorted(cfg.values.items()))},
        "samples": int(traj.times.size),
        "runtime_seconds": float(traj.derived.get("_runtime_seconds", 0.0)),
        "final_errors": {},
        "fitted_rates": {},
        "settle_times": {},
        "frequency_estimates": {"omegas": [], "bias_present": None},
        "extras": {},
    }
    n = ctx["spec"].n
    try:
        est = imodel.frequencies_from_a(_a_hat_end(traj, n))
        report["frequency_estimates"] = {
            "omegas": [float(w) for w in est.omegas],
            "bias_present": bool(est.bias_present),
        }
    except ComplexPairingFailure:
        pass

    t = traj.times
    abar = traj.derived["abar_norm"]
    report["final_errors"]["coefficient_error"] = float(abar[-1])
    report["extras"]["coefficient_error_peak"] = float(np.max(abar))

    if cfg.kind == "regulation-lorenz":
        e = traj.derived["e"]
        tail = t >= t[-1] - 0.1 * (t[-1] - t[0])
        report["final_errors"]["tracking_error"] = float(abs(e[-1]))
        report["extras"]["max_tracking_error_tail"] = float(np.max(np.abs(e[tail])))
        if ctx["adaptive"]:
            k_hat = traj.derived["k_hat"]
            report["extras"]["gain_final"] = float(k_hat[-1])
            report["extras"]["gain_peak"] = float(np.max(k_hat))
        _fit(report, traj, "e", "tracking_error", threshold=1e-2)
    elif cfg.kind == "frequency-estimation":
        _report_frequency_errors(report, ctx, traj)
        report["final_errors"]["filter_error"] = float(
            traj.derived["eta_err_norm"][-1]
        )
        _fit(report, traj, "eta_err_norm", "filter_error")
    else:
        e = traj.derived["e"]
        resid = traj.derived["resid_rel"]
        report["final_errors"]["tracking_error"] = float(abs(e[-1]))
        report["final_errors"]["solver_residual_rel"] = float(resid[-1])
        t_on = ctx["t_on"]
        if t[0] < t_on < t[-1]:
            before = _rms(e[t <= t_on])
            after = _rms(e[t >= t_on + (t[-1] - t_on) / 3.0])
            report["extras"]["rms_before"] = before
            report["extras"]["rms_after"] = after
            if before > 0.0:
                report["extras"]["rms_ratio"] = after / before
        _report_static_gap(report, ctx, traj)
    return report


def _report_frequency_errors(report, ctx, traj):
    try:
        truth = imodel.frequencies_from_a(np.asarray(ctx["a_true"], float)).omegas
    except ComplexPairingFailure:
        return
    got = report["frequency_estimates"]["omegas"]
    for i, (w_true, w_hat) in enumerate(zip(truth, got)):
        report["final_errors"][f"omega_{i + 1}_error"] = abs(w_hat - w_true)


def _report_static_gap(report, ctx, traj):
    plant = ctx["plant"]
    n = ctx["spec"].n
    try:
        G, b = feedforward.assemble_regulator_system(plant, ctx["a_true"])
        static = feedforward.solve_regulator_static(G, b, plant.n_x, n)
    except SingularSystem:
        return
    nz = (plant.n_x + 1) * n
    zeta_end = np.array([traj.signal(f"zeta{i + 1}")[-1] for i in range(nz)])
    scale = float(np.linalg.norm(static.zeta_hat))
    gap = float(np.linalg.norm(zeta_end - static.zeta_hat))
    report["extras"]["solution_vs_static_rel"] = gap / (scale if scale > 0 else 1.0)


def plot_groups(cfg, traj):
    """Plot layout for one scenario: (name, signal names, log scale)."""
    n_omega = max(ctx_n(cfg) // 2, 1)
    omegas = [f"omega_hat_{i + 1}" for i in range(n_omega)]
    if cfg.kind == "regulation-lorenz":
        groups = [
            ("tracking_error", ["e"], False),
            ("control", ["u"], False),
            ("coefficient_error", ["abar_norm"], True),
            ("frequency_estimates", omegas, False),
        ]
        if "k_hat" in traj.derived:
            groups.insert(2, ("adaptive_gain", ["k_hat"], False))
    elif cfg.kind == "frequency-estimation":
        n = ctx_n(cfg)
        groups = [
            ("filter_error", ["eta_err_norm", "a_eta_err"], True),
            ("output_error", ["ybar"], False),
            ("frequency_estimates", omegas, False),
            ("coefficients", [f"a_hat{i + 1}" for i in range(n)], False),
            ("coefficient_error", ["abar_norm"], True),
        ]
    else:
        groups = [
            ("tracking_error", ["e"], False),
            ("control", ["u"], False),
            ("frequency_estimates", omegas, False),
            ("solver_residual", ["resid_rel"], True),
            ("coefficient_error", ["abar_norm"], False),
        ]
    return groups


def ctx_n(cfg):
    if cfg.kind == "regulation-lorenz":
        return 4
    return _vector(cfg.values, "a_coeffs", None).size


def _verification_inputs(cfg):
    v = cfg.values
    if cfg.kind == "regulation-lorenz":
        sigma = _scalar(v, "sigma")
        a = np.array([9.0 * sigma ** 4, 0.0, 10.0 * sigma ** 2, 0.0])
        return a, _filter_coeffs(v, 4), None
    a = _vector(v, "a_coeffs", None)
    m = _filter_coeffs(v, a.size)
    if cfg.kind == "suspension-feedforward":
        return a, m, _linear_parts_suspension(v, a.size)
    if cfg.kind == "custom-lti":
        A = _matrix(v, "A")
        lin = feedforward.LinearPlant(
            A=A,
            B=_vector(v, "B", A.shape[0]),
            P=_matrix(v, "P", A.shape[0], a.size),
            C=_vector(v, "C", A.shape[0]),
            D=_scalar(v, "D"),
            F=_vector(v, "F", a.size),
            K_x=_vector(v, "k_x", A.shape[0]),
        )
        return a, m, lin
    return a, m, None


def verify_scenario(cfg, seed=0):
    """Run the algebraic pre-flight checks for one scenario.

    Checks the filter and generator assumptions, the steady-state embedding
    and its two independent constructions, and (for the feedforward kinds)
    the plant and the solvability of the regulator system. Returns
    (all_passed, rows); each row is {"name", "passed", "detail"}.
    """
    rows = []

    def add(name, passed, detail):
        rows.append({"name": name, "passed": bool(passed), "detail": str(detail)})

    try:
        a, m, lin = _verification_inputs(cfg)
    except (ConfigError, RegulataError) as exc:
        add("config-valid", False, str(exc))
        return False, rows
    add("config-valid", True, f"generator order {a.size}, filter order {m.size}")
    n = a.size
    rng = np.random.default_rng(seed)

    M = N = None
    try:
        M, N = matcore.internal_model_matrices(m)
        worst = matcore.eigenvalues(matcore.companion(m)).max_real()
        add("filter-hurwitz", True, f"max Re = {worst:.4g}")
    except RegulataError as exc:
        add("filter-hurwitz", False, str(exc))

    try:
        plants.Exosystem(a=a, v0=np.zeros(n))
        eigs = matcore.eigenvalues(matcore.companion(a)).as_complex()
        pretty = ", ".join(f"{z.imag:+.4g}i" for z in eigs)
        add("generator-modes", True, f"modes {pretty}")
    except (ConfigError, RegulataError) as exc:
        add("generator-modes", False, str(exc))

    Xi = None
    try:
        Xi = matcore.xi_matrix(a, m)
        smin = float(np.linalg.svd(Xi, compute_uv=False)[-1])
        ok = smin > 1e-8 * float(np.linalg.norm(Xi))
        add("xi-nonsingular", ok, f"sigma_min = {smin:.4g}")
    except RegulataError as exc:
        add("xi-nonsingular", False, str(exc))

    Q = None
    if M is not None and Xi is not None:
        try:
            Phi = matcore.companion(a)
            Gamma = np.zeros((1, n))
            Gamma[0, 0] = 1.0
            Q = matcore.solve_generalized_sylvester(M, Phi, N.reshape(-1, 1), Gamma)
            Xi_inv = np.linalg.inv(Xi)
            rows_formula = np.vstack(
                [Gamma @ Xi_inv @ np.linalg.matrix_power(Phi, j)
                 for j in range(2 * n)]
            )
            gap = float(
                np.linalg.norm(Q - rows_formula) / (1.0 + np.linalg.norm(Q))
            )
            add("sylvester-residual", gap <= 1e-9,
                f"row-construction gap = {gap:.3g}")
        except RegulataError as exc:
            add("sylvester-residual", False, str(exc))
    else:
        add("sylvester-residual", False, "skipped: prerequisites failed")

    if Q is not None:
        xi_vec = rng.standard_normal(n)
        Phi = matcore.companion(a)
        K = np.column_stack(
            [np.linalg.matrix_power(Phi, j) @ xi_vec for j in range(n)]
        )
        lhs = matcore.hankel(Q @ xi_vec)
        rhs = np.linalg.solve(Xi, K)
        gap = float(np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(rhs)))
        add("hankel-factorization", gap <= 1e-8, f"relative gap = {gap:.3g}")

        spec = imodel.InternalModelSpec.build(m, a=a)
        v_probe = rng.uniform(-5.0, 5.0, size=n)
        eta_star = Q @ v_probe
        a_direct = imodel.direct_a_estimate(spec, eta_star)
        if a_direct is None:
            add("recurrence-consistency", False,
                "steady state too ill-conditioned for the direct estimate")
        else:
            gap_a = float(np.linalg.norm(a_direct - a) / (1.0 + np.linalg.norm(a)))
            chi_val = imodel.chi(spec, eta_star, a)
            gap_chi = abs(chi_val - v_probe[0]) / (1.0 + abs(v_probe[0]))
            add("recurrence-consistency",
                gap_a <= 1e-7 and gap_chi <= 1e-7,
                f"coefficient gap = {gap_a:.3g}, read-out gap = {gap_chi:.3g}")
    else:
        add("hankel-factorization", False, "skipped: no embedding available")
        add("recurrence-consistency", False, "skipped: no embedding available")

    if lin is not None:
        worst = matcore.eigenvalues(
            lin.A + np.outer(lin.B, lin.K_x)
        ).max_real()
        add("plant-hurwitz", worst < 0.0, f"max Re = {worst:.4g}")
        try:
            G, b = feedforward.assemble_regulator_system(lin, a)
            feedforward.solve_regulator_static(G, b, lin.n_x, n)
            smin = float(np.linalg.svd(G, compute_uv=False)[-1])
            add("regulator-system-nonsingular", True, f"sigma_min = {smin:.4g}")
        except SingularSystem as exc:
            add("regulator-system-nonsingular", False, str(exc))

    return all(r["passed"] for r in rows), rows
