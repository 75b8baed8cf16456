"""Time evolution of the open-system models.

Solvers:

* ``evolve_master`` integrates d rho/dt = -i[H, rho] + sum_i L_i rho L_i^dag
  - 1/2 {L_i^dag L_i, rho} with an adaptive Runge-Kutta on the dense state and
  sparse operator action (no superoperator is materialized).
* ``steady_state`` finds rho_ss either by long-time integration (residual
  verified) or from the null space of the materialized Liouvillian.
* ``homodyne_spectrum`` evolves the two-time correlation seed
  A(0) = L rho_ss + rho_ss L^dag under the same generator and Fourier
  transforms the correlation; the delta contribution is the analytic vacuum
  level 1 and negative lags are folded using stationarity, F(-tau) = F(tau)*.
* ``sse_trajectory`` integrates the unnormalized stochastic Schroedinger
  equation with an Euler-Maruyama step and per-step normalization; noise
  streams are keyed per (seed, trajectory, channel) so channel-count changes
  never reshuffle existing streams.
* ``mean_field`` integrates the deterministic part of the supermode
  Heisenberg equations of motion (the classical oracle).
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .hilbert import DensityOperator, LinearOperator, StateVector, vacuum_state
from .model import OpenSystemModel, liouvillian_matrix
from .supermode import SupermodeSet


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


@dataclass
class SimulationRecord:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    final_state: object
    seed: int | None = None
    config_hash: str | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        self.times = t
        for name, series in self.observables.items():
            if len(series) != t.size:
                raise ValueError(f"observable {name!r} length does not match times")


@dataclass
class SpectrumResult:
    omega: np.ndarray
    S: np.ndarray
    normalization: str = "vacuum = 1"
    metadata: dict = field(default_factory=dict)


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


class _MasterRHS:
    """Sparse-action right-hand side of the Lindblad master equation."""

    def __init__(self, model: OpenSystemModel):
        H = model.H.matrix
        Ls = [l.op.matrix for l in model.lindblads]
        acc = -1j * H
        for L in Ls:
            acc = acc - 0.5 * (L.conj().T @ L)
        self.C = acc.tocsr()            # drho = C rho + rho C^dag + sum L rho L^dag
        self.C_conj = acc.conj().tocsr()  # rho C^dag computed as (C_conj rho^T)^T
        self.Ls = [L.tocsr() for L in Ls]
        self.Ldags = [L.conj().T.tocsr() for L in Ls]
        self.dim = model.space.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = self.C @ rho
        out += (self.C_conj @ rho.T).T
        for L, Ldag in zip(self.Ls, self.Ldags):
            out += (L @ rho) @ Ldag
        return out

    def flat(self, _t, y: np.ndarray) -> np.ndarray:
        return self.apply(y.reshape(self.dim, self.dim)).ravel()


def _expect_sparse(op: sparse.spmatrix, rho: np.ndarray) -> complex:
    return complex(op.multiply(rho.T).sum())


def evolve_master(
    model: OpenSystemModel,
    rho0: DensityOperator,
    t_grid,
    observables: dict[str, LinearOperator] | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-11,
    trace_tol: float = 1e-8,
    positivity_tol: float = 1e-8,
    check_positivity: bool = True,
    keep_states: bool = False,
) -> SimulationRecord:
    """Integrate the master equation, recording observables on ``t_grid``.

    Trace drift beyond ``trace_tol`` or an eigenvalue below ``-positivity_tol``
    at any output point raises :class:`ConvergenceError` with a suggestion to
    tighten tolerances.  Output states are symmetrized before recording.
    """
    if rho0.space != model.space:
        raise ValueError("initial state lives on a different space")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two points")
    observables = observables or {}
    for name, op in observables.items():
        if op.space != model.space:
            raise ValueError(f"observable {name!r} lives on a different space")
    rhs = _MasterRHS(model)

    sol = solve_ivp(
        rhs.flat, (t[0], t[-1]), rho0.matrix.ravel(),
        t_eval=t, method="RK45", rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise ConvergenceError(f"master-equation integrator failed: {sol.message}")

    dim = model.space.dim
    series = {name: np.empty(t.size, dtype=complex) for name in observables}
    states = [] if keep_states else None
    rho_out = None
    for idx in range(t.size):
        rho_m = sol.y[:, idx].reshape(dim, dim)
        rho_m = (rho_m + rho_m.conj().T) / 2.0
        tr = np.trace(rho_m).real
        if abs(tr - 1.0) > trace_tol:
            raise ConvergenceError(
                f"trace drift {abs(tr - 1.0):.3e} at t={t[idx]:.4g} exceeds {trace_tol:.1g}; "
                "tighten rtol/atol"
            )
        if check_positivity:
            lam_min = float(np.linalg.eigvalsh(rho_m).min())
            if lam_min < -positivity_tol:
                raise ConvergenceError(
                    f"negative eigenvalue {lam_min:.3e} at t={t[idx]:.4g}; tighten rtol/atol"
                )
        for name, op in observables.items():
            series[name][idx] = _expect_sparse(op.matrix, rho_m)
        if keep_states:
            states.append(DensityOperator(model.space, rho_m))
        rho_out = rho_m

    record = SimulationRecord(
        times=t,
        observables=series,
        final_state=DensityOperator(model.space, rho_out),
        config_hash=_config_hash({"solver": "master", "rtol": rtol, "atol": atol}),
    )
    if keep_states:
        record.extras["states"] = states
    return record


def steady_state(
    model: OpenSystemModel,
    method: str = "auto",
    tol: float = 1e-8,
    rho0: DensityOperator | None = None,
    t_chunk: float = 10.0,
    max_time: float = 10000.0,
    null_space_max_dim: int = 200,
) -> DensityOperator:
    """Steady state of the model by long-time integration or Liouvillian null space.

    The returned state always satisfies ||d rho/dt||_F < tol (verified against
    the true generator for both methods); otherwise :class:`ConvergenceError`.
    """
    if not model.lindblads:
        raise ConvergenceError("model has no Lindblad operators; no relaxation to a steady state")
    if method == "auto":
        method = "null-space" if model.space.dim <= null_space_max_dim else "long-time"
    rhs = _MasterRHS(model)

    if method == "null-space":
        gen = liouvillian_matrix(model).tolil()
        dim = model.space.dim
        # replace the first row with the trace functional; the lost equation is
        # restored by the rank deficiency of the generator
        trace_row = np.zeros(dim * dim, dtype=complex)
        trace_row[np.arange(dim) * dim + np.arange(dim)] = 1.0
        gen[0, :] = trace_row
        b = np.zeros(dim * dim, dtype=complex)
        b[0] = 1.0
        try:
            vec = spsolve(gen.tocsc(), b)
        except Exception as exc:
            raise ConvergenceError(f"null-space solve failed: {exc}") from exc
        rho = vec.reshape(dim, dim)
        rho = (rho + rho.conj().T) / 2.0
        rho = rho / np.trace(rho).real
        residual = float(np.linalg.norm(rhs.apply(rho)))
        if not np.isfinite(residual) or residual > tol:
            raise ConvergenceError(
                f"null-space steady state residual {residual:.3e} exceeds {tol:.1g}"
            )
        return DensityOperator(model.space, rho)

    if method == "long-time":
        rho = (rho0 or vacuum_state(model.space).to_density()).matrix.copy()
        elapsed = 0.0
        while elapsed < max_time:
            sol = solve_ivp(
                rhs.flat, (0.0, t_chunk), rho.ravel(),
                method="RK45", rtol=1e-10, atol=1e-12,
            )
            if not sol.success:
                raise ConvergenceError(f"long-time integrator failed: {sol.message}")
            rho = sol.y[:, -1].reshape(rho.shape)
            rho = (rho + rho.conj().T) / 2.0
            rho = rho / np.trace(rho).real
            elapsed += t_chunk
            residual = float(np.linalg.norm(rhs.apply(rho)))
            if residual < tol:
                return DensityOperator(model.space, rho)
        raise ConvergenceError(
            f"steady state not reached within t={max_time} (residual {residual:.3e})"
        )

    raise ValueError(f"unknown steady-state method {method!r}")


def homodyne_spectrum(
    model: OpenSystemModel,
    channel: LinearOperator,
    tau_max: float,
    omega_grid,
    rho_ss: DensityOperator | None = None,
    n_tau: int = 2001,
    rtol: float = 1e-9,
    atol: float = 1e-11,
    decay_tol: float = 1e-3,
    imag_tol: float = 1e-8,
) -> SpectrumResult:
    """Steady-state homodyne (squeezing) spectrum of one output channel.

    S(w) = 1 + 2 Re int_0^tau_max exp(-i w tau) F(tau) dtau with
    F(tau) = tr[(L + L^dag) A(tau)], A(0) = L rho_ss + rho_ss L^dag.  The
    vacuum level 1 is the analytic delta-function contribution.
    """
    if channel.space != model.space:
        raise ValueError("channel lives on a different space")
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    w = np.asarray(omega_grid, dtype=float)
    if rho_ss is None:
        rho_ss = steady_state(model)

    L = channel.matrix
    A0 = L @ rho_ss.matrix + rho_ss.matrix @ L.conj().T
    quad = (L + L.conj().T).tocsr()

    rhs = _MasterRHS(model)
    taus = np.linspace(0.0, tau_max, n_tau)
    sol = solve_ivp(
        rhs.flat, (0.0, tau_max), A0.ravel(),
        t_eval=taus, method="RK45", rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise ConvergenceError(f"correlation integrator failed: {sol.message}")
    dim = model.space.dim
    corr = np.array([
        _expect_sparse(quad, sol.y[:, i].reshape(dim, dim)) for i in range(n_tau)
    ])

    max_imag = float(np.max(np.abs(corr.imag))) if corr.size else 0.0
    scale = float(np.max(np.abs(corr))) if corr.size else 0.0
    tail = abs(corr[-1]) / scale if scale > 0 else 0.0
    decayed = tail <= decay_tol
    if not decayed:
        warnings.warn(
            f"correlation not decayed at tau_max={tau_max} (tail fraction {tail:.2e}); "
            "spectrum may be distorted",
            stacklevel=2,
        )

    phases = np.exp(-1j * np.outer(w, taus))
    integral = np.trapezoid(phases * corr[None, :], taus, axis=1)
    S = 1.0 + 2.0 * integral.real
    if max_imag > imag_tol * max(scale, 1.0):
        warnings.warn(
            f"correlation has imaginary part {max_imag:.2e}; check channel choice",
            stacklevel=2,
        )
    return SpectrumResult(
        omega=w,
        S=S,
        metadata={
            "tau_max": tau_max,
            "n_tau": n_tau,
            "correlation_tail_fraction": tail,
            "decayed": decayed,
            "max_imag": max_imag,
        },
    )


def rotated_channel(op: LinearOperator, phase_deg: float) -> LinearOperator:
    """Channel with homodyne phase rotated: L -> exp(i phase) L."""
    return np.exp(1j * np.deg2rad(phase_deg)) * op


def _noise_streams(seed: int, trajectory: int, n_channels: int, n_steps: int, dt: float):
    """One Gaussian increment stream per channel, keyed (seed, trajectory, channel)."""
    streams = np.empty((n_channels, n_steps))
    root_dt = np.sqrt(dt)
    for ch in range(n_channels):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(trajectory, ch))
        streams[ch] = np.random.default_rng(ss).normal(0.0, root_dt, n_steps)
    return streams


def _align_grid(t_grid: np.ndarray, dt: float):
    """Output indices of t_grid points on the uniform step grid; grid must align."""
    steps = t_grid / dt
    rounded = np.rint(steps).astype(int)
    if np.max(np.abs(steps - rounded)) > 1e-6:
        raise ValueError("every t_grid point must be an integer multiple of dt")
    return rounded


def sse_trajectory(
    model: OpenSystemModel,
    psi0: StateVector,
    t_grid,
    seed: int,
    dt: float = 1e-3,
    observables: dict[str, LinearOperator] | None = None,
    trajectory_index: int = 0,
    norm_drift_max: float = 0.5,
) -> SimulationRecord:
    """One homodyne-unraveling trajectory by Euler-Maruyama with per-step normalization.

    Records observables at ``t_grid`` (which must lie on the dt step grid) and,
    per channel, the mean homodyne current over each output interval:
    (sum of dW + <L + L^dag> dt) / interval.  Bit-reproducible for fixed
    (seed, trajectory_index, dt, Lindblad order).
    """
    if psi0.space != model.space:
        raise ValueError("initial state lives on a different space")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must start at 0 and increase strictly")
    if dt <= 0:
        raise ValueError("dt must be positive")
    out_steps = _align_grid(t, dt)
    n_steps = out_steps[-1]
    observables = observables or {}
    for name, op in observables.items():
        if op.space != model.space:
            raise ValueError(f"observable {name!r} lives on a different space")

    Ls = [l.op.matrix for l in model.lindblads]
    n_ch = len(Ls)
    A = (-1j * model.H.matrix).tocsr()
    for L in Ls:
        A = A - 0.5 * (L.conj().T @ L)
    A = A.tocsr()

    dW = _noise_streams(seed, trajectory_index, n_ch, n_steps, dt) if n_ch else np.zeros((0, n_steps))

    psi = psi0.normalized().amplitudes.copy()
    series = {name: np.empty(t.size, dtype=complex) for name in observables}
    homodyne = np.zeros((n_ch, t.size - 1))
    current_acc = np.zeros(n_ch)

    def record(out_idx: int):
        for name, op in observables.items():
            series[name][out_idx] = np.vdot(psi, op.matrix @ psi)

    record(0)
    out_idx = 1
    for step in range(n_steps):
        Lpsis = [L @ psi for L in Ls]
        quad = np.array([2.0 * np.real(np.vdot(psi, Lp)) for Lp in Lpsis])
        dpsi = dt * (A @ psi)
        for ch in range(n_ch):
            dpsi += (quad[ch] * dt + dW[ch, step]) * Lpsis[ch]
        psi = psi + dpsi
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > norm_drift_max or not np.isfinite(nrm):
            raise ConvergenceError(
                f"norm drift {abs(nrm - 1.0):.3g} at step {step}; reduce dt"
            )
        psi /= nrm
        current_acc += quad * dt + dW[:, step] if n_ch else 0.0
        if step + 1 == out_steps[out_idx]:
            record(out_idx)
            span = t[out_idx] - t[out_idx - 1]
            homodyne[:, out_idx - 1] = current_acc / span
            current_acc = np.zeros(n_ch)
            out_idx += 1

    return SimulationRecord(
        times=t,
        observables=series,
        final_state=StateVector(model.space, psi),
        seed=seed,
        config_hash=_config_hash({"solver": "sse", "dt": dt, "trajectory": trajectory_index}),
        extras={"homodyne_currents": homodyne, "dt": dt},
    )


def sse_ensemble(
    model: OpenSystemModel,
    psi0: StateVector,
    t_grid,
    n_trajectories: int,
    seed: int,
    dt: float = 1e-3,
    observables: dict[str, LinearOperator] | None = None,
) -> list[SimulationRecord]:
    """Independent trajectories with per-trajectory noise keys, merged in seed order."""
    return [
        sse_trajectory(
            model, psi0, t_grid, seed=seed, dt=dt,
            observables=observables, trajectory_index=k,
        )
        for k in range(n_trajectories)
    ]


def ensemble_mean(records: list[SimulationRecord], name: str):
    """Mean and standard error of one observable across an ensemble."""
    stack = np.array([r.observables[name] for r in records]).real
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    return mean, stderr


def sse_step_convergence(
    model: OpenSystemModel,
    psi0: StateVector,
    t_grid,
    seed: int,
    dt: float,
    observable: LinearOperator,
) -> float:
    """Half-step self-test: max deviation of one observable between dt and dt/2 runs."""
    a = sse_trajectory(model, psi0, t_grid, seed, dt, {"obs": observable})
    b = sse_trajectory(model, psi0, t_grid, seed, dt / 2.0, {"obs": observable})
    return float(np.max(np.abs(a.observables["obs"].real - b.observables["obs"].real)))


def mean_field(
    sm: SupermodeSet,
    drive: float,
    kappa: float,
    S0,
    t_grid,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> SimulationRecord:
    """Classical supermode amplitudes under the deterministic equations of motion.

    dS_i/dt = -sum_j (K^dag K)_ij S_j - 2 A sum_j G^(1)_ij conj(S_j)
              - sum_k sum_jmn G^(k)_ij G^(k)_mn conj(S_j) S_m S_n

    with A the drive amplitude on the label-1 pump channel and K in units
    carrying the supplied kappa (constant loss: K^dag K = kappa * identity).
    """
    S0 = np.asarray(S0, dtype=complex)
    if S0.size != sm.n_signal:
        raise ValueError(f"need {sm.n_signal} initial amplitudes, got {S0.size}")
    t = np.asarray(t_grid, dtype=float)
    KdK = kappa * (sm.loss_coupling.conj().T @ sm.loss_coupling)
    G1 = sm.tensor_for_label(1)
    tensors = list(sm.tensors)

    def rhs(_t, S):
        Sc = S.conj()
        out = -KdK @ S - 2.0 * drive * (G1 @ Sc)
        for G in tensors:
            out -= (S @ G @ S) * (G @ Sc)
        return out

    sol = solve_ivp(rhs, (t[0], t[-1]), S0, t_eval=t, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"mean-field integrator failed: {sol.message}")
    amplitudes = sol.y  # (n_signal, n_times)
    observables = {f"S_{i+1}": amplitudes[i] for i in range(sm.n_signal)}
    observables["total_intensity"] = np.sum(np.abs(amplitudes) ** 2, axis=0)
    return SimulationRecord(
        times=t,
        observables=observables,
        final_state=amplitudes[:, -1],
        config_hash=_config_hash({"solver": "mean-field", "kappa": kappa, "drive": drive}),
    )
