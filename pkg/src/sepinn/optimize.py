"""Optimizers and training drivers.

Adam handles the joint first stage (network weights plus singular
coefficients, each group with its own learning rate).  The second stage
freezes the coefficients and polishes the network with L-BFGS while the
boundary penalty weights grow geometrically, warm-starting every loop from
the previous minimizer.  A separate alternating driver handles the
eigenvalue problem, interleaving loss minimization at frozen eigenvalue
estimates with Rayleigh-quotient updates.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import enrichment as en
from .geometry import SampleSet, to_local_polar_batch, validation_points
from .losses import (AuxResidualObjective, EigenObjective, LossBreakdown,
                     PenaltyWeights, ResidualObjective, coefficient_tables,
                     rayleigh_quotient)
from .network import (Batch, Cotangents, EngineError, MlpParams, ParamLayout,
                      forward_with_derivatives, init_params, loss_gradient,
                      save_checkpoint)


@dataclass(frozen=True)
class AdamConfig:
    """First-stage optimizer settings; coefficients may get their own rate."""

    lr_network: float = 1e-3
    lr_coeffs: Optional[object] = None  # float or per-coefficient sequence; None = lr_network
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        if self.lr_network <= 0.0:
            raise ValueError("lr_network must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True)
class LbfgsConfig:
    """Second-stage optimizer settings."""

    memory: int = 10
    tolerance: float = 1e-9
    max_iter: int = 2500
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search: int = 30

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1 for strong Wolfe conditions")


@dataclass(frozen=True)
class PenaltySchedule:
    """Geometric penalty growth sigma^(k+1) = q sigma^(k), capped at sigma_cap.

    The Dirichlet weight starts at sigma_d and the Neumann one at sigma_n;
    both grow by the same factor.  The loop stops once the Dirichlet weight
    would exceed the cap, or earlier when the validation error drops below
    the threshold.
    """

    sigma_d: float
    sigma_cap: float
    growth: float = 1.5
    sigma_n: float = 0.0
    threshold: float = 1e-3

    def __post_init__(self):
        if self.growth <= 1.0:
            raise ValueError("growth factor q must exceed 1")
        if self.sigma_d <= 0.0 or self.sigma_cap < max(self.sigma_d, self.sigma_n):
            raise ValueError("need 0 < max(sigma_d, sigma_n) <= sigma_cap")

    def weights(self) -> list[PenaltyWeights]:
        out = []
        sd, sn = self.sigma_d, self.sigma_n
        while max(sd, sn) <= self.sigma_cap:
            out.append(PenaltyWeights(sd, sn))
            sd = sd * self.growth
            sn = sn * self.growth
        return out


@dataclass
class TrainReport:
    """Everything one run produced: trajectories, timings, and final state."""

    rows: list = field(default_factory=list)  # per-iteration dicts
    sigma_trajectory: list = field(default_factory=list)
    gamma_trajectory: list = field(default_factory=list)  # (iteration, gamma array)
    stage_seconds: dict = field(default_factory=dict)
    final_params: list = field(default_factory=list)
    final_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    validation_errors: list = field(default_factory=list)
    seed: int = 0
    config: dict = field(default_factory=dict)
    status: str = "ok"
    early_stop: bool = False
    results: dict = field(default_factory=dict)
    checkpoints: list = field(default_factory=list)

    def write_csv(self, path):
        keys = ["iteration", "stage", "sigma_d", "total", "interior", "dirichlet", "neumann"]
        extra = []
        for row in self.rows:
            for k in row:
                if k not in keys and k not in extra:
                    extra.append(k)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys + extra, restval="")
            writer.writeheader()
            writer.writerows(self.rows)


def _row(it, stage, weights, breakdown, gammas=None, extra=None):
    row = {
        "iteration": it, "stage": stage, "sigma_d": weights.sigma_d,
        "total": breakdown.total, "interior": breakdown.interior,
        "dirichlet": breakdown.dirichlet, "neumann": breakdown.neumann,
    }
    for k, v in breakdown.constraints.items():
        row[k] = v
    if gammas is not None:
        for i, g in enumerate(np.atleast_1d(gammas)):
            row[f"gamma_{i}"] = g
    if extra:
        row.update(extra)
    return row


def adam_minimize(objective, params, extras, config: AdamConfig,
                  callback: Optional[Callable] = None):
    """Adam with bias correction over (networks, coefficients).

    Returns (params, extras, history, status); on a non-finite loss the last
    finite state is returned with a diagnostic status instead of raising.
    """
    if isinstance(params, MlpParams):
        params = [params]
    extras = np.atleast_1d(np.asarray(extras, dtype=float)) if np.size(extras) else np.zeros(0)
    layout = ParamLayout([p.arch for p in params], len(extras))
    vec = layout.join(params, extras)
    nets, ext = layout.split(vec)

    lr = np.full(layout.size, config.lr_network)
    if len(extras):
        lr_c = config.lr_coeffs if config.lr_coeffs is not None else config.lr_network
        lr[layout.extras_offset:] = np.asarray(lr_c, dtype=float)
    if np.any(lr <= 0.0):
        raise ValueError("all learning rates must be positive")

    m = np.zeros(layout.size)
    v = np.zeros(layout.size)
    history = []
    status = "ok"
    last_good = vec.copy()
    for t in range(1, config.max_iter + 1):
        try:
            value, grad = loss_gradient(objective, nets, ext)
        except EngineError as exc:
            vec[:] = last_good
            status = f"aborted at iteration {t}: {exc}"
            break
        history.append(value)
        last_good[:] = vec
        if callback is not None:
            callback(t, objective, ext)
        m += (1.0 - config.beta1) * (grad - m)
        v += (1.0 - config.beta2) * (grad * grad - v)
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        vec -= lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return nets, ext, history, status


def lbfgs_minimize(func, x0, config: LbfgsConfig):
    """L-BFGS with two-loop recursion and a strong-Wolfe line search.

    func(x) -> (value, gradient).  Returns (x, history, status) where status
    is "converged", "max_iter", or "line_search_failed"; on line-search
    failure the best iterate seen is returned rather than raising.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = func(x)
    if not np.isfinite(f):
        raise ValueError("non-finite loss at the initial point")
    history = [f]
    s_list, y_list, rho_list = [], [], []
    status = "max_iter"
    for _ in range(config.max_iter):
        if np.max(np.abs(g)) <= config.tolerance:
            status = "converged"
            break
        q = -g
        alphas = []
        for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * (s @ q)
            alphas.append(a)
            q = q - a * y
        if y_list:
            y = y_list[-1]
            q = q * ((s_list[-1] @ y) / (y @ y))
        for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * (y @ q)
            q = q + (a - b) * s
        d = q
        dg = g @ d
        if dg >= 0.0:  # not a descent direction; restart from steepest descent
            s_list, y_list, rho_list = [], [], []
            d = -g
            dg = g @ d
        step, f_new, g_new = _wolfe_search(func, x, f, g, d, dg, config)
        if step is None:
            status = "line_search_failed"
            break
        s = step * d
        x = x + s
        y = g_new - g
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > config.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        f, g = f_new, g_new
        history.append(f)
    return x, history, status


def _wolfe_search(func, x, f0, g0, d, dg0, config):
    """Strong-Wolfe bracketing line search (returns (step, f, g) or (None,..))."""
    c1, c2 = config.wolfe_c1, config.wolfe_c2
    amax = 1e10

    def phi(a):
        fa, ga = func(x + a * d)
        return fa, ga, ga @ d

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = 1.0
    for i in range(config.max_line_search):
        fa, ga, dga = phi(a)
        if not np.isfinite(fa):
            a = 0.5 * (a_prev + a)
            continue
        if fa > f0 + c1 * a * dg0 or (i > 0 and fa >= f_prev):
            return _zoom(phi, f0, dg0, a_prev, f_prev, dg_prev, a, fa, c1, c2, config)
        if abs(dga) <= -c2 * dg0:
            return a, fa, ga
        if dga >= 0.0:
            return _zoom(phi, f0, dg0, a, fa, dga, a_prev, f_prev, c1, c2, config)
        a_prev, f_prev, dg_prev = a, fa, dga
        a = min(2.0 * a, amax)
    return None, None, None


def _zoom(phi, f0, dg0, a_lo, f_lo, dg_lo, a_hi, f_hi, c1, c2, config):
    g_lo = None
    for _ in range(config.max_line_search):
        a = 0.5 * (a_lo + a_hi)
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            break
        fa, ga, dga = phi(a)
        if not np.isfinite(fa) or fa > f0 + c1 * a * dg0 or fa >= f_lo:
            a_hi, f_hi = a, fa
        else:
            if abs(dga) <= -c2 * dg0:
                return a, fa, ga
            if dga * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, dg_lo, g_lo = a, fa, dga, ga
    # Bracket collapsed at floating-point resolution: fall back to the best
    # strictly decreasing point so the outer loop can keep shrinking the
    # gradient instead of aborting one step early.
    if g_lo is not None and a_lo > 0.0 and f_lo < f0:
        return a_lo, f_lo, g_lo
    return None, None, None


def make_validation(problem, n: int, seed: int) -> Callable:
    """Validation-error hook: relative L2 of the network against the exact
    regular part on held-out points, or a root-mean-square residual estimate
    when the problem has no closed-form solution."""
    pts = validation_points(problem.domain, n, seed)
    exact_w = getattr(problem, "exact_w", None)
    if exact_w is not None:
        ref = np.asarray(exact_w(pts), dtype=float)
        ref_norm = float(np.sqrt(ref @ ref))

        def hook(params_list, coeffs):
            val = forward_with_derivatives(params_list[0], pts, order=0).value
            return float(np.sqrt((val - ref) @ (val - ref))) / max(ref_norm, 1e-300)

        return hook
    f_val = np.asarray(problem.source(pts), dtype=float)
    vals, laps, _ = coefficient_tables(list(problem.terms), pts)
    a2 = float(getattr(problem, "damping", 0.0)) ** 2

    def hook(params_list, coeffs):
        res = forward_with_derivatives(params_list[0], pts, order=2)
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float)) if np.size(coeffs) else np.zeros(0)
        residual = res.laplacian + f_val
        if coeffs.size:
            residual = residual + laps @ coeffs
        if a2 > 0.0:
            enrich = vals @ coeffs if coeffs.size else 0.0
            residual = residual - a2 * (res.value + enrich)
        return float(np.sqrt(np.mean(residual**2)))

    return hook


def _flat_objective(objective, params_list):
    """Wrap an objective (no extras) as func(flat vector) -> (value, grad)."""
    layout = ParamLayout([p.arch for p in params_list], 0)

    def func(x):
        nets, _ = layout.split(x.copy())
        return loss_gradient(objective, nets, np.zeros(0))

    return layout, func


def two_stage_train(problem, samples: SampleSet, nets, schedule: PenaltySchedule,
                    adam_cfg: AdamConfig, lbfgs_cfg: LbfgsConfig, seed: int,
                    method: str = "sepinn", gamma_init: float = 1.0,
                    adam_first: Optional[AdamConfig] = None,
                    validation: Optional[Callable] = None,
                    validation_n: int = 2000,
                    artifact_dir=None) -> TrainReport:
    """Joint Adam stage, then penalty path-following with L-BFGS loops.

    Stage 1 trains the network(s) and the singular coefficients together at
    the initial penalty weights.  Stage 2 freezes the coefficients, then for
    each weight level runs L-BFGS warm-started from the previous minimizer;
    it stops early once the validation error drops below the schedule's
    threshold.  With method "pinn" no enrichment is used; with "sepinn-n"
    the auxiliary networks stay trainable throughout.
    """
    if isinstance(nets, MlpParams):
        nets = [nets]
    nets = [p.copy() for p in nets]
    weights_path = schedule.weights()
    report = TrainReport(seed=int(seed))
    report.config = {
        "method": method, "gamma_init": gamma_init,
        "sigma_d": schedule.sigma_d, "sigma_n": schedule.sigma_n,
        "growth": schedule.growth, "sigma_cap": schedule.sigma_cap,
        "threshold": schedule.threshold, "adam": vars(adam_cfg) | {},
        "lbfgs": vars(lbfgs_cfg) | {}, "seed": int(seed),
        "widths": [list(p.arch.widths) for p in nets],
    }
    if validation is None:
        validation = make_validation(problem, validation_n, seed)

    aux_mode = method == "sepinn-n"
    enrich = method != "pinn"
    if aux_mode:
        objective = AuxResidualObjective(problem, samples, weights_path[0])
        extras0 = np.zeros(0)
    else:
        objective = ResidualObjective(problem, samples, weights_path[0], enrich=enrich)
        extras0 = np.full(objective.n_extras, float(gamma_init))

    # Stage 1: joint Adam at sigma^(1).
    t0 = time.perf_counter()

    def record(it, obj, ext):
        report.rows.append(_row(it, 1, weights_path[0], obj.last_breakdown,
                                gammas=ext if ext.size else None))
        if ext.size:
            report.gamma_trajectory.append((it, ext.copy()))

    nets, coeffs, hist1, status1 = adam_minimize(objective, nets, extras0, adam_cfg, callback=record)
    report.stage_seconds["stage1"] = time.perf_counter() - t0
    if status1 != "ok":
        report.status = f"stage1 {status1}"
        report.final_params = nets
        report.final_coeffs = coeffs.copy()
        return report
    coeffs = coeffs.copy()

    # Stage 2: freeze coefficients, path-follow the penalty weights.
    t1 = time.perf_counter()
    it_base = len(hist1)
    for k, weights in enumerate(weights_path):
        report.sigma_trajectory.append(weights.sigma_d)
        if aux_mode:
            obj_k = AuxResidualObjective(problem, samples, weights)
        else:
            obj_k = ResidualObjective(problem, samples, weights,
                                      enrich=enrich, fold_coeffs=coeffs if enrich else None)
        if k == 0 and adam_first is not None:
            nets, _, _, status_a = adam_minimize(obj_k, nets, np.zeros(0), adam_first)
            if status_a != "ok":
                report.status = f"stage2 warmup {status_a}"
                break
        layout, func = _flat_objective(obj_k, nets)
        x0 = layout.join(nets, np.zeros(0))
        x, hist, status = lbfgs_minimize(func, x0, lbfgs_cfg)
        nets, _ = layout.split(x)
        nets = [p.copy() for p in nets]
        obj_k.evaluate(nets) if aux_mode else obj_k.evaluate(nets[0])
        report.rows.append(_row(it_base + len(hist), 2, weights, obj_k.last_breakdown,
                                gammas=coeffs if coeffs.size else None,
                                extra={"lbfgs_status": status}))
        it_base += len(hist)
        err = validation(nets, coeffs)
        report.validation_errors.append(err)
        if artifact_dir is not None:
            path = Path(artifact_dir) / f"checkpoint_loop{k + 1}.bin"
            save_checkpoint(path, nets, extras=coeffs, seed=seed)
            report.checkpoints.append(str(path))
        if err < schedule.threshold:
            report.early_stop = True
            break
    report.stage_seconds["stage2"] = time.perf_counter() - t1
    report.final_params = nets
    report.final_coeffs = coeffs
    report.results["validation_error"] = report.validation_errors[-1] if report.validation_errors else None
    return report


def eigen_alternate(problem, samples: SampleSet, archs, schedule: PenaltySchedule,
                    adam_cfg: AdamConfig, seed: int, alpha: float = 100.0,
                    beta: float = 135.0, nu: tuple = (0.02, 0.01),
                    mu_tol: float = 1e-3, max_alternations: int = 6,
                    max_restarts: int = 3, pretrain_iters: int = 500,
                    artifact_dir=None) -> TrainReport:
    """Alternating eigen driver: minimize at frozen mu, update mu by Rayleigh.

    Candidates are seeded by fitting smooth mock eigenfunctions (the singular
    function and its next harmonic, tapered to zero on the boundary), which
    breaks the symmetry between the two networks.  Each penalty level runs
    several alternations; degenerate candidates trigger a bounded number of
    seeded restarts.
    """
    report = TrainReport(seed=int(seed))
    report.config = {
        "method": "eigen", "alpha": alpha, "beta": beta, "nu": list(nu),
        "sigma_d": schedule.sigma_d, "growth": schedule.growth,
        "sigma_cap": schedule.sigma_cap, "seed": int(seed),
        "widths": [list(a.widths) for a in archs],
    }
    t0 = time.perf_counter()
    for attempt in range(max_restarts + 1):
        try:
            nets, gammas, mus = _eigen_run(problem, samples, archs, schedule, adam_cfg,
                                           seed + 1000 * attempt, alpha, beta, nu,
                                           mu_tol, max_alternations, pretrain_iters, report)
            break
        except ValueError as exc:
            report.rows.append({"iteration": 0, "stage": 0, "sigma_d": 0.0,
                                "total": np.nan, "interior": np.nan,
                                "dirichlet": np.nan, "neumann": np.nan,
                                "lbfgs_status": f"restart: {exc}"})
            if attempt == max_restarts:
                report.status = f"failed after {max_restarts} restarts: {exc}"
                return report
    order = np.argsort(mus)
    mus = [mus[i] for i in order]
    nets = [nets[i] for i in order]
    gammas = np.asarray([gammas[i] for i in order])
    report.stage_seconds["total"] = time.perf_counter() - t0
    report.final_params = nets
    report.final_coeffs = gammas
    report.results = {"mu_1": mus[0], "mu_2": mus[1],
                      "gamma_1": gammas[0], "gamma_2": gammas[1]}
    if artifact_dir is not None:
        path = Path(artifact_dir) / "checkpoint_eigen.bin"
        save_checkpoint(path, nets, extras=np.concatenate([gammas, mus]), seed=seed)
        report.checkpoints.append(str(path))
    return report


def _taper(pts, domain):
    """Smooth factor vanishing on the bounding box of the domain."""
    lo = domain.polygon.min(axis=0)
    hi = domain.polygon.max(axis=0)
    out = np.ones(len(pts))
    for d in range(2):
        t = (pts[:, d] - lo[d]) / (hi[d] - lo[d])
        out *= 4.0 * t * (1.0 - t)
    return out


class _FitObjective:
    """Mean-square fit of one network to a fixed target field."""

    def __init__(self, pts, target):
        self.batches = [Batch(0, pts, 0)]
        self.n_extras = 0
        self.target = target
        self.n = len(pts)

    def value_and_cotangents(self, results, extras):
        diff = results[0].value - self.target
        val = float(diff @ diff) / self.n
        self.last_breakdown = LossBreakdown(val, 0.0, 0.0, PenaltyWeights(1.0))
        return val, [Cotangents(value=2.0 * diff / self.n)], np.zeros(0)


def _pretrain_candidate(arch, target, pts, iters, seed, lr=1e-2):
    """Least-squares fit of a network to a target field (candidate seeding)."""
    params = init_params(arch, seed)
    nets, _, _, _ = adam_minimize(_FitObjective(pts, target), [params], np.zeros(0),
                                  AdamConfig(lr_network=lr, max_iter=iters))
    return nets[0]


def _eigen_run(problem, samples, archs, schedule, adam_cfg, seed, alpha, beta, nu,
               mu_tol, max_alternations, pretrain_iters, report):
    term = problem.terms[0]
    pts = samples.interior
    ev = en.eval_singular(term, pts)
    taper = _taper(pts, problem.domain)

    # Mock first eigenfunction: the singular shape; mock second: its next
    # angular harmonic (one more oscillation), both tapered to the boundary.
    r, theta = to_local_polar_batch(term.frame, pts)
    lam2 = 2.0 * term.lam
    second = np.where(r > 0, r**lam2, 0.0) * np.sin(lam2 * theta)
    targets = [ev.value * taper, second * taper]
    for i in range(2):
        norm = np.sqrt(samples.measures[0] * np.mean(targets[i] ** 2))
        targets[i] = targets[i] / max(norm, 1e-12)

    nets = [_pretrain_candidate(archs[i], targets[i], pts, pretrain_iters, seed + i)
            for i in range(2)]
    gammas = np.zeros(2)
    mus = [rayleigh_quotient(nets[i], gammas[i], samples, problem) for i in range(2)]

    it = 0
    for weights in schedule.weights():
        report.sigma_trajectory.append(weights.sigma_d)
        for _ in range(max_alternations):
            objective = EigenObjective(problem, samples, weights, tuple(mus), alpha, beta, nu)

            def record(t, obj, ext, _w=weights):
                nonlocal it
                it += 1
                report.rows.append(_row(it, 1, _w, obj.last_breakdown, gammas=ext))

            nets, gammas, _, status = adam_minimize(objective, nets, gammas, adam_cfg,
                                                    callback=record)
            if status != "ok":
                raise ValueError(status)
            new_mus = [rayleigh_quotient(nets[i], gammas[i], samples, problem)
                       for i in range(2)]
            moved = max(abs(new_mus[i] - mus[i]) / max(abs(mus[i]), 1.0) for i in range(2))
            mus = new_mus
            report.gamma_trajectory.append((it, gammas.copy()))
            if moved < mu_tol:
                break
    return nets, gammas, mus
