"""Empirical losses: residual, boundary penalties, and eigenvalue constraints.

Every loss here is a Monte Carlo sum over a fixed SampleSet.  Enrichment
contributions that are linear in the trainable coefficients are precomputed
as per-coefficient columns (values and Laplacians at the sample points), so
one evaluation costs a network pass plus a few matrix-vector products.

Objectives implement the engine protocol: `batches` lists the network
evaluations needed, `value_and_cotangents` turns the results into the loss
value plus exact adjoints, and `network.loss_gradient` drives both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import enrichment as en
from .geometry import SampleSet, radial_unit_vectors
from .network import Batch, Cotangents, MlpParams, loss_gradient


@dataclass(frozen=True)
class PenaltyWeights:
    """Boundary penalty weights (sigma_d, sigma_n)."""

    sigma_d: float
    sigma_n: float = 0.0

    def __post_init__(self):
        if self.sigma_d <= 0.0:
            raise ValueError("sigma_d must be positive")
        if self.sigma_n < 0.0:
            raise ValueError("sigma_n must be nonnegative")


@dataclass
class LossBreakdown:
    """Unweighted loss components; total re-applies the weights.

    interior, dirichlet, neumann are the plain Monte Carlo sums (no sigma);
    constraints holds eigen-mode extras (normalization, orthogonality,
    Rayleigh) already scaled by their own hyperparameters.
    """

    interior: float
    dirichlet: float
    neumann: float
    weights: PenaltyWeights
    constraints: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return (
            self.interior
            + self.weights.sigma_d * self.dirichlet
            + self.weights.sigma_n * self.neumann
            + sum(self.constraints.values())
        )


def _check_samples(problem, samples: SampleSet, need_neumann: bool):
    dom = problem.domain
    expect = (
        dom.volume,
        dom.boundary_measure("dirichlet"),
        dom.boundary_measure("neumann"),
    )
    if not np.allclose(samples.measures, expect, rtol=0.0, atol=1e-12):
        raise ValueError(
            f"sample measures {samples.measures} do not match domain {dom.name} {expect}"
        )
    if need_neumann and expect[2] > 0.0 and samples.n_neumann == 0:
        raise ValueError("problem has a Neumann boundary but no Neumann samples")


def coefficient_tables(terms: Sequence[en.SingularTerm], points) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Per-coefficient enrichment columns at the given points.

    Returns (values, laplacians, labels) with one column per trainable
    coefficient: scalar terms contribute one column, series terms one per
    mode gamma_0..gamma_N.  The enriched residual is then
    lap_w + f + laplacians @ gamma (Poisson).
    """
    pts = np.asarray(points, dtype=float)
    cols_v, cols_l, labels = [], [], []
    for j, term in enumerate(terms):
        coeff = term.coeff
        if isinstance(coeff, en.ScalarCoeff):
            ev = en.eval_singular(term, pts)
            cols_v.append(ev.value[:, None])
            cols_l.append(ev.laplacian[:, None])
            labels.append(f"gamma_{j}" if len(terms) > 1 else "gamma")
        elif isinstance(coeff, en.SeriesCoeff):
            v, l = en.edge_mode_tables(term, coeff.zbasis, coeff.truncation, pts)
            cols_v.append(v)
            cols_l.append(l)
            prefix = f"gamma_{j}," if len(terms) > 1 else "gamma_"
            labels.extend(f"{prefix}{n}" for n in range(coeff.truncation + 1))
        else:
            raise ValueError("auxiliary-network terms have no coefficient columns")
    if not cols_v:
        n = len(pts)
        return np.zeros((n, 0)), np.zeros((n, 0)), []
    return np.concatenate(cols_v, axis=1), np.concatenate(cols_l, axis=1), labels


class ResidualObjective:
    """Strong-residual loss for one network plus linear coefficients.

    Covers the enriched 2D solver, the truncated 3D series solver, and the
    plain baseline (enrich=False): the interior residual is
    Delta(w) - A^2 (w + V gamma) + f + L gamma, where V and L are the
    precomputed per-coefficient value/Laplacian columns and A the screening
    constant (0 for Poisson).  Boundary terms penalize w itself.
    """

    def __init__(self, problem, samples: SampleSet, weights: PenaltyWeights,
                 enrich: bool = True, fold_coeffs: Optional[np.ndarray] = None):
        _check_samples(problem, samples, need_neumann=weights.sigma_n > 0.0)
        self.samples = samples
        self.weights = weights
        self.damping = float(getattr(problem, "damping", 0.0))
        terms = list(problem.terms) if enrich else []
        self.f_int = np.asarray(problem.source(samples.interior), dtype=float)
        self.values, self.laplacians, self.labels = coefficient_tables(terms, samples.interior)
        if fold_coeffs is not None:
            # Freeze the coefficients: fold their contribution into the source.
            gam = np.asarray(fold_coeffs, dtype=float)
            self.f_int = self.f_int + self.laplacians @ gam - self.damping**2 * (self.values @ gam)
            n = samples.n_interior
            self.values = np.zeros((n, 0))
            self.laplacians = np.zeros((n, 0))
            self.labels = []
        self.n_extras = self.values.shape[1]
        self.batches = [Batch(0, samples.interior, 2), Batch(0, samples.dirichlet, 0)]
        if samples.n_neumann > 0:
            self.batches.append(Batch(0, samples.neumann, 1))
        self.w_int = samples.measures[0] / samples.n_interior
        self.w_dir = samples.measures[1] / samples.n_dirichlet
        self.w_neu = samples.measures[2] / samples.n_neumann if samples.n_neumann else 0.0

    def value_and_cotangents(self, results, extras):
        gam = np.asarray(extras, dtype=float)
        r_int = results[0]
        a2 = self.damping**2
        residual = r_int.laplacian + self.f_int + self.laplacians @ gam
        if a2 > 0.0:
            residual = residual - a2 * (r_int.value + self.values @ gam)
        interior = self.w_int * float(residual @ residual)
        res_bar = 2.0 * self.w_int * residual
        cot_int = Cotangents(laplacian=res_bar)
        if a2 > 0.0:
            cot_int.value = -a2 * res_bar
        gam_bar = self.laplacians.T @ res_bar
        if a2 > 0.0:
            gam_bar -= a2 * (self.values.T @ res_bar)

        wd = results[1].value
        dirichlet = self.w_dir * float(wd @ wd)
        cot_dir = Cotangents(value=2.0 * self.weights.sigma_d * self.w_dir * wd)

        cots = [cot_int, cot_dir]
        neumann = 0.0
        if self.samples.n_neumann > 0:
            dn = np.sum(results[2].gradient * self.samples.neumann_normals, axis=1)
            neumann = self.w_neu * float(dn @ dn)
            cots.append(Cotangents(
                gradient=(2.0 * self.weights.sigma_n * self.w_neu * dn)[:, None]
                * self.samples.neumann_normals
            ))
        self.last_breakdown = LossBreakdown(interior, dirichlet, neumann, self.weights)
        return self.last_breakdown.total, cots, gam_bar

    def evaluate(self, params: MlpParams, coeffs=()) -> tuple[LossBreakdown, np.ndarray]:
        """Breakdown plus flat gradient (network parameters then coefficients)."""
        value, grad = loss_gradient(self, params, np.asarray(coeffs, dtype=float))
        return self.last_breakdown, grad


class AuxResidualObjective:
    """Residual loss where each enrichment term's edge function is a network.

    The product Phi * eta * s enters the residual through the identity
    Lap3(Phi eta s) = eta s Lap3(Phi) + 2 grad(Phi).grad(eta s) + Phi Lap2(eta s);
    with an (r, z) input network, Lap3(Phi) = Phi_rr + Phi_r / r + Phi_zz and
    the cross term reduces to Phi_r * d(eta s)/dr.  Dirichlet penalties act
    on w + sum Phi eta s and Neumann ones on d_n(w) + sum d_n(Phi) eta s.
    """

    def __init__(self, problem, samples: SampleSet, weights: PenaltyWeights):
        _check_samples(problem, samples, need_neumann=weights.sigma_n > 0.0)
        if any(not isinstance(t.coeff, en.AuxNetCoeff) for t in problem.terms):
            raise ValueError("every enrichment term needs an auxiliary-network coefficient")
        self.samples = samples
        self.weights = weights
        self.damping = float(getattr(problem, "damping", 0.0))
        self.terms = list(problem.terms)
        self.f_int = np.asarray(problem.source(samples.interior), dtype=float)
        self.n_extras = 0
        self.w_int = samples.measures[0] / samples.n_interior
        self.w_dir = samples.measures[1] / samples.n_dirichlet
        self.w_neu = samples.measures[2] / samples.n_neumann if samples.n_neumann else 0.0
        self.batches = [Batch(0, samples.interior, 2), Batch(0, samples.dirichlet, 0)]
        self.has_neumann = samples.n_neumann > 0
        if self.has_neumann:
            self.batches.append(Batch(0, samples.neumann, 1))
        self._int, self._dir, self._neu = [], [], []
        for k, term in enumerate(self.terms):
            net_id = 1 + k
            mode = term.coeff.input_mode
            ti = self._tables(term, samples.interior, mode)
            self.batches.append(Batch(net_id, ti["aux_in"], 2))
            self._int.append(ti)
            td = self._tables(term, samples.dirichlet, mode)
            self.batches.append(Batch(net_id, td["aux_in"], 0))
            self._dir.append(td)
            if self.has_neumann:
                tn = self._tables(term, samples.neumann, mode)
                tn["normal_r"] = np.sum(tn["er"] * samples.neumann_normals[:, :2], axis=1)
                tn["normal_z"] = samples.neumann_normals[:, 2]
                self.batches.append(Batch(net_id, tn["aux_in"], 1))
                self._neu.append(tn)

    @staticmethod
    def _tables(term, points, mode):
        pts = np.asarray(points, dtype=float)
        ev = en.eval_singular(term, pts)
        er, _ = radial_unit_vectors(term.frame, pts)
        rs = np.maximum(ev.r, en.R_CLAMP)
        aux_in = np.column_stack([ev.r, pts[:, 2]]) if mode == "rz" else pts
        return {
            "mode": mode, "value": ev.value, "lap2": ev.laplacian,
            "radial": ev.radial, "grad": ev.gradient, "rs": rs,
            "er": er, "aux_in": aux_in,
        }

    def value_and_cotangents(self, results, extras):
        n_terms = len(self.terms)
        idx = 2 + (1 if self.has_neumann else 0)
        per_term = 2 + (1 if self.has_neumann else 0)
        aux = [results[idx + per_term * k : idx + per_term * (k + 1)] for k in range(n_terms)]

        a2 = self.damping**2
        r_int = results[0]
        residual = r_int.laplacian + self.f_int
        if a2 > 0.0:
            residual = residual - a2 * r_int.value
        s_parts = []
        for k, t in enumerate(self._int):
            phi = aux[k][0]
            if t["mode"] == "rz":
                lap3 = phi.laplacian + phi.gradient[:, 0] / t["rs"]
                cross = 2.0 * phi.gradient[:, 0] * t["radial"]
            else:
                lap3 = phi.laplacian
                cross = 2.0 * np.sum(phi.gradient[:, :2] * t["grad"], axis=1)
            s_val = phi.value * t["value"]
            s_parts.append(s_val)
            residual = residual + t["value"] * lap3 + cross + phi.value * t["lap2"]
            if a2 > 0.0:
                residual = residual - a2 * s_val
        interior = self.w_int * float(residual @ residual)
        res_bar = 2.0 * self.w_int * residual

        cots = [None] * len(self.batches)
        cot_int = Cotangents(laplacian=res_bar)
        if a2 > 0.0:
            cot_int.value = -a2 * res_bar
        cots[0] = cot_int

        # Dirichlet: (w + sum Phi eta s)^2
        trace = results[1].value.copy()
        for k, t in enumerate(self._dir):
            trace += aux[k][1].value * t["value"]
        dirichlet = self.w_dir * float(trace @ trace)
        tr_bar = 2.0 * self.weights.sigma_d * self.w_dir * trace
        cots[1] = Cotangents(value=tr_bar)

        neumann = 0.0
        if self.has_neumann:
            flux = np.sum(results[2].gradient * self.samples.neumann_normals, axis=1)
            for k, t in enumerate(self._neu):
                phi = aux[k][2]
                if t["mode"] == "rz":
                    dn_phi = phi.gradient[:, 0] * t["normal_r"] + phi.gradient[:, 1] * t["normal_z"]
                else:
                    dn_phi = np.sum(phi.gradient * self.samples.neumann_normals, axis=1)
                flux = flux + dn_phi * t["value"]
            neumann = self.w_neu * float(flux @ flux)
            fx_bar = 2.0 * self.weights.sigma_n * self.w_neu * flux
            cots[2] = Cotangents(gradient=fx_bar[:, None] * self.samples.neumann_normals)

        for k, t in enumerate(self._int):
            phi = aux[k][0]
            base = idx + per_term * k
            g_bar = np.zeros_like(phi.gradient)
            if t["mode"] == "rz":
                g_bar[:, 0] = res_bar * (t["value"] / t["rs"] + 2.0 * t["radial"])
            else:
                g_bar[:, :2] = 2.0 * res_bar[:, None] * t["grad"]
            v_bar = res_bar * t["lap2"]
            if a2 > 0.0:
                v_bar = v_bar - a2 * res_bar * t["value"]
            cots[base] = Cotangents(value=v_bar, gradient=g_bar, laplacian=res_bar * t["value"])
            cots[base + 1] = Cotangents(value=tr_bar * self._dir[k]["value"])
            if self.has_neumann:
                tn = self._neu[k]
                gn_bar = np.zeros((self.samples.n_neumann, 2 if tn["mode"] == "rz" else 3))
                if tn["mode"] == "rz":
                    gn_bar[:, 0] = fx_bar * tn["value"] * tn["normal_r"]
                    gn_bar[:, 1] = fx_bar * tn["value"] * tn["normal_z"]
                else:
                    gn_bar[...] = (fx_bar * tn["value"])[:, None] * self.samples.neumann_normals
                cots[base + 2] = Cotangents(gradient=gn_bar)

        self.last_breakdown = LossBreakdown(interior, dirichlet, neumann, self.weights)
        return self.last_breakdown.total, cots, np.zeros(0)

    def evaluate(self, params: Sequence[MlpParams]) -> tuple[LossBreakdown, np.ndarray]:
        value, grad = loss_gradient(self, list(params), np.zeros(0))
        return self.last_breakdown, grad


class EigenObjective:
    """Two-candidate eigen loss with frozen eigenvalue estimates.

    Per candidate i: MC of (Delta u_i + mu_i u_i)^2, a Dirichlet penalty on
    w_i, alpha * |‖u_i‖^2 - 1| and the constant nu_i * mu_i; plus
    beta * |(u_1, u_2)| between the candidates.  u_i = w_i + gamma_i eta s
    where the gammas are the two extras.
    """

    def __init__(self, problem, samples: SampleSet, weights: PenaltyWeights,
                 mu: tuple[float, float], alpha: float, beta: float,
                 nu: tuple[float, float]):
        _check_samples(problem, samples, need_neumann=False)
        if alpha < 0.0 or beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")
        term = problem.terms[0]
        ev = en.eval_singular(term, samples.interior)
        self.e_val = ev.value
        self.e_lap = ev.laplacian
        self.samples = samples
        self.weights = weights
        self.mu = (float(mu[0]), float(mu[1]))
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.nu = (float(nu[0]), float(nu[1]))
        self.n_extras = 2
        self.w_int = samples.measures[0] / samples.n_interior
        self.w_dir = samples.measures[1] / samples.n_dirichlet
        self.batches = [
            Batch(0, samples.interior, 2), Batch(1, samples.interior, 2),
            Batch(0, samples.dirichlet, 0), Batch(1, samples.dirichlet, 0),
        ]

    def value_and_cotangents(self, results, extras):
        gam = np.asarray(extras, dtype=float)
        u = [results[i].value + gam[i] * self.e_val for i in (0, 1)]
        lap_u = [results[i].laplacian + gam[i] * self.e_lap for i in (0, 1)]
        interior = 0.0
        dirichlet = 0.0
        cons = {}
        cots = [None] * 4
        gam_bar = np.zeros(2)
        overlap = self.w_int * float(u[0] @ u[1])
        sgn_q = np.sign(overlap)
        cons["orthogonality"] = self.beta * abs(overlap)
        for i in (0, 1):
            res = lap_u[i] + self.mu[i] * u[i]
            interior += self.w_int * float(res @ res)
            res_bar = 2.0 * self.w_int * res
            norm2 = self.w_int * float(u[i] @ u[i])
            sgn_n = np.sign(norm2 - 1.0)
            cons[f"normalization_{i + 1}"] = self.alpha * abs(norm2 - 1.0)
            cons[f"rayleigh_{i + 1}"] = self.nu[i] * self.mu[i]
            u_bar = (
                self.mu[i] * res_bar
                + self.alpha * sgn_n * 2.0 * self.w_int * u[i]
                + self.beta * sgn_q * self.w_int * u[1 - i]
            )
            cots[i] = Cotangents(value=u_bar, laplacian=res_bar)
            gam_bar[i] = float(res_bar @ self.e_lap) + float(u_bar @ self.e_val)
            wd = results[2 + i].value
            dirichlet += self.w_dir * float(wd @ wd)
            cots[2 + i] = Cotangents(value=2.0 * self.weights.sigma_d * self.w_dir * wd)
        self.last_breakdown = LossBreakdown(interior, dirichlet, 0.0, self.weights, cons)
        return self.last_breakdown.total, cots, gam_bar

    def evaluate(self, params: Sequence[MlpParams], gammas) -> tuple[LossBreakdown, np.ndarray]:
        value, grad = loss_gradient(self, list(params), np.asarray(gammas, dtype=float))
        return self.last_breakdown, grad


# -- one-shot wrappers ---------------------------------------------------------


def sepinn_loss_2d(params: MlpParams, gamma, samples: SampleSet, problem,
                   weights: PenaltyWeights) -> LossBreakdown:
    """Enriched residual loss with scalar coefficients (2D corner problems)."""
    obj = ResidualObjective(problem, samples, weights)
    obj.evaluate(params, np.atleast_1d(np.asarray(gamma, dtype=float)))
    return obj.last_breakdown


def plain_pinn_loss(params: MlpParams, samples: SampleSet, problem,
                    weights: PenaltyWeights) -> LossBreakdown:
    """Baseline residual loss with no enrichment."""
    obj = ResidualObjective(problem, samples, weights, enrich=False)
    obj.evaluate(params, np.zeros(0))
    return obj.last_breakdown


def sepinn_c_loss_3d(params: MlpParams, gamma_series, samples: SampleSet, problem,
                     weights: PenaltyWeights) -> LossBreakdown:
    """Truncated-series residual loss (3D edge problems)."""
    obj = ResidualObjective(problem, samples, weights)
    coeffs = np.concatenate([np.atleast_1d(np.asarray(g, dtype=float)) for g in gamma_series]) \
        if isinstance(gamma_series, (list, tuple)) else np.asarray(gamma_series, dtype=float)
    obj.evaluate(params, coeffs)
    return obj.last_breakdown


def sepinn_n_loss_3d(params_w: MlpParams, params_phi: Sequence[MlpParams],
                     samples: SampleSet, problem, weights: PenaltyWeights) -> LossBreakdown:
    """Residual loss with auxiliary-network edge functions (3D edge problems)."""
    obj = AuxResidualObjective(problem, samples, weights)
    obj.evaluate([params_w, *params_phi])
    return obj.last_breakdown


def eigen_loss(params_1: MlpParams, params_2: MlpParams, gamma_1, gamma_2, mu_1, mu_2,
               samples: SampleSet, weights: PenaltyWeights, alpha: float, beta: float,
               nu: tuple[float, float], problem) -> LossBreakdown:
    """Two-candidate eigenvalue loss at frozen eigenvalue estimates."""
    obj = EigenObjective(problem, samples, weights, (mu_1, mu_2), alpha, beta, nu)
    obj.evaluate([params_1, params_2], np.array([gamma_1, gamma_2], dtype=float))
    return obj.last_breakdown


def rayleigh_quotient(params: MlpParams, gamma, samples: SampleSet, problem) -> float:
    """Monte Carlo Rayleigh quotient of u = w + gamma * eta s over the interior."""
    from .network import forward_with_derivatives

    term = problem.terms[0]
    ev = en.eval_singular(term, samples.interior)
    res = forward_with_derivatives(params, samples.interior, order=1)
    g = float(gamma)
    u = res.value + g * ev.value
    grad = res.gradient + g * ev.gradient
    denom = float(u @ u)
    if denom / samples.n_interior < 1e-12:
        raise ValueError("degenerate eigen candidate: vanishing Monte Carlo norm")
    return float(np.sum(grad * grad)) / denom
