"""Quantitative checks run against solution fields.

Every statistical pass/fail uses a three-standard-error tolerance with the
sample sizes recorded in the report; deterministic experiments collapse the
standard errors to zero, so the same semantics cover exact checks too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2, norm

from .drivers import DriverSpec, ParamSet, SamplingPlan, TerminalCondition
from .errors import GridMismatchError, MomentFailureError
from .regression import BasisSpec, NodeRegression, pointwise_se
from .scenarios import ScenarioBundle
from .solver import SolutionField


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one named check: pass iff margin <= tolerance."""

    name: str
    passed: bool
    margin: float
    tol: float
    n_paths: int
    se: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "tol": float(self.tol),
            "n_paths": int(self.n_paths),
            "se": float(self.se),
            "extra": dict(self.extra),
        }


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    m = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return m, se


# ---------------------------------------------------------------------------
# a priori bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundProcess:
    """Estimate of the conditional-expectation bound X_t, per node and path."""

    x: np.ndarray
    x_se: np.ndarray
    mode: str
    gamma: float
    beta_star: float

    @property
    def x0(self) -> float:
        return float(np.mean(self.x[:, 0]))

    @property
    def x0_se(self) -> float:
        return float(self.x_se[0, 0])


def _folded_mgf(c: float, mean: np.ndarray, var: float) -> np.ndarray:
    """E[exp(c |X|)] for X ~ N(mean, var), vectorized over the mean."""
    if var <= 0:
        return np.exp(c * np.abs(mean))
    sd = math.sqrt(var)
    up = np.exp(c * mean + 0.5 * c * c * var) * norm.cdf(mean / sd + c * sd)
    dn = np.exp(-c * mean + 0.5 * c * c * var) * norm.cdf(-mean / sd + c * sd)
    return up + dn


def apriori_bound(
    bundle: ScenarioBundle,
    xi: TerminalCondition,
    params: ParamSet,
    basis: BasisSpec | None = None,
    mode: str = "regression",
) -> BoundProcess:
    """Per-node estimate of
    (1/gamma) log E[exp(gamma e^{b*(T-t)} |xi| + gamma int_t^T e^{b*(r-t)} alpha dA) | F_t].

    mode "regression" projects the exponential target on the solver's basis
    (augmented with the target evaluated at the current state, which pins the
    terminal node exactly); mode "closed_form" uses the folded-normal MGF and
    requires an affine terminal condition.
    """
    if params.gamma < 1:
        raise ValueError("the a priori bound needs gamma >= 1")
    gamma = params.gamma
    bstar = params.beta_star
    nodes = bundle.grid.nodes
    T = bundle.grid.horizon
    K = bundle.grid.n_steps
    n = bundle.n_paths

    xi_vals = xi.evaluate(bundle.terminal_state)
    alpha = params.alpha_on(bundle)
    a1 = params.alpha_l1(bundle)
    with np.errstate(over="ignore"):
        worst = np.exp(gamma * math.exp(bstar * T) * (np.abs(xi_vals) + a1))
    if not np.all(np.isfinite(worst)):
        raise MomentFailureError(
            f"exponential moment of order gamma*e^(beta*T) = {gamma * math.exp(bstar * T):.3g} is not finite on the sample"
        )

    # weighted remaining mean-variance tradeoff, backward recursion
    R = np.zeros(K + 1)
    for i in range(K - 1, -1, -1):
        R[i] = alpha[i] * (bundle.clock_values[i + 1] - bundle.clock_values[i]) + math.exp(bstar * bundle.dt[i]) * R[i + 1]

    c = gamma * np.exp(bstar * (T - nodes))
    x = np.empty((n, K + 1))
    x_se = np.zeros((n, K + 1))
    x[:, K] = np.abs(xi_vals)

    if mode == "closed_form":
        if xi.affine is None:
            raise ValueError("closed-form bound needs an affine terminal condition")
        a0, a = xi.affine
        a = np.broadcast_to(np.asarray(a, dtype=float), (bundle.dim_m + bundle.dim_orth,))
        states = np.concatenate([bundle.m_paths, bundle.orth_paths], axis=2)
        for i in range(K):
            mean = a0 + states[:, i, :] @ a
            var = float(a @ a) * (T - nodes[i])
            x[:, i] = np.log(_folded_mgf(float(c[i]), mean, var)) / gamma + R[i]
    elif mode == "regression":
        basis = basis or BasisSpec(degree=3)
        for i in range(K):
            state = bundle.state(i)
            with np.errstate(over="ignore"):
                target = np.exp(c[i] * np.abs(xi_vals))
                feature = np.exp(c[i] * np.abs(np.asarray(xi.fn(state), dtype=float)))
            if not (np.all(np.isfinite(target)) and np.all(np.isfinite(feature))):
                raise MomentFailureError(f"exponential target overflows at node {i}")
            reg = NodeRegression(basis.design(state, extra=feature))
            m_hat = reg.fit(target)
            # the integrand is >= 1, so E[.|F_t] >= 1 surely; floor the fit there
            m_hat = np.maximum(m_hat, 1.0)
            x[:, i] = np.log(m_hat) / gamma + R[i]
            sigma2 = float(reg.residual_variance(target, m_hat)[0])
            feats = basis.design(state, extra=feature)
            x_se[:, i] = pointwise_se(sigma2, reg.xtx_pinv(), feats) / (gamma * m_hat)
    else:
        raise ValueError(f"unknown bound mode {mode!r}")

    return BoundProcess(x=x, x_se=x_se, mode=mode, gamma=gamma, beta_star=bstar)


def check_apriori(
    solution: SolutionField,
    bound: BoundProcess,
    tol: float,
) -> CheckReport:
    """Worst violation of |Y| <= X over all nodes and paths.

    Both surfaces are compared at every (node, path) point, with a
    statistical allowance applied pointwise before taking the maximum.
    Because the comparison is a supremum over the whole fitted surface, the
    pointwise OLS standard error is scaled to a Scheffe-type simultaneous
    band (sqrt of the 99.7% chi-square quantile at the fit's width); the
    plain pointwise three-sigma band would be exceeded somewhere by
    selection alone.  The raw maximum of |y| - x is kept in ``extra``.
    """
    if solution.y.shape != bound.x.shape:
        raise GridMismatchError(
            f"solution field {solution.y.shape} and bound process {bound.x.shape} disagree"
        )
    gap = np.abs(solution.y) - bound.x
    se = bound.x_se.copy()
    dof = 1
    if solution.diagnostics is not None:
        se = np.hypot(se, np.sqrt(solution.diagnostics.y_var))
        dof = max(dof, solution.diagnostics.max_features)
    band = math.sqrt(chi2.ppf(1.0 - 0.003, df=dof)) / 3.0
    adjusted = gap - 3.0 * band * se
    flat = int(np.argmax(adjusted))
    path, node = np.unravel_index(flat, adjusted.shape)
    margin = float(adjusted[path, node])
    return CheckReport(
        name="apriori_bound",
        passed=margin <= tol,
        margin=margin,
        tol=tol,
        n_paths=solution.n_paths,
        se=float(band * se[path, node]),
        extra={
            "argmax_node": int(node),
            "argmax_path": int(path),
            "raw_margin": float(np.max(gap)),
            "band_factor": band,
            "x0": bound.x0,
            "x0_se": bound.x0_se,
        },
    )


# ---------------------------------------------------------------------------
# norm bounds
# ---------------------------------------------------------------------------


def norm_bound_checks(
    bundle: ScenarioBundle,
    solution: SolutionField,
    xi: TerminalCondition,
    params: ParamSet,
    p: float,
) -> tuple[CheckReport, CheckReport]:
    """Moment bound on exp(p gamma Y*) and the martingale-moment ratio.

    The first check is the Doob-type inequality with explicit constant
    (p/(p-1))^p.  The second has no named constant; the report carries the
    implied ratio and flags non-finiteness.
    """
    if p <= 1:
        raise ValueError("norm bound needs p > 1")
    gamma, bstar = params.gamma, params.beta_star
    T = bundle.grid.horizon
    xi_vals = xi.evaluate(bundle.terminal_state)
    a1 = params.alpha_l1(bundle)
    base = np.abs(xi_vals) + a1

    with np.errstate(over="ignore"):
        lhs1 = np.exp(p * gamma * solution.sup_abs_y())
        rhs1 = np.exp(p * gamma * math.exp(bstar * T) * base)
        rhs2 = np.exp(4.0 * p * gamma * math.exp(bstar * T) * base)
    lhs2 = (solution.qv_zm + solution.qv_n) ** (p / 2.0)

    if not (np.all(np.isfinite(rhs1)) and np.all(np.isfinite(lhs1))):
        raise MomentFailureError("exponential moment in the norm bound overflows on the sample")

    const = (p / (p - 1.0)) ** p
    m_l1, se_l1 = _mean_se(lhs1)
    m_r1, se_r1 = _mean_se(rhs1)
    se1 = math.hypot(se_l1, const * se_r1)
    margin1 = m_l1 - const * m_r1
    check1 = CheckReport(
        name=f"norm_bound_y_p{p:g}",
        passed=margin1 <= 3.0 * se1,
        margin=margin1,
        tol=0.0,
        n_paths=bundle.n_paths,
        se=se1,
        extra={"lhs": m_l1, "rhs": const * m_r1, "constant": const, "lhs_se": se_l1, "rhs_se": se_r1},
    )

    m_l2, se_l2 = _mean_se(lhs2)
    finite2 = bool(np.all(np.isfinite(rhs2)))
    m_r2, se_r2 = _mean_se(rhs2) if finite2 else (float("inf"), float("inf"))
    implied = m_l2 / m_r2 if (finite2 and m_r2 > 0) else (0.0 if m_l2 == 0 else float("nan"))
    check2 = CheckReport(
        name=f"norm_bound_martingale_p{p:g}",
        passed=finite2 and np.isfinite(m_l2),
        margin=0.0,
        tol=0.0,
        n_paths=bundle.n_paths,
        se=math.hypot(se_l2, se_r2) if finite2 else float("inf"),
        extra={"implied_constant": implied, "lhs": m_l2, "rhs": m_r2},
    )
    return check1, check2


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderingEvidence:
    """Sampled verification that F <= F' everywhere probed and xi <= xi' pathwise."""

    f_ordered: bool
    xi_ordered: bool
    max_f_gap: float
    max_xi_gap: float
    n_probes: int

    @property
    def holds(self) -> bool:
        return self.f_ordered and self.xi_ordered


def sample_ordering(
    bundle: ScenarioBundle,
    driver: DriverSpec,
    driver_prime: DriverSpec,
    xi: TerminalCondition,
    xi_prime: TerminalCondition,
    plan: SamplingPlan | None = None,
) -> OrderingEvidence:
    plan = plan or SamplingPlan(n_probes=2000)
    rng = np.random.default_rng(plan.seed)
    nodes = bundle.grid.nodes
    node_pool = np.unique(rng.integers(0, nodes.size, size=min(plan.max_nodes, nodes.size)))
    P = plan.n_probes
    node_idx = rng.choice(node_pool, size=P)
    y = rng.uniform(plan.y_low, plan.y_high, size=P)
    z = rng.uniform(-plan.z_radius, plan.z_radius, size=(P, bundle.dim_m))
    max_f = -np.inf
    for i in node_pool:
        mask = node_idx == i
        if not np.any(mask):
            continue
        t, b = float(nodes[i]), bundle.factor_b[i]
        gap = driver.f(t, y[mask], z[mask], b) - driver_prime.f(t, y[mask], z[mask], b)
        max_f = max(max_f, float(np.max(gap)))
    xi_gap = xi.evaluate(bundle.terminal_state) - xi_prime.evaluate(bundle.terminal_state)
    max_xi = float(np.max(xi_gap))
    return OrderingEvidence(
        f_ordered=max_f <= plan.tol,
        xi_ordered=max_xi <= plan.tol,
        max_f_gap=max_f,
        max_xi_gap=max_xi,
        n_probes=P,
    )


def comparison_check(
    solution: SolutionField,
    solution_prime: SolutionField,
    evidence: OrderingEvidence,
    tol: float,
    se: float = 0.0,
) -> CheckReport:
    """Worst signed violation of Y <= Y' given ordered data (F <= F', xi <= xi')."""
    if solution.y.shape != solution_prime.y.shape:
        raise GridMismatchError("comparison requires fields on the same bundle")
    margin = float(np.max(solution.y - solution_prime.y))
    vacuous = not evidence.holds
    return CheckReport(
        name="comparison",
        passed=(not vacuous) and margin <= tol + 3.0 * se,
        margin=margin,
        tol=tol,
        n_paths=solution.n_paths,
        se=se,
        extra={
            "vacuous": vacuous,
            "max_f_gap": evidence.max_f_gap,
            "max_xi_gap": evidence.max_xi_gap,
            "y0": solution.y0,
            "y0_prime": solution_prime.y0,
        },
    )


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityMetrics:
    """Hypothesis and conclusion statistics of the stability theorem for one pair."""

    p: float
    hypothesis_mean: float
    hypothesis_se: float
    sup_gap_mean: float
    sup_gap_max: float
    exp_sup_p_mean: float
    exp_sup_p_se: float
    martingale_gap_p_mean: float
    martingale_gap_p_se: float
    n_paths: int

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) if k != "n_paths" else int(self.n_paths) for k in self.__dataclass_fields__}


def stability_metrics(
    bundle: ScenarioBundle,
    solution_n: SolutionField,
    solution_0: SolutionField,
    driver_n: DriverSpec,
    driver_0: DriverSpec,
    xi_n: TerminalCondition,
    xi_0: TerminalCondition,
    p: float,
) -> StabilityMetrics:
    """Hypothesis statistic |xi_n - xi_0| + int |F_n - F_0|(t, Y^0, Z^0) dA and
    the two conclusion statistics, all per-path then averaged."""
    if solution_n.y.shape != solution_0.y.shape:
        raise GridMismatchError("stability metrics require fields on the same bundle")
    K = bundle.grid.n_steps
    dA = bundle.dA
    dt = bundle.dt

    hyp = np.abs(xi_n.evaluate(bundle.terminal_state) - xi_0.evaluate(bundle.terminal_state))
    for i in range(K):
        if dA[i] == 0:
            continue
        y0 = solution_0.y[:, i]
        z0 = solution_0.z[:, i, :]
        gap = np.abs(driver_n.evaluate(bundle, i, y0, z0) - driver_0.evaluate(bundle, i, y0, z0))
        hyp = hyp + gap * dA[i]

    sup_gap = np.max(np.abs(solution_n.y - solution_0.y), axis=1)
    with np.errstate(over="ignore"):
        exp_sup = np.exp(p * sup_gap)
    dz = solution_n.z - solution_0.z
    dzo = solution_n.z_orth - solution_0.z_orth
    mart = np.einsum("nkd,nkd,k->n", dz, dz, dt) + np.einsum("nkq,nkq,k->n", dzo, dzo, dt)
    mart_p = mart ** (p / 2.0)

    h_m, h_se = _mean_se(hyp)
    e_m, e_se = _mean_se(exp_sup)
    m_m, m_se = _mean_se(mart_p)
    return StabilityMetrics(
        p=p,
        hypothesis_mean=h_m,
        hypothesis_se=h_se,
        sup_gap_mean=float(np.mean(sup_gap)),
        sup_gap_max=float(np.max(sup_gap)),
        exp_sup_p_mean=e_m,
        exp_sup_p_se=e_se,
        martingale_gap_p_mean=m_m,
        martingale_gap_p_se=m_se,
        n_paths=bundle.n_paths,
    )


# ---------------------------------------------------------------------------
# measure change
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpMartingaleEstimate:
    q: float
    mean: float
    se: float
    n_overflow: int
    n_paths: int

    @property
    def passed(self) -> bool:
        return self.n_overflow == 0 and abs(self.mean - 1.0) <= 3.0 * self.se


def stochastic_exponential_mean(
    bundle: ScenarioBundle,
    solution: SolutionField,
    q: float,
) -> ExpMartingaleEstimate:
    """Monte Carlo mean of E(q (Z.M + N))_T; unit mean certifies the measure change."""
    integral = np.einsum("nkd,nkd->n", solution.z, bundle.dm) + np.einsum(
        "nkq,nkq->n", solution.z_orth, bundle.dorth
    )
    log_e = q * integral - 0.5 * q * q * (solution.qv_zm + solution.qv_n)
    with np.errstate(over="ignore"):
        vals = np.exp(log_e)
    overflow = int(np.count_nonzero(~np.isfinite(vals)))
    finite = vals[np.isfinite(vals)]
    if finite.size:
        with np.errstate(over="ignore"):
            mean, se = _mean_se(finite)
    else:
        mean, se = float("inf"), float("inf")
    return ExpMartingaleEstimate(q=q, mean=mean, se=se, n_overflow=overflow, n_paths=bundle.n_paths)


def exp_martingale_check(bundle: ScenarioBundle, solution: SolutionField, q: float) -> CheckReport:
    est = stochastic_exponential_mean(bundle, solution, q)
    return CheckReport(
        name=f"exp_martingale_q{q:g}",
        passed=est.passed,
        margin=abs(est.mean - 1.0),
        tol=0.0,
        n_paths=est.n_paths,
        se=est.se,
        extra={"mean": est.mean, "n_overflow": est.n_overflow, "q": q},
    )


@dataclass(frozen=True)
class KazamakiReport:
    eta: float
    q_tilde: float
    sup: float
    sup_node: int
    node_means: tuple
    node_ses: tuple
    finite: bool

    @property
    def sup_se(self) -> float:
        return float(self.node_ses[list(self.node_means).index(max(self.node_means))]) if self.node_means else 0.0


def kazamaki_statistic(
    bundle: ScenarioBundle,
    solution: SolutionField,
    eta: float,
    q_tilde: float,
    stopping_nodes: list[int] | None = None,
) -> KazamakiReport:
    """sup over the stopping grid of E[exp(eta Mt + (1/2 - eta) <Mt>)] for
    Mt = q_tilde (Z.M + N), discretized on the bundle's grid."""
    if eta == 1.0:
        raise ValueError("the criterion needs eta != 1")
    K = bundle.grid.n_steps
    nodes = list(range(K + 1)) if stopping_nodes is None else sorted(set(int(i) for i in stopping_nodes))
    if nodes and (nodes[0] < 0 or nodes[-1] > K):
        raise ValueError("stopping nodes must be grid node indices")

    incr = np.einsum("nkd,nkd->nk", solution.z, bundle.dm) + np.einsum("nkq,nkq->nk", solution.z_orth, bundle.dorth)
    qv_incr = (
        np.einsum("nkd,nkd->nk", solution.z, solution.z) + np.einsum("nkq,nkq->nk", solution.z_orth, solution.z_orth)
    ) * bundle.dt[None, :]
    mt = np.zeros((bundle.n_paths, K + 1))
    qv = np.zeros((bundle.n_paths, K + 1))
    np.cumsum(q_tilde * incr, axis=1, out=mt[:, 1:])
    np.cumsum(q_tilde**2 * qv_incr, axis=1, out=qv[:, 1:])

    means, ses = [], []
    finite = True
    for i in nodes:
        with np.errstate(over="ignore"):
            vals = np.exp(eta * mt[:, i] + (0.5 - eta) * qv[:, i])
        if not np.all(np.isfinite(vals)):
            finite = False
            means.append(float("inf"))
            ses.append(float("inf"))
            continue
        m, s = _mean_se(vals)
        means.append(m)
        ses.append(s)
    sup_idx = int(np.argmax(means))
    return KazamakiReport(
        eta=eta,
        q_tilde=q_tilde,
        sup=float(means[sup_idx]),
        sup_node=int(nodes[sup_idx]),
        node_means=tuple(means),
        node_ses=tuple(ses),
        finite=finite,
    )
