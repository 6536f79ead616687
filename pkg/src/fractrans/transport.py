"""Solvers for measure transport with a fractional (memory) time derivative.

The representation behind every solver: the solution at real time t is
the classical push-forward solution evaluated at a random internal time
and averaged against the inverse-subordinator density,

    mu_t = integral of Phi_s # mu_0 against h_beta(s, t) ds,

where the characteristic flow Phi uses the effective velocity, i.e. the
original field averaged against the subordinator density g_beta.  The
linear solver evaluates this directly on quadrature rules; the nonlinear
(interaction) solver runs a Picard fixed point on the same formula; a
Monte Carlo solver samples the internal clock instead of integrating it
and serves as an independent oracle.  beta = 1 degenerates to classical
transport and is special-cased throughout (no averaging).
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .errors import PicardConvergenceError
from .measures import (
    EmpiricalMeasure,
    MeasurePath,
    bl_distance,
    total_mass,
)
from .specfun import FracOrder, QuadratureRule, g_quadrature, h_quadrature, stable_cdf
from .subordinator import RngSpec, sample_inverse_grid

__all__ = [
    "ExplicitField",
    "InteractionField",
    "attraction_field",
    "repulsion_field",
    "SolverConfig",
    "FlowTable",
    "effective_velocity",
    "effective_velocity_from_path",
    "integrate_flow",
    "solve_linear",
    "solve_linear_mc",
    "solve_nonlinear",
    "solve_with_source",
    "solve_classical",
]


# ---------------------------------------------------------------------------
# Velocity fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplicitField:
    """Time-dependent field v(x, t): (N, d) positions -> (N, d) velocities.

    ``bound`` and ``lip`` are the caller-supplied sup bound and Lipschitz
    constant in x; both are needed by step-size guards and diagnostics.
    """

    func: object
    bound: float
    lip: float

    def __call__(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.func(x, t), dtype=float).reshape(x.shape)


@dataclass(frozen=True)
class InteractionField:
    """Interaction field v[mu](x) = sum_j w_j K(x - y_j).

    ``kernel`` maps an array of displacements to velocity vectors.  The
    induced field inherits bound V0 * mass(mu) and is Lipschitz in both
    arguments.  ``pairwise`` may name a fused kernel implementation from
    the compiled core ("repulsion") to avoid materializing the N x M
    displacement array.
    """

    kernel: object
    bound: float
    lip: float
    pairwise: str = ""

    def induced(self, mu: EmpiricalMeasure):
        """Velocity function x -> v[mu](x) for a frozen measure."""
        if mu.size == 0:
            return lambda x: np.zeros_like(np.atleast_2d(x), dtype=float)
        if self.pairwise == "repulsion":
            return lambda x: _core.pairwise_repulsion_sum(
                np.atleast_2d(x), mu.points, mu.weights
            )

        def vel(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            disp = x[:, None, :] - mu.points[None, :, :]
            k = np.asarray(self.kernel(disp.reshape(-1, mu.dim)), dtype=float)
            k = k.reshape(x.shape[0], mu.size, mu.dim)
            return np.einsum("j,njd->nd", mu.weights, k)

        return vel


def attraction_field(lip: float = 1.0) -> InteractionField:
    """K(z) = -z: linear aggregation toward the center of mass."""
    return InteractionField(kernel=lambda z: -z, bound=math.inf, lip=lip)


def repulsion_field() -> InteractionField:
    """K(z) = z / (1 + |z|^2): bounded repulsion from nearby mass."""

    def kernel(z):
        z = np.atleast_2d(z)
        return z / (1.0 + np.sum(z * z, axis=-1, keepdims=True))

    return InteractionField(kernel=kernel, bound=0.5, lip=1.0, pairwise="repulsion")


# ---------------------------------------------------------------------------
# Configuration and flow tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by all solvers.

    ``times`` is the output grid (excluding 0, which is always included
    in the returned path); ``t_ext`` extends the working grid beyond the
    last output time for the nonlinear velocity lookup, with the induced
    freezing error logged per run.
    """

    beta: FracOrder
    times: tuple
    q_h: int = 64
    q_g: int = 32
    eps_tail: float = 1e-10
    ode_step: float = 1e-2
    picard_tol: float = 1e-3
    picard_max_iters: int = 30
    t_ext: float = 0.0
    seed: int = 0
    bl_cap: int = 200

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times or any(t <= 0.0 for t in times) or list(times) != sorted(times):
            raise ValueError("output times must be positive and increasing")
        object.__setattr__(self, "times", times)
        if self.t_ext and self.t_ext < times[-1]:
            raise ValueError("t_ext must reach at least the last output time")
        if self.ode_step <= 0.0 or self.picard_tol <= 0.0 or self.picard_max_iters < 1:
            raise ValueError("ode_step, picard_tol, picard_max_iters must be positive")

    @property
    def horizon(self) -> float:
        return self.t_ext if self.t_ext else self.times[-1]


@dataclass(frozen=True)
class FlowTable:
    """Particle positions along the characteristic flow.

    ``s_nodes`` starts at 0 where the flow is the identity; ``positions``
    has shape (len(s_nodes), N, d).  Intermediate internal times are
    answered by linear interpolation between recorded nodes (the
    recording step equals the RK4 step, so the interpolation error is
    dominated by the integrator error).
    """

    s_nodes: np.ndarray
    positions: np.ndarray

    def at(self, s: float) -> np.ndarray:
        nodes = self.s_nodes
        if s <= nodes[0]:
            return self.positions[0]
        if s >= nodes[-1]:
            return self.positions[-1]
        j = int(np.searchsorted(nodes, s, side="right")) - 1
        frac = (s - nodes[j]) / (nodes[j + 1] - nodes[j])
        return (1.0 - frac) * self.positions[j] + frac * self.positions[j + 1]


# ---------------------------------------------------------------------------
# Effective velocities
# ---------------------------------------------------------------------------


def _check_g_rule(rule: QuadratureRule, t: float):
    from .specfun import KernelTarget

    if rule.target is not KernelTarget.G_KERNEL:
        raise ValueError("effective velocity needs a g-kernel rule")
    if abs(rule.time - t) > 1e-12 * max(t, 1.0):
        raise ValueError(f"rule built for time {rule.time}, asked at {t}")


def effective_velocity(beta: FracOrder, v: ExplicitField, x, t: float, rule: QuadratureRule):
    """g-average of an explicit field: sum_q w_q v(x, s_q).

    Weights are renormalized by the captured mass so constant-in-time
    fields pass through exactly; the truncation error for general fields
    is bounded by ``v.bound * rule.tail_mass``.
    """
    _check_g_rule(rule, t)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros_like(x)
    wsum = rule.weights.sum()
    for s_q, w_q in zip(rule.nodes, rule.weights):
        total += (w_q / wsum) * v(x, float(s_q))
    return total


def effective_velocity_from_path(
    beta: FracOrder, v: InteractionField, path: MeasurePath, x, s: float, rule: QuadratureRule
):
    """g-average of the interaction field along a measure path.

    Evaluates sum_q w_q v[mu_{r_q}](x) with piecewise-constant lookup of
    the path; real times beyond the recorded horizon reuse the final
    measure (freezing), with the induced error bounded by
    2 * bound * P(D_s > horizon).
    """
    _check_g_rule(rule, s)
    if not path.measures:
        raise ValueError("empty measure path")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros_like(x)
    wsum = rule.weights.sum()
    for r_q, w_q in zip(rule.nodes, rule.weights):
        total += (w_q / wsum) * v.induced(path.at(float(r_q)))(x)
    return total


def freezing_tail_probability(beta: FracOrder, s: float, horizon: float) -> float:
    """P(D_s > horizon): weight of path lookups frozen at the end."""
    if beta.is_classical:
        return 0.0 if s <= horizon else 1.0
    x = horizon * s ** (-1.0 / beta.beta)
    return 1.0 - stable_cdf(beta, x)


# ---------------------------------------------------------------------------
# Flow integration
# ---------------------------------------------------------------------------


def integrate_flow(vel, mu0: EmpiricalMeasure, s_nodes, ode_step: float, lip: float = 0.0) -> FlowTable:
    """Classical RK4 characteristics x' = vel(x, s) for every particle.

    ``s_nodes`` must increase from 0; positions are recorded at every RK4
    step so the table supports interpolation at arbitrary internal times.
    The step guard rejects ``ode_step * lip > 1`` (one step would span
    more than a unit of the field's relaxation scale).
    """
    s_nodes = np.asarray(s_nodes, dtype=float)
    if s_nodes[0] != 0.0 or np.any(np.diff(s_nodes) <= 0.0):
        raise ValueError("flow nodes must increase from 0")
    if lip > 0.0 and ode_step * lip > 1.0:
        raise ValueError(
            f"ode_step {ode_step} too large for Lipschitz constant {lip}"
        )
    x = mu0.points.astype(float).copy()
    rec_s = [0.0]
    rec_x = [x.copy()]
    s = 0.0
    for target in s_nodes[1:]:
        while s < target - 1e-15 * max(target, 1.0):
            h = min(ode_step, target - s)
            k1 = vel(x, s)
            k2 = vel(x + 0.5 * h * k1, s + 0.5 * h)
            k3 = vel(x + 0.5 * h * k2, s + 0.5 * h)
            k4 = vel(x + h * k3, s + h)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            s += h
            rec_s.append(s)
            rec_x.append(x.copy())
        s = float(target)
        rec_s[-1] = s
    return FlowTable(s_nodes=np.array(rec_s), positions=np.array(rec_x))


# ---------------------------------------------------------------------------
# Helpers shared by the solvers
# ---------------------------------------------------------------------------


def _h_mixture(mu0: EmpiricalMeasure, flow: FlowTable, rule: QuadratureRule) -> EmpiricalMeasure:
    """Mixture sum_q w_q Phi_{s_q} # mu0 with weights renormalized to
    unit total, so the output mass equals the input mass exactly."""
    wsum = rule.weights.sum()
    pts = np.concatenate([flow.at(float(s_q)) for s_q in rule.nodes])
    wts = np.concatenate(
        [(w_q / wsum) * mu0.weights for w_q in rule.weights]
    )
    return EmpiricalMeasure(points=pts, weights=wts)


def _subsample(mu: EmpiricalMeasure, cap: int, rng: np.random.Generator) -> EmpiricalMeasure:
    if mu.size <= cap:
        return mu
    p = mu.weights / mu.weights.sum()
    idx = rng.choice(mu.size, size=cap, replace=True, p=p)
    mass = total_mass(mu)
    return EmpiricalMeasure(
        points=mu.points[idx], weights=np.full(cap, mass / cap)
    )


def _path_distance(a: MeasurePath, b: MeasurePath, cap: int, seed: int) -> float:
    """sup over the grid of d_BL, with capped deterministic subsampling
    when the union support would exceed the LP limit."""
    worst = 0.0
    for k, (mu, nu) in enumerate(zip(a.measures, b.measures)):
        if mu.size + nu.size > cap:
            # common random numbers: identically seeded generators per side,
            # so equal measures subsample to equal ensembles (distance 0)
            mu = _subsample(mu, cap // 2, np.random.default_rng([seed, k]))
            nu = _subsample(nu, cap // 2, np.random.default_rng([seed, k]))
        worst = max(worst, bl_distance(mu, nu))
    return worst


def _grid_with_extension(config: SolverConfig) -> np.ndarray:
    """Output times plus 0, extended up to the lookup horizon."""
    times = [0.0] + list(config.times)
    if config.t_ext and config.t_ext > times[-1]:
        step = min(np.diff(times).min(), config.t_ext - times[-1])
        extra = np.arange(times[-1] + step, config.t_ext + 0.5 * step, step)
        times = times + [float(t) for t in extra]
    return np.asarray(times)


def solve_classical(v, mu0: EmpiricalMeasure, config: SolverConfig, velocity=None) -> MeasurePath:
    """beta = 1 reference solver: mu_t = Phi_t # mu0 with the raw field."""
    grid = np.concatenate([[0.0], np.asarray(config.times)])
    if velocity is None:
        if isinstance(v, ExplicitField):
            velocity = v
            lip = v.lip
        else:
            raise TypeError("solve_classical needs an explicit field or velocity")
    else:
        lip = getattr(v, "lip", 0.0)
    flow = integrate_flow(velocity, mu0, grid, config.ode_step, lip=lip)
    measures = [
        EmpiricalMeasure(points=flow.at(float(t)), weights=mu0.weights)
        if mu0.size
        else mu0
        for t in grid
    ]
    return MeasurePath(times=grid, measures=measures, beta=config.beta)


# ---------------------------------------------------------------------------
# Linear solver and its Monte Carlo oracle
# ---------------------------------------------------------------------------


def solve_linear(beta: FracOrder, v: ExplicitField, mu0: EmpiricalMeasure, config: SolverConfig) -> MeasurePath:
    """Linear problem: average of effective-flow push-forwards.

    One flow integration covers the union of every output time's
    h-quadrature nodes (self-similar rules share weights, nodes scale by
    t^beta); each output measure is the weight-renormalized mixture of
    node push-forwards, so mass is conserved exactly.
    """
    if beta.is_classical:
        return solve_classical(v, mu0, config)
    g_unit = g_quadrature(beta, 1.0, config.q_g, max(config.eps_tail, 1e-8))
    scale_g = g_unit.nodes.copy()

    def eff_vel(x, s):
        if s <= 0.0:
            return v(x, 0.0)
        nodes = scale_g * s ** (1.0 / beta.beta)
        wsum = g_unit.weights.sum()
        out = np.zeros_like(np.atleast_2d(x), dtype=float)
        for r_q, w_q in zip(nodes, g_unit.weights):
            out += (w_q / wsum) * v(x, float(r_q))
        return out

    rules = [h_quadrature(beta, t, config.q_h, config.eps_tail) for t in config.times]
    s_union = np.unique(np.concatenate([[0.0]] + [r.nodes for r in rules]))
    flow = integrate_flow(eff_vel, mu0, s_union, config.ode_step, lip=v.lip)
    measures = [mu0] + [_h_mixture(mu0, flow, rule) for rule in rules]
    grid = np.concatenate([[0.0], np.asarray(config.times)])
    return MeasurePath(times=grid, measures=measures, beta=beta)


def solve_linear_mc(
    beta: FracOrder,
    v: ExplicitField,
    mu0: EmpiricalMeasure,
    config: SolverConfig,
    n_paths: int,
    dtau: float = 1e-3,
) -> MeasurePath:
    """Monte Carlo oracle: sample the internal clock instead of
    integrating against its density.

    Each sampled path contributes the deterministic effective flow
    evaluated at its own internal times; the output at time t is the
    equal-weight mixture over paths (mass conserved exactly).
    """
    if beta.is_classical:
        return solve_classical(v, mu0, config)
    g_unit = g_quadrature(beta, 1.0, config.q_g, max(config.eps_tail, 1e-8))

    def eff_vel(x, s):
        if s <= 0.0:
            return v(x, 0.0)
        nodes = g_unit.nodes * s ** (1.0 / beta.beta)
        wsum = g_unit.weights.sum()
        out = np.zeros_like(np.atleast_2d(x), dtype=float)
        for r_q, w_q in zip(nodes, g_unit.weights):
            out += (w_q / wsum) * v(x, float(r_q))
        return out

    rng = RngSpec(seed=config.seed, stream_id=1)
    clocks = sample_inverse_grid(beta, config.times, dtau, rng, n_paths)
    s_max = float(clocks.max())
    n_steps = max(int(math.ceil(s_max / config.ode_step)), 1)
    s_grid = np.linspace(0.0, s_max, n_steps + 1)
    flow = integrate_flow(eff_vel, mu0, s_grid, config.ode_step, lip=v.lip)
    measures = [mu0]
    for col, _t in enumerate(config.times):
        pts = np.concatenate([flow.at(float(s)) for s in clocks[:, col]])
        wts = np.concatenate([mu0.weights / n_paths] * n_paths)
        measures.append(EmpiricalMeasure(points=pts, weights=wts))
    grid = np.concatenate([[0.0], np.asarray(config.times)])
    return MeasurePath(times=grid, measures=measures, beta=beta)


# ---------------------------------------------------------------------------
# Nonlinear (interaction) solver: Picard fixed point
# ---------------------------------------------------------------------------


def solve_nonlinear(
    beta: FracOrder, v: InteractionField, mu0: EmpiricalMeasure, config: SolverConfig
) -> MeasurePath:
    """Interaction problem via Picard iteration on the representation map.

    Starting from the constant-in-time path mu0, each sweep solves the
    auxiliary linear problem whose velocity is the g-averaged interaction
    field induced by the previous iterate, and stops when the sup over
    the output grid of d_BL between consecutive sweeps drops below
    ``picard_tol``.  The iteration log (one dict per sweep) is attached
    to the returned path's diagnostics.
    """
    return _picard_loop(beta, v, mu0, config, classical=beta.is_classical)


def _picard_loop(beta, v, mu0, config, classical):
    grid = _grid_with_extension(config)
    horizon = float(grid[-1])
    current = MeasurePath(
        times=grid, measures=[mu0] * grid.size, beta=beta
    )
    g_unit = None if classical else g_quadrature(beta, 1.0, config.q_g, max(config.eps_tail, 1e-8))
    rules = (
        None
        if classical
        else [h_quadrature(beta, t, config.q_h, config.eps_tail) for t in grid[1:]]
    )
    log = []
    trace = []
    mass = total_mass(mu0)
    lip = v.lip * max(mass, 1.0)
    for sweep in range(1, config.picard_max_iters + 1):
        t0 = _time.perf_counter()
        prev = current

        if classical:

            def vel(x, s, _p=prev):
                return v.induced(_p.at(float(s)))(x)

            flow = integrate_flow(vel, mu0, grid, config.ode_step, lip=lip)
            measures = [
                EmpiricalMeasure(points=flow.at(float(t)), weights=mu0.weights)
                for t in grid
            ]
        else:

            def vel(x, s, _p=prev):
                if s <= 0.0:
                    return v.induced(_p.at(0.0))(x)
                nodes = g_unit.nodes * s ** (1.0 / beta.beta)
                wsum = g_unit.weights.sum()
                out = np.zeros_like(np.atleast_2d(x), dtype=float)
                for r_q, w_q in zip(nodes, g_unit.weights):
                    out += (w_q / wsum) * v.induced(_p.at(float(r_q)))(x)
                return out

            s_union = np.unique(np.concatenate([[0.0]] + [r.nodes for r in rules]))
            flow = integrate_flow(vel, mu0, s_union, config.ode_step, lip=lip)
            measures = [mu0] + [_h_mixture(mu0, flow, rule) for rule in rules]

        current = MeasurePath(times=grid, measures=measures, beta=beta)
        dist = _path_distance(prev, current, config.bl_cap, config.seed)
        wall = _time.perf_counter() - t0
        log.append({"sweep": sweep, "sup_dbl": dist, "wall_time": wall})
        trace.append(dist)
        if dist < config.picard_tol:
            break
    else:
        raise PicardConvergenceError(
            f"no convergence after {config.picard_max_iters} sweeps "
            f"(last distance {trace[-1]:.3e}, tol {config.picard_tol:.3e})",
            trace,
        )

    keep = [0] + [int(np.searchsorted(grid, t)) for t in config.times]
    out = MeasurePath(
        times=grid[keep],
        measures=[current.measures[k] for k in keep],
        beta=beta,
    )
    freeze = (
        0.0
        if classical
        else max(
            freezing_tail_probability(beta, float(s), horizon)
            for s in ([r.nodes[-1] for r in rules])
        )
    )
    out.diagnostics.update(
        {
            "picard_log": log,
            "sweeps": len(log),
            "freezing_tail_probability": 2.0 * v.bound * mass * freeze
            if math.isfinite(v.bound)
            else freeze,
        }
    )
    return out


# ---------------------------------------------------------------------------
# Source term (Duhamel layer)
# ---------------------------------------------------------------------------


def solve_with_source(
    beta: FracOrder,
    v: ExplicitField,
    mu0: EmpiricalMeasure,
    gamma_path: MeasurePath,
    config: SolverConfig,
) -> MeasurePath:
    """Linear problem with a nonnegative source, by the double average

        mu_t = integral of (Phi_s # mu0 + Duhamel_s) h_beta(s, t) ds,
        Duhamel_s = sum over flow nodes r < s of dr * Phi_{r -> s} # Gamma_r,

    where Gamma_r is the source path averaged against g_beta(., r).  The
    inner integral uses the rectangle rule on the flow node grid; source
    particles are injected at each node and advected together with the
    initial ensemble, so one flow sweep covers every term.  Mass grows by
    the accumulated source mass under the double average (reported in the
    path diagnostics, not conserved).
    """
    for gm in gamma_path.measures:
        if gm.size and np.any(gm.weights <= 0.0):
            raise ValueError("source measures must be nonnegative")
    if beta.is_classical:
        return _classical_with_source(v, mu0, gamma_path, config)

    g_unit = g_quadrature(beta, 1.0, config.q_g, max(config.eps_tail, 1e-8))

    def eff_vel(x, s):
        if s <= 0.0:
            return v(x, 0.0)
        nodes = g_unit.nodes * s ** (1.0 / beta.beta)
        wsum = g_unit.weights.sum()
        out = np.zeros_like(np.atleast_2d(x), dtype=float)
        for r_q, w_q in zip(nodes, g_unit.weights):
            out += (w_q / wsum) * v(x, float(r_q))
        return out

    def g_average_source(r: float) -> EmpiricalMeasure:
        """Gamma_r: mixture of source measures at g-rule real times."""
        if r <= 0.0:
            return gamma_path.at(0.0)
        nodes = g_unit.nodes * r ** (1.0 / beta.beta)
        wsum = g_unit.weights.sum()
        pts, wts = [], []
        for r_q, w_q in zip(nodes, g_unit.weights):
            gm = gamma_path.at(float(r_q))
            if gm.size:
                pts.append(gm.points)
                wts.append((w_q / wsum) * gm.weights)
        if not pts:
            return EmpiricalMeasure(points=np.zeros((0, mu0.dim)), weights=np.zeros(0))
        return EmpiricalMeasure(points=np.concatenate(pts), weights=np.concatenate(wts))

    rules = [h_quadrature(beta, t, config.q_h, config.eps_tail) for t in config.times]
    s_union = np.unique(np.concatenate([[0.0]] + [r.nodes for r in rules]))

    # advect the initial ensemble and, at every node, inject the averaged
    # source (weighted by the rectangle width) and advect it onward too
    x = mu0.points.astype(float).copy()
    src_pts = np.zeros((0, mu0.dim))
    src_wts = np.zeros(0)
    duhamel = {0.0: (src_pts, src_wts)}
    base = {0.0: x.copy()}
    for j in range(s_union.size - 1):
        s_a, s_b = float(s_union[j]), float(s_union[j + 1])
        dr = s_b - s_a
        gamma_avg = g_average_source(s_a)
        if gamma_avg.size:
            src_pts = np.concatenate([src_pts, gamma_avg.points])
            src_wts = np.concatenate([src_wts, dr * gamma_avg.weights])
        # one RK4 leg carries base and source particles together
        combined = np.concatenate([x, src_pts]) if src_pts.size else x
        moved = _advect_segment(eff_vel, combined, s_a, s_b, config.ode_step)
        x = moved[: x.shape[0]]
        src_pts = moved[x.shape[0] :]
        base[s_b] = x.copy()
        duhamel[s_b] = (src_pts.copy(), src_wts.copy())

    measures = [mu0]
    diag_mass = []
    for rule, t in zip(rules, config.times):
        wsum = rule.weights.sum()
        pts, wts = [], []
        for s_q, w_q in zip(rule.nodes, rule.weights):
            s_key = float(s_q)
            pts.append(base[s_key])
            wts.append((w_q / wsum) * mu0.weights)
            d_pts, d_wts = duhamel[s_key]
            if d_wts.size:
                pts.append(d_pts)
                wts.append((w_q / wsum) * d_wts)
        mu_t = EmpiricalMeasure(points=np.concatenate(pts), weights=np.concatenate(wts))
        measures.append(mu_t)
        diag_mass.append(total_mass(mu_t))
    grid = np.concatenate([[0.0], np.asarray(config.times)])
    out = MeasurePath(times=grid, measures=measures, beta=beta)
    out.diagnostics["source_mass"] = [m - total_mass(mu0) for m in diag_mass]
    return out


def _advect_segment(vel, points, s_a, s_b, ode_step):
    """RK4 advection of raw positions from internal time s_a to s_b."""
    if points.size == 0 or s_b <= s_a:
        return points
    x = points.copy()
    s = s_a
    while s < s_b - 1e-15 * max(s_b, 1.0):
        h = min(ode_step, s_b - s)
        k1 = vel(x, s)
        k2 = vel(x + 0.5 * h * k1, s + 0.5 * h)
        k3 = vel(x + 0.5 * h * k2, s + 0.5 * h)
        k4 = vel(x + h * k3, s + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += h
    return x


def _classical_with_source(v, mu0, gamma_path, config):
    grid = np.concatenate([[0.0], np.asarray(config.times)])
    fine = np.unique(
        np.concatenate([grid, np.arange(0.0, grid[-1] + 1e-12, config.ode_step)])
    )
    x = mu0.points.astype(float).copy()
    src_pts = np.zeros((0, mu0.dim))
    src_wts = np.zeros(0)
    snapshots = {0.0: (x.copy(), src_pts.copy(), src_wts.copy())}
    for j in range(fine.size - 1):
        t_a, t_b = float(fine[j]), float(fine[j + 1])
        dr = t_b - t_a
        gm = gamma_path.at(t_a)
        if gm.size:
            src_pts = np.concatenate([src_pts, gm.points])
            src_wts = np.concatenate([src_wts, dr * gm.weights])
        combined = np.concatenate([x, src_pts]) if src_pts.size else x
        moved = _advect_segment(lambda y, s: v(y, s), combined, t_a, t_b, config.ode_step)
        x = moved[: x.shape[0]]
        src_pts = moved[x.shape[0] :]
        snapshots[t_b] = (x.copy(), src_pts.copy(), src_wts.copy())
    measures = []
    for t in grid:
        xb, sp, sw = snapshots[float(t)]
        if sw.size:
            mu = EmpiricalMeasure(
                points=np.concatenate([xb, sp]),
                weights=np.concatenate([mu0.weights, sw]),
            )
        else:
            mu = EmpiricalMeasure(points=xb, weights=mu0.weights)
        measures.append(mu)
    return MeasurePath(times=grid, measures=measures, beta=config.beta)
