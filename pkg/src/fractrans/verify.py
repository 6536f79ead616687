"""Self-verification suite: closed-form anchors and cross-method checks.

Each check returns a record {name, target, achieved, tolerance, pass};
the CLI aggregates them into a JSON report.  Anchors use only identities
with independent closed forms (the half-order kernels reduce to Gaussian
and complementary-error-function expressions), plus quadrature-vs-Monte
Carlo and quadrature-vs-solver cross-validation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, gamma

from .measures import EmpiricalMeasure, bl_distance, moment, w1_distance_1d
from .specfun import (
    FracOrder,
    h_quadrature,
    inverse_moment_coeff,
    inverse_subordinator_density,
    mittag_leffler,
)
from .subordinator import RngSpec, mc_exponential_functional, sample_inverse
from .transport import ExplicitField, SolverConfig, solve_linear, solve_linear_mc

__all__ = ["run_checks", "default_checks"]


def _record(name, target, achieved, tolerance):
    return {
        "name": name,
        "target": float(target),
        "achieved": float(achieved),
        "tolerance": float(tolerance),
        "pass": bool(abs(achieved - target) <= tolerance),
    }


def check_kernel_anchor_half():
    """h at beta = 1/2 against the Gaussian closed form."""
    worst = 0.0
    beta = FracOrder(0.5)
    for t in (0.5, 1.0, 2.0):
        for s in np.linspace(0.0, 4.0, 21):
            exact = math.exp(-s * s / (4.0 * t)) / math.sqrt(math.pi * t)
            worst = max(worst, abs(inverse_subordinator_density(beta, float(s), t) - exact))
    return _record("kernel_anchor_half_order", 0.0, worst, 1e-8)


def check_kernel_origin():
    """h(0+, t) = t^(-beta)/Gamma(1-beta)."""
    worst = 0.0
    for b in (0.3, 0.5, 0.7):
        for t in (0.5, 1.0, 2.0):
            exact = t ** (-b) / gamma(1.0 - b)
            worst = max(
                worst, abs(inverse_subordinator_density(FracOrder(b), 0.0, t) - exact)
            )
    return _record("kernel_origin_limit", 0.0, worst, 1e-8)


def check_moment_quadrature(eps_tail=1e-10, q=96):
    """Rule moments against Gamma-ratio coefficients, relative error."""
    worst = 0.0
    for b in (0.3, 0.5, 0.7, 0.9):
        beta = FracOrder(b)
        for t in (0.5, 1.0, 2.0):
            rule = h_quadrature(beta, t, q, eps_tail)
            for g in (1.0, 2.0):
                exact = inverse_moment_coeff(beta, g) * t ** (g * b)
                got = rule.integrate(lambda s: s**g)
                worst = max(worst, abs(got - exact) / exact)
    return _record("moment_identity_quadrature", 0.0, worst, 1e-5)


def check_exponential_identity(eps_tail=1e-13, q=128):
    """Quadrature exponential functional vs the Mittag-Leffler function."""
    worst = 0.0
    for b in (0.3, 0.5, 0.7):
        beta = FracOrder(b)
        for t in (0.5, 1.0, 2.0):
            rule = h_quadrature(beta, t, q, eps_tail)
            for lam in (-1.0, 0.5):
                exact = mittag_leffler(beta, lam * t**b)
                got = rule.integrate(lambda s: np.exp(lam * s))
                worst = max(worst, abs(got - exact) / abs(exact))
    return _record("exponential_identity_quadrature", 0.0, worst, 1e-5)


def check_exponential_identity_mc(seed=20260823, n=100_000):
    """MC exponential functional brackets the Mittag-Leffler value at 3 sigma."""
    beta = FracOrder(0.5)
    exact = mittag_leffler(beta, -1.0)
    est, se = mc_exponential_functional(beta, -1.0, 1.0, n, RngSpec(seed))
    # normalized deviation: pass when |est - exact| <= 3 stderr + dtau slack
    dev = abs(est - exact) / (3.0 * se + 1e-3)
    return _record("exponential_identity_mc", 0.0, dev, 1.0)


def check_half_order_oracle():
    """Mittag-Leffler at order 1/2 against exp(z^2) erfc(-z)."""
    beta = FracOrder(0.5)
    worst = 0.0
    for z in (-3.0, -1.0, -0.25, 0.5, 1.0, 2.0):
        exact = math.exp(z * z) * erfc(-z)
        worst = max(worst, abs(mittag_leffler(beta, z) - exact) / exact)
    return _record("mittag_leffler_half_order", 0.0, worst, 1e-10)


def check_metric_anchor():
    """Bounded-Lipschitz LP optimum for unit Diracs at distance 1."""
    d0 = EmpiricalMeasure.dirac([0.0])
    d1 = EmpiricalMeasure.dirac([1.0])
    return _record("bl_two_diracs", 2.0 / 3.0, bl_distance(d0, d1), 1e-9)


def check_metric_domination(seed=7, n_cases=200):
    """d_BL <= W1 on random probability-normalized line ensembles."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n, m = rng.integers(1, 8, size=2)
        mu = EmpiricalMeasure(points=rng.normal(size=(n, 1)), weights=np.full(n, 1.0 / n))
        nu = EmpiricalMeasure(points=rng.normal(size=(m, 1)), weights=np.full(m, 1.0 / m))
        worst = max(worst, bl_distance(mu, nu) - w1_distance_1d(mu, nu))
    return _record("bl_dominated_by_w1", 0.0, max(worst, 0.0), 1e-9)


def check_dirac_transport(eps_tail=1e-10):
    """Linear solver with unit velocity from a Dirac: first moment at
    t = 1 equals the mean internal time."""
    beta = FracOrder(0.5)
    v = ExplicitField(func=lambda x, t: np.ones_like(x), bound=1.0, lip=0.0)
    cfg = SolverConfig(beta=beta, times=(1.0,), q_h=64, q_g=16, eps_tail=eps_tail, ode_step=1e-2)
    path = solve_linear(beta, v, EmpiricalMeasure.dirac([0.0]), cfg)
    exact = inverse_moment_coeff(beta, 1.0)
    got = moment(path.measures[-1], 1)
    return _record("dirac_transport_first_moment", 0.0, abs(got - exact) / exact, 1e-3)


def check_dirac_transport_mc(seed=314, n=50_000):
    """MC solver brackets the same first moment at 3 sigma."""
    beta = FracOrder(0.5)
    v = ExplicitField(func=lambda x, t: np.ones_like(x), bound=1.0, lip=0.0)
    cfg = SolverConfig(
        beta=beta, times=(1.0,), q_h=32, q_g=16, eps_tail=1e-8, ode_step=1e-2, seed=seed
    )
    path = solve_linear_mc(beta, v, EmpiricalMeasure.dirac([0.0]), cfg, n_paths=n)
    exact = inverse_moment_coeff(beta, 1.0)
    mu = path.measures[-1]
    vals = mu.points.ravel()
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    dev = abs(moment(mu, 1) - exact) / (3.0 * se + 1e-3)
    return _record("dirac_transport_first_moment_mc", 0.0, dev, 1.0)


def check_mc_moment(seed=99, n=50_000):
    """Sampled internal clock reproduces first and second moments."""
    beta = FracOrder(0.5)
    draws = sample_inverse(beta, 1.0, 1e-3, RngSpec(seed), size=n)
    worst = 0.0
    for g in (1.0, 2.0):
        vals = draws**g
        exact = inverse_moment_coeff(beta, g)
        se = float(vals.std(ddof=1) / math.sqrt(n))
        worst = max(worst, abs(float(vals.mean()) - exact) / (3.0 * se + 1e-3 * g))
    return _record("inverse_clock_moments_mc", 0.0, worst, 1.0)


def default_checks():
    return [
        check_kernel_anchor_half,
        check_kernel_origin,
        check_half_order_oracle,
        check_moment_quadrature,
        check_exponential_identity,
        check_exponential_identity_mc,
        check_metric_anchor,
        check_metric_domination,
        check_dirac_transport,
        check_dirac_transport_mc,
        check_mc_moment,
    ]


def run_checks(overrides: dict | None = None) -> dict:
    """Run the suite; ``overrides`` may loosen eps_tail for experiments."""
    overrides = overrides or {}
    report = []
    for factory in default_checks():
        name = factory.__name__
        kwargs = {}
        if "eps_tail" in overrides and "eps_tail" in factory.__code__.co_varnames[: factory.__code__.co_argcount]:
            kwargs["eps_tail"] = overrides["eps_tail"]
        report.append(factory(**kwargs))
    return {"checks": report, "all_pass": all(c["pass"] for c in report)}
