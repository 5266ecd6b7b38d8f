r"""Inertial Bregman proximal DC algorithm and its plug-and-play form.

Problems have the form

.. math::
    \min_x \; \Psi(x) = f_1(x) - f_2(x) + g(x)

with :math:`f_1, f_2` convex, :math:`f_1` smooth adaptable relative to a
kernel :math:`h`, and :math:`g` weakly convex. One iteration reads

.. math::
    y^k &= x^k + \beta_k (x^k - x^{k-1}), \\
    x^{k+1} &= \mathrm{prox}^h_{\lambda g} \circ \nabla h^*
        \bigl(\nabla h(y^k) - \lambda(\nabla f_1(y^k) - \xi^k)\bigr),
        \quad \xi^k \in \partial f_2(x^k),

where :math:`\beta_k` is accepted only if
:math:`\lambda(\delta-\epsilon) D_h(x^{k-1}, x^k) \ge D_h(x^k, y^k)`.
In the plug-and-play form the Bregman proximal map is replaced by a
gradient-step denoiser.

Every run records per-iteration diagnostics from which the Lyapunov descent
and summability guarantees can be checked after the fact.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Union

import numpy as np

from .errors import (ConfigurationError, DivergenceError, DomainError,
                     InvalidInputError, UnsupportedError)
from .kernels import EuclideanKernel, Kernel, bregman_distance

__all__ = [
    "DCProblem",
    "SolverConfig",
    "IterationRecord",
    "SolverResult",
    "LineSearchResult",
    "DescentReport",
    "inertial_candidate",
    "line_search_beta",
    "ibpdca_step",
    "solve",
    "lyapunov",
    "objective",
    "check_descent",
    "check_step_size",
    "criticality_residual",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_HEADER",
]

log = logging.getLogger(__name__)

TRACE_HEADER = ("k", "beta", "psi", "lyapunov", "dh_prev_cur", "dh_cur_y",
                "rel_change", "fallback_y")


@dataclass
class DCProblem:
    """Oracles of ``f1 - f2 + g`` together with the geometry.

    Exactly one way of handling ``g`` is used: ``prox(lam, p)`` evaluates the
    Bregman proximal map of ``lam * g`` at ``p``, or ``denoiser`` is applied
    to ``p`` (plug-and-play). With neither, ``g = 0`` and the step returns
    ``p`` itself.

    ``g_value`` enables the objective and Lyapunov diagnostics; leave it unset
    for implicit priors. ``smad_L`` is the smooth-adaptability constant of
    ``(f1, kernel)`` when known, and is then enforced against the step size.
    """

    f1_value: Callable
    f1_grad: Callable
    f2_value: Callable
    f2_subgrad: Callable
    kernel: Kernel = field(default_factory=EuclideanKernel)
    prox: Optional[Callable] = None
    denoiser: Optional[object] = None
    g_value: Optional[Callable] = None
    weak_convexity_eta: float = 0.0
    smad_L: Optional[float] = None
    domain_member: Optional[Callable] = None

    def __post_init__(self):
        if self.weak_convexity_eta < 0:
            raise ConfigurationError("weak_convexity_eta must be >= 0")
        if self.prox is not None and self.denoiser is not None:
            raise ConfigurationError("give either prox or denoiser, not both")
        if self.denoiser is not None and self.g_value is not None:
            raise ConfigurationError("denoiser priors are implicit; g_value must be unset")

    @property
    def explicit(self):
        """True when the full objective (and hence H_delta) is computable."""
        if self.prox is None and self.denoiser is None:
            return True
        return self.g_value is not None

    def in_domain(self, x):
        if self.domain_member is not None:
            return bool(self.domain_member(x))
        return self.kernel.in_domain(x)

    def g(self, x):
        if self.g_value is not None:
            return float(self.g_value(x))
        if self.prox is None and self.denoiser is None:
            return 0.0
        raise UnsupportedError("prior is implicit; its value is not available")


@dataclass(frozen=True)
class SolverConfig:
    """Step size, Lyapunov parameters and the inertial schedule.

    ``beta`` is ``"fista"`` (backtracking from the FISTA sequence), ``"zero"``
    (plain Bregman proximal DCA) or a float in ``[0, 1)`` used as the initial
    trial value at every iteration.
    """

    lam: float
    delta: float = 0.51
    epsilon: float = 0.01
    beta: Union[str, float] = "fista"
    c: float = 0.9
    tol: float = 1e-5
    max_iter: int = 1000
    backtrack_max: int = 50

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError(f"lam must be positive, got {self.lam}")
        if not (1.0 > self.delta >= self.epsilon > 0.0):
            raise ConfigurationError(
                f"need 1 > delta >= epsilon > 0, got delta={self.delta}, "
                f"epsilon={self.epsilon}")
        if isinstance(self.beta, str):
            if self.beta not in ("fista", "zero"):
                raise ConfigurationError(f"unknown beta schedule {self.beta!r}")
        elif not 0.0 <= float(self.beta) < 1.0:
            raise ConfigurationError(f"fixed beta must lie in [0, 1), got {self.beta}")
        if not 0.0 < self.c < 1.0:
            raise ConfigurationError(f"backtracking factor c must lie in (0, 1), got {self.c}")
        if not self.tol > 0 or self.max_iter < 1 or self.backtrack_max < 1:
            raise ConfigurationError("tol, max_iter and backtrack_max must be positive")

    @property
    def beta_mode(self):
        return self.beta if isinstance(self.beta, str) else "fixed"


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics of iteration ``k`` (the step from ``x^k`` to ``x^{k+1}``).

    ``psi`` and ``lyapunov`` are evaluated at ``x^k`` (``H_delta(x^k, x^{k-1})``)
    and are ``None`` for implicit priors.
    """

    k: int
    beta_accepted: float
    psi: Optional[float]
    lyapunov: Optional[float]
    dh_prev_cur: float
    dh_cur_y: float
    rel_change: float
    fallback_y: bool


@dataclass(frozen=True)
class SolverResult:
    x_final: np.ndarray
    iterations: int
    converged: bool
    trace: List[IterationRecord]


class LineSearchResult(NamedTuple):
    beta: float
    y: np.ndarray
    mu: float
    fallback: bool


@dataclass
class DescentReport:
    """Outcome of :func:`check_descent`."""

    monotone: bool
    first_increase: Optional[int]
    summable: bool
    min_bound_ok: bool
    vanishing: bool
    partial_sums: np.ndarray
    psi_min: float

    @property
    def passed(self):
        return self.monotone and self.summable and self.min_bound_ok and self.vanishing


def _norm(x):
    return float(np.linalg.norm(np.ravel(x)))


def inertial_candidate(x_k, x_km1, beta):
    """Extrapolated point ``x_k + beta (x_k - x_km1)``."""
    x_k = np.asarray(x_k, dtype=np.float64)
    x_km1 = np.asarray(x_km1, dtype=np.float64)
    if x_k.shape != x_km1.shape:
        raise InvalidInputError(f"shape mismatch: {x_k.shape} vs {x_km1.shape}")
    if beta == 0:
        return x_k.copy()
    return x_k + beta * (x_k - x_km1)


def _next_mu(mu):
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * mu * mu))


def line_search_beta(h, config, x_k, x_km1, mu_state=1.0, in_domain=None):
    """Pick the inertial weight by backtracking on the Bregman condition.

    Trial values are ``beta0, c*beta0, c**2*beta0, ...`` with
    ``beta0 = (mu - 1)/mu`` for the FISTA schedule. The first trial with
    ``lam (delta - eps) D_h(x_km1, x_k) >= D_h(x_k, y)`` is accepted; after
    ``backtrack_max`` failures ``beta = 0`` is used, which always qualifies.
    If the candidate leaves the kernel domain it is reset to ``x_k``.

    Returns
    -------
    LineSearchResult
        ``(beta, y, mu_next, fallback)``.
    """
    if mu_state < 1:
        raise InvalidInputError(f"mu_state must be >= 1, got {mu_state}")
    mode = config.beta_mode
    new_mu = _next_mu(mu_state)
    if mode == "zero":
        beta0 = 0.0
    elif mode == "fista":
        beta0 = (mu_state - 1.0) / mu_state
    else:
        beta0 = float(config.beta)

    budget = config.lam * (config.delta - config.epsilon) * bregman_distance(h, x_km1, x_k)
    beta = beta0
    y = None
    for _ in range(config.backtrack_max):
        if beta == 0.0:
            break
        cand = inertial_candidate(x_k, x_km1, beta)
        if budget >= bregman_distance(h, x_k, cand):
            y = cand
            break
        beta *= config.c
    if y is None:
        beta = 0.0
        y = np.array(x_k, dtype=np.float64, copy=True)

    member = in_domain if in_domain is not None else h.in_domain
    fallback = False
    if beta != 0.0 and not member(y):
        y = np.array(x_k, dtype=np.float64, copy=True)
        beta = 0.0
        fallback = True
    return LineSearchResult(beta, y, new_mu, fallback)


def _apply_prior(problem, lam, p):
    if problem.denoiser is not None:
        return np.asarray(problem.denoiser.denoise(p), dtype=np.float64)
    if problem.prox is not None:
        return np.asarray(problem.prox(lam, p), dtype=np.float64)
    return p


def ibpdca_step(problem, config, x_k, y_k):
    """One Bregman proximal step from the extrapolated point ``y_k``.

    ``xi`` is a subgradient of ``f2`` at ``x_k``; the mirror point
    ``p = grad h*(grad h(y_k) - lam (grad f1(y_k) - xi))`` is passed to the
    prior (proximal map or denoiser).
    """
    h = problem.kernel
    lam = config.lam
    xi = np.asarray(problem.f2_subgrad(x_k), dtype=np.float64)
    g1 = np.asarray(problem.f1_grad(y_k), dtype=np.float64)
    p = h.grad_conj(h.grad(y_k) - lam * (g1 - xi))
    # non-finite values are left for the caller to report as divergence
    if np.all(np.isfinite(p)) and not problem.in_domain(p):
        raise DomainError("mirror point left int dom(h)")
    x_next = _apply_prior(problem, lam, p)
    if np.all(np.isfinite(x_next)) and not problem.in_domain(x_next):
        raise DomainError("proximal output left int dom(h)")
    return x_next


def objective(problem, x):
    """``Psi(x) = f1(x) - f2(x) + g(x)``."""
    return float(problem.f1_value(x)) - float(problem.f2_value(x)) + problem.g(x)


def lyapunov(problem, delta, x, y):
    """``H_delta(x, y) = Psi(x) + delta * D_h(y, x)``."""
    if not problem.explicit:
        raise UnsupportedError("H_delta needs an explicit prior value")
    return objective(problem, x) + delta * bregman_distance(problem.kernel, y, x)


def check_step_size(problem, config):
    """Raise unless ``1/lam > max(delta + eta/kappa, L)``."""
    kappa = problem.kernel.kappa
    lower = config.delta + problem.weak_convexity_eta / kappa
    if problem.smad_L is not None:
        lower = max(lower, problem.smad_L)
    if not 1.0 / config.lam > lower:
        raise ConfigurationError(
            f"step size violates 1/lam > max(delta + eta/kappa, L): "
            f"1/lam = {1.0 / config.lam:.6g} <= {lower:.6g}")


def solve(problem, config, x0, check_config=True, callback=None):
    """Run the inertial Bregman proximal DC algorithm from ``x0``.

    Parameters
    ----------
    problem : DCProblem
    config : SolverConfig
    x0 : array_like
        Starting point in the interior of the kernel domain; also used as
        ``x^{-1}``.
    check_config : bool, optional
        Enforce the step-size inequality (default ``True``).
    callback : callable, optional
        Called as ``callback(k, x_next, record)`` after every iteration.

    Returns
    -------
    SolverResult

    Raises
    ------
    DivergenceError
        If an iterate becomes non-finite; the partial trace is attached.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 contains non-finite entries")
    if not problem.in_domain(x):
        raise DomainError("x0 is not in int dom(h)")
    if check_config:
        check_step_size(problem, config)

    h = problem.kernel
    explicit = problem.explicit
    x_prev = x.copy()
    mu = 1.0
    trace = []
    converged = False
    for k in range(config.max_iter):
        ls = line_search_beta(h, config, x, x_prev, mu, problem.in_domain)
        mu = ls.mu
        if explicit:
            psi = objective(problem, x)
            lyap = psi + config.delta * bregman_distance(h, x_prev, x)
        else:
            psi = lyap = None
        dh_prev = bregman_distance(h, x_prev, x)
        dh_y = bregman_distance(h, x, ls.y)
        # a failed descent step is reported, never fatal
        if trace:
            last = trace[-1]
            if explicit and lyap > last.lyapunov + 1e-10 * (1.0 + abs(last.lyapunov)):
                log.warning("H_delta increased at k=%d: %.17g > %.17g", k, lyap, last.lyapunov)
            elif not explicit and dh_prev > last.dh_prev_cur > 0.0:
                log.debug("D_h(x_prev, x) grew at k=%d under an implicit prior", k)

        x_next = ibpdca_step(problem, config, x, ls.y)
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(f"non-finite iterate at k={k}", trace)
        rel = _norm(x_next - x) / max(_norm(x), 1e-12)
        rec = IterationRecord(k, ls.beta, psi, lyap, dh_prev, dh_y, rel, ls.fallback)
        trace.append(rec)
        if callback is not None:
            callback(k, x_next, rec)
        x_prev, x = x, x_next
        if rel < config.tol:
            converged = True
            break
    return SolverResult(x_final=x, iterations=len(trace), converged=converged, trace=trace)


def check_descent(trace, epsilon=None, vanish_rtol=1e-3):
    """Certify the Lyapunov descent and summability properties of a run.

    Checks
    ------
    (a) ``H_delta`` is non-increasing up to ``1e-10 (1 + |H|)``;
    (b) every prefix ``n`` satisfies ``sum D_h <= (Psi(x0) - Psi_min)/eps``
        (``1e-8`` slack) and ``min D_h <= (Psi(x0) - Psi_min)/(n eps)``, with
        ``Psi_min`` the smallest observed objective;
    (c) the last ``D_h(x^{k-1}, x^k)`` is at most ``vanish_rtol`` times the
        largest one (or below ``1e-12``).

    ``epsilon`` is required for (b); without it (b) is skipped (reported as
    passing). Records lacking ``lyapunov`` values skip (a) and (b).
    """
    trace = list(trace)
    dh = np.array([r.dh_prev_cur for r in trace], dtype=np.float64)
    partial = np.cumsum(dh)
    has_h = bool(trace) and all(r.lyapunov is not None for r in trace)

    monotone, first_bad = True, None
    summable = min_ok = True
    psi_min = float("nan")
    if has_h:
        H = np.array([r.lyapunov for r in trace])
        for i in range(1, len(H)):
            if H[i] > H[i - 1] + 1e-10 * (1.0 + abs(H[i - 1])):
                monotone, first_bad = False, i
                break
        psi = np.array([r.psi for r in trace])
        psi_min = float(psi.min())
        if epsilon is not None:
            gap = max(float(psi[0]) - psi_min, 0.0)
            n = np.arange(1, len(dh) + 1)
            summable = bool(np.all(partial <= gap / epsilon + 1e-8))
            # dh[0] = D_h(x^{-1}, x^0) = 0 by construction, so the running
            # minimum is taken over k >= 1 as in the summability statement.
            if len(dh) > 1:
                run_min = np.minimum.accumulate(dh[1:])
                min_ok = bool(np.all(run_min <= gap / (n[1:] * epsilon) + 1e-8))

    if dh.size > 1 and dh.max() > 0:
        vanishing = bool(dh[-1] <= vanish_rtol * dh.max() or dh[-1] <= 1e-12)
    else:
        vanishing = True
    return DescentReport(monotone, first_bad, summable, min_ok, vanishing, partial, psi_min)


def criticality_residual(problem, config, x):
    """Fixed-point residual ``||x - T(x)|| / (1 + ||x||)`` of the plain step."""
    x = np.asarray(x, dtype=np.float64)
    return _norm(x - ibpdca_step(problem, config, x, x)) / (1.0 + _norm(x))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_trace_csv(trace, path):
    """Write a trace as CSV with 17 significant digits per float."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([_fmt(r.k), _fmt(r.beta_accepted), _fmt(r.psi), _fmt(r.lyapunov),
                        _fmt(r.dh_prev_cur), _fmt(r.dh_cur_y), _fmt(r.rel_change),
                        _fmt(bool(r.fallback_y))])


def read_trace_csv(path):
    """Inverse of :func:`write_trace_csv`."""
    out = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = tuple(next(rows))
        if header != TRACE_HEADER:
            raise InvalidInputError(f"{path}: unexpected header {header}")
        for line, row in enumerate(rows, start=2):
            if len(row) != len(TRACE_HEADER):
                raise InvalidInputError(f"{path}:{line}: expected {len(TRACE_HEADER)} fields")
            opt = [float(v) if v != "" else None for v in row[2:4]]
            out.append(IterationRecord(int(row[0]), float(row[1]), opt[0], opt[1],
                                       float(row[4]), float(row[5]), float(row[6]),
                                       row[7] == "1"))
    return out
