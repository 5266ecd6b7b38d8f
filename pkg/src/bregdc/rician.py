r"""Rician noise removal as a DC program.

Magnitude data :math:`b = \sqrt{(Ax + \eta_1)^2 + \eta_2^2}` with independent
Gaussian :math:`\eta_1, \eta_2 \sim N(0, \sigma^2)` lead to the MAP objective

.. math::
    F(x) = \frac{1}{2\sigma^2}\|Ax\|^2
           - \Bigl\langle \log I_0\!\Bigl(\frac{b\,Ax}{\sigma^2}\Bigr), 1\Bigr\rangle
           + \mu\,\phi(x),

split as :math:`f_1 = \|Ax\|^2/(2\sigma^2)` and :math:`f_2 = \langle\log I_0(\cdot), 1\rangle`,
both convex. With the Euclidean kernel each iteration is a proximal (or
denoising) step at :math:`y - \tfrac{\lambda}{\sigma^2}A^\top A y + \lambda\xi`.

Intensities follow the 8-bit convention (``[0, 255]``); the tabulated noise
levels ``2.55 ... 25.5`` are 1% to 10% of full scale.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import ConfigurationError, InvalidInputError
from .kernels import EuclideanKernel
from .priors import Denoiser, WeaklyConvexPrior
from .solver import DCProblem

__all__ = [
    "RicianModel",
    "RicianSchedule",
    "SCHEDULE_TABLE",
    "simulate_rician",
    "bessel_ratio",
    "log_i0",
    "rician_f1",
    "rician_f1_grad",
    "rician_f2",
    "rician_f2_subgrad",
    "rician_objective",
    "rician_schedule",
    "build_rician_problem",
]

# sigma -> (lambda_c, mu)
SCHEDULE_TABLE = {
    2.55: (0.0385, 1.9),
    7.65: (0.102, 1.6),
    12.75: (0.1462, 1.3),
    25.5: (0.7312, 1.3),
}


def _identity(x):
    return np.asarray(x, dtype=np.float64)


@dataclass
class RicianModel:
    """Noise level, forward operator and magnitude data.

    ``a_op`` / ``a_adj`` default to the identity. A custom pair is probed for
    adjoint consistency at construction.
    """

    sigma: float
    b: np.ndarray
    a_op: Callable = field(default=_identity)
    a_adj: Callable = field(default=_identity)
    a_norm_sq: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be positive, got {self.sigma}")
        self.b = np.asarray(self.b, dtype=np.float64)
        if not np.all(np.isfinite(self.b)) or np.any(self.b < 0):
            raise InvalidInputError("b must be finite and non-negative")
        if self.a_op is _identity and self.a_adj is _identity:
            self.a_norm_sq = 1.0
        else:
            self._check_adjoint()
            if self.a_norm_sq is None:
                self.a_norm_sq = self._power_norm_sq()

    def _check_adjoint(self, n_probe=3):
        rng = np.random.default_rng(12345)
        for _ in range(n_probe):
            x = rng.standard_normal(self.b.shape)
            ax = np.asarray(self.a_op(x))
            y = rng.standard_normal(ax.shape)
            lhs = float(np.vdot(ax, y))
            rhs = float(np.vdot(x, self.a_adj(y)))
            scale = np.linalg.norm(ax) * np.linalg.norm(y) + 1.0
            if abs(lhs - rhs) > 1e-10 * scale:
                raise InvalidInputError(
                    f"a_adj is not the adjoint of a_op: <Ax,y>={lhs:.6g}, <x,A'y>={rhs:.6g}")

    def _power_norm_sq(self, max_iter=500, tol=1e-10):
        v = np.random.default_rng(0).standard_normal(self.b.shape)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            w = self.a_adj(self.a_op(v))
            new = float(np.linalg.norm(w))
            if new == 0.0:
                return 0.0
            v = w / new
            if abs(new - est) <= tol * new:
                return new
            est = new
        return est


def simulate_rician(x, sigma, seed=None, a_op=None):
    """Draw Rician magnitudes ``sqrt((Ax + n1)**2 + n2**2)``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if sigma < 0:
        raise InvalidInputError("sigma must be >= 0")
    ax = np.asarray(x if a_op is None else a_op(x), dtype=np.float64)
    if not np.all(np.isfinite(ax)):
        raise InvalidInputError("A x contains non-finite entries")
    rng = np.random.default_rng(seed)
    n1 = sigma * rng.standard_normal(ax.shape)
    n2 = sigma * rng.standard_normal(ax.shape)
    return np.hypot(ax + n1, n2)


def bessel_ratio(t):
    """``I1(t) / I0(t)`` for ``t >= 0``, computed from exponentially scaled Bessels."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise InvalidInputError("bessel_ratio needs t >= 0")
    out = special.i1e(t) / special.i0e(t)
    return out if out.ndim else float(out)


def _ratio_odd(t):
    # I1/I0 is odd in t
    return np.sign(t) * (special.i1e(np.abs(t)) / special.i0e(np.abs(t)))


def log_i0(t):
    """``log I0(t)`` without overflow: ``|t| + log(i0e(|t|))``."""
    a = np.abs(np.asarray(t, dtype=np.float64))
    return a + np.log(special.i0e(a))


def rician_f1(model, x):
    ax = model.a_op(x)
    return float(np.vdot(ax, ax)) / (2.0 * model.sigma ** 2)


def rician_f1_grad(model, x):
    """``A^T A x / sigma^2``."""
    return np.asarray(model.a_adj(model.a_op(x)), dtype=np.float64) / model.sigma ** 2


def rician_f2(model, x):
    s2 = model.sigma ** 2
    return float(np.sum(log_i0(model.b * model.a_op(x) / s2)))


def rician_f2_subgrad(model, x):
    """``A^T[(b / sigma^2) * I1/I0(b A x / sigma^2)]``."""
    s2 = model.sigma ** 2
    t = model.b * np.asarray(model.a_op(x), dtype=np.float64) / s2
    return np.asarray(model.a_adj(model.b / s2 * _ratio_odd(t)), dtype=np.float64)


def rician_objective(model, x, prior_value=None, mu=1.0):
    """MAP objective ``f1 - f2 + mu * prior_value(x)``."""
    val = rician_f1(model, x) - rician_f2(model, x)
    if prior_value is not None:
        val += mu * float(prior_value(x))
    return val


@dataclass(frozen=True)
class RicianSchedule:
    """Step size and prior weight for a noise level.

    ``lam = min(1/(2 delta), sigma**2) * lambda_c``, ``gamma = sqrt(lam mu)``
    and ``pi_bound = sqrt(lam (delta - epsilon))`` is the largest inertial
    weight allowed by the Euclidean line-search condition.
    """

    sigma: float
    lambda_c: float
    mu: float
    lam: float
    gamma: float
    pi_bound: float
    delta: float
    epsilon: float
    interpolated: bool = False


def rician_schedule(sigma, delta=0.51, epsilon=0.01):
    """Tabulated parameters for ``sigma``; linear interpolation in between.

    Noise levels outside the table are clamped to its end points. The
    ``interpolated`` flag records whether ``sigma`` was off the table.
    """
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    if not (1.0 > delta >= epsilon > 0.0):
        raise ConfigurationError("need 1 > delta >= epsilon > 0")
    keys = sorted(SCHEDULE_TABLE)
    exact = next((k for k in keys if abs(k - sigma) <= 1e-12 * k), None)
    if exact is not None:
        lc, mu = SCHEDULE_TABLE[exact]
    else:
        lcs = [SCHEDULE_TABLE[k][0] for k in keys]
        mus = [SCHEDULE_TABLE[k][1] for k in keys]
        lc = float(np.interp(sigma, keys, lcs))
        mu = float(np.interp(sigma, keys, mus))
    lam = min(1.0 / (2.0 * delta), sigma ** 2) * lc
    return RicianSchedule(
        sigma=float(sigma), lambda_c=lc, mu=mu, lam=lam,
        gamma=float(np.sqrt(lam * mu)),
        pi_bound=float(np.sqrt(lam * (delta - epsilon))),
        delta=delta, epsilon=epsilon, interpolated=exact is None,
    )


def build_rician_problem(model, prior, schedule):
    """Assemble the DC problem with the Euclidean kernel.

    Parameters
    ----------
    model : RicianModel
    prior : WeaklyConvexPrior, Denoiser or None
        A :class:`WeaklyConvexPrior` carries its own weight (for instance
        ``l1_prior(mu)``); a :class:`Denoiser` is plugged in directly with
        ``eta = 1/(2 lam)``. ``schedule.mu`` only sets the denoiser strength
        ``gamma``.
    schedule : RicianSchedule

    Raises
    ------
    ConfigurationError
        If ``1/lam <= max(delta + eta, ||A||^2 / sigma^2)``.
    """
    L = model.a_norm_sq / model.sigma ** 2
    kw = {}
    if isinstance(prior, Denoiser):
        eta = 1.0 / (2.0 * schedule.lam)
        kw["denoiser"] = prior
    elif isinstance(prior, WeaklyConvexPrior):
        eta = prior.eta
        kw["prox"] = prior.prox_euclidean
        kw["g_value"] = prior.value
    elif prior is None:
        eta = 0.0
    else:
        raise InvalidInputError(f"unsupported prior type {type(prior).__name__}")

    lower = max(schedule.delta + eta, L)
    if not 1.0 / schedule.lam > lower:
        raise ConfigurationError(
            f"1/lam = {1.0 / schedule.lam:.6g} must exceed max(delta + eta/kappa, L) = {lower:.6g}")

    return DCProblem(
        f1_value=lambda x: rician_f1(model, x),
        f1_grad=lambda x: rician_f1_grad(model, x),
        f2_value=lambda x: rician_f2(model, x),
        f2_subgrad=lambda x: rician_f2_subgrad(model, x),
        kernel=EuclideanKernel(),
        weak_convexity_eta=eta,
        smad_L=L,
        **kw,
    )
