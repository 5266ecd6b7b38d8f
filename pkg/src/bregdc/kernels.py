r"""Legendre kernels, Bregman distances and smooth-adaptability estimates.

A kernel :math:`h` induces the Bregman distance

.. math::
    D_h(x, y) = h(x) - h(y) - \langle \nabla h(y), x - y \rangle,

which replaces the squared Euclidean distance in the proximal steps of the
solvers. Two kernels are built in:

* :class:`EuclideanKernel`, :math:`h(x) = \tfrac12 \|x\|^2`;
* :class:`QuarticKernel`, :math:`h(x) = \tfrac14 \|x\|^4 + \tfrac12 \|x\|^2`,
  adapted to functions with quartic growth such as the intensity-based
  phase retrieval loss.

Arrays of any shape are accepted; inner products and norms are taken over
all entries.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolationError, InvalidInputError, NumericalError

__all__ = [
    "Kernel",
    "EuclideanKernel",
    "QuarticKernel",
    "CustomKernel",
    "SmadBound",
    "kernel_value",
    "kernel_grad",
    "kernel_grad_conj",
    "bregman_distance",
    "three_point_residual",
    "estimate_smad_bound",
    "solve_quartic_scale",
]


def _as_point(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {y.shape}")


def _dot(a, b):
    return float(np.vdot(a.ravel(), b.ravel()).real)


class Kernel:
    """Interface of a Legendre kernel.

    Subclasses provide ``value``, ``grad``, ``grad_conj`` and ``hess_action``
    and set the strong-convexity modulus ``kappa``.
    """

    name = "kernel"
    kappa = 1.0

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def grad_conj(self, z):
        raise NotImplementedError

    def hess_action(self, x, u):
        raise NotImplementedError

    def in_domain(self, x):
        """Membership in the interior of ``dom h``."""
        return bool(np.all(np.isfinite(x)))

    def distance(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return self.value(x) - self.value(y) - _dot(self.grad(y), x - y)

    def __repr__(self):
        return f"{type(self).__name__}(kappa={self.kappa})"


class EuclideanKernel(Kernel):
    """:math:`h(x) = \\tfrac12\\|x\\|^2`; the Bregman distance is half the squared norm."""

    name = "euclidean"
    kappa = 1.0

    def value(self, x):
        return 0.5 * _dot(x, x)

    def grad(self, x):
        return np.array(x, dtype=np.float64, copy=True)

    def grad_conj(self, z):
        return np.array(z, dtype=np.float64, copy=True)

    def hess_action(self, x, u):
        return np.array(u, dtype=np.float64, copy=True)

    def distance(self, x, y):
        d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
        return 0.5 * _dot(d, d)


def solve_quartic_scale(s, tol=1e-14, max_iter=100):
    """Positive root of ``s t**3 + t - 1 = 0`` for ``s = ||z||**2 >= 0``.

    ``tol`` bounds the Newton step relative to ``t``; the root behaves like
    ``s**(-1/3)`` for large ``s``, so an absolute test would lose accuracy.

    Safeguarded Newton iteration on the bracket ``(0, min(1, s**(-1/3))]``.
    The cubic is increasing and convex on ``t > 0`` so Newton started at the
    right end of the bracket decreases monotonically to the root; bisection
    only kicks in if rounding pushes a step outside the bracket.
    """
    if s < 0 or not np.isfinite(s):
        raise InvalidInputError(f"squared norm must be finite and >= 0, got {s}")
    if s == 0.0:
        return 1.0
    lo, hi = 0.0, min(1.0, s ** (-1.0 / 3.0))
    t = hi
    for _ in range(max_iter):
        p = s * t ** 3 + t - 1.0
        if p == 0.0:
            return t
        if p > 0:
            hi = t
        else:
            lo = t
        t_new = t - p / (3.0 * s * t * t + 1.0)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= tol * t_new:
            return t_new
        t = t_new
    raise NumericalError(f"cubic solve did not converge for ||z||^2 = {s:g}")


class QuarticKernel(Kernel):
    r""":math:`h(x) = \tfrac14\|x\|^4 + \tfrac12\|x\|^2`.

    Its gradient :math:`(\|x\|^2 + 1)x` is inverted by scaling:
    :math:`\nabla h^*(z) = t^* z` with :math:`t^*` the positive root of
    :math:`t^3\|z\|^2 + t - 1 = 0`.
    """

    name = "quartic"
    kappa = 1.0

    def value(self, x):
        s = _dot(x, x)
        return 0.25 * s * s + 0.5 * s

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (_dot(x, x) + 1.0) * x

    def grad_conj(self, z):
        z = np.asarray(z, dtype=np.float64)
        return solve_quartic_scale(_dot(z, z)) * z

    def hess_action(self, x, u):
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        return (_dot(x, x) + 1.0) * u + 2.0 * _dot(x, u) * x

    def distance(self, x, y):
        # Expanded form 1/4(|x|^2-|y|^2)^2 + 1/2(|y|^2+1)|x-y|^2, free of
        # the cancellation in the textbook definition.
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        d = x - y
        a, b = _dot(x, x), _dot(y, y)
        return 0.25 * (a - b) ** 2 + 0.5 * (b + 1.0) * _dot(d, d)


class CustomKernel(Kernel):
    """Kernel assembled from user callbacks.

    Legendre type is the caller's responsibility; only the conjugate
    roundtrip is spot-checked at construction.
    """

    name = "custom"

    def __init__(self, value, grad, grad_conj, kappa, hess_action=None,
                 in_domain=None, probe=None):
        if not kappa > 0:
            raise ContractViolationError(f"kappa must be positive, got {kappa}")
        self._value = value
        self._grad = grad
        self._grad_conj = grad_conj
        self._hess = hess_action
        self._in_domain = in_domain
        self.kappa = float(kappa)
        if probe is not None:
            z = _as_point(probe, "probe")
            back = np.asarray(self._grad(self._grad_conj(z)), dtype=np.float64)
            err = np.linalg.norm(back - z)
            if err > 1e-8 * (1.0 + np.linalg.norm(z)):
                raise ContractViolationError(
                    f"grad(grad_conj(z)) != z on probe (error {err:.3e})")

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=np.float64)

    def grad_conj(self, z):
        return np.asarray(self._grad_conj(z), dtype=np.float64)

    def hess_action(self, x, u):
        if self._hess is None:
            # central difference of the gradient along u
            eps = 1e-6 * (1.0 + np.linalg.norm(x)) / max(np.linalg.norm(u), 1e-300)
            return (self.grad(x + eps * u) - self.grad(x - eps * u)) / (2 * eps)
        return np.asarray(self._hess(x, u), dtype=np.float64)

    def in_domain(self, x):
        if self._in_domain is None:
            return super().in_domain(x)
        return bool(self._in_domain(x))


def kernel_value(h, x):
    return h.value(_as_point(x))


def kernel_grad(h, x):
    return h.grad(_as_point(x))


def kernel_grad_conj(h, z):
    return h.grad_conj(_as_point(z, "z"))


def bregman_distance(h, x, y):
    """Bregman distance ``D_h(x, y)``, clipped at zero against rounding."""
    x = _as_point(x)
    y = _as_point(y, "y")
    _check_same_shape(x, y)
    return max(h.distance(x, y), 0.0)


def three_point_residual(h, x, y, z):
    """Absolute defect of the three-point identity.

    Returns ``|D(x,z) - D(x,y) - D(y,z) - <grad h(y) - grad h(z), x - y>|``,
    which vanishes up to rounding for any differentiable kernel.
    """
    x, y, z = _as_point(x), _as_point(y, "y"), _as_point(z, "z")
    _check_same_shape(x, y)
    _check_same_shape(y, z)
    lhs = h.distance(x, z) - h.distance(x, y) - h.distance(y, z)
    rhs = _dot(h.grad(y) - h.grad(z), x - y)
    return abs(lhs - rhs)


@dataclass(frozen=True)
class SmadBound:
    """Empirical smooth-adaptability constant.

    ``L`` is the largest sampled ratio ``<u, H_f u> / <u, H_h u>``, a lower
    estimate of the tightest constant making ``L h - f`` convex.
    """

    L: float
    kernel: Kernel
    function: Optional[Callable] = None
    n_samples: int = 0


def estimate_smad_bound(f1_hessian_action, h, sample_points, sample_dirs):
    """Sample the curvature ratio of ``f1`` against the kernel ``h``.

    Parameters
    ----------
    f1_hessian_action : callable
        ``(x, u) -> Hess f1(x) @ u``.
    h : Kernel
        Reference kernel; must be strongly convex.
    sample_points, sample_dirs : sequence of arrays
        Paired points ``x`` and directions ``u``.

    Returns
    -------
    SmadBound
    """
    pts = list(sample_points)
    dirs = list(sample_dirs)
    if not pts or len(pts) != len(dirs):
        raise InvalidInputError("need equally many (>= 1) points and directions")
    best = 0.0
    for x, u in zip(pts, dirs):
        x = _as_point(x)
        u = _as_point(u, "u")
        num = _dot(u, np.asarray(f1_hessian_action(x, u), dtype=np.float64))
        den = _dot(u, h.hess_action(x, u))
        if not np.isfinite(num):
            raise InvalidInputError("Hessian action returned non-finite values")
        if not den > 0:
            raise ContractViolationError(
                f"kernel curvature <u, Hess h u> = {den:g} is not positive")
        best = max(best, num / den)
    return SmadBound(L=best, kernel=h, function=f1_hessian_action, n_samples=len(pts))
