r"""Weakly convex priors and gradient-step denoisers.

A gradient-step denoiser is built from a smoother :math:`N_\gamma` through

.. math::
    g_\gamma(x) = \tfrac12 \|x - N_\gamma(x)\|^2, \qquad
    \mathcal{D}_\gamma = I - \nabla g_\gamma .

When :math:`\nabla g_\gamma` is :math:`L`-Lipschitz with :math:`L < 1`,
:math:`\mathcal{D}_\gamma` is the Bregman proximal map of an implicit prior
that is :math:`\kappa L/(1+L)`-weakly convex, which is what the convergence
theory of the plug-and-play solver needs.

The built-in smoother is linear, symmetric and stencil based (reflect
boundary). Trained networks plug in through :class:`Denoiser` with a
user-supplied gradient callback.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .errors import ContractViolationError, InvalidInputError, UnsupportedError

__all__ = [
    "Denoiser",
    "LinearSmoother",
    "WeaklyConvexPrior",
    "gs_potential",
    "gs_denoise",
    "weak_convexity_modulus",
    "estimate_lipschitz",
    "prox_l1",
    "l1_prior",
    "mcp_prior",
    "binomial_stencil",
    "smoother_denoiser",
    "load_linear_smoother",
    "parse_stencil",
    "write_stencil",
]


class LinearSmoother:
    """Correlation with a small symmetric stencil under reflect boundary.

    The stencil must have odd sides and be symmetric under both axis flips;
    with half-sample reflection this makes the operator self-adjoint (it is
    diagonalised by the 2-D DCT-II).
    """

    def __init__(self, stencil):
        w = np.array(stencil, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise InvalidInputError(f"stencil must be 2-D with odd sides, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("stencil has non-finite coefficients")
        if not (np.array_equal(w, w[::-1, :]) and np.array_equal(w, w[:, ::-1])):
            raise ContractViolationError("stencil must be symmetric under both axis flips")
        self.stencil = w
        self.stencil.flags.writeable = False

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidInputError(f"smoother expects a 2-D image, got shape {x.shape}")
        return ndimage.correlate(x, self.stencil, mode="reflect")

    def residual(self, x):
        """``(I - N) x``."""
        return np.asarray(x, dtype=np.float64) - self(x)

    def potential_grad(self, x):
        """``(I - N)^T (I - N) x``; ``N`` is symmetric so this is ``(I - N)^2 x``."""
        return self.residual(self.residual(x))

    def operator_norm_sq(self, shape=(64, 64), max_iter=100, tol=1e-10):
        """Largest eigenvalue of ``(I - N)^T (I - N)`` on a grid of ``shape``.

        Power iteration from a checkerboard-weighted start vector, which has
        a large component on the highest DCT frequencies where smoothers have
        their largest residual.
        """
        rng = np.random.default_rng(0)
        ii, jj = np.indices(shape)
        v = (-1.0) ** (ii + jj) + 0.1 * rng.standard_normal(shape)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            w = self.potential_grad(v)
            new = float(np.linalg.norm(w))
            if new == 0.0:
                return 0.0
            v = w / new
            if abs(new - est) <= tol * max(new, 1.0):
                est = new
                break
            est = new
        return est


@dataclass(frozen=True)
class Denoiser:
    """Gradient-step denoiser ``x - grad g(x)``.

    Parameters
    ----------
    n_gamma : callable
        The smoother ``N``.
    lipschitz_bound : float
        Declared Lipschitz constant of ``grad g``; must be below one.
    gamma : float
        Noise-strength label, informational.
    potential_grad : callable, optional
        ``grad g``. Required for :meth:`denoise`.
    """

    n_gamma: Callable
    lipschitz_bound: float
    gamma: float = 0.0
    potential_grad: Optional[Callable] = None

    def __post_init__(self):
        if not 0.0 <= self.lipschitz_bound < 1.0:
            raise ContractViolationError(
                f"Lipschitz bound of grad g must lie in [0, 1), got {self.lipschitz_bound}")

    def potential(self, x):
        r = np.asarray(x, dtype=np.float64) - np.asarray(self.n_gamma(x), dtype=np.float64)
        return 0.5 * float(np.vdot(r, r))

    def grad(self, x):
        if self.potential_grad is None:
            raise UnsupportedError("denoiser has no gradient callback for g")
        return np.asarray(self.potential_grad(x), dtype=np.float64)

    def denoise(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x - self.grad(x)

    __call__ = denoise


def gs_potential(d, x):
    """``g(x) = 0.5 ||x - N(x)||^2``."""
    return d.potential(x)


def gs_denoise(d, x):
    """``x - grad g(x)``."""
    return d.denoise(x)


def weak_convexity_modulus(d, kappa=1.0):
    """Weak-convexity modulus ``kappa L / (1 + L)`` of the implicit prior.

    ``d`` is a :class:`Denoiser` or a bare Lipschitz constant.
    """
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be positive, got {kappa}")
    L = d.lipschitz_bound if isinstance(d, Denoiser) else float(d)
    return kappa * L / (1.0 + L)


def estimate_lipschitz(d, n_pairs=200, seed=0, shape=(16, 16), radius=1.0):
    """Largest observed ``||grad g(x) - grad g(y)|| / ||x - y||`` over sampled pairs.

    Pairs share a random base point ``x``; the first offset is random and each
    following offset is the normalised gradient difference of the previous
    pair. For a linear gradient this is power iteration, so the estimate
    approaches the true constant from below; for nonlinear denoisers it
    steers sampling toward the steepest directions. Deterministic in ``seed``.
    """
    if n_pairs < 1:
        raise InvalidInputError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    x = 128.0 + 32.0 * rng.standard_normal(shape)
    gx = d.grad(x)
    u = rng.standard_normal(shape)
    best = 0.0
    for _ in range(n_pairs):
        u *= radius / np.linalg.norm(u)
        diff = d.grad(x + u) - gx
        nd = float(np.linalg.norm(diff))
        best = max(best, nd / radius)
        if nd == 0.0:
            u = rng.standard_normal(shape)
        else:
            u = diff
    return best


def binomial_stencil(strength):
    """``(1 - s) * identity + s * binomial3x3`` with ``s`` in ``[0, 1)``.

    The DCT symbol of ``I - N`` is ``s (1 - b)`` with ``b`` in ``[0, 1]``, so
    ``||I - N|| <= s`` and the gradient-step Lipschitz constant is ``s**2``.
    """
    if not 0.0 <= strength < 1.0:
        raise InvalidInputError(f"strength must lie in [0, 1), got {strength}")
    b = np.array([1.0, 2.0, 1.0]) / 4.0
    w = strength * np.outer(b, b)
    w[1, 1] += 1.0 - strength
    return w


def smoother_denoiser(stencil, gamma=0.0, check_shape=(64, 64)):
    """Denoiser from a stencil, with the Lipschitz bound found by power iteration.

    Raises
    ------
    ContractViolationError
        If ``||(I - N)^T (I - N)|| >= 1``.
    """
    sm = LinearSmoother(stencil)
    L = sm.operator_norm_sq(check_shape)
    if not L < 1.0:
        raise ContractViolationError(
            f"||(I-N)^T(I-N)|| = {L:.6g} >= 1; stencil is not an admissible denoiser")
    return Denoiser(n_gamma=sm, lipschitz_bound=L, gamma=gamma, potential_grad=sm.potential_grad)


def parse_stencil(text, source="<string>"):
    """Parse the plain-text stencil format.

    First non-comment line ``H W`` (odd positive integers), then ``H`` rows of
    ``W`` numbers. Lines starting with ``#`` are ignored.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise InvalidInputError(f"{source}: empty stencil file")
    lineno, head = rows[0]
    try:
        H, W = (int(t) for t in head)
    except ValueError:
        raise InvalidInputError(f"{source}:{lineno}: expected 'H W' header, got {' '.join(head)!r}")
    if H <= 0 or W <= 0 or H % 2 == 0 or W % 2 == 0:
        raise InvalidInputError(f"{source}:{lineno}: H and W must be odd positive integers")
    body = rows[1:]
    if len(body) != H:
        raise InvalidInputError(f"{source}: expected {H} coefficient rows, found {len(body)}")
    out = np.empty((H, W))
    for i, (lineno, toks) in enumerate(body):
        if len(toks) != W:
            raise InvalidInputError(f"{source}:{lineno}: expected {W} coefficients, got {len(toks)}")
        try:
            out[i] = [float(t) for t in toks]
        except ValueError:
            raise InvalidInputError(f"{source}:{lineno}: non-numeric coefficient")
    return out


def write_stencil(stencil, path, comment=None):
    w = np.asarray(stencil, dtype=np.float64)
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"{w.shape[0]} {w.shape[1]}\n")
        for row in w:
            fh.write(" ".join("%.17g" % v for v in row) + "\n")


def load_linear_smoother(path, gamma=0.0):
    """Read a stencil file and wrap it as an admissible :class:`Denoiser`."""
    with open(path) as fh:
        text = fh.read()
    return smoother_denoiser(parse_stencil(text, str(path)), gamma=gamma)


def prox_l1(thresh, y):
    """Soft thresholding ``sign(y) max(|y| - thresh, 0)``."""
    if thresh < 0:
        raise InvalidInputError("threshold must be >= 0")
    y = np.asarray(y, dtype=np.float64)
    return np.sign(y) * np.maximum(np.abs(y) - thresh, 0.0)


@dataclass(frozen=True)
class WeaklyConvexPrior:
    """A prior with value, Euclidean proximal map and weak-convexity modulus.

    ``prox_euclidean(lam, y)`` minimises ``value(x) + ||x - y||^2 / (2 lam)``.
    """

    value: Callable
    prox_euclidean: Callable
    eta: float = 0.0
    name: str = "prior"

    def __post_init__(self):
        if self.eta < 0:
            raise ContractViolationError("eta must be >= 0")

    def scaled(self, mu):
        """The prior ``mu * value``."""
        if mu < 0:
            raise InvalidInputError("mu must be >= 0")
        return WeaklyConvexPrior(
            value=lambda x: mu * self.value(x),
            prox_euclidean=lambda lam, y: self.prox_euclidean(lam * mu, y),
            eta=mu * self.eta,
            name=f"{mu:g}*{self.name}",
        )


def l1_prior(mu=1.0):
    """``mu ||x||_1`` (convex, ``eta = 0``)."""
    return WeaklyConvexPrior(
        value=lambda x: mu * float(np.sum(np.abs(x))),
        prox_euclidean=lambda lam, y: prox_l1(lam * mu, y),
        eta=0.0,
        name="l1",
    )


def mcp_prior(mu, theta):
    """Minimax concave penalty, ``1/theta``-weakly convex.

    ``phi(t) = mu |t| - t^2/(2 theta)`` for ``|t| <= theta mu`` and
    ``theta mu^2 / 2`` beyond. The proximal map (firm thresholding) is
    single valued for steps ``lam < theta``.
    """
    if mu < 0 or not theta > 0:
        raise InvalidInputError("need mu >= 0 and theta > 0")

    def value(x):
        a = np.abs(np.asarray(x, dtype=np.float64))
        inner = mu * a - a * a / (2.0 * theta)
        return float(np.sum(np.where(a <= theta * mu, inner, 0.5 * theta * mu * mu)))

    def prox(lam, y):
        if not lam < theta:
            raise InvalidInputError(f"MCP prox needs lam < theta ({lam} >= {theta})")
        y = np.asarray(y, dtype=np.float64)
        a = np.abs(y)
        mid = np.sign(y) * (a - lam * mu) / (1.0 - lam / theta)
        return np.where(a <= lam * mu, 0.0, np.where(a <= theta * mu, mid, y))

    return WeaklyConvexPrior(value=value, prox_euclidean=prox, eta=1.0 / theta, name="mcp")
