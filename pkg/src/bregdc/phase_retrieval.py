r"""Coded-diffraction-pattern phase retrieval as a DC program.

Measurements are :math:`d = |Kx|^2 + \omega` with
:math:`(Kx)[r] = \mathcal{F}(M_r \odot x)` for unit-modulus masks
:math:`M_1, \dots, M_m` and the orthonormal 2-D FFT. The intensity loss
:math:`\tfrac14\||Kx|^2 - d\|^2` splits into the convex pair

.. math::
    f_1(x) = \tfrac14\||Kx|^2\|^2 + \tfrac14\|d\|^2, \qquad
    f_2(x) = \tfrac12\langle d, |Kx|^2\rangle,

and :math:`f_1` is smooth adaptable to the quartic kernel with constant
:math:`3\sum_r\|K_r\|^2` (``3 m`` for unit-modulus masks).

The unknown image is real; operator outputs have shape ``(m, H, W)``.
"""

import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, InvalidInputError, NumericalError
from .kernels import QuarticKernel
from .priors import Denoiser
from .solver import DCProblem

__all__ = [
    "CDPOperator",
    "NoNoise",
    "GaussianSNR",
    "ShotNoise",
    "PRMeasurement",
    "random_masks",
    "cdp_forward",
    "cdp_adjoint",
    "simulate_pr",
    "realized_snr",
    "pr_f1",
    "pr_f1_grad",
    "pr_f2",
    "pr_f2_subgrad",
    "pr_f1_hess_action",
    "pr_objective",
    "pr_smad_bound",
    "build_pr_problem",
    "spectral_init",
    "align_global_sign",
    "write_masks",
    "read_masks",
]

MASK_MAGIC = b"CDPM"


class CDPOperator:
    """Masked orthonormal FFT, stacked over masks.

    Parameters
    ----------
    masks : array_like, shape (m, H, W)
        Complex modulation patterns; every entry must have modulus one.
    use_fft : bool, optional
        With ``False`` the Fourier transform is replaced by the identity. This
        exists only to obtain closed-form gradients in tests.
    """

    def __init__(self, masks, use_fft=True):
        masks = np.asarray(masks, dtype=np.complex128)
        if masks.ndim == 2:
            masks = masks[None]
        if masks.ndim != 3 or masks.shape[0] < 1:
            raise InvalidInputError(f"masks must have shape (m, H, W), got {masks.shape}")
        if not np.all(np.abs(np.abs(masks) - 1.0) <= 1e-12):
            raise InvalidInputError("mask entries must have unit modulus")
        self.masks = masks
        self.masks.flags.writeable = False
        self.use_fft = use_fft

    @classmethod
    def identity_surrogate(cls, shape):
        """Single all-ones mask with ``F = I``."""
        return cls(np.ones((1,) + tuple(shape)), use_fft=False)

    @property
    def m(self):
        return self.masks.shape[0]

    @property
    def image_shape(self):
        return self.masks.shape[1:]

    @property
    def output_shape(self):
        return self.masks.shape

    def _check_image(self, x):
        x = np.asarray(x)
        if x.shape != self.image_shape:
            raise InvalidInputError(f"expected image of shape {self.image_shape}, got {x.shape}")
        return x

    def forward(self, x):
        x = self._check_image(x)
        z = self.masks * x
        if self.use_fft:
            z = np.fft.fft2(z, norm="ortho")
        return z

    def adjoint(self, z):
        """Real part of ``sum_r conj(M_r) * IFFT(z_r)``."""
        z = np.asarray(z, dtype=np.complex128)
        if z.shape != self.output_shape:
            if z.size == self.masks.size:
                z = z.reshape(self.output_shape)
            else:
                raise InvalidInputError(
                    f"expected {self.masks.size} measurement entries, got {z.size}")
        if self.use_fft:
            z = np.fft.ifft2(z, norm="ortho")
        return np.sum(np.conj(self.masks) * z, axis=0).real

    def mask_norm_sq(self, r, max_iter=500, tol=1e-10):
        """``||K_r||^2`` by power iteration on ``K_r^dagger K_r`` over real images."""
        mask = self.masks[r]
        v = np.random.default_rng(r).standard_normal(self.image_shape)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            z = mask * v
            if self.use_fft:
                z = np.fft.ifft2(np.fft.fft2(z, norm="ortho"), norm="ortho")
            w = (np.conj(mask) * z).real
            new = float(np.linalg.norm(w))
            if new == 0.0:
                return 0.0
            v = w / new
            if abs(new - est) <= tol * new:
                return new
            est = new
        raise NumericalError(f"power iteration for mask {r} did not converge")


def random_masks(m, shape, seed=None):
    """``m`` masks with entries drawn uniformly from ``{1, -1, 1j, -1j}``."""
    rng = np.random.default_rng(seed)
    alphabet = np.array([1, -1, 1j, -1j], dtype=np.complex128)
    return alphabet[rng.integers(0, 4, size=(m,) + tuple(shape))]


def cdp_forward(K, x):
    return K.forward(x)


def cdp_adjoint(K, z):
    return K.adjoint(z)


@dataclass(frozen=True)
class NoNoise:
    pass


@dataclass(frozen=True)
class GaussianSNR:
    """Additive white Gaussian noise rescaled to an exact SNR in dB."""

    snr_db: float

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise InvalidInputError("snr_db must be finite")


@dataclass(frozen=True)
class ShotNoise:
    """Gaussian surrogate of shot noise, ``omega_i ~ N(0, alpha^2 |Kx|_i^2)``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidInputError("alpha must be positive")


NoiseSpec = Union[NoNoise, GaussianSNR, ShotNoise]


@dataclass
class PRMeasurement:
    d: np.ndarray
    operator: CDPOperator

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.float64)
        if self.d.size != self.operator.masks.size:
            raise InvalidInputError(
                f"measurement has {self.d.size} entries, operator produces {self.operator.masks.size}")
        self.d = self.d.reshape(self.operator.output_shape)


def realized_snr(clean, d):
    """``10 log10(||clean||^2 / ||clean - d||^2)`` in dB."""
    clean = np.asarray(clean)
    err = float(np.sum((clean - np.asarray(d).reshape(clean.shape)) ** 2))
    if err == 0.0:
        return float("inf")
    return 10.0 * np.log10(float(np.sum(clean ** 2)) / err)


def simulate_pr(K, x, noise=NoNoise(), seed=None):
    """Draw ``d = |Kx|^2 + omega`` for the given noise model."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x contains non-finite entries")
    clean = np.abs(K.forward(x)) ** 2
    rng = np.random.default_rng(seed)
    if isinstance(noise, NoNoise) or noise is None:
        d = clean
    elif isinstance(noise, GaussianSNR):
        w = rng.standard_normal(clean.shape)
        target = np.linalg.norm(clean) / 10.0 ** (noise.snr_db / 20.0)
        d = clean + w * (target / np.linalg.norm(w))
    elif isinstance(noise, ShotNoise):
        d = clean + noise.alpha * np.sqrt(clean) * rng.standard_normal(clean.shape)
    else:
        raise InvalidInputError(f"unknown noise spec {noise!r}")
    return PRMeasurement(d=d, operator=K)


def _d(meas):
    return meas.d if isinstance(meas, PRMeasurement) else np.asarray(meas, dtype=np.float64)


def pr_f1(K, meas, x):
    a = np.abs(K.forward(x)) ** 2
    d = _d(meas)
    return 0.25 * float(np.sum(a * a)) + 0.25 * float(np.sum(d * d))


def pr_f1_grad(K, meas, x):
    """``Re K^dagger[Kx * |Kx|^2]``."""
    z = K.forward(x)
    return K.adjoint(z * (np.abs(z) ** 2))


def pr_f2(K, meas, x):
    return 0.5 * float(np.sum(_d(meas).reshape(K.output_shape) * np.abs(K.forward(x)) ** 2))


def pr_f2_subgrad(K, meas, x):
    """``Re K^dagger[Kx * d]``."""
    return K.adjoint(K.forward(x) * _d(meas).reshape(K.output_shape))


def pr_f1_hess_action(K, x, u, step=1e-4):
    """Directional central difference of ``grad f1`` along ``u``."""
    return (pr_f1_grad(K, None, x + step * u) - pr_f1_grad(K, None, x - step * u)) / (2 * step)


def pr_objective(K, meas, x):
    """``0.25 || |Kx|^2 - d ||^2``."""
    r = np.abs(K.forward(x)) ** 2 - _d(meas).reshape(K.output_shape)
    return 0.25 * float(np.sum(r * r))


def pr_smad_bound(K):
    """``3 sum_r ||K_r||^2``."""
    return 3.0 * sum(K.mask_norm_sq(r) for r in range(K.m))


def build_pr_problem(K, meas, prior=None, lam=None, delta=0.51, epsilon=0.01):
    """DC problem with the quartic kernel.

    ``prior`` is ``None`` (no regulariser) or a :class:`Denoiser`, which is
    applied after the mirror step. Raises :class:`ConfigurationError` unless
    ``1/lam > max(delta + eta, 3 sum ||K_r||^2)``.
    """
    if lam is None or not lam > 0:
        raise ConfigurationError("a positive step size lam is required")
    L = pr_smad_bound(K)
    kernel = QuarticKernel()
    if prior is None:
        eta = 0.0
        kw = {}
    elif isinstance(prior, Denoiser):
        eta = prior.lipschitz_bound / (1.0 + prior.lipschitz_bound) * kernel.kappa / lam
        kw = {"denoiser": prior}
    else:
        raise InvalidInputError(f"unsupported prior type {type(prior).__name__}")
    lower = max(delta + eta / kernel.kappa, L)
    if not 1.0 / lam > lower:
        raise ConfigurationError(
            f"1/lam = {1.0 / lam:.6g} must exceed max(delta + eta/kappa, 3 sum ||K_r||^2) "
            f"= {lower:.6g}; need lam < {1.0 / lower:.6g}")
    return DCProblem(
        f1_value=lambda x: pr_f1(K, meas, x),
        f1_grad=lambda x: pr_f1_grad(K, meas, x),
        f2_value=lambda x: pr_f2(K, meas, x),
        f2_subgrad=lambda x: pr_f2_subgrad(K, meas, x),
        kernel=kernel,
        weak_convexity_eta=eta,
        smad_L=L,
        **kw,
    )


def spectral_init(K, meas, n_iter=100, seed=0):
    """Leading eigenvector of ``x -> Re K^dagger[d * Kx]``, scaled to the data energy.

    For unit-modulus masks ``sum |Kx|^2 = m ||x||^2``, which fixes the scale.
    """
    d = _d(meas).reshape(K.output_shape)
    v = np.random.default_rng(seed).standard_normal(K.image_shape)
    v /= np.linalg.norm(v)
    for _ in range(n_iter):
        w = K.adjoint(K.forward(v) * d)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    scale = np.sqrt(max(float(np.sum(d)), 0.0) / K.m)
    return scale * v


def align_global_sign(x_est, x_ref):
    """Return ``x_est`` or ``-x_est``, whichever correlates better with ``x_ref``.

    Ties keep ``x_est``.
    """
    x_est = np.asarray(x_est, dtype=np.float64)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if x_est.shape != x_ref.shape:
        raise InvalidInputError(f"shape mismatch: {x_est.shape} vs {x_ref.shape}")
    return -x_est if float(np.vdot(x_est, x_ref)) < 0 else x_est.copy()


def write_masks(masks, path):
    """Binary mask file: ``CDPM``, u32 m, H, W, then (re, im) little-endian f64 pairs."""
    masks = np.asarray(masks, dtype=np.complex128)
    if masks.ndim == 2:
        masks = masks[None]
    m, H, W = masks.shape
    with open(path, "wb") as fh:
        fh.write(MASK_MAGIC)
        fh.write(struct.pack("<III", m, H, W))
        fh.write(masks.astype("<c16").tobytes())


def read_masks(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MASK_MAGIC:
        raise InvalidInputError(f"{path}: not a CDPM mask file")
    if len(raw) < 16:
        raise InvalidInputError(f"{path}: truncated header")
    m, H, W = struct.unpack("<III", raw[4:16])
    body = raw[16:]
    if len(body) != 16 * m * H * W:
        raise InvalidInputError(f"{path}: expected {16 * m * H * W} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<c16").reshape(m, H, W).astype(np.complex128)
