"""Concrete prox functions and linear operators used by the experiments.

Least-squares data terms (dense with cached Cholesky factors, or operator
form with conjugate-gradient solves), the Huber penalty with an optional
orthogonal transform, an orthonormal multi-level Haar transform, and a small
circular blur operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator, cg

from .core import ProxFunction
from .errors import ShapeMismatch, SingularSystem

__all__ = [
    "LeastSquaresFn",
    "least_squares_prox",
    "estimate_moduli",
    "HuberFn",
    "haar_transform",
    "haar_inverse",
    "HaarTransform",
    "BlurOperator",
    "blur_apply",
    "blur_adjoint",
    "gaussian_kernel",
    "OperatorLeastSquares",
    "gram_norm",
    "gram_smallest_eigenvalue",
    "diagonal_quadratic",
    "zero_function",
]


def estimate_moduli(A: np.ndarray) -> tuple[float, float]:
    """Strong-convexity and cocoercivity moduli of ``x -> ||A x - a||^2 / 2``.

    ``rho`` is the smallest eigenvalue of the Gram matrix (reported as 0 below
    the numerical rank tolerance, e.g. for wide or rank-deficient A) and
    ``alpha`` the reciprocal of the largest.
    """
    A = np.asarray(A, dtype=float)
    w = np.linalg.eigvalsh(A.T @ A)
    lam_max = float(w[-1])
    if lam_max <= 0.0:
        raise ValueError("A must be nonzero")
    rank_tol = lam_max * max(A.shape) * np.finfo(float).eps
    rho = float(w[0]) if w[0] > rank_tol else 0.0
    return rho, 1.0 / lam_max


class LeastSquaresFn:
    """``x -> ||A x - a||^2 / 2`` with prox by cached Cholesky factorizations.

    The prox solves ``(I + gamma A^T A) p = x + gamma A^T a``; the factor is
    cached per distinct ``gamma`` (exact float equality), since each splitting
    scheme uses a fixed handful of step sizes.  The cache is populated on
    first use; pre-populate before sharing across threads.
    """

    def __init__(self, A: np.ndarray, a: Optional[np.ndarray] = None):
        self.A = np.asarray(A, dtype=float)
        n, m = self.A.shape
        self.a = np.zeros(n) if a is None else np.asarray(a, dtype=float)
        if self.a.shape != (n,):
            raise ShapeMismatch(f"offset shape {self.a.shape} != ({n},)")
        self.gram = self.A.T @ self.A
        self.at_a = self.A.T @ self.a
        self.dimension = m
        self.moduli = estimate_moduli(self.A)
        self._factors: dict[float, tuple] = {}

    def _factor(self, gamma: float):
        fac = self._factors.get(gamma)
        if fac is None:
            try:
                fac = scipy.linalg.cho_factor(
                    np.eye(self.dimension) + gamma * self.gram
                )
            except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded
                raise SingularSystem(f"prox system singular at gamma={gamma}") from exc
            self._factors[gamma] = fac
        return fac

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        if not (gamma > 0.0):
            raise ValueError("gamma must be positive")
        return scipy.linalg.cho_solve(self._factor(float(gamma)), x + gamma * self.at_a)

    def value(self, x: np.ndarray) -> float:
        r = self.A @ x - self.a
        return 0.5 * float(np.vdot(r, r))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.A.T @ (self.A @ x - self.a)

    def to_prox_function(self) -> ProxFunction:
        return ProxFunction(
            prox=self.prox,
            dimension=self.dimension,
            regularity=self.moduli,
            value=self.value,
            gradient=self.gradient,
        )


def least_squares_prox(fn: LeastSquaresFn, gamma: float, x: np.ndarray) -> np.ndarray:
    return fn.prox(gamma, x)


# --- Huber penalty ---------------------------------------------------------------


class HuberFn:
    """``x -> scale * sum_i h(w_i)`` with ``w = W x`` for an optional orthogonal W.

    ``h`` is the smoothed absolute value: quadratic of width ``epsilon`` near
    zero, linear outside.  The gradient is Lipschitz with constant
    ``scale/epsilon``, so the cocoercivity modulus is ``epsilon/scale``.
    """

    def __init__(self, epsilon: float, scale: float = 1.0, transform=None):
        if not (epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if not (scale > 0.0):
            raise ValueError("scale must be positive")
        self.epsilon = epsilon
        self.scale = scale
        self.transform = transform

    def _analysis(self, x: np.ndarray) -> np.ndarray:
        return x if self.transform is None else self.transform.forward(x)

    def _synthesis(self, w: np.ndarray) -> np.ndarray:
        return w if self.transform is None else self.transform.inverse(w)

    def value(self, x: np.ndarray) -> float:
        w = np.abs(self._analysis(x))
        eps = self.epsilon
        per = np.where(w > eps, w - eps / 2.0, w * w / (2.0 * eps))
        return self.scale * float(np.sum(per))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        w = self._analysis(x)
        return self.scale * self._synthesis(np.clip(w / self.epsilon, -1.0, 1.0))

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        if not (gamma > 0.0):
            raise ValueError("gamma must be positive")
        w = self._analysis(x)
        weight = gamma * self.scale
        eps = self.epsilon
        shrunk = np.where(
            np.abs(w) <= eps + weight,
            eps * w / (eps + weight),
            w - weight * np.sign(w),
        )
        return self._synthesis(shrunk)

    def to_prox_function(self, shape: tuple[int, ...]) -> ProxFunction:
        return ProxFunction(
            prox=self.prox,
            dimension=int(np.prod(shape)),
            regularity=(0.0, self.epsilon / self.scale),
            value=self.value,
            gradient=self.gradient,
            shape=shape,
        )


# --- orthonormal Haar transform ---------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _haar_step(x: np.ndarray) -> np.ndarray:
    lo = (x[:, 0::2] + x[:, 1::2]) / _SQRT2
    hi = (x[:, 0::2] - x[:, 1::2]) / _SQRT2
    cols = np.hstack([lo, hi])
    lo = (cols[0::2, :] + cols[1::2, :]) / _SQRT2
    hi = (cols[0::2, :] - cols[1::2, :]) / _SQRT2
    return np.vstack([lo, hi])


def _haar_step_inv(c: np.ndarray) -> np.ndarray:
    h = c.shape[0] // 2
    lo, hi = c[:h, :], c[h:, :]
    rows = np.empty_like(c)
    rows[0::2, :] = (lo + hi) / _SQRT2
    rows[1::2, :] = (lo - hi) / _SQRT2
    w = c.shape[1] // 2
    lo, hi = rows[:, :w], rows[:, w:]
    out = np.empty_like(c)
    out[:, 0::2] = (lo + hi) / _SQRT2
    out[:, 1::2] = (lo - hi) / _SQRT2
    return out


def _check_haar_shape(x: np.ndarray, level: int) -> None:
    if x.ndim != 2:
        raise ShapeMismatch("Haar transform expects a 2-D array")
    if level < 1:
        raise ValueError("level must be >= 1")
    div = 2 ** level
    if x.shape[0] % div or x.shape[1] % div:
        raise ShapeMismatch(f"sides {x.shape} must be divisible by 2^level = {div}")


def haar_transform(x: np.ndarray, level: int = 1) -> np.ndarray:
    """Orthonormal multi-level 2-D Haar analysis (standard quadrant layout)."""
    _check_haar_shape(x, level)
    out = np.array(x, dtype=float)
    h, w = out.shape
    for _ in range(level):
        out[:h, :w] = _haar_step(out[:h, :w])
        h //= 2
        w //= 2
    return out


def haar_inverse(c: np.ndarray, level: int = 1) -> np.ndarray:
    """Exact adjoint (and inverse) of :func:`haar_transform`."""
    _check_haar_shape(c, level)
    out = np.array(c, dtype=float)
    h = out.shape[0] // 2 ** (level - 1)
    w = out.shape[1] // 2 ** (level - 1)
    for _ in range(level):
        out[:h, :w] = _haar_step_inv(out[:h, :w])
        h *= 2
        w *= 2
    return out


@dataclass(frozen=True)
class HaarTransform:
    """Orthogonal-transform handle for composition with separable penalties."""

    level: int = 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        return haar_transform(x, self.level)

    def inverse(self, c: np.ndarray) -> np.ndarray:
        return haar_inverse(c, self.level)


# --- circular blur -----------------------------------------------------------------


def gaussian_kernel(size: int = 5, sigma: float = 0.5) -> np.ndarray:
    """Normalized ``size x size`` Gaussian point-spread kernel."""
    if size % 2 != 1 or size < 1:
        raise ValueError("kernel size must be odd and positive")
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


@dataclass(frozen=True)
class BlurOperator:
    """2-D convolution with a normalized nonnegative kernel, circular boundary.

    Circular wrapping keeps the adjoint exact (convolution with the flipped
    kernel) and the operator norm at most one.
    """

    kernel: np.ndarray
    boundary: str = "circular"

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ShapeMismatch("kernel must be square")
        if np.any(k < 0) or not math.isclose(float(k.sum()), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("kernel must be nonnegative and sum to 1")
        if self.boundary != "circular":
            raise ValueError("only the circular boundary is supported")
        object.__setattr__(self, "kernel", k)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2:
            raise ShapeMismatch("blur expects a 2-D image")
        return ndimage.convolve(x, self.kernel, mode="wrap")

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        if y.ndim != 2:
            raise ShapeMismatch("blur adjoint expects a 2-D image")
        return ndimage.convolve(y, self.kernel[::-1, ::-1], mode="wrap")


def blur_apply(op: BlurOperator, x: np.ndarray) -> np.ndarray:
    return op.apply(x)


def blur_adjoint(op: BlurOperator, y: np.ndarray) -> np.ndarray:
    return op.adjoint(y)


# --- spectral estimates for operator-form data terms -------------------------------


def _gram_matvec(op, shape) -> Callable[[np.ndarray], np.ndarray]:
    def matvec(v: np.ndarray) -> np.ndarray:
        return op.adjoint(op.apply(v.reshape(shape))).ravel()

    return matvec


def gram_norm(op, shape: tuple[int, int], tol: float = 1e-12, max_iter: int = 500) -> float:
    """Largest eigenvalue of T^T T by power iteration with Rayleigh quotients.

    Starts from the constant image, which for a normalized nonnegative kernel
    is the dominant eigenvector itself.
    """
    matvec = _gram_matvec(op, shape)
    u = np.ones(int(np.prod(shape)))
    u /= np.linalg.norm(u)
    lam = 0.0
    for _ in range(max_iter):
        v = matvec(u)
        lam_new = float(u @ v)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        u = v / nv
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def gram_smallest_eigenvalue(
    op, shape: tuple[int, int], tol: float = 1e-10, max_iter: int = 200
) -> float:
    """Smallest eigenvalue of T^T T by inverse power iteration (CG inner solves).

    Rayleigh quotients converge to cluster resolution when the bottom of the
    spectrum is nearly degenerate, which is all the rate tuning needs.  Starts
    from the checkerboard mode, the natural high-frequency ansatz for a
    low-pass kernel.
    """
    matvec = _gram_matvec(op, shape)
    n = int(np.prod(shape))
    G = LinearOperator((n, n), matvec=matvec)
    idx = np.indices(shape).sum(axis=0)
    u = np.where(idx % 2 == 0, 1.0, -1.0).ravel()
    u /= np.linalg.norm(u)
    lam = math.inf
    for _ in range(max_iter):
        v, info = cg(G, u, x0=u, rtol=1e-12, atol=0.0, maxiter=1000)
        if info != 0:
            raise SingularSystem("inner CG solve failed in inverse power iteration")
        u = v / np.linalg.norm(v)
        lam_new = float(u @ matvec(u))
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


class OperatorLeastSquares:
    """``x -> ||T x - b||^2 / 2`` for a linear operator given by apply/adjoint.

    The prox solves ``(I + gamma T^T T) p = x + gamma T^T b`` by conjugate
    gradients, warm-started at ``x``.  Condition numbers are mild (the system
    is an identity plus a scaled Gram matrix), so tight tolerances stay cheap.
    """

    def __init__(self, op, data: np.ndarray, cg_rtol: float = 1e-14, cg_maxiter: int = 1000):
        self.op = op
        self.data = np.asarray(data, dtype=float)
        self.shape = self.data.shape
        self.dimension = int(np.prod(self.shape))
        self.adj_data = op.adjoint(self.data)
        self.cg_rtol = cg_rtol
        self.cg_maxiter = cg_maxiter

    def value(self, x: np.ndarray) -> float:
        r = self.op.apply(x) - self.data
        return 0.5 * float(np.vdot(r, r))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.op.adjoint(self.op.apply(x) - self.data)

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        if not (gamma > 0.0):
            raise ValueError("gamma must be positive")
        shape = self.shape

        def matvec(v: np.ndarray) -> np.ndarray:
            img = v.reshape(shape)
            return (img + gamma * self.op.adjoint(self.op.apply(img))).ravel()

        system = LinearOperator((self.dimension, self.dimension), matvec=matvec)
        rhs = (x + gamma * self.adj_data).ravel()
        sol, info = cg(
            system, rhs, x0=x.ravel(), rtol=self.cg_rtol, atol=0.0, maxiter=self.cg_maxiter
        )
        if info != 0:
            raise SingularSystem(f"prox CG did not converge (info={info})")
        return sol.reshape(shape)

    def to_prox_function(self, moduli: tuple[float, float]) -> ProxFunction:
        return ProxFunction(
            prox=self.prox,
            dimension=self.dimension,
            regularity=moduli,
            value=self.value,
            gradient=self.gradient,
            shape=self.shape,
        )


# --- small helpers used by the harness and tests -----------------------------------


def diagonal_quadratic(curvatures: np.ndarray) -> ProxFunction:
    """``x -> sum_i c_i x_i^2 / 2`` with elementwise prox ``x / (1 + gamma c)``."""
    c = np.asarray(curvatures, dtype=float)
    if np.any(c < 0):
        raise ValueError("curvatures must be >= 0")
    cmax = float(c.max())
    return ProxFunction(
        prox=lambda gamma, x: x / (1.0 + gamma * c),
        dimension=c.size,
        regularity=(float(c.min()), 1.0 / cmax if cmax > 0 else 0.0),
        value=lambda x: 0.5 * float(np.sum(c * x * x)),
        gradient=lambda x: c * x,
    )


def zero_function(dimension: int, shape: Optional[tuple[int, ...]] = None) -> ProxFunction:
    """The zero function: prox is the identity."""
    return ProxFunction(
        prox=lambda gamma, x: np.array(x, dtype=float),
        dimension=dimension,
        regularity=(0.0, 0.0),
        value=lambda x: 0.0,
        gradient=lambda x: np.zeros_like(x),
        shape=shape,
    )
