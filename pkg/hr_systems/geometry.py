"""Lorentzian metrics, Sasaki lifts, Hamilton-Randers structures and hyperboloid averages.

Coordinates for N molecules in spacetime dimension d are laid out molecule by
molecule: ``u = (x_1, y_1, ..., x_N, y_N)`` and ``p = (p_x1, p_y1, ...)``, each
block of length d, so configuration and momentum arrays have length 2dN.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from .errors import (
    CapabilityError, ConeDomainError, DataCorruptionError, DomainError, FrameError,
    GeometryError, SamplingError, ShapeError, SignatureError, SingularityError,
)
from .rng import CHUNK_SIZE, stream

log = logging.getLogger(__name__)

RANDERS_BOUND_SAMPLES = 10_000
FD_RELATIVE_STEP = 1e-5
SIGNATURE_TOL = 1e-12

ArrayLike = Union[np.ndarray, list, tuple]


class LorentzMetric:
    """Spacetime metric of signature (+, -, ..., -).

    ``components`` is either a constant d x d matrix or a callable returning one
    for a position; ``None`` means Minkowski.
    """

    def __init__(self, dim: int = 4, components: Optional[Union[ArrayLike, Callable]] = None):
        if dim < 2:
            raise DomainError(f"spacetime dimension must be >= 2, got {dim}")
        self.dim = dim
        if components is None:
            components = np.diag([1.0] + [-1.0] * (dim - 1))
        if callable(components):
            self._func = components
            self._matrix = None
        else:
            matrix = np.asarray(components, dtype=float)
            if matrix.size == dim * dim:
                matrix = matrix.reshape(dim, dim)
            if matrix.shape != (dim, dim):
                raise ShapeError(f"metric must be {dim}x{dim}, got shape {matrix.shape}")
            self._func = None
            self._matrix = matrix
        if self._matrix is not None:
            self.check_signature()

    @classmethod
    def minkowski(cls, dim: int = 4) -> 'LorentzMetric':
        return cls(dim)

    @classmethod
    def constant(cls, matrix: ArrayLike) -> 'LorentzMetric':
        matrix = np.asarray(matrix, dtype=float)
        dim = int(round(np.sqrt(matrix.size)))
        return cls(dim, matrix)

    @property
    def is_constant(self) -> bool:
        return self._matrix is not None

    def at(self, x: Optional[ArrayLike] = None) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        if x is None:
            raise DomainError("position-dependent metric needs a position")
        return np.asarray(self._func(np.asarray(x, dtype=float)), dtype=float)

    def check_signature(self, x: Optional[ArrayLike] = None) -> None:
        g = self.at(x)
        if not np.allclose(g, g.T, atol=1e-12, rtol=0.0):
            raise SignatureError("metric is not symmetric")
        eigenvalues = np.linalg.eigvalsh(g)
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        positive = int(np.sum(eigenvalues > SIGNATURE_TOL * scale))
        negative = int(np.sum(eigenvalues < -SIGNATURE_TOL * scale))
        if positive != 1 or negative != self.dim - 1:
            raise SignatureError(
                f"expected signature (+{'-' * (self.dim - 1)}), eigenvalues {np.round(eigenvalues, 6).tolist()}"
            )

    def describe(self) -> Dict[str, Any]:
        if self._matrix is None:
            return {'dim': self.dim, 'components': getattr(self._func, '__name__', 'callable')}
        return {'dim': self.dim, 'components': self._matrix.tolist()}


def sasaki_block_metric(g4: LorentzMetric, x: Optional[ArrayLike] = None) -> np.ndarray:
    """Dual-metric block diag(g^-1, g^-1) of one molecule (flat connection)."""
    if not g4.is_constant and x is None:
        raise CapabilityError("curved metrics need a connection; only constant metrics are lifted")
    g4.check_signature(x)
    g_inv = np.linalg.inv(g4.at(x))
    g_inv = 0.5 * (g_inv + g_inv.T)
    return block_diag(g_inv, g_inv)


def x_sector_mask(d: int, N: int) -> np.ndarray:
    """True on the x (resp. p_x) entries of every molecule block."""
    block = np.concatenate([np.ones(d, dtype=bool), np.zeros(d, dtype=bool)])
    return np.tile(block, N)


def inversion_signs(d: int, N: int) -> np.ndarray:
    """Sign vector that negates the first sector of each block."""
    return np.where(x_sector_mask(d, N), -1.0, 1.0)


# ---------------------------------------------------------------------------
# Drift fields
# ---------------------------------------------------------------------------

class BetaField(ABC):
    """Vector field beta(u); evaluation accepts a point (n,) or rows (M, n)."""

    dim: int
    is_constant: bool = False

    @abstractmethod
    def __call__(self, u: np.ndarray) -> np.ndarray:
        ...

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """J[..., k, i] = d beta^k / d u^i."""
        raise CapabilityError(f"{type(self).__name__} does not provide a Jacobian")

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        ...

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise ShapeError(f"beta expects length {self.dim}, got {u.shape[-1]}")
        return u


class ConstantBeta(BetaField):
    is_constant = True

    def __init__(self, vector: ArrayLike):
        self.vector = np.asarray(vector, dtype=float).ravel()
        self.dim = self.vector.size

    def __call__(self, u):
        u = self._check(u)
        return np.broadcast_to(self.vector, u.shape).copy()

    def jacobian(self, u):
        u = self._check(u)
        return np.zeros(u.shape[:-1] + (self.dim, self.dim))

    def describe(self):
        return {'family': 'constant', 'vector': self.vector.tolist()}


class LinearBeta(BetaField):
    """beta(u) = A u + b."""

    def __init__(self, matrix: ArrayLike, offset: Optional[ArrayLike] = None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.dim = self.matrix.shape[0]
        if self.matrix.shape != (self.dim, self.dim):
            raise ShapeError(f"linear beta needs a square matrix, got {self.matrix.shape}")
        self.offset = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float).ravel()
        self.is_constant = not np.any(self.matrix)

    def __call__(self, u):
        u = self._check(u)
        return u @ self.matrix.T + self.offset

    def jacobian(self, u):
        u = self._check(u)
        return np.broadcast_to(self.matrix, u.shape[:-1] + self.matrix.shape).copy()

    def describe(self):
        return {'family': 'linear', 'matrix': self.matrix.tolist(), 'offset': self.offset.tolist()}


class SinusoidalBeta(BetaField):
    """beta(u) = a * sin(K u + phi), componentwise."""

    def __init__(self, amplitude: ArrayLike, wavenumbers: ArrayLike, phase: Optional[ArrayLike] = None):
        self.amplitude = np.asarray(amplitude, dtype=float).ravel()
        self.dim = self.amplitude.size
        self.wavenumbers = np.asarray(wavenumbers, dtype=float).reshape(self.dim, self.dim)
        self.phase = np.zeros(self.dim) if phase is None else np.asarray(phase, dtype=float).ravel()

    def __call__(self, u):
        u = self._check(u)
        return self.amplitude * np.sin(u @ self.wavenumbers.T + self.phase)

    def jacobian(self, u):
        u = self._check(u)
        slope = self.amplitude * np.cos(u @ self.wavenumbers.T + self.phase)
        return slope[..., :, None] * self.wavenumbers

    def describe(self):
        return {
            'family': 'sinusoidal',
            'amplitude': self.amplitude.tolist(),
            'wavenumbers': self.wavenumbers.tolist(),
            'phase': self.phase.tolist(),
        }


class CallableBeta(BetaField):
    """Arbitrary user field; evaluable but not differentiable."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], dim: int, name: str = 'callable'):
        self.func = func
        self.dim = dim
        self.name = name

    def __call__(self, u):
        u = self._check(u)
        if u.ndim == 1:
            return np.asarray(self.func(u), dtype=float)
        return np.stack([np.asarray(self.func(row), dtype=float) for row in u])

    def describe(self):
        return {'family': 'callable', 'name': self.name}


class TiledBeta(BetaField):
    """One-molecule field applied to each of N identical molecules."""

    def __init__(self, base: BetaField, N: int):
        self.base = base
        self.N = N
        self.dim = base.dim * N
        self.is_constant = base.is_constant

    def __call__(self, u):
        u = self._check(u)
        blocks = u.reshape(u.shape[:-1] + (self.N, self.base.dim))
        return self.base(blocks).reshape(u.shape)

    def jacobian(self, u):
        u = self._check(u)
        blocks = u.reshape(u.shape[:-1] + (self.N, self.base.dim))
        local = self.base.jacobian(blocks)
        out = np.zeros(u.shape[:-1] + (self.dim, self.dim))
        k = self.base.dim
        for i in range(self.N):
            out[..., i * k:(i + 1) * k, i * k:(i + 1) * k] = local[..., i, :, :]
        return out

    def describe(self):
        return {'family': 'tiled', 'N': self.N, 'base': self.base.describe()}


# ---------------------------------------------------------------------------
# Phase points and structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    u: np.ndarray
    p: np.ndarray
    d: int = 4

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        if u.size != p.size:
            raise ShapeError(f"u and p lengths differ: {u.size} vs {p.size}")
        if u.size == 0 or u.size % (2 * self.d):
            raise ShapeError(f"length {u.size} is not a positive multiple of 2d = {2 * self.d}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(p))):
            raise DataCorruptionError("phase point has non-finite entries")
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'p', p)

    @classmethod
    def from_blocks(cls, x, y, px, py) -> 'PhasePoint':
        x, y, px, py = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, y, px, py))
        d = x.shape[1]
        u = np.concatenate([x, y], axis=1).ravel()
        p = np.concatenate([px, py], axis=1).ravel()
        return cls(u, p, d)

    @property
    def N(self) -> int:
        return self.u.size // (2 * self.d)

    def _blocks(self, arr: np.ndarray) -> np.ndarray:
        return arr.reshape(self.N, 2, self.d)

    @property
    def x(self) -> np.ndarray:
        return self._blocks(self.u)[:, 0, :]

    @property
    def y(self) -> np.ndarray:
        return self._blocks(self.u)[:, 1, :]

    @property
    def px(self) -> np.ndarray:
        return self._blocks(self.p)[:, 0, :]

    @property
    def py(self) -> np.ndarray:
        return self._blocks(self.p)[:, 1, :]

    def with_momentum(self, p: ArrayLike) -> 'PhasePoint':
        return PhasePoint(self.u, p, self.d)


@dataclass(frozen=True)
class RandersStructure:
    N: int
    d: int
    eta: np.ndarray
    beta: BetaField
    kappa_independent_of_p: bool = True
    metric: Optional[LorentzMetric] = None

    def __post_init__(self):
        n = 2 * self.d * self.N
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (n, n):
            raise ShapeError(f"eta must be {n}x{n}, got {eta.shape}")
        if self.beta.dim != n:
            raise ShapeError(f"beta has length {self.beta.dim}, structure needs {n}")
        object.__setattr__(self, 'eta', eta)

    @classmethod
    def build(cls, metric: LorentzMetric, beta: BetaField, N: int = 1,
              bound_box: float = 1.0, bound_samples: int = RANDERS_BOUND_SAMPLES,
              seed: int = 0) -> 'RandersStructure':
        block = sasaki_block_metric(metric)
        eta = block_diag(*([block] * N))
        if beta.dim == block.shape[0] and N > 1:
            beta = TiledBeta(beta, N)
        structure = cls(N=N, d=metric.dim, eta=eta, beta=beta, metric=metric)
        points = stream(seed, 'randers-bound').uniform(-bound_box, bound_box, size=(bound_samples, structure.n))
        margin = randers_bound_margin(structure, points)
        if margin >= 1.0:
            raise GeometryError(f"Randers bound violated: max eta*(beta, beta) = {margin:.6g} >= 1")
        log.debug(f"Randers structure N={N} d={metric.dim} bound margin {margin:.4g}")
        return structure

    @property
    def n(self) -> int:
        return 2 * self.d * self.N

    @property
    def eta_lower(self) -> np.ndarray:
        return np.linalg.inv(self.eta)

    def describe(self) -> Dict[str, Any]:
        return {'N': self.N, 'd': self.d, 'eta': self.eta.tolist(), 'beta': self.beta.describe()}


def randers_bound_margin(s: RandersStructure, points: np.ndarray) -> float:
    """max over points of eta*(beta, beta) = beta^T eta^-1 beta."""
    values = s.beta(np.atleast_2d(points))
    norms = np.einsum('mi,ij,mj->m', values, s.eta_lower, values)
    return float(np.max(norms))


def _alpha_squared(eta: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.einsum('...i,ij,...j->...', P, eta, P)


def hr_value_batch(s: RandersStructure, U: np.ndarray, P: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(U)
    P = np.atleast_2d(P)
    a2 = _alpha_squared(s.eta, P)
    scale = np.maximum(1.0, np.sum(P * P, axis=-1))
    if np.any(a2 < -1e-12 * scale):
        raise ConeDomainError("momentum outside the timelike cone (alpha^2 < 0)")
    alpha = np.sqrt(np.clip(a2, 0.0, None))
    return alpha + np.sum(s.beta(U) * P, axis=-1)


def hr_value(s: RandersStructure, pt: PhasePoint) -> float:
    """F(u, p) = sqrt(eta(p, p)) + beta(u) . p."""
    return float(hr_value_batch(s, pt.u, pt.p)[0])


def cone_contains(s: RandersStructure, pt: PhasePoint) -> bool:
    return bool(_alpha_squared(s.eta, pt.p) > 0.0)


def _grad_f_squared(eta: np.ndarray, beta_values: np.ndarray, P: np.ndarray) -> np.ndarray:
    eta_p = P @ eta
    alpha = np.sqrt(np.einsum('mi,mi->m', eta_p, P))
    F = alpha + P @ beta_values
    return 2.0 * F[:, None] * (eta_p / alpha[:, None] + beta_values)


def fundamental_tensor_batch(s: RandersStructure, u: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Vertical Hessian 1/2 d^2F^2/dp dp at one configuration point for many momenta.

    Central differences of the analytic gradient of F^2, step 1e-5 * max(1, |p|).
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    beta_values = np.asarray(s.beta(np.asarray(u, dtype=float)), dtype=float)
    a2 = _alpha_squared(s.eta, P)
    if np.any(a2 <= 1e-14 * np.maximum(1.0, np.sum(P * P, axis=1))):
        raise SingularityError("fundamental tensor requested on the cone boundary (alpha = 0)")
    steps = FD_RELATIVE_STEP * np.maximum(1.0, np.linalg.norm(P, axis=1))
    G = np.empty((P.shape[0], s.n, s.n))
    for j in range(s.n):
        shift = np.zeros_like(P)
        shift[:, j] = steps
        forward = _grad_f_squared(s.eta, beta_values, P + shift)
        backward = _grad_f_squared(s.eta, beta_values, P - shift)
        G[:, :, j] = 0.25 * (forward - backward) / steps[:, None]
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def fundamental_tensor(s: RandersStructure, pt: PhasePoint) -> np.ndarray:
    a2 = float(_alpha_squared(s.eta, pt.p))
    if a2 < 0.0:
        raise ConeDomainError("momentum outside the timelike cone")
    return fundamental_tensor_batch(s, pt.u, pt.p[None, :])[0]


# ---------------------------------------------------------------------------
# Hyperboloid sampling and the averaged metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperboloidSampler:
    """Unit hyperboloid eta(p, p) = 1 parameterised by boosts.

    Rapidities on the negative eigen-directions are Gaussian with width
    ``sigma_b``; the positive directions carry cosh(|b|) times a uniform unit
    vector. With ``time_symmetric`` every draw is paired with its time-inverted
    copy, so ``count`` base draws give 2 * count samples.
    """
    count: int = 20_000
    sigma_b: float = 1.0
    seed: int = 0
    time_symmetric: bool = True
    reflect: bool = False

    def reflected(self) -> 'HyperboloidSampler':
        return HyperboloidSampler(self.count, self.sigma_b, self.seed, self.time_symmetric, not self.reflect)

    def describe(self) -> Dict[str, Any]:
        return {
            'count': self.count, 'sigma_b': self.sigma_b, 'seed': self.seed,
            'time_symmetric': self.time_symmetric, 'reflect': self.reflect,
        }

    def draw(self, eta: np.ndarray, d: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.count < 1 or self.sigma_b <= 0:
            raise SamplingError(f"invalid sampler settings count={self.count} sigma_b={self.sigma_b}")
        eigenvalues, vectors = np.linalg.eigh(eta)
        tol = SIGNATURE_TOL * max(1.0, float(np.max(np.abs(eigenvalues))))
        positive = eigenvalues > tol
        negative = eigenvalues < -tol
        if not np.any(positive) or np.any(~(positive | negative)):
            raise SamplingError("all samples rejected: degenerate or non-Lorentzian eta")

        rng = stream(self.seed, 'hyperboloid')
        n_neg = int(np.sum(negative))
        n_pos = int(np.sum(positive))
        boosts = rng.normal(0.0, self.sigma_b, size=(self.count, n_neg))
        rapidity = np.linalg.norm(boosts, axis=1)
        ratio = np.ones_like(rapidity)
        moving = rapidity > 0
        ratio[moving] = np.sinh(rapidity[moving]) / rapidity[moving]
        if n_pos == 1:
            directions = np.ones((self.count, 1))
        else:
            directions = rng.standard_normal((self.count, n_pos))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)

        frame = np.zeros((self.count, eta.shape[0]))
        frame[:, positive] = np.cosh(rapidity)[:, None] * directions / np.sqrt(eigenvalues[positive])
        frame[:, negative] = ratio[:, None] * boosts / np.sqrt(-eigenvalues[negative])
        P = frame @ vectors.T

        keep = np.all(np.isfinite(P), axis=1) & (_alpha_squared(eta, P) > 0.0)
        P = P[keep]
        if P.shape[0] == 0:
            raise SamplingError("all samples rejected")

        signs = inversion_signs(d, eta.shape[0] // (2 * d))
        if self.reflect:
            P = P * signs
        if self.time_symmetric:
            P = np.vstack([P, P * signs])
        return P, np.ones(P.shape[0])


def averaged_metric(s: RandersStructure, u: ArrayLike, sampler: HyperboloidSampler,
                    cache=None) -> np.ndarray:
    """h^{ij}(u): weighted hyperboloid average of the fundamental tensor."""
    u = np.asarray(u, dtype=float).ravel()
    if cache is not None:
        payload = {'structure': s.describe(), 'u': u.tolist(), 'sampler': sampler.describe()}
        return cache.remember('averaged_metric', payload, lambda: _averaged_metric(s, u, sampler))
    return _averaged_metric(s, u, sampler)


def _averaged_metric(s: RandersStructure, u: np.ndarray, sampler: HyperboloidSampler) -> np.ndarray:
    P, weights = sampler.draw(s.eta, s.d)
    F = hr_value_batch(s, np.broadcast_to(u, P.shape), P)
    admissible = F > 0.0
    if not np.any(admissible):
        raise SamplingError("all samples rejected: F <= 0 on every draw")
    rejected = int(np.sum(~admissible))
    if rejected:
        log.warning(f"averaged_metric: rejected {rejected} of {P.shape[0]} draws with F <= 0")
    P, weights = P[admissible], weights[admissible]

    total = np.zeros((s.n, s.n))
    for start in range(0, P.shape[0], CHUNK_SIZE):
        chunk = slice(start, start + CHUNK_SIZE)
        G = fundamental_tensor_batch(s, u, P[chunk])
        total += np.einsum('m,mij->ij', weights[chunk], G)
    h = total / np.sum(weights)
    return 0.5 * (h + h.T)


# ---------------------------------------------------------------------------
# Observers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObserverFrame:
    """Timelike observer field W; the induced metric is stored positive definite."""
    W: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]
    sign_convention: str = field(default='negated')

    @classmethod
    def static(cls, d: int = 4) -> 'ObserverFrame':
        return cls(np.eye(d)[0])

    def vector(self, x: Optional[ArrayLike] = None) -> np.ndarray:
        if callable(self.W):
            return np.asarray(self.W(np.asarray(x, dtype=float)), dtype=float)
        return np.asarray(self.W, dtype=float)

    def induced_metric(self, g4: LorentzMetric, x: Optional[ArrayLike] = None) -> np.ndarray:
        return observer_metric(g4, self, x)


def observer_metric(g4: LorentzMetric, W: ObserverFrame, x: Optional[ArrayLike] = None,
                    negate: bool = True) -> np.ndarray:
    """Riemannian metric induced by W.

    The raw expression eta - 2 (eta W)(eta W)^T / eta(W, W) is negative definite;
    ``negate`` (the default) returns its positive-definite negative.
    """
    g = g4.at(x)
    w = W.vector(x)
    norm = float(w @ g @ w)
    if norm <= SIGNATURE_TOL * max(1.0, float(w @ w)):
        raise FrameError(f"observer field is not timelike: eta(W, W) = {norm:.6g}")
    gw = g @ w
    raw = g - 2.0 * np.outer(gw, gw) / norm
    return -raw if negate else raw


def observer_norm(g4: LorentzMetric, W: ObserverFrame, v: ArrayLike, x: Optional[ArrayLike] = None) -> np.ndarray:
    """Observer-frame norm of one vector (d,) or rows (M, d)."""
    G = observer_metric(g4, W, x)
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.clip(np.einsum('...i,ij,...j->...', v, G, v), 0.0, None))


def distance_to_worldline(x: ArrayLike, line: ArrayLike, frame: ObserverFrame,
                          g4: Optional[LorentzMetric] = None) -> float:
    """Minimum observer-frame distance from x to the sampled points of a world line."""
    line = np.atleast_2d(np.asarray(line, dtype=float))
    if line.size == 0:
        raise DomainError("world line has no samples")
    x = np.asarray(x, dtype=float)
    g4 = g4 or LorentzMetric.minkowski(x.size)
    return float(np.min(observer_norm(g4, frame, line - x, x)))
