"""Count matrices and the rank-1 SVD used by the detector.

``rank1_svd`` is the production path (alternating power iteration, O(nm) per
step). ``svd_oracle`` is an independent dense reference built on a cyclic
Jacobi eigensolver; it exists for tests and is size-guarded.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AllZeroMatrix,
    DegenerateSpectrumWarning,
    EigenSpotError,
    LengthMismatch,
    OracleSizeExceeded,
    ZeroVector,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
ORACLE_MAX_DIM = 64


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Dense regions x periods grid of nonnegative counts.

    ``values`` is stored as a read-only float64 array; rows are regions and
    columns are time periods.
    """

    values: np.ndarray
    region_labels: tuple[str, ...] | None = None
    period_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise EigenSpotError(f"count matrix must be 2-D, got shape {arr.shape}")
        n, m = arr.shape
        if n < 1 or m < 1:
            raise EigenSpotError(f"count matrix must be at least 1x1, got {n}x{m}")
        if not np.all(np.isfinite(arr)):
            i, j = np.argwhere(~np.isfinite(arr))[0]
            raise EigenSpotError(f"non-finite count at region={i}, period={j}")
        if np.any(arr < 0):
            i, j = np.argwhere(arr < 0)[0]
            raise EigenSpotError(f"negative count {arr[i, j]} at region={i}, period={j}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        for name, expected in (("region_labels", n), ("period_labels", m)):
            labels = getattr(self, name)
            if labels is None:
                continue
            labels = tuple(str(x) for x in labels)
            if len(labels) != expected:
                raise LengthMismatch(f"{name} has {len(labels)} entries, expected {expected}")
            object.__setattr__(self, name, labels)

    @property
    def n_regions(self) -> int:
        return self.values.shape[0]

    @property
    def n_periods(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def regions(self) -> tuple[str, ...]:
        """Region labels, falling back to 0-based indices."""
        if self.region_labels is not None:
            return self.region_labels
        return tuple(str(i) for i in range(self.n_regions))

    def periods(self) -> tuple[str, ...]:
        if self.period_labels is not None:
            return self.period_labels
        return tuple(str(j) for j in range(self.n_periods))

    def with_values(self, values: np.ndarray) -> CountMatrix:
        return CountMatrix(values, self.region_labels, self.period_labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and bool(np.array_equal(self.values, other.values))
            and self.region_labels == other.region_labels
            and self.period_labels == other.period_labels
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class SingularPair:
    """Dominant singular triple of one matrix.

    ``spatial`` is the principal left singular vector (one entry per region),
    ``temporal`` the principal right singular vector (one entry per period).
    The sign is canonicalized so that ``spatial.sum() >= 0``.
    """

    sigma: float
    spatial: np.ndarray
    temporal: np.ndarray
    iterations: int = 0
    converged: bool = True
    degenerate: bool = field(default=False)


def _as_array(matrix: CountMatrix | np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    if isinstance(matrix, CountMatrix):
        return matrix.values
    return CountMatrix(matrix).values


def _canonical_sign(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if u.sum() < 0:
        return -u, -v
    return u, v


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def rank1_svd(
    matrix: CountMatrix | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SingularPair:
    """Dominant singular triple by alternating power iteration.

    Starts from the normalized row-sum vector, which for a nonnegative matrix
    cannot be orthogonal to the Perron vector. Each step does
    ``v = M^T u / |M^T u|``, ``u = M v / |M v|``, ``sigma = |M v|`` and stops
    once ``|sigma - sigma_prev| < tol * max(1, sigma)`` and the spatial vector
    moved by less than ``tol`` (2-norm) in the last step. The vector test keeps
    two proportional matrices on the same stopping iteration.

    If ``max_iter`` is reached first the result is still returned, with
    ``converged=False`` and a :class:`DegenerateSpectrumWarning`.
    """
    if not tol > 0:
        raise EigenSpotError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise EigenSpotError(f"max_iter must be >= 1, got {max_iter}")
    M = _as_array(matrix)
    if not np.any(M):
        raise AllZeroMatrix("singular vectors are undefined for an all-zero matrix")

    u = M.sum(axis=1)
    u = u / np.linalg.norm(u)
    sigma_prev = -1.0
    sigma = 0.0
    v = np.zeros(M.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v = M.T @ u
        v /= np.linalg.norm(v)
        w = M @ v
        sigma = float(np.linalg.norm(w))
        u_next = w / sigma
        step = float(np.linalg.norm(u_next - u))
        u = u_next
        if abs(sigma - sigma_prev) < tol * max(1.0, sigma) and step < tol:
            converged = True
            break
        sigma_prev = sigma

    if not converged:
        warnings.warn(
            f"power iteration did not converge in {max_iter} steps; "
            "the leading singular values are probably (nearly) tied",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    u, v = _canonical_sign(u, v)
    return SingularPair(
        sigma=sigma,
        spatial=_freeze(u),
        temporal=_freeze(v),
        iterations=it,
        converged=converged,
        degenerate=not converged,
    )


def jacobi_eigh(sym: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm falls below
    ``tol * |A|_F``. Returns ``(eigenvalues, eigenvectors)`` with eigenvectors
    in the columns, unsorted.
    """
    A = np.array(sym, dtype=np.float64, copy=True)
    k = A.shape[0]
    if A.shape != (k, k):
        raise EigenSpotError(f"jacobi_eigh needs a square matrix, got {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=0.0):
        raise EigenSpotError("jacobi_eigh needs a symmetric matrix")
    V = np.eye(k)
    scale = np.linalg.norm(A)
    if scale == 0.0 or k == 1:
        return np.diag(A).copy(), V

    offdiag = ~np.eye(k, dtype=bool)

    def off(a: np.ndarray) -> float:
        return float(np.linalg.norm(a[offdiag]))

    for _ in range(max_sweeps):
        if off(A) < tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p, q]
                if abs(apq) <= 1e-20 * scale:
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        if off(A) >= tol * scale:
            raise EigenSpotError("Jacobi sweeps did not converge")
    return np.diag(A).copy(), V


def svd_oracle(matrix: CountMatrix | np.ndarray) -> SingularPair:
    """Reference dominant singular triple via Jacobi on the smaller Gram matrix.

    Test-scale only: raises :class:`OracleSizeExceeded` when
    ``min(n, m) > 64``.
    """
    M = _as_array(matrix)
    n, m = M.shape
    if min(n, m) > ORACLE_MAX_DIM:
        raise OracleSizeExceeded(f"svd_oracle supports min(n, m) <= {ORACLE_MAX_DIM}, got {n}x{m}")
    if not np.any(M):
        raise AllZeroMatrix("singular vectors are undefined for an all-zero matrix")

    if m <= n:
        G = M.T @ M
        evals, evecs = jacobi_eigh(0.5 * (G + G.T))
        top = int(np.argmax(evals))
        v = evecs[:, top]
        w = M @ v
        sigma = float(np.linalg.norm(w))
        u = w / sigma
    else:
        G = M @ M.T
        evals, evecs = jacobi_eigh(0.5 * (G + G.T))
        top = int(np.argmax(evals))
        u = evecs[:, top]
        w = M.T @ u
        sigma = float(np.linalg.norm(w))
        v = w / sigma
    u, v = _canonical_sign(u, v)
    return SingularPair(sigma=sigma, spatial=_freeze(u), temporal=_freeze(v))


def vector_angle(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Angle in radians between two vectors (diagnostic only)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"vector lengths differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("angle is undefined for a zero vector")
    cos = float(np.dot(a, b) / (na * nb))
    return math.acos(min(1.0, max(-1.0, cos)))
