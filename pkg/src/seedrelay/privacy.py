"""Privacy metrics: label privacy, sample similarity, and MDS embedding.

Label privacy of a device is one minus the fraction its (received) target
labels make up of the (received) public label set, so a lone target hidden
behind one dummy scores 1/2 and full coverage of ten labels scores 9/10.
Sample similarity is the log of the largest pairwise Euclidean distance in
normalized pixel space; sample privacy is its reciprocal.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dataset import LabelIndicator

MDS_TOLERANCE = 1e-10
MDS_MAX_ITERATIONS = 10_000

SIMILARITY_DEGENERATE = float("-inf")  # all pairwise distances were zero


class UndefinedPrivacyError(ValueError):
    """Label privacy is undefined: the destination received no labels at all."""


class SimilarityDomainError(ValueError):
    """Sample privacy is 1/similarity and needs a strictly positive similarity."""


class DegenerateEmbeddingError(ValueError):
    """The distance matrix admits no nontrivial classical embedding."""


def label_privacy_single(y_target: LabelIndicator, y_public: LabelIndicator) -> float:
    """Privacy of one device against its direct destination: 1 - |targets|/|public|.

    Both indicators must already be restricted to labels the destination
    actually received; a failed sample removes its label from both sides.
    """
    if y_public.popcount() == 0:
        raise UndefinedPrivacyError("destination received no labels from this device")
    if not y_target.issubset(y_public):
        raise ValueError("received target labels must be a subset of the received public set")
    return 1.0 - y_target.popcount() / y_public.popcount()


def label_privacy_multihop(
    y_target: LabelIndicator, received_unions: list[LabelIndicator]
) -> float:
    """Privacy against the far end of a relay chain.

    `received_unions` holds the public indicator of each node on the path
    from the device (hop 0) to the destination, restricted to delivered
    labels; the denominator is the popcount of their union. With a single
    element this reduces exactly to the direct-destination formula.
    """
    union = LabelIndicator.empty()
    for ind in received_unions:
        union = union | ind
    return label_privacy_single(y_target, union)


def similarity(samples: np.ndarray | list[np.ndarray]) -> float:
    """Log of the largest pairwise Euclidean distance over the sample set.

    Pixel intensities are normalized to [0, 1] (integer input is divided by
    255). Returns the SIMILARITY_DEGENERATE sentinel when every pair
    coincides, since log(0) has no value to report.
    """
    arr = np.asarray(samples)
    if arr.ndim < 2 or len(arr) < 2:
        raise ValueError("similarity needs at least two samples")
    flat = arr.reshape(len(arr), -1).astype(np.float64)
    if np.issubdtype(arr.dtype, np.integer):
        flat = flat / 255.0
    d_max = float(pdist(flat).max())
    if d_max == 0.0:
        return SIMILARITY_DEGENERATE
    return math.log(d_max)


def sample_privacy(similarity_value: float) -> float:
    """Reciprocal of the similarity value; only defined for positive similarity."""
    if not similarity_value > 0.0:
        raise SimilarityDomainError(
            f"sample privacy needs similarity > 0, got {similarity_value}"
        )
    return 1.0 / similarity_value


def pairwise_distances(samples: np.ndarray) -> np.ndarray:
    """Symmetric matrix of Euclidean distances in normalized pixel space.

    Computed from explicit coordinate differences, so duplicated samples come
    out at exactly zero distance.
    """
    arr = np.asarray(samples)
    flat = arr.reshape(len(arr), -1).astype(np.float64)
    if np.issubdtype(arr.dtype, np.integer):
        flat = flat / 255.0
    return squareform(pdist(flat))


def classical_mds(
    distance_matrix: np.ndarray,
    dim: int = 2,
    tol: float = MDS_TOLERANCE,
    max_iter: int = MDS_MAX_ITERATIONS,
) -> np.ndarray:
    """Embed a distance matrix into `dim` dimensions by double-centering.

    B = -1/2 J D^2 J is eigensolved by power iteration with deflation (a
    small Rayleigh-Ritz rotation at the end separates near-equal
    eigenvalues); coordinates are eigenvectors scaled by sqrt(eigenvalue),
    centered at the origin. Exact for distances that came from Euclidean
    points in `dim` dimensions.
    """
    D = np.asarray(distance_matrix, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    n = D.shape[0]
    if n < dim:
        raise ValueError(f"need at least {dim} points for a {dim}-D embedding")
    if np.any(np.abs(np.diag(D)) > 1e-9):
        raise ValueError("distance matrix diagonal must be zero")
    if np.max(np.abs(D - D.T)) > 1e-9:
        raise ValueError("distance matrix must be symmetric within 1e-9")
    if np.any(D < 0):
        raise ValueError("distances must be nonnegative")

    D2 = D**2
    centered = D2 - D2.mean(axis=0) - D2.mean(axis=1)[:, None] + D2.mean()
    B = -0.5 * centered
    scale = max(float(np.abs(B).max()), 1.0)

    rng = np.random.default_rng(0x5EED)
    vectors: list[np.ndarray] = []
    deflated = B.copy()
    for _ in range(dim):
        v = rng.standard_normal(n)
        for u in vectors:
            v -= (u @ v) * u
        norm = np.linalg.norm(v)
        v = v / norm if norm > 0 else v
        for _ in range(max_iter):
            w = deflated @ v
            for u in vectors:
                w -= (u @ w) * u
            w_norm = np.linalg.norm(w)
            if w_norm <= tol * scale:
                break  # v lies in the (near-)nullspace: eigenvalue ~ 0
            lam = float(v @ w)
            if np.linalg.norm(w - lam * v) <= tol * scale:
                v = w / w_norm
                break
            v = w / w_norm
        lam = float(v @ (B @ v))
        vectors.append(v)
        deflated = deflated - lam * np.outer(v, v)

    # Rayleigh-Ritz on the extracted subspace: exact separation of the top
    # eigenpairs even when eigenvalues coincide (symmetric configurations).
    basis, _ = np.linalg.qr(np.stack(vectors, axis=1))
    small = basis.T @ B @ basis
    small = 0.5 * (small + small.T)
    evals, evecs = np.linalg.eigh(small)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    axes = basis @ evecs[:, order]

    if evals[0] < -tol * scale:
        raise DegenerateEmbeddingError(
            f"top eigenvalue {evals[0]:.3e} is negative; no classical embedding exists"
        )
    coords = axes * np.sqrt(np.clip(evals, 0.0, None))
    return coords - coords.mean(axis=0)
