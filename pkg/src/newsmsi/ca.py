"""Correspondence analysis of the user-outlet count matrix and the Media
Sharing Index (MSI) derived from its first dimension.

The standardized residual matrix

    S = D_r^{-1/2} (P - r c^T) D_c^{-1/2},   s_ij = (p_ij - r_i c_j) / sqrt(r_i c_j)

is never formed densely.  :class:`ResidualMatrix` stores the sparse part
``p_ij / sqrt(r_i c_j)`` and applies the rank-one correction
``-sqrt(r) sqrt(c)^T`` inside every product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConvergenceError, DataError, NumericalError
from .ingest import BipartiteCounts

log = logging.getLogger(__name__)

CONVENTIONS = ("standard", "paper_literal")

# Leading singular values at or below this are treated as exact zeros: the
# implicit rank-one correction leaves ~1e-16 noise on independent tables.
ZERO_SINGULAR = 1e-10


@dataclass(frozen=True, eq=False)
class ResidualMatrix:
    """Standardized residuals held as sparse part minus a rank-one term."""

    scaled: sparse.csr_matrix
    proportions: sparse.csr_matrix
    row_masses: np.ndarray
    col_masses: np.ndarray
    sqrt_r: np.ndarray = field(repr=False)
    sqrt_c: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scaled.shape

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = self.scaled @ X
        correction = self.sqrt_c @ X
        return out - np.multiply.outer(self.sqrt_r, correction)

    def rmatmat(self, Y: np.ndarray) -> np.ndarray:
        """``S.T @ Y``."""
        Y = np.asarray(Y, dtype=float)
        out = self.scaled.T @ Y
        correction = self.sqrt_r @ Y
        return out - np.multiply.outer(self.sqrt_c, correction)

    def total_inertia(self) -> float:
        # sum s_ij^2 = sum (p_ij^2 / r_i c_j) - 1 since sum p = sum r c = 1
        return float(np.dot(self.scaled.data, self.scaled.data) - 1.0)

    def toarray(self) -> np.ndarray:
        """Dense copy evaluated entrywise, for small diagnostics only."""
        expected = np.outer(self.row_masses, self.col_masses)
        return (self.proportions.toarray() - expected) / np.sqrt(expected)


def standardized_residuals(counts: BipartiteCounts) -> ResidualMatrix:
    """Build the implicit standardized residual matrix and the masses."""
    Y = counts.counts.tocsr()
    total = float(counts.grand_total)
    r = counts.row_sums / total
    c = counts.col_sums / total
    if (r <= 0).any() or (c <= 0).any():
        raise DataError("row and column masses must be positive")
    sqrt_r, sqrt_c = np.sqrt(r), np.sqrt(c)
    coo = Y.tocoo()
    p = coo.data / total
    P = sparse.csr_matrix((p, (coo.row, coo.col)), shape=Y.shape)
    scaled = sparse.csr_matrix((p / (sqrt_r[coo.row] * sqrt_c[coo.col]), (coo.row, coo.col)), shape=Y.shape)
    return ResidualMatrix(scaled, P, r, c, sqrt_r, sqrt_c)


@dataclass(frozen=True, eq=False)
class CaDecomposition:
    """Leading ``k`` singular triplets of the standardized residuals.

    ``left_vectors`` (users x k) and ``right_vectors`` (outlets x k) are
    orthonormal; ``singular_values`` is non-increasing.
    """

    row_masses: np.ndarray
    col_masses: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    total_inertia: float
    k: int
    iterations: int = 0

    @property
    def principal_inertias(self) -> np.ndarray:
        return self.singular_values**2


def truncated_svd(
    S: ResidualMatrix,
    k: int = 1,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 0,
    oversample: int = 10,
) -> CaDecomposition:
    """Top-``k`` singular triplets of ``S`` by block subspace iteration.

    A block of ``k + oversample`` random vectors (capped at the smaller
    matrix dimension) is alternately multiplied by ``S`` and ``S.T`` and
    re-orthonormalised; after each sweep a Rayleigh-Ritz step on the two
    bases yields the current triplets.  Iteration stops once every retained
    triplet satisfies ``max(|S v - a u|, |S^T u - a v|) <= tol * a_1`` (or
    the rounding floor of the products, whichever is larger).

    Raises
    ------
    ConvergenceError
        If the tolerance is not met within ``max_iter`` sweeps.
    """
    m, n = S.shape
    if k < 1 or k > min(m, n) - 1:
        raise ValueError(f"k must be in [1, {min(m, n) - 1}] for a {m}x{n} table, got {k}")
    block = min(k + oversample, m, n)
    rng = np.random.default_rng(seed)
    Qv, _ = np.linalg.qr(rng.standard_normal((n, block)))

    # attainable accuracy floor: rounding in products scales with ||S||_F <= sqrt(inertia + 1)
    floor = 64 * np.finfo(float).eps * np.sqrt(S.total_inertia() + 1.0)
    residual = np.inf
    for it in range(1, max_iter + 1):
        Qu, _ = np.linalg.qr(S.matmat(Qv))
        StQu = S.rmatmat(Qu)
        Qv, _ = np.linalg.qr(StQu)
        # Rayleigh-Ritz: B = Qu^T S Qv
        ub, alpha, vbt = np.linalg.svd(StQu.T @ Qv)
        U = Qu @ ub[:, :k]
        V = Qv @ vbt[:k].T
        alpha = alpha[:k]
        r_left = S.matmat(V) - U * alpha
        r_right = S.rmatmat(U) - V * alpha
        residual = float(max(np.linalg.norm(r_left, axis=0).max(), np.linalg.norm(r_right, axis=0).max()))
        if residual <= max(tol * alpha[0], floor):
            break
    else:
        raise ConvergenceError("truncated SVD did not converge", residual, max_iter)

    # u = S v / a makes users with identical rows bitwise identical
    live = alpha > ZERO_SINGULAR
    U[:, live] = S.matmat(V[:, live]) / alpha[live]

    # deterministic orientation: largest-magnitude entry of each right vector positive
    flip = np.sign(V[np.abs(V).argmax(axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    return CaDecomposition(
        row_masses=S.row_masses,
        col_masses=S.col_masses,
        singular_values=alpha.copy(),
        left_vectors=U * flip,
        right_vectors=V * flip,
        total_inertia=S.total_inertia(),
        k=k,
        iterations=it,
    )


def msi_users(dec: CaDecomposition, convention: str = "standard") -> np.ndarray:
    """Raw (un-normalised) user scores on the first CA dimension.

    ``standard`` gives the standard row coordinates ``D_r^{-1/2} u_1``;
    ``paper_literal`` gives ``D_r^{1/2} u_1``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if dec.k < 1:
        raise ValueError("decomposition has no retained dimension")
    if dec.singular_values[0] <= ZERO_SINGULAR:
        raise NumericalError("no leading dimension: table is independent")
    power = -0.5 if convention == "standard" else 0.5
    return dec.row_masses**power * dec.left_vectors[:, 0]


@dataclass(frozen=True, eq=False)
class MsiScores:
    """Normalised user MSI and share-weighted outlet MSI, aligned with the counts' id lists."""

    user_ids: list[str]
    user_values: np.ndarray
    outlet_ids: list[str]
    outlet_values: np.ndarray
    sign_reference: str

    @property
    def user_msi(self) -> dict[str, float]:
        return dict(zip(self.user_ids, self.user_values.tolist()))

    @property
    def outlet_msi(self) -> dict[str, float]:
        return dict(zip(self.outlet_ids, self.outlet_values.tolist()))


def _outlet_means(user_values: np.ndarray, counts: BipartiteCounts) -> np.ndarray:
    return (counts.counts.T @ user_values) / counts.col_sums


def msi_outlets(user_msi: MsiScores | np.ndarray, counts: BipartiteCounts) -> dict[str, float]:
    """Outlet MSI: share-count-weighted mean of the MSI of the users sharing it."""
    values = user_msi.user_values if isinstance(user_msi, MsiScores) else np.asarray(user_msi, dtype=float)
    if values.shape != (counts.shape[0],):
        raise ValueError(f"expected {counts.shape[0]} user scores, got shape {values.shape}")
    return dict(zip(counts.outlet_ids, _outlet_means(values, counts).tolist()))


def default_sign_reference(counts: BipartiteCounts) -> str:
    """Outlet with the largest column mass, ties broken by id."""
    col = counts.col_sums
    best = col.max()
    return min(oid for oid, n in zip(counts.outlet_ids, col) if n == best)


def normalize_and_orient(
    raw: np.ndarray, counts: BipartiteCounts, sign_reference: str | None = None
) -> MsiScores:
    """Standardise raw scores (zero mean, unit population std) and fix the sign.

    The global sign is chosen so that the outlet MSI of ``sign_reference``
    (default: :func:`default_sign_reference`) is positive.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (counts.shape[0],):
        raise ValueError(f"expected {counts.shape[0]} raw scores, got shape {raw.shape}")
    std = raw.std()
    if not std > 0 or np.ptp(raw) == 0:
        raise NumericalError("cannot normalise MSI: all raw scores are identical")
    z = (raw - raw.mean()) / std
    if sign_reference is None:
        sign_reference = default_sign_reference(counts)
    elif sign_reference not in counts.outlet_index:
        raise DataError(f"sign reference outlet {sign_reference!r} is not in the count matrix")
    outlets = _outlet_means(z, counts)
    ref = outlets[counts.outlet_index[sign_reference]]
    if ref < 0:
        z, outlets = -z, -outlets
    elif ref == 0:
        log.warning("outlet %s has MSI exactly 0; sign left unoriented", sign_reference)
    return MsiScores(list(counts.user_ids), z, list(counts.outlet_ids), outlets, sign_reference)


def compute_msi(
    counts: BipartiteCounts,
    convention: str = "standard",
    sign_reference: str | None = None,
    k: int = 1,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 0,
) -> tuple[MsiScores, CaDecomposition]:
    """Run the full chain counts -> residuals -> SVD -> normalised, oriented MSI."""
    if min(counts.shape) < 2:
        raise NumericalError(f"correspondence analysis needs at least a 2x2 table, got {counts.shape}")
    S = standardized_residuals(counts)
    dec = truncated_svd(S, k=k, tol=tol, max_iter=max_iter, seed=seed)
    scores = normalize_and_orient(msi_users(dec, convention), counts, sign_reference)
    return scores, dec
