"""Geometric diagnostics of a latent point cloud.

Intrinsic dimension (nearest-neighbor MLE and PCA variance thresholds), local
flatness from neighborhood singular values, and the correlation between latent
Euclidean distances and Bures angles of the underlying states.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, PreconditionError
from .logging_config import get_logger
from .models import (
    CorrelationReport,
    CorrelationStrength,
    CurvatureReport,
    DimReport,
    DistanceBin,
    GeometryReport,
)
from .qcore import fidelity

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

logger = get_logger(__name__)

DEFAULT_ALPHAS = (0.95, 0.99)
DUPLICATE_JITTER = 1e-12
P_VALUE_FLOOR = 1e-300

# Latent distance ranges of the interpretability table.
DISTANCE_BINS: tuple[tuple[float, float, str], ...] = (
    (0.0, 0.3, "Nearly identical"),
    (0.3, 0.6, "Highly similar"),
    (0.6, 0.9, "Moderately similar"),
    (0.9, 1.2, "Distinguishable"),
    (1.2, float("inf"), "Highly distinguishable"),
)


def _as_points(z: ArrayLike) -> NDArray[np.float64]:
    pts = np.asarray(z, dtype=np.float64)
    if pts.ndim != 2:
        raise PreconditionError(f"Expected an (N, D) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise PreconditionError("Point array has non-finite entries")
    return pts


def nearest_neighbors(
    z: NDArray[np.float64], k: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Sorted distances and indices of the k nearest other points of every point.

    Brute force; ties are broken by index order.
    """
    dist = cdist(z, z)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(dist, order, axis=1), order.astype(np.int64)


def _jitter_duplicates(z: NDArray[np.float64]) -> NDArray[np.float64]:
    _, first, counts = np.unique(z, axis=0, return_index=True, return_counts=True)
    if np.all(counts == 1):
        return z
    out = z.copy()
    keep = np.zeros(len(z), dtype=bool)
    keep[first] = True
    scale = DUPLICATE_JITTER * max(float(np.max(np.abs(z))), 1.0)
    rng = np.random.Generator(np.random.Philox(0))
    dupes = np.flatnonzero(~keep)
    out[dupes] += scale * rng.standard_normal((dupes.size, z.shape[1]))
    logger.debug(f"Jittered {dupes.size} duplicate points for the MLE estimate")
    return out


def mle_dimension(z: ArrayLike, k: int = 15) -> tuple[float, float, NDArray[np.float64]]:
    """Nearest-neighbor maximum-likelihood intrinsic dimension.

    Each point gets d̂_i = −k / Σ_{j=1..k} log(r_ij / r_ik), where the j = k term
    is zero. Points with a zero neighbor distance (after jittering exact
    duplicates) or with all k distances equal are skipped and reported as NaN.

    Args:
        z: Points, shape (N, D)
        k: Neighbors per point, 2 ≤ k < N

    Returns:
        Tuple of (mean, standard deviation, per-point estimates)

    Raises:
        PreconditionError: If k is out of range
        DegenerateInputError: If every point is skipped
    """
    pts = _as_points(z)
    n = pts.shape[0]
    if not 2 <= k < n:
        raise PreconditionError(f"MLE needs 2 <= k < N, got k={k}, N={n}")

    dist, _ = nearest_neighbors(_jitter_duplicates(pts), k)
    estimates = np.full(n, np.nan)
    for i in range(n):
        r = dist[i]
        if r[0] <= 0:
            continue
        log_sum = float(np.sum(np.log(r / r[-1])))
        if log_sum < 0:
            estimates[i] = -k / log_sum

    valid = estimates[np.isfinite(estimates)]
    skipped = n - valid.size
    if skipped:
        logger.warning(f"MLE dimension skipped {skipped} of {n} points")
    if valid.size == 0:
        raise DegenerateInputError("No point has usable neighbor distances")
    return float(np.mean(valid)), float(np.std(valid)), estimates


def pca_spectrum(z: ArrayLike) -> NDArray[np.float64]:
    """Eigenvalues of the (N − 1)-normalized covariance, descending and clipped at 0.

    Raises:
        PreconditionError: If N < 2
        DegenerateInputError: If the data has zero total variance
    """
    pts = _as_points(z)
    if pts.shape[0] < 2:
        raise PreconditionError(f"PCA needs at least two points, got {pts.shape[0]}")
    cov = np.atleast_2d(np.cov(pts, rowvar=False, ddof=1))
    eig = np.clip(np.linalg.eigvalsh(cov)[::-1], 0.0, None)
    if float(np.sum(eig)) <= 0:
        raise DegenerateInputError("Latent points have zero variance")
    return eig


def pca_dimension(
    z: ArrayLike, alphas: Sequence[float] = DEFAULT_ALPHAS
) -> tuple[NDArray[np.float64], dict[float, int]]:
    """Smallest number of principal components explaining each variance share α.

    Returns:
        Tuple of (descending spectrum, mapping α → component count)
    """
    spectrum = pca_spectrum(z)
    cumulative = np.cumsum(spectrum) / np.sum(spectrum)
    dims = {}
    for alpha in alphas:
        if not 0 < alpha <= 1:
            raise PreconditionError(f"Variance share must lie in (0, 1], got {alpha}")
        dims[alpha] = int(np.searchsorted(cumulative, alpha - 1e-12) + 1)
    return spectrum, dims


def dimension_report(z: ArrayLike, k_mle: int = 15) -> DimReport:
    """MLE and PCA dimension estimates together."""
    mean, std, estimates = mle_dimension(z, k_mle)
    spectrum, dims = pca_dimension(z, DEFAULT_ALPHAS)
    return DimReport(
        mle_mean=mean,
        mle_std=std,
        k_mle=k_mle,
        mle_skipped=int(np.sum(~np.isfinite(estimates))),
        pca_spectrum=spectrum,
        explained_ratio=spectrum / np.sum(spectrum),
        d_pca_95=dims[0.95],
        d_pca_99=dims[0.99],
        mle_estimates=estimates,
    )


def local_curvature(z: ArrayLike, k: int = 25) -> CurvatureReport:
    """Flatness ratio κ_i = σ_min / σ_max of each k-neighborhood seen from its point.

    The singular values are those of the D×k matrix of offsets z_j − z_i to the
    k nearest neighbors, so min(D, k) values enter the ratio. Neighborhoods whose
    points all coincide with z_i get κ = 0 and are counted as flagged.
    """
    pts = _as_points(z)
    n = pts.shape[0]
    if not 2 <= k < n:
        raise PreconditionError(f"Curvature needs 2 <= k < N, got k={k}, N={n}")

    _, neighbors = nearest_neighbors(pts, k)
    kappas = np.zeros(n)
    flagged = 0
    for i in range(n):
        offsets = pts[neighbors[i]] - pts[i]
        sv = np.linalg.svd(offsets.T, compute_uv=False)
        if sv[0] <= 0:
            flagged += 1
            continue
        kappas[i] = sv[-1] / sv[0]

    if flagged:
        logger.warning(f"{flagged} neighborhoods collapsed to a point; kappa set to 0")
    q1, median, q3 = np.percentile(kappas, [25, 50, 75])
    return CurvatureReport(
        kappas=kappas,
        k_curv=k,
        mean=float(np.mean(kappas)),
        std=float(np.std(kappas)),
        median=float(median),
        minimum=float(np.min(kappas)),
        maximum=float(np.max(kappas)),
        q1=float(q1),
        q3=float(q3),
        flagged=flagged,
    )


def classify_threshold(r: float) -> CorrelationStrength:
    """Interpretation band of a Pearson coefficient."""
    return CorrelationStrength.from_pearson(r)


def correlation_statistics(
    d_latent: ArrayLike,
    d_bures: ArrayLike,
    fidelities: ArrayLike | None = None,
    pairs: list[tuple[int, int]] | None = None,
) -> CorrelationReport:
    """Pearson, Spearman and least-squares fit d_L = a·d_B + b.

    Zero variance in either list leaves the statistics undefined: the numeric
    fields are NaN and ``error`` explains why.
    """
    d_l = np.asarray(d_latent, dtype=np.float64).reshape(-1)
    d_b = np.asarray(d_bures, dtype=np.float64).reshape(-1)
    if d_l.size != d_b.size or d_l.size < 2:
        raise PreconditionError(
            f"Need two equal lists of >= 2 distances, got {d_l.size}/{d_b.size}"
        )
    fids = np.zeros(0) if fidelities is None else np.asarray(fidelities, dtype=np.float64)
    pair_list = pairs or []

    degenerate = [name for name, v in (("latent", d_l), ("Bures", d_b)) if np.ptp(v) == 0]
    if degenerate:
        message = f"Correlation undefined: zero variance in {' and '.join(degenerate)} distances"
        logger.warning(message)
        nan = float("nan")
        return CorrelationReport(
            n_pairs=d_l.size,
            pearson_r=nan,
            pearson_p=nan,
            spearman_rho=nan,
            spearman_p=nan,
            r_squared=nan,
            slope=nan,
            intercept=nan,
            rmse=nan,
            mae=nan,
            d_latent=d_l,
            d_bures=d_b,
            fidelities=fids,
            pairs=pair_list,
            error=message,
        )

    pearson = stats.pearsonr(d_b, d_l)
    spearman = stats.spearmanr(d_b, d_l)
    fit = stats.linregress(d_b, d_l)
    residuals = d_l - (fit.slope * d_b + fit.intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((d_l - d_l.mean()) ** 2))
    return CorrelationReport(
        n_pairs=d_l.size,
        pearson_r=float(pearson.statistic),
        pearson_p=max(float(pearson.pvalue), P_VALUE_FLOOR),
        spearman_rho=float(spearman.statistic),
        spearman_p=max(float(spearman.pvalue), P_VALUE_FLOOR),
        r_squared=1.0 - ss_res / ss_tot,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        rmse=float(np.sqrt(np.mean(residuals**2))),
        mae=float(np.mean(np.abs(residuals))),
        d_latent=d_l,
        d_bures=d_b,
        fidelities=fids,
        pairs=pair_list,
    )


def sample_index_pairs(n: int, n_pairs: int, rng: np.random.Generator) -> NDArray[np.int64]:
    """min(n_pairs, C(n, 2)) distinct pairs (i < j), uniformly without replacement."""
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    rows, cols = np.triu_indices(n, k=1)
    chosen = rng.choice(rows.size, size=min(n_pairs, rows.size), replace=False)
    return np.stack([rows[chosen], cols[chosen]], axis=1).astype(np.int64)


def geodesic_correlation(
    z: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    n_pairs: int,
    rng: np.random.Generator,
) -> CorrelationReport:
    """Correlate latent distances with Bures angles over random state pairs.

    Args:
        z: Latent vectors, shape (N, d_z)
        rhos: States matching the rows of ``z``
        n_pairs: Pairs to sample, capped at C(N, 2)
        rng: Generator for pair sampling
    """
    pts = _as_points(z)
    if pts.shape[0] != len(rhos) or pts.shape[0] < 2:
        raise PreconditionError(f"Need >= 2 matched latents and states, got {pts.shape[0]}")
    if n_pairs < 2:
        raise PreconditionError(f"n_pairs must be at least 2, got {n_pairs}")

    index = sample_index_pairs(pts.shape[0], n_pairs, rng)
    d_l = np.linalg.norm(pts[index[:, 0]] - pts[index[:, 1]], axis=1)
    fids = np.array([fidelity(rhos[i], rhos[j]) for i, j in index])
    d_b = np.arccos(np.clip(np.sqrt(fids), 0.0, 1.0))
    pairs = [(int(i), int(j)) for i, j in index]
    return correlation_statistics(d_l, d_b, fidelities=fids, pairs=pairs)


def distance_fidelity_table(
    d_latent: ArrayLike, d_bures: ArrayLike, fidelities: ArrayLike
) -> list[DistanceBin]:
    """Mean Bures angle and fidelity of the pairs in each latent-distance range."""
    d_l = np.asarray(d_latent, dtype=np.float64)
    d_b = np.asarray(d_bures, dtype=np.float64)
    fids = np.asarray(fidelities, dtype=np.float64)
    table = []
    for lower, upper, label in DISTANCE_BINS:
        mask = (d_l >= lower) & (d_l < upper)
        count = int(np.sum(mask))
        table.append(
            DistanceBin(
                lower=lower,
                upper=upper,
                label=label,
                count=count,
                mean_bures=float(np.mean(d_b[mask])) if count else float("nan"),
                mean_fidelity=float(np.mean(fids[mask])) if count else float("nan"),
            )
        )
    return table


def pca_projection(z: ArrayLike, components: int = 2) -> NDArray[np.float64]:
    """Coordinates of the centered points on the leading principal axes.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    pts = _as_points(z)
    centered = pts - pts.mean(axis=0)
    cov = np.atleast_2d(np.cov(pts, rowvar=False, ddof=1))
    _, vecs = np.linalg.eigh(cov)
    axes = vecs[:, ::-1][:, :components]
    signs = np.sign(axes[np.argmax(np.abs(axes), axis=0), np.arange(axes.shape[1])])
    signs[signs == 0] = 1.0
    return np.asarray(centered @ (axes * signs), dtype=np.float64)


def analyze_latent_space(
    z: ArrayLike,
    rhos: Sequence[NDArray[np.complex128]],
    rng: np.random.Generator,
    k_mle: int = 15,
    k_curv: int = 25,
    n_pairs: int = 500,
) -> GeometryReport:
    """Run every diagnostic on one latent cloud."""
    pts = _as_points(z)
    correlation = geodesic_correlation(pts, rhos, n_pairs, rng)
    return GeometryReport(
        correlation=correlation,
        dimensions=dimension_report(pts, k_mle),
        curvature=local_curvature(pts, k_curv),
        distance_table=distance_fidelity_table(
            correlation.d_latent, correlation.d_bures, correlation.fidelities
        ),
        projection=pca_projection(pts),
    )
