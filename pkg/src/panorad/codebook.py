"""Dictionary learning, locality-constrained encoding, and pyramid pooling.

Two k-means drivers share every deterministic choice (seeded k-means++
init, mean updates, farthest-point repair of empty clusters, relative
inertia stopping rule): a plain alternating-pass reference and a
triangle-inequality-accelerated variant that must reproduce the reference
assignments exactly while evaluating fewer point-center distances. Both
report an evaluation counter so the speedup is checkable.

Distances are always computed as ``((a - b) ** 2).sum(-1)`` in float64 so
the two drivers agree bit-for-bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError


@dataclass(frozen=True)
class Codebook:
    """Learned dictionary: ``m`` centers of width ``dim``, all distinct."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ConfigError(f"codebook needs a (m>=2, dim) matrix, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise NumericError("codebook centers contain non-finite values")
        if np.unique(c, axis=0).shape[0] != c.shape[0]:
            raise DataError("codebook contains duplicate centers")
        object.__setattr__(self, "centers", c)

    @property
    def m(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]


@dataclass(frozen=True)
class KMeansConfig:
    m: int
    max_iter: int = 100
    tol: float = 1e-4
    seed: int = 0
    init: str = "kmeanspp"

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError(f"m must be at least 2, got {self.m}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if not (np.isfinite(self.tol) and self.tol >= 0):
            raise ConfigError("tol must be a non-negative finite number")
        if self.init != "kmeanspp":
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class LlcConfig:
    knn: int = 5
    beta: float = 1e-4

    def __post_init__(self):
        if self.knn < 1:
            raise ConfigError(f"knn must be at least 1, got {self.knn}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError("beta must be positive")


@dataclass(frozen=True)
class PyramidConfig:
    levels: int = 2

    def __post_init__(self):
        if not 0 <= self.levels <= 4:
            raise ConfigError(f"levels must be in [0, 4], got {self.levels}")


@dataclass(frozen=True)
class SparseCode:
    """Paired codeword ids and coefficients; coefficients sum to 1."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise DataError("indices and values must pair up")
        if idx.size == 0:
            raise DataError("empty code")
        if abs(val.sum() - 1.0) > 1e-6:
            raise NumericError(f"code coefficients sum to {val.sum()}, expected 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def dense(self, m):
        out = np.zeros(m, dtype=np.float64)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class KMeansResult:
    codebook: Codebook
    assignments: np.ndarray
    inertia: float
    iterations: int
    distance_evals: int
    history: tuple = ()  # inertia after each assignment pass, first included


def _pair_sq_dists(x, centers):
    """Full (n, m) squared-distance table, chunked to bound memory."""
    n, d = x.shape
    m = centers.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    step = max(1, (1 << 24) // max(1, m * d))
    for s in range(0, n, step):
        diff = x[s:s + step, None, :] - centers[None, :, :]
        out[s:s + step] = (diff * diff).sum(axis=2)
    return out


def _kmeanspp(x, m, rng):
    """Seeded k-means++ seeding; uses n*m distance evaluations."""
    n = x.shape[0]
    centers = np.empty((m, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    diff = x - centers[0]
    d2 = (diff * diff).sum(axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total <= 0:
            raise DataError("degenerate data: fewer distinct rows than clusters")
        centers[j] = x[rng.choice(n, p=d2 / total)]
        diff = x - centers[j]
        d2 = np.minimum(d2, (diff * diff).sum(axis=1))
    return centers


def _update_centers(x, assign, centers, d2):
    """Mean update; empty clusters re-seed to the farthest points."""
    m = centers.shape[0]
    counts = np.bincount(assign, minlength=m).astype(np.float64)
    sums = np.empty_like(centers)
    for j in range(x.shape[1]):
        sums[:, j] = np.bincount(assign, weights=x[:, j], minlength=m)
    new = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], centers)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        order = np.argsort(-d2, kind="stable")
        new[empty] = x[order[: empty.size]]
    return new


def _converged(prev, cur, tol):
    if cur == 0.0 or prev == 0.0:
        return True
    return (prev - cur) <= tol * prev


def _check_input(x, cfg):
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim != 2 or x.shape[0] < 1:
        raise DataError(f"expected (n, dim) sample matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")
    if np.unique(x, axis=0).shape[0] < cfg.m:
        raise DataError(f"degenerate data: fewer than m={cfg.m} distinct rows")
    return x


def kmeans_lloyd(x, cfg: KMeansConfig) -> KMeansResult:
    """Alternating assign/update reference clustering."""
    x = _check_input(x, cfg)
    n, m = x.shape[0], cfg.m
    rng = np.random.default_rng(cfg.seed)
    centers = _kmeanspp(x, m, rng)
    evals = n * m

    table = _pair_sq_dists(x, centers)
    evals += n * m
    assign = np.argmin(table, axis=1)
    d2 = table[np.arange(n), assign]
    inertia = float(d2.sum())
    history = [inertia]
    iters = 0
    while iters < cfg.max_iter:
        centers = _update_centers(x, assign, centers, d2)
        table = _pair_sq_dists(x, centers)
        evals += n * m
        assign = np.argmin(table, axis=1)
        d2 = table[np.arange(n), assign]
        new_inertia = float(d2.sum())
        history.append(new_inertia)
        iters += 1
        done = _converged(inertia, new_inertia, cfg.tol)
        inertia = new_inertia
        if done:
            break
    return KMeansResult(Codebook(centers), assign, inertia, iters, evals, tuple(history))


def kmeans_elkan(x, cfg: KMeansConfig) -> KMeansResult:
    """Triangle-inequality-accelerated clustering.

    Maintains an upper bound on each point's distance to its center and
    lower bounds to every other center; a candidate center is measured only
    when the bounds cannot rule it out. Assignments, centers, and inertia
    match :func:`kmeans_lloyd` exactly because every measured distance uses
    the same kernel and every tie resolves to the lowest center index.
    """
    x = _check_input(x, cfg)
    n, m = x.shape[0], cfg.m
    rng = np.random.default_rng(cfg.seed)
    centers = _kmeanspp(x, m, rng)
    evals = n * m

    table = _pair_sq_dists(x, centers)
    evals += n * m
    assign = np.argmin(table, axis=1)
    rows = np.arange(n)
    d2 = table[rows, assign]
    lower = np.sqrt(table)
    inertia = float(d2.sum())
    history = [inertia]
    iters = 0
    while iters < cfg.max_iter:
        new_centers = _update_centers(x, assign, centers, d2)
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1))
        lower = np.maximum(lower - shift[None, :], 0.0)
        centers = new_centers

        cdiff = centers[:, None, :] - centers[None, :, :]
        cc = np.sqrt((cdiff * cdiff).sum(axis=2))
        np.fill_diagonal(cc, np.inf)
        radius = 0.5 * cc.min(axis=1)

        # Tighten the upper bound exactly for every point (n evaluations);
        # this also makes the reported inertia exact.
        diff = x - centers[assign]
        d2 = (diff * diff).sum(axis=1)
        evals += n
        upper = np.sqrt(d2)
        lower[rows, assign] = upper

        active = np.flatnonzero(upper >= radius[assign])
        if active.size:
            ua = upper[active][:, None]
            cand = (lower[active] <= ua) & (0.5 * cc[assign[active]] <= ua)
            cand[np.arange(active.size), assign[active]] = False
            ai, cj = np.nonzero(cand)
            if ai.size:
                pdiff = x[active[ai]] - centers[cj]
                pd2 = (pdiff * pdiff).sum(axis=1)
                evals += ai.size
                lower[active[ai], cj] = np.sqrt(pd2)
                best = np.full((active.size, m), np.inf)
                best[ai, cj] = pd2
                best[np.arange(active.size), assign[active]] = d2[active]
                new_a = np.argmin(best, axis=1)
                new_d2 = best[np.arange(active.size), new_a]
                assign[active] = new_a
                d2[active] = new_d2
                upper[active] = np.sqrt(new_d2)

        new_inertia = float(d2.sum())
        history.append(new_inertia)
        iters += 1
        done = _converged(inertia, new_inertia, cfg.tol)
        inertia = new_inertia
        if done:
            break
    return KMeansResult(Codebook(centers), assign, inertia, iters, evals, tuple(history))


def sample_descriptors(sets, n, seed):
    """Uniform sample of descriptor rows across sets, without replacement."""
    mats = [s.vectors for s in sets if len(s)]
    if not mats:
        raise DataError("no descriptors to sample")
    dims = {m.shape[1] for m in mats}
    if len(dims) != 1:
        raise DataError(f"descriptor sets disagree on dim: {sorted(dims)}")
    stack = np.concatenate(mats, axis=0).astype(np.float64)
    total = stack.shape[0]
    rng = np.random.default_rng(seed)
    if n >= total:
        return stack[rng.permutation(total)]
    return stack[rng.choice(total, size=n, replace=False)]


def llc_encode(x, cb: Codebook, cfg: LlcConfig) -> SparseCode:
    """Locality-constrained encoding against the ``knn`` nearest centers.

    Solves the shift-invariant least-squares system over the neighborhood
    (covariance regularized by ``beta * trace``) and normalizes the
    coefficients to sum to one.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != cb.dim:
        raise DataError(f"vector dim {x.shape[0]} != codebook dim {cb.dim}")
    if cfg.knn > cb.m:
        raise ConfigError(f"knn={cfg.knn} exceeds codebook size m={cb.m}")
    diff = cb.centers - x
    d2 = (diff * diff).sum(axis=1)
    idx = np.argsort(d2, kind="stable")[: cfg.knn]
    if d2[idx[0]] == 0.0:
        # A coincident codeword takes the whole unit weight: any other
        # split pays reconstruction or locality cost, and the shifted
        # system below is singular at distance zero.
        return SparseCode(idx[:1], np.ones(1))
    z = cb.centers[idx] - x
    cov = z @ z.T
    tr = np.trace(cov)
    if tr > 0:
        cov = cov + cfg.beta * tr * np.eye(cfg.knn)
    else:
        cov = np.eye(cfg.knn)
    try:
        c = np.linalg.solve(cov, np.ones(cfg.knn))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"LLC system is singular: {exc}") from exc
    return SparseCode(idx, c / c.sum())


def feature_dim(m, pyr: PyramidConfig):
    """Pooled feature length: m centers times the total pyramid cell count."""
    return m * sum(4 ** level for level in range(pyr.levels + 1))


def pool_pyramid(codes, cb_m, pyr: PyramidConfig):
    """Spatial-pyramid max pooling of positioned sparse codes.

    Every level ``l`` splits the unit square into ``2^l x 2^l`` cells; each
    cell takes the per-codeword maximum over the dense expansions of the
    codes whose center falls inside it (so a codeword selected by no code
    in an occupied cell pools to at most 0, and empty cells pool to 0).
    Blocks concatenate coarse to fine, cells row-major, and the final
    vector is L2-normalized (all-zero stays zero).
    """
    codes = list(codes)
    if codes:
        cx = np.array([c[0] for c in codes], dtype=np.float64)
        cy = np.array([c[1] for c in codes], dtype=np.float64)
        if cx.min() < 0 or cx.max() >= 1 or cy.min() < 0 or cy.max() >= 1:
            raise DataError("code centers must lie in [0, 1)^2")
        flat_idx = []
        flat_val = []
        for _, _, code in codes:
            flat_idx.append(code.indices)
            flat_val.append(code.values)
        lens = np.array([len(c[2].indices) for c in codes])
        flat_idx = np.concatenate(flat_idx)
        flat_val = np.concatenate(flat_val)

    blocks = []
    for level in range(pyr.levels + 1):
        g = 1 << level
        ncells = g * g
        pooled = np.zeros((ncells, cb_m), dtype=np.float64)
        if codes:
            cells = np.minimum((cy * g).astype(np.intp), g - 1) * g + np.minimum(
                (cx * g).astype(np.intp), g - 1
            )
            per_cell = np.bincount(cells, minlength=ncells)
            code_cells = np.repeat(cells, lens)
            key = code_cells * cb_m + flat_idx
            peak = np.full(ncells * cb_m, -np.inf)
            np.maximum.at(peak, key, flat_val)
            hits = np.bincount(key, minlength=ncells * cb_m)
            peak = peak.reshape(ncells, cb_m)
            hits = hits.reshape(ncells, cb_m)
            # A codeword missing from some code in the cell competes with
            # that code's implicit 0.
            pooled = np.where(hits < per_cell[:, None], np.maximum(peak, 0.0), peak)
            pooled[per_cell == 0] = 0.0
        blocks.append(pooled.reshape(-1))
    vec = np.concatenate(blocks)
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec = vec / norm
    return vec
