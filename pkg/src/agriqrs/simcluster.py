"""Query similarity and clustering.

Pairwise query similarity blends two views: cosine over contextual
embeddings (weight ``lam``) and Jaccard overlap of lexical token sets
(weight ``1 - lam``). Negative cosines are clamped to zero before mixing
so every entry lands in [0, 1].

Clustering is a single-pass threshold sweep: scanning indices in order,
each unvisited index seeds a cluster and absorbs every later unvisited
index whose similarity to the seed reaches the threshold. Clusters
smaller than ``min_size`` are discarded and their members recorded as
dropped. The result depends on index order by design; chains where
a~b and b~c but a!~c split after [a, b].

A K-Means baseline (same vector space, Euclidean metric) and standard
internal quality metrics are included for comparison runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, DataError

_BLOCK = 1024


@dataclass(frozen=True)
class ClusterParams:
    lam: float = 0.8
    thresh: float = 0.95
    min_size: int = 2

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lam must be in [0, 1], got {self.lam}")
        if not 0.0 < self.thresh <= 1.0:
            raise ConfigurationError(f"thresh must be in (0, 1], got {self.thresh}")
        if self.min_size < 1:
            raise ConfigurationError(f"min_size must be >= 1, got {self.min_size}")

    def to_dict(self) -> dict:
        return {"lam": self.lam, "thresh": self.thresh, "min_size": self.min_size}

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterParams":
        return cls(**{k: data[k] for k in ("lam", "thresh", "min_size") if k in data})


@dataclass
class ClusterSet:
    """Clusters as index lists plus the indices dropped by the size floor."""

    clusters: list[list[int]]
    dropped: list[int]
    n_items: int

    def __len__(self) -> int:
        return len(self.clusters)

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]

    def labels(self) -> np.ndarray:
        """Cluster id per item index; dropped items get -1."""
        out = np.full(self.n_items, -1, dtype=np.int64)
        for cid, members in enumerate(self.clusters):
            out[members] = cid
        return out


def jaccard_similarity(a, b) -> float:
    """|A and B| / |A or B|; two empty sets count as identical (1.0)."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def _normalize_rows(embeddings: np.ndarray) -> np.ndarray:
    emb = np.asarray(embeddings, dtype=np.float32)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return emb / safe


def _token_incidence(token_sets) -> tuple[sparse.csr_matrix, np.ndarray]:
    vocab: dict[str, int] = {}
    indptr = [0]
    indices: list[int] = []
    for toks in token_sets:
        for tok in set(toks):
            indices.append(vocab.setdefault(tok, len(vocab)))
        indptr.append(len(indices))
    x = sparse.csr_matrix(
        (np.ones(len(indices), dtype=np.float32), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(token_sets), max(len(vocab), 1)),
    )
    sizes = np.diff(indptr).astype(np.float32)
    return x, sizes


def query_similarity_matrix(
    embeddings: np.ndarray,
    token_sets,
    params: ClusterParams | None = None,
) -> np.ndarray:
    """Symmetric [0, 1] similarity matrix with unit diagonal.

    Entry (i, j) is lam * max(cosine, 0) + (1 - lam) * jaccard. Built in
    row blocks so the only O(n^2) allocation is the result itself.
    """
    params = params or ClusterParams()
    emb = _normalize_rows(embeddings)
    n = emb.shape[0]
    if len(token_sets) != n:
        raise DataError(
            f"{n} embeddings but {len(token_sets)} token sets; views must align"
        )
    x, sizes = _token_incidence(token_sets)
    lam = np.float32(params.lam)
    out = np.empty((n, n), dtype=np.float32)
    for r0 in range(0, n, _BLOCK):
        r1 = min(r0 + _BLOCK, n)
        for c0 in range(r0, n, _BLOCK):
            c1 = min(c0 + _BLOCK, n)
            cos = emb[r0:r1] @ emb[c0:c1].T
            np.clip(cos, 0.0, 1.0, out=cos)
            inter = np.asarray((x[r0:r1] @ x[c0:c1].T).todense(), dtype=np.float32)
            union = sizes[r0:r1, None] + sizes[None, c0:c1] - inter
            jac = np.divide(inter, union, out=np.ones_like(inter), where=union > 0.0)
            block = lam * cos + (np.float32(1.0) - lam) * jac
            np.clip(block, 0.0, 1.0, out=block)
            out[r0:r1, c0:c1] = block
            if c0 > r0:
                out[c0:c1, r0:r1] = block.T
    np.fill_diagonal(out, 1.0)
    return out


def _check_similarity_input(sim: np.ndarray) -> np.ndarray:
    sim = np.asarray(sim)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise DataError(f"similarity matrix must be square, got shape {sim.shape}")
    n = sim.shape[0]
    if n == 0:
        raise DataError("similarity matrix is empty")
    # full validation is O(n^2); check small matrices exhaustively and
    # spot-check big ones so clustering stays O(n^2) overall
    if n * n <= 256:
        sample, mirror = sim, sim.T
    else:
        rng = np.random.default_rng(0)
        ii = rng.integers(0, n, size=256)
        jj = rng.integers(0, n, size=256)
        sample, mirror = sim[ii, jj], sim[jj, ii]
    if not np.array_equal(sample, mirror):
        raise DataError("similarity matrix is not symmetric")
    if np.any(sample < 0.0) or np.any(sample > 1.0):
        raise DataError("similarity values must lie in [0, 1]")
    return sim


def threshold_cluster(sim: np.ndarray, params: ClusterParams | None = None) -> ClusterSet:
    """Single-pass threshold clustering over a precomputed similarity matrix.

    Index i seeds a cluster if still unvisited; every unvisited j > i with
    sim[i, j] >= thresh joins and is marked visited. Clusters below
    min_size are dropped member-by-member in seed order.
    """
    params = params or ClusterParams()
    sim = _check_similarity_input(sim)
    n = sim.shape[0]
    thresh = params.thresh
    visited = np.zeros(n, dtype=bool)
    clusters: list[list[int]] = []
    dropped: list[int] = []
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        # every j < i is already visited, so this mask only admits j > i
        mask = (sim[i] >= thresh) & ~visited
        members = np.flatnonzero(mask)
        visited[members] = True
        cluster = [i, *members.tolist()]
        if len(cluster) >= params.min_size:
            clusters.append(cluster)
        else:
            dropped.extend(cluster)
    return ClusterSet(clusters=clusters, dropped=dropped, n_items=n)


# ---------------------------------------------------------------------------
# K-Means baseline
# ---------------------------------------------------------------------------


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.maximum(d, 0.0)


def kmeans_baseline(
    vectors: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
) -> ClusterSet:
    """Lloyd iterations with seeded kmeans++ init, Euclidean metric.

    Clusters that empty out are reseeded from the point farthest from its
    assigned center. Every point is assigned; nothing is dropped.
    """
    vecs = np.asarray(vectors, dtype=np.float64)
    n = vecs.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, vecs.shape[1]), dtype=np.float64)
    centers[0] = vecs[rng.integers(n)]
    closest = _pairwise_sq_dists(vecs, centers[:1])[:, 0]
    for c in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:
            centers[c] = vecs[rng.integers(n)]
        else:
            centers[c] = vecs[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, _pairwise_sq_dists(vecs, centers[c : c + 1])[:, 0])

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        dists = _pairwise_sq_dists(vecs, centers)
        new_labels = np.argmin(dists, axis=1)
        own = dists[np.arange(n), new_labels]
        for c in range(k):
            members = new_labels == c
            if np.any(members):
                centers[c] = vecs[members].mean(axis=0)
            else:
                far = int(np.argmax(own))
                centers[c] = vecs[far]
                new_labels[far] = c
                own[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    clusters = [np.flatnonzero(labels == c).tolist() for c in range(k)]
    return ClusterSet(clusters=clusters, dropped=[], n_items=n)


# ---------------------------------------------------------------------------
# Internal quality metrics (Euclidean)
# ---------------------------------------------------------------------------


def _gather_members(vectors: np.ndarray, clusters: list[list[int]]):
    if len(clusters) < 2:
        raise DataError(f"need at least 2 clusters, got {len(clusters)}")
    if any(len(c) == 0 for c in clusters):
        raise DataError("empty cluster")
    vecs = np.asarray(vectors, dtype=np.float64)
    idx = np.concatenate([np.asarray(c, dtype=np.int64) for c in clusters])
    labels = np.concatenate(
        [np.full(len(c), cid, dtype=np.int64) for cid, c in enumerate(clusters)]
    )
    return vecs[idx], labels


def silhouette_score(vectors: np.ndarray, clusters: list[list[int]]) -> float:
    """Mean silhouette over clustered points; singletons contribute 0,
    as does any point with zero mean distance both ways."""
    pts, labels = _gather_members(vectors, clusters)
    m = pts.shape[0]
    k = len(clusters)
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    onehot = np.zeros((m, k), dtype=np.float64)
    onehot[np.arange(m), labels] = 1.0
    scores = np.empty(m, dtype=np.float64)
    for r0 in range(0, m, _BLOCK):
        r1 = min(r0 + _BLOCK, m)
        d = np.sqrt(_pairwise_sq_dists(pts[r0:r1], pts))
        per_cluster = d @ onehot
        rows = np.arange(r0, r1)
        own_size = sizes[labels[rows]]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = per_cluster[np.arange(r1 - r0), labels[rows]] / (own_size - 1.0)
        mean_other = per_cluster / sizes[None, :]
        mean_other[np.arange(r1 - r0), labels[rows]] = np.inf
        b = np.min(mean_other, axis=1)
        s = np.zeros(r1 - r0, dtype=np.float64)
        valid = (own_size > 1.0) & (np.maximum(a, b) > 0.0)
        s[valid] = (b[valid] - a[valid]) / np.maximum(a[valid], b[valid])
        scores[r0:r1] = s
    return float(scores.mean())


def calinski_harabasz(vectors: np.ndarray, clusters: list[list[int]]) -> float:
    """Between/within dispersion ratio scaled by (N - K)/(K - 1).

    All clusters internally coincident means zero within-dispersion; that
    returns +inf rather than raising."""
    pts, labels = _gather_members(vectors, clusters)
    m = pts.shape[0]
    k = len(clusters)
    grand = pts.mean(axis=0)
    tr_b = 0.0
    tr_w = 0.0
    for c in range(k):
        members = pts[labels == c]
        centroid = members.mean(axis=0)
        tr_w += float(np.sum((members - centroid) ** 2))
        tr_b += len(members) * float(np.sum((centroid - grand) ** 2))
    if tr_w == 0.0:
        return float("inf")
    return (tr_b / tr_w) * ((m - k) / (k - 1))


def davies_bouldin(vectors: np.ndarray, clusters: list[list[int]]) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j) ratio.

    Coincident centroids of two distinct clusters make the ratio +inf;
    the sentinel propagates instead of raising."""
    pts, labels = _gather_members(vectors, clusters)
    k = len(clusters)
    centroids = np.stack([pts[labels == c].mean(axis=0) for c in range(k)])
    spread = np.array(
        [
            float(np.mean(np.linalg.norm(pts[labels == c] - centroids[c], axis=1)))
            for c in range(k)
        ]
    )
    dists = np.sqrt(_pairwise_sq_dists(centroids, centroids))
    worst = np.empty(k, dtype=np.float64)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            if dists[i, j] == 0.0:
                ratios.append(float("inf"))
            else:
                ratios.append((spread[i] + spread[j]) / dists[i, j])
        worst[i] = max(ratios)
    return float(worst.mean())


# ---------------------------------------------------------------------------
# Binary dump of a similarity matrix (debug aid)
# ---------------------------------------------------------------------------


def save_similarity_matrix(path, sim: np.ndarray) -> None:
    """Two little-endian uint32 (rows, cols) then row-major float32."""
    sim = np.ascontiguousarray(np.asarray(sim, dtype=np.float32))
    if sim.ndim != 2:
        raise DataError(f"expected a matrix, got shape {sim.shape}")
    with open(path, "wb") as fh:
        fh.write(np.asarray(sim.shape, dtype="<u4").tobytes())
        fh.write(sim.astype("<f4").tobytes())


def load_similarity_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) != 8:
            raise DataError(f"{path} is too short for a matrix header")
        rows, cols = np.frombuffer(head, dtype="<u4")
        body = fh.read()
    expected = int(rows) * int(cols) * 4
    if len(body) != expected:
        raise DataError(f"{path} holds {len(body)} payload bytes, expected {expected}")
    return np.frombuffer(body, dtype="<f4").reshape(int(rows), int(cols)).copy()


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchRow:
    method: str
    n: int
    seconds: float
    silhouette: float | None = None
    ch_index: float | None = None
    db_index: float | None = None


def benchmark_clustering(
    sizes,
    params: ClusterParams | None = None,
    seed: int = 0,
    kmeans_seed: int = 0,
) -> list[BenchRow]:
    """Time matrix construction, threshold clustering, and the K-Means
    baseline on synthetic corpora of the requested sizes.

    K-Means is size-matched: its k equals the threshold cluster count.
    Embedding time is excluded; matrix construction is its own row.
    """
    from .synth import synthetic_pipeline_inputs

    params = params or ClusterParams()
    rows: list[BenchRow] = []
    for n in sizes:
        embeddings, token_sets = synthetic_pipeline_inputs(n, seed=seed)
        t0 = time.perf_counter()
        sim = query_similarity_matrix(embeddings, token_sets, params)
        t_matrix = time.perf_counter() - t0
        rows.append(BenchRow(method="simmatrix", n=n, seconds=t_matrix))

        t0 = time.perf_counter()
        cs = threshold_cluster(sim, params)
        t_thresh = time.perf_counter() - t0
        if len(cs) >= 2:
            sil = silhouette_score(embeddings, cs.clusters)
            ch = calinski_harabasz(embeddings, cs.clusters)
            db = davies_bouldin(embeddings, cs.clusters)
        else:
            sil = ch = db = None
        rows.append(
            BenchRow("threshold", n, t_thresh, silhouette=sil, ch_index=ch, db_index=db)
        )

        k = max(len(cs), 2)
        t0 = time.perf_counter()
        km = kmeans_baseline(embeddings, k=k, seed=kmeans_seed)
        t_km = time.perf_counter() - t0
        rows.append(
            BenchRow(
                "kmeans",
                n,
                t_km,
                silhouette=silhouette_score(embeddings, km.clusters),
                ch_index=calinski_harabasz(embeddings, km.clusters),
                db_index=davies_bouldin(embeddings, km.clusters),
            )
        )
    return rows
