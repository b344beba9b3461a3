"""Level-wise second-order regression tree shared by CART, bagging and boosting.

Each level evaluates every candidate split of every frontier node at once.
Rows are kept per feature in an order that is grouped by node and sorted by
feature value inside each node, so one cumulative sum over gradients and
hessians yields the left-side statistics of all splits. A split scores

    G_L^2 / (H_L + lam) + G_R^2 / (H_R + lam) - G^2 / (H + lam)

and leaves carry the weight -G / (H + lam). With g = mean - y, h = 1 and
lam = 0 this is exactly CART's squared-error reduction.

Ties between splits (within a small relative tolerance) go to the lower
feature index and then to the lower threshold, so fitted trees do not depend
on the row order of the training data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewSamples

_SPLIT_TOL = 1e-10
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class TreeArrays:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            r = rows[inner]
            n = node[inner]
            go_left = X[r, feat[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "depth": self.depth,
        }


def grow_tree(
    X,
    g,
    h,
    *,
    max_depth: int | None = None,
    min_leaf: int = 1,
    min_child_weight: float = 0.0,
    reg_lambda: float = 0.0,
) -> TreeArrays:
    """Grow one tree on gradients ``g`` and hessians ``h``."""
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be N x D")
    n, d = X.shape
    if len(g) != n or len(h) != n:
        raise DimensionMismatch("gradient length does not match X")
    if n == 0:
        raise TooFewSamples("cannot grow a tree on zero rows")
    lam = float(reg_lambda)
    min_leaf = max(1, int(min_leaf))

    feature = np.array([-1], dtype=np.int64)
    threshold = np.array([np.nan])
    left = np.array([-1], dtype=np.int64)
    right = np.array([-1], dtype=np.int64)
    value = np.array([-g.sum() / (h.sum() + lam) if h.sum() + lam > 0 else 0.0])

    node_of = np.zeros(n, dtype=np.int64)
    orders = [np.argsort(X[:, f], kind="stable") for f in range(d)]
    energy = g * g / np.maximum(h, 1e-300)
    frontier = np.array([0])
    depth = 0

    while len(frontier) and (max_depth is None or depth < max_depth):
        m = len(frontier)
        local = np.full(len(feature), -1, dtype=np.int64)
        local[frontier] = np.arange(m)
        lid_rows = local[node_of]
        active = lid_rows >= 0
        Gn = np.bincount(lid_rows[active], g[active], minlength=m)
        Hn = np.bincount(lid_rows[active], h[active], minlength=m)
        En = np.bincount(lid_rows[active], energy[active], minlength=m)
        Cn = np.bincount(lid_rows[active], minlength=m)
        parent_score = Gn**2 / (Hn + lam) if lam > 0 else np.divide(Gn**2, Hn, out=np.zeros(m), where=Hn > 0)
        tie_tol = _TIE_TOL * (En + np.abs(parent_score)) + 1e-300

        per_feature = []
        best = np.full(m, -np.inf)
        for f in range(d):
            o = orders[f]
            lid = lid_rows[o]
            starts = np.searchsorted(lid, np.arange(m))
            xs = X[o, f]
            cg = np.cumsum(g[o])
            ch = np.cumsum(h[o])
            before_g = np.r_[0.0, cg][starts]
            before_h = np.r_[0.0, ch][starts]
            GL = cg - before_g[lid]
            HL = ch - before_h[lid]
            nL = np.arange(len(o)) - starts[lid] + 1
            nR = Cn[lid] - nL
            GR = Gn[lid] - GL
            HR = Hn[lid] - HL
            nxt = np.r_[xs[1:], np.inf]
            valid = (nL >= min_leaf) & (nR >= min_leaf) & (xs < nxt)
            valid &= (HL >= min_child_weight) & (HR >= min_child_weight)
            valid &= (HL + lam > 0) & (HR + lam > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent_score[lid]
            gain = np.where(valid, gain, -np.inf)
            if len(o):
                seg_max = np.maximum.reduceat(gain, starts) if m else gain[:0]
            else:
                seg_max = np.full(m, -np.inf)
            best = np.maximum(best, seg_max)
            per_feature.append((o, lid, xs, nxt, gain, seg_max))

        split = best > _SPLIT_TOL * En + 1e-300
        if not split.any():
            break
        chosen_f = np.full(m, -1, dtype=np.int64)
        chosen_t = np.zeros(m)
        for f, (o, lid, xs, nxt, gain, seg_max) in enumerate(per_feature):
            take = split & (chosen_f < 0) & (seg_max >= best - tie_tol)
            if not take.any():
                continue
            ok = take[lid] & (gain >= (best - tie_tol)[lid])
            pos = np.flatnonzero(ok)
            nodes, first = np.unique(lid[pos], return_index=True)
            p = pos[first]
            thr = 0.5 * (xs[p] + nxt[p])
            thr = np.where(thr >= nxt[p], xs[p], thr)
            chosen_f[nodes] = f
            chosen_t[nodes] = thr

        split_local = np.flatnonzero(split)
        parents = frontier[split_local]
        base = len(feature)
        kids = base + 2 * np.arange(len(split_local))
        child_of = np.full((m, 2), -1, dtype=np.int64)
        child_of[split_local, 0] = kids
        child_of[split_local, 1] = kids + 1
        n_new = 2 * len(split_local)
        feature = np.r_[feature, np.full(n_new, -1, dtype=np.int64)]
        threshold = np.r_[threshold, np.full(n_new, np.nan)]
        left = np.r_[left, np.full(n_new, -1, dtype=np.int64)]
        right = np.r_[right, np.full(n_new, -1, dtype=np.int64)]
        value = np.r_[value, np.zeros(n_new)]
        feature[parents] = chosen_f[split_local]
        threshold[parents] = chosen_t[split_local]
        left[parents] = kids
        right[parents] = kids + 1
        new_frontier = np.arange(base, base + n_new, dtype=np.int64)

        rows = np.flatnonzero(active & split[np.maximum(lid_rows, 0)])
        lj = lid_rows[rows]
        go_left = X[rows, chosen_f[lj]] <= chosen_t[lj]
        node_of[rows] = np.where(go_left, child_of[lj, 0], child_of[lj, 1])

        nl = np.full(len(feature), -1, dtype=np.int64)
        nl[new_frontier] = np.arange(n_new)
        new_lid = nl[node_of]
        kept = new_lid >= 0
        Gc = np.bincount(new_lid[kept], g[kept], minlength=n_new)
        Hc = np.bincount(new_lid[kept], h[kept], minlength=n_new)
        den = Hc + lam
        value[new_frontier] = np.divide(-Gc, den, out=np.zeros(n_new), where=den > 0)

        for f in range(d):
            o = orders[f]
            key = new_lid[o]
            o = o[key >= 0]
            orders[f] = o[np.argsort(new_lid[o], kind="stable")]
        frontier = new_frontier
        depth += 1

    return TreeArrays(feature, threshold, left, right, value, depth)


class RegressionTree:
    """CART regression tree minimising squared error; leaves predict means."""

    def __init__(self, max_depth: int | None = 4, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.tree_: TreeArrays | None = None
        self.offset_ = 0.0

    def fit(self, X, y) -> "RegressionTree":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        if len(y) < 1:
            raise TooFewSamples("tree needs at least one row")
        self.offset_ = float(np.mean(y))
        g = self.offset_ - y
        self.tree_ = grow_tree(
            X, g, np.ones_like(y), max_depth=self.max_depth, min_leaf=self.min_leaf
        )
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return self.offset_ + self.tree_.predict(X)


def fit_decision_tree(X, y, max_depth: int | None = 8, min_leaf: int = 5) -> RegressionTree:
    """Fit a CART tree; requires at least ``2 * min_leaf`` rows."""
    y = np.asarray(y, dtype=float)
    if len(y) < 2 * min_leaf:
        raise TooFewSamples(f"need >= {2 * min_leaf} rows, got {len(y)}")
    return RegressionTree(max_depth, min_leaf).fit(X, y)
