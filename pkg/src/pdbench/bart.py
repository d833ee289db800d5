"""Sum-of-trees regression by backfitting MCMC.

An additive ensemble of N binary regression trees with a depth-penalizing
structure prior, conjugate Gaussian leaf values, and a scaled
inverse-chi-square error variance.  Each sweep proposes one structural
move per tree (grow / prune / change of a bottom split), accepts it by a
Metropolis-Hastings ratio on the integrated leaf likelihood, redraws all
leaf values, and finally redraws the error variance.

The target is internally shifted and scaled to [-0.5, 0.5]; draws are
mapped back to the original scale.  Split rules draw their threshold
uniformly from the observed values of the chosen column inside the node
(excluding the maximum, so both children stay nonempty), and constant
columns are never chosen.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2
from sklearn.base import BaseEstimator, RegressorMixin

from .validation import as_matrix, as_target, check_columns, check_fitted

P_GROW = 0.28
P_PRUNE = 0.28
P_CHANGE = 0.44


def split_prior_prob(depth: int, alpha: float = 0.95, beta: float = 2.0) -> float:
    """Prior probability that a node at the given depth is split."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if beta < 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return alpha * (1.0 + depth) ** (-beta)


@dataclass(frozen=True)
class BartConfig:
    """Sampler settings; defaults suit short quarterly panels."""

    num_trees: int = 50
    k: float = 2.0
    alpha: float = 0.95
    beta: float = 2.0
    nu: float = 3.0
    q: float = 0.90
    n_draws: int = 1000
    n_burn: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError(f"num_trees must be >= 1, got {self.num_trees}")
        if self.k <= 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.nu <= 0 or not 0.0 < self.q < 1.0:
            raise ValueError("nu must be > 0 and q in (0, 1)")
        if self.n_draws < 1 or self.n_burn < 0:
            raise ValueError("n_draws must be >= 1 and n_burn >= 0")
        split_prior_prob(0, self.alpha, self.beta)  # validates alpha/beta


@dataclass(frozen=True)
class TreeStructure:
    """Immutable routing arrays for one tree snapshot.

    feature[i] < 0 marks node i as a leaf; leaf_slot maps node index to a
    dense leaf position matching the order of stored leaf values.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_slot: np.ndarray
    n_leaves: int
    split_counts: np.ndarray  # per training column

    def route(self, X: np.ndarray) -> np.ndarray:
        """Dense leaf slot for every row of X."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        if self.feature.size == 1:
            return self.leaf_slot[node]
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.leaf_slot[node]


@dataclass
class BartPosterior:
    """Kept draws: per-draw tree structures (pooled), leaf values, sigma."""

    config: BartConfig
    structures: list[TreeStructure]
    draw_tree_struct: np.ndarray  # (n_draws, num_trees) indices into structures
    draw_leaf_values: list[list[np.ndarray]]  # [draw][tree] -> scaled leaf values
    sigma_draws: np.ndarray  # original target scale
    y_offset: float
    y_scale: float
    n_features: int
    noise_seed: int
    acceptance_rate: float


class _Tree:
    """Mutable tree state during sampling; nodes live in parallel lists."""

    __slots__ = (
        "feature",
        "threshold",
        "left",
        "right",
        "depth",
        "parent",
        "leaf_value",
        "slot_leaves",
    )

    def __init__(self):
        self.feature = [-1]
        self.threshold = [0.0]
        self.left = [-1]
        self.right = [-1]
        self.depth = [0]
        self.parent = [-1]
        self.leaf_value = [0.0]
        self.slot_leaves: list[int] = [0]

    def add_node(self, parent: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.depth.append(self.depth[parent] + 1)
        self.parent.append(parent)
        self.leaf_value.append(0.0)
        return len(self.feature) - 1

    def snapshot(self, n_columns: int) -> TreeStructure:
        """Compact immutable copy with dead nodes removed."""
        # collect live nodes by walking from the root
        order: list[int] = []
        stack = [0]
        while stack:
            node = stack.pop()
            order.append(node)
            if self.feature[node] >= 0:
                stack.append(self.right[node])
                stack.append(self.left[node])
        remap = {old: new for new, old in enumerate(order)}
        m = len(order)
        feature = np.empty(m, dtype=np.intp)
        threshold = np.empty(m)
        left = np.full(m, -1, dtype=np.intp)
        right = np.full(m, -1, dtype=np.intp)
        leaf_slot = np.full(m, -1, dtype=np.intp)
        counts = np.zeros(n_columns)
        slot = 0
        slot_leaves: list[int] = []
        for old in order:
            new = remap[old]
            f = self.feature[old]
            feature[new] = f
            if f >= 0:
                threshold[new] = self.threshold[old]
                left[new] = remap[self.left[old]]
                right[new] = remap[self.right[old]]
                counts[f] += 1.0
            else:
                leaf_slot[new] = slot
                slot_leaves.append(old)
                slot += 1
        self.slot_leaves = slot_leaves
        return TreeStructure(
            feature=feature,
            threshold=threshold,
            left=left,
            right=right,
            leaf_slot=leaf_slot,
            n_leaves=slot,
            split_counts=counts,
        )


def _leaf_log_marginal_terms(n, s, sigma2, sigma_mu2):
    """0.5*log-variance term and exponential term of a leaf's marginal."""
    denom = sigma2 + n * sigma_mu2
    return -0.5 * np.log(denom), (sigma_mu2 * s * s) / (2.0 * sigma2 * denom)


def _calibrate_lambda(X: np.ndarray, ys: np.ndarray, nu: float, q: float) -> float:
    """Inverse-chi-square scale putting prior mass q below the data sigma."""
    n, p = X.shape
    if n > p + 1:
        design = np.column_stack([np.ones(n), X])
        beta, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)
        resid = ys - design @ beta
        dof = max(n - min(n, p + 1), 1)
        sigma_hat2 = float(resid @ resid) / dof
    else:
        sigma_hat2 = float(np.var(ys, ddof=1)) if n > 1 else 1.0
    sigma_hat2 = max(sigma_hat2, 1e-12)
    return sigma_hat2 * float(chi2.ppf(1.0 - q, nu)) / nu


def bart_fit(X, y, config: BartConfig = BartConfig()) -> BartPosterior:
    """Run the backfitting sampler and keep the post-burn-in draws."""
    X = as_matrix(X)
    y = as_target(y, X.shape[0])
    n, p = X.shape
    if n < 1:
        raise ValueError("bart_fit needs at least one row")
    rng = np.random.default_rng(config.seed)

    y_min, y_max = float(y.min()), float(y.max())
    y_scale = (y_max - y_min) if y_max > y_min else 1.0
    y_offset = y_min
    ys = (y - y_offset) / y_scale - 0.5

    num_trees = config.num_trees
    sigma_mu = 0.5 / (config.k * np.sqrt(num_trees))
    sigma_mu2 = sigma_mu * sigma_mu
    lam = _calibrate_lambda(X, ys, config.nu, config.q)
    sigma2 = max(float(np.var(ys, ddof=1)) if n > 1 else lam, lam * 1e-3)

    trees = [_Tree() for _ in range(num_trees)]
    assigns = [np.zeros(n, dtype=np.intp) for _ in range(num_trees)]
    fits = [np.zeros(n) for _ in range(num_trees)]
    resid = ys.copy()  # ys - sum of tree fits

    structures: list[TreeStructure] = []
    tree_struct_idx = np.full(num_trees, -1, dtype=np.intp)
    tree_dirty = [True] * num_trees

    draw_tree_struct = np.empty((config.n_draws, num_trees), dtype=np.intp)
    draw_leaf_values: list[list[np.ndarray]] = []
    sigma_draws = np.empty(config.n_draws)
    accepted = proposed = 0

    def valid_split_vars(rows: np.ndarray):
        sub = X[rows]
        spread = sub.max(axis=0) > sub.min(axis=0)
        return np.flatnonzero(spread)

    def draw_rule(rows: np.ndarray, var: int):
        vals = np.unique(X[rows, var])
        cut = vals[int(rng.integers(vals.size - 1))]  # exclude max, children nonempty
        return float(cut)

    def singly_internal(tree: _Tree) -> list[int]:
        out = []
        for i, f in enumerate(tree.feature):
            if f >= 0:
                if tree.feature[tree.left[i]] == -1 and tree.feature[tree.right[i]] == -1:
                    out.append(i)
        return out

    def growable_leaves(tree: _Tree, assign: np.ndarray) -> list[int]:
        out = []
        for i, f in enumerate(tree.feature):
            if f == -1:
                rows = np.flatnonzero(assign == i)
                if rows.size >= 2 and valid_split_vars(rows).size:
                    out.append(i)
        return out

    def update_tree(tree_i: int):
        nonlocal accepted, proposed
        tree = trees[tree_i]
        assign = assigns[tree_i]
        partial = resid + fits[tree_i]
        is_stump = tree.feature[0] == -1  # the root is a leaf
        u = rng.random()
        if is_stump:
            move = "grow"
        elif u < P_GROW:
            move = "grow"
        elif u < P_GROW + P_PRUNE:
            move = "prune"
        else:
            move = "change"
        proposed += 1

        if move == "grow":
            candidates = growable_leaves(tree, assign)
            if not candidates:
                return
            b = len(candidates)
            leaf = candidates[int(rng.integers(b))]
            rows = np.flatnonzero(assign == leaf)
            vars_ok = valid_split_vars(rows)
            var = int(vars_ok[int(rng.integers(vars_ok.size))])
            cut = draw_rule(rows, var)
            go_left = X[rows, var] <= cut
            rows_l, rows_r = rows[go_left], rows[~go_left]
            s_all = float(partial[rows].sum())
            s_l = float(partial[rows_l].sum())
            depth = tree.depth[leaf]
            lv_p, le_p = _leaf_log_marginal_terms(rows.size, s_all, sigma2, sigma_mu2)
            lv_l, le_l = _leaf_log_marginal_terms(rows_l.size, s_l, sigma2, sigma_mu2)
            lv_r, le_r = _leaf_log_marginal_terms(
                rows_r.size, s_all - s_l, sigma2, sigma_mu2
            )
            log_lr = (
                0.5 * np.log(sigma2) + lv_l + lv_r - lv_p + le_l + le_r - le_p
            )
            ps_d = split_prior_prob(depth, config.alpha, config.beta)
            ps_d1 = split_prior_prob(depth + 1, config.alpha, config.beta)
            log_prior = np.log(ps_d) + 2.0 * np.log1p(-ps_d1) - np.log1p(-ps_d)
            # singly-internal count after the grow
            w2 = len(singly_internal(tree))
            parent = tree.parent[leaf]
            parent_was_w2 = (
                parent >= 0
                and tree.feature[tree.left[parent]] == -1
                and tree.feature[tree.right[parent]] == -1
            )
            w2_star = w2 + 1 - (1 if parent_was_w2 else 0)
            p_grow = 1.0 if is_stump else P_GROW
            log_trans = np.log(P_PRUNE) + np.log(b) - np.log(p_grow) - np.log(w2_star)
            if np.log(max(rng.random(), 1e-300)) < log_lr + log_prior + log_trans:
                left_id = tree.add_node(leaf)
                right_id = tree.add_node(leaf)
                tree.feature[leaf] = var
                tree.threshold[leaf] = cut
                tree.left[leaf] = left_id
                tree.right[leaf] = right_id
                assign[rows_l] = left_id
                assign[rows_r] = right_id
                accepted += 1
                tree_dirty[tree_i] = True

        elif move == "prune":
            candidates = singly_internal(tree)
            if not candidates:
                return
            w2 = len(candidates)
            node = candidates[int(rng.integers(w2))]
            l_id, r_id = tree.left[node], tree.right[node]
            rows_l = np.flatnonzero(assign == l_id)
            rows_r = np.flatnonzero(assign == r_id)
            rows_n = rows_l.size + rows_r.size
            s_l = float(partial[rows_l].sum())
            s_r = float(partial[rows_r].sum())
            depth = tree.depth[node]
            lv_p, le_p = _leaf_log_marginal_terms(rows_n, s_l + s_r, sigma2, sigma_mu2)
            lv_l, le_l = _leaf_log_marginal_terms(rows_l.size, s_l, sigma2, sigma_mu2)
            lv_r, le_r = _leaf_log_marginal_terms(rows_r.size, s_r, sigma2, sigma_mu2)
            log_lr = -(
                0.5 * np.log(sigma2) + lv_l + lv_r - lv_p + le_l + le_r - le_p
            )
            ps_d = split_prior_prob(depth, config.alpha, config.beta)
            ps_d1 = split_prior_prob(depth + 1, config.alpha, config.beta)
            log_prior = -(np.log(ps_d) + 2.0 * np.log1p(-ps_d1) - np.log1p(-ps_d))
            # pruning the root of a singly-internal tree leaves a stump
            p_grow_star = 1.0 if node == 0 else P_GROW
            # growable leaves of the pruned tree: current ones minus the two
            # children plus the collapsed node if its pooled rows admit a split
            grow_now = set(growable_leaves(tree, assign))
            b_star = len(grow_now - {l_id, r_id})
            rows_all = np.concatenate([rows_l, rows_r])
            if rows_all.size >= 2 and valid_split_vars(rows_all).size:
                b_star += 1
            log_trans = (
                np.log(p_grow_star) + np.log(w2) - np.log(P_PRUNE) - np.log(max(b_star, 1))
            )
            if np.log(max(rng.random(), 1e-300)) < log_lr + log_prior + log_trans:
                assign[rows_l] = node
                assign[rows_r] = node
                tree.feature[node] = -1
                tree.left[node] = -1
                tree.right[node] = -1
                # mark children unreachable
                tree.feature[l_id] = -3
                tree.feature[r_id] = -3
                tree.parent[l_id] = -2
                tree.parent[r_id] = -2
                accepted += 1
                tree_dirty[tree_i] = True

        else:  # change a bottom split's rule
            candidates = singly_internal(tree)
            if not candidates:
                return
            node = candidates[int(rng.integers(len(candidates)))]
            l_id, r_id = tree.left[node], tree.right[node]
            rows_l = np.flatnonzero(assign == l_id)
            rows_r = np.flatnonzero(assign == r_id)
            rows = np.concatenate([rows_l, rows_r])
            vars_ok = valid_split_vars(rows)
            if vars_ok.size == 0:
                return
            var = int(vars_ok[int(rng.integers(vars_ok.size))])
            cut = draw_rule(rows, var)
            go_left = X[rows, var] <= cut
            new_l, new_r = rows[go_left], rows[~go_left]
            s_old_l = float(partial[rows_l].sum())
            s_old_r = float(partial[rows_r].sum())
            s_new_l = float(partial[new_l].sum())
            lv_ol, le_ol = _leaf_log_marginal_terms(rows_l.size, s_old_l, sigma2, sigma_mu2)
            lv_or, le_or = _leaf_log_marginal_terms(rows_r.size, s_old_r, sigma2, sigma_mu2)
            lv_nl, le_nl = _leaf_log_marginal_terms(new_l.size, s_new_l, sigma2, sigma_mu2)
            lv_nr, le_nr = _leaf_log_marginal_terms(
                new_r.size, s_old_l + s_old_r - s_new_l, sigma2, sigma_mu2
            )
            log_lr = (lv_nl + le_nl + lv_nr + le_nr) - (lv_ol + le_ol + lv_or + le_or)
            if np.log(max(rng.random(), 1e-300)) < log_lr:
                tree.feature[node] = var
                tree.threshold[node] = cut
                assign[new_l] = l_id
                assign[new_r] = r_id
                accepted += 1
                tree_dirty[tree_i] = True

    def redraw_leaves(tree_i: int):
        nonlocal resid
        tree = trees[tree_i]
        assign = assigns[tree_i]
        partial = resid + fits[tree_i]
        leaf_ids = [i for i, f in enumerate(tree.feature) if f == -1]
        values = np.empty(len(leaf_ids))
        for slot, node in enumerate(leaf_ids):
            rows = np.flatnonzero(assign == node)
            m = rows.size
            s = float(partial[rows].sum())
            post_var = sigma2 * sigma_mu2 / (sigma2 + m * sigma_mu2)
            post_mean = sigma_mu2 * s / (sigma2 + m * sigma_mu2)
            val = post_mean + np.sqrt(post_var) * rng.standard_normal()
            values[slot] = val
            tree.leaf_value[node] = val
        value_by_node = np.zeros(len(tree.feature))
        for node, val in zip(leaf_ids, values):
            value_by_node[node] = val
        new_fit = value_by_node[assign]
        resid = partial - new_fit
        fits[tree_i] = new_fit

    total_sweeps = config.n_burn + config.n_draws
    kept = 0
    for sweep in range(total_sweeps):
        for tree_i in range(num_trees):
            update_tree(tree_i)
            redraw_leaves(tree_i)
        rss = float(resid @ resid)
        sigma2 = (config.nu * lam + rss) / float(
            rng.chisquare(config.nu + n)
        )
        if sweep >= config.n_burn:
            row_structs = np.empty(num_trees, dtype=np.intp)
            row_leaves: list[np.ndarray] = []
            for tree_i, tree in enumerate(trees):
                if tree_dirty[tree_i]:
                    structures.append(tree.snapshot(p))
                    tree_struct_idx[tree_i] = len(structures) - 1
                    tree_dirty[tree_i] = False
                row_structs[tree_i] = tree_struct_idx[tree_i]
                row_leaves.append(
                    np.array([tree.leaf_value[i] for i in tree.slot_leaves])
                )
            draw_tree_struct[kept] = row_structs
            draw_leaf_values.append(row_leaves)
            sigma_draws[kept] = np.sqrt(sigma2) * y_scale
            kept += 1

    return BartPosterior(
        config=config,
        structures=structures,
        draw_tree_struct=draw_tree_struct,
        draw_leaf_values=draw_leaf_values,
        sigma_draws=sigma_draws,
        y_offset=y_offset,
        y_scale=y_scale,
        n_features=p,
        noise_seed=int(np.random.SeedSequence((config.seed, 7919)).generate_state(1)[0]),
        acceptance_rate=accepted / max(proposed, 1),
    )


def posterior_function_draws(post: BartPosterior, X_new) -> np.ndarray:
    """Matrix (n_draws, rows) of f(x) posterior draws on the original scale."""
    X_new = as_matrix(X_new)
    check_columns(X_new.shape[1], post.n_features)
    n_draws, num_trees = post.draw_tree_struct.shape
    slots = {}
    used = np.unique(post.draw_tree_struct)
    for s_idx in used:
        slots[int(s_idx)] = post.structures[int(s_idx)].route(X_new)
    out = np.zeros((n_draws, X_new.shape[0]))
    for d in range(n_draws):
        acc = out[d]
        leaves = post.draw_leaf_values[d]
        row = post.draw_tree_struct[d]
        for t in range(num_trees):
            acc += leaves[t][slots[int(row[t])]]
    return (out + 0.5) * post.y_scale + post.y_offset


def bart_predict(post: BartPosterior, X_new, levels=(0.80, 0.95)):
    """Posterior-mean point forecasts with noise-inclusive interval bands.

    Bands at each level are empirical quantiles of f(x) draws plus
    Gaussian noise scaled by the matching sigma draw; deterministic for a
    given posterior because the noise stream is seeded at fit time.
    """
    f_draws = posterior_function_draws(post, X_new)
    point = f_draws.mean(axis=0)
    rng = np.random.default_rng(post.noise_seed)
    noisy = f_draws + post.sigma_draws[:, None] * rng.standard_normal(f_draws.shape)
    bands = {}
    for level in levels:
        tail = (1.0 - level) / 2.0
        lo = np.quantile(noisy, tail, axis=0)
        hi = np.quantile(noisy, 1.0 - tail, axis=0)
        bands[level] = (lo, hi)
    return point, bands


def bart_variable_counts(post: BartPosterior) -> np.ndarray:
    """Total split-rule usage per column across all kept draws."""
    counts = np.vstack([s.split_counts for s in post.structures])
    usage = np.bincount(
        post.draw_tree_struct.ravel(), minlength=len(post.structures)
    ).astype(float)
    return usage @ counts


class BartRegressor(BaseEstimator, RegressorMixin):
    """Estimator facade over the sum-of-trees sampler."""

    def __init__(
        self,
        num_trees: int = 50,
        k: float = 2.0,
        alpha: float = 0.95,
        beta: float = 2.0,
        nu: float = 3.0,
        q: float = 0.90,
        n_draws: int = 1000,
        n_burn: int = 250,
        seed: int = 0,
    ):
        self.num_trees = num_trees
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.nu = nu
        self.q = q
        self.n_draws = n_draws
        self.n_burn = n_burn
        self.seed = seed

    def fit(self, X, y):
        config = BartConfig(
            num_trees=self.num_trees,
            k=self.k,
            alpha=self.alpha,
            beta=self.beta,
            nu=self.nu,
            q=self.q,
            n_draws=self.n_draws,
            n_burn=self.n_burn,
            seed=self.seed,
        )
        self.posterior_ = bart_fit(X, y, config)
        self.n_features_in_ = self.posterior_.n_features
        return self

    def predict(self, X):
        check_fitted(self, "posterior_")
        return posterior_function_draws(self.posterior_, X).mean(axis=0)

    def predict_draws(self, X) -> tuple[np.ndarray, np.ndarray]:
        """(f draws, sigma draws) for path-wise uncertainty propagation."""
        check_fitted(self, "posterior_")
        return posterior_function_draws(self.posterior_, X), self.posterior_.sigma_draws

    def predict_intervals(self, X, levels=(0.80, 0.95)):
        check_fitted(self, "posterior_")
        return bart_predict(self.posterior_, X, levels)
