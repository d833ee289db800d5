"""Forecast combination: equal, covariance-optimal, constrained, eigenvector.

All schemes operate on member forecast errors measured on the
transformed level scale.  The error second-moment matrix is estimated
from complete cases only (an observation is dropped when any member is
missing there).  Weights for a window always come from strictly earlier
windows, so combination forecasts are out of sample by construction; the
first comparison window has no history and produces no combination.

Methods:
  avg  equal weights.
  ng   minimum-variance weights inv(S) 1 / (1' inv(S) 1); S is ridged
       by 1e-8 * trace/M when ill-conditioned, and the result flagged.
  cls  minimum of w' S w under w >= 0 and sum w = 1, solved exactly by a
       primal active-set method on the bordered system; members with
       identical error histories are grouped first and share their
       group weight equally, making the tie-break explicit.
  sea  the eigenvector of the smallest eigenvalue of S, rescaled to sum
       one; within a tied smallest eigenspace the uniform vector is
       projected onto the eigenspace, which keeps the choice unique.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import CvPlan, DesignMatrix

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-8
KKT_TOL = 1e-8
EIG_TIE_TOL = 1e-10
METHODS = ("avg", "ng", "cls", "sea")


class CombinationError(RuntimeError):
    pass


def clip_psd(S: np.ndarray) -> tuple[np.ndarray, bool]:
    """Zero out negative eigenvalues beyond roundoff; report whether any were."""
    S = 0.5 * (S + S.T)
    eigvals = np.linalg.eigvalsh(S)
    if eigvals[0] >= -1e-12 * max(eigvals[-1], 1.0):
        return S, False
    vals, vecs = np.linalg.eigh(S)
    clipped = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (clipped + clipped.T), True


def estimate_mspe(errors: np.ndarray) -> tuple[np.ndarray, dict]:
    """Second-moment matrix of member errors from complete cases.

    Returns (S, info) where info reports observation counts and whether
    an eigenvalue clip was needed to restore positive semidefiniteness.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2:
        raise ValueError(f"expected (observations, members), got {errors.shape}")
    complete = np.isfinite(errors).all(axis=1)
    used = errors[complete]
    if used.shape[0] < 2:
        raise CombinationError(
            f"need at least 2 complete error observations, got {used.shape[0]}"
        )
    S, clipped = clip_psd(used.T @ used / used.shape[0])
    info = {
        "n_obs": int(errors.shape[0]),
        "n_complete": int(used.shape[0]),
        "psd_clipped": clipped,
    }
    return S, info


def combine_avg(S: np.ndarray) -> tuple[np.ndarray, dict]:
    m = S.shape[0]
    return np.full(m, 1.0 / m), {}


def combine_ng(S: np.ndarray) -> tuple[np.ndarray, dict]:
    """Minimum-variance weights; ridged and flagged when ill-conditioned."""
    m = S.shape[0]
    ones = np.ones(m)
    work = S
    info = {"ridged": False}
    cond = np.linalg.cond(work)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        work = S + np.eye(m) * (RIDGE_SCALE * np.trace(S) / m + 1e-300)
        info["ridged"] = True
    x = np.linalg.solve(work, ones)
    denom = float(ones @ x)
    if abs(denom) < 1e-300:
        raise CombinationError("minimum-variance weights are undefined: 1'S^-1 1 = 0")
    return x / denom, info


def _group_identical_columns(errors: np.ndarray) -> list[list[int]]:
    """Indices grouped by exact equality of their error history columns."""
    groups: list[list[int]] = []
    for j in range(errors.shape[1]):
        for group in groups:
            if np.array_equal(errors[:, group[0]], errors[:, j]):
                group.append(j)
                break
        else:
            groups.append([j])
    return groups


def _solve_simplex_qp(S: np.ndarray) -> np.ndarray:
    """min w' S w subject to w >= 0 and sum(w) = 1, by primal active set.

    At each step the equality-constrained subproblem over the free set is
    solved through the bordered system [[2S_FF, 1], [1', 0]]; a negative
    solution component moves that coordinate to the bound, and a negative
    reduced gradient releases the most violating bound.  S is PSD so the
    iteration terminates.
    """
    m = S.shape[0]
    free = list(range(m))
    bound: list[int] = []
    for _ in range(4 * m * m + 8):
        k = len(free)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * S[np.ix_(free, free)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        w_free, mu = sol[:k], sol[k]
        if w_free.min() < -1e-12:
            worst = free[int(np.argmin(w_free))]
            free.remove(worst)
            bound.append(worst)
            continue
        w = np.zeros(m)
        w[free] = np.clip(w_free, 0.0, None)
        total = w.sum()
        if total <= 0:
            raise CombinationError("active-set solve lost the simplex constraint")
        w /= total
        # reduced gradient at bound coordinates: 2(Sw)_j - mu
        grad = 2.0 * (S @ w)
        violations = [(grad[j] - mu, j) for j in bound if grad[j] - mu < -1e-10]
        if not violations:
            return w
        _, release = min(violations)
        bound.remove(release)
        free.append(release)
        free.sort()
    raise CombinationError("active-set iteration did not converge")


def combine_cls(S: np.ndarray, errors: np.ndarray | None = None):
    """Nonnegative simplex weights minimizing combined squared error.

    When the raw error matrix is supplied, members with bitwise-identical
    histories are reduced to one representative before solving and the
    group weight is split equally afterwards.
    """
    m = S.shape[0]
    if errors is not None:
        complete = np.isfinite(errors).all(axis=1)
        groups = _group_identical_columns(errors[complete])
    else:
        groups = [[j] for j in range(m)]
    reps = [g[0] for g in groups]
    S_red = S[np.ix_(reps, reps)]
    w_red = _solve_simplex_qp(S_red)
    weights = np.zeros(m)
    for g, wg in zip(groups, w_red):
        weights[g] = wg / len(g)
    kkt = kkt_residual(S, weights)
    if kkt > KKT_TOL:
        raise CombinationError(f"constrained weights violate optimality: {kkt:.2e}")
    return weights, {"kkt_residual": kkt, "n_groups": len(groups)}


def kkt_residual(S: np.ndarray, w: np.ndarray) -> float:
    """Max violation of the simplex-QP optimality conditions at w."""
    w = np.asarray(w, dtype=float)
    grad = 2.0 * (S @ w)
    active = w > 1e-12
    if not active.any():
        return float("inf")
    mu = float(grad[active].mean())
    stationarity = float(np.max(np.abs(grad[active] - mu)))
    dual_feas = float(np.max(np.maximum(mu - grad[~active], 0.0))) if (~active).any() else 0.0
    primal = abs(float(w.sum()) - 1.0) + float(np.maximum(-w, 0.0).max())
    return max(stationarity, dual_feas, primal)


def combine_sea(S: np.ndarray) -> tuple[np.ndarray, dict]:
    """Weights along the smallest-eigenvalue direction, normalized to sum 1."""
    vals, vecs = np.linalg.eigh(S)
    scale = max(float(vals[-1]), 1.0)
    tied = vals <= vals[0] + EIG_TIE_TOL * scale
    k = int(tied.sum())
    if k == 1:
        v = vecs[:, 0]
    else:
        basis = vecs[:, :k]
        uniform = np.full(S.shape[0], 1.0 / S.shape[0])
        v = basis @ (basis.T @ uniform)
    total = float(v.sum())
    if abs(total) < 1e-8:
        raise CombinationError(
            "smallest-eigenvector weights do not normalize: component sum is zero"
        )
    if total < 0:
        v = -v
        total = -total
    return v / total, {"eigen_multiplicity": k}


_COMBINERS = {
    "avg": lambda S, errors: combine_avg(S),
    "ng": lambda S, errors: combine_ng(S),
    "cls": lambda S, errors: combine_cls(S, errors),
    "sea": lambda S, errors: combine_sea(S),
}


@dataclass
class MethodResult:
    """One combination method evaluated across the comparison windows."""

    method: str
    members: tuple
    window_mae: np.ndarray
    available: np.ndarray
    unavailable_reasons: dict
    weights_by_window: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def mean_mae(self) -> float:
        if not self.available.any():
            return float("nan")
        return float(np.nanmean(self.window_mae[self.available]))

    @property
    def n_unavailable(self) -> int:
        return int((~self.available).sum())

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "members": list(self.members),
            "mean_mae": self.mean_mae,
            "n_windows": int(self.available.size),
            "n_unavailable": self.n_unavailable,
            "unavailable_reasons": dict(self.unavailable_reasons),
            "window_mae": [
                float(v) if np.isfinite(v) else None for v in self.window_mae
            ],
            "weights_by_window": {
                str(w): {m: float(x) for m, x in zip(self.members, weights)}
                for w, weights in sorted(self.weights_by_window.items())
            },
            "flags": dict(self.flags),
        }


def member_error_blocks(runs: dict, design: DesignMatrix, plan: CvPlan, members):
    """Per-window error matrices (horizon rows x members), NaN when failed."""
    blocks = []
    for w_idx, (train_end, horizon) in enumerate(plan.windows):
        actual = design.y_level[train_end : train_end + horizon]
        block = np.full((horizon, len(members)), np.nan)
        for j, model_id in enumerate(members):
            fc = runs[model_id].forecasts[w_idx]
            if fc.usable:
                block[:, j] = fc.level_path - actual
        blocks.append(block)
    return blocks


def evaluate_combination_method(
    method: str,
    runs: dict,
    design: DesignMatrix,
    plan: CvPlan,
    members,
) -> MethodResult:
    """Walk the windows with expanding error history and static weights."""
    members = tuple(members)
    if method not in _COMBINERS:
        raise ValueError(f"unknown combination method {method!r}")
    if len(members) < 2:
        raise CombinationError("combination needs at least two members")
    blocks = member_error_blocks(runs, design, plan, members)
    n_windows = len(plan.windows)
    window_mae = np.full(n_windows, np.nan)
    available = np.zeros(n_windows, dtype=bool)
    reasons: dict[str, int] = {}
    weights_by_window: dict[int, np.ndarray] = {}
    flags = {"psd_clipped": 0, "ridged": 0}

    def mark(reason: str):
        reasons[reason] = reasons.get(reason, 0) + 1

    for w_idx, (train_end, horizon) in enumerate(plan.windows):
        if w_idx == 0:
            mark("no_history")
            continue
        current = [runs[m].forecasts[w_idx] for m in members]
        if any(not fc.usable for fc in current):
            mark("member_failed")
            continue
        history = np.vstack(blocks[:w_idx])
        try:
            S, info = estimate_mspe(history)
            weights, method_info = _COMBINERS[method](S, history)
        except CombinationError:
            mark("insufficient_history")
            continue
        flags["psd_clipped"] += int(info.get("psd_clipped", False))
        flags["ridged"] += int(method_info.get("ridged", False))
        combined = np.zeros(horizon)
        for weight, fc in zip(weights, current):
            combined += weight * fc.level_path
        actual = design.y_level[train_end : train_end + horizon]
        window_mae[w_idx] = float(np.mean(np.abs(combined - actual)))
        available[w_idx] = True
        weights_by_window[w_idx] = weights
    return MethodResult(
        method=method,
        members=members,
        window_mae=window_mae,
        available=available,
        unavailable_reasons=reasons,
        weights_by_window=weights_by_window,
        flags=flags,
    )


@dataclass
class ScenarioResult:
    scenario: str
    members: tuple
    methods: dict
    skipped_methods: tuple = ()
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "members": list(self.members),
            "skipped_methods": list(self.skipped_methods),
            "warnings": list(self.warnings),
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
        }


def select_members(
    scenario: str,
    kept_models,
    rmcb_result,
    categories: dict,
    mean_mae: dict | None = None,
):
    """Member list for a combination scenario.

    all        every model that survived stability screening.
    top8       the best-group members of the rank analysis.
    top_group  the lowest average-error survivor within each model family.
    """
    kept = list(kept_models)
    warnings = []
    if scenario == "all":
        members = kept
    elif scenario == "top8":
        member_mask = rmcb_result.in_best_group()
        members = [
            mid
            for mid, m in zip(rmcb_result.model_ids, member_mask)
            if m and mid in kept
        ]
    elif scenario == "top_group":
        if mean_mae is None:
            raise ValueError("top_group selection needs per-model mean errors")
        members = []
        for category in sorted(set(categories.values())):
            scored = [
                m
                for m in kept
                if categories.get(m) == category
                and np.isfinite(mean_mae.get(m, np.nan))
            ]
            if not scored:
                warnings.append(f"category {category!r} has no scored survivor")
                continue
            members.append(min(scored, key=lambda m: (mean_mae[m], m)))
        members.sort(key=kept.index)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return members, tuple(warnings)


def evaluate_scenario(
    scenario: str,
    runs: dict,
    design: DesignMatrix,
    plan: CvPlan,
    members,
    warnings=(),
    methods=METHODS,
) -> ScenarioResult:
    """Requested combination methods for one member list.

    The covariance-based ng and sea schemes are skipped for the `all`
    scenario, where the member count is large relative to the error
    history and the inverted moment matrix is unreliable.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown combination methods {unknown}")
    methods = [m for m in METHODS if m in methods]
    skipped = ()
    if scenario == "all":
        skipped = tuple(m for m in ("ng", "sea") if m in methods)
        methods = [m for m in methods if m not in skipped]
    results = {}
    for method in methods:
        results[method] = evaluate_combination_method(
            method, runs, design, plan, members
        )
    return ScenarioResult(
        scenario=scenario,
        members=tuple(members),
        methods=results,
        skipped_methods=skipped,
        warnings=tuple(warnings),
    )
