"""Exact error evaluation and exact plan optimization by enumeration.

Observations are exchangeable given the label, so only per-model response
count vectors (profiles) matter. A plan r induces
prod_m C(r_m + |X_m| - 1, |X_m| - 1) joint profiles; each is scored once
with its multinomial weight. This is exponentially smaller than raw
sequence space but still explodes on large plans, hence explicit budgets.

The optimizer walks the plan lattice in best-first order (nondecreasing
cost, ties broken lexicographically by count vector) and returns the first
feasible plan, which is therefore a minimum-cost one.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .bounds import (
    PairTables,
    _minimize_tilt,
    max_pair_weights,
    uniform_feasible_count,
)
from .instances import Instance, QueryPlan, as_plan, plan_cost
from .likelihood import SCORE_TOL, TIE_POLICIES

# A log-likelihood difference this close to zero is counted as favoring the
# competitor; keeps the exact pairwise terms conservative under fp noise.
DELTA_TOL = 1e-12

PROFILE_BUDGET = 10_000_000
NODE_BUDGET = 1_000_000

# Max joint profiles materialized at once during enumeration.
_CHUNK = 1 << 20


class EnumerationBudgetError(RuntimeError):
    """Profile space or search frontier exceeded its budget."""


class InfeasibleWithinCapError(RuntimeError):
    """No feasible plan exists with cost at or below the cap."""


def profile_count(instance: Instance, plan: QueryPlan | Sequence[int]) -> int:
    """Number of joint count profiles the plan can produce."""
    plan = as_plan(plan, instance)
    n = 1
    for m, r in zip(instance.models, plan.counts):
        n *= math.comb(r + m.n_symbols - 1, m.n_symbols - 1)
    return n


def _compositions(total: int, width: int) -> np.ndarray:
    """All nonnegative integer vectors of the given width summing to total."""
    if width == 1:
        return np.array([[total]], dtype=np.int64)
    parts = []
    for k in range(total + 1):
        rest = _compositions(total - k, width - 1)
        parts.append(
            np.column_stack([np.full(len(rest), k, dtype=np.int64), rest])
        )
    return np.vstack(parts)


def _model_blocks(
    instance: Instance, plan: QueryPlan
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per model: (log-likelihood matrix (P, L), log multinomial coeffs (P,)).

    Models with zero queries contribute a single empty profile.
    """
    blocks = []
    for m, r in zip(instance.models, plan.counts):
        profiles = _compositions(r, m.n_symbols)
        loglik = profiles.astype(float) @ m.log_conditional.T
        logcoef = gammaln(r + 1) - gammaln(profiles + 1).sum(axis=1)
        blocks.append((loglik, logcoef))
    return blocks


def _iter_joint(
    blocks: list[tuple[np.ndarray, np.ndarray]]
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Streams the cartesian product of model blocks in bounded chunks.

    Yields (loglik (n, L), logcoef (n,)) pairs where rows are joint profiles.
    """
    ll0, lc0 = blocks[0]
    if len(blocks) == 1:
        for i in range(0, ll0.shape[0], _CHUNK):
            yield ll0[i : i + _CHUNK], lc0[i : i + _CHUNK]
        return
    for llr, lcr in _iter_joint(blocks[1:]):
        step = max(1, _CHUNK // llr.shape[0])
        for i in range(0, ll0.shape[0], step):
            ll = (ll0[i : i + step, None, :] + llr[None, :, :]).reshape(
                -1, ll0.shape[1]
            )
            lc = (lc0[i : i + step, None] + lcr[None, :]).reshape(-1)
            yield ll, lc


def _scan_profiles(
    instance: Instance, plan: QueryPlan, budget: int
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yields (posterior scores (n, L), log joint coefficient (n,)) chunks."""
    n = profile_count(instance, plan)
    if n > budget:
        raise EnumerationBudgetError(
            f"plan induces {n} profiles, over the budget of {budget}"
        )
    for loglik, logcoef in _iter_joint(_model_blocks(instance, plan)):
        yield instance.log_prior[None, :] + loglik, logcoef


def _logsumexp_scalar(values: list[float]) -> float:
    if not values:
        return -math.inf
    arr = np.array(values)
    top = arr.max()
    if top == -math.inf:
        return -math.inf
    return float(np.log(np.exp(arr - top).sum()) + top)


def exact_pairwise(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    y_other: int | str,
    budget: int = PROFILE_BUDGET,
) -> float:
    """Exact probability, under label y, that the observations weigh at
    least as heavily toward y_other (log-posterior difference >= 0).

    This is the quantity the per-pair tilted proxy upper-bounds.
    """
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    if yi == yj:
        raise ValueError("exact_pairwise requires two distinct labels")
    chunk_lse = []
    for scores, logcoef in _scan_profiles(instance, plan, budget):
        mask = scores[:, yj] - scores[:, yi] >= -DELTA_TOL
        if mask.any():
            # weight of a profile under y excludes the prior factor
            logw = logcoef[mask] + (scores[mask, yi] - instance.log_prior[yi])
            top = logw.max()
            chunk_lse.append(float(np.log(np.exp(logw - top).sum()) + top))
    return math.exp(_logsumexp_scalar(chunk_lse))


def _error_mask(scores: np.ndarray, yi: int, tie_policy: str) -> np.ndarray:
    top = scores.max(axis=1)
    tied = scores >= (top - SCORE_TOL)[:, None]
    predicted = tied.argmax(axis=1)
    if tie_policy == "lowest-index":
        return predicted != yi
    return (predicted != yi) | (tied.sum(axis=1) > 1)


def exact_error(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    tie_policy: str = "lowest-index",
    budget: int = PROFILE_BUDGET,
) -> float:
    """Exact statewise MAP error for label y under the chosen tie policy."""
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    chunk_lse = []
    for scores, logcoef in _scan_profiles(instance, plan, budget):
        mask = _error_mask(scores, yi, tie_policy)
        if mask.any():
            logw = logcoef[mask] + (scores[mask, yi] - instance.log_prior[yi])
            top = logw.max()
            chunk_lse.append(float(np.log(np.exp(logw - top).sum()) + top))
    return math.exp(_logsumexp_scalar(chunk_lse))


@dataclass(frozen=True)
class ExactErrorResult:
    labels: tuple[str, ...]
    errors: tuple[float, ...]
    tie_policy: str
    profiles: int

    def to_dict(self) -> dict:
        return {
            "tie_policy": self.tie_policy,
            "profiles": self.profiles,
            "errors": [
                {"label": y, "error": e} for y, e in zip(self.labels, self.errors)
            ],
        }


def exact_error_table(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    tie_policy: str = "lowest-index",
    budget: int = PROFILE_BUDGET,
) -> ExactErrorResult:
    plan = as_plan(plan, instance)
    errors = tuple(
        exact_error(instance, plan, yi, tie_policy, budget)
        for yi in range(instance.n_labels)
    )
    return ExactErrorResult(
        labels=instance.labels,
        errors=errors,
        tie_policy=tie_policy,
        profiles=profile_count(instance, plan),
    )


def naive_sequence_pairwise(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    y_other: int | str,
) -> float:
    """Reference pairwise probability by raw sequence enumeration.

    Iterates every response sequence rather than count profiles; tractable
    only for tiny plans, and used to cross-check the profile path.
    """
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    slots: list[np.ndarray] = []
    for m, r in zip(instance.models, plan.counts):
        slots.extend([m.log_conditional] * r)
    total = 0.0
    prior_gap = float(instance.log_prior[yj] - instance.log_prior[yi])
    for combo in itertools.product(*(range(lc.shape[1]) for lc in slots)):
        lp_i = sum(lc[yi, x] for lc, x in zip(slots, combo))
        lp_j = sum(lc[yj, x] for lc, x in zip(slots, combo))
        if prior_gap + lp_j - lp_i >= -DELTA_TOL:
            total += math.exp(lp_i)
    return total


# ---------------------------------------------------------------------------
# Best-first exact optimization over the plan lattice.
# ---------------------------------------------------------------------------


def lattice_ascending(
    costs: Sequence[float],
    cost_cap: float,
    count_caps: Sequence[int] | None = None,
) -> Iterator[tuple[float, tuple[int, ...]]]:
    """Yields (cost, counts) over all plans with cost <= cap, in
    nondecreasing cost with ties broken lexicographically.

    Each lattice point is generated once: children only increment a model
    index at or after the last one incremented.
    """
    K = len(costs)
    root = (0.0, (0,) * K, 0)
    heap = [root]
    while heap:
        cost, counts, mstart = heapq.heappop(heap)
        yield cost, counts
        for m in range(mstart, K):
            if count_caps is not None and counts[m] + 1 > count_caps[m]:
                continue
            child_cost = cost + costs[m]
            if child_cost <= cost_cap + 1e-9:
                child = counts[:m] + (counts[m] + 1,) + counts[m + 1 :]
                heapq.heappush(heap, (child_cost, child, m))


@dataclass(frozen=True)
class OptResult:
    problem: str
    tie_policy: str | None
    plan: QueryPlan
    cost: float
    enumerated: int
    cost_cap: float

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "tie_policy": self.tie_policy,
            "plan": list(self.plan.counts),
            "cost": self.cost,
            "enumerated": self.enumerated,
            "cost_cap": self.cost_cap,
        }


def _surrogate_feasible_fast(
    instance: Instance,
    tables: dict[tuple[int, int], PairTables],
    counts: tuple[int, ...],
    tol: float,
) -> bool:
    arr = np.array(counts, dtype=float)
    for yi in range(instance.n_labels):
        alpha = float(instance.tolerances[yi])
        acc = 0.0
        for yj in range(instance.n_labels):
            if yj == yi:
                continue
            tb = tables[(yi, yj)]

            def objective(s: float, tb=tb) -> float:
                return s * tb.log_prior_ratio + float(arr @ tb.log_affinities(s))

            flat = tb.flat and tb.log_prior_ratio == 0.0
            _, lv = _minimize_tilt(objective, flat, tol)
            acc += math.exp(lv)
            if acc > alpha:
                return False
    return True


def exact_opt(
    instance: Instance,
    problem: str = "surrogate",
    tie_policy: str = "lowest-index",
    cost_cap: float | None = None,
    count_caps: Sequence[int] | None = None,
    node_budget: int = NODE_BUDGET,
    profile_budget: int = PROFILE_BUDGET,
    tol: float = 1e-6,
) -> OptResult:
    """Minimum-cost plan meeting every tolerance, by best-first search.

    ``problem`` selects the feasibility notion: "surrogate" uses the
    closed-form bound, "true" uses exact statewise errors under the given
    tie policy. The first feasible plan in (cost, lexicographic) order is
    optimal for its problem. The default cost cap is the cost of querying
    every model for the uniform certifying round count, which is always
    surrogate-feasible (and hence true-feasible).

    Raises InfeasibleWithinCapError if the capped lattice holds no feasible
    plan, and EnumerationBudgetError if the search or a single exact error
    evaluation would exceed its budget.
    """
    if problem not in ("surrogate", "true"):
        raise ValueError(f"unknown problem {problem!r}")
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    costs = [m.cost for m in instance.models]
    if cost_cap is None:
        _, n_unif = uniform_feasible_count(instance, tol)
        cost_cap = n_unif * float(sum(costs))
    tables = {}
    prescreen = None
    if problem == "surrogate":
        for yi in range(instance.n_labels):
            for yj in range(instance.n_labels):
                if yi != yj:
                    tables[(yi, yj)] = PairTables(instance, yi, yj)
        # optimistic per-pair bounds rule out most plans without any
        # per-plan tilt optimization; see bounds.max_pair_weights
        w_max, min_amp = max_pair_weights(instance, tol)
        pairs = [(i, j) for i in range(instance.n_labels)
                 for j in range(instance.n_labels) if i != j]
        mask_mat = np.array(
            [[p[0] == yi for p in pairs] for yi in range(instance.n_labels)],
            dtype=float,
        )
        alphas = np.asarray(instance.tolerances, dtype=float) * (1.0 + 1e-9)
        prescreen = (w_max, min_amp, mask_mat, alphas)
    enumerated = 0
    for cost, counts in lattice_ascending(costs, cost_cap, count_caps):
        enumerated += 1
        if enumerated > node_budget:
            raise EnumerationBudgetError(
                f"search enumerated more than {node_budget} plans"
            )
        if problem == "surrogate":
            w_max, min_amp, mask_mat, alphas = prescreen
            lb = min_amp * np.exp(-(w_max @ np.asarray(counts, dtype=float)))
            if np.any(mask_mat @ lb > alphas):
                continue
            ok = _surrogate_feasible_fast(instance, tables, counts, tol)
        else:
            ok = all(
                exact_error(instance, counts, yi, tie_policy, profile_budget)
                <= float(instance.tolerances[yi])
                for yi in range(instance.n_labels)
            )
        if ok:
            plan = QueryPlan(counts)
            return OptResult(
                problem=problem,
                tie_policy=tie_policy if problem == "true" else None,
                plan=plan,
                cost=plan_cost(instance, plan),
                enumerated=enumerated,
                cost_cap=float(cost_cap),
            )
    raise InfeasibleWithinCapError(
        f"no {problem}-feasible plan with cost <= {cost_cap}"
    )
