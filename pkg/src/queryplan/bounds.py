"""Pairwise affinity factors and the closed-form surrogate error bound.

For a label pair (y, y') and tilt s in [0, 1], a model's affinity factor is

    M(s) = sum_x p(x|y)^(1-s) * p(x|y')^s,

the moment generating function of the log-likelihood ratio evaluated along
the exponential family connecting the two rows. M(0) = M(1) = 1, M is
log-convex in s, and M < 1 on (0, 1) exactly when the rows differ. The
probability that observations under y favor y' is bounded, for every s, by

    (prior(y') / prior(y))^s * prod_m M_m(s)^(r_m),

and the surrogate error of label y sums this bound over competitors y' with
s optimized per pair. The surrogate dominates the exact statewise error, so
any plan feasible for the surrogate is feasible for the true problem.

All proxy arithmetic is done in log space; golden-section search handles the
one-dimensional convex tilt optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .instances import IDENTIFIABILITY_TOL, Instance, QueryPlan, as_plan

# Default interval width at which golden-section search stops.
GSS_TOL = 1e-6

# Finite stand-in for log(0) when padding ragged alphabets; avoids NaN from
# 0 * -inf at the tilt endpoints.
_PAD = -1e30

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def ordered_pairs(L: int) -> list[tuple[int, int]]:
    """All ordered label index pairs (y, y'), y != y', in lexicographic order."""
    return [(i, j) for i in range(L) for j in range(L) if i != j]


class PairTables:
    """Per-pair log-conditional tables padded to a common alphabet width.

    Precomputing these once per (instance, pair) keeps repeated affinity
    evaluations (golden-section iterations, lattice searches) cheap.
    """

    __slots__ = ("log_p", "log_q", "log_prior_ratio", "flat")

    def __init__(self, instance: Instance, yi: int, yj: int):
        K = instance.n_models
        width = max(m.n_symbols for m in instance.models)
        log_p = np.full((K, width), _PAD)
        log_q = np.full((K, width), _PAD)
        for k, m in enumerate(instance.models):
            log_p[k, : m.n_symbols] = m.log_conditional[yi]
            log_q[k, : m.n_symbols] = m.log_conditional[yj]
        self.log_p = log_p
        self.log_q = log_q
        self.log_prior_ratio = float(
            instance.log_prior[yj] - instance.log_prior[yi]
        )
        self.flat = all(
            np.max(np.abs(m.conditional[yi] - m.conditional[yj]))
            <= IDENTIFIABILITY_TOL
            for m in instance.models
        )

    def log_affinities(self, s: float) -> np.ndarray:
        """log M_m(s) for every model m, as a length-K vector."""
        v = (1.0 - s) * self.log_p + s * self.log_q
        top = v.max(axis=1)
        return np.log(np.exp(v - top[:, None]).sum(axis=1)) + top


def log_affinity(
    instance: Instance, m: int | str, y: int | str, y_other: int | str, s: float
) -> float:
    """log of the affinity factor M(s) for one model and one label pair."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"tilt s must lie in [0, 1], got {s!r}")
    mi = instance.model_index(m)
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    if yi == yj:
        raise ValueError("affinity requires two distinct labels")
    lc = instance.models[mi].log_conditional
    v = (1.0 - s) * lc[yi] + s * lc[yj]
    top = v.max()
    return float(np.log(np.exp(v - top).sum()) + top)


def affinity(
    instance: Instance, m: int | str, y: int | str, y_other: int | str, s: float
) -> float:
    return math.exp(log_affinity(instance, m, y, y_other, s))


def log_affinity_product(
    instance: Instance,
    counts: Sequence[int],
    y: int | str,
    y_other: int | str,
    s: float,
) -> float:
    """log of prod_m M_m(s)^counts[m] (no prior factor)."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"tilt s must lie in [0, 1], got {s!r}")
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    if yi == yj:
        raise ValueError("affinity requires two distinct labels")
    tables = PairTables(instance, yi, yj)
    c = np.asarray(counts, dtype=float)
    if c.shape != (instance.n_models,):
        raise ValueError("counts must have one entry per model")
    return float(c @ tables.log_affinities(s))


def pairwise_proxy_log(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    y_other: int | str,
    s: float,
) -> float:
    """log of the tilted pair bound: s*log(prior ratio) + sum_m r_m log M_m(s)."""
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    base = log_affinity_product(instance, plan.counts, yi, yj, s)
    return s * float(instance.log_prior[yj] - instance.log_prior[yi]) + base


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float = GSS_TOL
) -> float:
    """Minimizes a unimodal f on [lo, hi]; returns a point within tol of the
    minimizer."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _minimize_tilt(
    objective: Callable[[float], float], flat: bool, tol: float
) -> tuple[float, float]:
    """Minimizes a convex tilt objective over [0, 1].

    The golden-section point is re-evaluated exactly and compared against
    both endpoints, so boundary minimizers are returned exactly. A flat
    objective returns s = 0.5 by convention.
    """
    if flat:
        return 0.5, objective(0.5)
    s_in = golden_section(objective, 0.0, 1.0, tol)
    best_s, best_v = s_in, objective(s_in)
    for s in (0.0, 1.0):
        v = objective(s)
        if v < best_v or (v == best_v and s < best_s):
            best_s, best_v = s, v
    return best_s, best_v


def optimize_tilt(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    y_other: int | str,
    tol: float = GSS_TOL,
) -> tuple[float, float]:
    """Optimal tilt for one pair: returns (s*, log proxy value at s*).

    The objective s -> s*log(prior ratio) + sum_m r_m log M_m(s) is convex;
    the returned value is an upper bound on the true minimum (never an
    underestimate), so downstream feasibility claims stay conservative.
    """
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    if yi == yj:
        raise ValueError("optimize_tilt requires two distinct labels")
    tables = PairTables(instance, yi, yj)
    counts = plan.as_array().astype(float)
    lpr = tables.log_prior_ratio

    def objective(s: float) -> float:
        return s * lpr + float(counts @ tables.log_affinities(s))

    flat = tables.flat and lpr == 0.0
    return _minimize_tilt(objective, flat, tol)


def pair_contraction(
    instance: Instance, y: int | str, y_other: int | str, tol: float = GSS_TOL
) -> tuple[float, float]:
    """Best joint contraction for a pair when every model is queried once.

    Returns (s*, min_s sum_m log M_m(s)); the prior plays no role here.
    """
    yi = instance.label_index(y)
    yj = instance.label_index(y_other)
    if yi == yj:
        raise ValueError("pair_contraction requires two distinct labels")
    tables = PairTables(instance, yi, yj)

    def objective(s: float) -> float:
        return float(tables.log_affinities(s).sum())

    return _minimize_tilt(objective, tables.flat, tol)


def max_pair_weights(
    instance: Instance, tol: float = GSS_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Optimistic per-pair evidence bounds for plan prescreening.

    Returns (w_max, min_amp): w_max[p, m] upper-bounds the discrimination
    weight -log M_m(s) over all tilts for ordered pair p, and min_amp[p] =
    min(1, prior ratio) lower-bounds the tilted prior factor. For any plan
    r and any tilt, pair p's proxy is at least
    min_amp[p] * exp(-sum_m r[m] * w_max[p, m]); a label whose pair bounds
    already sum past its tolerance can never be certified, so searches may
    skip the plan without running any per-plan tilt optimization.

    The golden-section minimum of log M is deflated by B * tol (Lipschitz
    constant times bracket width) so w_max never underestimates the true
    maximum weight.
    """
    pairs = ordered_pairs(instance.n_labels)
    K = instance.n_models
    w_max = np.zeros((len(pairs), K))
    min_amp = np.ones(len(pairs))
    for p, (yi, yj) in enumerate(pairs):
        tables = PairTables(instance, yi, yj)
        min_amp[p] = min(1.0, math.exp(tables.log_prior_ratio))
        for k, m in enumerate(instance.models):
            diff = float(np.max(np.abs(m.conditional[yi] - m.conditional[yj])))
            if diff <= IDENTIFIABILITY_TOL:
                continue
            b = float(
                np.max(np.abs(m.log_conditional[yi] - m.log_conditional[yj]))
            )

            def objective(s: float, k: int = k) -> float:
                return float(tables.log_affinities(s)[k])

            _, lv = _minimize_tilt(objective, False, tol)
            w_max[p, k] = max(-(lv - b * tol), 0.0)
    return w_max, min_amp


def instance_contraction(instance: Instance, tol: float = GSS_TOL) -> float:
    """Worst-case pair contraction rho = max over pairs of min_s prod_m M_m(s).

    Lies in (0, 1) for identifiable instances; rho close to 1 means some
    label pair is barely distinguishable even using every model.
    """
    worst = 0.0
    L = instance.n_labels
    for i in range(L):
        for j in range(i + 1, L):
            # min value is symmetric in the pair order since M swaps s -> 1-s
            _, lv = pair_contraction(instance, i, j, tol)
            worst = max(worst, math.exp(lv))
    return worst


def uniform_feasible_count(instance: Instance, tol: float = GSS_TOL) -> tuple[float, int]:
    """Rounds of one-query-per-model that certify every tolerance.

    Returns (rho, n) where querying every model n times yields surrogate
    error at most min_y alpha_y for every label. Raises if some pair is
    indistinguishable (rho would be 1 and no finite n exists).
    """
    rho = instance_contraction(instance, tol)
    if rho >= 1.0:
        raise ValueError(
            "instance has an indistinguishable label pair; no uniform plan "
            "can certify the tolerances"
        )
    L = instance.n_labels
    pr = instance.prior
    alpha_min = float(instance.tolerances.min())
    need = math.log((L - 1) * float(pr.max()) / (float(pr.min()) * alpha_min))
    return rho, max(1, math.ceil(need / (-math.log(rho))))


def surrogate_error(
    instance: Instance,
    plan: QueryPlan | Sequence[int],
    y: int | str,
    tol: float = GSS_TOL,
) -> float:
    """Surrogate statewise error for label y: the sum over competitors of
    the per-pair proxy at its optimal tilt."""
    plan = as_plan(plan, instance)
    yi = instance.label_index(y)
    terms = []
    for yj in range(instance.n_labels):
        if yj == yi:
            continue
        _, lv = optimize_tilt(instance, plan, yi, yj, tol)
        terms.append(math.exp(lv))
    return math.fsum(terms)


@dataclass(frozen=True)
class SurrogateReport:
    """Per-label surrogate errors with the optimizing tilts that achieve them."""

    labels: tuple[str, ...]
    values: tuple[float, ...]
    tolerances: tuple[float, ...]
    feasible_by_label: tuple[bool, ...]
    feasible: bool
    tilts: tuple[tuple[str, str, float, float], ...]  # (y, y', s*, log proxy)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "labels": [
                {
                    "label": y,
                    "surrogate_error": v,
                    "tolerance": a,
                    "feasible": ok,
                }
                for y, v, a, ok in zip(
                    self.labels, self.values, self.tolerances, self.feasible_by_label
                )
            ],
            "pair_tilts": [
                {"y": y, "other": yp, "s": s, "log_proxy": lv}
                for y, yp, s, lv in self.tilts
            ],
        }


def is_surrogate_feasible(
    instance: Instance, plan: QueryPlan | Sequence[int], tol: float = GSS_TOL
) -> SurrogateReport:
    """Checks every label's surrogate error against its tolerance.

    Because the surrogate dominates the exact error, a feasible report is a
    proof of true feasibility; an infeasible report is only inconclusive.
    """
    plan = as_plan(plan, instance)
    values = []
    flags = []
    tilts = []
    for yi in range(instance.n_labels):
        terms = []
        for yj in range(instance.n_labels):
            if yj == yi:
                continue
            s, lv = optimize_tilt(instance, plan, yi, yj, tol)
            tilts.append((instance.labels[yi], instance.labels[yj], s, lv))
            terms.append(math.exp(lv))
        v = math.fsum(terms)
        values.append(v)
        flags.append(v <= float(instance.tolerances[yi]))
    return SurrogateReport(
        labels=instance.labels,
        values=tuple(values),
        tolerances=tuple(float(a) for a in instance.tolerances),
        feasible_by_label=tuple(flags),
        feasible=all(flags),
        tilts=tuple(tilts),
    )
