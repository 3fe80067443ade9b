"""Optimal adversary against sequential elimination, by dynamic programming.

``value[T][S][c]`` is the honest player's expected total revenue under the
adversary's best play when the current P-sample has active pool ``S`` (which
always contains the honest player), ``T`` further P-samples follow the
current one, and ``c`` violation units remain.  One elimination round in
pool ``S`` transitions as:

* with probability ``1/|S|`` the honest player is drawn, banks the marginal
  contribution of joining the already-eliminated players, and the run
  proceeds to the next sample with a full pool: ``mu* + value[T-1][N][c]``;
* with probability ``1/|S|`` each, another player ``i`` is drawn; the
  adversary either accepts (``value[T][S-i][c]``) or spends one unit to have
  some other susceptible ``j`` abort in ``i``'s place
  (``min_j value[T][S-j][c-1]``), taking the cheaper branch.

An aborted player leaves only the current sample's pool and returns in the
next sample, so the recursion always re-enters through ``value[T-1][N][c]``;
perpetual removal is a runner-level policy layered on top.

States are compressed by the game's declared symmetry classes (the honest
player is split into its own class), with singleton classes as the
uncompressed bit-set fallback for ``n <= 20``.  Only the full-pool boundary
column ``value[T][N][c]`` is stored per ``T``; any inner slice is rebuilt on
demand from the previous boundary row, which keeps long runs at
``R * (C + 1)`` stored reals regardless of ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adversaries import Adversary, Budget
from .games import Game, shapley_exact
from .streams import substream

DEFAULT_STATE_CAP = 2_000_000


class StateCapExceeded(ValueError):
    """The compressed state space would not fit in the configured cap."""


def state_count(game: Game, honest: int) -> int:
    """Size of the compressed pool-state space, without building it."""
    if game.symmetry_classes is not None:
        sizes = [len([p for p in cls if p != honest]) for cls in game.symmetry_classes]
    elif game.n <= 20:
        sizes = [1] * (game.n - 1)
    else:
        raise ValueError("optimal-adversary tables need declared symmetry classes or n <= 20")
    count = 1
    for s in sizes:
        count *= s + 1
    return count


@dataclass(eq=False)
class StateSpace:
    """Mixed-radix index over per-class remaining counts (honest excluded)."""

    game: Game
    honest: int
    classes: tuple[tuple[int, ...], ...]
    totals: np.ndarray
    strides: np.ndarray
    n_states: int
    class_of: np.ndarray
    mu_star: np.ndarray
    by_size: list[np.ndarray]

    @classmethod
    def build(cls, game: Game, honest: int, *, state_cap: int = DEFAULT_STATE_CAP) -> "StateSpace":
        if game.symmetry_classes is not None:
            raw = [tuple(sorted(c)) for c in game.symmetry_classes]
        elif game.n <= 20:
            raw = [(p,) for p in range(game.n)]
        else:
            raise ValueError(
                "optimal-adversary tables need declared symmetry classes or n <= 20"
            )
        classes = []
        for cls_members in raw:
            members = tuple(p for p in cls_members if p != honest)
            if members:
                classes.append(members)
        classes.sort(key=lambda ms: ms[0])
        classes = tuple(classes)
        totals = np.array([len(c) for c in classes], dtype=np.int64)
        n_states = int(np.prod(totals + 1))
        if n_states > state_cap:
            raise StateCapExceeded(
                f"{n_states} states needed, cap is {state_cap}; "
                "declare symmetry classes or raise the cap"
            )
        strides = np.ones(len(classes), dtype=np.int64)
        for d in range(len(classes) - 2, -1, -1):
            strides[d] = strides[d + 1] * (totals[d + 1] + 1)
        class_of = np.full(game.n, -1, dtype=np.int64)
        for d, members in enumerate(classes):
            for p in members:
                class_of[p] = d

        # Marginal contribution of the honest player joining the complement
        # of each pool state; exchangeability lets one canonical member set
        # stand for every pool with the same class counts.
        D = len(classes)
        counts = np.zeros(D, dtype=np.int64)
        mu_star = np.empty(n_states, dtype=np.float64)
        sizes = np.empty(n_states, dtype=np.int64)
        v = game.utility
        hbit = 1 << honest
        for sid in range(n_states):
            rem = sid
            comp_mask = 0
            for d in range(D):
                counts[d] = rem // strides[d]
                rem %= strides[d]
                absent = int(totals[d] - counts[d])
                for p in classes[d][:absent]:
                    comp_mask |= 1 << p
            mu_star[sid] = v(comp_mask | hbit) - v(comp_mask)
            sizes[sid] = 1 + int(counts.sum())
        by_size = [np.flatnonzero(sizes == m) for m in range(1, game.n + 1)]
        return cls(game=game, honest=honest, classes=classes, totals=totals,
                   strides=strides, n_states=n_states, class_of=class_of,
                   mu_star=mu_star, by_size=by_size)

    @property
    def full_state(self) -> int:
        return int(self.totals @ self.strides)

    def counts_of(self, sid: int) -> np.ndarray:
        out = np.empty(len(self.classes), dtype=np.int64)
        rem = sid
        for d in range(len(self.classes)):
            out[d] = rem // self.strides[d]
            rem %= self.strides[d]
        return out

    def state_of(self, pool: Sequence[int]) -> int:
        sid = 0
        for p in pool:
            if p != self.honest:
                sid += int(self.strides[self.class_of[p]])
        return sid


def _build_slice_reference(space: StateSpace, prev_row: np.ndarray, C: int) -> np.ndarray:
    """Per-state builder; the plain-loop reference for :func:`_build_slice`."""
    D = len(space.classes)
    strides = space.strides
    out = np.empty((space.n_states, C + 1), dtype=np.float64)
    inf = math.inf
    for size_group in space.by_size:
        for sid in size_group:
            counts = space.counts_of(int(sid))
            acc = space.mu_star[sid] + prev_row  # honest-drawn branch, per c
            m = 1 + int(counts.sum())
            if m > 1:
                nonzero = np.flatnonzero(counts)
                vals = out[sid - strides[nonzero]]  # (len(nonzero), C+1)
                best = vals.min(axis=0)
                order = np.argsort(vals, axis=0, kind="stable")
                second = vals[order[1], np.arange(C + 1)] if len(nonzero) > 1 else np.full(C + 1, inf)
                argbest = nonzero[order[0]]
                for pos, d in enumerate(nonzero):
                    accept = vals[pos]
                    # abort candidate classes: any with a member left after
                    # excluding the drawn player itself
                    if counts[d] >= 2:
                        cand = best
                    else:
                        cand = np.where(argbest == d, second, best)
                    abort = np.empty(C + 1)
                    abort[0] = inf
                    abort[1:] = cand[:-1]
                    acc = acc + counts[d] * np.minimum(accept, abort)
            out[sid] = acc / m
    return out


def _build_slice(space: StateSpace, prev_row: np.ndarray, C: int) -> np.ndarray:
    """All pool states at one ``T``, from the previous full-pool boundary row.

    States of equal pool size are independent given smaller sizes, so each
    size group is filled with batched gathers; the arithmetic matches
    :func:`_build_slice_reference` operation for operation.
    """
    D = len(space.classes)
    strides = space.strides
    totals = space.totals
    out = np.empty((space.n_states, C + 1), dtype=np.float64)
    inf = math.inf
    for m_minus_1, group in enumerate(space.by_size):
        m = m_minus_1 + 1
        if len(group) == 0:
            continue
        base = space.mu_star[group][:, None] + prev_row[None, :]
        if m == 1:
            out[group] = base
            continue
        g = len(group)
        counts = np.empty((g, D), dtype=np.int64)
        rem = group.copy()
        for d in range(D):
            counts[:, d] = rem // strides[d]
            rem = rem % strides[d]
        sub = np.empty((g, D, C + 1))
        for d in range(D):
            valid = counts[:, d] >= 1
            ids = np.where(valid, group - strides[d], 0)
            sub[:, d] = np.where(valid[:, None], out[ids], inf)
        order = np.argsort(sub, axis=1, kind="stable")
        ranked = np.take_along_axis(sub, order, axis=1)
        best = ranked[:, 0]
        second = ranked[:, 1] if D > 1 else np.full((g, C + 1), inf)
        argbest = order[:, 0]
        acc = base
        for d in range(D):
            k_d = counts[:, d:d + 1]
            cand = np.where((k_d >= 2) | (argbest != d), best, second)
            abort = np.empty_like(cand)
            abort[:, 0] = inf
            abort[:, 1:] = cand[:, :-1]
            contrib = np.where(k_d >= 1, np.minimum(sub[:, d], abort), 0.0)
            acc = acc + k_d * contrib
        out[group] = acc / m
    return out


@dataclass(eq=False)
class DPTable:
    """Boundary rows ``value[T][N][c]`` plus on-demand inner slices.

    ``boundary[T, c]`` covers ``T = 0 .. R-1``; memory is ``R * (C + 1)``
    reals no matter how large the game.  ``slice_at(T)`` rebuilds (or
    returns, when ``store_slices`` was set) the full inner slice for that
    sample index.
    """

    space: StateSpace
    C: int
    rows: list = field(default_factory=list)
    slices: list | None = None
    validate: bool = True
    _phi_star: float | None = None
    _umax_star: float | None = None

    @property
    def R(self) -> int:
        return len(self.rows)

    @property
    def boundary(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=np.float64).reshape(self.R, self.C + 1)

    def _check_row(self, T: int, row: np.ndarray) -> None:
        if self._phi_star is None:
            return
        phi, umax = self._phi_star, self._umax_star
        expect = (T + 1) * phi
        if abs(row[0] - expect) > 1e-6 * max(1.0, abs(expect)):
            raise AssertionError(f"zero-budget boundary at T={T}: {row[0]} != {expect}")
        if np.any(np.diff(row) > 1e-9 * max(1.0, abs(expect))):
            raise AssertionError(f"boundary at T={T} not non-increasing in budget")
        floor_vals = expect - np.arange(self.C + 1) * umax
        if np.any(row < floor_vals - 1e-6 * max(1.0, abs(expect))):
            raise AssertionError(f"boundary at T={T} below the budget-damage floor")

    def extend_to(self, R: int) -> "DPTable":
        while self.R < R:
            T = self.R
            prev = self.rows[-1] if self.rows else np.zeros(self.C + 1)
            sl = _build_slice(self.space, prev, self.C)
            row = sl[self.space.full_state].copy()
            if self.validate:
                self._check_row(T, row)
            self.rows.append(row)
            if self.slices is not None:
                self.slices.append(sl)
        return self

    def slice_at(self, T: int) -> np.ndarray:
        if not 0 <= T < self.R:
            raise ValueError(f"sample index {T} outside built range 0..{self.R - 1}")
        if self.slices is not None:
            return self.slices[T]
        prev = self.rows[T - 1] if T > 0 else np.zeros(self.C + 1)
        return _build_slice(self.space, prev, self.C)

    def worst_value(self, R: int | None = None, c: int | None = None) -> float:
        """Full-run value ``value[R-1][N][c]`` (defaults: all built samples, full budget)."""
        R = self.R if R is None else R
        c = self.C if c is None else c
        return float(self.rows[R - 1][c])


def dp_build(game: Game, honest: int, R: int, C: int, *,
             store_slices: bool = False, validate: bool = True,
             state_cap: int = DEFAULT_STATE_CAP) -> DPTable:
    """Build boundary rows for ``R`` P-samples and budgets ``0..C``."""
    if C < 0 or R < 1:
        raise ValueError("need R >= 1 and C >= 0")
    space = StateSpace.build(game, honest, state_cap=state_cap)
    table = DPTable(space=space, C=C, slices=[] if store_slices else None, validate=validate)
    if validate:
        try:
            report = shapley_exact(game)
            table._phi_star = float(report.phi[honest])
            table._umax_star = float(report.u_max[honest])
        except ValueError:
            table._phi_star = None
    return table.extend_to(R)


class DPAdversary(Adversary):
    """Plays the table's optimal abort policy in sequential elimination.

    At each opened elimination round with a non-honest player drawn, aborts
    the susceptible player whose removal minimizes the honest player's
    continuation value, provided that strictly beats accepting; ties keep
    the budget (no abort) and break toward the smallest player id.
    Behaves passively once the budget is exhausted or beyond the planning
    horizon.  Not defined for the full-permutation protocol.
    """

    def __init__(self, table: DPTable, budget: Budget, *, horizon: int | None = None):
        super().__init__(budget)
        self.table = table
        self._explicit_horizon = horizon
        self.horizon = table.R if horizon is None else horizon
        if self.horizon > table.R:
            raise ValueError("planning horizon exceeds the built table")
        self._slice: np.ndarray | None = None

    def reset(self, **kwargs) -> None:
        super().reset(**kwargs)
        # plan against the run's announced length when one exists
        if self._explicit_horizon is None:
            if self.planned_samples is not None:
                if self.planned_samples > self.table.R:
                    raise ValueError("planned run length exceeds the built table")
                self.horizon = self.planned_samples
            else:
                self.horizon = self.table.R

    def begin_sample(self, index: int, active) -> None:
        super().begin_sample(index, active)
        T = self.horizon - 1 - index
        self._slice = self.table.slice_at(T) if T >= 0 else None

    def commit_permutations(self, view, susceptible, m):
        raise ValueError("the optimal table adversary only plays sequential elimination")

    def open_draws(self, view, susceptible, commitments: dict, k: int) -> dict:
        opened = dict(commitments)
        if self._slice is None or view.honest_revealed is None or not self.budget.allows():
            return opened
        pool = view.active_set
        total = int(view.honest_revealed) + sum(int(v) for v in commitments.values())
        drawn = pool[total % k]
        if drawn == self.honest:
            return opened
        space = self.table.space
        sid = space.state_of(pool)
        c = int(self.budget.limit - self.budget.used) if math.isfinite(self.budget.limit) else self.table.C
        c = min(c, self.table.C)
        if c < 1:
            return opened
        sl = self._slice
        v_accept = sl[sid - space.strides[space.class_of[drawn]], c]
        best_val = math.inf
        best_player = None
        for j in pool:
            if j == self.honest or j == drawn:
                continue
            val = sl[sid - space.strides[space.class_of[j]], c - 1]
            if val < best_val:
                best_val = val
                best_player = j
        if best_player is not None and best_val < v_accept:
            self.budget.spend()
            opened[best_player] = None
        return opened


@dataclass
class ParallelRunStats:
    """Per-run honest allocations from the lockstep simulation engine."""

    x_honest: np.ndarray
    violations: np.ndarray
    R: int
    transcript: list | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.x_honest))

    @property
    def stderr(self) -> float:
        if len(self.x_honest) < 2:
            return 0.0
        return float(np.std(self.x_honest, ddof=1) / math.sqrt(len(self.x_honest)))


def parallel_runs(game: Game, honest: int, R: int, C: int, M: int, seed: int, *,
                  table: DPTable | None = None, adversary: str = "dp",
                  record_transcript: bool = False, chunk: int = 64) -> ParallelRunStats:
    """Advance ``M`` fixed-length runs together, one P-sample index at a time.

    The optimal-adversary table values for sample index ``t`` (``T = R-1-t``)
    are materialized once and shared by every run before any run moves to
    ``t + 1``, so boundary-only tables never rebuild a slice twice.  Pools
    stay in lockstep because each elimination round removes exactly one
    player whether or not an abort replaces the drawn one.

    Randomness contract: run ``m`` reads the float stream
    ``substream(seed, "run", m).random()`` positionally, using index
    ``t * n + r`` for P-sample ``t`` and round ``r``; the round's eliminated
    member is ``floor(u * pool_size)`` over the pool ordered honest-first
    then by class.  A single uniform stands in for the opened commitment
    sum, which has the same law.  Positional indexing keeps runs aligned no
    matter when the honest player leaves a sample; rounds after that cannot
    change the honest allocation, so they are skipped.

    ``adversary`` is ``"dp"`` (needs ``table``) or ``"passive"``.
    """
    n = game.n
    if table is not None and C > table.C:
        raise ValueError("run budget exceeds the built table's budget axis")
    if adversary == "dp":
        if table is None:
            raise ValueError("dp mode needs a built table")
        space = table.space
    else:
        if adversary != "passive":
            raise ValueError(f"unknown adversary mode {adversary!r}")
        space = (table.space if table is not None
                 else StateSpace.build(game, honest))
    D = len(space.classes)
    totals = space.totals
    strides = space.strides
    mu_star = space.mu_star

    gens = [substream(seed, "run", m) for m in range(M)]
    x_acc = np.zeros(M)
    violations = np.zeros(M, dtype=np.int64)
    c_rem = np.full(M, C, dtype=np.int64)
    transcript: list | None = [] if record_transcript else None

    t = 0
    while t < R:
        t_hi = min(R, t + chunk)
        block = np.empty((M, (t_hi - t) * n))
        for m in range(M):
            block[m] = gens[m].random((t_hi - t) * n)
        for tt in range(t, t_hi):
            sl = table.slice_at(R - 1 - tt) if adversary == "dp" else None
            counts = np.tile(totals, (M, 1))
            sid = np.full(M, space.full_state, dtype=np.int64)
            alive = np.ones(M, dtype=bool)
            base = (tt - t) * n
            for r in range(n):
                if not alive.any():
                    break
                m_pool = n - r
                u = (block[:, base + r] * m_pool).astype(np.int64)
                hdrawn = alive & (u == 0)
                if hdrawn.any():
                    x_acc[hdrawn] += mu_star[sid[hdrawn]]
                    alive = alive & ~hdrawn
                    if not alive.any():
                        if record_transcript:
                            transcript.append((tt, r, u.copy(), np.full(M, -1, dtype=np.int64)))
                        break
                idx = u - 1
                cum = np.cumsum(counts, axis=1)
                d_drawn = (idx[:, None] >= cum).sum(axis=1)
                d_drawn = np.where(alive, d_drawn, 0)
                abort_cls = np.full(M, -1, dtype=np.int64)
                if adversary == "dp":
                    can = alive & (c_rem >= 1)
                    if can.any():
                        v_accept = sl[sid - strides[d_drawn], np.minimum(c_rem, table.C)]
                        v_best = np.full(M, math.inf)
                        d_best = np.full(M, -1, dtype=np.int64)
                        cm1 = np.maximum(np.minimum(c_rem, table.C) - 1, 0)
                        for d in range(D):
                            avail = counts[:, d] - (d_drawn == d) >= 1
                            safe = np.where(counts[:, d] >= 1, sid - strides[d], 0)
                            vals = np.where(avail & can, sl[safe, cm1], math.inf)
                            better = vals < v_best
                            v_best = np.where(better, vals, v_best)
                            d_best = np.where(better, d, d_best)
                        do_abort = can & (d_best >= 0) & (v_best < v_accept)
                        if do_abort.any():
                            abort_cls = np.where(do_abort, d_best, abort_cls)
                            rows = np.flatnonzero(do_abort)
                            counts[rows, d_best[rows]] -= 1
                            sid[rows] -= strides[d_best[rows]]
                            c_rem[rows] -= 1
                            violations[rows] += 1
                accept = alive & (abort_cls < 0)
                rows = np.flatnonzero(accept)
                counts[rows, d_drawn[rows]] -= 1
                sid[rows] -= strides[d_drawn[rows]]
                if record_transcript:
                    transcript.append((tt, r, u.copy(), abort_cls))
        t = t_hi
    return ParallelRunStats(x_honest=x_acc / R, violations=violations, R=R,
                            transcript=transcript)


def dp_two_pass(game: Game, honest: int, R: int, C: int, M: int, seed: int, *,
                record_transcript: bool = False,
                state_cap: int = DEFAULT_STATE_CAP) -> tuple[ParallelRunStats, DPTable]:
    """Boundary pass plus a replay pass driving ``M`` simulations together.

    Pass 1 stores only the full-pool boundary (``R * (C + 1)`` reals); pass 2
    walks sample indices forward, rebuilding each inner slice exactly once
    and advancing every simulation through that index before moving on.
    """
    table = dp_build(game, honest, R, C, store_slices=False, state_cap=state_cap)
    stats = parallel_runs(game, honest, R, C, M, seed, table=table,
                          adversary="dp", record_transcript=record_transcript)
    return stats, table
