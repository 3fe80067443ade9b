"""The allocation loop: repeated P-samples, stopping rules, punishment
policies, and reward bookkeeping.

Each P-sample yields a permutation; every player banks the marginal
contribution of joining its predecessors, and the run returns the average
allocation vector.  Since the per-sample contributions telescope to the
grand-coalition value, the averaged vector is always an allocation.

Per-sample honest rewards are decomposed as ``X = Y - Z``: ``X`` is the
realized reward, ``Z`` charges each detected violation in the sample at the
honest player's maximum marginal contribution (the worst damage one
violation can cause), and ``Y = X + Z``.  Total charged damage therefore
never exceeds ``violations * u_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .adversaries import Adversary
from .games import Game, shapley_exact
from .protocols import PSampleOutcome, naive_perm, seq_perm
from .streams import substream

PROTOCOLS = {"naive": naive_perm, "seq": seq_perm}
PUNISHMENTS = ("count_only", "perpetual")


class SampleCapExceeded(RuntimeError):
    """The stopping rule was not satisfied within the configured hard cap."""


@dataclass(frozen=True)
class StoppingRule:
    """When the allocation loop terminates.

    ``fixed(R)`` stops after exactly ``R`` P-samples.

    ``known_budget(eps, delta, C, gamma)`` resolves, at construction, to the
    fixed count ``max(ceil(8*gamma/eps^2 * ln(1/delta)), ceil(2*C*gamma/eps))``.

    ``unknown_budget(eps, delta, gamma)`` stops at the first sample count
    ``R >= R0`` whose observed violating-sample fraction is at most
    ``eps / (2*gamma)``, with
    ``R0 = ceil(8*gamma/eps^2 * (ln(16*gamma/eps^2) + ln(1/delta)))``.

    Both real-valued formula results and the integers used are kept.
    """

    kind: str
    eps: float = math.nan
    delta: float = math.nan
    C: int = 0
    gamma: float = math.nan
    R: int = 0
    formula_values: tuple[float, ...] = ()

    @classmethod
    def fixed(cls, R: int) -> "StoppingRule":
        if R < 1:
            raise ValueError("need R >= 1")
        return cls(kind="fixed", R=R)

    @classmethod
    def known_budget(cls, eps: float, delta: float, C: int, gamma: float) -> "StoppingRule":
        a = 8.0 * gamma / eps**2 * math.log(1.0 / delta)
        b = 2.0 * C * gamma / eps
        return cls(kind="known_budget", eps=eps, delta=delta, C=C, gamma=gamma,
                   R=max(math.ceil(a), math.ceil(b)), formula_values=(a, b))

    @classmethod
    def unknown_budget(cls, eps: float, delta: float, gamma: float) -> "StoppingRule":
        r0 = 8.0 * gamma / eps**2 * (math.log(16.0 * gamma / eps**2) + math.log(1.0 / delta))
        return cls(kind="unknown_budget", eps=eps, delta=delta, gamma=gamma,
                   R=math.ceil(r0), formula_values=(r0,))

    @property
    def planned_R(self) -> int | None:
        return self.R if self.kind in ("fixed", "known_budget") else None

    def satisfied(self, samples: int, violating_samples: int) -> bool:
        if self.kind in ("fixed", "known_budget"):
            return samples >= self.R
        return samples >= self.R and violating_samples <= self.eps / (2.0 * self.gamma) * samples

    def default_cap(self) -> int:
        if self.kind in ("fixed", "known_budget"):
            return self.R
        return 10 * self.R  # violating-fraction rules may need headroom past R0


@dataclass
class RunRecord:
    """Everything observable from one completed allocation run."""

    x: np.ndarray
    epsilon_hat: float
    per_sample: list  # (Y, Z, dev frozenset) per P-sample for the honest player
    samples_used: int
    violations: int
    seed: int
    honest: int

    @property
    def x_honest(self) -> float:
        return float(self.x[self.honest])

    def to_csv(self) -> str:
        from .csvio import format_number

        lines = ["# schema-version: 1", "j,Y,Z,dev"]
        for j, (y, z, dev) in enumerate(self.per_sample, start=1):
            lines.append(f"{j},{format_number(y)},{format_number(z)},{len(dev)}")
        lines.append("# trailer: R,V,x_honest,eps_hat,seed")
        lines.append(",".join([str(self.samples_used), str(self.violations),
                               format_number(self.x_honest), format_number(self.epsilon_hat),
                               str(self.seed)]))
        return "\n".join(lines) + "\n"


def _honest_umax(game: Game, honest: int) -> float:
    if game.closed_forms is not None:
        return float(game.closed_forms.u_max[honest])
    return float(shapley_exact(game).u_max[honest])


def _check_runnable(game: Game, honest: int, punish: str, protocol: str) -> None:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; pick one of {sorted(PROTOCOLS)}")
    if punish not in PUNISHMENTS:
        raise ValueError(f"unknown punishment policy {punish!r}; pick one of {PUNISHMENTS}")
    if not 0 <= honest < game.n:
        raise ValueError("honest player out of range")
    if game.declared_monotone is False:
        raise ValueError("allocation runs need a non-negative monotone game")


def run_allocation(
    game: Game,
    protocol: str,
    adversary: Adversary,
    stopping: StoppingRule,
    *,
    honest: int,
    seed: int,
    punish: str = "count_only",
    hard_cap: int | None = None,
    stream_labels: tuple = (),
) -> RunRecord:
    """Loop P-samples until the stopping rule fires; return the allocation.

    Under ``count_only`` punishment, detected violators only feed the
    violation counters.  Under ``perpetual``, once detected they are pinned
    to the least preferable ranks of every later P-sample (in detection
    order), which makes the remaining players effectively play the game with
    the violators always counted as predecessors.

    Never satisfying the stopping rule within the hard cap (possible only
    for violating-fraction rules against high-rate adversaries) raises
    :class:`SampleCapExceeded` with a diagnostic.
    """
    _check_runnable(game, honest, punish, protocol)
    sample_fn = PROTOCOLS[protocol]
    honest_rng = substream(seed, *stream_labels, "honest")
    adversary.reset(n=game.n, honest=honest, rng=substream(seed, *stream_labels, "adversary"),
                    game=game, planned_samples=stopping.planned_R)
    cap = hard_cap if hard_cap is not None else stopping.default_cap()
    u_max_star = _honest_umax(game, honest)
    v = game.utility

    z = np.zeros(game.n)
    per_sample: list = []
    history: list[frozenset[int]] = []
    pinned: list[int] = []
    violations = 0
    violating_samples = 0
    samples = 0

    while True:
        if samples >= cap:
            raise SampleCapExceeded(
                f"stopping rule {stopping.kind!r} unsatisfied after {samples} P-samples "
                f"({violating_samples} violating); the adversary's violation rate may "
                f"exceed eps/(2*gamma)"
            )
        active = [p for p in range(game.n) if p not in pinned] if pinned else list(range(game.n))
        adversary.begin_sample(samples, tuple(active))
        outcome: PSampleOutcome = sample_fn(
            active, honest, adversary, honest_rng,
            sample_index=samples, history=tuple(history),
        )
        order = tuple(pinned) + outcome.order if pinned else outcome.order
        mask = 0
        prev = v(0)
        x_honest_j = 0.0
        for p in order:
            cur = v(mask | (1 << p))
            z[p] += cur - prev
            if p == honest:
                x_honest_j = cur - prev
            mask |= 1 << p
            prev = cur
        zj = outcome.violations_used * u_max_star
        per_sample.append((x_honest_j + zj, zj, outcome.dev))
        history.append(outcome.dev)
        violations += outcome.violations_used
        if outcome.dev:
            violating_samples += 1
            if punish == "perpetual":
                pinned.extend(p for p in outcome.order if p in outcome.dev)
        samples += 1
        if stopping.satisfied(samples, violating_samples):
            break

    eps_hat = stopping.eps if stopping.kind != "fixed" else math.nan
    return RunRecord(x=z / samples, epsilon_hat=eps_hat, per_sample=per_sample,
                     samples_used=samples, violations=violations, seed=seed, honest=honest)


def run_adaptive(
    game: Game,
    adversary: Adversary,
    eps: float,
    delta: float,
    gamma: float,
    *,
    honest: int,
    seed: int,
    protocol: str = "naive",
    stream_labels: tuple = (),
) -> RunRecord:
    """Adaptive allocation with halving error levels.

    Runs P-samples while the current level ``eps_k = 2**-k`` exceeds the
    target.  Whenever the sample count reaches
    ``8*gamma/eps_{k+1}^2 * ln(2^(k+1)/delta)``, the observed violation
    fraction is compared against ``eps_{k+1}/(2*gamma)``: exceeding it ends
    the run immediately, otherwise the current average is snapshotted and
    the level halves.  Returns the last snapshot and its level; against an
    adversary with violation rate ``f`` the reported level never exceeds
    ``max(eps, 4*f*gamma)``.
    """
    _check_runnable(game, honest, "count_only", protocol)
    sample_fn = PROTOCOLS[protocol]
    honest_rng = substream(seed, *stream_labels, "honest")
    adversary.reset(n=game.n, honest=honest, rng=substream(seed, *stream_labels, "adversary"),
                    game=game, planned_samples=None)
    v = game.utility

    z = np.zeros(game.n)
    x = np.zeros(game.n)
    per_sample: list = []
    history: list[frozenset[int]] = []
    R = 0
    V = 0
    k = 0
    u_max_star = _honest_umax(game, honest)

    while 2.0 ** -k > eps:
        active = list(range(game.n))
        adversary.begin_sample(R, tuple(active))
        outcome = sample_fn(active, honest, adversary, honest_rng,
                            sample_index=R, history=tuple(history))
        mask = 0
        prev = v(0)
        x_honest_j = 0.0
        for p in outcome.order:
            cur = v(mask | (1 << p))
            z[p] += cur - prev
            if p == honest:
                x_honest_j = cur - prev
            mask |= 1 << p
            prev = cur
        zj = outcome.violations_used * u_max_star
        per_sample.append((x_honest_j + zj, zj, outcome.dev))
        history.append(outcome.dev)
        R += 1
        V += outcome.violations_used
        eps_next = 2.0 ** -(k + 1)
        if R >= 8.0 * gamma / eps_next**2 * math.log(2.0 ** (k + 1) / delta):
            if V / R > eps_next / (2.0 * gamma):
                break
            x = z / R
            k += 1

    return RunRecord(x=x, epsilon_hat=2.0 ** -k, per_sample=per_sample,
                     samples_used=R, violations=V, seed=seed, honest=honest)


def expected_reward_estimate(
    game: Game,
    protocol: str,
    adversary_factory: Callable[[], Adversary],
    R: int,
    M: int,
    *,
    honest: int,
    seed: int,
    punish: str = "count_only",
) -> tuple[float, float]:
    """Mean and standard error of the honest allocation over ``M`` runs.

    Each repetition owns a fresh adversary instance and disjoint labeled
    substreams, so results do not depend on execution order.
    """
    values = np.empty(M)
    stopping = StoppingRule.fixed(R)
    for m in range(M):
        record = run_allocation(game, protocol, adversary_factory(), stopping,
                                honest=honest, seed=seed, punish=punish,
                                stream_labels=("run", m))
        values[m] = record.x_honest
    stderr = float(np.std(values, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return float(np.mean(values)), stderr
