"""Command-line drivers: exact values, simulations, and sampling experiments.

Subcommands: ``shapley``, ``simulate``, ``min-samples``, ``cdf``,
``dp-table``.  Every run is configured by a flat ``key = value`` text file
plus command-line overrides (flags win), and all randomness flows from one
64-bit master seed.  Output is CSV with a ``# schema-version: 1`` comment and
12-significant-digit numbers; identical configuration and seed produce
byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 compute-cap abort.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversaries import (Adversary, BlockAttackAdversary, Budget,
                          CyclicShiftAdversary, EagerAbortAdversary, PassiveAdversary)
from .builtin_games import (make_collab_game, make_lb_game, make_max_gamma_game,
                            make_pair_game, make_synergy_game)
from .csvio import format_number, render_csv, write_text
from .dp import DPAdversary, StateCapExceeded, dp_build, parallel_runs, state_count
from .games import Game, shapley_exact
from .hypergraph import HypergraphFormatError, load_hypergraph
from .runner import SampleCapExceeded, StoppingRule, run_adaptive, run_allocation

OUTPUT_DIR_ENV = "SHAPSIM_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3


class ConfigError(ValueError):
    pass


# Work ceilings for runs without --full-scale.  Published-scale experiments
# (hundreds of players, 8e5 samples, 1000 repetitions) far exceed these and
# take hours on one core; see the README for expectations.
DESK_SAMPLE_BUDGET = 20_000_000   # P-samples times repetitions
DESK_SCAN_BUDGET = 100_000        # boundary rows in a table scan
DESK_STATE_BUDGET = 5_000_000     # adversary-table slice entries


def _gate_full_scale(cfg: "ExperimentConfig", units: int, budget: int, what: str) -> None:
    if units > budget and not cfg._bool("full_scale"):
        raise ConfigError(
            f"{what} needs ~{units} work units (desk budget {budget}); "
            "pass --full-scale to run it anyway"
        )


_DEFAULTS = {
    "game": None, "n": None, "i_star": "0", "j_star": "1",
    "hypergraph": None, "honest": None, "padding": "0",
    "protocol": "seq", "adversary": "passive",
    "budget_kind": "known", "budget": "0",
    "eps": None, "delta": None, "gamma": None,
    "stopping": None, "R": None, "M": "1",
    "punish": "count_only", "seed": "0",
    "block_len": None, "block_greedy": "false",
    "sweep": None, "r_max": None,
    "max_samples": None, "jobs": "1",
    "full_scale": "false", "out": None,
}

_BOOLS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"{path} line {line_no}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass
class ExperimentConfig:
    """Validated settings for one driver invocation."""

    raw: dict[str, str]

    def _get(self, key: str) -> str | None:
        return self.raw.get(key, _DEFAULTS[key])

    def _int(self, key: str) -> int | None:
        value = self._get(key)
        if value is None:
            return None
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"field {key}: expected integer, got {value!r}") from None

    def _float(self, key: str) -> float | None:
        value = self._get(key)
        if value is None:
            return None
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"field {key}: expected number, got {value!r}") from None

    def _bool(self, key: str) -> bool:
        value = str(self._get(key)).lower()
        if value not in _BOOLS:
            raise ConfigError(f"field {key}: expected boolean, got {value!r}")
        return _BOOLS[value]

    # Game -----------------------------------------------------------------
    def build_game(self) -> tuple[Game, int]:
        named = self._get("game")
        hg_path = self._get("hypergraph")
        if (named is None) == (hg_path is None):
            raise ConfigError("exactly one game spec: either 'game' or 'hypergraph'")
        padding = self._int("padding") or 0
        if hg_path is not None:
            try:
                h = load_hypergraph(hg_path)
            except (OSError, HypergraphFormatError) as exc:
                raise ConfigError(f"field hypergraph: {exc}") from exc
            honest = self._int("honest")
            if honest is None:
                raise ConfigError("hypergraph games need an explicit 'honest' player")
            core = h.n
            classes = tuple((p,) for p in range(core))
            if padding:
                h = h.padded(core + padding)
                classes = classes + (tuple(range(core, core + padding)),)
            game = make_synergy_game(h, symmetry_classes=classes)
            return game, honest
        n = self._int("n")
        if named == "pair":
            if n is None:
                raise ConfigError("game 'pair' needs n")
            game = make_pair_game(n, self._int("i_star"), self._int("j_star"))
        elif named == "max-gamma":
            if n is None:
                raise ConfigError("game 'max-gamma' needs n")
            game = make_max_gamma_game(n)
        elif named == "lb":
            if n is None:
                raise ConfigError("game 'lb' needs n")
            game = make_lb_game(n)
        elif named == "collab":
            game = make_collab_game(n if n is not None else 14)
        else:
            raise ConfigError(f"unknown game {named!r}")
        honest = self._int("honest")
        if honest is None:
            honest = game.extras.get("i_star", 0)
        if not 0 <= honest < game.n:
            raise ConfigError(f"honest player {honest} out of range for n={game.n}")
        return game, honest

    def gamma_for(self, game: Game, honest: int) -> float:
        override = self._float("gamma")
        if override is not None:
            return override
        if game.protocol_gamma is not None:
            return game.protocol_gamma
        return float(shapley_exact(game).gamma)

    # Run pieces -----------------------------------------------------------
    def budget(self) -> Budget:
        kind = self._get("budget_kind")
        value = self._float("budget") or 0.0
        if kind == "known":
            return Budget.known(int(value))
        if kind == "unknown":
            return Budget.unknown(int(value))
        if kind == "rate":
            return Budget.rate(value)
        raise ConfigError(f"unknown budget_kind {kind!r}")

    def build_adversary(self, game: Game, honest: int, planned_R: int | None) -> Adversary:
        kind = self._get("adversary")
        if kind == "passive":
            return PassiveAdversary()
        if kind == "cyclic":
            return CyclicShiftAdversary(self.budget())
        if kind == "eager":
            return EagerAbortAdversary(self.budget())
        if kind == "block":
            block_len = self._int("block_len")
            if block_len is None:
                eps = self._float("eps")
                if eps is None:
                    raise ConfigError("block adversary needs block_len or eps")
                block_len = max(1, math.ceil(game.n / (10.0 * eps)))
            return BlockAttackAdversary(self.budget(), block_len,
                                        greedy=self._bool("block_greedy"))
        if kind == "dp":
            if planned_R is None:
                raise ConfigError("dp adversary needs a predetermined sample count")
            C = int(self._float("budget") or 0)
            _gate_full_scale(self, state_count(game, honest) * (C + 1),
                             DESK_STATE_BUDGET, "the adversary table")
            table = dp_build(game, honest, planned_R, C, store_slices=planned_R <= 512)
            return DPAdversary(table, self.budget())
        raise ConfigError(f"unknown adversary {kind!r}")

    def stopping(self, game: Game, honest: int) -> StoppingRule:
        kind = self._get("stopping")
        R = self._int("R")
        if kind in (None, "fixed"):
            if R is None:
                raise ConfigError("fixed stopping needs R")
            return StoppingRule.fixed(R)
        eps, delta = self._float("eps"), self._float("delta")
        if eps is None or delta is None:
            raise ConfigError(f"stopping {kind!r} needs eps and delta")
        g = self.gamma_for(game, honest)
        if kind == "known":
            C = int(self._float("budget") or 0)
            return StoppingRule.known_budget(eps, delta, C, g)
        if kind == "unknown":
            return StoppingRule.unknown_budget(eps, delta, g)
        raise ConfigError(f"unknown stopping rule {kind!r}")

    @property
    def seed(self) -> int:
        return self._int("seed") or 0

    @property
    def M(self) -> int:
        return self._int("M") or 1

    @property
    def jobs(self) -> int:
        return max(1, self._int("jobs") or 1)

    def out_path(self, default_name: str) -> str | None:
        out = self._get("out")
        if out == "-":
            return None
        base = os.environ.get(OUTPUT_DIR_ENV)
        if out is None:
            return str(Path(base) / default_name) if base else None
        p = Path(out)
        if base and not p.is_absolute():
            p = Path(base) / p
        return str(p)


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, str] = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)
    return ExperimentConfig(raw=values)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", help="output CSV path ('-' for stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--game", choices=["pair", "max-gamma", "lb", "collab"])
    p.add_argument("--n", type=int)
    p.add_argument("--i-star", dest="i_star", type=int)
    p.add_argument("--j-star", dest="j_star", type=int)
    p.add_argument("--hypergraph")
    p.add_argument("--honest", type=int)
    p.add_argument("--padding", type=int)
    p.add_argument("--gamma", type=float)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", choices=["naive", "seq"])
    p.add_argument("--adversary", choices=["passive", "cyclic", "eager", "block", "dp"])
    p.add_argument("--budget-kind", dest="budget_kind", choices=["known", "unknown", "rate"])
    p.add_argument("--budget", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--stopping", choices=["fixed", "known", "unknown", "adaptive"])
    p.add_argument("--R", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--punish", choices=["count_only", "perpetual"])
    p.add_argument("--block-len", dest="block_len", type=int)
    p.add_argument("--block-greedy", dest="block_greedy", action="store_const", const="true")
    p.add_argument("--max-samples", dest="max_samples", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--full-scale", dest="full_scale", action="store_const", const="true")


def cmd_shapley(cfg: ExperimentConfig) -> int:
    game, honest = cfg.build_game()
    report = shapley_exact(game)
    rows = [(p, report.phi[p], report.u_max[p], report.gamma_per_player[p])
            for p in range(game.n)]
    comments = [f"game = {game.name}", f"honest = {honest}",
                f"gamma = {format_number(report.gamma)}"]
    if game.protocol_gamma is not None:
        comments.append(f"protocol_gamma = {format_number(game.protocol_gamma)}")
    text = render_csv(["player", "phi", "u_max", "gamma_i"], rows, comments=comments)
    write_text(cfg.out_path("shapley.csv"), text)
    return EXIT_OK


def cmd_dp_table(cfg: ExperimentConfig) -> int:
    game, honest = cfg.build_game()
    R = cfg._int("R")
    if R is None:
        raise ConfigError("dp-table needs R")
    C = int(cfg._float("budget") or 0)
    _gate_full_scale(cfg, R, DESK_SCAN_BUDGET, "this table build")
    table = dp_build(game, honest, R, C)
    rows = [(T, c, table.boundary[T, c]) for T in range(R) for c in range(C + 1)]
    text = render_csv(["T", "c", "E_worst"], rows,
                      comments=[f"game = {game.name}", f"honest = {honest}", f"C = {C}"])
    write_text(cfg.out_path("dp_table.csv"), text)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    game, honest = cfg.build_game()
    if cfg._get("stopping") == "adaptive":
        eps, delta = cfg._float("eps"), cfg._float("delta")
        if eps is None or delta is None:
            raise ConfigError("adaptive stopping needs eps and delta")
        adversary = cfg.build_adversary(game, honest, None)
        record = run_adaptive(game, adversary, eps, delta, cfg.gamma_for(game, honest),
                              honest=honest, seed=cfg.seed)
    else:
        stopping = cfg.stopping(game, honest)
        _gate_full_scale(cfg, stopping.R, DESK_SAMPLE_BUDGET, "this simulation")
        adversary = cfg.build_adversary(game, honest, stopping.planned_R)
        record = run_allocation(game, cfg._get("protocol"), adversary, stopping,
                                honest=honest, seed=cfg.seed,
                                punish=cfg._get("punish"),
                                hard_cap=cfg._int("max_samples"))
    write_text(cfg.out_path("simulate.csv"), record.to_csv())
    return EXIT_OK


def min_samples_scan(game: Game, honest: int, C: int, eps: float, *,
                     r_max: int, verify_margin: float = 0.1) -> tuple[int, "object"]:
    """Smallest sample count whose worst-case mean reward is within ``eps``.

    Extends the boundary pass one sample at a time and returns the first
    ``R`` with ``value[R-1][N][C] / R >= (1 - eps) * phi``; then keeps
    scanning ``verify_margin`` further to confirm the criterion stays
    satisfied.  Exhausting ``r_max`` without crossing raises
    :class:`SampleCapExceeded` carrying the scanned ratios.
    """
    phi = float(shapley_exact(game).phi[honest])
    threshold = (1.0 - eps) * phi
    table = dp_build(game, honest, 1, C)
    crossover = None
    for R in range(1, r_max + 1):
        table.extend_to(R)
        if table.boundary[R - 1, C] / R >= threshold:
            crossover = R
            break
    if crossover is None:
        ratios = [(R, table.boundary[R - 1, C] / R) for R in range(1, r_max + 1)]
        exc = SampleCapExceeded(
            f"no crossover within r_max={r_max}: best ratio "
            f"{max(r for _, r in ratios):.6g} vs threshold {threshold:.6g}"
        )
        exc.scanned = ratios
        raise exc
    verify_to = min(r_max, math.ceil(crossover * (1.0 + verify_margin)))
    table.extend_to(max(verify_to, crossover))
    for R in range(crossover, verify_to + 1):
        if table.boundary[R - 1, C] / R < threshold:
            raise AssertionError(
                f"worst-case ratio dipped back below threshold at R={R}; "
                "crossover is not stable"
            )
    return crossover, table


def cmd_min_samples(cfg: ExperimentConfig) -> int:
    C = int(cfg._float("budget") or 0)
    sweep = cfg._get("sweep")
    points: list[tuple[str, float]] = [("-", math.nan)]
    if sweep is not None:
        try:
            param, values = sweep.split("=", 1)
            param = param.strip()
            points = [(param, float(v)) for v in values.split(",")]
        except ValueError:
            raise ConfigError(f"bad sweep spec {sweep!r}; expected 'param=v1,v2,...'") from None
        if param not in ("n", "C", "eps"):
            raise ConfigError(f"sweep parameter must be n, C, or eps, not {param!r}")
    eps = cfg._float("eps")
    if eps is None:
        if points[0][0] == "eps":
            eps = points[0][1]  # swept values supply it
        else:
            raise ConfigError("min-samples needs eps")
    if points[0][0] == "n":
        cfg = ExperimentConfig(raw={**cfg.raw, "n": str(int(points[0][1]))})
    game, honest = cfg.build_game()

    rows = []
    for param, value in points:
        g, h, c_run, eps_run = game, honest, C, eps
        if param == "n":
            sub = ExperimentConfig(raw={**cfg.raw, "n": str(int(value))})
            g, h = sub.build_game()
        elif param == "C":
            c_run = int(value)
        elif param == "eps":
            eps_run = value
        report = shapley_exact(g)
        gamma_h = report.u_max[h] / report.phi[h] if report.phi[h] > 0 else 1.0
        default_r_max = math.ceil(2.0 * gamma_h * max(c_run, 1) / eps_run) + 8
        r_max = cfg._int("r_max") or default_r_max
        _gate_full_scale(cfg, r_max, DESK_SCAN_BUDGET, f"the scan at {param}={value}")
        min_r, _ = min_samples_scan(g, h, c_run, eps_run, r_max=r_max)
        rows.append((param, value if param != "-" else "", min_r))

    text = render_csv(["parameter", "value", "min_R"], rows,
                      comments=[f"game = {game.name}", f"honest = {honest}",
                                f"eps = {format_number(eps)}", f"C = {C}"])
    write_text(cfg.out_path("min_samples.csv"), text)
    return EXIT_OK


def _sequential_cdf_runs(cfg_raw: dict[str, str], indices: list[int]) -> list[float]:
    cfg = ExperimentConfig(raw=cfg_raw)
    game, honest = cfg.build_game()
    stopping = cfg.stopping(game, honest)
    out = []
    for m in indices:
        adversary = cfg.build_adversary(game, honest, stopping.planned_R)
        record = run_allocation(game, cfg._get("protocol"), adversary, stopping,
                                honest=honest, seed=cfg.seed, punish=cfg._get("punish"),
                                stream_labels=("run", m))
        out.append(record.x_honest)
    return out


def cmd_cdf(cfg: ExperimentConfig) -> int:
    game, honest = cfg.build_game()
    eps, delta = cfg._float("eps"), cfg._float("delta")
    M = cfg.M
    stopping = cfg.stopping(game, honest)
    _gate_full_scale(cfg, stopping.R * M, DESK_SAMPLE_BUDGET, "this experiment")
    phi = float(shapley_exact(game).phi[honest])
    adversary_kind = cfg._get("adversary")

    fast = (adversary_kind in ("passive", "dp") and cfg._get("protocol") == "seq"
            and cfg._get("punish") == "count_only" and stopping.planned_R is not None)
    if fast:
        R = stopping.planned_R
        C = int(cfg._float("budget") or 0) if adversary_kind == "dp" else 0
        if adversary_kind == "dp":
            _gate_full_scale(cfg, state_count(game, honest) * (C + 1),
                             DESK_STATE_BUDGET, "the adversary table")
            table = dp_build(game, honest, R, C)
        else:
            table = None
        stats = parallel_runs(game, honest, R, C, M, cfg.seed,
                              table=table, adversary=adversary_kind)
        x = stats.x_honest
    elif cfg.jobs > 1:
        chunks = np.array_split(np.arange(M), cfg.jobs)
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = list(pool.map(_sequential_cdf_runs, [cfg.raw] * len(chunks),
                                  [list(c) for c in chunks]))
        x = np.concatenate([np.asarray(p) for p in parts])
    else:
        x = np.asarray(_sequential_cdf_runs(cfg.raw, list(range(M))))

    eps_hat = np.maximum(0.0, 1.0 - x / phi)
    order = np.sort(eps_hat)
    rows = [(format_number(order[i]), format_number((i + 1) / M)) for i in range(M)]
    comments = [f"game = {game.name}", f"honest = {honest}", f"M = {M}",
                f"R = {stopping.R}", f"phi = {format_number(phi)}"]
    if eps is not None and delta is not None:
        fraction_within = float(np.mean(eps_hat <= eps))
        right = fraction_within >= 1.0 - delta
        comments.append(f"theory_point = {format_number(eps)},{format_number(1.0 - delta)}")
        comments.append(f"theory_point_right_of_curve = {'true' if right else 'false'}")
    text = render_csv(["eps_hat", "cum_fraction"], rows, comments=comments)
    write_text(cfg.out_path("cdf.csv"), text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapsim",
        description="Secure distributed Shapley-allocation protocol experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in [
        ("shapley", cmd_shapley, False),
        ("simulate", cmd_simulate, True),
        ("min-samples", cmd_min_samples, True),
        ("cdf", cmd_cdf, True),
        ("dp-table", cmd_dp_table, True),
    ]:
        p = sub.add_parser(name)
        _add_common(p)
        if extra:
            _add_run_flags(p)
        if name == "min-samples":
            p.add_argument("--sweep", help="param=v1,v2,... with param in n, C, eps")
            p.add_argument("--r-max", dest="r_max", type=int)
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return args.func(cfg)
    except (SampleCapExceeded, StateCapExceeded) as exc:
        print(f"compute cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:  # ConfigError and library-level validation
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
