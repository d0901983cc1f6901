"""Command-line front end: `fairsim run ...` and `fairsim sweep ...`.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import (
    SimulationConfig,
    SyntheticSpec,
    emit_results,
    run_simulation,
    sweep_alpha,
)
from .metrics import MetricConfig
from .policies import PLANNING_KINDS, PolicyConfig
from .qp import PlannerConfig
from .user_model import ExaminationCurve

POLICY_NAMES = {
    "fara": "fara",
    "fara-horiz": "fara_horiz",
    "topk": "topk",
    "randomk": "randomk",
    "fairco": "fairco",
    "mcfair": "mcfair",
}
SETTING_NAMES = {"post": "post_processing", "online": "online"}


class CliConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map config errors to 1
        raise CliConfigError(message)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="path to a LETOR-format file")
    src.add_argument(
        "--synthetic",
        metavar="Q,D,YMAX[,SEED]",
        help="generate a synthetic dataset: queries, docs per query, max grade",
    )
    parser.add_argument("--partition", choices=("train", "valid", "test"), default="test")
    parser.add_argument("--policy", choices=sorted(POLICY_NAMES), default="fara")
    parser.add_argument("--setting", choices=("post", "online"), default="post")
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--delta-t", type=int, default=50)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--e-min", type=float, default=10.0)
    parser.add_argument("--steps", type=int, required=True)
    parser.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated rng seeds")
    parser.add_argument("--k-s", type=int, default=5)
    parser.add_argument("--gamma", type=float, default=0.995)
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--output", required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="fairsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one simulation configuration")
    _add_run_flags(run_p)
    sweep_p = sub.add_parser("sweep", help="sweep the tradeoff parameter")
    sweep_p.add_argument(
        "--alphas", required=True, metavar="START:END:STEP", help="inclusive alpha grid"
    )
    _add_run_flags(sweep_p)
    return parser


def _parse_synthetic(text: str) -> SyntheticSpec:
    parts = text.split(",")
    if len(parts) not in (3, 4):
        raise CliConfigError(f"--synthetic expects Q,D,YMAX[,SEED], got {text!r}")
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise CliConfigError(f"--synthetic expects integers, got {text!r}") from None
    seed = numbers[3] if len(numbers) == 4 else 0
    return SyntheticSpec(numbers[0], numbers[1], numbers[2], seed)


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise CliConfigError(f"bad --seeds value {text!r}") from None


def _parse_alphas(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise CliConfigError(f"--alphas expects START:END:STEP, got {text!r}")
    try:
        start, end, step = (float(p) for p in parts)
    except ValueError:
        raise CliConfigError(f"--alphas expects numbers, got {text!r}") from None
    if step <= 0 or end < start:
        raise CliConfigError(f"--alphas needs START <= END and STEP > 0, got {text!r}")
    return [float(a) for a in np.arange(start, end + step / 2, step)]


def _config_from_args(args: argparse.Namespace) -> SimulationConfig:
    dataset_ref = args.dataset if args.dataset else _parse_synthetic(args.synthetic)
    setting = SETTING_NAMES[args.setting]
    kind = POLICY_NAMES[args.policy]
    planner_alpha = args.alpha if kind in PLANNING_KINDS else PlannerConfig.alpha
    try:
        planner = PlannerConfig(
            delta_t=args.delta_t,
            alpha=planner_alpha,
            beta=args.beta,
            e_min=args.e_min,
            mode=setting,
        )
        curve = ExaminationCurve.log_decay(args.k_s)
        policy = PolicyConfig(
            kind=kind, setting=setting, alpha=args.alpha, planner=planner, curve=curve
        )
        cutoffs = tuple(c for c in (1, 3, 5) if c <= args.k_s)
        metric = MetricConfig(gamma=args.gamma, cutoffs=cutoffs, k_s=args.k_s)
        return SimulationConfig(
            dataset_ref=dataset_ref,
            policy=policy,
            steps=args.steps,
            seeds=_parse_seeds(args.seeds),
            partition=args.partition,
            metric=metric,
            epsilon=args.epsilon,
            output_path=args.output,
        )
    except ValueError as exc:
        raise CliConfigError(str(exc)) from exc


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(args)
        alphas = _parse_alphas(args.alphas) if args.command == "sweep" else None
    except CliConfigError as exc:
        print(f"fairsim: configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run":
            results = run_simulation(config)
        else:
            results = sweep_alpha(config, alphas)
        emit_results(results, args.output, format=args.format)
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps failures to exit 2
        print(f"fairsim: runtime error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.format} results to {args.output}")
    return 0


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
