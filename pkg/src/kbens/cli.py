"""Command-line surface: fit ensembles, query them, dump reports and
aggregate clouds.

Exit codes are stable: 0 success, 1 input or usage error, 2 computational
failure (fit did not converge, aggregate degenerate).  Machine-readable
output goes to stdout; human summaries and manifests for commands without
an output file go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .aggregate import DegenerateAggregateError, build_aggregate
from .embedding import (
    DEFAULT_EPS_FIT,
    DEFAULT_GAMMA,
    DEFAULT_TAU_POS,
    EmbeddingConfig,
)
from .ensemble import (
    DEFAULT_MEMBERS,
    DigestMismatchError,
    Ensemble,
    EnsembleFitError,
    fit_ensemble,
    knowledge_report,
    query_truth,
)
from .kb import KBError, KnowledgeBase, Query, UnknownTermError, parse_kb
from .trainer import (
    RNG_ALGORITHM_ID,
    NoConvergentDimensionError,
    TrainConfig,
    min_dimension_search,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_COMPUTE = 2


class _Parser(argparse.ArgumentParser):
    # Usage problems are input errors: exit 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run: the command, every parameter
    fully resolved, the store digest, tool version, and wall-clock time."""

    command: str
    parameters: dict
    kb_digest: Optional[str]
    tool_version: str
    rng_algorithm_id: str
    duration_seconds: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "parameters": self.parameters,
                "kb_digest": self.kb_digest,
                "tool_version": self.tool_version,
                "rng_algorithm_id": self.rng_algorithm_id,
                "duration_seconds": self.duration_seconds,
            },
            sort_keys=True,
        )


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path!r}: {exc.strerror or exc}") from exc


def _load_kb(path: str) -> KnowledgeBase:
    return parse_kb(_read_text(path))


def _load_ensemble(path: str) -> Ensemble:
    text = _read_text(path)
    try:
        ensemble = Ensemble.from_json(text)
    except (KeyError, ValueError, TypeError) as exc:
        raise ValueError(f"invalid ensemble file {path!r}: {exc}") from exc
    if not ensemble.members:
        raise ValueError(f"ensemble file {path!r} has no members")
    return ensemble


def _emit_manifest(
    manifest: RunManifest, out_path: Optional[str] = None
) -> None:
    if out_path is not None:
        Path(out_path + ".manifest.json").write_text(
            manifest.to_json() + "\n", encoding="utf-8"
        )
    else:
        print(manifest.to_json(), file=sys.stderr)


def cmd_fit(args) -> int:
    started = time.monotonic()
    if args.members < 1:
        raise UsageError("--members must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    kb = _load_kb(args.kb)
    tcfg = TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        init_scale=args.init_scale,
        retry_budget=args.retry_budget,
    )
    if args.dim is not None:
        cfg = EmbeddingConfig(
            dimension=args.dim, tau_pos=args.tau, gamma=args.gamma, eps_fit=args.fit_tol
        )
        dimension = args.dim
    else:
        template = EmbeddingConfig(
            dimension=1, tau_pos=args.tau, gamma=args.gamma, eps_fit=args.fit_tol
        )
        dimension, _ = min_dimension_search(kb, template, tcfg, args.seed)
        cfg = EmbeddingConfig(
            dimension=dimension, tau_pos=args.tau, gamma=args.gamma, eps_fit=args.fit_tol
        )
    ensemble = fit_ensemble(
        kb, cfg, tcfg, args.seed, members=args.members, jobs=args.jobs
    )
    Path(args.out).write_text(ensemble.to_json(), encoding="utf-8")
    print(f"dimension\t{dimension}")
    print(f"members\t{len(ensemble)}")
    for i, report in enumerate(ensemble.reports):
        print(
            f"member\t{i}\t{report.seed}\t{report.final_error!r}\t{report.epochs_used}"
        )
    manifest = RunManifest(
        command="fit",
        parameters={
            "kb": args.kb,
            "out": args.out,
            "seed": args.seed,
            "members": args.members,
            "dim": dimension,
            "dim_searched": args.dim is None,
            "tau": args.tau,
            "gamma": args.gamma,
            "fit_tol": args.fit_tol,
            "lr": args.lr,
            "init_scale": args.init_scale,
            "max_epochs": args.max_epochs,
            "retry_budget": args.retry_budget,
            "jobs": args.jobs,
        },
        kb_digest=kb.digest(),
        tool_version=__version__,
        rng_algorithm_id=RNG_ALGORITHM_ID,
        duration_seconds=time.monotonic() - started,
    )
    _emit_manifest(manifest, args.out)
    print(
        f"fitted {len(ensemble)} members at dimension {dimension} -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_query(args) -> int:
    started = time.monotonic()
    ensemble = _load_ensemble(args.ensemble)
    kb_digest = None
    if args.kb is not None:
        kb = _load_kb(args.kb)
        kb_digest = kb.digest()
        if kb_digest != ensemble.kb_digest:
            raise DigestMismatchError(
                "ensemble digest does not match the given knowledge base"
            )
    member = ensemble.members[0]
    for name in (args.subject, args.object):
        member.entity_point(name)
    member.relation_vector(args.relation)
    verdict = query_truth(
        ensemble,
        Query(args.relation, args.subject, args.object),
        quorum_slack=args.delta,
    )
    print(f"{verdict.value}\t{verdict.satisfied_fraction:.6f}")
    manifest = RunManifest(
        command="query",
        parameters={
            "ensemble": args.ensemble,
            "relation": args.relation,
            "subject": args.subject,
            "object": args.object,
            "kb": args.kb,
            "delta": args.delta,
        },
        kb_digest=kb_digest or ensemble.kb_digest,
        tool_version=__version__,
        rng_algorithm_id=RNG_ALGORITHM_ID,
        duration_seconds=time.monotonic() - started,
    )
    _emit_manifest(manifest)
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.monotonic()
    ensemble = _load_ensemble(args.ensemble)
    kb = _load_kb(args.kb)
    report = knowledge_report(
        ensemble, kb, include_self_pairs=args.self_pairs, quorum_slack=args.delta
    )
    sys.stdout.write(report.to_tsv())
    manifest = RunManifest(
        command="report",
        parameters={
            "ensemble": args.ensemble,
            "kb": args.kb,
            "self_pairs": args.self_pairs,
            "delta": args.delta,
        },
        kb_digest=kb.digest(),
        tool_version=__version__,
        rng_algorithm_id=RNG_ALGORITHM_ID,
        duration_seconds=time.monotonic() - started,
    )
    _emit_manifest(manifest)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    started = time.monotonic()
    ensemble = _load_ensemble(args.ensemble)
    aggregate = build_aggregate(
        ensemble,
        dedup_tolerance=args.dedup_tol,
        max_cloud_diameter=args.max_diameter,
    )
    Path(args.out).write_text(aggregate.to_json(), encoding="utf-8")
    if args.clouds_tsv is not None:
        Path(args.clouds_tsv).write_text(aggregate.clouds_tsv(), encoding="utf-8")
    max_diameter = max(aggregate.diameters.values(), default=0.0)
    print(f"retained\t{len(aggregate.member_indices)}")
    print(f"reference_index\t{aggregate.reference_index}")
    print(f"max_diameter\t{max_diameter!r}")
    manifest = RunManifest(
        command="aggregate",
        parameters={
            "ensemble": args.ensemble,
            "out": args.out,
            "dedup_tol": args.dedup_tol,
            "max_diameter": args.max_diameter,
            "clouds_tsv": args.clouds_tsv,
        },
        kb_digest=ensemble.kb_digest,
        tool_version=__version__,
        rng_algorithm_id=RNG_ALGORITHM_ID,
        duration_seconds=time.monotonic() - started,
    )
    _emit_manifest(manifest, args.out)
    print(
        f"retained {len(aggregate.member_indices)} members"
        f" (max cloud diameter {max_diameter:.6g}) -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="kbens",
        description=(
            "Represent a signed triple store as an ensemble of translational "
            "embeddings and answer queries with TRUE / FALSE / UNKNOWN."
        ),
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"kbens {__version__} (rng: {RNG_ALGORITHM_ID})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit an ensemble from a KB file")
    fit.add_argument("kb", help="KB file (relation<TAB>subject<TAB>object<TAB>+/-)")
    fit.add_argument("-o", "--out", required=True, help="ensemble JSON output path")
    fit.add_argument("--seed", type=int, required=True, help="base seed (reproducibility first; no wall-clock seeding)")
    fit.add_argument("--members", type=int, default=DEFAULT_MEMBERS)
    fit.add_argument("--dim", type=int, default=None, help="bypass the minimal-dimension search")
    fit.add_argument("--tau", type=float, default=DEFAULT_TAU_POS, help="satisfaction radius")
    fit.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="negative margin")
    fit.add_argument("--fit-tol", type=float, default=DEFAULT_EPS_FIT, help="convergence threshold on cumulative error")
    fit.add_argument("--lr", type=float, default=0.1)
    fit.add_argument("--init-scale", type=float, default=1.0)
    fit.add_argument("--max-epochs", type=int, default=5000)
    fit.add_argument("--retry-budget", type=int, default=3)
    fit.add_argument("--jobs", type=int, default=1, help="parallel member fitting; output is identical for any value")
    fit.set_defaults(func=cmd_fit)

    query = sub.add_parser("query", help="ask one ternary query against an ensemble")
    query.add_argument("ensemble", help="ensemble JSON path")
    query.add_argument("relation")
    query.add_argument("subject")
    query.add_argument("object")
    query.add_argument("--kb", default=None, help="optional KB file to digest-check against")
    query.add_argument("--delta", type=float, default=0.0, help="quorum slack (0 = strict unanimity)")
    query.set_defaults(func=cmd_query)

    report = sub.add_parser("report", help="evaluate every asserted and unstated fact")
    report.add_argument("ensemble")
    report.add_argument("kb")
    report.add_argument("--self-pairs", action="store_true", help="include r(a, a) queries")
    report.add_argument("--delta", type=float, default=0.0)
    report.set_defaults(func=cmd_report)

    aggregate = sub.add_parser("aggregate", help="build the cloud model from an ensemble")
    aggregate.add_argument("ensemble")
    aggregate.add_argument("-o", "--out", required=True, help="aggregate JSON output path")
    aggregate.add_argument("--dedup-tol", type=float, default=1e-6)
    aggregate.add_argument("--max-diameter", type=float, default=None)
    aggregate.add_argument("--clouds-tsv", default=None, help="also dump clouds as TSV")
    aggregate.set_defaults(func=cmd_aggregate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, KBError, UnknownTermError, DigestMismatchError,
            UsageError, ValueError) as exc:
        print(f"kbens {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EnsembleFitError, NoConvergentDimensionError, DegenerateAggregateError) as exc:
        print(f"kbens {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
