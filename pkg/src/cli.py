#!/usr/bin/env python3
"""Command-line front end of the auditor.

Usage:
    python -m src.cli audit CONFIG [--out DIR] [--workers N] [--db PATH]
    python -m src.cli sweep CONFIG [--out DIR] [--workers N] [--db PATH]
    python -m src.cli compare CONFIG [--kinds small,small+narrow] [--out DIR] [--workers N]
    python -m src.cli reestimate SCORES_CSV [--report REPORT_JSON] [--delta D] [--method M] [--out DIR]
    python -m src.cli replay CONFIG --run N [--world B] [--out DIR]

Exit codes: 0 on completion (whatever the verdict), 2 for configuration
errors, 3 for failures while running.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

import pandas as pd

from src.config import Config
from src.core.scores import ScoreSet
from src.errors import ConfigError
from src.estimator import AuditMethod
from src.game.rounds import derive_run_seed, replay_model
from src.game.runner import AuditReport, build_config, report_from_scores, resolve_pair, run_audit
from src.game.settings import WorstCaseSettings, load_settings, parse_settings
from src.mechanisms.serialization import save_model
from src.worstcase import WorstCaseKind

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_COMPARE_KINDS = ["small", "small+narrow", "small+repeat", "small+narrow+repeat"]


@dataclass(frozen=True)
class RunManifest:
    """Where one audit's artifacts were written and what it concluded."""
    config_path: str
    output_dir: str
    report_path: str
    scores_path: str
    verdict: str
    eps_emp: float
    fold_std: float
    claimed_epsilon: float
    elapsed_seconds: float
    audit_id: Optional[int] = None


def progress_callback(current: int, total: int, message: str):
    """Log progress of long-running loops."""
    percentage = (current / total * 100) if total > 0 else 0
    logger.info(f"[{current}/{total} ({percentage:.1f}%)] {message}")


def write_report_json(report: AuditReport, path: Path) -> None:
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")


def persist_audit(
    report: AuditReport,
    config_path: str,
    out_dir: Path,
    db_path: Optional[str],
) -> RunManifest:
    """Write report, scores and manifest, and store the audit when enabled."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    scores_path = out_dir / "scores.csv"
    write_report_json(report, report_path)
    report.scores.save_csv(scores_path)

    audit_id = None
    if db_path:
        audit_id = store_audit(report, db_path)

    manifest = RunManifest(
        config_path=str(config_path),
        output_dir=str(out_dir),
        report_path=str(report_path),
        scores_path=str(scores_path),
        verdict=report.verdict.value,
        eps_emp=report.eps_emp,
        fold_std=report.fold_std,
        claimed_epsilon=report.claimed_epsilon,
        elapsed_seconds=round(report.elapsed_seconds, 3),
        audit_id=audit_id,
    )
    (out_dir / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2) + "\n")
    logger.info(f"Wrote {report_path} ({report.verdict.value})")
    return manifest


def store_audit(report: AuditReport, db_path: str) -> Optional[int]:
    """Record an audit in the DuckDB store; failures are logged, not raised."""
    from src.database import AuditStore, DuckDBConnection, create_schema

    try:
        with DuckDBConnection(db_path) as db:
            if not create_schema(db.connection):
                return None
            return AuditStore(db.connection).record_audit(report)
    except Exception as e:
        logger.error(f"Audit store unavailable: {e}", exc_info=True)
        return None


def _db_path(args) -> Optional[str]:
    if args.db:
        return args.db
    return Config.AUDIT_DATABASE_PATH if Config.USE_DATABASE else None


def _out_dir(args, config_path: Path) -> Path:
    if args.out:
        return Path(args.out)
    return Path(Config.AUDIT_OUTPUT_DIR) / config_path.stem


def cmd_audit(args) -> int:
    config_path = Path(args.config)
    settings = load_settings(config_path)
    cfg = build_config(settings, base_dir=config_path.parent, workers=args.workers)
    out_dir = _out_dir(args, config_path)
    features_path = None
    if args.export_features:
        out_dir.mkdir(parents=True, exist_ok=True)
        features_path = out_dir / "features.csv"
    report = run_audit(cfg, workers=args.workers, progress_callback=progress_callback,
                       features_path=features_path)
    persist_audit(report, str(config_path), out_dir, _db_path(args))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config_path = Path(args.config)
    settings = load_settings(config_path)
    if not settings.epsilons:
        raise ConfigError("sweep needs a non-empty 'epsilons' list in the config")

    pair = resolve_pair(settings, config_path.parent, args.workers, progress_callback)
    out_dir = _out_dir(args, config_path)
    rows = []
    for eps in settings.epsilons:
        logger.info(f"Sweep: auditing at eps={eps}")
        cfg = build_config(settings, base_dir=config_path.parent, epsilon=eps, pair=pair)
        report = run_audit(cfg, workers=args.workers, progress_callback=progress_callback)
        manifest = persist_audit(report, str(config_path), out_dir / f"eps_{eps:g}", _db_path(args))
        rows.append({
            "epsilon": eps,
            "eps_emp": manifest.eps_emp,
            "stddev": manifest.fold_std,
            "max_auditable_eps": report.estimate.max_auditable_eps,
            "verdict": manifest.verdict,
        })

    summary = pd.DataFrame(rows)
    summary.to_csv(out_dir / "summary.csv", index=False)
    logger.info(f"Sweep summary written to {out_dir / 'summary.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config_path = Path(args.config)
    settings = load_settings(config_path)
    if args.kinds:
        labels = [k.strip() for k in args.kinds.split(",") if k.strip()]
    else:
        labels = settings.compare_kinds or DEFAULT_COMPARE_KINDS

    out_dir = _out_dir(args, config_path)
    base = settings.pair.worstcase or WorstCaseSettings()
    rows = []
    for label in labels:
        try:
            kind = WorstCaseKind.parse(label)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        worstcase = base.model_copy(update={"small": kind.small, "narrow": kind.narrow, "repeat": kind.repeat})
        variant_settings = settings.model_copy(
            update={"pair": settings.pair.model_copy(update={"worstcase": worstcase})})
        cfg = build_config(variant_settings, base_dir=config_path.parent, workers=args.workers)
        report = run_audit(cfg, workers=args.workers, progress_callback=progress_callback)
        manifest = persist_audit(report, str(config_path), out_dir / kind.label, _db_path(args))
        rows.append({
            "kind": kind.label,
            "eps_emp": manifest.eps_emp,
            "stddev": manifest.fold_std,
            "auc": report.auc,
            "verdict": manifest.verdict,
        })

    pd.DataFrame(rows).to_csv(out_dir / "compare.csv", index=False)
    logger.info(f"Worst-case comparison written to {out_dir / 'compare.csv'}")
    return EXIT_OK


def cmd_reestimate(args) -> int:
    scores_path = Path(args.scores)
    report_path = Path(args.report) if args.report else scores_path.parent / "report.json"
    if not report_path.exists():
        raise ConfigError(f"No report found at {report_path}; pass --report")
    previous = json.loads(report_path.read_text())
    settings = parse_settings(previous["config"])

    scores = ScoreSet.load_csv(scores_path)
    delta = args.delta if args.delta is not None else settings.audit_delta
    method = AuditMethod(args.method) if args.method else settings.method
    confidence = args.confidence if args.confidence is not None else settings.confidence
    folds = args.folds if args.folds is not None else settings.folds
    if scores.fold_scores is not None and folds > 1 and folds != scores.fold_scores.shape[1]:
        raise ConfigError(f"--folds must be 1 or {scores.fold_scores.shape[1]}: the classifiers were trained per fold")

    echo = dict(previous["config"])
    echo.update({"delta": delta, "method": method.value, "confidence": confidence, "folds": folds})
    report = report_from_scores(scores, previous["claimed_epsilon"], delta, confidence, method, folds, echo)

    out_dir = Path(args.out) if args.out else scores_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out_dir / "reestimate.json")
    logger.info(f"Re-estimated report written to {out_dir / 'reestimate.json'} ({report.verdict.value})")
    return EXIT_OK


def cmd_replay(args) -> int:
    config_path = Path(args.config)
    settings = load_settings(config_path)
    if args.run < 0 or args.run >= settings.n_models:
        raise ConfigError(f"--run must lie in [0, {settings.n_models})")
    cfg = build_config(settings, base_dir=config_path.parent, workers=args.workers)
    b, model = replay_model(cfg.round_spec, derive_run_seed(settings.master_seed, args.run), args.world)

    out_path = _out_dir(args, config_path) / f"model_{args.run}.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out_path)
    logger.info(f"Run {args.run} (b={b}) model written to {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdg-audit",
        description="Empirically audit differentially private synthetic-data generators",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_run_options(sub):
        sub.add_argument("config", help="Audit config JSON")
        sub.add_argument("--out", default=None,
                         help=f"Output directory (default: {Config.AUDIT_OUTPUT_DIR}/<config name>)")
        sub.add_argument("--workers", type=int, default=Config.AUDIT_WORKERS,
                         help=f"Worker processes (default: {Config.AUDIT_WORKERS})")
        sub.add_argument("--db", default=None, help="DuckDB audit store to record results in")

    audit = subparsers.add_parser("audit", help="Run one audit")
    add_run_options(audit)
    audit.add_argument("--export-features", action="store_true",
                       help="Also write the attack's feature matrix to features.csv")
    add_run_options(subparsers.add_parser("sweep", help="Audit at every epsilon of the config's 'epsilons'"))
    compare = subparsers.add_parser("compare", help="Audit across worst-case dataset kinds")
    add_run_options(compare)
    compare.add_argument("--kinds", default=None, help="Comma-separated kinds, e.g. small,small+narrow")

    reestimate = subparsers.add_parser("reestimate", help="Recompute a report from stored scores")
    reestimate.add_argument("scores", help="scores.csv written by an earlier audit")
    reestimate.add_argument("--report", default=None, help="report.json of that audit (default: next to the scores)")
    reestimate.add_argument("--delta", type=float, default=None)
    reestimate.add_argument("--confidence", type=float, default=None)
    reestimate.add_argument("--method", choices=[m.value for m in AuditMethod], default=None)
    reestimate.add_argument("--folds", type=int, default=None)
    reestimate.add_argument("--out", default=None)

    replay = subparsers.add_parser("replay", help="Refit the model of one run and save it as JSON")
    add_run_options(replay)
    replay.add_argument("--run", type=int, required=True, help="Run index to replay")
    replay.add_argument("--world", type=int, choices=[0, 1], default=None,
                        help="Force the world bit instead of the one the run drew")
    return parser


COMMANDS = {
    "audit": cmd_audit,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "reestimate": cmd_reestimate,
    "replay": cmd_replay,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the command and map failures to exit codes."""
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK

    if getattr(args, "workers", 1) < 1:
        logger.error("--workers must be at least 1")
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
