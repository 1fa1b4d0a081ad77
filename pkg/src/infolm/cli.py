"""Command-line driver: scoring runs, meta-evaluation, sweeps, reports.

Commands: score, evaluate, sweep, compare, idf, export-distributions.
Flag values override config-file keys (same names, underscores), which
override built-in defaults; every run echoes its resolved configuration
into <out>/run_config.json.  Exit status: 0 full success, 2 partial
success under --skip-errors, 1 failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import metaeval
from .backends import (
    BackendDescriptor,
    DistributionProvider,
    MockModel,
    RemoteClient,
    check_descriptor,
    export_store,
    load_distribution_store,
)
from .data import EvalDataset
from .distributions import IdfTable
from .errors import ConfigError, InfoLMError, ScoringError
from .matrix import ScoreMatrix, format_value
from .measures import MeasureKind, MeasureSpec
from .scoring import Weighting, preset, score_dataset, build_idf_table

__all__ = ["main"]

DEFAULTS = {
    "backend": "mock",
    "seed": 0,
    "vocab_size": 16,
    "smoothing": 0.1,
    "store": None,
    "endpoint": None,
    "timeout": 30.0,
    "batch_size": 8,
    "top_k": 256,
    "preset": None,
    "measure": None,
    "alpha": None,
    "beta": None,
    "symmetrize": True,
    "epsilon_floor": 1e-12,
    "temperature": None,
    "weighting": "idf",
    "idf_corpus": "union",
    "idf_table": None,
    "workers": 1,
    "skip_errors": False,
    "figures": False,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); 2 means partial success here
        raise ConfigError(message)


def _add_backend_flags(parser):
    parser.add_argument("--backend", choices=["mock", "store", "remote"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--vocab-size", type=int, dest="vocab_size")
    parser.add_argument("--smoothing", type=float)
    parser.add_argument("--store", help="distribution store file path")
    parser.add_argument("--endpoint", help="sidecar URL (or $INFOLM_SIDECAR_URL)")
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--top-k", type=int, dest="top_k")
    parser.add_argument("--temperature", type=float)


def _add_measure_flags(parser):
    parser.add_argument("--preset")
    parser.add_argument(
        "--measure", choices=[kind.value for kind in MeasureKind]
    )
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument(
        "--no-symmetrize", action="store_false", dest="symmetrize", default=None
    )
    parser.add_argument("--epsilon-floor", type=float, dest="epsilon_floor")


def _add_run_flags(parser):
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--weighting", choices=["idf", "uniform"])
    parser.add_argument(
        "--idf-corpus", choices=["union", "references", "candidates"],
        dest="idf_corpus",
    )
    parser.add_argument("--idf-table", dest="idf_table")
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--skip-errors", action="store_true", dest="skip_errors", default=None
    )
    parser.add_argument("--config", help="JSON config file")


def build_parser() -> _Parser:
    parser = _Parser(prog="infolm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score a dataset into a CSV")
    _add_run_flags(p_score)
    _add_backend_flags(p_score)
    _add_measure_flags(p_score)

    p_eval = sub.add_parser("evaluate", help="correlate scores with human judgments")
    _add_run_flags(p_eval)
    _add_backend_flags(p_eval)
    _add_measure_flags(p_eval)
    p_eval.add_argument("--criteria", help="comma-separated criteria (default: all)")
    p_eval.add_argument(
        "--coefficients", default=None,
        help="comma-separated subset of pearson,spearman,kendall",
    )
    p_eval.add_argument(
        "--level", choices=["text", "system", "both"], default=None
    )
    p_eval.add_argument("--figures", action="store_true", default=None)
    p_eval.add_argument(
        "--dist-threshold", type=float, dest="dist_threshold",
        help="human-score threshold for the score-distribution report",
    )

    p_sweep = sub.add_parser("sweep", help="temperature or (alpha, beta) sweep")
    _add_run_flags(p_sweep)
    _add_backend_flags(p_sweep)
    _add_measure_flags(p_sweep)
    p_sweep.add_argument(
        "--kind", choices=["temperature", "ab-grid"], required=True
    )
    p_sweep.add_argument("--criterion", required=True)
    p_sweep.add_argument("--coefficients", default=None)
    p_sweep.add_argument("--temperatures", help="comma-separated, e.g. 0.5,1,2")
    p_sweep.add_argument("--alphas", help="comma-separated alpha grid values")
    p_sweep.add_argument("--betas", help="comma-separated beta grid values")
    p_sweep.add_argument("--figures", action="store_true", default=None)

    p_cmp = sub.add_parser(
        "compare", help="metric-vs-metric correlations and Williams tests"
    )
    p_cmp.add_argument(
        "--scores", action="append", required=True, metavar="NAME=CSV",
        help="score CSV per metric (repeat; >= 2)",
    )
    p_cmp.add_argument("--dataset", required=True)
    p_cmp.add_argument("--criterion", required=True)
    p_cmp.add_argument("--coefficient", default="pearson")
    p_cmp.add_argument("--per-system", action="store_true", dest="per_system")
    p_cmp.add_argument(
        "--dist-threshold", type=float, dest="dist_threshold", default=None
    )
    p_cmp.add_argument("--figures", action="store_true", default=None)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--config")

    p_idf = sub.add_parser("idf", help="build an IDF table from a corpus file")
    p_idf.add_argument("--corpus", required=True, help="one document per line")
    p_idf.add_argument("--out", required=True, help="output table path")
    _add_backend_flags(p_idf)
    p_idf.add_argument("--config")

    p_export = sub.add_parser(
        "export-distributions", help="capture backend responses into a store file"
    )
    p_export.add_argument("--dataset", required=True)
    p_export.add_argument("--out", required=True, help="output store path")
    _add_backend_flags(p_export)
    p_export.add_argument("--config")

    return parser


def _resolve(args) -> dict:
    """flags > config file > defaults, for every known key."""
    resolved = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        for key, value in loaded.items():
            if key not in DEFAULTS:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            resolved[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    if resolved["endpoint"] is None:
        resolved["endpoint"] = os.environ.get("INFOLM_SIDECAR_URL")
    return resolved


def _build_provider(cfg: dict) -> DistributionProvider:
    backend = cfg["backend"]
    temperature = cfg["temperature"] if cfg["temperature"] is not None else 1.0
    if backend == "mock":
        return MockModel(
            seed=int(cfg["seed"]),
            vocab_size=int(cfg["vocab_size"]),
            smoothing=float(cfg["smoothing"]),
            temperature=temperature,
        )
    if backend == "store":
        if not cfg["store"]:
            raise ConfigError("--store is required with the store backend")
        provider = load_distribution_store(cfg["store"])
        if cfg["temperature"] is not None:
            expected = BackendDescriptor(
                vocab_size=provider.descriptor.vocab_size,
                model_id="",
                tokenizer_fingerprint="",
                temperature=float(cfg["temperature"]),
            )
            check_descriptor(provider.descriptor, expected)
        return provider
    if backend == "remote":
        if not cfg["endpoint"]:
            raise ConfigError(
                "--endpoint (or INFOLM_SIDECAR_URL) is required with the "
                "remote backend"
            )
        return RemoteClient(
            cfg["endpoint"],
            timeout=float(cfg["timeout"]),
            batch_size=int(cfg["batch_size"]),
            temperature=temperature,
            top_k=int(cfg["top_k"]),
        )
    raise ConfigError(f"unknown backend {cfg['backend']!r}")


def _resolve_measure(cfg: dict) -> MeasureSpec:
    if cfg["preset"] and cfg["measure"]:
        raise ConfigError("--preset and --measure are mutually exclusive")
    if cfg["preset"]:
        chosen = preset(cfg["preset"])
        if cfg["temperature"] is None:
            cfg["temperature"] = chosen.temperature
        return chosen.measure
    kind = MeasureKind(cfg["measure"]) if cfg["measure"] else MeasureKind.FISHER_RAO
    return MeasureSpec(
        kind=kind,
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        symmetrize=bool(cfg["symmetrize"]),
        epsilon_floor=float(cfg["epsilon_floor"]),
    )


def _resolve_idf(cfg, dataset, provider):
    if cfg["weighting"] != "idf":
        return None
    if cfg["idf_table"]:
        return IdfTable.load(cfg["idf_table"])
    return build_idf_table(dataset, provider, corpus=cfg["idf_corpus"])


def _prepare_out(cfg: dict, out: str, command: str) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"command": command}
    echo.update({k: cfg.get(k) for k in sorted(cfg)})
    (out_dir / "run_config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir


def _write_csv(path: Path, header, rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def _report_failures(matrix: ScoreMatrix) -> None:
    for text_id, system_id, message in matrix.failures:
        print(f"warning: skipped ({text_id!r}, {system_id!r}): {message}",
              file=sys.stderr)


def _split(value: str | None, fallback: tuple[str, ...]) -> tuple[str, ...]:
    if value is None:
        return fallback
    parts = tuple(part.strip() for part in str(value).split(",") if part.strip())
    if not parts:
        raise ConfigError(f"empty list value: {value!r}")
    return parts


def _floats(value: str | None, flag: str) -> tuple[float, ...]:
    if not value:
        raise ConfigError(f"{flag} is required for this sweep")
    try:
        return tuple(float(part) for part in str(value).split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def cmd_score(args) -> int:
    cfg = _resolve(args)
    measure = _resolve_measure(cfg)
    dataset = EvalDataset.load(args.dataset)
    provider = _build_provider(cfg)
    idf = _resolve_idf(cfg, dataset, provider)
    out_dir = _prepare_out(cfg, args.out, "score")
    matrix = score_dataset(
        dataset, measure, provider, idf,
        weighting=Weighting(cfg["weighting"]),
        skip_errors=bool(cfg["skip_errors"]),
        workers=int(cfg["workers"]),
    )
    matrix.save_csv(out_dir / "scores.csv")
    _report_failures(matrix)
    print(f"wrote {out_dir / 'scores.csv'}")
    return 2 if matrix.failures else 0


def _correlation_rows(reports):
    for report in reports:
        yield (
            report.criterion,
            report.coefficient,
            report.level,
            format_value(report.value),
            report.n_effective,
            ";".join(report.warnings),
        )


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    measure = _resolve_measure(cfg)
    dataset = EvalDataset.load(args.dataset)
    criteria = _split(args.criteria, dataset.criteria)
    for criterion in criteria:
        if criterion not in dataset.criteria:
            raise ConfigError(
                f"unknown criterion {criterion!r}; available: "
                f"{', '.join(dataset.criteria)}"
            )
    coefficients = _split(args.coefficients, ("pearson", "spearman", "kendall"))
    levels = ("text", "system") if args.level in (None, "both") else (args.level,)
    provider = _build_provider(cfg)
    idf = _resolve_idf(cfg, dataset, provider)
    out_dir = _prepare_out(cfg, args.out, "evaluate")
    matrix = score_dataset(
        dataset, measure, provider, idf,
        weighting=Weighting(cfg["weighting"]),
        skip_errors=bool(cfg["skip_errors"]),
        workers=int(cfg["workers"]),
    )
    matrix.save_csv(out_dir / "scores.csv")
    _report_failures(matrix)

    reports = []
    degenerate = []
    for criterion in criteria:
        human = dataset.human_matrix(criterion)
        for level in levels:
            run = metaeval.text_level if level == "text" else metaeval.system_level
            for coefficient in coefficients:
                try:
                    reports.append(run(matrix, human, coefficient, criterion))
                except InfoLMError as exc:
                    degenerate.append(
                        (criterion, coefficient, level, "", 0,
                         f"{type(exc).__name__}: {exc}")
                    )
    _write_csv(
        out_dir / "correlations.csv",
        ("criterion", "coefficient", "level", "value", "n_effective", "warnings"),
        list(_correlation_rows(reports)) + degenerate,
    )

    distribution = None
    if args.dist_threshold is not None:
        distribution = metaeval.score_distribution_report(
            matrix, dataset.human_matrix(criteria[0]), args.dist_threshold
        )
        _write_csv(
            out_dir / "score_distribution.csv",
            ("bin_low", "bin_high", "high_count", "low_count"),
            [
                (
                    format_value(distribution.bin_edges[i]),
                    format_value(distribution.bin_edges[i + 1]),
                    int(distribution.high_counts[i]),
                    int(distribution.low_counts[i]),
                )
                for i in range(len(distribution.high_counts))
            ],
        )

    summary = {
        "command": "evaluate",
        "measure": measure.label(),
        "reports": [asdict(r) for r in reports],
        "degenerate": [list(d) for d in degenerate],
        "failures": [list(f) for f in matrix.failures],
    }
    if distribution is not None:
        summary["score_distribution"] = {
            "threshold": distribution.threshold,
            "separation": distribution.separation,
            "n_high": distribution.n_high,
            "n_low": distribution.n_low,
        }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    if cfg["figures"] or args.figures:
        from . import figures

        if reports:
            figures.plot_correlations(reports, out_dir / "correlations.png")
        if distribution is not None:
            figures.plot_score_distribution(
                {matrix.measure_label: distribution},
                out_dir / "score_distribution.png",
            )
    print(f"wrote {out_dir / 'correlations.csv'}")
    return 2 if matrix.failures else 0


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    dataset = EvalDataset.load(args.dataset)
    if args.criterion not in dataset.criteria:
        raise ConfigError(
            f"unknown criterion {args.criterion!r}; available: "
            f"{', '.join(dataset.criteria)}"
        )
    out_dir = _prepare_out(cfg, args.out, f"sweep-{args.kind}")
    weighting = Weighting(cfg["weighting"])
    workers = int(cfg["workers"])

    if args.kind == "temperature":
        measure = _resolve_measure(cfg)
        temperatures = _floats(args.temperatures, "--temperatures")
        coefficients = _split(args.coefficients, ("pearson",))

        def factory(t: float) -> DistributionProvider:
            sub = dict(cfg)
            sub["temperature"] = t
            return _build_provider(sub)

        points = metaeval.temperature_sweep(
            dataset, measure, factory, temperatures, args.criterion,
            coefficients, weighting=weighting, workers=workers,
        )
        _write_csv(
            out_dir / "sweep.csv",
            ("temperature", "criterion", "coefficient", "value", "error"),
            [
                (
                    format_value(p.temperature),
                    p.criterion,
                    p.coefficient,
                    "" if p.value is None else format_value(p.value),
                    p.error or "",
                )
                for p in points
            ],
        )
        if cfg["figures"] or args.figures:
            from . import figures

            figures.plot_temperature_sweep(points, out_dir / "sweep.png")
    else:
        provider = _build_provider(cfg)
        idf = _resolve_idf(cfg, dataset, provider)
        alphas = _floats(args.alphas, "--alphas")
        betas = _floats(args.betas, "--betas")
        coefficient = _split(args.coefficients, ("pearson",))[0]
        grid = metaeval.ab_grid_sweep(
            dataset, alphas, betas, provider, args.criterion, coefficient,
            weighting=weighting, idf=idf,
            symmetrize=bool(cfg["symmetrize"]), workers=workers,
        )
        _write_csv(
            out_dir / "sweep.csv",
            ("alpha", "beta", "value", "flag"),
            [
                (
                    format_value(cell.alpha),
                    format_value(cell.beta),
                    "" if cell.value is None else format_value(cell.value),
                    cell.flag or "",
                )
                for row in grid
                for cell in row
            ],
        )
        if cfg["figures"] or args.figures:
            from . import figures

            figures.plot_ab_grid(grid, out_dir / "sweep.png")
    print(f"wrote {out_dir / 'sweep.csv'}")
    return 0


def cmd_compare(args) -> int:
    cfg = _resolve(args)
    named = []
    for item in args.scores:
        name, _, path = item.partition("=")
        if not name or not path:
            raise ConfigError(f"--scores expects NAME=CSV, got {item!r}")
        named.append((name, path))
    if len(named) < 2:
        raise ConfigError("compare needs at least 2 --scores entries")
    matrices = {name: ScoreMatrix.from_csv(path) for name, path in named}
    dataset = EvalDataset.load(args.dataset)
    human = dataset.human_matrix(args.criterion)
    out_dir = _prepare_out(cfg, args.out, "compare")

    names, corr = metaeval.metric_correlation_matrix(
        matrices, args.coefficient, per_system=args.per_system
    )
    _write_csv(
        out_dir / "metric_correlation.csv",
        ("metric", *names),
        [
            (name, *(format_value(v) for v in corr[i]))
            for i, name in enumerate(names)
        ],
    )

    significance = []
    p_matrix = [[0.5] * len(names) for _ in range(len(names))]
    for i, name_i in enumerate(names):
        for j, name_j in enumerate(names):
            if i == j:
                continue
            if args.per_system:
                va = matrices[name_i].column_means()
                vb = matrices[name_j].column_means()
                hv = human.column_means()
            else:
                mask = (
                    matrices[name_i].present
                    & matrices[name_j].present
                    & human.present
                )
                va = matrices[name_i].values[mask]
                vb = matrices[name_j].values[mask]
                hv = human.values[mask]
            r1 = metaeval.correlation(args.coefficient, va, hv)
            r2 = metaeval.correlation(args.coefficient, vb, hv)
            r12 = metaeval.correlation(args.coefficient, va, vb)
            try:
                result = metaeval.williams_test(r1, r2, r12, len(va))
                p_matrix[i][j] = result.p_value
                t_text = format_value(result.t_statistic)
                p_text = f"{result.p_value:.6f}"
                direction = result.direction
            except InfoLMError as exc:
                p_matrix[i][j] = float("nan")
                t_text = p_text = ""
                direction = f"undefined: {exc}"
            significance.append(
                (
                    name_i, name_j,
                    format_value(r1), format_value(r2), format_value(r12),
                    len(va),
                    t_text,
                    p_text,
                    direction,
                )
            )
    _write_csv(
        out_dir / "williams.csv",
        ("metric1", "metric2", "r1", "r2", "r12", "n", "t", "p_value", "direction"),
        significance,
    )

    distributions = {}
    if args.dist_threshold is not None:
        for name in names:
            distributions[name] = metaeval.score_distribution_report(
                matrices[name], human, args.dist_threshold
            )
        _write_csv(
            out_dir / "score_distribution.csv",
            ("metric", "bin_low", "bin_high", "high_count", "low_count"),
            [
                (
                    name,
                    format_value(rep.bin_edges[i]),
                    format_value(rep.bin_edges[i + 1]),
                    int(rep.high_counts[i]),
                    int(rep.low_counts[i]),
                )
                for name, rep in distributions.items()
                for i in range(len(rep.high_counts))
            ],
        )

    summary = {
        "command": "compare",
        "coefficient": args.coefficient,
        "criterion": args.criterion,
        "metrics": list(names),
        "correlation_matrix": [[float(v) for v in row] for row in corr],
        "williams": [list(row) for row in significance],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    if cfg["figures"] or args.figures:
        from . import figures
        import numpy as np

        figures.plot_matrix_heatmap(
            names, corr, out_dir / "metric_correlation.png"
        )
        figures.plot_matrix_heatmap(
            names, np.array(p_matrix), out_dir / "williams.png", label="p-value"
        )
        if distributions:
            figures.plot_score_distribution(
                distributions, out_dir / "score_distribution.png"
            )
    print(f"wrote {out_dir / 'metric_correlation.csv'}")
    return 0


def cmd_idf(args) -> int:
    cfg = _resolve(args)
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise ConfigError(f"corpus file not found: {corpus_path}")
    documents = [
        line for line in corpus_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not documents:
        raise ConfigError(f"corpus file is empty: {corpus_path}")
    provider = _build_provider(cfg)
    items = [(f"doc-{i}", text) for i, text in enumerate(documents)]
    provider.prefetch(items)
    table = IdfTable.from_documents(
        provider.tokenize(text_id, text).token_ids for text_id, text in items
    )
    table.save(args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_export(args) -> int:
    cfg = _resolve(args)
    dataset = EvalDataset.load(args.dataset)
    provider = _build_provider(cfg)
    export_store(provider, dataset.scoring_items(), args.out, int(cfg["top_k"]))
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "idf": cmd_idf,
    "export-distributions": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ScoringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfoLMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
