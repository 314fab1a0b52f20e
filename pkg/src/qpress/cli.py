"""Command-line interface: train, run, report, init-config.

Exit codes: 0 success, 1 configuration, 2 file I/O, 3 backend failure,
4 internal error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from .agent import Agent
from .codec import QUALITY_LADDER
from .config import (
    backend_from_config,
    controller_params_from_config,
    default_config_dict,
    extractor_from_config,
    load_config,
    policy_from_config,
)
from .controller import Controller, StepRecord, estimated_latency, run_stream, transmission_ms
from .environment import SceneryStream
from .exceptions import (
    BackendError,
    CheckpointIOError,
    ConfigError,
    ExtractorMismatchError,
    QpressError,
)
from .training import train_agent


class _Parser(argparse.ArgumentParser):
    # Usage mistakes are configuration errors, not argparse's exit(2).
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpress", description="Adaptive JPEG quality gateway")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a fresh agent over a manifest")
    train.add_argument("--config", required=True, help="JSON run configuration")
    train.add_argument("--manifest", help="override the config's manifest path")
    train.add_argument("--checkpoint", help="override the checkpoint output path")
    train.add_argument("--seed", type=int, help="override the config's rng seed")
    train.add_argument("--out", help="override the step-log output path")
    train.set_defaults(func=cmd_train)

    run = sub.add_parser("run", help="serve a stream with a trained agent")
    run.add_argument("--config", required=True)
    run.add_argument("--manifest")
    run.add_argument("--checkpoint", help="override the checkpoint to load")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="override the step-log output path")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="summarize step logs into CSV and text")
    report.add_argument("logs", nargs="+", help="step-log files to digest")
    report.add_argument("--out", default=".", help="directory for CSV/text output")
    report.add_argument("--bandwidth-mbps", type=float, default=27.64)
    report.add_argument("--inference-ms", type=float, default=0.0,
                        help="per-image model latency added to the adaptive rows")
    report.set_defaults(func=cmd_report)

    init = sub.add_parser("init-config", help="emit the documented default config")
    init.add_argument("--out", default="-", help="file to write, or - for stdout")
    init.set_defaults(func=cmd_init_config)
    return parser


def _resolved(base: Path, from_config: str, override: str | None) -> Path:
    # CLI overrides are cwd-relative; config values are config-relative.
    return Path(override) if override is not None else base / from_config


def cmd_train(args) -> int:
    cfg, base = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    manifest = _resolved(base, cfg.manifest, args.manifest)
    checkpoint = _resolved(base, cfg.checkpoint, args.checkpoint)
    log_path = _resolved(base, cfg.log, args.out)

    stream = SceneryStream(manifest)
    backend = backend_from_config(cfg, base)
    extractor = extractor_from_config(cfg)
    agent = Agent.fresh(
        extractor.descriptor,
        policy=policy_from_config(cfg),
        hidden=tuple(int(h) for h in cfg.hidden_layers),
        capacity=cfg.memory_capacity,
    )

    if cfg.K == 0:
        log_path.write_text("")
        print("K=0: no training steps requested; wrote an empty log and no checkpoint")
        return 0

    with open(log_path, "w") as fh:
        summary = train_agent(
            agent,
            extractor,
            backend,
            stream,
            steps=cfg.K,
            c_ref=cfg.c_ref,
            reward_params=controller_params_from_config(cfg).reward,
            window=cfg.n,
            log_sink=lambda rec: fh.write(rec.to_json() + "\n"),
        )
    agent.save(checkpoint)

    print(f"trained {summary.steps} steps ({summary.train_invocations} updates)")
    print(f"final epsilon {summary.final_epsilon:.4f}")
    print(f"windowed accuracy {summary.recent_accuracy:.3f}"
          if summary.recent_accuracy is not None else "windowed accuracy n/a")
    print(f"windowed reward {summary.recent_reward:.3f}"
          if summary.recent_reward is not None else "windowed reward n/a")
    print(f"mean delta_s {summary.mean_delta_s:.3f}")
    print(f"checkpoint -> {checkpoint}")
    print(f"log -> {log_path}")
    return 0


def cmd_run(args) -> int:
    cfg, base = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    manifest = _resolved(base, cfg.manifest, args.manifest)
    checkpoint = _resolved(base, cfg.checkpoint, args.checkpoint)
    log_path = _resolved(base, cfg.log, args.out)

    stream = SceneryStream(manifest)
    backend = backend_from_config(cfg, base)
    extractor = extractor_from_config(cfg)
    agent = Agent.restore(checkpoint, expected=extractor.descriptor)
    agent.policy.rng_seed = cfg.seed

    with open(log_path, "w") as fh:
        controller = Controller(
            agent,
            extractor,
            backend,
            params=controller_params_from_config(cfg),
            seed=cfg.seed,
            log_sink=lambda rec: fh.write(rec.to_json() + "\n"),
        )
        steps = run_stream(controller, stream)

    counts = controller.mode_counts
    print(f"served {steps} images "
          f"(inference {counts['inference']}, estimate {counts['estimate']}, "
          f"retrain {counts['retrain']})")
    print(f"retrain episodes entered: {controller.retrain_entries}")
    print(f"final p_est {controller.p_est:.3f}")
    print(f"log -> {log_path}")
    return 0


def _read_log(path: Path) -> list[StepRecord]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(StepRecord.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                print(f"warning: {path}:{lineno}: skipping malformed line ({exc})",
                      file=sys.stderr)
    return records


def _mean(values) -> float | None:
    values = list(values)
    return sum(values) / len(values) if values else None


def _fmt(value, digits=3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bandwidth_bps = args.bandwidth_mbps * 1e6

    hist_rows, phase_rows, latency_rows = [], [], []
    text_lines = []
    for raw in args.logs:
        path = Path(raw)
        records = _read_log(path)
        name = path.name
        text_lines.append(f"== {name}: {len(records)} records ==")
        if not records:
            continue

        counts = {q: 0 for q in QUALITY_LADDER}
        for rec in records:
            counts[rec.quality] = counts.get(rec.quality, 0) + 1
        for q in sorted(counts):
            hist_rows.append(
                {"log": name, "quality": q, "count": counts[q],
                 "fraction": counts[q] / len(records)}
            )
        busiest = ", ".join(
            f"q{q}:{counts[q]}" for q in sorted(counts, key=counts.get, reverse=True)[:3]
            if counts[q]
        )
        text_lines.append(f"  chosen-quality histogram (top): {busiest}")

        phases = sorted({rec.mode for rec in records})
        for phase in phases:
            sub = [rec for rec in records if rec.mode == phase]
            overhead = _mean(
                (rec.size_c if phase == "inference" else rec.size_c + rec.size_ref)
                / rec.size_ref
                for rec in sub if rec.size_ref
            )
            mean_acc = _mean(rec.accuracy for rec in sub if rec.accuracy is not None)
            mean_delta = _mean(rec.delta_s for rec in sub)
            phase_rows.append(
                {"log": name, "phase": phase, "steps": len(sub),
                 "mean_delta_s": _fmt(mean_delta), "mean_accuracy": _fmt(mean_acc),
                 "mean_upload_overhead": _fmt(overhead)}
            )
            text_lines.append(
                f"  {phase}: {len(sub)} steps, mean delta_s {_fmt(mean_delta)}, "
                f"mean accuracy {_fmt(mean_acc)}, upload overhead {_fmt(overhead)}"
            )

        ref_avg = _mean(rec.size_ref for rec in records)
        inf_records = [rec for rec in records if rec.mode == "inference"] or records
        adaptive_avg = _mean(rec.size_c for rec in inf_records)
        for variant, avg, model_ms in (
            ("reference", ref_avg, 0.0),
            ("adaptive", adaptive_avg, args.inference_ms),
        ):
            tx = transmission_ms(avg, bandwidth_bps)
            overall = estimated_latency(avg, bandwidth_bps, model_ms)
            latency_rows.append(
                {"log": name, "variant": variant, "avg_kb": f"{avg / 1000.0:.2f}",
                 "inference_ms": f"{model_ms:.2f}", "transmission_ms": f"{tx:.2f}",
                 "overall_ms": f"{overall:.2f}"}
            )
            text_lines.append(
                f"  latency[{variant}]: {avg / 1000.0:.2f} KB -> "
                f"{tx:.2f} ms tx + {model_ms:.2f} ms model = {overall:.2f} ms"
            )

    def write_csv(filename, rows, fieldnames):
        with open(out_dir / filename, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)

    write_csv("quality_hist.csv", hist_rows, ["log", "quality", "count", "fraction"])
    write_csv("phases.csv", phase_rows,
              ["log", "phase", "steps", "mean_delta_s", "mean_accuracy",
               "mean_upload_overhead"])
    write_csv("latency.csv", latency_rows,
              ["log", "variant", "avg_kb", "inference_ms", "transmission_ms",
               "overall_ms"])

    text = "\n".join(text_lines) + "\n"
    (out_dir / "report.txt").write_text(text)
    print(text, end="")
    print(f"CSV written to {out_dir}")
    return 0


def cmd_init_config(args) -> int:
    doc = json.dumps(default_config_dict(), indent=2) + "\n"
    if args.out == "-":
        print(doc, end="")
    else:
        Path(args.out).write_text(doc)
        print(f"default config -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ExtractorMismatchError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CheckpointIOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except (QpressError, Exception) as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
