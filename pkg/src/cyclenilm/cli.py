"""Command-line entry point: ``cyclenilm <subcommand> ...``.

Subcommands: simulate, build-dataset, train-classifier, train-regressor,
predict, evaluate, bench. Settings may come from an INI file (``--config``)
with sections ``[simulate]``, ``[dataset]``, ``[features]``, ``[forest]``,
``[mlp]``; command-line flags take precedence.

Exit codes: 0 success, 2 validation failure, 3 latency budget violation
(``bench --assert``).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from cyclenilm import classify, dataset, features, pipeline, regress, simulate
from cyclenilm.errors import NilmError
from cyclenilm.wavefile import read_waveform

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3
MEAN_BUDGET_MS = 16.7
P99_BUDGET_MS = 50.0

log = logging.getLogger("cyclenilm")


# -- config -------------------------------------------------------------------

def read_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path:
        if not Path(path).exists():
            raise NilmError(f"config file {path} not found")
        cp.read(path)
    return cp


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return tuple(int(v) for v in value.replace(",", " ").split())
    if default is None:
        try:
            return int(value)
        except ValueError:
            return float(value)
    return value


def _section_overrides(cp: configparser.ConfigParser, section: str, obj):
    if not cp.has_section(section):
        return obj
    names = {f.name: getattr(obj, f.name) for f in fields(obj)}
    updates = {}
    for key, value in cp.items(section):
        if key not in names:
            raise NilmError(f"unknown key {key!r} in [{section}]")
        updates[key] = _coerce(value, names[key])
    return replace(obj, **updates)


def wave_shape_config(cp: configparser.ConfigParser) -> features.WaveShapeConfig:
    if not cp.has_section("features"):
        return features.WaveShapeConfig()
    sec = cp["features"]
    pts = features.DEFAULT_RATIO_POINTS
    if "ratio_points" in sec:
        nums = [float(v) for v in sec["ratio_points"].replace(",", " ").split()]
        if len(nums) % 2:
            raise NilmError("ratio_points needs an even count of numbers")
        pts = tuple(zip(nums[::2], nums[1::2]))
    return features.WaveShapeConfig(pts, float(sec.get("epsilon",
                                                       features.DEFAULT_EPSILON)))


def dataset_config(cp: configparser.ConfigParser) -> dataset.DatasetConfig:
    cfg = dataset.DatasetConfig(wave_shape=wave_shape_config(cp))
    if cp.has_section("dataset"):
        sec = dict(cp["dataset"])
        if "thresholds" in sec:
            vals = [float(v) for v in sec.pop("thresholds").replace(",", " ").split()]
            cfg = replace(cfg, thresholds=vals[0] if len(vals) == 1 else tuple(vals))
        for key, value in sec.items():
            if key not in ("expand", "cycle_stride", "reduce", "reduction_tol",
                           "chunk_cycles", "n_samples"):
                raise NilmError(f"unknown key {key!r} in [dataset]")
            cfg = replace(cfg, **{key: _coerce(value, getattr(cfg, key))})
    return cfg


# -- helpers ------------------------------------------------------------------

def _scenario_dirs(root: Path) -> list[Path]:
    if (root / "meta.json").exists() and (root / "i_tot.cswf").exists():
        return [root]
    dirs = sorted(p for p in root.iterdir() if (p / "i_tot.cswf").exists())
    if not dirs:
        raise NilmError(f"no scenario directories under {root}")
    return dirs


def _split(data: dataset.ObservationSet, strategy: str, seed: int
           ) -> tuple[dataset.ObservationSet, dataset.ObservationSet]:
    if strategy == "split80":
        return dataset.split_strategy1(data, 0.8, seed)
    if strategy.startswith("holdout:"):
        return dataset.split_strategy2(data, int(strategy.split(":", 1)[1]))
    raise NilmError(f"unknown strategy {strategy!r}; use split80 or holdout:<k>")


def _load_predictor(models: Path, cp: configparser.ConfigParser) -> pipeline.HybridPredictor:
    bank = classify.load_bank(models / "bank" if (models / "bank").exists() else models)
    rdir = models / "regressors" if (models / "regressors").exists() else models
    regs = regress.load_regressor_bank(rdir)
    meta_path = models / "features.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        ws = dataset.wave_shape_from_meta(meta)
        n = int(meta.get("n_samples", dataset.CYCLE_LENGTH))
    else:
        ws, n = wave_shape_config(cp), dataset.CYCLE_LENGTH
    return pipeline.HybridPredictor(bank, regs, ws, n)


def _write_feature_meta(out: Path, data: dataset.ObservationSet) -> None:
    meta = {k: data.meta[k] for k in ("wave_shape", "n_samples") if k in data.meta}
    (out / "features.json").write_text(json.dumps(meta, indent=1))


def _schema(data: dataset.ObservationSet) -> str:
    return features.schema_hash(dataset.wave_shape_from_meta(data.meta),
                                int(data.meta.get("n_samples", dataset.CYCLE_LENGTH)))


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    out = Path(args.out)
    palette = simulate.load_palette(args.palette) if args.palette else \
        simulate.default_palette()
    cc = _section_overrides(cp, "simulate", simulate.CorpusConfig())
    if args.duration is not None:
        cc = replace(cc, duration_s=args.duration)
    cc = replace(cc, seed=args.seed)
    noise = args.noise if args.noise is not None else \
        cc.noise_fraction * simulate.full_scale_rms(palette, cc.sample_rate)
    if args.schedule:
        sched = simulate.load_schedule(args.schedule)
        duration = cc.duration_s if args.duration is not None else \
            max([e.time_s for e in sched.events] + [1.0]) + 1.0
        corpus = simulate.synthesize_scenario(palette, sched, duration, cc.sample_rate, noise,
                                              args.seed, drift_std=cc.drift_std,
                                              drift_tau=cc.drift_tau, dataset_id=1)
        simulate.write_corpus(out, corpus)
        log.info("wrote 1 scenario (%d cycles) to %s", corpus.ground_truth.n_cycles, out)
        return EXIT_OK
    if args.palette:
        raise NilmError("a custom palette needs --schedule")
    for corpus in simulate.iter_default_corpus(cc):
        simulate.write_corpus(out / f"dataset_{corpus.dataset_id}", corpus)
        log.info("wrote dataset %d", corpus.dataset_id)
    return EXIT_OK


def cmd_build_dataset(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    cfg = dataset_config(cp)
    if args.stride:
        cfg = replace(cfg, cycle_stride=args.stride)
    if args.no_expand:
        cfg = replace(cfg, expand=False)
    if args.no_reduce:
        cfg = replace(cfg, reduce=False)
    corpora = (simulate.read_corpus(d) for d in _scenario_dirs(Path(args.corpus)))
    data = dataset.build_dataset(corpora, cfg)
    dataset.write_dataset(args.out, data)
    log.info("%d observations (%d before reduction) written to %s", len(data),
             data.meta.get("n_raw", len(data)), args.out)
    return EXIT_OK


def cmd_train_classifier(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    data = dataset.read_dataset(args.data)
    train, _ = _split(data, args.strategy, args.seed)
    params = _section_overrides(cp, "forest", classify.ForestParams())
    if args.n_trees:
        params = replace(params, n_trees=args.n_trees)
    bank = classify.train_binary_bank(train.features, train.states, params, args.seed,
                                      n_jobs=args.jobs, schema=_schema(data))
    out = Path(args.out)
    classify.save_bank(out / "bank", bank)
    _write_feature_meta(out, data)
    (out / "split.json").write_text(json.dumps({"strategy": args.strategy, "seed": args.seed}))
    log.info("trained %d forests on %d rows", bank.n_loads, len(train))
    return EXIT_OK


def cmd_train_regressor(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    data = dataset.read_dataset(args.data)
    train, _ = _split(data, args.strategy, args.seed)
    hyper = _section_overrides(cp, "mlp", regress.MlpHyper())
    if args.max_epochs:
        hyper = replace(hyper, max_epochs=args.max_epochs)
    regs = regress.train_regressor_bank(train.features, train.states, train.rms, hyper,
                                        args.seed)
    regs.schema = _schema(data)
    out = Path(args.out)
    regress.save_regressor_bank(out / "regressors", regs)
    _write_feature_meta(out, data)
    log.info("trained %d regressors on %d rows", regs.n_loads, len(train))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    p = _load_predictor(Path(args.models), cp)
    i_tot = read_waveform(args.input)
    ref = read_waveform(args.reference) if args.reference else None
    if args.stream:
        rows = pipeline.stream_trace(p, i_tot, ref, chunk=args.chunk)
        states = np.array([r[1] for r in rows]).reshape(-1, p.n_loads)
        rms = np.array([r[2] for r in rows]).reshape(-1, p.n_loads)
    else:
        _, states, rms = pipeline.predict_trace(p, i_tot, ref)
    header = ["cycle_index"] + [f"q_{i}" for i in range(1, p.n_loads + 1)] + \
             [f"rms_{i}" for i in range(1, p.n_loads + 1)]
    table = np.column_stack([np.arange(len(states)), states, rms])
    fmt = ["%d"] * (1 + p.n_loads) + ["%.6g"] * p.n_loads
    target = args.out if args.out else sys.stdout
    np.savetxt(target, table, delimiter=",", header=",".join(header), comments="", fmt=fmt)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    data = dataset.read_dataset(args.data)
    if args.models:
        p = _load_predictor(Path(args.models), cp)
        _, test = _split(data, args.strategy, args.seeds[0])
        report = pipeline.evaluate_models(p.bank, p.regressors, test,
                                          {"strategy": args.strategy, "seed": args.seeds[0]})
        text = report.to_json()
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "report.json").write_text(text)
        print(text)
        return EXIT_OK
    cfg = pipeline.ExperimentConfig(
        forest=_section_overrides(cp, "forest", classify.ForestParams()),
        mlp=_section_overrides(cp, "mlp", regress.MlpHyper()),
        train_regressors=not args.no_regression)
    strategy = "holdout-each" if args.strategy.startswith("holdout") else args.strategy
    _, agg = pipeline.run_experiment(data, strategy, args.seeds, cfg, args.out)
    print(json.dumps(agg, indent=1))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, cp: configparser.ConfigParser) -> int:
    p = _load_predictor(Path(args.models), cp)
    if args.input:
        i_tot = read_waveform(args.input)
        ref = read_waveform(args.reference) if args.reference else None
        source = i_tot
        cycles = pipeline.segment_cycles(i_tot, ref=ref, n_samples=p.n_samples)
    else:
        corpus = simulate.synthesize_scenario(
            simulate.default_palette()[:p.n_loads],
            simulate.table1_schedules(5.0, args.seed)[4], 5.0, seed=args.seed)
        source = corpus.i_tot
        cycles = pipeline.segment_cycles(corpus.i_tot, ref=corpus.voltage,
                                         n_samples=p.n_samples)
    report = pipeline.benchmark_latency(p, cycles, args.n, source=source)
    summary = report.summary()
    print(json.dumps(summary, indent=1))
    if args.out:
        np.savetxt(args.out, np.column_stack([report.timings, report.total]) * 1e3,
                   delimiter=",", header=",".join([*pipeline.STAGES, "total"]) + " (ms)",
                   fmt="%.6f")
    if args.assert_budget and (summary["processing"]["mean_ms"] > MEAN_BUDGET_MS
                               or summary["processing"]["p99_ms"] > P99_BUDGET_MS):
        log.error("latency budget violated")
        return EXIT_BUDGET
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cyclenilm", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="INI file with default settings")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate scenario corpora")
    s.add_argument("--palette", help="palette JSON (default: built-in 8 loads)")
    s.add_argument("--schedule", help="schedule JSON (default: the 7 built-in scenarios)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float)
    s.add_argument("--noise", type=float, help="noise RMS in amperes")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("build-dataset", help="label, expand and reduce scenario corpora")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--stride", type=int)
    s.add_argument("--no-expand", action="store_true")
    s.add_argument("--no-reduce", action="store_true")
    s.set_defaults(func=cmd_build_dataset)

    s = sub.add_parser("train-classifier", help="train the binary forest bank")
    s.add_argument("--data", required=True)
    s.add_argument("--strategy", default="split80", help="split80 or holdout:<k>")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-trees", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("train-regressor", help="train the per-load MLP regressors")
    s.add_argument("--data", required=True)
    s.add_argument("--strategy", default="split80")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-epochs", type=int)
    s.set_defaults(func=cmd_train_regressor)

    s = sub.add_parser("predict", help="per-cycle states and RMS for a waveform file")
    s.add_argument("--models", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--reference", help="voltage waveform for zero crossings")
    s.add_argument("--stream", action="store_true", help="process in chunks as a stream")
    s.add_argument("--chunk", type=int, default=4096)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="score trained models or run a full experiment")
    s.add_argument("--data", required=True)
    s.add_argument("--models", help="evaluate these models instead of retraining")
    s.add_argument("--strategy", default="split80",
                   help="split80, holdout-each, or holdout:<k> with --models")
    s.add_argument("--seeds", type=int, nargs="+", default=list(range(7)))
    s.add_argument("--no-regression", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench", help="per-stage latency benchmark")
    s.add_argument("--models", required=True)
    s.add_argument("--input")
    s.add_argument("--reference")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="CSV of per-cycle timings")
    s.add_argument("--assert", dest="assert_budget", action="store_true",
                   help="exit 3 if mean > 16.7 ms or p99 > 50 ms")
    s.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cp = read_config(args.config)
        return args.func(args, cp)
    except (NilmError, OSError, KeyError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
