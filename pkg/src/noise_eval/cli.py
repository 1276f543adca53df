"""Command-line interface: ``noise-eval {train,eval,sweep,gen-noise}``.

Settings are flat dotted keys (``section.key``). They come from built-in
defaults, then an optional INI file (``--config``; one ``[section]`` per key
prefix), then command-line flags. Any key can be given on the command line as
``--section.key VALUE``; the common ones also have short flags such as
``--epochs``. Run outputs go to ``<out>/<run-id>/`` where the run id is a
hash of the resolved settings.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from noise_eval import __version__
from noise_eval import rng as rngs
from noise_eval.data import (
    BUILTIN,
    Dataset,
    Standardizer,
    builtin_path,
    fit_standardizer,
    load_csv,
    occ_classes,
    split_occ,
)
from noise_eval.errors import ConfigError, NoiseEvalError, ShapeError
from noise_eval.experiment import SeedResult, parallel_map, run_split, summarize
from noise_eval.metrics import Aggregator, evaluate
from noise_eval.nn import FORMAT_VERSION, Arch, NetworkConfig, load_network, read_metadata, save_network
from noise_eval.noise import NoiseFamily, NoiseSpec, generate_noise_matrix, hit_mask, parse_family
from noise_eval.optim import OptimHyper
from noise_eval.train import TrainConfig, train

logger = logging.getLogger("noise_eval")

DEFAULTS = {
    "data.path": "",
    "data.label_col": "label",
    "data.positive_label": "1",
    "data.protocol": "occ",
    "data.normal_class": "",
    "data.min_class_size": "1",
    "data.train_frac": "0.5",
    "train.epochs": "500",
    "train.batch_size": "128",
    "train.checkpoint_every": "0",
    "net.arch": "mlp",
    "net.hidden_dim": "",
    "net.depth": "",
    "net.init": "uniform",
    "noise.type": "gaussian",
    "noise.sigma_max": "2.0",
    "noise.m": "3",
    "noise.ratios": "0.5,0.8,1.0",
    "optim.lr0": "1e-4",
    "optim.weight_decay": "5e-4",
    "optim.beta1": "0.9",
    "optim.beta2": "0.999",
    "optim.eps": "1e-8",
    "optim.decay_epoch": "100",
    "optim.decay_factor": "0.1",
    "eval.agg": "max",
    "run.seeds": "0-9",
    "run.out": "runs",
}

# short flag -> dotted key
FLAGS = {
    "data": "data.path",
    "label-col": "data.label_col",
    "positive-label": "data.positive_label",
    "protocol": "data.protocol",
    "normal-class": "data.normal_class",
    "epochs": "train.epochs",
    "batch-size": "train.batch_size",
    "arch": "net.arch",
    "noise-type": "noise.type",
    "sigma-max": "noise.sigma_max",
    "m": "noise.m",
    "ratios": "noise.ratios",
    "agg": "eval.agg",
    "seeds": "run.seeds",
    "out": "run.out",
}

# keys that do not change what gets trained
_NOT_IN_RUN_ID = ("run.out", "eval.agg", "train.checkpoint_every")


def _parse_int(key, raw, minimum=None):
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key) from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", key)
    return value


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key) from None


def parse_seeds(raw: str) -> tuple[int, ...]:
    """``"0-9"``, ``"0,3,5"`` or a mix such as ``"0-2,7"``."""
    seeds = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            lo, hi = _parse_int("run.seeds", lo, 0), _parse_int("run.seeds", hi, 0)
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}", "run.seeds")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(_parse_int("run.seeds", part, 0))
    if not seeds:
        raise ConfigError("no seeds given", "run.seeds")
    return tuple(seeds)


def parse_list(key, raw) -> list[str]:
    return [p.strip() for p in str(raw).split(",") if p.strip()]


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved and validated settings for one CLI invocation."""

    settings: dict
    data_path: str
    label_col: str
    positive_label: str
    protocol: str
    normal_class: str | None
    min_class_size: int
    train_frac: float
    epochs: int
    batch_size: int
    checkpoint_every: int
    arch: Arch
    hidden_dim: int | None
    depth: int | None
    init: str
    noise: NoiseSpec
    optim: OptimHyper
    agg: Aggregator
    seeds: tuple[int, ...]
    out: Path

    @property
    def repeats(self) -> int:
        return len(self.seeds)

    @classmethod
    def from_settings(cls, settings: dict) -> "RunConfig":
        s = dict(DEFAULTS)
        for key, value in settings.items():
            if key not in DEFAULTS:
                raise ConfigError("unknown setting", key)
            s[key] = str(value)

        protocol = s["data.protocol"].lower()
        if protocol not in ("occ", "uad"):
            raise ConfigError(f"must be 'occ' or 'uad', got {protocol!r}", "data.protocol")
        try:
            arch = Arch(s["net.arch"].lower())
        except ValueError:
            raise ConfigError(f"must be 'mlp' or 'resmlp', got {s['net.arch']!r}", "net.arch") from None
        try:
            agg = Aggregator(s["eval.agg"].lower())
        except ValueError:
            raise ConfigError(f"unknown aggregator {s['eval.agg']!r}", "eval.agg") from None
        family, beta = parse_family(s["noise.type"])
        ratios = tuple(_parse_float("noise.ratios", r) for r in parse_list("noise.ratios", s["noise.ratios"]))
        noise = NoiseSpec(
            family=family,
            sigma_max=_parse_float("noise.sigma_max", s["noise.sigma_max"]),
            m=_parse_int("noise.m", s["noise.m"], 1),
            ratios=ratios,
            gamma_beta=beta if beta is not None else 1.0,
        )
        optim = OptimHyper(
            lr0=_parse_float("optim.lr0", s["optim.lr0"]),
            weight_decay=_parse_float("optim.weight_decay", s["optim.weight_decay"]),
            beta1=_parse_float("optim.beta1", s["optim.beta1"]),
            beta2=_parse_float("optim.beta2", s["optim.beta2"]),
            eps=_parse_float("optim.eps", s["optim.eps"]),
            decay_epoch=_parse_int("optim.decay_epoch", s["optim.decay_epoch"], 1),
            decay_factor=_parse_float("optim.decay_factor", s["optim.decay_factor"]),
        )
        train_frac = _parse_float("data.train_frac", s["data.train_frac"])
        if not 0 < train_frac < 1:
            raise ConfigError(f"must lie in (0, 1), got {train_frac}", "data.train_frac")
        init = s["net.init"].lower()
        if init not in ("uniform", "he"):
            raise ConfigError(f"must be 'uniform' or 'he', got {init!r}", "net.init")
        return cls(
            settings=s,
            data_path=s["data.path"],
            label_col=s["data.label_col"],
            positive_label=s["data.positive_label"],
            protocol=protocol,
            normal_class=s["data.normal_class"] or None,
            min_class_size=_parse_int("data.min_class_size", s["data.min_class_size"], 1),
            train_frac=train_frac,
            epochs=_parse_int("train.epochs", s["train.epochs"], 1),
            batch_size=_parse_int("train.batch_size", s["train.batch_size"], 1),
            checkpoint_every=_parse_int("train.checkpoint_every", s["train.checkpoint_every"], 0),
            arch=arch,
            hidden_dim=_parse_int("net.hidden_dim", s["net.hidden_dim"], 1) if s["net.hidden_dim"] else None,
            depth=_parse_int("net.depth", s["net.depth"], 1) if s["net.depth"] else None,
            init=init,
            noise=noise,
            optim=optim,
            agg=agg,
            seeds=parse_seeds(s["run.seeds"]),
            out=Path(s["run.out"]),
        )

    def train_config(self, input_dim: int) -> TrainConfig:
        net = NetworkConfig(
            input_dim=input_dim, arch=self.arch, hidden_dim=self.hidden_dim, depth=self.depth, init=self.init
        )
        return TrainConfig(
            net=net, noise=self.noise, optim=self.optim, epochs=self.epochs, batch_size=self.batch_size
        )

    def run_id(self, extra: dict | None = None) -> str:
        ident = {k: v for k, v in self.settings.items() if k not in _NOT_IN_RUN_ID}
        if extra:
            ident.update(extra)
        blob = json.dumps(ident, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def run_dir(self, extra: dict | None = None) -> Path:
        return self.out / self.run_id(extra)


def read_config_file(path) -> dict:
    """Flatten an INI file into dotted keys."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", "config")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read(path, encoding="utf-8")
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    return flat


# -- data ----------------------------------------------------------------------------


def load_data(cfg: RunConfig) -> Dataset:
    """Load the configured CSV; ``builtin:NAME`` selects a bundled dataset."""
    raw = cfg.data_path
    if not raw:
        raise ConfigError("no data file given (use --data)", "data.path")
    if raw.startswith("builtin:"):
        name = raw.split(":", 1)[1]
        path = builtin_path(name)
        positive = BUILTIN[name] if cfg.settings["data.positive_label"] == DEFAULTS["data.positive_label"] else cfg.positive_label
    else:
        path = Path(raw)
        positive = cfg.positive_label
        if not path.is_file():
            raise FileNotFoundError(f"data file not found: {path}")
    ds = load_csv(path, cfg.label_col, positive)
    if cfg.protocol == "uad":
        ds = dataclasses.replace(ds, class_ids=None)
    return ds


def normal_classes(cfg: RunConfig, ds: Dataset) -> list[int]:
    if cfg.protocol == "uad":
        return [0]
    if cfg.normal_class is not None:
        return [ds.class_index(cfg.normal_class)]
    return occ_classes(ds, cfg.min_class_size)


def _class_name(ds: Dataset, c: int) -> str:
    return ds.class_labels[c] if ds.class_ids is not None else str(c)


def _artifact(prefix: str, ds: Dataset, c: int, seed: int, multi: bool, suffix: str) -> str:
    if multi:
        return f"{prefix}_class{_class_name(ds, c)}_seed{seed}{suffix}"
    return f"{prefix}_seed{seed}{suffix}"


def write_manifest(run_dir: Path, cfg: RunConfig, command: str, artifacts, extra=None) -> Path:
    manifest = {
        "command": command,
        "run_id": run_dir.name,
        "code_version": __version__,
        "format_version": FORMAT_VERSION,
        "settings": cfg.settings,
        "seeds": list(cfg.seeds),
        "artifacts": sorted(str(a) for a in artifacts),
    }
    if extra:
        manifest.update(extra)
    path = run_dir / f"manifest_{command}.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- commands ------------------------------------------------------------------------


def _train_job(args):
    ds, c, seed, cfg, run_dir, multi = args
    split = split_occ(ds, c, cfg.train_frac, seed)
    std = fit_standardizer(split.train_X)
    tcfg = cfg.train_config(ds.n_features).with_seed(seed)
    meta = {
        "seed": seed,
        "normal_class": _class_name(ds, c),
        "normal_class_id": c,
        "protocol": cfg.protocol,
        "train_frac": cfg.train_frac,
        "data": cfg.data_path,
        "std_mean": std.mean.tolist(),
        "std_scale": std.std.tolist(),
        "train_config": tcfg.to_dict(),
    }
    on_epoch = None
    if cfg.checkpoint_every:
        ckpt = run_dir / _artifact("checkpoint", ds, c, seed, multi, "")

        def on_epoch(epoch, net, loss):
            if (epoch + 1) % cfg.checkpoint_every == 0:
                save_network(net, f"{ckpt}_epoch{epoch + 1}.npz", **meta, epoch=epoch + 1)

    net, history = train(std.transform(split.train_X), tcfg, on_epoch=on_epoch)
    model = run_dir / _artifact("model", ds, c, seed, multi, ".npz")
    save_network(net, model, **meta)
    hist = run_dir / _artifact("history", ds, c, seed, multi, ".csv")
    history.to_csv(hist)
    return [model.name, hist.name]


def cmd_train(cfg: RunConfig) -> int:
    ds = load_data(cfg)
    classes = normal_classes(cfg, ds)
    run_dir = cfg.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    multi = len(classes) > 1
    jobs = [(ds, c, s, cfg, run_dir, multi) for s in cfg.seeds for c in classes]
    artifacts = [a for names in parallel_map(_train_job, jobs) for a in names]
    write_manifest(run_dir, cfg, "train", artifacts, {"normal_classes": [_class_name(ds, c) for c in classes]})
    print(run_dir)
    return 0


def cmd_eval(cfg: RunConfig, model_paths=None) -> int:
    """Evaluate trained models and write per-seed reports plus ``summary.csv``.

    Without explicit ``model_paths`` every ``model_*.npz`` in the run
    directory is used.
    """
    ds = load_data(cfg)
    run_dir = cfg.run_dir()
    if not model_paths:
        model_paths = sorted(run_dir.glob("model_*.npz"))
        if not model_paths:
            raise FileNotFoundError(f"no model files in {run_dir}; run 'train' first")
    model_paths = [Path(p) for p in model_paths]
    loaded = []
    for path in model_paths:
        if not path.is_file():
            raise FileNotFoundError(f"model file not found: {path}")
        net = load_network(path)
        if net.input_dim != ds.n_features:
            raise ShapeError(f"{path}: model expects {net.input_dim} features, data has {ds.n_features}")
        loaded.append((path, net, read_metadata(path)))
    run_dir.mkdir(parents=True, exist_ok=True)

    multi = len({m["normal_class"] for _, _, m in loaded}) > 1
    artifacts = []
    by_seed: dict[int, list] = {}
    for path, net, meta in loaded:
        seed = int(meta["seed"])
        c = ds.class_index(meta["normal_class"]) if ds.class_ids is not None else int(meta["normal_class_id"])
        split = split_occ(ds, c, float(meta["train_frac"]), seed)
        std = Standardizer(np.asarray(meta["std_mean"]), np.asarray(meta["std_scale"]))
        report = evaluate(
            net,
            std.transform(split.test_X),
            split.test_y,
            cfg.agg,
            row_index=split.test_index,
            config_echo={"model": path.name, "agg": cfg.agg.value, **meta},
        )
        csv_path = run_dir / _artifact("report", ds, c, seed, multi, ".csv")
        json_path = csv_path.with_suffix(".json")
        report.to_csv(csv_path)
        report.to_json(json_path)
        artifacts += [csv_path.name, json_path.name]
        by_seed.setdefault(seed, []).append(report)

    results = [
        SeedResult(seed, float(np.mean([r.auc for r in reps])), float(np.mean([r.f1 for r in reps])), {})
        for seed, reps in sorted(by_seed.items())
    ]
    summary = summarize(results)
    with open(run_dir / "per_seed.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "auc", "f1"])
        for r in results:
            w.writerow([r.seed, repr(r.auc), repr(r.f1)])
    with open(run_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary))
        w.writeheader()
        w.writerow({k: repr(v) for k, v in summary.items()})
    artifacts += ["per_seed.csv", "summary.csv"]
    write_manifest(run_dir, cfg, "eval", artifacts, {"models": [str(p) for p in model_paths]})
    print(f"AUC {summary['auc_mean']:.4f} +/- {summary['auc_std']:.4f}  "
          f"F1 {summary['f1_mean']:.4f} +/- {summary['f1_std']:.4f}  ({summary['n_seeds']} seeds)")
    return 0


SWEEP_AXES = ("noise_level", "noise_ratio", "noise_type")


def sweep_variant(cfg: RunConfig, axis: str, value: str) -> RunConfig:
    key = {"noise_level": "noise.sigma_max", "noise_ratio": "noise.ratios", "noise_type": "noise.type"}[axis]
    settings = dict(cfg.settings)
    settings[key] = value
    return RunConfig.from_settings(settings)


def _sweep_job(args):
    ds, classes, cfg, seed = args
    tcfg = cfg.train_config(ds.n_features)
    aucs, f1s = [], []
    for c in classes:
        rep = run_split(ds, c, tcfg, seed, cfg.agg, cfg.train_frac).report
        aucs.append(rep.auc)
        f1s.append(rep.f1)
    return float(np.mean(aucs)), float(np.mean(f1s))


def cmd_sweep(cfg: RunConfig, axis: str, values) -> int:
    """Train and evaluate once per ``(value, seed)``; write ``sweep_<axis>.csv``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"must be one of {', '.join(SWEEP_AXES)}, got {axis!r}", "sweep.axis")
    values = [str(v).strip() for v in values if str(v).strip()]
    if not values:
        raise ConfigError("no sweep values given", "sweep.values")
    variants = [sweep_variant(cfg, axis, v) for v in values]
    ds = load_data(cfg)
    classes = normal_classes(cfg, ds)
    jobs = [(ds, classes, variant, seed) for variant in variants for seed in cfg.seeds]
    results = parallel_map(_sweep_job, jobs)

    run_dir = cfg.run_dir({"sweep.axis": axis, "sweep.values": values})
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / f"sweep_{axis}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis_value", "seed", "auc", "f1"])
        i = 0
        for value in values:
            for seed in cfg.seeds:
                auc_v, f1_v = results[i]
                w.writerow([value, seed, repr(auc_v), repr(f1_v)])
                i += 1
    write_manifest(run_dir, cfg, "sweep", [path.name], {"axis": axis, "values": values})
    print(path)
    return 0


def cmd_gen_noise(cfg: RunConfig, b: int, d: int, output=None) -> int:
    """Write one generated ``(b, d)`` noise matrix as header-less CSV.

    Bernoulli and salt-and-pepper specs produce their 0/1 hit mask.
    """
    if b < 1 or d < 1:
        raise ConfigError(f"need b >= 1 and d >= 1, got b={b}, d={d}", "gen_noise")
    seed = cfg.seeds[0]
    spec = dataclasses.replace(cfg.noise, seed=seed)
    gen = rngs.stream(seed, rngs.NOISE, 0, 0)
    if spec.family.additive:
        E = generate_noise_matrix(b, d, spec, gen)
    else:
        E = hit_mask(b, d, gen).astype(np.float64)
    if output is None:
        run_dir = cfg.run_dir({"gen_noise": [b, d]})
        run_dir.mkdir(parents=True, exist_ok=True)
        output = run_dir / "noise.csv"
        write_manifest(run_dir, cfg, "gen-noise", [output.name], {"b": b, "d": d})
    output = Path(output)
    with open(output, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in E:
            w.writerow([repr(float(v) + 0.0) for v in row])
    print(output)
    return 0


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noise-eval", description=__doc__.split("\n")[0], allow_abbrev=False
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI file with [section] key = value settings")
        for flag, key in FLAGS.items():
            p.add_argument(f"--{flag}", dest=key, default=None, metavar=key.split(".")[1].upper(),
                           help=f"sets {key}")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("train", help="train one model per seed (and normal class)", allow_abbrev=False))
    p = sub.add_parser("eval", help="evaluate trained models", allow_abbrev=False)
    common(p)
    p.add_argument("--models", nargs="+", help="model files (default: the run directory's models)")
    p = sub.add_parser("sweep", help="train+eval across values of one noise setting", allow_abbrev=False)
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p = sub.add_parser("gen-noise", help="dump one generated noise matrix as CSV", allow_abbrev=False)
    common(p)
    p.add_argument("-b", type=int, required=True, help="rows")
    p.add_argument("-d", type=int, required=True, help="columns")
    p.add_argument("--output", help="CSV path (default: <out>/<run-id>/noise.csv)")
    return parser


def _dotted_overrides(extra: list[str]) -> dict:
    """Collect ``--section.key VALUE`` / ``--section.key=VALUE`` pairs."""
    out = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise ConfigError("missing value", key)
            i += 1
            value = extra[i]
        if key not in DEFAULTS:
            raise ConfigError("unknown setting", key)
        out[key] = value
        i += 1
    return out


def resolve(args, extra) -> RunConfig:
    settings = {}
    if args.config:
        settings.update(read_config_file(args.config))
    settings.update(_dotted_overrides(extra))
    for key in FLAGS.values():
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return RunConfig.from_settings(settings)


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args, extra)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.models)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, parse_list("sweep.values", args.values))
        return cmd_gen_noise(cfg, args.b, args.d, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NoiseEvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
