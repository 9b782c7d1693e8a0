"""``spikederain`` command line: data generation, training, inference, evaluation and analysis.

Exit codes: 0 success, 2 invalid input or configuration, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import spkt
from .analysis.activation import decay_matrix_experiment
from .analysis.energy import energy_profile
from .analysis.metrics import psnr
from .analysis.spectrum import saturation_experiment, spectrum_heatmap, streak_feature_map
from .config import ConfigError, RunConfig, load_run_config, save_run_config
from .data import NetpbmError, PairDataset, load_image, make_synthetic_pairs, save_image, save_pairs, to_chw, to_hwc
from .network import DerainNet
from .tensor import ShapeError
from .train import derain, evaluate, load_network, save_network, train, train_config_dict
from .vlif import VlifConfig

logger = logging.getLogger("spikederain")


class UsageError(ValueError):
    pass


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _load_pairs(root: Path, what: str) -> list:
    ds = PairDataset(root)
    for s in ds.skipped:
        logger.warning("skipping %s: %s", s["file"], s["reason"])
    pairs = list(ds)
    if not pairs:
        raise UsageError(f"no {what} pairs found under {root}")
    return pairs


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(cfg.paths.run_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------------

def cmd_gen_data(args, cfg: RunConfig) -> int:
    data = cfg.data
    overrides = {k: v for k, v in (("count", args.count), ("size", args.size), ("test_count", args.test_count)) if v is not None}
    data = replace(data, **overrides)
    cfg.rain.validate()
    out = Path(args.out) if args.out else Path(cfg.paths.data_dir)
    pairs = make_synthetic_pairs(data.count, data.size, data.seed, cfg.rain)
    n_train = data.count - data.test_count
    save_pairs(out / "train", pairs[:n_train])
    save_pairs(out / "test", pairs[n_train:])
    report = {"train": n_train, "test": data.test_count, "size": data.size, "seed": data.seed, "rain": cfg.rain.__dict__}
    _write_json(out / "dataset.json", report)
    print(json.dumps(report))
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    tcfg = cfg.train if args.iterations is None else replace(cfg.train, iterations=args.iterations)
    data_dir = Path(args.data) if args.data else Path(cfg.paths.data_dir)
    train_pairs = _load_pairs(data_dir / "train", "training")
    val_dir = data_dir / "val"
    val_pairs = _load_pairs(val_dir, "validation") if val_dir.is_dir() else None
    out = _out_dir(args, cfg)
    save_run_config(out / "config.json", cfg)
    net = DerainNet(cfg.network)
    result = train(net, train_pairs, tcfg, val_pairs=val_pairs, out_dir=out)
    summary = {"iterations": tcfg.iterations, "final_loss": result.losses[-1], "best_iteration": result.best_iteration, "best_psnr": result.best_psnr, "train": train_config_dict(tcfg)}
    _write_json(out / "train_summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("iterations", "final_loss", "best_iteration", "best_psnr")}))
    return 0


def _pad_to(img: np.ndarray, m: int) -> np.ndarray:
    h, w = img.shape[:2]
    return np.pad(img, ((0, -h % m), (0, -w % m), (0, 0)), mode="edge")


def cmd_infer(args, cfg: RunConfig) -> int:
    net, _ = load_network(args.checkpoint)
    img = load_image(args.input)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    h, w = img.shape[:2]
    out_img = to_hwc(derain(net, to_chw(_pad_to(img, net.cfg.size_multiple))))[0, :h, :w]
    inp = Path(args.input)
    out_dir = Path(args.out) if args.out else inp.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{inp.stem}.derained.ppm"
    save_image(target, out_img)
    report = {"output": str(target)}
    if args.reference:
        ref = load_image(args.reference)
        report["psnr"] = psnr(out_img, ref)
        report["input_psnr"] = psnr(img, ref)
    print(json.dumps(report))
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    overrides = {"neuron_variant": args.neuron_variant} if args.neuron_variant else {}
    net, manifest = load_network(args.checkpoint, **overrides)
    data_dir = Path(args.data) if args.data else Path(cfg.paths.data_dir) / "test"
    metrics = evaluate(net, _load_pairs(data_dir, "evaluation"))
    metrics["checkpoint"] = str(args.checkpoint)
    metrics["neuron_variant"] = net.cfg.neuron_variant
    if args.out:
        _write_json(Path(args.out) / "eval.json", metrics)
    print(json.dumps(metrics))
    return 0


def cmd_analyze_neuron(args, cfg: RunConfig) -> int:
    neuron = cfg.network.neuron
    out = Path(args.out) if args.out else None
    if args.experiment == "decay":
        vcfg = VlifConfig(r=cfg.network.r, neuron=neuron, patch_order=cfg.network.patch_order)
        rep = decay_matrix_experiment(args.n, neuron, vcfg, sigma=args.sigma, timesteps=args.timesteps)
        report = rep.to_dict()
        text = rep.to_text()
    else:
        x = streak_feature_map(args.n, seed=cfg.network.seed)
        rep = saturation_experiment(x, args.t_max, neuron)
        report = rep.to_dict()
        text = "\n".join(f"t={t}  norm={n:.12g}  mean={m:.6g}" for t, n, m in zip(rep.t_values, rep.norms, rep.means))
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            save_image(out / "spectrum_input.pgm", spectrum_heatmap(rep.input_spectrum))
            save_image(out / "spectrum_masked.pgm", spectrum_heatmap(rep.spectra[0]))
    if out is not None:
        _write_json(out / f"{args.experiment}_report.json", report)
    logger.info("\n%s", text)
    print(json.dumps(report))
    return 0


def cmd_profile_energy(args, cfg: RunConfig) -> int:
    net = load_network(args.checkpoint)[0] if args.checkpoint else DerainNet(cfg.network)
    size = args.size
    m = net.cfg.size_multiple
    if size % m:
        raise UsageError(f"--size must be a multiple of {m}")
    if args.input:
        sample = to_chw(_pad_to(load_image(args.input), m))
    else:
        sample = np.random.default_rng(cfg.network.seed).uniform(0, 1, (1, 3, size, size))
    rep = energy_profile(net, sample)
    report = rep.to_dict()
    if args.out:
        _write_json(Path(args.out) / "energy.json", report)
    logger.info("\n%s", rep.to_text())
    print(json.dumps({k: report[k] for k in ("total_uj", "mac_uj", "sop_uj", "sign_uj")}))
    return 0


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="pin every RNG to this seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spikederain", description="Spiking image deraining toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="write synthetic rainy/clean pairs")
    g.add_argument("--count", type=int)
    g.add_argument("--size", type=int)
    g.add_argument("--test-count", type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", parents=[common], help="train a network")
    t.add_argument("--data", help="dataset root holding train/ (and optionally val/)")
    t.add_argument("--iterations", type=int)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", parents=[common], help="derain one image")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--input", required=True)
    i.add_argument("--reference", help="clean image; prints PSNR when given")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", parents=[common], help="PSNR/SSIM on a pair directory")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="directory holding rainy/ and clean/")
    e.add_argument("--neuron-variant", choices=["hybrid", "lif", "ilif", "vlif_c", "vlif_t"], help="swap neurons before evaluating")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("analyze-neuron", parents=[common], help="decay-matrix or saturation experiment")
    a.add_argument("--experiment", choices=["decay", "saturation"], default="decay")
    a.add_argument("--n", type=int, default=64)
    a.add_argument("--sigma", type=float, default=2.0)
    a.add_argument("--timesteps", type=int, default=1)
    a.add_argument("--t-max", type=int, default=5)
    a.set_defaults(func=cmd_analyze_neuron)

    f = sub.add_parser("profile-energy", parents=[common], help="inference energy estimate")
    f.add_argument("--checkpoint")
    f.add_argument("--input", help="image to profile on (default: random)")
    f.add_argument("--size", type=int, default=32)
    f.set_defaults(func=cmd_profile_energy)
    return p


VALIDATION_ERRORS = (ConfigError, UsageError, ShapeError, NetpbmError, spkt.SpktError, FileNotFoundError, ValueError, TypeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except VALIDATION_ERRORS as exc:
        print(f"spikederain {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"spikederain {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
