from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ..analysis import flops_report, gradcheck, histogram_report, probe_report, write_json_report
from ..backbone import DexNetwork, LossWeights
from ..config import RunConfig, build_run_config, read_run_config
from ..config.keys import (
    ANALYSIS_DIRNAME,
    CHECKPOINT_FILENAME,
    CONFIG_SNAPSHOT_FILENAME,
    METRICS_FILENAME,
)
from ..synthgen import export_samples, generate, images_to_array, sample_batch
from ..trainengine import Trainer, apply_checkpoint, read_checkpoint
from ..trainengine.trainer import DATA_STREAM, INIT_STREAM
from ..utils.errors import DexErrorCode, DexException
from ..utils.io import save_json
from ..utils.log import logger


def _load_config(args: argparse.Namespace) -> RunConfig:
    return read_run_config(
        Path(args.config) if args.config else None,
        args.overrides or (),
        preset=getattr(args, "preset", None),
    )


def cmd_pretrain(args: argparse.Namespace) -> int:
    run = _load_config(args)
    out_dir = run.output_path
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = run.snapshot()
    save_json(out_dir / CONFIG_SNAPSHOT_FILENAME, snapshot)

    trainer = Trainer.create(run.network, run.train)
    if args.resume:
        trainer.resume(Path(args.resume))
    history = trainer.run(
        run.data,
        out_dir / METRICS_FILENAME,
        out_dir / CHECKPOINT_FILENAME,
        config_snapshot=snapshot,
    )
    logger.info(
        "cli.pretrain.done",
        {"output_dir": str(out_dir), "steps": len(history)},
    )
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    run = _load_config(args)
    seed = run.train.seed
    network = DexNetwork.create(
        run.network,
        seed=[seed, INIT_STREAM],
        precision="float64",
        sigma=0.0,
        mu=run.train.mu,
        momentum=run.train.m_init,
    )
    data_rng = np.random.default_rng([seed, DATA_STREAM])
    images = images_to_array(sample_batch(run.data, run.train.batch_size, data_rng))
    lambda_bal = (
        run.train.lambda_bal_fixed
        if run.train.lambda_bal_fixed is not None
        else run.train.lambda_bal_init
    )
    report = gradcheck(
        network,
        images,
        weights=LossWeights.for_depth(run.network.depth, run.train.lambda_co, lambda_bal),
        rng=np.random.default_rng(seed),
        num_params=args.params,
    )
    write_json_report(run.output_path / "gradcheck.json", report.to_dict())
    if not report.passed:
        raise DexException(
            code=DexErrorCode.CHECK_FAILED,
            message="gradient check exceeded tolerance.",
            detail=report.to_dict(),
        )
    return 0


def _network_from_checkpoint(path: Path) -> tuple[RunConfig, DexNetwork]:
    data = read_checkpoint(path)
    run = build_run_config(data.config)
    network = DexNetwork.create(
        run.network,
        seed=[run.train.seed, INIT_STREAM],
        precision=run.train.precision,
        mu=run.train.mu,
    )
    apply_checkpoint(data, network)
    return run, network


def cmd_analyze(args: argparse.Namespace) -> int:
    run, network = _network_from_checkpoint(Path(args.checkpoint))
    out_dir = Path(args.out) if args.out else run.output_path / ANALYSIS_DIRNAME
    if args.what == "flops":
        flops_report(run.network, out_dir)
    elif args.what == "histograms":
        histogram_report(network, run.data, out_dir, n_samples=args.samples, seed=args.seed)
    else:
        probe_report(network, run.data, out_dir, n_samples=args.samples, seed=args.seed)
    logger.info("cli.analyze.done", {"what": args.what, "out_dir": str(out_dir)})
    return 0


def cmd_gen_samples(args: argparse.Namespace) -> int:
    run = _load_config(args)
    if args.count < 1:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="sample count must be >= 1.",
            detail={"count": args.count},
        )
    samples = generate(run.data, args.count)
    export_samples(samples, Path(args.out), args.format)
    return 0
