"""Command-line front end: data synthesis, training, inpainting,
evaluation, ablation, plotting.

Every flag can be overridden by an environment variable named
GANPAINT_<FLAG> (upper-case, dashes to underscores).
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

log = logging.getLogger("ganpaint")

ENV_PREFIX = "GANPAINT_"


def _env(flag, default):
    name = ENV_PREFIX + flag.upper().replace("-", "_")
    raw = os.environ.get(name)
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if default is None:
        return raw
    return type(default)(raw)


def _add(parser, flag, default, help="", **kw):
    default = _env(flag, default)
    if default is not None and "type" not in kw and not isinstance(default, bool):
        kw["type"] = type(default)
    parser.add_argument(f"--{flag}", default=default, help=help, **kw)


def _run_dir(outdir, command):
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = os.path.join(outdir, command, stamp)
    n = 0
    while os.path.exists(path):
        n += 1
        path = os.path.join(outdir, command, f"{stamp}-{n}")
    os.makedirs(path)
    return path


def _start_run(args, command):
    run_dir = _run_dir(args.outdir, command)
    handler = logging.FileHandler(os.path.join(run_dir, "logs.txt"))
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logging.getLogger().addHandler(handler)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    with open(os.path.join(run_dir, "resolved-config.json"), "w") as f:
        json.dump(resolved, f, indent=2, sort_keys=True, default=str)
    log.info("run dir: %s", run_dir)
    return run_dir


def _load_manifest(path, resolution=None):
    from .data import DatasetManifest

    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    m = DatasetManifest.load(path)
    if resolution is not None and m.resolution != resolution:
        raise SystemExit(f"manifest resolution {m.resolution} != requested {resolution}")
    return m


# --------------------------------------------------------------------- commands


def cmd_synth_data(args):
    from .data import synthesize_toy_faces

    run_dir = _start_run(args, "synth-data")
    manifest = synthesize_toy_faces(
        args.count, args.resolution, args.identities, args.seed, args.data_out,
        sequences_per_identity=args.sequences_per_identity,
        sequence_length=args.sequence_length)
    log.info("wrote %d items under %s", len(manifest.items), args.data_out)
    with open(os.path.join(run_dir, "summary.json"), "w") as f:
        json.dump({"items": len(manifest.items), "root": args.data_out}, f, indent=2)
    return 0


def cmd_train_gan(args):
    from .data import split_manifest
    from .models import GanTrainConfig, train_gan

    run_dir = _start_run(args, "train-gan")
    manifest = _load_manifest(args.data)
    train, _ = split_manifest(manifest, seed=args.seed)
    cfg = GanTrainConfig(batch_size=args.batch_size, steps=args.steps,
                         lr_g=args.lr_g, lr_d=args.lr_d, seed=args.seed)
    ckpt = train_gan(train, cfg, base_channels=args.base_channels,
                     latent_dim=args.latent_dim)
    ckpt.save(args.ckpt_out)
    log.info("GAN checkpoint saved to %s", args.ckpt_out)
    _plot_gan_history(ckpt.loss_history, os.path.join(run_dir, "gan_losses.png"))
    return 0


def cmd_train_init(args):
    from .data import split_manifest
    from .initializer import InitTrainConfig, train_initializer
    from .models import ModelCheckpoint

    _start_run(args, "train-init")
    manifest = _load_manifest(args.data)
    train, _ = split_manifest(manifest, seed=args.seed)
    gan = ModelCheckpoint.load(args.gan)
    cfg = InitTrainConfig(lambda_=getattr(args, "lambda"), batch_size=args.batch_size,
                          steps=args.steps, learning_rate=args.lr, seed=args.seed)
    ckpt = train_initializer(train, gan, cfg)
    ckpt.save(args.ckpt_out)
    log.info("initializer checkpoint saved to %s", args.ckpt_out)
    return 0


def cmd_train_seq_init(args):
    from .data import split_manifest
    from .models import ModelCheckpoint
    from .seq_initializer import SeqInitTrainConfig, train_sequence_initializer

    _start_run(args, "train-seq-init")
    manifest = _load_manifest(args.data)
    train, _ = split_manifest(manifest, seed=args.seed)
    gan = ModelCheckpoint.load(args.gan)
    cfg = SeqInitTrainConfig(lambda_=getattr(args, "lambda"), batch_size=args.batch_size,
                             steps=args.steps, learning_rate=args.lr, seed=args.seed,
                             window_W=args.window, h_dim=args.h_dim)
    ckpt = train_sequence_initializer(train, gan, cfg)
    ckpt.save(args.ckpt_out)
    log.info("sequence-initializer checkpoint saved to %s", args.ckpt_out)
    return 0


def cmd_train_embedder(args):
    from .data import split_manifest
    from .embedder import EmbedderTrainConfig, train_embedder

    _start_run(args, "train-embedder")
    manifest = _load_manifest(args.data)
    train, _ = split_manifest(manifest, seed=args.seed)
    cfg = EmbedderTrainConfig(batch_size=args.batch_size, steps=args.steps,
                              learning_rate=args.lr, seed=args.seed)
    ckpt = train_embedder(train, cfg)
    ckpt.save(args.ckpt_out)
    log.info("embedder checkpoint saved to %s", args.ckpt_out)
    return 0


def _make_mask_for(args, resolution):
    from .masking import CorruptionSpec, make_mask

    spec = CorruptionSpec(kind=args.mask_kind,
                          fraction=args.mask_fraction if args.mask_fraction > 0 else None,
                          seed=args.seed)
    return make_mask(spec, (resolution, resolution))


def cmd_inpaint(args):
    from .images import load_png, save_png
    from .initializer import InitializerCheckpoint, predict_latent
    from .inpaint import OptimConfig, optimize_latent, save_result
    from .masking import apply_mask
    from .models import ModelCheckpoint, sample_prior

    run_dir = _start_run(args, "inpaint")
    gan = ModelCheckpoint.load(args.gan)
    image = load_png(args.image)
    mask = _make_mask_for(args, gan.resolution)
    damaged = apply_mask(image, mask)
    if args.init == "learned":
        init_ckpt = InitializerCheckpoint.load(args.init_ckpt)
        z0 = predict_latent(damaged, init_ckpt)
    else:
        z0 = sample_prior(1, gan.latent_dim, np.random.default_rng(args.seed))[0]
    cfg = OptimConfig(eta=args.eta, max_iters=args.iters, learning_rate=args.lr,
                      record_every=args.record_every, seed=args.seed)
    result = optimize_latent(damaged, mask, z0, gan, cfg)
    save_result(result, run_dir)
    save_png(damaged, os.path.join(run_dir, "damaged.png"))
    log.info("final total loss %.4f after %d iterations",
             result.trace[-1][3], result.iters_run)
    return 0


def cmd_inpaint_seq(args):
    from .ablation import (METHOD_BASELINE, METHOD_LSTM_SMOOTH, METHOD_SMOOTH,
                           run_method)
    from .data import CorruptionSpec, build_pseudo_sequence
    from .images import load_png, save_png
    from .initializer import InitializerCheckpoint
    from .models import ModelCheckpoint
    from .seq_initializer import SequenceInitCheckpoint
    from .seq_inpaint import SequenceOptimConfig, save_window

    run_dir = _start_run(args, "inpaint-seq")
    gan = ModelCheckpoint.load(args.gan)
    image = load_png(args.image)
    spec = CorruptionSpec(kind=args.mask_kind,
                          fraction=args.mask_fraction if args.mask_fraction > 0 else None)
    seq = build_pseudo_sequence(image, args.window, spec, seed=args.seed)
    method = {"random": METHOD_BASELINE, "learned": METHOD_SMOOTH,
              "lstm": METHOD_LSTM_SMOOTH}[args.init]
    init_ckpt = InitializerCheckpoint.load(args.init_ckpt) if args.init == "learned" else None
    seq_init_ckpt = SequenceInitCheckpoint.load(args.seq_init_ckpt) if args.init == "lstm" else None
    cfg = SequenceOptimConfig(eta=args.eta, max_iters=args.iters, learning_rate=args.lr,
                              record_every=args.record_every, seed=args.seed, mu=args.mu)
    window = run_method(seq, method, gan, init_ckpt, seq_init_ckpt, cfg)
    save_window(window, run_dir)
    for k, frame in enumerate(seq.frames):
        save_png(frame, os.path.join(run_dir, f"frame{k:02d}_damaged.png"))
    log.info("final smoothness %.4f", window.smoothness_trace[-1][1])
    return 0


def cmd_eval(args):
    """Paired learned-vs-random single-image inpainting metrics on a test split."""
    from .data import split_manifest
    from .evaluation import (MetricsReport, iterations_to_threshold, psnr,
                             significance_test)
    from .initializer import InitializerCheckpoint, predict_latent
    from .inpaint import OptimConfig, optimize_latent
    from .masking import apply_mask
    from .models import ModelCheckpoint, sample_prior

    run_dir = _start_run(args, "eval")
    gan = ModelCheckpoint.load(args.gan)
    init_ckpt = InitializerCheckpoint.load(args.init_ckpt)
    manifest = _load_manifest(args.data)
    _, test = split_manifest(manifest, seed=args.seed)
    items = test.items[: args.n]
    report = MetricsReport()
    rng = np.random.default_rng(args.seed)
    for item in items:
        image = test.load_image(item)
        mask = _make_mask_for(args, gan.resolution)
        damaged = apply_mask(image, mask)
        cfg = OptimConfig(eta=args.eta, max_iters=args.iters, learning_rate=args.lr,
                          record_every=args.record_every, seed=args.seed)
        z_rand = sample_prior(1, gan.latent_dim, rng)[0]
        res_rand = optimize_latent(damaged, mask, z_rand, gan, cfg)
        z_learn = predict_latent(damaged, init_ckpt)
        res_learn = optimize_latent(damaged, mask, z_learn, gan, cfg)
        threshold = res_rand.trace[-1][3]
        it_learn, _ = iterations_to_threshold(res_learn.trace, threshold)
        report.per_item.append({"item_id": item.item_id, "method_tag": "random",
                                "psnr_db": psnr(res_rand.inpainted, image),
                                "iters_to_threshold": cfg.max_iters})
        report.per_item.append({"item_id": item.item_id, "method_tag": "learned",
                                "psnr_db": psnr(res_learn.inpainted, image),
                                "iters_to_threshold": it_learn})
    report.compute_aggregates(pair_field="psnr_db")
    report.save_csv(os.path.join(run_dir, "per_item.csv"))
    report.save_json(os.path.join(run_dir, "aggregates.json"))
    log.info("eval report written to %s", run_dir)
    return 0


def cmd_ablate(args):
    from .ablation import pseudo_sequences_from_manifest, run_ablation
    from .data import split_manifest
    from .embedder import EmbedderCheckpoint
    from .initializer import InitializerCheckpoint
    from .models import ModelCheckpoint
    from .seq_initializer import SequenceInitCheckpoint
    from .seq_inpaint import SequenceOptimConfig

    run_dir = _start_run(args, "ablate")
    gan = ModelCheckpoint.load(args.gan)
    init_ckpt = InitializerCheckpoint.load(args.init_ckpt)
    seq_init_ckpt = SequenceInitCheckpoint.load(args.seq_init_ckpt)
    embedder = None
    if args.embedder_ckpt:
        embedder = EmbedderCheckpoint.load(args.embedder_ckpt).as_handle()
    manifest = _load_manifest(args.data)
    _, test = split_manifest(manifest, seed=args.seed)
    seqs = pseudo_sequences_from_manifest(test, args.n_seq, args.window, args.seed)
    cfg = SequenceOptimConfig(eta=args.eta, max_iters=args.iters,
                              learning_rate=args.lr, record_every=args.record_every,
                              seed=args.seed, mu=args.mu)
    report, windows = run_ablation(seqs, gan, init_ckpt, seq_init_ckpt, embedder,
                                   config=cfg, jobs=args.jobs)
    report.save_csv(os.path.join(run_dir, "per_item.csv"))
    report.save_json(os.path.join(run_dir, "aggregates.json"))
    _save_ablation_grids(seqs, windows, run_dir, n_grids=min(4, len(seqs)))
    for m, st in report.aggregates["per_method"].items():
        log.info("%s: median eta_temp %.2f dB", m, st["eta_temp_db"]["median"])
    return 0


def cmd_plot(args):
    import matplotlib

    matplotlib.use("Agg")
    import csv as _csv

    import matplotlib.pyplot as plt

    run_dir = _start_run(args, "plot")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in args.traces:
        with open(path) as f:
            rows = list(_csv.DictReader(f))
        iters = [int(r["iteration"]) for r in rows]
        key = "total" if "total" in rows[0] else "l_sm"
        ax.plot(iters, [float(r[key]) for r in rows], label=os.path.basename(path))
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    out = os.path.join(run_dir, "traces.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    if args.grid_images:
        _image_grid(args.grid_images, os.path.join(run_dir, "grid.png"),
                    n_cols=args.grid_cols)
    log.info("plots written to %s", run_dir)
    return 0


# --------------------------------------------------------------------- helpers


def _plot_gan_history(history, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not history:
        return
    arr = np.asarray(history)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(arr[:, 0], label="D loss", alpha=0.7)
    ax.plot(arr[:, 1], label="G loss", alpha=0.7)
    ax.plot(arr[:, 2], label="D(real)", alpha=0.7)
    ax.plot(arr[:, 3], label="D(fake)", alpha=0.7)
    ax.set_xlabel("step")
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _image_grid(paths, out_path, n_cols=3):
    from PIL import Image as PILImage

    tiles = [PILImage.open(p).convert("RGB") for p in paths]
    w = max(t.width for t in tiles)
    h = max(t.height for t in tiles)
    n_rows = (len(tiles) + n_cols - 1) // n_cols
    canvas = PILImage.new("RGB", (n_cols * (w + 2), n_rows * (h + 2)), (30, 30, 30))
    for i, t in enumerate(tiles):
        canvas.paste(t, ((i % n_cols) * (w + 2) + 1, (i // n_cols) * (h + 2) + 1))
    canvas.save(out_path)


def _save_ablation_grids(seqs, windows, run_dir, n_grids):
    """Per sequence: rows = damaged / each method, cols = frames."""
    from PIL import Image as PILImage

    from .ablation import ALL_METHODS
    from .images import to_uint8

    for i in range(n_grids):
        seq = seqs[i]
        rows = [seq.frames]
        for m in ALL_METHODS:
            if (i, m) in windows:
                rows.append([r.inpainted for r in windows[(i, m)].results])
        W = len(seq.frames)
        h, w = seq.frames[0].shape[:2]
        canvas = PILImage.new("RGB", (W * (w + 2), len(rows) * (h + 2)), (30, 30, 30))
        for r, row in enumerate(rows):
            for c, img in enumerate(row):
                canvas.paste(PILImage.fromarray(to_uint8(img)),
                             (c * (w + 2) + 1, r * (h + 2) + 1))
        canvas.save(os.path.join(run_dir, f"grid_seq{i:03d}.png"))


# --------------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="ganpaint",
                                     description="GAN latent-space face inpainting lab")
    parser.add_argument("--outdir", default=_env("outdir", "runs"),
                        help="root directory for run outputs")
    parser.add_argument("--verbose", action="store_true",
                        default=_env("verbose", False))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="render the toy face dataset")
    _add(p, "data-out", "toy-data")
    _add(p, "count", 2000)
    _add(p, "identities", 20)
    _add(p, "resolution", 32)
    _add(p, "sequences-per-identity", 2)
    _add(p, "sequence-length", 5)
    _add(p, "seed", 0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train-gan", help="adversarial training on a manifest")
    _add(p, "data", "toy-data")
    _add(p, "ckpt-out", "ckpt/gan")
    _add(p, "steps", 3000)
    _add(p, "batch-size", 64)
    _add(p, "lr-g", 2e-4)
    _add(p, "lr-d", 2e-4)
    _add(p, "latent-dim", 100)
    _add(p, "base-channels", 64)
    _add(p, "seed", 0)
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("train-init", help="train the warm-start network")
    _add(p, "data", "toy-data")
    _add(p, "gan", "ckpt/gan")
    _add(p, "ckpt-out", "ckpt/init")
    _add(p, "steps", 3000)
    _add(p, "batch-size", 64)
    _add(p, "lr", 2e-4)
    _add(p, "lambda", 0.01)
    _add(p, "seed", 0)
    p.set_defaults(func=cmd_train_init)

    p = sub.add_parser("train-seq-init", help="train the recurrent warm-start")
    _add(p, "data", "toy-data")
    _add(p, "gan", "ckpt/gan")
    _add(p, "ckpt-out", "ckpt/seq-init")
    _add(p, "steps", 3000)
    _add(p, "batch-size", 16)
    _add(p, "lr", 2e-4)
    _add(p, "lambda", 0.0)
    _add(p, "window", 3)
    _add(p, "h-dim", 256)
    _add(p, "seed", 0)
    p.set_defaults(func=cmd_train_seq_init)

    p = sub.add_parser("train-embedder", help="train the toy identity embedder")
    _add(p, "data", "toy-data")
    _add(p, "ckpt-out", "ckpt/embedder")
    _add(p, "steps", 1500)
    _add(p, "batch-size", 64)
    _add(p, "lr", 1e-3)
    _add(p, "seed", 0)
    p.set_defaults(func=cmd_train_embedder)

    def optim_flags(p):
        _add(p, "eta", 0.003)
        _add(p, "iters", 700)
        _add(p, "lr", 0.1)
        _add(p, "record-every", 10)
        _add(p, "seed", 0)
        _add(p, "mask-kind", "central")
        _add(p, "mask-fraction", 0.5)

    p = sub.add_parser("inpaint", help="single-image inpainting")
    _add(p, "image", None)
    _add(p, "gan", "ckpt/gan")
    _add(p, "init-ckpt", "ckpt/init")
    p.add_argument("--init", choices=("random", "learned"),
                   default=_env("init", "random"))
    optim_flags(p)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("inpaint-seq", help="joint window inpainting")
    _add(p, "image", None)
    _add(p, "gan", "ckpt/gan")
    _add(p, "init-ckpt", "ckpt/init")
    _add(p, "seq-init-ckpt", "ckpt/seq-init")
    p.add_argument("--init", choices=("random", "learned", "lstm"),
                   default=_env("init", "lstm"))
    _add(p, "mu", 0.1)
    _add(p, "window", 3)
    optim_flags(p)
    # fraction drawn per frame by default: a window needs distinct masks,
    # and a fixed-fraction central mask is the same rectangle every time
    p.set_defaults(func=cmd_inpaint_seq, mask_fraction=0.0)

    p = sub.add_parser("eval", help="paired learned-vs-random metrics")
    _add(p, "data", "toy-data")
    _add(p, "gan", "ckpt/gan")
    _add(p, "init-ckpt", "ckpt/init")
    _add(p, "n", 50)
    optim_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="consistency ladder over pseudo sequences")
    _add(p, "data", "toy-data")
    _add(p, "gan", "ckpt/gan")
    _add(p, "init-ckpt", "ckpt/init")
    _add(p, "seq-init-ckpt", "ckpt/seq-init")
    _add(p, "embedder-ckpt", "")
    _add(p, "n-seq", 100)
    _add(p, "window", 3)
    _add(p, "mu", 0.1)
    _add(p, "jobs", 1)
    optim_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="render trace CSVs and image grids")
    p.add_argument("--traces", nargs="*", default=[])
    p.add_argument("--grid-images", nargs="*", default=[])
    _add(p, "grid-cols", 3)
    p.set_defaults(func=cmd_plot)

    return parser


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as e:  # surface module errors with a nonzero exit
        log.error("%s: %s", type(e).__name__, e)
        if args.verbose:
            raise
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
