import csv
import json
import os

import numpy as np
import pytest

from ganpaint.cli import build_parser, run
from ganpaint.images import save_png


def _latest_run(outdir, command):
    base = os.path.join(outdir, command)
    stamps = sorted(os.listdir(base))
    return os.path.join(base, stamps[-1])


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "synth-data" in capsys.readouterr().out


def test_unknown_flag_exits_nonzero():
    assert run(["synth-data", "--bogus", "1"]) != 0


def test_missing_inputs_exit_nonzero(tmp_path):
    assert run(["--outdir", str(tmp_path / "runs"), "train-gan",
                "--data", str(tmp_path / "nope")]) == 1


def test_env_override(monkeypatch):
    monkeypatch.setenv("GANPAINT_COUNT", "7")
    args = build_parser().parse_args(["synth-data"])
    assert args.count == 7
    monkeypatch.delenv("GANPAINT_COUNT")


def test_synth_data_writes_run_artifacts(tmp_path):
    outdir = str(tmp_path / "runs")
    data = str(tmp_path / "data")
    assert run(["--outdir", outdir, "synth-data", "--data-out", data,
                "--count", "8", "--identities", "2", "--resolution", "16",
                "--sequences-per-identity", "1", "--sequence-length", "2"]) == 0
    assert os.path.exists(os.path.join(data, "manifest.json"))
    rd = _latest_run(outdir, "synth-data")
    assert os.path.exists(os.path.join(rd, "logs.txt"))
    cfg = json.load(open(os.path.join(rd, "resolved-config.json")))
    assert cfg["count"] == 8


@pytest.fixture(scope="module")
def cli_stack(tmp_path_factory):
    """A miniature cold-start chain: data -> gan -> init -> seq-init."""
    root = tmp_path_factory.mktemp("cli")
    outdir = str(root / "runs")
    data = str(root / "data")
    assert run(["--outdir", outdir, "synth-data", "--data-out", data,
                "--count", "24", "--identities", "4", "--resolution", "32",
                "--sequences-per-identity", "1", "--sequence-length", "3"]) == 0
    gan = str(root / "ckpt" / "gan")
    assert run(["--outdir", outdir, "train-gan", "--data", data,
                "--ckpt-out", gan, "--steps", "5", "--batch-size", "8",
                "--base-channels", "8", "--latent-dim", "16"]) == 0
    init = str(root / "ckpt" / "init")
    assert run(["--outdir", outdir, "train-init", "--data", data,
                "--gan", gan, "--ckpt-out", init, "--steps", "3",
                "--batch-size", "4"]) == 0
    seq_init = str(root / "ckpt" / "seq-init")
    assert run(["--outdir", outdir, "train-seq-init", "--data", data,
                "--gan", gan, "--ckpt-out", seq_init, "--steps", "3",
                "--batch-size", "2", "--h-dim", "32"]) == 0
    return {"root": root, "outdir": outdir, "data": data, "gan": gan,
            "init": init, "seq_init": seq_init}


def test_train_gan_artifacts(cli_stack):
    assert os.path.exists(os.path.join(cli_stack["gan"], "manifest.json"))
    rd = _latest_run(cli_stack["outdir"], "train-gan")
    assert os.path.exists(os.path.join(rd, "gan_losses.png"))


def test_inpaint_command(cli_stack):
    rng = np.random.default_rng(0)
    img_path = str(cli_stack["root"] / "probe.png")
    save_png(rng.uniform(-1, 1, (32, 32, 3)).astype(np.float32), img_path)
    assert run(["--outdir", cli_stack["outdir"], "inpaint",
                "--image", img_path, "--gan", cli_stack["gan"],
                "--iters", "8", "--record-every", "4"]) == 0
    rd = _latest_run(cli_stack["outdir"], "inpaint")
    for name in ("inpainted.png", "trace.csv", "z_hat.json", "damaged.png"):
        assert os.path.exists(os.path.join(rd, name)), name
    rows = list(csv.DictReader(open(os.path.join(rd, "trace.csv"))))
    assert [r["iteration"] for r in rows[:3]] == ["0", "4", "8"]


def test_inpaint_learned_init(cli_stack):
    rng = np.random.default_rng(1)
    img_path = str(cli_stack["root"] / "probe2.png")
    save_png(rng.uniform(-1, 1, (32, 32, 3)).astype(np.float32), img_path)
    assert run(["--outdir", cli_stack["outdir"], "inpaint",
                "--image", img_path, "--gan", cli_stack["gan"],
                "--init", "learned", "--init-ckpt", cli_stack["init"],
                "--iters", "4", "--record-every", "2"]) == 0


def test_inpaint_seq_command(cli_stack):
    rng = np.random.default_rng(2)
    img_path = str(cli_stack["root"] / "probe3.png")
    save_png(rng.uniform(-1, 1, (32, 32, 3)).astype(np.float32), img_path)
    assert run(["--outdir", cli_stack["outdir"], "inpaint-seq",
                "--image", img_path, "--gan", cli_stack["gan"],
                "--init", "lstm", "--seq-init-ckpt", cli_stack["seq_init"],
                "--window", "3", "--iters", "6", "--record-every", "3"]) == 0
    rd = _latest_run(cli_stack["outdir"], "inpaint-seq")
    assert os.path.exists(os.path.join(rd, "smoothness_trace.csv"))
    for k in range(3):
        assert os.path.exists(os.path.join(rd, f"frame{k:02d}_inpainted.png"))


def test_ablate_command(cli_stack):
    assert run(["--outdir", cli_stack["outdir"], "ablate",
                "--data", cli_stack["data"], "--gan", cli_stack["gan"],
                "--init-ckpt", cli_stack["init"],
                "--seq-init-ckpt", cli_stack["seq_init"],
                "--n-seq", "2", "--window", "3", "--iters", "4",
                "--record-every", "2"]) == 0
    rd = _latest_run(cli_stack["outdir"], "ablate")
    rows = list(csv.DictReader(open(os.path.join(rd, "per_item.csv"))))
    assert {r["method_tag"] for r in rows} == {"a_baseline", "b_smooth",
                                              "c_lstm_smooth"}
    assert os.path.exists(os.path.join(rd, "aggregates.json"))
    assert os.path.exists(os.path.join(rd, "grid_seq000.png"))


def test_plot_command(cli_stack):
    inpaint_rd = _latest_run(cli_stack["outdir"], "inpaint")
    trace = os.path.join(inpaint_rd, "trace.csv")
    assert run(["--outdir", cli_stack["outdir"], "plot",
                "--traces", trace]) == 0
    rd = _latest_run(cli_stack["outdir"], "plot")
    assert os.path.exists(os.path.join(rd, "traces.png"))
