#!/usr/bin/env python3
"""Smoke test for the seq2emo_py bindings.

Builds nothing itself: run `cargo build --release -p seq2emo-py` first.
The script locates the compiled extension under target/release, copies it
next to a temp directory with the importable name, trains a tiny model
via the CLI if a checkpoint is not already present, and then exercises
every exported function.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
TARGET = REPO / "target" / "release"


def load_module():
    candidates = [TARGET / "libseq2emo_py.so", TARGET / "seq2emo_py.dll", TARGET / "libseq2emo_py.dylib"]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build --release -p seq2emo-py")
    stage = Path(tempfile.mkdtemp(prefix="seq2emo_py_"))
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy2(built, stage / f"seq2emo_py{suffix}")
    sys.path.insert(0, str(stage))
    import seq2emo_py  # noqa: E402

    return seq2emo_py


def approx(a, b, tol=1e-12):
    assert math.isclose(a, b, abs_tol=tol), f"{a} != {b}"


def main():
    m = load_module()

    # tokenizer
    assert m.tokenize("Hello, World!") == ["hello", ",", "world", "!"]
    assert m.tokenize("  ") == []

    # metrics
    gold = [[True, False, True], [False, True, False]]
    pred = [[True, False, False], [False, True, False]]
    approx(m.jaccard(gold, pred), (0.5 + 1.0) / 2)
    approx(m.hamming_loss(gold, pred), 1 / 6)
    approx(m.micro_f1(gold, pred), 2 * 2 / (2 * 2 + 0 + 1))
    p, r, f1, acc = m.macro_prf([0, 1, 1], [0, 1, 0], 2)
    approx(acc, 2 / 3)
    try:
        m.jaccard([], [])
    except ValueError:
        pass
    else:
        raise AssertionError("empty batch should raise ValueError")

    # hashtag map
    hm = m.HashtagMap.from_dict([("joy", ["#happy", "#joy"]), ("anger", ["#angry"])])
    assert hm.emotions() == ["joy", "anger"]
    assert hm.extract("so #happy and #angry today") == ["anger", "joy"]
    assert hm.strip("so #happy and #angry today") == "so and today"
    shipped = m.HashtagMap.load(str(REPO / "crates" / "seq2emo" / "data" / "bmet_hashtags.tsv"))
    assert "thankfulness" in shipped.emotions()

    # end-to-end: synth data -> train -> load checkpoint -> predict
    cli = TARGET / "seq2emo"
    if not cli.exists():
        sys.exit("CLI not built; run: cargo build --release -p seq2emo")
    work = Path(tempfile.mkdtemp(prefix="seq2emo_smoke_"))
    train_tsv = work / "train.tsv"
    subprocess.run([cli, "synth", "--kind", "correlated", "--out", train_tsv, "--seed", "3"], check=True)
    cfg = work / "run.cfg"
    cfg.write_text(
        "model = seq2emo\n"
        "labels = alpha,beta,gamma,delta\n"
        "hidden = 16\nlayers = 1\nd_g = 16\nd_s = 8\nd_f = 8\n"
        "lr_encoder = 5e-3\nlr_decoder = 5e-3\n"
        "dropout = 0\nepochs = 8\npatience = 8\nseed = 3\n"
        f"train = {train_tsv}\n"
    )
    ckpt = work / "model.ckpt"
    subprocess.run([cli, "train", "--config", cfg, "--out", ckpt], check=True, stdout=subprocess.DEVNULL)

    model = m.Model.load(str(ckpt))
    assert model.kind == "seq2emo"
    assert model.labels == ["alpha", "beta", "gamma", "delta"]
    names = model.predict("w01 w22 w30 w05")
    bits = model.predict_bits("w01 w22 w30 w05")
    assert names == [lbl for lbl, b in zip(model.labels, bits) if b]
    assert "alpha" in names, names
    try:
        model.predict("   ")
    except ValueError:
        pass
    else:
        raise AssertionError("empty text should raise ValueError")

    shutil.rmtree(work)
    print("smoke test passed")


if __name__ == "__main__":
    main()
