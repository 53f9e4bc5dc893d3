"""Smoke test for the evtcn extension module.

Uses an installed `evtcn` when available; otherwise builds the cdylib with
cargo and loads it from a temporary directory.
"""

import os
import shutil
import subprocess
import sys
import sysconfig
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_and_stage():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "evtcn-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    lib = os.path.join(target, "release", "libevtcn_py.so")
    if sys.platform == "darwin":
        lib = lib[:-3] + ".dylib"
    stage = tempfile.mkdtemp(prefix="evtcn-")
    shutil.copy(lib, os.path.join(stage, "evtcn" + sysconfig.get_config_var("EXT_SUFFIX")))
    sys.path.insert(0, stage)


def main():
    try:
        import evtcn  # noqa: F401
    except ImportError:
        build_and_stage()
    import evtcn

    assert evtcn.receptive_field(3, [1, 2, 4, 8]) == 61
    assert evtcn.pearson_rho([0.0, 1.0, 2.0], [0.0, 2.0, 4.0]) == 1.0
    assert evtcn.m_rho([[1.0, None]]) == (0.5, 1)
    assert evtcn.ensemble([[0.5, 1.0]], [[0.0, 0.0]], lam=1.0) == [[0.5, 1.0]]

    train = evtcn.synthetic_dataset(seed=1, videos=6, min_len=60, max_len=80, features=6, expressions=3)
    model = evtcn.Model(6, 3, hidden=16, blocks=3, head_hidden=16, dropout=0.0, seed=1)
    losses = model.train(train, epochs=10, lr=0.1, batch_size=1, seed=1)
    assert losses[-1] < losses[0], losses
    score, undefined = evtcn.evaluate(model, train)
    print(model)
    print(f"parameters={model.num_parameters} receptive_field={model.receptive_field}")
    print(f"loss {losses[0]:.5f} -> {losses[-1]:.5f}")
    print(f"M_rho={score:.4f} undefined={undefined}")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.tcnk")
        model.save(path)
        again = evtcn.Model.load(path)
        assert again.predict_sequence(train[0]) == model.predict_sequence(train[0])
        with open(path, "r+b") as f:
            f.truncate(10)
        try:
            evtcn.Model.load(path)
        except evtcn.FormatError as e:
            print(f"truncated checkpoint rejected: {e}")
        else:
            raise AssertionError("truncated checkpoint loaded")

    print("smoke test ok")


if __name__ == "__main__":
    main()
