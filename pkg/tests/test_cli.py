import json

import numpy as np
import pytest

from backend.codebook_file import load_codebook, save_codebook
from backend.model_file import load_model, save_model
from backend.wav_file import read_wav, write_wav
from codec.mlp import LAYER_SIZES, MlpNetwork
from codec.vq import Codebook
from dsp.signal import AudioBuffer
from main import run


def _speechlike(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / 16000.0
    voiced = sum(np.sin(2 * np.pi * 130 * h * t) / h for h in range(1, 20))
    return 0.1 * voiced + 0.01 * rng.standard_normal(n)


def _codebook(seed=0):
    rng = np.random.default_rng(seed)
    k = np.arange(40)
    return Codebook(np.array([a * np.cos(np.pi * k * f / 40) for a, f in zip(rng.uniform(1, 8, 16),
                                                                           rng.uniform(0.5, 3, 16))]))


def _network():
    weights = tuple(np.zeros((o, i)) for i, o in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]))
    biases = (np.zeros(10), np.zeros(10), np.full(2, -30.0))
    return MlpNetwork(weights, biases, np.zeros(18), np.ones(18), "mfcc-c0")


def _envelope(capsys):
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    return json.loads(lines[-1])


@pytest.fixture
def workspace(tmp_path):
    write_wav(AudioBuffer(_speechlike(4096), 16000), tmp_path / "wb.wav")
    save_codebook(_codebook(), tmp_path / "cb.bwxvq")
    save_model(_network(), tmp_path / "net.bwxmlp")
    return tmp_path


def test_encode_inspect_decode(workspace, capsys):
    w = workspace
    code = run(["encode", "--in", str(w / "wb.wav"), "--codebook", str(w / "cb.bwxvq"),
                "--out-nb", str(w / "nb.wav"), "--out-si", str(w / "s.bwxsi"), "--json"])
    assert code == 0
    encoded = _envelope(capsys)
    assert encoded["success"] and encoded["result"]["frames"] == 16
    assert read_wav(w / "nb.wav").sample_rate == 8000

    assert run(["inspect", str(w / "s.bwxsi"), "--json"]) == 0
    summary = _envelope(capsys)["result"]
    assert summary["bit_rate"] == 500.0
    assert summary["frame_count"] == 16
    assert summary["codebook_hash"] == f"{_codebook().content_hash:016x}"

    code = run(["decode", "--in", str(w / "nb.wav"), "--in-si", str(w / "s.bwxsi"),
                "--codebook", str(w / "cb.bwxvq"), "--model", str(w / "net.bwxmlp"), "--out", str(w / "out.wav")])
    assert code == 0
    assert "samples: 4096" in capsys.readouterr().out
    out = read_wav(w / "out.wav")
    assert out.sample_rate == 16000 and len(out) == 4096


def test_decode_with_another_codebook_fails(workspace, capsys):
    w = workspace
    run(["encode", "--in", str(w / "wb.wav"), "--codebook", str(w / "cb.bwxvq"),
         "--out-nb", str(w / "nb.wav"), "--out-si", str(w / "s.bwxsi")])
    save_codebook(_codebook(seed=1), w / "other.bwxvq")
    capsys.readouterr()

    code = run(["decode", "--in", str(w / "nb.wav"), "--in-si", str(w / "s.bwxsi"),
                "--codebook", str(w / "other.bwxvq"), "--model", str(w / "net.bwxmlp"), "--out", str(w / "out.wav")])
    assert code == 1
    assert "codebook hash mismatch" in capsys.readouterr().err
    assert not (w / "out.wav").exists()


def test_failures_report_an_envelope_with_json(tmp_path, capsys):
    code = run(["inspect", str(tmp_path / "missing.bwxsi"), "--json"])
    assert code == 1
    captured = capsys.readouterr()
    assert captured.err.startswith("error code=file/io")
    envelope = json.loads(captured.out.strip())
    assert envelope["success"] is False
    assert envelope["error"]["exit_code"] == 1


def test_usage_errors_exit_with_two(workspace, capsys):
    assert run(["no-such-command"]) == 2
    assert run([]) == 2
    assert run(["extract-targets", "--out", str(workspace / "t.csv")]) == 2
    assert "exactly one of --in or --manifest" in capsys.readouterr().err


def test_resample_halves_and_doubles(workspace):
    w = workspace
    assert run(["resample", "--in", str(w / "wb.wav"), "--out", str(w / "nb.wav")]) == 0
    nb = read_wav(w / "nb.wav")
    assert nb.sample_rate == 8000 and len(nb) == 2048
    assert run(["resample", "--in", str(w / "nb.wav"), "--out", str(w / "up.wav")]) == 0
    up = read_wav(w / "up.wav")
    assert up.sample_rate == 16000 and len(up) == 4096


def test_dump_spectrum_to_stdout_and_file(workspace, capsys):
    w = workspace
    assert run(["dump-spectrum", "--in", str(w / "wb.wav"), "--at", "0.05"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "hz,db"
    assert len(lines) == 1 + 257

    assert run(["dump-spectrum", "--in", str(w / "wb.wav"), "--out", str(w / "s.csv"), "--json"]) == 0
    result = _envelope(capsys)["result"]
    assert result["bins"] == 257
    table = np.loadtxt(w / "s.csv", delimiter=",", skiprows=1)
    assert table.shape == (257, 2)


def test_training_and_evaluation_commands(workspace, capsys):
    w = workspace
    write_wav(AudioBuffer(_speechlike(16384, seed=3), 16000), w / "long.wav")
    (w / "train.txt").write_text("# corpus\nlong.wav\nwb.wav\n")

    assert run(["train-vq", "--manifest", str(w / "train.txt"), "--out", str(w / "vq.bwxvq"),
                "--bits", "2", "--json"]) == 0
    summary = _envelope(capsys)["result"]
    assert summary["extra"]["bits"] == 2
    assert summary["sample_count"] == 80
    assert load_codebook(w / "vq.bwxvq").size == 4

    assert run(["eval-sd", "--manifest", str(w / "train.txt"), "--codebook", str(w / "vq.bwxvq"), "--json"]) == 0
    report = _envelope(capsys)["result"]
    assert report["frame_count"] == 80
    assert report["mean"] >= 0.0

    assert run(["train-mlp", "--manifest", str(w / "train.txt"), "--out", str(w / "m.bwxmlp"),
                "--epochs", "3", "--json"]) == 0
    trained = _envelope(capsys)["result"]
    assert trained["sample_count"] > 0
    assert load_model(w / "m.bwxmlp").mfcc_tag == "mfcc-c0"

    assert run(["eval-harm", "--manifest", str(w / "train.txt"), "--model", str(w / "m.bwxmlp"), "--json"]) == 0
    harm = _envelope(capsys)["result"]
    assert harm["frame_count"] == trained["sample_count"]

    assert run(["extract-targets", "--in", str(w / "long.wav"), "--out", str(w / "t.csv")]) == 0
    rows = np.loadtxt(w / "t.csv", delimiter=",", ndmin=2)
    assert rows.shape[1] == 5 and rows.shape[0] > 0


def test_encode_without_pre_emphasis_handles_a_lone_last_sample(workspace, capsys):
    w = workspace
    write_wav(AudioBuffer(_speechlike(4097, seed=5), 16000), w / "odd.wav")
    code = run(["encode", "--in", str(w / "odd.wav"), "--codebook", str(w / "cb.bwxvq"), "--preemph", "0",
                "--out-nb", str(w / "nb.wav"), "--out-si", str(w / "s.bwxsi"), "--json"])
    assert code == 0
    assert _envelope(capsys)["result"]["frames"] == 17


def test_decode_reads_the_inverse_irs_taps_not_the_send_side_ones(workspace, capsys):
    w = workspace
    run(["encode", "--in", str(w / "wb.wav"), "--codebook", str(w / "cb.bwxvq"),
         "--out-nb", str(w / "nb.wav"), "--out-si", str(w / "s.bwxsi")])
    decode = ["decode", "--in", str(w / "nb.wav"), "--in-si", str(w / "s.bwxsi"),
              "--codebook", str(w / "cb.bwxvq"), "--model", str(w / "net.bwxmlp")]
    (w / "identity.fir").write_text("# identity\n1.0\n")

    assert run(decode + ["--out", str(w / "plain.wav")]) == 0
    assert run(decode + ["--out", str(w / "inv.wav"), "--inverse-irs-fir", str(w / "identity.fir")]) == 0
    np.testing.assert_array_equal(read_wav(w / "inv.wav").samples, read_wav(w / "plain.wav").samples)

    # send-side taps play no part in decoding
    assert run(decode + ["--out", str(w / "send.wav"), "--irs-fir", str(w / "missing.fir")]) == 0
    capsys.readouterr()
    assert run(decode + ["--out", str(w / "bad.wav"), "--inverse-irs-fir", str(w / "missing.fir")]) == 1
    assert "No such tap file" in capsys.readouterr().err
