import json
import re
import signal
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from scriptorium.cli import main

CORPUS = ["cat", "dog", "sun", "map", "ten", "fox"]
VAL = ["dog", "map"]


def write_corpus(path: Path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_dataset(tmp_path: Path) -> Path:
    data = tmp_path / "data"
    corpus = tmp_path / "corpus.txt"
    write_corpus(corpus, CORPUS)
    assert main(["synth", "--corpus", str(corpus), "--out", str(data),
                 "--seed", "3", "--noise", "0.01"]) == 0
    # append a validation split rendered with a different seed
    from scriptorium.data import load_manifest, synth_lines, write_manifest
    manifest = load_manifest(data / "manifest.jsonl")
    manifest.records.extend(
        synth_lines(VAL, style_seed=4, out_dir=data, split="validation"))
    write_manifest(manifest, data / "manifest.jsonl")
    return data


def train_args(data: Path, **over):
    base = {"loss": "ctc", "seed": "0", "max-epochs": "2", "lr": "0.003"}
    base.update(over)
    args = ["train", "--data", str(data)]
    for key, val in base.items():
        args += [f"--{key}", str(val)]
    return args


def history_rows(path: Path) -> list[str]:
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        write_corpus(corpus, ["ab", "ba"])
        for out in ("a", "b"):
            assert main(["synth", "--corpus", str(corpus),
                         "--out", str(tmp_path / out), "--seed", "7"]) == 0
        for rel in ("manifest.jsonl", "images/train-00000.png"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_count_zero_gives_empty_manifest(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        write_corpus(corpus, ["ab"])
        assert main(["synth", "--corpus", str(corpus), "--out", str(tmp_path / "o"),
                     "--count", "0"]) == 0
        from scriptorium.data import load_manifest
        assert load_manifest(tmp_path / "o" / "manifest.jsonl").records == []

    def test_missing_corpus_exit_2(self, tmp_path):
        assert main(["synth", "--corpus", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_unknown_symbol_exit_2(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("café\n", encoding="utf-8")
        assert main(["synth", "--corpus", str(corpus), "--out", str(tmp_path / "o")]) == 2


class TestTrain:
    def test_lambda_zero_matches_ctc_history(self, tmp_path):
        data = make_dataset(tmp_path)
        assert main(train_args(data, loss="ctc", history=str(tmp_path / "h_ctc.csv"),
                               ckpt=str(tmp_path / "ctc.ckpt"))) == 0
        assert main(train_args(data, loss="psych", **{"lambda": "0"},
                               history=str(tmp_path / "h_psych.csv"),
                               ckpt=str(tmp_path / "psych.ckpt"))) == 0
        assert history_rows(tmp_path / "h_ctc.csv") == history_rows(tmp_path / "h_psych.csv")
        assert (tmp_path / "ctc.ckpt").read_bytes() == (tmp_path / "psych.ckpt").read_bytes()

    def test_schedule_defaults_logged(self, tmp_path, capsys):
        data = make_dataset(tmp_path)
        assert main(train_args(data, **{"max-epochs": "1"})) == 0
        out = capsys.readouterr().out
        assert "halve lr after 15 stale epochs, stop after 80" in out

    def test_distinct_seeds_distinct_checkpoints(self, tmp_path):
        data = make_dataset(tmp_path)
        blobs = []
        for seed in range(1, 6):
            ckpt = tmp_path / f"s{seed}.ckpt"
            assert main(train_args(data, seed=str(seed), ckpt=str(ckpt),
                                   **{"max-epochs": "1"})) == 0
            blobs.append(ckpt.read_bytes())
        assert len({b for b in blobs}) == 5

    def test_data_dir_from_environment(self, tmp_path, monkeypatch):
        data = make_dataset(tmp_path)
        monkeypatch.setenv("SCRIPTORIUM_DATA", str(data))
        assert main(["train", "--loss", "ctc", "--seed", "0",
                     "--max-epochs", "1", "--lr", "0.003",
                     "--ckpt", str(tmp_path / "env.ckpt")]) == 0
        monkeypatch.delenv("SCRIPTORIUM_DATA")
        assert main(["train", "--loss", "ctc", "--max-epochs", "1"]) == 2

    def test_missing_alphabet_is_data_error(self, tmp_path):
        data = make_dataset(tmp_path)
        manifest = (data / "manifest.jsonl").read_text().splitlines()
        header = json.loads(manifest[0])
        del header["alphabet"]
        manifest[0] = json.dumps(header, sort_keys=True, separators=(",", ":"))
        (data / "manifest.jsonl").write_text("\n".join(manifest) + "\n")
        assert main(train_args(data)) == 3


class TestEvalCompare:
    def test_eval_prints_four_decimals(self, tmp_path, capsys):
        data = make_dataset(tmp_path)
        ckpt = tmp_path / "model.ckpt"
        assert main(train_args(data, ckpt=str(ckpt))) == 0
        capsys.readouterr()
        per_line = tmp_path / "lines.csv"
        assert main(["eval", "--ckpt", str(ckpt), "--data", str(data),
                     "--split", "validation", "--out", str(per_line)]) == 0
        out = capsys.readouterr().out
        assert re.search(r"CER \d\.\d{4}\n", out)
        assert re.search(r"WER \d\.\d{4}\n", out)
        rows = per_line.read_text().splitlines()
        assert rows[0].startswith("id,reference,prediction")
        assert len(rows) == 1 + len(VAL)

    def test_eval_with_lm_runs(self, tmp_path, capsys):
        data = make_dataset(tmp_path)
        ckpt = tmp_path / "model.ckpt"
        assert main(train_args(data, ckpt=str(ckpt))) == 0
        corpus = tmp_path / "corpus.txt"
        lm_path = tmp_path / "char.lm"
        assert main(["lm", "--corpus", str(corpus), "--alphabet",
                     str(data / "alphabet.txt"), "--out", str(lm_path),
                     "--order", "3"]) == 0
        assert main(["eval", "--ckpt", str(ckpt), "--data", str(data),
                     "--split", "validation", "--lm", str(lm_path),
                     "--beam", "4"]) == 0
        assert "CER" in capsys.readouterr().out

    def test_eval_corrupt_checkpoint_exit_4(self, tmp_path):
        data = make_dataset(tmp_path)
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"SCRPgarbage")
        assert main(["eval", "--ckpt", str(bad), "--data", str(data)]) == 4

    def _history(self, path, loss, seed, cers):
        config = {"loss": loss, "seed": seed}
        lines = ["# scriptorium train v0",
                 f"# config={json.dumps(config)}",
                 "epoch,train_loss,val_cer,val_wer,lr"]
        lines += [f"{i + 1},1.0,{c},{c},0.001" for i, c in enumerate(cers)]
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_compare_paired(self, tmp_path, capsys):
        files = []
        for seed, (ctc, psych) in enumerate([(0.5, 0.4), (0.6, 0.65), (0.3, 0.2)]):
            files.append(self._history(tmp_path / f"c{seed}.csv", "ctc", seed, [ctc, 0.9]))
            files.append(self._history(tmp_path / f"p{seed}.csv", "psych", seed, [0.9, psych]))
        assert main(["compare", "--histories"] + [str(f) for f in files]) == 0
        out = capsys.readouterr().out
        assert "psych wins 2/3" in out
        # deltas (-0.1, +0.05, -0.1): mean -0.05, sample SE sqrt(0.0075/3) = 0.05
        assert "mean delta -0.0500 +- 0.0500" in out
        assert "standard error" in out

    def test_compare_identical_histories(self, tmp_path, capsys):
        files = [self._history(tmp_path / "c.csv", "ctc", 1, [0.5]),
                 self._history(tmp_path / "p.csv", "psych", 1, [0.5])]
        assert main(["compare", "--histories"] + [str(f) for f in files]) == 0
        out = capsys.readouterr().out
        assert "psych wins 0/1" in out
        assert "mean delta +0.0000" in out

    def test_compare_single_history_exit_2(self, tmp_path):
        f = self._history(tmp_path / "c.csv", "ctc", 1, [0.5])
        assert main(["compare", "--histories", str(f)]) == 2

    def test_compare_unpaired_seeds_exit_2(self, tmp_path):
        files = [self._history(tmp_path / "c.csv", "ctc", 1, [0.5]),
                 self._history(tmp_path / "p.csv", "psych", 2, [0.4])]
        assert main(["compare", "--histories"] + [str(f) for f in files]) == 2


class TestServe:
    def test_bad_config_exit_2(self, tmp_path):
        config = tmp_path / "broken.json"
        config.write_text("{}")
        assert main(["serve", "--config", str(config)]) == 2

    def test_serve_binds_and_flushes_on_sigterm(self, tmp_path):
        from scriptorium.data import LineRecord, Manifest, write_manifest
        from scriptorium.synth import render_line, save_png
        (tmp_path / "images").mkdir()
        save_png(render_line("ab", 1), tmp_path / "images" / "l0.png")
        write_manifest(Manifest(records=[LineRecord(
            id="l0", image_path="images/l0.png", transcription="ab")]),
            tmp_path / "lines.jsonl")
        (tmp_path / "service.json").write_text(json.dumps({
            "port": 0, "store": "store.jsonl",
            "tasks": {"line_typing": "lines.jsonl"}}))
        proc = subprocess.Popen(
            [sys.executable, "-m", "scriptorium.cli", "serve",
             "--config", str(tmp_path / "service.json")],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
        try:
            line = proc.stdout.readline()
            match = re.search(r"http://[\d.]+:(\d+)/", line)
            assert match, line
            port = int(match.group(1))
            req = urllib.request.Request(
                f"http://127.0.0.1:{port}/sessions",
                data=json.dumps({"annotator_id": "a", "task": "line_typing"}).encode(),
                method="POST", headers={"Content-Type": "application/json"})
            with urllib.request.urlopen(req) as resp:
                assert resp.status == 201
        finally:
            proc.send_signal(signal.SIGTERM)
            out, _ = proc.communicate(timeout=10)
        assert "annotation log flushed" in out
        assert (tmp_path / "store.jsonl").exists()
