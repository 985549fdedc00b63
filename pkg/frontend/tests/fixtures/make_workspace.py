"""Build a throwaway annotation-service workspace for frontend tests."""
import sys
from pathlib import Path

from scriptorium.data import LineRecord, Manifest, write_manifest
from scriptorium.synth import render_line, save_png
from scriptorium.textcore import Alphabet


def main(root: Path) -> None:
    (root / "images").mkdir(parents=True, exist_ok=True)
    lines, chars = [], []
    for i, text in enumerate(["ab", "ba"]):
        rel = f"images/line-{i}.png"
        save_png(render_line(text, style_seed=i), root / rel)
        lines.append(LineRecord(id=f"line-{i}", image_path=rel, transcription=text))
    for i, char in enumerate(["a", "b"]):
        rel = f"images/char-{i}.png"
        save_png(render_line(char, style_seed=20 + i), root / rel)
        chars.append(LineRecord(id=f"char-{i}", image_path=rel, transcription=char))
    write_manifest(Manifest(records=lines), root / "lines.jsonl")
    write_manifest(Manifest(records=chars), root / "chars.jsonl")
    Alphabet(("a", "b")).save(root / "alphabet.txt")
    (root / "service.json").write_text(
        '{"host": "127.0.0.1", "port": 0, "store": "annotations.jsonl",\n'
        ' "tasks": {"line_typing": "lines.jsonl", "char_labeling": "chars.jsonl"},\n'
        ' "alphabet": "alphabet.txt"}\n', encoding="utf-8")
    print("ok")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
