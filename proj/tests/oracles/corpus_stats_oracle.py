"""Independent statistics and filter re-check for a built corpus directory.

    python3 corpus_stats_oracle.py <corpus_dir> [golden_out.json]

Recomputes per-split statistics straight from train.txt / valid.txt /
test.txt (population stddev via the exact integer ratio
(n*sum(x^2) - sum(x)^2) / n^2), re-checks the five sentence filters against
vocab.txt, and compares with the pipeline's stats.json. Writes the oracle's
own view as JSON when a second path is given.
"""
import json
import math
import re
import sys
from pathlib import Path

SPECIALS = {"<pad>", "<sos>", "<eos>", "<unk>", "<url>"}
PLACEHOLDER = re.compile(r"^(d{1,4}|n)$")
LATIN = re.compile(r"[A-Za-zÀ-ɏ]")


def split_stats(lines):
    lengths = [len(l) for l in lines]
    n = len(lengths)
    total = sum(lengths)
    total_sq = sum(x * x for x in lengths)
    hist = {}
    for x in lengths:
        hist[x] = hist.get(x, 0) + 1
    return {
        "example_count": n,
        "mean_tokens": total / n,
        "stddev_tokens": math.sqrt((n * total_sq - total * total) / (n * n)),
        "unique_tokens": len({t for l in lines for t in l}),
        "length_histogram": [[k, hist[k]] for k in sorted(hist)],
    }


def violations(tokens, vocab):
    out = []
    if not (0 < len(tokens) < 40):
        out.append("length")
    if any(LATIN.search(t) and t not in SPECIALS and not PLACEHOLDER.match(t) for t in tokens):
        out.append("english")
    joined = "".join(tokens)
    if joined.count("'") % 2 or joined.count('"') % 2:
        out.append("quotes")
    depth = 0
    for ch in joined:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                break
    if depth != 0:
        out.append("brackets")
    unk = sum(1 for t in tokens if t not in vocab or t == "<unk>")
    if 10 * unk >= len(tokens):
        out.append("unknown_ratio")
    if any(re.search(r"[0-9]", t) for t in tokens):
        out.append("raw_digit")
    return out


def main():
    root = Path(sys.argv[1])
    vocab = {}
    for line in (root / "vocab.txt").read_text(encoding="utf-8").splitlines():
        tok, freq = line.rsplit("\t", 1)
        vocab[tok] = int(freq)
    report = {"splits": {}, "violations": 0}
    for key, name in (("train", "train.txt"), ("valid", "valid.txt"), ("test", "test.txt")):
        lines = [l.split() for l in (root / name).read_text(encoding="utf-8").splitlines()]
        report["splits"][key] = split_stats(lines) if lines else None
        report["violations"] += sum(1 for l in lines if violations(l, vocab))
    produced = json.loads((root / "stats.json").read_text(encoding="utf-8"))
    same = produced["splits"] == report["splits"]
    print("splits match stats.json:", same, "| filter violations:", report["violations"])
    if len(sys.argv) > 2:
        Path(sys.argv[2]).write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return 0 if same and report["violations"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
