"""Recomputes a samples_report.json from samples.txt and the train split.

    python3 sample_stats_oracle.py <samples.txt> <train.txt> <samples_report.json>

Exit 0 when every field agrees (counts exactly, moments to 1e-12 relative),
1 otherwise with the differing fields on stderr.
"""
import json
import math
import sys
from fractions import Fraction


def read(path):
    with open(path, encoding="utf-8") as f:
        return [tuple(line.rstrip("\n").split()) for line in f]


def main():
    samples, train, report = read(sys.argv[1]), set(read(sys.argv[2])), json.load(open(sys.argv[3]))
    lengths = [len(s) for s in samples]
    n = len(lengths)
    mean = Fraction(sum(lengths), n)
    var = sum((Fraction(x) - mean) ** 2 for x in lengths) / n
    unique = set(samples)
    mine = {
        "n_requested": n,
        "n_unique": len(unique),
        "n_unique_not_in_train": sum(1 for s in unique if s not in train),
        "mean_tokens": float(mean),
        "stddev_tokens": math.sqrt(float(var)),
        "unique_words": len({w for s in samples for w in s}),
        "lengths": lengths,
    }
    bad = []
    for key, want in mine.items():
        got = report.get(key)
        if isinstance(want, float):
            if got is None or not math.isclose(got, want, rel_tol=1e-12, abs_tol=1e-12):
                bad.append(key)
        elif got != want:
            bad.append(key)
    for key in bad:
        print(f"mismatch {key}: report {report.get(key)!r} oracle {mine[key]!r}", file=sys.stderr)
    print(f"sample_stats_oracle: {n} samples, {len(bad)} mismatching fields")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
