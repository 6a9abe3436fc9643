"""Writes the CLI golden fixtures and their expected outputs.

golden.emba holds unit-norm float32 word vectors; every expected score is
computed here with numpy/scipy directly from those float32 values, without
touching the Rust code.
"""

import json
import struct
from pathlib import Path

import numpy as np
from scipy import optimize, stats

HERE = Path(__file__).parent
DIM = 6
LENGTHS = [3, 5, 2, 4, 6, 3, 1, 4]
PAIRS = [(0, 1), (2, 3), (4, 5), (6, 7), (1, 4), (3, 0), (5, 2), (7, 6), (0, 0)]
HUMAN = [3.5, 1.0, 4.25, 2.0, 0.5, 3.0, 2.75, 1.5, 5.0]
METADATA = {"model": "golden", "layer": 3, "normalized": True, "pipeline": ["normalize"]}


def sentences():
    rng = np.random.default_rng(20240611)
    out = []
    for n in LENGTHS:
        x = rng.normal(size=(n, DIM)) + 0.4
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        out.append(x.astype("<f4"))
    return out


def write_archive(xs, path):
    meta = json.dumps(METADATA, separators=(",", ":")).encode("utf-8")
    out = bytearray(b"EMBA")
    out += struct.pack("<IIII", 1, DIM, len(xs), len(meta))
    out += meta
    vocab = 0
    for x in xs:
        out += struct.pack("<I", len(x))
        for _ in range(len(x)):
            tok = f"w{vocab}".encode("utf-8")
            vocab += 1
            out += struct.pack("<H", len(tok)) + tok
        out += x.tobytes()
    path.write_bytes(bytes(out))


def lse(a, axis):
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def sbert(a, b):
    return float(a.mean(0) @ b.mean(0))


def cka(a, b):
    return float(((a @ b.T) ** 2).sum())


def recall(a, b):
    return float((a @ b.T).max(1).mean())


def trwmd(a, b, t):
    return float(t / len(a) * lse((a @ b.T) / t, 1).sum())


def twmd(a, b, t, iters):
    s = a @ b.T
    m, n = s.shape
    pi = np.exp((s - s.max()) / t)
    for _ in range(iters):
        pi = pi / (n * pi.sum(0, keepdims=True))
        pi = pi / (m * pi.sum(1, keepdims=True))
    return float((pi * s).sum())


def mover(a, b):
    s = a @ b.T
    m, n = s.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])
    res = optimize.linprog(-s.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return float(-res.fun)


def normalized(c, a, b):
    return c(a, b) / np.sqrt(c(a, a) * c(b, b))


def f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def main():
    xs = [x.astype(np.float64) for x in sentences()]
    write_archive(sentences(), HERE / "golden.emba")
    lines = ["pair_id\thyp_index\tref_index\thuman_score"]
    lines += [f"g{k}\t{h}\t{r}\t{s}" for k, ((h, r), s) in enumerate(zip(PAIRS, HUMAN))]
    (HERE / "golden_pairs.tsv").write_text("\n".join(lines) + "\n")

    runs = {
        "sbert": ([], lambda a, b: normalized(sbert, a, b)),
        "cka": ([], lambda a, b: normalized(cka, a, b)),
        "moverscore": ([], lambda a, b: normalized(mover, a, b)),
        "bertscore_f1": ([], lambda a, b: f1(normalized(recall, b, a), normalized(recall, a, b))),
        "trwmd": (["--temperature", "0.02"], lambda a, b: normalized(lambda x, y: trwmd(x, y, 0.02), a, b)),
        "twmd": (
            ["--temperature", "0.05", "--iters", "3"],
            lambda a, b: normalized(lambda x, y: twmd(x, y, 0.05, 3), a, b),
        ),
        "trwmd_precision": (
            ["--temperature", "0.1"],
            lambda a, b: normalized(lambda x, y: trwmd(x, y, 0.1), b, a),
        ),
    }
    golden = {}
    for metric, (flags, fn) in runs.items():
        scores = [fn(xs[h], xs[r]) for h, r in PAIRS]
        golden[metric] = {
            "flags": flags,
            "scores": scores,
            "pearson": float(stats.pearsonr(scores, HUMAN)[0]),
            "spearman": float(stats.spearmanr(scores, HUMAN)[0]),
            "kendall": float(stats.kendalltau(scores, HUMAN, variant="b")[0]),
        }
    (HERE / "golden_expected.json").write_text(json.dumps(golden, indent=2) + "\n")


if __name__ == "__main__":
    main()
