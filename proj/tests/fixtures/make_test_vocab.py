#!/usr/bin/env python3
"""Learns a small byte-level BPE table from the fixture corpus.

Writes test_vocab.ranks: 256 single-byte ranks followed by NUM_MERGES merges
learned by most-frequent-pair counting, in tiktoken "base64 rank" format.
The output is re-parsed and checked before the script exits.
"""
import base64
import collections
import pathlib
import sys

NUM_MERGES = 44
HERE = pathlib.Path(__file__).resolve().parent


def learn(text: bytes, num_merges: int):
    seq = [bytes([b]) for b in text]
    vocab = [bytes([b]) for b in range(256)]
    known = set(vocab)
    for _ in range(num_merges):
        pairs = collections.Counter(zip(seq, seq[1:]))
        # Deterministic: highest count, then lexicographically smallest pair.
        (a, b), _count = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
        merged = a + b
        assert merged not in known
        vocab.append(merged)
        known.add(merged)
        out, i = [], 0
        while i < len(seq):
            if i + 1 < len(seq) and seq[i] == a and seq[i + 1] == b:
                out.append(merged)
                i += 2
            else:
                out.append(seq[i])
                i += 1
        seq = out
    return vocab


def main() -> int:
    corpus = b"\n\n".join(p.read_bytes() for p in sorted((HERE / "corpus").glob("*.txt")))
    vocab = learn(corpus, NUM_MERGES)
    lines = [f"{base64.b64encode(tok).decode()} {rank}" for rank, tok in enumerate(vocab)]
    out = HERE / "test_vocab.ranks"
    out.write_text("\n".join(lines) + "\n")

    parsed = {}
    for line in out.read_text().splitlines():
        b64, rank = line.split(" ")
        tok = base64.b64decode(b64)
        assert tok not in parsed
        parsed[tok] = int(rank)
    assert sorted(parsed.values()) == list(range(len(vocab)))
    assert all(bytes([b]) in parsed for b in range(256))
    print(f"wrote {out.name}: {len(parsed)} entries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
