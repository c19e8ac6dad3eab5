#!/usr/bin/env python3
"""Recount per-split corpus statistics without going through the C++ loader.

Usage: recount_stats.py train.jsonl [valid.jsonl ...]
"""
import json
import sys


def stats(path):
    with open(path, encoding="utf-8") as f:
        entries = [json.loads(line) for line in f if line.strip()]
    words = {e["word"].lower() for e in entries}
    def_tokens = sum(len(e["definition"].lower().split()) for e in entries)
    ctx = [len(c.lower().split()) for e in entries for c in e["contexts"]]
    usg = [len(e["usage"].lower().split()) for e in entries if e.get("usage", "").strip()]
    avg = lambda xs, n: sum(xs) / n if n else 0.0
    return {
        "words": len(words),
        "entries": len(entries),
        "tokens": def_tokens,
        "definition_length": def_tokens / len(entries) if entries else 0.0,
        "context_length": avg(ctx, len(ctx)),
        "usage_length": avg(usg, len(usg)),
    }


if __name__ == "__main__":
    for p in sys.argv[1:]:
        print(p, json.dumps(stats(p), sort_keys=True))
