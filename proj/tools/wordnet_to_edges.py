#!/usr/bin/env python3
"""Noun hypernym hierarchy from a Princeton WordNet 3.0 data.noun file.

Writes edges.tsv (child<TAB>parent) and lexicon.tsv (id<TAB>name) for the
hit CLI. Entity names are <first lemma>.n.<synset offset>.

Instance synsets (those with an instance-hypernym pointer and no ordinary
hypernym) are dropped together with their instance edges unless some ordinary
hypernym pointer targets them. Every other noun synset is an entity, and every
ordinary hypernym pointer from a kept synset to a noun is a direct edge.
"""

import argparse
import pathlib


def read_synsets(path):
    synsets = {}
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith("  "):  # license preamble
                continue
            fields = line.split(" | ", 1)[0].split()
            offset = fields[0]
            n_words = int(fields[3], 16)
            lemma = fields[4].lower()
            i = 4 + 2 * n_words
            n_ptrs = int(fields[i])
            i += 1
            ptrs = []
            for _ in range(n_ptrs):
                symbol, target, pos = fields[i:i + 3]
                ptrs.append((symbol, target, pos))
                i += 4
            synsets[offset] = (lemma, ptrs)
    return synsets


def build(synsets):
    def is_instance(ptrs):
        symbols = {s for s, _, _ in ptrs}
        return "@i" in symbols and "@" not in symbols

    kept = [o for o, (_, ptrs) in synsets.items() if not is_instance(ptrs)]
    kept_set = set(kept)
    edges = sorted({(o, t) for o in kept for s, t, pos in synsets[o][1] if s == "@" and pos == "n"})
    # An instance synset that is itself a hypernym target stays as an entity.
    targets = {t for _, t in edges if t not in kept_set}
    entities = sorted(kept_set | targets)
    return entities, edges


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data_noun", type=pathlib.Path, help="path to WordNet 3.0 data.noun")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/wordnet"))
    args = ap.parse_args()

    synsets = read_synsets(args.data_noun)
    entities, edges = build(synsets)
    name = {o: f"{synsets[o][0]}.n.{o}" for o in entities}

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "lexicon.tsv", "w", encoding="utf-8") as f:
        f.write("# id\tname\n")
        for i, o in enumerate(entities):
            f.write(f"{i}\t{name[o]}\n")
    with open(args.out / "edges.tsv", "w", encoding="utf-8") as f:
        f.write("# child\tparent\n")
        for c, p in edges:
            f.write(f"{name[c]}\t{name[p]}\n")
    print(f"{len(entities)} entities, {len(edges)} direct edges -> {args.out}")


if __name__ == "__main__":
    main()
