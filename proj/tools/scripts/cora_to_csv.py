#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content, cora.cites) to the CSV layout
read by `gnnrisk` and the acceptance suite: features.csv, edges.csv, labels.csv.

Nodes keep the order of cora.content; class names are numbered alphabetically.
Self-citations and duplicate or reversed citation pairs collapse away.
"""

import argparse
import collections
import pathlib
import sys


def largest_component(n, edges):
    adj = collections.defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    best = []
    for s in range(n):
        if seen[s]:
            continue
        comp, queue = [], collections.deque([s])
        seen[s] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source", type=pathlib.Path, help="directory holding cora.content and cora.cites")
    ap.add_argument("out", type=pathlib.Path, help="output directory")
    ap.add_argument("--lcc", action="store_true", help="keep only the largest connected component")
    args = ap.parse_args()

    ids, rows, names = [], [], []
    for line in (args.source / "cora.content").read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        rows.append(parts[1:-1])
        names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = {name: c for c, name in enumerate(sorted(set(names)))}

    edges, skipped = set(), 0
    for line in (args.source / "cora.cites").read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        if parts[0] not in index or parts[1] not in index:
            skipped += 1
            continue
        u, v = index[parts[0]], index[parts[1]]
        if u != v:
            edges.add((min(u, v), max(u, v)))

    keep = list(range(len(ids)))
    if args.lcc:
        keep = largest_component(len(ids), edges)
    remap = {old: new for new, old in enumerate(keep)}
    edges = sorted((remap[u], remap[v]) for u, v in edges if u in remap and v in remap)

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "features.csv").write_text("".join(",".join(rows[i]) + "\n" for i in keep))
    (args.out / "labels.csv").write_text("".join(f"{classes[names[i]]}\n" for i in keep))
    (args.out / "edges.csv").write_text("".join(f"{u},{v}\n" for u, v in edges))
    print(f"nodes={len(keep)} edges={len(edges)} features={len(rows[0])} classes={len(classes)}"
          f" unknown_citations={skipped}", file=sys.stderr)


if __name__ == "__main__":
    main()
