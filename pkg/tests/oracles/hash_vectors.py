"""Independent oracle for the frozen hash-tree vectors.

Uses hashlib only, never the package, so a bug in the library cannot leak
into its own expected values.  Run it to regenerate ``hash_vectors.json``.
"""

import hashlib
import json
from pathlib import Path


def sha(b):
    return hashlib.sha256(b).digest()


def leaf(b):
    return sha(b"\x00" + b)


def merkle(leaves):
    if not leaves:
        return sha(b"")
    level = [leaf(x) for x in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def stream(trees):
    h = None
    out = []
    for t in reversed(trees):
        h = sha(b"\x02" + t) if h is None else sha(b"\x02" + t + h)
        out.append(h)
    return list(reversed(out))


def main():
    t = [sha(bytes([i])) for i in range(7)]
    hs = stream(t)
    vectors = {
        "empty_root": merkle([]).hex(),
        "leaf_a": merkle([b"a"]).hex(),
        "abc_root": merkle([b"a", b"b", b"c"]).hex(),
        "trees": [x.hex() for x in t],
        "stream1_h0": stream(t[:1])[0].hex(),
        "stream2_h0": stream(t[:2])[0].hex(),
        "stream7": [x.hex() for x in hs],
    }
    path = Path(__file__).with_name("hash_vectors.json")
    path.write_text(json.dumps(vectors, indent=1, sort_keys=True) + "\n")
    print(json.dumps(vectors, indent=1))


if __name__ == "__main__":
    main()
