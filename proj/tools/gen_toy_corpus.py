#!/usr/bin/env python3
"""Writes the synthetic toy corpus: fully atom-mapped reactions from eight
reaction families, every atom bracketed with explicit H.

usage: gen_toy_corpus.py [outdir] [--seed N]
"""

import argparse
import os
import random

VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "Cl": 1, "Br": 1, "B": 3, "F": 1}
AROMATIC_VALENCE = {"c": 3, "n": 2}


class Graph:
    def __init__(self):
        self.atoms = []  # dicts: el, h, arom, map
        self.bonds = []  # (a, b, order); order 1, 2, 3 or 4 (aromatic)

    def add(self, el, h=0, arom=False):
        self.atoms.append({"el": el, "h": h, "arom": arom, "map": None})
        return len(self.atoms) - 1

    def bond(self, a, b, order=1):
        self.bonds.append((a, b, order))

    def neighbors(self, v):
        for a, b, o in self.bonds:
            if a == v:
                yield b, o
            elif b == v:
                yield a, o


def fragment(g, text):
    """Adds a fragment written in a tiny SMILES subset (organic atoms,
    branches, ring digits, '=' and '#'). The first atom is the attachment
    point and gets one H fewer. Returns its index."""
    stack, prev, order, rings, first = [], None, 1, {}, None
    explicit = False
    added = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            stack.append(prev)
        elif ch == ")":
            prev = stack.pop()
        elif ch == "-":
            explicit = True
        elif ch == "=":
            order = 2
        elif ch == "#":
            order = 3
        elif ch.isdigit():
            if ch in rings:
                other, o = rings.pop(ch)
                g.bond(other, prev, 4 if g.atoms[other]["arom"] and g.atoms[prev]["arom"] else max(o, order))
            else:
                rings[ch] = (prev, order)
            order = 1
        else:
            sym = text[i : i + 2] if text[i : i + 2] in ("Cl", "Br") else ch
            i += len(sym) - 1
            arom = sym in ("c", "n")
            v = g.add(sym.upper() if arom else sym, 0, arom)
            added.append(v)
            if prev is not None:
                aromatic = arom and g.atoms[prev]["arom"] and order == 1 and not explicit
                g.bond(prev, v, 4 if aromatic else order)
            if first is None:
                first = v
            prev, order, explicit = v, 1, False
        i += 1
    for v in added:
        a = g.atoms[v]
        used = sum(1 if o == 4 else o for _, o in g.neighbors(v))
        cap = AROMATIC_VALENCE[a["el"].lower()] if a["arom"] else VALENCE[a["el"]]
        a["h"] = max(0, cap - used - (1 if v == first else 0))
    return first


def atom_text(a, with_map=True):
    sym = a["el"].lower() if a["arom"] else a["el"]
    h = "" if a["h"] == 0 else ("H" if a["h"] == 1 else "H%d" % a["h"])
    m = ":%d" % a["map"] if with_map and a["map"] is not None else ""
    return "[%s%s%s]" % (sym, h, m)


def write(g, atoms):
    """Line notation of the subgraph induced by `atoms` (one component)."""
    atoms = list(atoms)
    inside = set(atoms)
    adj = {v: [] for v in atoms}
    for a, b, o in g.bonds:
        if a in inside and b in inside:
            adj[a].append((b, o))
            adj[b].append((a, o))

    def sym(a, b, o):
        if o == 4:
            return ""
        if o == 1:
            return "-" if g.atoms[a]["arom"] and g.atoms[b]["arom"] else ""
        return {2: "=", 3: "#"}[o]

    seen, tree = set(), set()

    def dfs(v):
        seen.add(v)
        for u, _ in adj[v]:
            if u not in seen:
                tree.add(frozenset((u, v)))
                dfs(u)

    dfs(atoms[0])
    if len(seen) != len(inside):
        raise ValueError("disconnected molecule")
    closures = {}
    counter = [1]
    for a, b, o in g.bonds:
        if a in inside and b in inside and frozenset((a, b)) not in tree:
            d = counter[0]
            counter[0] += 1
            closures.setdefault(a, []).append((d, sym(a, b, o)))
            closures.setdefault(b, []).append((d, ""))
    visited = set()

    def emit(v):
        visited.add(v)
        s = atom_text(g.atoms[v])
        for d, bs in closures.get(v, []):
            s += bs + str(d)
        kids = [(u, o) for u, o in adj[v] if u not in visited and frozenset((u, v)) in tree]
        for k, (u, o) in enumerate(kids):
            if u in visited:
                continue
            part = sym(v, u, o) + emit(u)
            s += part if k == len(kids) - 1 else "(" + part + ")"
        return s

    return emit(atoms[0])


def components(g, atoms):
    atoms = set(atoms)
    left, comps = set(atoms), []
    while left:
        start = min(left)
        comp, todo = [], [start]
        left.discard(start)
        while todo:
            v = todo.pop()
            comp.append(v)
            for u, _ in g.neighbors(v):
                if u in left:
                    left.discard(u)
                    todo.append(u)
        comps.append(sorted(comp))
    return comps


class Reaction:
    """Product graph P plus a reactant graph R sharing atom indices for the
    mapped atoms; leaving atoms exist only in R."""

    def __init__(self):
        self.g = Graph()  # reactant side
        self.product_atoms = set()
        self.product_bonds = []
        self.product_h = {}

    def text(self):
        g = self.g
        mapped = sorted(self.product_atoms)
        for k, v in enumerate(mapped):
            g.atoms[v]["map"] = k + 1
        reactants = [write(g, c) for c in components(g, range(len(g.atoms)))]
        pg = Graph()
        pg.atoms = [dict(a) for a in g.atoms]
        for v, h in self.product_h.items():
            pg.atoms[v]["h"] = h
        pg.bonds = self.product_bonds
        product = write(pg, mapped)
        return ".".join(reactants) + ">>" + product


# Classes in decreasing priority. A product only carries decoy groups from
# classes below its own, so the true disconnection is always the
# highest-priority center that matches.
PRIORITY = [1, 7, 2, 3, 4, 5, 6]

# Fluorine appears only in the amines of the acyl chloride route.
PLAIN_ALKYL = ["C", "CC", "CCC", "CC(C)C", "CCCC", "CCCl", "CCC#N", "CCSC"]
PLAIN_ARYL = ["c1ccccc1", "c1ccc(Cl)cc1", "c1ccncc1", "c1ccc(C)cc1", "c1cccc(C)c1"]
FLUORO_ALKYL = ["CC(F)(F)F", "CCF", "CCC(F)F", "CC1CC1(F)F"]

# Chain pieces (inserted between carbons) and aryl substituents that the
# templates of each class match.
ALKYL_DECOY = {2: "C(=O)OC", 4: "C(N)", 5: "C(O)"}
ARYL_DECOY = {2: "C(=O)OC", 3: "OCC", 4: "N", 5: "C(O)C", 6: "NCC", 7: "-c2ccccc2"}


def below(cls):
    return PRIORITY[PRIORITY.index(cls) + 1 :]


def alkyl(rng, cls):
    allowed = [c for c in below(cls) if c in ALKYL_DECOY]
    if not allowed or rng.random() < 0.05:
        return rng.choice(PLAIN_ALKYL)
    picks = rng.sample(allowed, min(len(allowed), rng.choice([2, 3])))
    return "CC" + "".join(ALKYL_DECOY[c] + "C" for c in picks)


def aryl(rng, cls):
    allowed = [c for c in below(cls) if c in ARYL_DECOY]
    if not allowed or rng.random() < 0.05:
        return rng.choice(PLAIN_ARYL)
    picks = [ARYL_DECOY[c] for c in rng.sample(allowed, min(len(allowed), rng.choice([2, 3])))]
    if len(picks) == 1:
        return "c1ccc(%s)cc1" % tuple(picks)
    if len(picks) == 2:
        return "c1cc(%s)cc(%s)c1" % tuple(picks)
    return "c1cc(%s)cc(%s)c1%s" % tuple(picks)


def either(rng, cls):
    return aryl(rng, cls) if rng.random() < 0.5 else alkyl(rng, cls)


def has(frag, chars):
    return any(c in frag for c in chars)


def make(family, r1, r2):
    """Returns (reaction text, class). r1 and r2 are fragment strings."""
    rx = Reaction()
    g = rx.g
    pb = []  # product bonds added on top of the shared ones
    lost = set()  # reactant bonds absent from the product
    if family in ("amide_acid", "amide_chloride", "ester"):
        a = fragment(g, r1)
        c = g.add("C")
        o = g.add("O")
        g.bond(a, c)
        g.bond(c, o, 2)
        x = g.add("Cl" if family == "amide_chloride" else "O", 0 if family == "amide_chloride" else 1)
        g.bond(c, x)
        lost.add((c, x))
        if family == "ester":
            n = g.add("O", 1)
        else:
            n = g.add("N", 2)
        b = fragment(g, r2)
        g.bond(n, b)
        pb.append((c, n, 1))
        rx.product_atoms = set(range(len(g.atoms))) - {x}
        rx.product_h[n] = g.atoms[n]["h"] - 1
        cls = 2 if family == "ester" else 1
    elif family == "ether":
        a = fragment(g, r1)
        o = g.add("O", 1)
        g.bond(a, o)
        ch2 = g.add("C", 2)
        br = g.add("Br")
        g.bond(ch2, br)
        lost.add((ch2, br))
        b = fragment(g, r2)
        g.bond(ch2, b)
        pb.append((o, ch2, 1))
        rx.product_atoms = set(range(len(g.atoms))) - {br}
        rx.product_h[o] = 0
        cls = 3
    elif family in ("alkylation", "reductive_amination"):
        a = fragment(g, r1)
        n = g.add("N", 2)
        g.bond(a, n)
        b = fragment(g, r2)
        if family == "alkylation":
            ch = g.add("C", 2)
            x = g.add("Br")
            g.bond(ch, x)
        else:
            ch = g.add("C", 1)
            x = g.add("O")
            g.bond(ch, x, 2)
            rx.product_h[ch] = 2
        lost.add((ch, x))
        g.bond(ch, b)
        pb.append((n, ch, 1))
        rx.product_atoms = set(range(len(g.atoms))) - {x}
        rx.product_h[n] = 1
        cls = 6
    elif family == "boc":
        a = fragment(g, r1)
        n = g.add("N", 1)
        g.bond(a, n)
        boc = fragment(g, "C(=O)OC(C)(C)C")
        g.bond(n, boc)
        lost.add((n, boc))
        rx.product_atoms = set(range(n + 1))
        rx.product_h[n] = 2
        cls = 4
    elif family == "reduction":
        a = fragment(g, r1)
        c = g.add("C")
        o = g.add("O")
        g.bond(a, c)
        g.bond(c, o, 2)
        b = fragment(g, r2)
        g.bond(c, b)
        lost.add((c, o))
        pb.append((c, o, 1))
        rx.product_atoms = set(range(len(g.atoms)))
        rx.product_h[c] = 1
        rx.product_h[o] = 1
        cls = 5
    elif family == "suzuki":
        a = fragment(g, r1)
        br = g.add("Br")
        g.bond(a, br)
        b = fragment(g, r2)
        bo = g.add("B")
        g.bond(b, bo)
        o1 = g.add("O", 1)
        o2 = g.add("O", 1)
        g.bond(bo, o1)
        g.bond(bo, o2)
        lost |= {(a, br), (b, bo)}
        pb.append((a, b, 1))
        rx.product_atoms = set(range(len(g.atoms))) - {br, bo, o1, o2}
        cls = 7
    else:
        raise ValueError(family)
    rx.product_bonds = [(x, y, o) for x, y, o in g.bonds if (x, y) not in lost and x in rx.product_atoms and y in rx.product_atoms] + pb
    return rx.text(), cls


def sample(rng, family):
    if family == "amide":
        # The acyl chloride route is used for fluorinated amines.
        if rng.random() < 0.5:
            return make("amide_chloride", either(rng, 1), rng.choice(FLUORO_ALKYL))
        return make("amide_acid", either(rng, 1), alkyl(rng, 1))
    if family == "ester":
        return make(family, either(rng, 2), alkyl(rng, 2))
    if family == "ether":
        return make(family, aryl(rng, 3), alkyl(rng, 3))
    if family == "amine":
        # Reductive amination when the aldehyde carries a heteroatom, else
        # bromide alkylation.
        r1 = rng.choice(["c1ccccc1", "c1ccc(C)cc1", "c1cccc(C)c1", "c1ccncc1"])
        if rng.random() < 0.5:
            return make("reductive_amination", r1, rng.choice(["CC#N", "CCCl", "CCSC", "CCOC"]))
        return make("alkylation", r1, rng.choice(["C", "CC", "CCC", "CCCC", "CC(C)C"]))
    if family == "boc":
        return make(family, either(rng, 4), None)
    if family == "reduction":
        return make(family, either(rng, 5), alkyl(rng, 5))
    if family == "suzuki":
        return make(family, aryl(rng, 7), rng.choice(["c1ccccc1", "c1ccc(C)cc1"]))
    raise ValueError(family)


FAMILIES = ["amide", "suzuki", "ester", "ether", "amide", "boc", "ester", "reduction", "suzuki", "amide",
            "ether", "amine"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", nargs="?", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--train", type=int, default=50)
    ap.add_argument("--val", type=int, default=10)
    ap.add_argument("--test", type=int, default=20)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    seen = set()
    rows = []
    while len(rows) < args.train + args.val + args.test:
        family = FAMILIES[len(rows) % len(FAMILIES)] if len(rows) < args.train else rng.choice(FAMILIES)
        text, cls = sample(rng, family)
        if text in seen:
            continue
        seen.add(text)
        rows.append((text, cls))
    os.makedirs(args.outdir, exist_ok=True)
    splits = [("train", rows[: args.train]), ("val", rows[args.train : args.train + args.val]),
              ("test", rows[args.train + args.val :])]
    for name, part in splits:
        with open(os.path.join(args.outdir, "toy_%s.tsv" % name), "w") as f:
            f.write("# record_id\treaction\tclass\n")
            for k, (text, cls) in enumerate(part):
                f.write("%s_%03d\t%s\t%d\n" % (name, k + 1, text, cls))
    with open(os.path.join(args.outdir, "toy.cfg"), "w") as f:
        f.write(CONFIG)


CONFIG = """# toy corpus run
train = toy_train.tsv
val = toy_val.tsv
test = toy_test.tsv
templates = toy.templates
model = toy.model
radius = 1
dim = 32
layers = 2
activation = relu
pooling = mean
seed = 1
estimator = exact
optimizer = adam
learning_rate = 0.005
batch_size = 10
max_epochs = 200
max_updates = 100000
eval_every = 20
beam = 50
"""


if __name__ == "__main__":
    main()
