"""Independent recomputation of the golden evaluation reports.

Uses RDKit for graphs and canonical SMILES and re-implements BLEU, ROUGE,
Levenshtein and the three fingerprint families from their definitions.
Run from this directory: python3 metrics_oracle.py
"""
import json
import math
from collections import Counter

from rdkit import Chem

EPS = 0.1


def fnv(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) % (1 << 64)
    return h


def bond_code(b):
    if b.GetIsAromatic():
        return 4
    return {Chem.BondType.SINGLE: 1, Chem.BondType.DOUBLE: 2, Chem.BondType.TRIPLE: 3}[b.GetBondType()]


def morgan_bits(m, radius=2, width=2048):
    ids = []
    for a in m.GetAtoms():
        inv = [a.GetAtomicNum(), a.GetDegree(), a.GetTotalNumHs(), a.GetFormalCharge() & 0xFF,
               int(a.IsInRing()), int(a.GetIsAromatic()), a.GetIsotope() % 256]
        ids.append(fnv(bytes([0] + inv)))
    bits = {i % width for i in ids}
    for r in range(1, radius + 1):
        nxt = []
        for a in m.GetAtoms():
            env = sorted((bond_code(b), ids[b.GetOtherAtomIdx(a.GetIdx())]) for b in a.GetBonds())
            data = bytes([r]) + ids[a.GetIdx()].to_bytes(8, "little")
            for code, i in env:
                data += bytes([code]) + i.to_bytes(8, "little")
            nxt.append(fnv(data))
        ids = nxt
        bits |= {i % width for i in ids}
    return bits


def path_bits(m, max_len=7, width=2048):
    def sym(a):
        s = a.GetSymbol()
        return s.lower() if a.GetIsAromatic() else s

    ch = {1: "-", 2: "=", 3: "#", 4: ":"}
    labels = set()

    def walk(path, toks):
        last = m.GetAtomWithIdx(path[-1])
        for b in last.GetBonds():
            o = b.GetOtherAtomIdx(last.GetIdx())
            if o in path:
                continue
            t = toks + [ch[bond_code(b)], sym(m.GetAtomWithIdx(o))]
            labels.add(min("".join(t), "".join(reversed(t))))
            if len(path) <= max_len:
                walk(path + [o], t)

    for a in m.GetAtoms():
        walk([a.GetIdx()], [sym(a)])
    return {fnv(l.encode()) % width for l in labels}


def key_bits(m):
    atoms = list(m.GetAtoms())
    sym = [a.GetSymbol() for a in atoms]
    rings = [list(r) for r in Chem.GetSSSR(m)]
    sizes = [len(r) for r in rings]
    arom_rings = sum(all(atoms[i].GetIsAromatic() for i in r) for r in rings)

    def ring_bonds(r):
        return {frozenset((r[k], r[(k + 1) % len(r)])) for k in range(len(r))}

    rb = [ring_bonds(r) for r in rings]
    fused = any(sum(frozenset((b.GetBeginAtomIdx(), b.GetEndAtomIdx())) in s for s in rb) >= 2
                for b in m.GetBonds())

    def order(b):
        return bond_code(b)

    def nbrs(i):
        return [(b.GetOtherAtomIdx(i), order(b)) for b in atoms[i].GetBonds()]

    carbonyl = [i for i in range(len(atoms)) if sym[i] == "C" and any(sym[n] == "O" and o == 2 for n, o in nbrs(i))]
    acyl_o = [n for c in carbonyl for n, o in nbrs(c) if sym[n] == "O" and o == 1]
    carboxyl = any(atoms[o].GetDegree() == 1 and (atoms[o].GetTotalNumHs() == 1 or atoms[o].GetFormalCharge() == -1) for o in acyl_o)
    ester = any(any(x != c and sym[x] == "C" for x, _ in nbrs(o)) for c in carbonyl for o, bo in nbrs(c) if sym[o] == "O" and bo == 1)
    amide = any(sym[n] == "N" and o == 1 for c in carbonyl for n, o in nbrs(c))
    hydroxyl = any(sym[i] == "O" and atoms[i].GetTotalNumHs() == 1 and atoms[i].GetDegree() == 1 and i not in acyl_o
                   and sym[nbrs(i)[0][0]] == "C" for i in range(len(atoms)))
    amine = any(sym[i] == "N" and not atoms[i].GetIsAromatic() and atoms[i].GetTotalNumHs() == 2
                and atoms[i].GetDegree() == 1 and nbrs(i)[0][1] == 1 for i in range(len(atoms)))

    def has_bond(e1, e2, o):
        return any(order(b) == o and {b.GetBeginAtom().GetSymbol(), b.GetEndAtom().GetSymbol()} == {e1, e2}
                   if e1 != e2 else order(b) == o and b.GetBeginAtom().GetSymbol() == e1 == b.GetEndAtom().GetSymbol()
                   for b in m.GetBonds())

    chain_atoms = {i for i in range(len(atoms)) if sym[i] == "C" and not atoms[i].IsInRing()}
    best = 0
    for s in chain_atoms:
        # longest simple path from s inside the chain forest
        stack = [(s, {s})]
        while stack:
            v, seen = stack.pop()
            best = max(best, len(seen))
            for n, _ in nbrs(v):
                if n in chain_atoms and n not in seen:
                    stack.append((n, seen | {n}))
    halogens = sum(s in ("F", "Cl", "Br", "I") for s in sym)
    heavy = sum(s != "H" for s in sym)
    known = {"C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "H"}
    keys = [
        "C" in sym, "N" in sym, "O" in sym, "S" in sym, "P" in sym, "F" in sym, "Cl" in sym, "Br" in sym,
        "I" in sym, "B" in sym, any(s not in known for s in sym),
        3 in sizes, 4 in sizes, 5 in sizes, 6 in sizes, 7 in sizes, 8 in sizes, bool(sizes),
        arom_rings >= 1, arom_rings >= 2, arom_rings >= 3,
        any(a.IsInRing() and a.GetSymbol() not in ("C", "H") for a in atoms),
        any(a.GetIsAromatic() and a.GetSymbol() not in ("C", "H") for a in atoms),
        fused, halogens >= 1, halogens >= 2, halogens >= 3, len(carbonyl) >= 1, len(carbonyl) >= 2,
        carboxyl, ester, amide, hydroxyl, amine, has_bond("C", "N", 3),
        any(order(b) == 3 for b in m.GetBonds()), has_bond("C", "C", 2),
        best >= 2, best >= 4, best >= 6, best >= 8,
        any(a.GetFormalCharge() > 0 for a in atoms), any(a.GetFormalCharge() < 0 for a in atoms),
        len(Chem.GetMolFrags(m)) > 1, heavy >= 10, heavy >= 20, has_bond("S", "O", 2), has_bond("N", "O", 2),
    ]
    assert len(keys) == 48
    return {i for i, k in enumerate(keys) if k}


def tanimoto(a, b):
    u = len(a | b)
    return 1.0 if u == 0 else len(a & b) / u


def canon(s):
    m = Chem.MolFromSmiles(s)
    return None if m is None else Chem.MolToSmiles(m, isomericSmiles=False)


def ngrams(t, n):
    return Counter(tuple(t[i:i + n]) for i in range(len(t) - n + 1))


class Bleu:
    def __init__(self, max_n):
        self.m = [0] * max_n
        self.t = [0] * max_n
        self.c = 0
        self.r = 0

    def add(self, ref, hyp):
        for n in range(1, len(self.m) + 1):
            h, r = ngrams(hyp, n), ngrams(ref, n)
            self.m[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            self.t[n - 1] += max(len(hyp) - n + 1, 0)
        self.c += len(hyp)
        self.r += len(ref)

    def score(self):
        if self.c == 0:
            return 0.0
        orders = [i for i in range(len(self.t)) if self.t[i] > 0]
        lp = sum(math.log((self.m[i] or EPS) / self.t[i]) for i in orders) / len(orders)
        bp = 1.0 if self.c >= self.r else math.exp(1 - self.r / self.c)
        return bp * math.exp(lp)


def lev(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def words(text):
    out, w = [], ""
    for ch in text:
        if ch.isalnum():
            w += ch.lower()
            continue
        if w:
            out.append(w)
            w = ""
        if not ch.isspace():
            out.append(ch)
    if w:
        out.append(w)
    return out


def f1(o, h, r):
    if o == 0 or h == 0 or r == 0:
        return 0.0
    p, rc = o / h, o / r
    return 2 * p * rc / (p + rc)


def rouge(ref, hyp):
    def rn(n):
        h, r = ngrams(hyp, n), ngrams(ref, n)
        return f1(sum(min(c, r[g]) for g, c in h.items()), max(len(hyp) - n + 1, 0), max(len(ref) - n + 1, 0))

    L = [[0] * (len(hyp) + 1) for _ in range(len(ref) + 1)]
    for i in range(len(ref)):
        for j in range(len(hyp)):
            L[i + 1][j + 1] = L[i][j] + 1 if ref[i] == hyp[j] else max(L[i][j + 1], L[i + 1][j])
    return rn(1), rn(2), f1(L[len(ref)][len(hyp)], len(hyp), len(ref))


def load(p):
    return {r["id"]: r for r in map(json.loads, open(p)) if r}


def gen_summary(rows):
    n = len(rows)
    b = Bleu(4)
    for r in rows:
        b.add(list(r["ref"]), list(r["pred"]))
    mean = lambda k: sum(r[k] for r in rows) / n
    return {
        "em": mean("em"), "hit3": mean("hit3"), "bleu_char": b.score(), "levenshtein_mean": mean("lev"),
        "fts_rdk": mean("rdk"), "fts_maccs": mean("maccs"), "fts_morgan": mean("morgan"),
        "validity": mean("valid"), "valid_count": sum(r["valid"] for r in rows),
    }


def generation():
    preds, refs = load("gen_predictions.jsonl"), load("gen_references.jsonl")
    rows = []
    for i in sorted(refs):
        ref = refs[i]["text"]
        cands = preds[i]["candidates"]
        rm = Chem.MolFromSmiles(ref)
        pm = Chem.MolFromSmiles(cands[0])
        target = canon(ref)
        row = {
            "turn": refs[i]["turn"], "ref": ref, "pred": cands[0],
            "em": int(canon(cands[0]) == target), "hit3": int(any(canon(c) == target for c in cands[:3])),
            "valid": int(pm is not None), "lev": lev(cands[0], ref),
        }
        if pm is None:
            row.update(rdk=0.0, maccs=0.0, morgan=0.0)
        else:
            row.update(rdk=tanimoto(path_bits(pm), path_bits(rm)), maccs=tanimoto(key_bits(pm), key_bits(rm)),
                       morgan=tanimoto(morgan_bits(pm), morgan_bits(rm)))
        rows.append(row)
    turns = sorted({r["turn"] for r in rows})
    return {
        "task": "generation", "n": len(rows), "reference_invalid": 0, "text_metrics": None,
        "gen_metrics": gen_summary(rows),
        "per_turn": {str(t): gen_summary([r for r in rows if r["turn"] == t]) for t in turns},
    }


def understanding():
    preds, refs = load("und_predictions.jsonl"), load("und_references.jsonl")
    b2, b4, sums = Bleu(2), Bleu(4), [0.0, 0.0, 0.0]
    for i in sorted(refs):
        r, h = words(refs[i]["text"]), words(preds[i]["text"])
        b2.add(r, h)
        b4.add(r, h)
        for k, v in enumerate(rouge(r, h)):
            sums[k] += v
    n = len(refs)
    return {
        "task": "understanding", "n": n, "reference_invalid": 0,
        "text_metrics": {"bleu2": b2.score(), "bleu4": b4.score(), "rouge1": sums[0] / n, "rouge2": sums[1] / n,
                         "rougeL": sums[2] / n, "meteor": None},
        "gen_metrics": None, "per_turn": None,
    }


if __name__ == "__main__":
    with open("gen_golden.json", "w") as f:
        json.dump(generation(), f, indent=2)
        f.write("\n")
    with open("und_golden.json", "w") as f:
        json.dump(understanding(), f, indent=2)
        f.write("\n")
