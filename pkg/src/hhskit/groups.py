"""Finitely generated groups with normal-form oracles and Cayley balls.

Supported kinds are exactly the ones with classical normal forms: free
groups, free-abelian groups, right-angled Artin groups (shortlex via
commutation piling) and free products of these.  Words are tuples of signed
1-based generator indices; the text form is whitespace-separated labels
with a trailing apostrophe for inverses ("a b' a").
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (BudgetExceeded, EmptyIntersection, Inconclusive,
                     UnknownGenerator)
from .graph_core import MetricGraph, Subgraph

DEFAULT_BALL_CAP = 300_000
POSTMERGE_CAP = 2000


# ---------------------------------------------------------------------------
# words

def inverse_word(word):
    return tuple(-x for x in reversed(word))


def parse_word(text, gens):
    """Parse "a b' a" into a letter tuple; raises UnknownGenerator."""
    lookup = {g: i + 1 for i, g in enumerate(gens)}
    letters = []
    for token in text.split():
        inv = token.endswith("'")
        label = token[:-1] if inv else token
        if label not in lookup:
            raise UnknownGenerator(f"unknown generator {label!r}")
        letters.append(-lookup[label] if inv else lookup[label])
    return tuple(letters)


def format_word(word, gens):
    if not word:
        return "e"
    return " ".join(gens[abs(x) - 1] + ("'" if x < 0 else "") for x in word)


def shortlex_key(word):
    # letter order: g1 < g1' < g2 < g2' < ...
    return (len(word), tuple(2 * (abs(x) - 1) + (x < 0) for x in word))


class GroupModel:
    """A group given by kind + data, with a normal_form oracle.

    kind is one of "free", "free_abelian", "raag", "free_product".
    For raag, ``commuting`` holds unordered pairs of generator labels that
    commute.  For free_product, ``factors`` holds the factor models and the
    generator list is their concatenation (labels must be disjoint).
    """

    def __init__(self, kind, gens, commuting=(), factors=()):
        self.kind = kind
        self.gens = tuple(gens)
        if len(set(self.gens)) != len(self.gens):
            raise ValueError("generator labels must be distinct")
        self.commuting = frozenset(frozenset(p) for p in commuting)
        self.factors = tuple(factors)
        if kind == "raag":
            rank = len(self.gens)
            self._commutes = [[False] * (rank + 1) for _ in range(rank + 1)]
            for pair in self.commuting:
                a, b = sorted(pair)
                ia, ib = self.gens.index(a) + 1, self.gens.index(b) + 1
                self._commutes[ia][ib] = self._commutes[ib][ia] = True
        if kind == "free_product":
            self._factor_of = {}
            offset = 0
            for fi, f in enumerate(self.factors):
                for j in range(len(f.gens)):
                    self._factor_of[offset + j + 1] = (fi, j + 1)
                offset += len(f.gens)

    def __repr__(self):
        return f"GroupModel({self.kind}, gens={','.join(self.gens)})"

    def rank(self):
        return len(self.gens)

    def parse(self, text):
        return parse_word(text, self.gens)

    def format(self, word):
        return format_word(word, self.gens)

    def check_letters(self, word):
        for x in word:
            if not 1 <= abs(x) <= len(self.gens):
                raise UnknownGenerator(f"letter {x} outside declared generators")

    def normal_form(self, word):
        self.check_letters(word)
        if self.kind == "free":
            return _free_reduce(word)
        if self.kind == "free_abelian":
            return _abelian_normal_form(word, len(self.gens))
        if self.kind == "raag":
            return _raag_normal_form(word, len(self.gens), self._commutes)
        if self.kind == "free_product":
            return self._product_normal_form(word)
        raise ValueError(f"unknown kind {self.kind}")

    def multiply(self, w1, w2):
        return self.normal_form(w1 + w2)

    def _product_normal_form(self, word):
        syllables = []
        for x in word:
            fi, local = self._factor_of[abs(x)]
            letter = local if x > 0 else -local
            if syllables and syllables[-1][0] == fi:
                syllables[-1][1].append(letter)
            else:
                syllables.append([fi, [letter]])
        changed = True
        while changed:
            changed = False
            out = []
            for fi, letters in syllables:
                nf = self.factors[fi].normal_form(tuple(letters))
                if not nf:
                    changed = True
                    continue
                if out and out[-1][0] == fi:
                    out[-1][1].extend(nf)
                    changed = True
                else:
                    out.append([fi, list(nf)])
            syllables = out
        offset = [0]
        for f in self.factors:
            offset.append(offset[-1] + len(f.gens))
        flat = []
        for fi, letters in syllables:
            for x in letters:
                flat.append((abs(x) + offset[fi]) * (1 if x > 0 else -1))
        return tuple(flat)


def _free_reduce(word):
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def _abelian_normal_form(word, rank):
    exp = [0] * (rank + 1)
    for x in word:
        exp[abs(x)] += 1 if x > 0 else -1
    out = []
    for i in range(1, rank + 1):
        out.extend([i if exp[i] > 0 else -i] * abs(exp[i]))
    return tuple(out)


def _raag_normal_form(word, rank, commutes):
    # Piling: each letter stacks +-1 on its own pile and 0 on non-commuting
    # piles; a letter cancels when it meets its inverse on top of its pile.
    piles = [deque() for _ in range(rank + 1)]
    for x in word:
        i, eps = abs(x), (1 if x > 0 else -1)
        if piles[i] and piles[i][-1] == -eps:
            piles[i].pop()
            for j in range(1, rank + 1):
                if j != i and not commutes[i][j]:
                    piles[j].pop()
        else:
            piles[i].append(eps)
            for j in range(1, rank + 1):
                if j != i and not commutes[i][j]:
                    piles[j].append(0)
    # Depile smallest-available-first: the shortlex-least linearization.
    out = []
    while True:
        picked = False
        for i in range(1, rank + 1):
            if piles[i] and piles[i][0] != 0:
                eps = piles[i].popleft()
                out.append(i * eps)
                for j in range(1, rank + 1):
                    if j != i and not commutes[i][j]:
                        piles[j].popleft()
                picked = True
                break
        if not picked:
            break
    return tuple(out)


def free_group(labels):
    return GroupModel("free", labels)


def free_abelian_group(labels):
    return GroupModel("free_abelian", labels)


def raag_group(labels, commuting):
    return GroupModel("raag", labels, commuting=commuting)


def free_product(*factors):
    gens = []
    for f in factors:
        gens.extend(f.gens)
    return GroupModel("free_product", gens, factors=factors)


# ---------------------------------------------------------------------------
# subgroups

class SubgroupSpec:
    """A finitely generated subgroup, given by generating words."""

    def __init__(self, ambient, generators, label=None):
        self.ambient = ambient
        gens = []
        for w in generators:
            if isinstance(w, str):
                w = ambient.parse(w)
            gens.append(ambient.normal_form(tuple(w)))
        self.generators = tuple(g for g in gens if g)
        self.label = label or "H"
        self._automaton = None
        self._abelian_basis = None

    def __repr__(self):
        words = ", ".join(self.ambient.format(g) for g in self.generators) or "1"
        return f"SubgroupSpec({self.label} = <{words}>)"

    def generator_words_with_inverses(self):
        out = []
        for g in self.generators:
            out.append(g)
            out.append(inverse_word(g))
        return out


def _fold_automaton(gen_words):
    """Stallings-folded subgroup graph of a free group.

    States are ints, transitions state x letter -> state; state 0 is the
    base point.  Folding merges states until transitions are deterministic.
    """
    parent = [0]

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    trans = [dict()]

    def new_state():
        parent.append(len(parent))
        trans.append(dict())
        return len(parent) - 1

    parent[0] = 0
    for w in gen_words:
        s = 0
        for i, x in enumerate(w):
            t = 0 if i == len(w) - 1 else new_state()
            trans[s].setdefault(x, set()).add(t)
            trans[t].setdefault(-x, set()).add(s)
            s = t

    changed = True
    while changed:
        changed = False
        for s in range(len(parent)):
            if find(s) != s:
                continue
            for letter, targets in list(trans[s].items()):
                roots = {find(t) for t in targets}
                if len(roots) > 1:
                    it = iter(sorted(roots))
                    keep = next(it)
                    for other in it:
                        # merge other into keep
                        parent[other] = keep
                        for l2, t2 in trans[other].items():
                            trans[keep].setdefault(l2, set()).update(t2)
                        trans[other] = dict()
                    changed = True
                trans[s][letter] = {find(t) for t in trans[s][letter]}

    # normalize to deterministic maps on root states
    det = {}
    for s in range(len(parent)):
        if find(s) != s:
            continue
        det[s] = {}
        for letter, targets in trans[s].items():
            roots = {find(t) for t in targets}
            assert len(roots) <= 1
            if roots:
                det[s][letter] = next(iter(roots))
    return det, find(0)


def _automaton_accepts(det, root, word):
    s = root
    for x in word:
        s = det[s].get(x)
        if s is None:
            return False
    return s == root


def _integer_basis(vectors):
    """Row-style echelon basis of the lattice spanned by integer vectors."""
    basis = [np.array(v, dtype=np.int64) for v in vectors if any(v)]
    changed = True
    while changed:
        changed = False
        basis = [b for b in basis if b.any()]
        basis.sort(key=lambda b: (np.flatnonzero(b)[0], abs(b[np.flatnonzero(b)[0]])))
        for i in range(len(basis) - 1):
            p_i = np.flatnonzero(basis[i])[0]
            for j in range(i + 1, len(basis)):
                if basis[j].any() and np.flatnonzero(basis[j])[0] == p_i:
                    q = basis[j][p_i] // basis[i][p_i]
                    basis[j] = basis[j] - q * basis[i]
                    changed = True
    return [b for b in basis if b.any()]


def _lattice_contains(basis, target):
    t = np.array(target, dtype=np.int64)
    for b in basis:
        p = np.flatnonzero(b)[0]
        if t[p] != 0:
            if t[p] % b[p] != 0:
                return False
            t = t - (t[p] // b[p]) * b
    return not t.any()


def _abelianize(word, rank):
    v = [0] * rank
    for x in word:
        v[abs(x) - 1] += 1 if x > 0 else -1
    return tuple(v)


def subgroup_membership(model, sub, word, budget=200_000):
    """Decide word in sub; exact for free and free-abelian ambients.

    Other kinds fall back to enumerating subgroup elements by word length
    and raise Inconclusive when the element is not found but the
    enumeration had to be cut off.
    """
    word = model.normal_form(tuple(word))
    if not word:
        return True
    if not sub.generators:
        return False
    if model.kind == "free":
        if sub._automaton is None:
            sub._automaton = _fold_automaton(sub.generators)
        det, root = sub._automaton
        return _automaton_accepts(det, root, word)
    if model.kind == "free_abelian":
        if sub._abelian_basis is None:
            sub._abelian_basis = _integer_basis(
                [_abelianize(g, model.rank()) for g in sub.generators])
        return _lattice_contains(sub._abelian_basis, _abelianize(word, model.rank()))

    # radius-limited fallback: breadth-first closure over subgroup generators
    length_cap = len(word) + 4
    seen = {(): None}
    frontier = [()]
    truncated = False
    while frontier:
        nxt = []
        for w in frontier:
            for g in sub.generator_words_with_inverses():
                prod = model.multiply(w, g)
                if prod in seen:
                    continue
                if len(prod) > length_cap:
                    truncated = True
                    continue
                if prod == word:
                    return True
                seen[prod] = None
                nxt.append(prod)
                if len(seen) > budget:
                    raise Inconclusive(
                        f"membership fallback hit budget {budget}")
        frontier = nxt
    if truncated:
        raise Inconclusive("membership fallback truncated by length cap")
    return False


# ---------------------------------------------------------------------------
# Cayley balls

class BallGraph:
    """The radius-r ball of a Cayley graph, with the word<->vertex bijection.

    Vertex ids are assigned in shortlex order (layer by layer), so numeric
    order on ids is shortlex order on normal forms.
    """

    def __init__(self, graph, radius, gens, words, model):
        self.graph = graph
        self.radius = radius
        self.gens = tuple(gens)
        self.words = tuple(words)
        self.model = model
        self.index = {w: i for i, w in enumerate(self.words)}

    def __repr__(self):
        return (f"BallGraph({self.model.kind}, r={self.radius}, "
                f"{self.graph.n} vertices)")

    def word_of(self, v):
        return self.words[v]

    def id_of(self, word):
        return self.index[self.model.normal_form(tuple(word))]

    def id_of_text(self, text):
        return self.id_of(self.model.parse(text))

    def contains_word(self, word):
        return self.model.normal_form(tuple(word)) in self.index


def cayley_ball(model, radius, gens=None, cap=DEFAULT_BALL_CAP):
    """Breadth-first Cayley ball over the given generator labels."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    labels = tuple(gens) if gens is not None else model.gens
    letters = []
    for lab in labels:
        if lab not in model.gens:
            raise UnknownGenerator(f"generator {lab!r} not declared by the model")
        idx = model.gens.index(lab) + 1
        letters.extend([idx, -idx])

    words = [()]
    seen = {(): 0}
    layer = [()]
    for _ in range(radius):
        nxt = []
        for w in layer:
            for s in letters:
                w2 = model.normal_form(w + (s,))
                if w2 not in seen:
                    seen[w2] = -1
                    nxt.append(w2)
        nxt.sort(key=shortlex_key)
        for w2 in nxt:
            seen[w2] = len(words)
            words.append(w2)
            if len(words) > cap:
                raise BudgetExceeded(f"ball exceeded vertex cap {cap}")
        layer = nxt

    edges = set()
    for w, i in seen.items():
        for s in letters:
            w2 = model.normal_form(w + (s,))
            j = seen.get(w2)
            if j is not None and j != i:
                edges.add((i, j) if i < j else (j, i))
    labels_text = [format_word(w, model.gens) for w in words]
    graph = MetricGraph(len(words), sorted(edges), labels_text)
    return BallGraph(graph, radius, labels, words, model)


# ---------------------------------------------------------------------------
# cosets

@dataclass(frozen=True)
class CosetDescriptor:
    """A left coset of a subgroup, named by its minimal representative."""

    subgroup: SubgroupSpec
    representative: tuple

    def label(self):
        return (f"{self.subgroup.label}-coset"
                f"[{self.subgroup.ambient.format(self.representative)}]")

    def same_coset(self, other, budget=200_000):
        if self.subgroup is not other.subgroup:
            return False
        diff = self.subgroup.ambient.multiply(
            inverse_word(self.representative), other.representative)
        return subgroup_membership(self.subgroup.ambient, self.subgroup,
                                   diff, budget)


def _walk_classes(ball, sub):
    """Union-find classes of ball vertices under right mult by sub generators.

    Also reports whether any step left the ball (truncation)."""
    n = ball.graph.n
    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    truncated = False
    gen_words = sub.generator_words_with_inverses()
    for v in range(n):
        w = ball.words[v]
        for g in gen_words:
            w2 = ball.model.multiply(w, g)
            j = ball.index.get(w2)
            if j is None:
                truncated = True
                continue
            ri, rj = find(v), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    classes = {}
    for v in range(n):
        classes.setdefault(find(v), []).append(v)
    return classes, truncated


def enumerate_cosets(ball, sub, budget=200_000):
    """Coset descriptors partitioning the ball, minimal reps, shortlex order.

    Walk components are merged across ball-exit gaps by a membership check
    (bucketed by abelianization); single-generator subgroups have connected
    walks, so the merge pass is skipped for them.
    """
    classes, _ = _walk_classes(ball, sub)
    reps = sorted(classes)
    if len(sub.generators) > 1 and len(reps) > 1:
        if len(reps) > POSTMERGE_CAP:
            raise BudgetExceeded(
                f"{len(reps)} walk components exceed merge cap {POSTMERGE_CAP}")
        rank = ball.model.rank()
        basis = _integer_basis([_abelianize(g, rank) for g in sub.generators])
        buckets = {}
        for r in reps:
            vec = np.array(_abelianize(ball.words[r], rank), dtype=np.int64)
            for b in basis:
                p = np.flatnonzero(b)[0]
                vec = vec - (vec[p] // b[p]) * b
            buckets.setdefault(tuple(int(x) for x in vec), []).append(r)
        merged = {r: r for r in reps}

        def mfind(r):
            while merged[r] != r:
                merged[r] = merged[merged[r]]
                r = merged[r]
            return r

        for bucket in buckets.values():
            for i in range(len(bucket)):
                for j in range(i + 1, len(bucket)):
                    ri, rj = mfind(bucket[i]), mfind(bucket[j])
                    if ri == rj:
                        continue
                    diff = ball.model.multiply(
                        inverse_word(ball.words[ri]), ball.words[rj])
                    if subgroup_membership(ball.model, sub, diff, budget):
                        merged[max(ri, rj)] = min(ri, rj)
        final = {}
        for r in reps:
            final.setdefault(mfind(r), []).extend(classes[r])
        classes = final
    return [CosetDescriptor(sub, ball.words[r]) for r in sorted(classes)]


def coset_vertices(ball, descriptor):
    """Ball vertices of the coset, by generator walking from the rep.

    Returns (vertex list, truncated flag)."""
    if descriptor.representative not in ball.index:
        raise EmptyIntersection("representative outside the ball")
    start = ball.index[descriptor.representative]
    seen = {start}
    stack = [start]
    truncated = False
    gen_words = descriptor.subgroup.generator_words_with_inverses()
    while stack:
        v = stack.pop()
        w = ball.words[v]
        for g in gen_words:
            w2 = ball.model.multiply(w, g)
            j = ball.index.get(w2)
            if j is None:
                truncated = True
            elif j not in seen:
                seen.add(j)
                stack.append(j)
    return sorted(seen), truncated


def coset_subgraph(ball, descriptor):
    """The coset as a connected Subgraph of the ball.

    Cosets of generators that are not single letters (say <ab>) induce no
    edges; those are completed with geodesics between consecutive
    components and flagged 'hull-completed'.
    """
    verts, truncated = coset_vertices(ball, descriptor)
    flags = ["truncated"] if truncated else []
    try:
        return Subgraph(ball.graph, verts, label=descriptor.label(),
                        flags=flags)
    except ValueError:
        pass
    vset = set(verts)
    comps = []
    unseen = set(verts)
    while unseen:
        root = min(unseen)
        comp = {root}
        stack = [root]
        while stack:
            w = stack.pop()
            for nb in ball.graph.neighbors(w):
                nb = int(nb)
                if nb in vset and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
        unseen -= comp
    oracle = ball.graph.oracle()
    filled = set(verts)
    for comp in comps[1:]:
        filled.update(oracle.geodesic(comps[0][0], comp[0]))
    flags.append("hull-completed")
    return Subgraph(ball.graph, sorted(filled), label=descriptor.label(),
                    flags=flags)
