"""Configuration search: find placements and wirings satisfying a goal.

The search runs in two phases. Placement assigns each host a small multiset
of instances within bounds; wiring then decides, for every candidate channel,
whether it is present. Candidate channels are the instantiations of the
`connectsto` patterns appearing in the selected constraintset (typed port
pairs, oriented as written). Both phases prune with a three-valued partial
evaluation of the constraints: a clause that is already false under every
completion of the current partial wiring cuts the branch.

Determinism: hosts and types are tried in declaration order (per host: empty
first, then single instances of earlier-declared types, and so on); candidate
channels are tried in canonical (src, dst) order with channels present in
opts.prior tried include-first so surviving structure is retained on
re-solves. Symmetry is broken by dense instance ordinals and by assigning
variadic port indices canonically (sorted by peer), so no two search leaves
materialize the same configuration.

enumerate_all is the independent oracle: exhaustive generate-and-test over
the same bounded space using only evaluator.check.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace

from . import evaluator
from .lang import (And, Compare, ConnectsTo, ConstraintSet, DeladasError,
                   HOST_SORT, InstancesOf, IntLiteral, Or, Quantified,
                   Reachable, SpecDocument, ValidationError, Var)
from .model import (Binding, Channel, Configuration, Instance, InstanceId,
                    PortSlot, binding_sort_key, validate)


class UnknownConstraintSet(DeladasError):
    pass


class BoundsError(DeladasError):
    pass


class SpaceTooLarge(DeladasError):
    pass


class NoSolution(DeladasError):
    """Even with every pin removed the bounded problem is unsatisfiable."""


@dataclass(frozen=True)
class SolveOptions:
    max_instances_per_host: int = 1
    max_total_instances: int | None = None  # default: hosts * per-host bound
    solution_limit: int = 1
    pins: tuple[Binding, ...] = ()
    channel_budget: int | None = None  # default: instances**2 per placement
    prior: Configuration | None = None  # channel preference only
    node_budget: int | None = None


@dataclass(frozen=True)
class SolveStats:
    nodes: int
    seconds: float


@dataclass(frozen=True)
class SolveOutcome:
    """Search result. exhausted is conservative: stopping at the solution
    limit or the node budget reports the space as not fully explored."""

    solutions: tuple[Configuration, ...]
    exhausted: bool
    stats: SolveStats


# Oracle guards: refuse exhaustive enumeration beyond these.
ORACLE_MAX_HOSTS_TIMES_TYPES = 12
ORACLE_MAX_CANDIDATES = 24


@dataclass(frozen=True)
class _Edge:
    """A candidate channel at port-family level (indices assigned later)."""

    src: InstanceId
    src_port: str
    dst: InstanceId
    dst_port: str

    def key(self):
        return (str(self.src), self.src_port, str(self.dst), self.dst_port)


def _check_options(doc: SpecDocument, opts: SolveOptions) -> SolveOptions:
    if opts.max_instances_per_host < 1:
        raise BoundsError("max_instances_per_host must be >= 1")
    if opts.solution_limit < 1:
        raise BoundsError("solution_limit must be >= 1")
    total = opts.max_total_instances
    if total is None:
        total = len(doc.hosts) * opts.max_instances_per_host
    if total < 1 and doc.hosts:
        raise BoundsError("max_total_instances must be >= 1")
    if opts.channel_budget is not None and opts.channel_budget < 0:
        raise BoundsError("channel_budget must be >= 0")
    host_names = {h.name for h in doc.hosts}
    type_names = {c.name for c in doc.components}
    for pin in opts.pins:
        if pin.host not in host_names:
            raise ValidationError(f"pin {pin}: unknown host {pin.host}")
        if pin.type not in type_names:
            raise ValidationError(f"pin {pin}: unknown type {pin.type}")
        if pin.count < 1:
            raise ValidationError(f"pin {pin}: count must be >= 1")
    return replace(opts, max_total_instances=total)


def connect_patterns(cs: ConstraintSet) -> list[tuple[str, str, str, str]]:
    """Typed (src type, src port, dst type, dst port) patterns from the
    constraintset's connectsto leaves, in first-appearance order."""
    seen: list[tuple[str, str, str, str]] = []

    def walk(expr, env: dict[str, str]):
        if isinstance(expr, Quantified):
            inner = dict(env)
            for b in expr.binders:
                inner[b.var] = b.sort
            walk(expr.body, inner)
        elif isinstance(expr, (And, Or)):
            for item in expr.items:
                walk(item, env)
        elif isinstance(expr, ConnectsTo):
            pat = (env.get(expr.src.var, ""), expr.src.port,
                   env.get(expr.dst.var, ""), expr.dst.port)
            if pat not in seen:
                seen.append(pat)

    for constraint in cs.constraints:
        walk(constraint, {})
    return seen


class _Budget(Exception):
    pass


class _Placement:
    """One complete placement plus caches the wiring phase needs."""

    def __init__(self, doc: SpecDocument, counts: dict[tuple[str, str], int]):
        self.counts = counts
        instances: list[Instance] = []
        for h in doc.hosts:
            for c in doc.components:
                for ordinal in range(counts.get((h.name, c.name), 0)):
                    instances.append(Instance(InstanceId(c.name, h.name, ordinal),
                                              c.name))
        self.instances = instances
        self.by_type: dict[str, list[InstanceId]] = {}
        for inst in instances:
            self.by_type.setdefault(inst.type, []).append(inst.id)
        self.hosts = [h.name for h in doc.hosts]

    def count_on(self, host: str, type_name: str) -> int:
        return self.counts.get((host, type_name), 0)


def _candidate_edges(placement: _Placement,
                     patterns: list[tuple[str, str, str, str]]) -> list[_Edge]:
    edges: set[_Edge] = set()
    for tsrc, psrc, tdst, pdst in patterns:
        for u in placement.by_type.get(tsrc, ()):
            for v in placement.by_type.get(tdst, ()):
                if u != v:
                    edges.add(_Edge(u, psrc, v, pdst))
    return sorted(edges, key=_Edge.key)


class _PartialEval:
    """Three-valued constraint evaluation over a partial wiring.

    Edges split into definitely-in and still-possible; every predicate is
    monotone in the edge set, so False here means false in all completions.
    """

    def __init__(self, placement: _Placement, cs: ConstraintSet):
        self.placement = placement
        self.cs = cs
        self.fam_in: set[tuple[InstanceId, str, InstanceId, str]] = set()
        self.fam_maybe: set[tuple[InstanceId, str, InstanceId, str]] = set()
        self.adj_in: dict[InstanceId, set[InstanceId]] = {}
        self.adj_maybe: dict[InstanceId, set[InstanceId]] = {}
        self.neigh_in: dict[InstanceId, set[InstanceId]] = {}
        self.neigh_maybe: dict[InstanceId, set[InstanceId]] = {}

    def load(self, candidates: list[_Edge], status: list[int]) -> None:
        self.fam_in.clear()
        self.fam_maybe.clear()
        self.adj_in.clear()
        self.adj_maybe.clear()
        self.neigh_in.clear()
        self.neigh_maybe.clear()
        for edge, st in zip(candidates, status):
            if st == -1:
                continue
            fam = (edge.src, edge.src_port, edge.dst, edge.dst_port)
            self.fam_maybe.add(fam)
            self.adj_maybe.setdefault(edge.src, set()).add(edge.dst)
            self.neigh_maybe.setdefault(edge.src, set()).add(edge.dst)
            self.neigh_maybe.setdefault(edge.dst, set()).add(edge.src)
            if st == 1:
                self.fam_in.add(fam)
                self.adj_in.setdefault(edge.src, set()).add(edge.dst)
                self.neigh_in.setdefault(edge.src, set()).add(edge.dst)
                self.neigh_in.setdefault(edge.dst, set()).add(edge.src)

    def verdict(self) -> bool | None:
        result: bool | None = True
        for constraint in self.cs.constraints:
            v = self._eval(constraint, {})
            if v is False:
                return False
            if v is None:
                result = None
        return result

    # -- three-valued recursion ------------------------------------------------

    def _range(self, binder):
        if binder.sort == HOST_SORT:
            return [("host", h) for h in self.placement.hosts]
        return [("inst", i) for i in self.placement.by_type.get(binder.sort, ())]

    def _eval(self, expr, env) -> bool | None:
        if isinstance(expr, Quantified):
            ranges = [self._range(b) for b in expr.binders]
            names = [b.var for b in expr.binders]
            if expr.kind == "forall":
                result: bool | None = True
                for combo in itertools.product(*ranges):
                    env2 = dict(env)
                    env2.update(zip(names, combo))
                    v = self._eval(expr.body, env2)
                    if v is False:
                        return False
                    if v is None:
                        result = None
                return result
            some_unknown = False
            for combo in itertools.product(*ranges):
                env2 = dict(env)
                env2.update(zip(names, combo))
                v = self._eval(expr.body, env2)
                if v is True:
                    return True
                if v is None:
                    some_unknown = True
            return None if some_unknown else False
        if isinstance(expr, And):
            result = True
            for item in expr.items:
                v = self._eval(item, env)
                if v is False:
                    return False
                if v is None:
                    result = None
            return result
        if isinstance(expr, Or):
            some_unknown = False
            for item in expr.items:
                v = self._eval(item, env)
                if v is True:
                    return True
                if v is None:
                    some_unknown = True
            return None if some_unknown else False
        if isinstance(expr, Compare):
            return self._compare(expr, env)
        if isinstance(expr, ConnectsTo):
            p = env[expr.src.var][1]
            q = env[expr.dst.var][1]
            fam = (p, expr.src.port, q, expr.dst.port)
            rev = (q, expr.dst.port, p, expr.src.port)
            if fam in self.fam_in or rev in self.fam_in:
                return True
            if fam in self.fam_maybe or rev in self.fam_maybe:
                return None
            return False
        if isinstance(expr, Reachable):
            a = env[expr.a][1]
            b = env[expr.b][1]
            if self._path(a, b, self.adj_in):
                return True
            if self._path(a, b, self.adj_maybe):
                return None
            return False
        raise DeladasError(f"not a constraint expression: {expr!r}")

    @staticmethod
    def _path(a, b, adj) -> bool:
        if a == b:
            return True
        seen = {a}
        stack = [a]
        while stack:
            u = stack.pop()
            for v in adj.get(u, ()):
                if v == b:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def _interval(self, value, env) -> tuple[int, int] | tuple[str, object]:
        if isinstance(value, IntLiteral):
            return (value.value, value.value)
        if isinstance(value, Var):
            return env[value.name]
        inner = value.inner
        if isinstance(inner, InstancesOf):
            host = env[inner.host_var][1]
            n = self.placement.count_on(host, inner.type_name)
            return (n, n)
        peer = env[inner.peer_var][1]
        of_type = set(self.placement.by_type.get(inner.type_name, ()))
        lo = len(of_type & self.neigh_in.get(peer, set()))
        hi = len(of_type & self.neigh_maybe.get(peer, set()))
        return (lo, hi)

    def _compare(self, expr: Compare, env) -> bool | None:
        lhs = self._interval(expr.lhs, env)
        rhs = self._interval(expr.rhs, env)
        lhs_val = isinstance(lhs[0], int)
        rhs_val = isinstance(rhs[0], int)
        if lhs_val != rhs_val:
            raise evaluator.EvalTypeError("cannot compare a value with an integer")
        if not lhs_val:
            eq = lhs == rhs
            return eq if expr.op == "=" else not eq
        lo1, hi1 = lhs
        lo2, hi2 = rhs
        if expr.op in ("=", "!="):
            if hi1 < lo2 or hi2 < lo1:
                eq: bool | None = False
            elif lo1 == hi1 == lo2 == hi2:
                eq = True
            else:
                eq = None
            if expr.op == "=":
                return eq
            return None if eq is None else not eq
        table = {
            "<=": (hi1 <= lo2, lo1 > hi2),
            "<": (hi1 < lo2, lo1 >= hi2),
            ">=": (lo1 >= hi2, hi1 < lo2),
            ">": (lo1 > hi2, hi1 <= lo2),
        }
        certain_true, certain_false = table[expr.op]
        if certain_true:
            return True
        if certain_false:
            return False
        return None


def _materialize(doc: SpecDocument, placement: _Placement,
                 edges: list[_Edge]) -> Configuration:
    """Assign variadic indices canonically and build the configuration."""
    uses: dict[tuple[InstanceId, str], list[tuple[tuple, _Edge, str]]] = {}
    for edge in edges:
        src_key = (str(edge.dst), edge.dst_port, "s")
        dst_key = (str(edge.src), edge.src_port, "d")
        uses.setdefault((edge.src, edge.src_port), []).append((src_key, edge, "s"))
        uses.setdefault((edge.dst, edge.dst_port), []).append((dst_key, edge, "d"))

    edge_index: dict[tuple[int, str], int] = {}
    for family, family_uses in uses.items():
        inst, port = family
        ctype = doc.component(inst.type)
        pdecl = ctype.port(port) if ctype else None
        if pdecl is None or not pdecl.variadic:
            continue
        for rank, (key, edge, role) in enumerate(sorted(family_uses,
                                                        key=lambda u: u[0])):
            edge_index[(id(edge), role)] = rank

    channels = []
    for edge in edges:
        src_idx = edge_index.get((id(edge), "s"))
        dst_idx = edge_index.get((id(edge), "d"))
        channels.append(Channel(PortSlot(edge.src, edge.src_port, src_idx),
                                PortSlot(edge.dst, edge.dst_port, dst_idx)))
    return Configuration.build(doc.hosts, placement.instances, channels)


def _count_vectors(types: list[str], per_host: int, floors: dict[str, int]):
    """All per-type count tuples for one host, in canonical value order:
    ascending total, then more of earlier-declared types first."""
    k = len(types)
    out: list[tuple[int, ...]] = []

    def build(i: int, remaining: int, acc: list[int]):
        if i == k:
            out.append(tuple(acc))
            return
        lo = floors.get(types[i], 0)
        for n in range(lo, remaining + 1):
            acc.append(n)
            build(i + 1, remaining - n, acc)
            acc.pop()

    build(0, per_host, [])
    out.sort(key=lambda v: (sum(v), tuple(-x for x in v)))
    return out


class _Search:
    def __init__(self, doc: SpecDocument, cs: ConstraintSet, opts: SolveOptions):
        self.doc = doc
        self.cs = cs
        self.opts = opts
        self.patterns = connect_patterns(cs)
        self.nodes = 0
        self.solutions: list[Configuration] = []
        self.prior_edges: set[tuple] = set()
        if opts.prior is not None:
            for ch in opts.prior.channels:
                self.prior_edges.add((ch.src.instance, ch.src.port,
                                      ch.dst.instance, ch.dst.port))
        self.pin_floors: dict[str, dict[str, int]] = {}
        for pin in opts.pins:
            self.pin_floors.setdefault(pin.host, {})
            self.pin_floors[pin.host][pin.type] = max(
                self.pin_floors[pin.host].get(pin.type, 0), pin.count)

    def _tick(self):
        self.nodes += 1
        if (self.opts.node_budget is not None
                and self.nodes > self.opts.node_budget):
            raise _Budget()

    def placements(self):
        """Yield complete placements in canonical order, bounds respected."""
        hosts = self.doc.hosts
        types = [c.name for c in self.doc.components]
        counts: dict[tuple[str, str], int] = {}

        def assign(i: int, total: int):
            if i == len(hosts):
                yield _Placement(self.doc, dict(counts))
                return
            host = hosts[i].name
            floors = self.pin_floors.get(host, {})
            for vector in _count_vectors(types, self.opts.max_instances_per_host,
                                         floors):
                extra = sum(vector)
                if total + extra > self.opts.max_total_instances:
                    continue
                self._tick()
                for t, n in zip(types, vector):
                    counts[(host, t)] = n
                yield from assign(i + 1, total + extra)
            for t in types:
                counts.pop((host, t), None)

        yield from assign(0, 0)

    def run(self) -> bool:
        """DFS over placements and wirings; returns True if fully explored."""
        try:
            for placement in self.placements():
                if not self._wire(placement):
                    return False  # solution limit reached
            return True
        except _Budget:
            return False

    def _wire(self, placement: _Placement) -> bool:
        candidates = _candidate_edges(placement, self.patterns)
        # Decide surviving channels first so backtracking disturbs them last.
        if self.prior_edges:
            candidates.sort(key=lambda e: (
                (e.src, e.src_port, e.dst, e.dst_port) not in self.prior_edges,
                e.key()))
        budget = self.opts.channel_budget
        if budget is None:
            budget = len(placement.instances) ** 2
        ev = _PartialEval(placement, self.cs)
        status = [0] * len(candidates)

        # Non-variadic port families admit a single channel; track usage.
        fixed_family: dict[tuple[InstanceId, str], int] = {}

        def family_fixed(inst: InstanceId, port: str) -> bool:
            ctype = self.doc.component(inst.type)
            pdecl = ctype.port(port) if ctype else None
            return pdecl is not None and not pdecl.variadic

        def dfs(i: int, in_count: int) -> bool:
            self._tick()
            ev.load(candidates, status)
            verdict = ev.verdict()
            if verdict is False:
                return True
            if i == len(candidates):
                if verdict is True:
                    config = _materialize(self.doc, placement,
                                          [e for e, st in zip(candidates, status)
                                           if st == 1])
                    problems = validate(config, self.doc)
                    if problems:  # pragma: no cover - guarded by construction
                        raise DeladasError(
                            f"solver produced invalid configuration: {problems}")
                    result = evaluator.check(config, self.cs, self.doc)
                    if not result.satisfied:  # pragma: no cover
                        raise DeladasError(
                            "solver solution rejected by evaluator")
                    self.solutions.append(config)
                    return len(self.solutions) < self.opts.solution_limit
                return True
            edge = candidates[i]
            fam_s = (edge.src, edge.src_port)
            fam_d = (edge.dst, edge.dst_port)
            include_ok = in_count < budget
            if include_ok and family_fixed(*fam_s) and fixed_family.get(fam_s):
                include_ok = False
            if include_ok and family_fixed(*fam_d) and fixed_family.get(fam_d):
                include_ok = False
            prefer_in = (edge.src, edge.src_port,
                         edge.dst, edge.dst_port) in self.prior_edges
            order = (1, -1) if prefer_in else (-1, 1)
            for value in order:
                if value == 1 and not include_ok:
                    continue
                status[i] = value
                if value == 1:
                    for fam in (fam_s, fam_d):
                        if family_fixed(*fam):
                            fixed_family[fam] = fixed_family.get(fam, 0) + 1
                keep_going = dfs(i + 1, in_count + (1 if value == 1 else 0))
                if value == 1:
                    for fam in (fam_s, fam_d):
                        if family_fixed(*fam):
                            fixed_family[fam] -= 1
                status[i] = 0
                if not keep_going:
                    return False
            return True

        return dfs(0, 0)


def solve(doc: SpecDocument, cs_name: str,
          opts: SolveOptions | None = None) -> SolveOutcome:
    """Search for configurations satisfying the named constraintset.

    Sound (every solution passes evaluator.check and honors pins as floors)
    and bounded-complete: with exhausted True and no solutions, nothing in
    the bounded space satisfies the goal.
    """
    opts = _check_options(doc, opts or SolveOptions())
    cs = doc.constraintset(cs_name)
    if cs is None:
        raise UnknownConstraintSet(cs_name)
    started = time.perf_counter()
    search = _Search(doc, cs, opts)
    exhausted = search.run()
    elapsed = time.perf_counter() - started
    return SolveOutcome(tuple(search.solutions), exhausted,
                        SolveStats(search.nodes, elapsed))


def resolve_with_relaxation(doc: SpecDocument, cs_name: str,
                            pins: list[Binding],
                            opts: SolveOptions | None = None,
                            ) -> tuple[Configuration, list[Binding]]:
    """First solution keeping as many pins as possible.

    Iterative deepening on the number of removed pins; for each depth,
    removal subsets are tried in lexicographic canonical order. Raises
    NoSolution when even the pin-free problem is unsatisfiable.
    """
    opts = opts or SolveOptions()
    ordered = sorted(pins, key=lambda b: binding_sort_key(b, doc))
    for k in range(len(ordered) + 1):
        for removed in itertools.combinations(range(len(ordered)), k):
            removed_set = set(removed)
            kept = tuple(b for i, b in enumerate(ordered)
                         if i not in removed_set)
            outcome = solve(doc, cs_name,
                            replace(opts, pins=kept, solution_limit=1))
            if outcome.solutions:
                return outcome.solutions[0], [ordered[i] for i in removed]
    raise NoSolution(
        f"no configuration satisfies {cs_name} even with all pins removed")


def enumerate_all(doc: SpecDocument, cs_name: str,
                  opts: SolveOptions | None = None) -> SolveOutcome:
    """Exhaustive generate-and-test oracle over the bounded space.

    Independent of the solver: every structurally valid placement/wiring in
    the space is materialized and judged by evaluator.check alone.
    """
    opts = _check_options(doc, opts or SolveOptions())
    cs = doc.constraintset(cs_name)
    if cs is None:
        raise UnknownConstraintSet(cs_name)
    if len(doc.hosts) * len(doc.components) > ORACLE_MAX_HOSTS_TIMES_TYPES:
        raise SpaceTooLarge(
            f"hosts x types = {len(doc.hosts) * len(doc.components)} "
            f"> {ORACLE_MAX_HOSTS_TIMES_TYPES}")
    patterns = connect_patterns(cs)
    probe = _Search(doc, cs, opts)
    placements = list(probe.placements())
    worst = max((len(_candidate_edges(p, patterns)) for p in placements),
                default=0)
    if worst > ORACLE_MAX_CANDIDATES:
        raise SpaceTooLarge(
            f"channel candidates = {worst} > {ORACLE_MAX_CANDIDATES}")

    started = time.perf_counter()
    nodes = 0
    solutions: list[Configuration] = []
    for placement in placements:
        candidates = _candidate_edges(placement, patterns)
        budget = opts.channel_budget
        if budget is None:
            budget = len(placement.instances) ** 2

        nonvariadic: list[tuple[int, tuple[InstanceId, str]]] = []
        for idx, edge in enumerate(candidates):
            for inst, port in ((edge.src, edge.src_port),
                               (edge.dst, edge.dst_port)):
                ctype = doc.component(inst.type)
                pdecl = ctype.port(port) if ctype else None
                if pdecl is not None and not pdecl.variadic:
                    nonvariadic.append((idx, (inst, port)))

        for mask in range(1 << len(candidates)):
            nodes += 1
            if bin(mask).count("1") > budget:
                continue
            used: dict[tuple[InstanceId, str], int] = {}
            clash = False
            for idx, family in nonvariadic:
                if mask >> idx & 1:
                    used[family] = used.get(family, 0) + 1
                    if used[family] > 1:
                        clash = True
                        break
            if clash:
                continue
            edges = [e for idx, e in enumerate(candidates) if mask >> idx & 1]
            config = _materialize(doc, placement, edges)
            if evaluator.check(config, cs, doc).satisfied:
                solutions.append(config)
    elapsed = time.perf_counter() - started
    return SolveOutcome(tuple(solutions), True, SolveStats(nodes, elapsed))
