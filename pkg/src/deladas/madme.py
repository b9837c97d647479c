"""The autonomic manager: goal knowledge, failure reactions, five methods.

The manager holds the current resources and constraints, the deployed
configuration, and a handle on the fabric it manages. Fabric events drive
the autonomic cycle: a process failure is repaired in place (reinstantiate
the same instance and rewire its channels); a host failure drops the host
from the resources and re-solves with the surviving bindings pinned,
relaxing pins progressively; if nothing works a constraint error is issued
and the fabric is left untouched.

External interface: five methods over length-prefixed frames (4-byte
big-endian payload length, UTF-8 payload). Requests put the method name on
line 1 and the body after it; multi-part bodies separate parts with a line
containing only "%%". Responses answer "ok" or "error" on line 1.

    get-resources                -> canonical Deladas components and hosts
    get-constraints              -> canonical Deladas constraintsets
    get-deployment               -> the current DDD
    satisfy                      -> parts: constraints, resources,
                                    pins DDD or empty, optional limit;
                                    answers a collection of DDDs
    enact                        -> one DDD; applies the diff to the fabric
"""

from __future__ import annotations

import socket
from dataclasses import dataclass, replace
from pathlib import Path

from . import ddd, evaluator, fabric as fabric_mod, lang, model, solver
from .ddd import EnactmentPlan, Install, Instantiate, Wire, action_key
from .fabric import (AddHost, AmpReport, DuplicateHost, Fabric, HostDown,
                     HostFailureSuspected, Revise)
from .lang import DeladasError, HostSpec, SpecDocument
from .model import Binding, Configuration, InstanceId


class UnknownHost(DeladasError):
    pass


class MalformedPayload(DeladasError):
    pass


# ---------------------------------------------------------------------------
# Decisions and failures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessFailure:
    instance: InstanceId
    host: str


@dataclass(frozen=True)
class HostFailure:
    host: str


@dataclass(frozen=True)
class RestartInPlace:
    instance: InstanceId


@dataclass(frozen=True)
class Resolve:
    removed: tuple[Binding, ...]
    config: Configuration


@dataclass(frozen=True)
class ConstraintError:
    detail: str


@dataclass(frozen=True)
class NoOp:
    reason: str = ""


Decision = RestartInPlace | Resolve | ConstraintError | NoOp


def classify_failure(events) -> ProcessFailure | HostFailure | None:
    """Classify one tick window of observer events.

    An AMP report pins the failure on the process; a failure suspicion with
    no covering AMP report for that host means the host itself died. Returns
    None (no-op) when the window carries no failure signal.
    """
    for classified in classify_window(events):
        return classified
    return None


def classify_window(events) -> list[ProcessFailure | HostFailure]:
    out: list[ProcessFailure | HostFailure] = []
    reported_hosts = set()
    for event in events:
        if isinstance(event, AmpReport):
            out.append(ProcessFailure(event.failed_instance, event.host))
            reported_hosts.add(event.host)
    for event in events:
        if isinstance(event, HostFailureSuspected) and event.host not in reported_hosts:
            out.append(HostFailure(event.host))
    return out


def evolve_resources(doc: SpecDocument, remove: set[str],
                     add: list[HostSpec]) -> SpecDocument:
    """Update the host list; components and constraintsets are untouched."""
    names = {h.name for h in doc.hosts}
    for name in sorted(remove):
        if name not in names:
            raise UnknownHost(name)
    hosts = [h for h in doc.hosts if h.name not in remove]
    for spec in add:
        if spec.name in names:
            raise DuplicateHost(spec.name)
        names.add(spec.name)
        hosts.append(spec)
    return SpecDocument(doc.components, tuple(hosts), doc.constraintsets)


def select_constraintset(doc: SpecDocument, name: str | None) -> str:
    """Resolve which constraintset to use: the named one, or the only one."""
    if name:
        if doc.constraintset(name) is None:
            raise solver.UnknownConstraintSet(name)
        return name
    if len(doc.constraintsets) == 1:
        return doc.constraintsets[0].name
    if not doc.constraintsets:
        raise solver.UnknownConstraintSet("no constraintset declared")
    names = ", ".join(cs.name for cs in doc.constraintsets)
    raise solver.UnknownConstraintSet(
        f"ambiguous constraintset; choose one of: {names}")


# ---------------------------------------------------------------------------
# Manager
# ---------------------------------------------------------------------------

class Manager:
    def __init__(self, doc: SpecDocument, cs_name: str, fabric: Fabric,
                 options: solver.SolveOptions | None = None):
        self.doc = doc
        self.cs_name = select_constraintset(doc, cs_name)
        self.fabric = fabric
        self.options = options or solver.SolveOptions()
        self.deployed = model.empty_on(doc.hosts)
        self.pending: EnactmentPlan | None = None
        self.history: list[tuple[int, Decision]] = []
        self.saw_constraint_error = False

    # -- helpers ----------------------------------------------------------------

    def _cs(self) -> lang.ConstraintSet:
        cs = self.doc.constraintset(self.cs_name)
        if cs is None:  # pragma: no cover - guarded at construction
            raise solver.UnknownConstraintSet(self.cs_name)
        return cs

    def _record(self, decision: Decision) -> Decision:
        self.history.append((self.fabric.clock, decision))
        if isinstance(decision, ConstraintError):
            self.saw_constraint_error = True
            self.fabric.log("decision-constraint-error", decision.detail)
        elif isinstance(decision, Resolve):
            removed = ",".join(str(b) for b in decision.removed) or "-"
            self.fabric.log("decision-resolve", f"removed={removed}")
        elif isinstance(decision, RestartInPlace):
            self.fabric.log("decision-restart", decision.instance)
        return decision

    def _alive_hosts(self) -> set[str]:
        return {name for name, state in self.fabric.hosts.items() if state.alive}

    def _surviving(self) -> Configuration:
        # Keep every alive host, even ones no longer in the resources: their
        # leftover machines must appear in the diff base to get terminated.
        return model.restrict_to_hosts(self.deployed, self._alive_hosts())

    def _enact(self, plan: EnactmentPlan, new_config: Configuration) -> None:
        self.pending = plan
        try:
            self.fabric.apply_plan(plan)
        finally:
            self.pending = None
        self.deployed = new_config

    # -- the autonomic cycle ------------------------------------------------------

    def deploy_initial(self, pins: tuple[Binding, ...] = (),
                       prior: Configuration | None = None) -> Decision:
        """Solve and enact the initial deployment."""
        opts = replace(self.options, pins=pins, prior=prior, solution_limit=1)
        outcome = solver.solve(self.doc, self.cs_name, opts)
        if not outcome.solutions:
            return self._record(ConstraintError(
                f"no configuration satisfies {self.cs_name}"))
        config = outcome.solutions[0]
        decision = Resolve((), config)
        self._record(decision)
        plan = ddd.diff(self.deployed, config, self.doc)
        self._enact(plan, config)
        return decision

    def on_events(self, events) -> list[Decision]:
        """React to one step's delivered events."""
        decisions: list[Decision] = []
        for event in events:
            if isinstance(event, AddHost):
                try:
                    self.doc = evolve_resources(self.doc, set(), [event.host])
                except DuplicateHost:
                    pass
            elif isinstance(event, Revise):
                decisions.append(self._revise(event))
        for classified in classify_window(events):
            decisions.append(self.autonomic_step(classified))
        return decisions

    def autonomic_step(self,
                       classified: ProcessFailure | HostFailure | None) -> Decision:
        if classified is None:
            return self._record(NoOp("no failure signal"))
        if isinstance(classified, ProcessFailure):
            return self._restart_in_place(classified)
        return self._host_failure(classified)

    def _restart_in_place(self, failure: ProcessFailure) -> Decision:
        instance = failure.instance
        if instance not in set(self.deployed.instance_ids()):
            return self._record(NoOp(f"{instance} is not part of the deployment"))
        ctype = self.doc.component(instance.type)
        host_state = self.fabric.hosts.get(instance.host)
        actions: list[object] = []
        if (ctype is not None and host_state is not None
                and ctype.code not in host_state.installed):
            actions.append(Install(instance, ctype.code, instance.host))
        actions.append(Instantiate(instance))
        for ch in self.deployed.channels:
            if instance in (ch.src.instance, ch.dst.instance):
                actions.append(Wire(ch))
        plan = EnactmentPlan(tuple(sorted(actions, key=action_key)))
        decision = RestartInPlace(instance)
        self._record(decision)
        try:
            self.fabric.apply_plan(plan)
        except (HostDown, fabric_mod.UnknownInstance) as e:
            return self._record(ConstraintError(f"restart failed: {e}"))
        return decision

    def _host_failure(self, failure: HostFailure) -> Decision:
        if self.doc.host(failure.host) is None:
            return self._record(NoOp(f"host {failure.host} already dropped"))
        doc2 = evolve_resources(self.doc, {failure.host}, [])
        self.doc = doc2
        base = self._surviving()
        doc_hosts = {h.name for h in doc2.hosts}
        pins = tuple(b for b in model.bindings_of(base) if b.host in doc_hosts)
        try:
            config, removed = solver.resolve_with_relaxation(
                doc2, self.cs_name, list(pins),
                replace(self.options, prior=base))
        except solver.NoSolution:
            return self._record(ConstraintError(
                f"no configuration satisfies {self.cs_name} "
                f"after losing {failure.host}"))
        decision = Resolve(tuple(removed), config)
        self._record(decision)
        plan = ddd.diff(base, config, doc2)
        try:
            self._enact(plan, config)
        except HostDown as e:
            return self._record(ConstraintError(f"enactment raced a failure: {e}"))
        return decision

    def _revise(self, event: Revise) -> Decision:
        try:
            constraints = lang.parse(Path(event.constraints_path).read_text())
            resources = lang.parse(Path(event.resources_path).read_text())
            doc2 = lang.merge_documents(resources, constraints)
            cs_name = self.cs_name if doc2.constraintset(self.cs_name) \
                else select_constraintset(doc2, None)
        except (OSError, DeladasError) as e:
            return self._record(ConstraintError(f"revision rejected: {e}"))
        self.doc = doc2
        self.cs_name = cs_name
        base = self._surviving()
        doc_hosts = {h.name for h in doc2.hosts}
        pins = tuple(b for b in model.bindings_of(base) if b.host in doc_hosts)
        try:
            config, removed = solver.resolve_with_relaxation(
                doc2, cs_name, list(pins), replace(self.options, prior=base))
        except solver.NoSolution:
            return self._record(ConstraintError(
                f"no configuration satisfies revised goal {cs_name}"))
        decision = Resolve(tuple(removed), config)
        self._record(decision)
        plan = ddd.diff(base, config, doc2)
        try:
            self._enact(plan, config)
        except HostDown as e:
            return self._record(ConstraintError(f"enactment raced a failure: {e}"))
        return decision

    # -- the five-method interface --------------------------------------------------

    def handle_request(self, method: str, body: str) -> bytes:
        try:
            return self._dispatch(method, body)
        except MalformedPayload as e:
            return f"error\nMalformedPayload: {e}".encode()
        except HostDown as e:
            return f"error\nEnactFailed: {e}".encode()
        except DeladasError as e:
            return f"error\n{type(e).__name__}: {e}".encode()

    def _dispatch(self, method: str, body: str) -> bytes:
        if method == "get-resources":
            text = lang.pretty_print(SpecDocument(self.doc.components,
                                                  self.doc.hosts, ()))
            return b"ok\n" + text.encode()
        if method == "get-constraints":
            text = lang.pretty_print(SpecDocument((), (), self.doc.constraintsets))
            return b"ok\n" + text.encode()
        if method == "get-deployment":
            return b"ok\n" + ddd.to_xml(self.deployed, self.doc, self.cs_name)
        if method == "satisfy":
            return self._satisfy(body)
        if method == "enact":
            return self._enact_request(body)
        raise MalformedPayload(f"unknown method {method!r}")

    def _satisfy(self, body: str) -> bytes:
        parts = split_parts(body)
        if len(parts) < 2 or len(parts) > 4:
            raise MalformedPayload(
                "satisfy needs parts: constraints, resources[, pins ddd[, limit]]")
        constraints = lang.parse(parts[0])
        resources = lang.parse(parts[1])
        doc = lang.merge_documents(resources, constraints)
        cs_name = select_constraintset(
            doc, self.cs_name if doc.constraintset(self.cs_name) else None)
        pins: tuple[Binding, ...] = ()
        prior = None
        if len(parts) >= 3 and parts[2].strip():
            parsed = ddd.parse_ddd(parts[2].encode())
            prior = parsed.configuration
            pins = tuple(model.bindings_of(prior))
        limit = 1
        if len(parts) == 4 and parts[3].strip():
            try:
                limit = int(parts[3].strip())
            except ValueError:
                raise MalformedPayload(f"bad limit {parts[3]!r}") from None
        opts = replace(self.options, pins=pins, prior=prior, solution_limit=limit)
        outcome = solver.solve(doc, cs_name, opts)
        documents = [ddd.to_xml(config, doc, cs_name).decode()
                     for config in outcome.solutions]
        return b"ok\n" + join_parts(documents).encode()

    def _enact_request(self, body: str) -> bytes:
        if not body.strip():
            raise MalformedPayload("enact needs a DDD body")
        config = ddd.from_xml(body.encode())
        known = {h.name for h in self.doc.hosts}
        for inst in config.instances:
            if inst.id.host not in known:
                raise lang.ValidationError(
                    f"instance {inst.id}: host {inst.id.host} is not a resource")
        config = Configuration.build(self.doc.hosts, config.instances,
                                     config.channels)
        problems = model.validate(config, self.doc)
        if problems:
            raise lang.ValidationError("; ".join(problems))
        result = evaluator.check(config, self._cs(), self.doc)
        if not result.satisfied:
            detail = "; ".join(str(v) for v in result.violations)
            return f"error\nConstraintError: {detail}".encode()
        plan = ddd.diff(self.deployed, config, self.doc)
        self._enact(plan, config)
        return b"ok\n" + plan.render().encode()


# ---------------------------------------------------------------------------
# Framing and the serve loop
# ---------------------------------------------------------------------------

def write_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(len(payload).to_bytes(4, "big") + payload)


def read_frame(sock: socket.socket) -> bytes | None:
    header = _read_exact(sock, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    if length == 0:
        return b""
    return _read_exact(sock, length)


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def split_parts(body: str) -> list[str]:
    parts: list[list[str]] = [[]]
    for line in body.split("\n"):
        if line == "%%":
            parts.append([])
        else:
            parts[-1].append(line)
    return ["\n".join(p) for p in parts]


def join_parts(parts: list[str]) -> str:
    return "\n%%\n".join(part.rstrip("\n") for part in parts)


def request(sock: socket.socket, method: str, body: str = "") -> tuple[bool, str]:
    """Client helper: send one framed request, read one framed response."""
    payload = method + ("\n" + body if body else "")
    write_frame(sock, payload.encode())
    response = read_frame(sock)
    if response is None:
        raise DeladasError("connection closed mid-request")
    text = response.decode()
    status, _, rest = text.partition("\n")
    return status == "ok", rest


def serve(manager: Manager, listener: socket.socket) -> None:
    """Serve framed requests one at a time until the listener is closed."""
    while True:
        try:
            conn, _ = listener.accept()
        except OSError:
            return
        with conn:
            while True:
                frame = read_frame(conn)
                if frame is None:
                    break
                text = frame.decode()
                method, _, body = text.partition("\n")
                response = manager.handle_request(method.strip(), body)
                write_frame(conn, response)


def make_listener(spec: str) -> socket.socket:
    """Listen on a TCP port ('8123' or 'host:8123') or a unix socket path."""
    if spec.isdigit():
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(("127.0.0.1", int(spec)))
    elif spec.count(":") == 1 and spec.rsplit(":", 1)[1].isdigit():
        host, port = spec.rsplit(":", 1)
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, int(port)))
    else:
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.bind(spec)
    sock.listen(4)
    return sock


def connect(spec: str) -> socket.socket:
    if spec.isdigit():
        return socket.create_connection(("127.0.0.1", int(spec)))
    if spec.count(":") == 1 and spec.rsplit(":", 1)[1].isdigit():
        host, port = spec.rsplit(":", 1)
        return socket.create_connection((host, int(port)))
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    sock.connect(spec)
    return sock
