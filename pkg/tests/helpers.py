"""Shared builders for the test suite.

The canonical six-host client/router example lives here: two routers on h3
and h4, four clients elsewhere, each client pair-wired to one router and the
routers mutually wired. The wiring below was checked by hand against all
five constraint clauses before any solver existed; tests treat it as ground
truth.
"""

from __future__ import annotations

import random
from pathlib import Path

from deladas import lang
from deladas.model import Channel, Configuration, Instance, InstanceId, PortSlot

SAMPLES = Path(__file__).resolve().parent.parent / "samples"

RESOURCES_TEXT = (SAMPLES / "resources.deladas").read_text()
CONSTRAINTS_TEXT = (SAMPLES / "constraints.deladas").read_text()


def resources_doc() -> lang.SpecDocument:
    return lang.parse(RESOURCES_TEXT)


def constraints_doc() -> lang.SpecDocument:
    return lang.parse(CONSTRAINTS_TEXT)


def merged_doc() -> lang.SpecDocument:
    return lang.merge_documents(resources_doc(), constraints_doc())


def iid(text: str) -> InstanceId:
    return InstanceId.parse(text)


def slot(text: str) -> PortSlot:
    return PortSlot.parse(text)


def chan(src: str, dst: str) -> Channel:
    return Channel(slot(src), slot(dst))


def client_router_pair(client: str, router: str, index: int) -> list[Channel]:
    """The two channels attaching one client to one router."""
    return [
        chan(f"{client}:out", f"{router}:cin[{index}]"),
        chan(f"{client}:in", f"{router}:cout[{index}]"),
    ]


def ring_pair(r1: str, r2: str, i1: int = 0, i2: int = 0) -> list[Channel]:
    """Mutual rout->rin channels between two routers."""
    return [
        chan(f"{r1}:rout[{i1}]", f"{r2}:rin[{i2}]"),
        chan(f"{r2}:rout[{i2}]", f"{r1}:rin[{i1}]"),
    ]


def example_configuration() -> Configuration:
    """Routers on h3/h4, clients on h1/h2/h5/h6, 10 channels."""
    doc = resources_doc()
    instances = [
        Instance(iid("Client@h1#0"), "Client"),
        Instance(iid("Client@h2#0"), "Client"),
        Instance(iid("Router@h3#0"), "Router"),
        Instance(iid("Router@h4#0"), "Router"),
        Instance(iid("Client@h5#0"), "Client"),
        Instance(iid("Client@h6#0"), "Client"),
    ]
    channels = (
        client_router_pair("Client@h1#0", "Router@h3#0", 0)
        + client_router_pair("Client@h5#0", "Router@h3#0", 1)
        + client_router_pair("Client@h2#0", "Router@h4#0", 0)
        + client_router_pair("Client@h6#0", "Router@h4#0", 1)
        + ring_pair("Router@h3#0", "Router@h4#0")
    )
    return Configuration.build(doc.hosts, instances, channels)


def parse_snippet(text: str) -> lang.SpecDocument:
    return lang.parse(text)


def three_host_doc() -> lang.SpecDocument:
    """The six-host example reduced to its first three hosts."""
    doc = merged_doc()
    return lang.SpecDocument(doc.components, doc.hosts[:3], doc.constraintsets)


def rng(seed: int = 0) -> random.Random:
    return random.Random(seed)
