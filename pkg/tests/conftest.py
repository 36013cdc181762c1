from fractions import Fraction

import pytest

from tsnsynth.model import (Application, EndSystem, GlobalConstants, Link,
                            Network, Stream, Switch, SystemModel, Task)


def fully_redundant_network(hash_time: int = 10,
                            speed: Fraction = Fraction(5, 4)) -> Network:
    """Four end-systems, two switches, every ES dual-homed, 10 Mbit/s links."""
    ess = [EndSystem(f"ES{i}", hash_time) for i in range(1, 5)]
    sws = [Switch("SW1"), Switch("SW2")]
    links = []
    for es in ess:
        for sw in sws:
            links.append(Link(es.id, sw.id, speed))
            links.append(Link(sw.id, es.id, speed))
    links.append(Link("SW1", "SW2", speed))
    links.append(Link("SW2", "SW1", speed))
    return Network(ess, sws, links)


def motivational_model(wcet: int = 100) -> SystemModel:
    """One period-1000 application: t1 -s1-> t3, t2 -s2(multicast, rl=2)-> t3,t4;
    both streams 50 B and secure; 16 B keys and MACs; 10 us hashes."""
    period = 1000
    tasks = (
        Task("t1", "ES1", wcet, period),
        Task("t2", "ES2", wcet, period),
        Task("t3", "ES3", wcet, period),
        Task("t4", "ES4", wcet, period),
    )
    streams = (
        Stream("s1", 0, "t1", ("t3",), 50, rl=1, secure=True, period=period),
        Stream("s2", 0, "t2", ("t3", "t4"), 50, rl=2, secure=True, period=period),
        Stream("s2", 1, "t2", ("t3", "t4"), 50, rl=2, secure=True, period=period),
    )
    app = Application("app1", "normal", period, tasks, streams)
    constants = GlobalConstants(mtu=1500, oh=0, key_size=16, mac_size=16)
    return SystemModel(fully_redundant_network(), (app,), constants)


@pytest.fixture
def example_model() -> SystemModel:
    return motivational_model()


@pytest.fixture
def example_network() -> Network:
    return fully_redundant_network()
