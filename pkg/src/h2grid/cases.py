"""Small built-in instances."""
from __future__ import annotations

from .core_model import (BusLoad, DgUnit, DistNetwork, DnLine, Fleet, Generator, H2System, NodeLoad, PvUnit,
                         Scenario, ScenarioTimeline, TnLine, TransNetwork, WindFarm)
from .io import bundled_case, load_bundle


def tutorial_case() -> Scenario:
    """3-node feeder on a 2-bus grid over 2 hours; six binaries.

    The coupling-bus price is set by an interior generator (20 $/MWh), so the
    lower level has a unique primal and dual solution for either exchange direction.
    """
    net = DistNetwork(nodes=(1, 2, 3),
                      lines=(DnLine(1, 2, 0.01, 0.02, 2.0), DnLine(2, 3, 0.02, 0.03, 2.0)),
                      root_node=1, root_tn_bus=2, exchange_limit=1.0, base_mva=1.0)
    tn = TransNetwork(buses=(1, 2), lines=(TnLine(1, 2, 0.1, -200.0, 200.0),),
                      generators=(Generator("G1", 1, 0.0, 100.0, 20.0),),
                      wind_farms=(WindFarm("W1", 2, 0.0, (10.0, 5.0)),),
                      loads=(BusLoad(2, (50.0, 60.0)),), dn_coupling_bus=2, ref_bus=1)
    fleet = Fleet(
        dgs=(DgUnit("DG1", 3, 0.0, 1.0, -0.5, 0.5, 1.2, 0.0, 30.0, 5.0, 2.0, 1.0, 1.0, 0, 0.0),),
        pvs=(PvUnit("PV1", 2, (0.1, 0.2), 0.3, 1.0),),
        h2=(H2System.make("HS1", 3, tank_min=1.0, tank_max=20.0, initial_mass=5.0),),
    )
    tl = ScenarioTimeline(
        horizon_hours=2,
        dn_load=(NodeLoad(2, "non_critical", (0.3, 0.5), (0.1, 0.15)),
                 NodeLoad(3, "critical", (0.4, 0.6), (0.1, 0.2))),
        fcev_demand={"HS1": (1.0, 2.0)}, cbdr=(0.0, 0.0), kappa=(0.0, 0.0),
        dso_bid_price=(36.0, 36.0), dso_offer_price=(15.0, 15.0), dn_sell_price=(15.0, 15.0))
    return Scenario(net, tn, fleet, tl, name="tutorial")


BUNDLED = ("case33_24", "tutorial")


def load_case(name: str) -> Scenario:
    """A built-in case by name, or a bundle directory path."""
    if name == "tutorial":
        return tutorial_case()
    if name == "case33_24":
        return load_bundle(bundled_case(name))
    return load_bundle(name)
