"""Generates the bundled synthetic ``case33_24`` scenario.

Feeder impedances and nominal loads follow the standard 33-node test feeder
(12.66 kV), transmission reactances and ratings follow the 24-bus reliability test
system. Weekly profiles, generator costs, asset placement and outage are synthetic:
they are shaped to produce the qualitative behaviour of a week with a two-day
disruption, not to reproduce any published time series.

    python3 scripts/make_case33_24.py [OUTDIR]
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from h2grid.core_model import (BusLoad, DgUnit, DistNetwork, DnLine, Fleet, Generator, H2System,
                               NodeLoad, OutageEvent, PvUnit, Scenario, ScenarioTimeline, TnLine, TransNetwork,
                               WindFarm)
from h2grid.io import bundled_case, save_bundle

H = 168
SEED = 20240115

# from, to, R (ohm), X (ohm), P (kW), Q (kVAr) at the receiving node
FEEDER = [
    (1, 2, 0.0922, 0.0470, 100, 60), (2, 3, 0.4930, 0.2511, 90, 40), (3, 4, 0.3660, 0.1864, 120, 80),
    (4, 5, 0.3811, 0.1941, 60, 30), (5, 6, 0.8190, 0.7070, 60, 20), (6, 7, 0.1872, 0.6188, 200, 100),
    (7, 8, 0.7114, 0.2351, 200, 100), (8, 9, 1.0300, 0.7400, 60, 20), (9, 10, 1.0440, 0.7400, 60, 20),
    (10, 11, 0.1966, 0.0650, 45, 30), (11, 12, 0.3744, 0.1238, 60, 35), (12, 13, 1.4680, 1.1550, 60, 35),
    (13, 14, 0.5416, 0.7129, 120, 80), (14, 15, 0.5910, 0.5260, 60, 10), (15, 16, 0.7463, 0.5450, 60, 20),
    (16, 17, 1.2890, 1.7210, 60, 20), (17, 18, 0.7320, 0.5740, 90, 40), (2, 19, 0.1640, 0.1565, 90, 40),
    (19, 20, 1.5042, 1.3554, 90, 40), (20, 21, 0.4095, 0.4784, 90, 40), (21, 22, 0.7089, 0.9373, 90, 40),
    (3, 23, 0.4512, 0.3083, 90, 50), (23, 24, 0.8980, 0.7091, 420, 200), (24, 25, 0.8960, 0.7011, 420, 200),
    (6, 26, 0.2030, 0.1034, 60, 25), (26, 27, 0.2842, 0.1447, 60, 25), (27, 28, 1.0590, 0.9337, 60, 20),
    (28, 29, 0.8042, 0.7006, 120, 70), (29, 30, 0.5075, 0.2585, 200, 600), (30, 31, 0.9744, 0.9630, 150, 70),
    (31, 32, 0.3105, 0.3619, 210, 100), (32, 33, 0.3410, 0.5302, 60, 40),
]
Z_BASE = 12.66 ** 2 / 1.0  # ohm on a 1 MVA base

CRITICAL = {2, 7, 8, 14, 24, 30}
MODERATE = {3, 4, 12, 13, 25, 29, 31, 32}

# from, to, X (p.u. on 100 MVA), rating (MW)
RTS = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175), (2, 4, 0.1267, 175), (2, 6, 0.1920, 175),
    (3, 9, 0.1190, 175), (3, 24, 0.0839, 400), (4, 9, 0.1037, 175), (5, 10, 0.0883, 175), (6, 10, 0.0605, 175),
    (7, 8, 0.0614, 175), (8, 9, 0.1651, 175), (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400),
    (10, 11, 0.0839, 400), (10, 12, 0.0839, 400), (11, 13, 0.0476, 500), (11, 14, 0.0418, 500),
    (12, 13, 0.0476, 500), (12, 23, 0.0966, 500), (13, 23, 0.0865, 500), (14, 16, 0.0389, 500),
    (15, 16, 0.0173, 500), (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500),
    (16, 17, 0.0259, 500), (16, 19, 0.0231, 500), (17, 18, 0.0144, 500), (17, 22, 0.1053, 500),
    (18, 21, 0.0259, 500), (18, 21, 0.0259, 500), (19, 20, 0.0396, 500), (19, 20, 0.0396, 500),
    (20, 23, 0.0216, 500), (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
]
RTS_LOAD = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195, 13: 265, 14: 194,
            15: 317, 16: 100, 18: 333, 19: 181, 20: 128}
# name, bus, p_max (MW), cost ($/MWh)
RTS_GEN = [
    ("G1a", 1, 40, 80.0), ("G1b", 1, 152, 30.0), ("G2a", 2, 40, 82.0), ("G2b", 2, 152, 31.0),
    ("G7", 7, 300, 55.0), ("G13", 13, 591, 45.0), ("G15a", 15, 60, 70.0), ("G15b", 15, 155, 26.0),
    ("G16", 16, 155, 26.5), ("G18", 18, 400, 8.0), ("G21", 21, 400, 8.5), ("G22", 22, 300, 12.0),
    ("G23a", 23, 310, 27.0), ("G23b", 23, 350, 20.0),
]
WIND_BUSES = (3, 5, 7, 16, 21, 23)
WIND_COST = 23.5
HIGH_WIND = list(range(49, 54)) + list(range(145, 151))


def daily_shape(h: np.ndarray) -> np.ndarray:
    """Relative demand over the day (hour of day 0..23), peak 1.0 in the evening."""
    return 0.62 + 0.22 * np.exp(-((h - 11) / 3.5) ** 2) + 0.38 * np.exp(-((h - 19) / 2.5) ** 2)


def build(seed: int = SEED) -> Scenario:
    rng = np.random.default_rng(seed)
    hours = np.arange(1, H + 1)
    hod = (hours - 1) % 24
    day = (hours - 1) // 24
    weekend = np.isin(day, (5, 6))
    shape = daily_shape(hod) * np.where(weekend, 0.9, 1.0) * (1 + 0.03 * rng.standard_normal(H))
    shape = np.clip(shape, 0.5, 1.0)

    lines = tuple(DnLine(f, t, r / Z_BASE, x / Z_BASE, 2.0 if f in (1, 2) else 1.5) for f, t, r, x, _, _ in FEEDER)
    net = DistNetwork(nodes=tuple(range(1, 34)), lines=lines, root_node=1, root_tn_bus=2,
                      v_min=0.95, v_max=1.05, exchange_limit=1.0, base_mva=1.0)

    loads = []
    for _, node, _, _, p, q in FEEDER:
        tier = "critical" if node in CRITICAL else "moderately_critical" if node in MODERATE else "non_critical"
        loads.append(NodeLoad(node, tier, tuple(np.round(shape * p / 1000, 6)), tuple(np.round(shape * q / 1000, 6))))

    tn_shape = np.clip(daily_shape(hod) * np.where(weekend, 0.88, 1.0) * 0.95, 0.5, 1.0)
    tlines = tuple(TnLine(f, t, x, -float(r), float(r)) for f, t, x, r in RTS)
    gens = tuple(Generator(n, b, 0.0, float(p), c) for n, b, p, c in RTS_GEN)
    farms = []
    for k, b in enumerate(WIND_BUSES):
        base = 40 + 50 * (1 + np.sin(2 * np.pi * (hours + 7 * k) / 37)) + 10 * rng.random(H)
        base[np.isin(hours, HIGH_WIND)] = 220.0
        farms.append(WindFarm(f"W{k + 1}", b, WIND_COST, tuple(np.round(base, 4))))
    tloads = tuple(BusLoad(b, tuple(np.round(tn_shape * mw, 4))) for b, mw in RTS_LOAD.items())
    tn = TransNetwork(buses=tuple(range(1, 25)), lines=tlines, generators=gens, wind_farms=tuple(farms),
                      loads=tloads, dn_coupling_bus=2, ref_bus=1)

    dgs = (
        DgUnit("DG1", 7, 0.0, 1.5, -1.0, 1.0, 1.8, 0.0, 36.0, 20.0, 10.0, 1.0, 1.0, 1, 0.8),
        DgUnit("DG2", 24, 0.0, 1.5, -1.0, 1.0, 1.8, 0.0, 40.0, 20.0, 10.0, 1.0, 1.0, 1, 0.8),
        DgUnit("DG3", 30, 0.0, 1.5, -1.0, 1.0, 1.8, 0.0, 44.0, 20.0, 10.0, 1.0, 1.0, 1, 0.8),
    )
    sun = np.clip(np.sin(np.pi * (hod - 6) / 12), 0, None)
    cloud = np.repeat(0.75 + 0.25 * rng.random(7), 24)
    pvs = tuple(PvUnit(f"PV{k + 1}", n, tuple(np.round(0.25 * sun * cloud, 6)), 0.3, 1.0)
                for k, n in enumerate((10, 14, 17, 21, 28, 32)))
    h2 = tuple(H2System.make(f"HS{k + 1}", n) for k, n in enumerate((16, 22, 33)))
    fleet = Fleet(dgs=dgs, pvs=pvs, h2=h2)

    fcev = {}
    for k, h in enumerate(h2):
        d = np.round(np.where((hod >= 7) & (hod <= 21), 2.0 + 0.5 * k, 0.5), 4)
        fcev[h.name] = d
    fcev["HS1"] = fcev["HS1"].copy()
    fcev["HS1"][29 - 1] += 50.0  # truck fill served after the electrolyzer signal
    cbdr = np.zeros(H)
    cbdr[[20, 35, 37]] = -0.6
    cbdr[[27, 28]] = 1.2
    tl = ScenarioTimeline(
        horizon_hours=H, dn_load=tuple(loads), fcev_demand={k: tuple(v) for k, v in fcev.items()},
        cbdr=tuple(cbdr), kappa=tuple(np.zeros(H)), dso_bid_price=tuple(np.full(H, 36.0)),
        dso_offer_price=tuple(np.full(H, 200.0)), dn_sell_price=tuple(np.full(H, 200.0)),
        outage_events=(OutageEvent(115, 144, True, ("DG1", "DG2", "DG3")),), forecast_lead=24)
    return Scenario(net, tn, fleet, tl, name="case33_24")


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else bundled_case()
    save_bundle(build(), out)
    print(f"wrote {out}")
