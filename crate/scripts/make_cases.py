#!/usr/bin/env python3
"""Writes the bundled case files under crates/core/data/cases.

Network topology and bus loads follow the published IEEE RTS-79 tables.
Generator parameters use one representative row per RTS unit type, with
the piecewise cost curves, start-up tables and ramp rates shown in
UNIT_TYPES below; the wind farms are additions of this project.  Each
case carries a `provenance` object describing where its numbers come
from; the loader ignores it.

Usage: python3 scripts/make_cases.py
"""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "data" / "cases"

# (from, to, reactance_pu, continuous rating MW), RTS line order.
RTS_LINES = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175),
    (2, 4, 0.1267, 175), (2, 6, 0.1920, 175), (3, 9, 0.1190, 175),
    (3, 24, 0.0839, 400), (4, 9, 0.1037, 175), (5, 10, 0.0883, 175),
    (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400),
    (10, 11, 0.0839, 400), (10, 12, 0.0839, 400), (11, 13, 0.0476, 500),
    (11, 14, 0.0418, 500), (12, 13, 0.0476, 500), (12, 23, 0.0966, 500),
    (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500),
    (16, 17, 0.0259, 500), (16, 19, 0.0231, 500), (17, 18, 0.0144, 500),
    (17, 22, 0.1053, 500), (18, 21, 0.0259, 500), (18, 21, 0.0259, 500),
    (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
]

RTS_LOADS = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
    10: 195, 13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128,
}

# type: p_min, p_max, ramp MW/h, min up h, min down h,
#       cost blocks [(up_to MW, $/MWh)], start-up steps [(hours off, $)]
UNIT_TYPES = {
    "U12": (2.4, 12, 60, 4, 2, [(6, 56.0), (9.6, 58.0), (12, 61.0)], [(1, 70), (4, 140)]),
    "U20": (16, 20, 180, 1, 1, [(18, 110.0), (20, 118.0)], [(1, 5), (2, 10)]),
    "U50": (10, 50, 180, 1, 1, [(50, 0.5)], [(1, 0)]),
    "U76": (15.2, 76, 120, 8, 4, [(38, 16.0), (60.8, 17.2), (76, 18.5)], [(1, 700), (8, 1400)]),
    "U100": (25, 100, 420, 8, 8, [(50, 44.0), (80, 46.5), (100, 49.0)], [(1, 1200), (8, 2400)]),
    "U155": (54.3, 155, 180, 8, 8, [(93, 13.2), (124, 14.0), (155, 15.0)], [(1, 1500), (8, 3000)]),
    "U197": (69, 197, 180, 12, 10, [(118, 47.0), (158, 49.0), (197, 51.5)], [(1, 2000), (10, 4000)]),
    "U350": (140, 350, 240, 24, 48, [(210, 11.5), (280, 12.2), (350, 13.0)], [(1, 3500), (24, 7000)]),
    "U400": (100, 400, 1200, 1, 1, [(400, 5.5)], [(1, 5000), (24, 10000)]),
}

RTS_UNITS = [
    (1, "U20"), (1, "U20"), (1, "U76"), (1, "U76"),
    (2, "U20"), (2, "U20"), (2, "U76"), (2, "U76"),
    (7, "U100"), (7, "U100"), (7, "U100"),
    (13, "U197"), (13, "U197"), (13, "U197"),
    (15, "U12"), (15, "U12"), (15, "U12"), (15, "U12"), (15, "U12"), (15, "U155"),
    (16, "U155"),
    (18, "U400"),
    (21, "U400"),
    (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"), (22, "U50"),
    (23, "U155"), (23, "U155"), (23, "U350"),
]

RTS_WIND = [(3, 200), (14, 200), (17, 200)]

# Interconnections of the three-area system: (from, to, x, rating).
RTS96_TIES = [
    (107, 203, 0.1610, 175), (113, 215, 0.0750, 500), (123, 217, 0.0740, 500),
    (121, 325, 0.0970, 500), (223, 318, 0.1000, 500), (325, 323, 0.0970, 500),
]

PRICES = {"voll": 1000.0, "wind_curtail_price": 100.0}

PROVENANCE = {
    "topology": "IEEE RTS-79 branch table (reactance, continuous rating)",
    "loads": "IEEE RTS-79 annual peak bus loads",
    "generators": "one representative parameter row per RTS unit type; "
    "cost blocks, ramp rates and hot/cold start-up tables are representative values",
    "wind": "wind farms added by this project",
    "prices": "VOLL 1000 $/MWh, curtailment 100 $/MWh",
}


def unit(gid, bus, kind):
    pmin, pmax, ramp, up, down, blocks, starts = UNIT_TYPES[kind]
    return {
        "id": gid,
        "bus": bus,
        "p_min_MW": float(pmin),
        "p_max_MW": float(pmax),
        "ramp_up_MW_per_h": float(ramp),
        "ramp_down_MW_per_h": float(ramp),
        "min_up_h": up,
        "min_down_h": down,
        "cost_curve": [{"up_to_MW": float(u), "price": float(p)} for u, p in blocks],
        "startup_cost_fn": [{"min_hours_off": h, "cost": float(c)} for h, c in starts],
    }


def line(lid, f, t, x, rating):
    return {"id": lid, "from_bus": f, "to_bus": t, "reactance_pu": x, "flow_limit_MW": float(rating)}


def rts79():
    buses = [
        {"id": b, "peak_load_MW": float(RTS_LOADS.get(b, 0)), "load_profile_id": "rts"}
        for b in range(1, 25)
    ]
    lines = [line(i + 1, *row) for i, row in enumerate(RTS_LINES)]
    gens = [unit(i + 1, bus, kind) for i, (bus, kind) in enumerate(RTS_UNITS)]
    wind = [{"id": i + 1, "bus": b, "capacity_MW": float(c)} for i, (b, c) in enumerate(RTS_WIND)]
    return {
        "name": "rts79",
        "provenance": PROVENANCE,
        "buses": buses,
        "lines": lines,
        "dispatchable_generators": gens,
        "wind_generators": wind,
        "reference_buses": [13],
        "prices": PRICES,
    }


def rts96():
    buses, lines, gens, wind = [], [], [], []
    for zone in (100, 200, 300):
        for b in range(1, 25):
            buses.append({"id": zone + b, "peak_load_MW": float(RTS_LOADS.get(b, 0)), "load_profile_id": "rts"})
        for f, t, x, r in RTS_LINES:
            lines.append(line(len(lines) + 1, zone + f, zone + t, x, r))
        for bus, kind in RTS_UNITS:
            gens.append(unit(len(gens) + 1, zone + bus, kind))
        for b, c in RTS_WIND:
            wind.append({"id": len(wind) + 1, "bus": zone + b, "capacity_MW": float(c)})
    buses.append({"id": 325, "peak_load_MW": 0.0, "load_profile_id": "rts"})
    for f, t, x, r in RTS96_TIES:
        lines.append(line(len(lines) + 1, f, t, x, r))
    prov = dict(PROVENANCE)
    prov["topology"] = (
        "three RTS-79 areas (bus ids 1xx, 2xx, 3xx) plus bus 325; lines 1-38, 39-76, 77-114 "
        "repeat the area branch table, lines 115-120 are the interconnections"
    )
    prov["interconnection_outages"] = (
        "assumed mapping: the three interconnection outage candidates are lines 115 (107-203), "
        "119 (223-318) and 120 (325-323)"
    )
    return {
        "name": "rts96",
        "provenance": prov,
        "buses": buses,
        "lines": lines,
        "dispatchable_generators": gens,
        "wind_generators": wind,
        "reference_buses": [113],
        "prices": PRICES,
    }


def toy5():
    loads = {1: 0.0, 2: 60.0, 3: 50.0, 4: 70.0, 5: 60.0}
    topo = [(1, 2, 0.06, 150), (1, 3, 0.08, 120), (2, 3, 0.10, 80), (2, 4, 0.12, 100), (3, 5, 0.10, 100), (4, 5, 0.09, 80)]
    gens = [
        {
            "id": 1, "bus": 1, "p_min_MW": 40.0, "p_max_MW": 200.0,
            "ramp_up_MW_per_h": 100.0, "ramp_down_MW_per_h": 100.0,
            "min_up_h": 3, "min_down_h": 2,
            "cost_curve": [{"up_to_MW": 100.0, "price": 15.0}, {"up_to_MW": 200.0, "price": 22.0}],
            "startup_cost_fn": [{"min_hours_off": 1, "cost": 300.0}, {"min_hours_off": 5, "cost": 600.0}],
        },
        {
            "id": 2, "bus": 4, "p_min_MW": 10.0, "p_max_MW": 100.0,
            "ramp_up_MW_per_h": 60.0, "ramp_down_MW_per_h": 60.0,
            "min_up_h": 1, "min_down_h": 1,
            "cost_curve": [{"up_to_MW": 50.0, "price": 30.0}, {"up_to_MW": 100.0, "price": 40.0}],
            "startup_cost_fn": [{"min_hours_off": 1, "cost": 100.0}, {"min_hours_off": 3, "cost": 150.0}],
        },
    ]
    return {
        "name": "toy5",
        "provenance": {"all": "synthetic five-bus test network"},
        "buses": [{"id": b, "peak_load_MW": l, "load_profile_id": "rts"} for b, l in loads.items()],
        "lines": [line(i + 1, *row) for i, row in enumerate(topo)],
        "dispatchable_generators": gens,
        "wind_generators": [{"id": 1, "bus": 3, "capacity_MW": 80.0}],
        "reference_buses": [1],
        "prices": PRICES,
    }


def mods(zones):
    out = []
    for z in zones:
        # The 1-2 line carries the same position in every area's branch table.
        out.append({"kind": "remove_line", "args": {"line": z[1]}})
        out.append({"kind": "move_load", "args": {"from_bus": z[0] + 1, "to_bus": z[0] + 3}})
        out.append({"kind": "move_load", "args": {"from_bus": z[0] + 2, "to_bus": z[0] + 4}})
    return out


def write(name, obj):
    (OUT / name).write_text(json.dumps(obj, indent=1) + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write("toy5.case", toy5())
    write("rts79.case", rts79())
    write("rts96.case", rts96())
    write("rts79-bottleneck.mods", mods([(0, 1)]))
    write("rts96-bottleneck.mods", mods([(100, 1), (200, 39), (300, 77)]))
