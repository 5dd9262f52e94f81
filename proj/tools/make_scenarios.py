#!/usr/bin/env python3
"""Regenerates the shipped maps and scenarios under data/."""
import json
import math
import os

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def arc(cx, cy, r, a0, a1, step_deg=3.0):
    n = max(2, int(abs(a1 - a0) / math.radians(step_deg)) + 1)
    return [[round(cx + r * math.cos(a0 + (a1 - a0) * i / (n - 1)), 6),
             round(cy + r * math.sin(a0 + (a1 - a0) * i / (n - 1)), 6)] for i in range(n)]


def dump(rel, doc):
    path = os.path.join(ROOT, rel)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def corridor():
    cells = 8
    lanes = [{"id": f"c{k}", "centerline": [[0, 60 * k], [3600, 60 * k]], "width": 3.5,
              "marking": "solid", "successors": []} for k in range(cells)]
    dump("maps/corridor.json", {"schema_version": 1, "lanes": lanes, "signals": []})
    objects, agents = [], []
    for k in range(cells):
        # lead brakes 11 -> 5 m/s at t = 25 s and every 45 s after
        objects.append({"id": f"lead{k}", "kind": "vehicle", "path": [f"c{k}"], "start_s": 110,
                        "keyframes": [[0, 11], [25, 11], [27, 5], [37, 5], [41, 11], [45, 11]], "period": 45})
        for j in range(3):
            agents.append({"id": f"f{k}_{j}", "style": ["normal", "normal", "normal"], "route": [f"c{k}"],
                           "spawn": {"s": 80 - 30 * j, "speed": 11}})
    dump("scenarios/corridor.json", {
        "schema_version": 1, "name": "corridor", "map": "../maps/corridor.json", "dt": 0.05,
        "max_steps": 6001, "run_seed": 1, "spawn_jitter_m": 2.0,
        "schedule": {"l2_period": 2000, "l3_rate": 0.064},
        "provider": {"enabled": False}, "agents": agents, "objects": objects})


def freeflow():
    r = 60.0
    lanes = [
        {"id": "ff_a", "centerline": [[0, 0], [200, 0]], "marking": "solid", "successors": ["ff_b"]},
        {"id": "ff_b", "centerline": arc(200, r, r, -math.pi / 2, 0), "marking": "solid", "successors": ["ff_c"]},
        {"id": "ff_c", "centerline": [[200 + r, r], [200 + r, r + 150]], "marking": "solid", "successors": []},
    ]
    dump("maps/freeflow.json", {"schema_version": 1, "lanes": lanes, "signals": []})
    route = ["ff_a", "ff_b", "ff_c"]
    dump("scenarios/freeflow.json", {
        "schema_version": 1, "name": "freeflow", "map": "../maps/freeflow.json", "dt": 0.05,
        "max_steps": 2400, "run_seed": 1,
        "agents": [
            {"id": "ego", "style": ["normal", "normal", "normal"], "route": route, "spawn": {"s": 70, "speed": 8}},
            {"id": "tail", "style": ["normal", "normal", "normal"], "route": route, "spawn": {"s": 5, "speed": 8}},
        ]})


def ego_signals():
    lanes = [{"id": "s_in", "centerline": [[0, 0], [200, 0]], "marking": "solid", "successors": ["s_out"]},
             {"id": "s_out", "centerline": [[200, 0], [420, 0]], "marking": "solid", "successors": []}]
    signals = [{"id": "light", "stop_point": [200, 0, 0], "controlled_lanes": ["s_in"],
                "phases": [["red", 25], ["green", 30], ["yellow", 3]]}]
    dump("maps/signals.json", {"schema_version": 1, "lanes": lanes, "signals": signals})
    route = ["s_in", "s_out"]
    agents = [{"id": "ego", "role": "ego_under_test", "style": ["normal", "normal", "normal"], "route": route,
               "spawn": {"s": 100, "speed": 10}}]
    for j in range(4):
        agents.append({"id": f"bg{j}", "style": ["normal", "normal", "normal"], "route": route,
                       "spawn": {"s": 72 - 26 * j, "speed": 10}})
    dump("scenarios/ego_signals.json", {
        "schema_version": 1, "name": "ego_signals", "map": "../maps/signals.json", "dt": 0.05,
        "max_steps": 2000, "run_seed": 1, "spawn_jitter_m": 1.5, "agents": agents})


def ring(n=30, spacing=31.4, name="ring"):
    r = n * spacing / (2 * math.pi)
    lanes = [{"id": f"{name}_a", "centerline": arc(0, 0, r, -math.pi / 2, math.pi / 2, 2.0), "marking": "solid",
              "successors": [f"{name}_b"]},
             {"id": f"{name}_b", "centerline": arc(0, 0, r, math.pi / 2, 3 * math.pi / 2, 2.0), "marking": "solid",
              "successors": [f"{name}_a"]}]
    styles = [["aggressive", "drunk", "distracted"], ["cautious", "fatigued", "distracted"],
              ["normal", "drunk", "normal"], ["aggressive", "fatigued", "normal"], ["normal", "normal", "distracted"]]
    agents = []
    half = math.pi * r
    for i in range(n):
        s = i * spacing
        route = [f"{name}_a", f"{name}_b"] * 12
        agents.append({"id": f"a{i:02d}", "style": styles[i % len(styles)], "route": route,
                       "spawn": {"s": s, "speed": 8}})
    return {"schema_version": 1, "lanes": lanes, "signals": []}, agents


def ring_scenario():
    m, agents = ring()
    dump("maps/ring.json", m)
    dump("scenarios/ring.json", {
        "schema_version": 1, "name": "ring", "map": "../maps/ring.json", "dt": 0.05, "max_steps": 6001,
        "run_seed": 1, "schedule": {"l2_period": 2000, "l3_rate": 0.064}, "agents": agents})


if __name__ == "__main__":
    corridor()
    freeflow()
    ego_signals()
    ring_scenario()
