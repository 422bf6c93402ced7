"""Writes the synthetic AEB telemetry traces used by the checker tests.

Nominal run: accelerate 0 -> 20 km/h over 2 s, cruise, AEB brakes at a
constant 6 m/s^2 from t = 5 s until standstill, no collision. Each
perturbation changes exactly one aspect so that exactly one of the four
post-condition checks fails.
"""
import json
import math
import pathlib

DT = 0.05
T_END = 8.0
T_BRAKE = 5.0
RAMP = 2.0


def build(cruise_kmh=20.0, decel=6.0, end_kmh=0.0, collision_at=None):
    n = int(round(T_END / DT)) + 1
    times = [round(i * DT, 2) for i in range(n)]
    v_cruise = cruise_kmh / 3.6
    v_end = end_kmh / 3.6
    t_stop = T_BRAKE + (v_cruise - v_end) / decel
    # braking ends at the first sample where the speed has come down
    t_brake_end = next(t for t in times if t >= t_stop - 1e-9)
    t_reached = RAMP * cruise_kmh / 20.0

    speed, brake, collision = [], [], []
    for t in times:
        if t < t_reached:
            v = v_cruise * t / t_reached
        elif t < T_BRAKE:
            v = v_cruise
        elif t < t_brake_end:
            v = max(v_end, v_cruise - decel * (t - T_BRAKE))
        else:
            v = v_end
        speed.append([t, round(v * 3.6, 6)])
        brake.append([t, decel if T_BRAKE <= t <= t_brake_end else 0])
        collision.append([t, collision_at is not None and t >= collision_at])

    return {
        "dt": DT,
        "signals": {
            "speed": {"unit": "km/h", "samples": speed},
            "brake": {"unit": "m/s^2", "samples": brake},
            "collision": {"unit": "boolean", "samples": collision},
        },
        "events": {
            "simulation_start": [0.0],
            "reached_target_speed": [round(t_reached, 2)],
            "braking_start_aeb": [T_BRAKE],
            "braking_end_aeb": [t_brake_end],
            "simulation_end": [times[-1]],
        },
        "metadata": {"synthetic": True, "reached_target_speed_tolerance_kmh": 0.5},
    }


TRACES = {
    "nominal.json": build(),
    "brake_4ms2.json": build(decel=4.0),
    "end_speed_3kmh.json": build(end_kmh=3.0),
    "collision.json": build(collision_at=5.5),
    "cruise_15kmh.json": build(cruise_kmh=15.0),
}

if __name__ == "__main__":
    here = pathlib.Path(__file__).parent
    for name, trace in TRACES.items():
        (here / name).write_text(json.dumps(trace, indent=1, sort_keys=True) + "\n")
