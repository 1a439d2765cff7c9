"""Reference current/voltage trace for the cell model.

Integrates the one-RC equivalent circuit at 1 ms with parameters
interpolated continuously in SoC, then samples the terminal voltage at the
end of every second. Current is a seeded drive-like sequence of rests,
cruise draws, acceleration pulses and regen pulses.

    python3 scripts/gen_reference_trace.py data/vehicles/electric_cell_table.csv data/reference/cell_trace.csv
"""

import csv
import sys

import numpy as np

Q_AH = 5.0
SOC0 = 0.9
DURATION_S = 2400
SUBSTEPS = 1000
SEED = 7


def load_table(path):
    rows = [r for r in csv.DictReader(l for l in open(path) if not l.startswith("#"))]
    cols = {k: np.array([float(r[k]) for r in rows]) for k in ("soc", "v_oc", "r0", "r1", "c1")}
    return cols


def current_profile(rng):
    levels = []
    while len(levels) < DURATION_S:
        kind = rng.choice(["rest", "cruise", "accel", "regen"], p=[0.2, 0.4, 0.25, 0.15])
        n = int(rng.integers(5, 60))
        if kind == "rest":
            amp = 0.0
        elif kind == "cruise":
            amp = rng.uniform(2.0, 6.0)
        elif kind == "accel":
            amp = rng.uniform(8.0, 15.0)
        else:
            amp = -rng.uniform(2.0, 8.0)
        levels.extend([round(amp, 3)] * n)
    return np.array(levels[:DURATION_S])


def main(table_path, out_path):
    t = load_table(table_path)
    interp = lambda k, s: np.interp(s, t["soc"], t[k])
    current = current_profile(np.random.default_rng(SEED))
    h = 1.0 / SUBSTEPS
    soc, v_rc = SOC0, 0.0
    with open(out_path, "w", newline="") as f:
        f.write(f"# one-RC cell reference; soc0 = {SOC0}; q_nom_ah = {Q_AH}; generator scripts/gen_reference_trace.py\n")
        w = csv.writer(f)
        w.writerow(["t_s", "i_a", "v_v"])
        w.writerow([0, 0.0, f"{interp('v_oc', soc):.6f}"])
        for k, i in enumerate(current):
            for _ in range(SUBSTEPS):
                # midpoint (RK2) on the coupled SoC / RC state
                tau = interp("r1", soc) * interp("c1", soc)
                c1 = interp("c1", soc)
                soc_m = soc - 0.5 * h * i / (3600.0 * Q_AH)
                v_m = v_rc + 0.5 * h * (-v_rc / tau + i / c1)
                tau_m = interp("r1", soc_m) * interp("c1", soc_m)
                c1_m = interp("c1", soc_m)
                v_rc += h * (-v_m / tau_m + i / c1_m)
                soc -= h * i / (3600.0 * Q_AH)
            v = interp("v_oc", soc) - interp("r0", soc) * i - v_rc
            w.writerow([k + 1, i, f"{v:.6f}"])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
