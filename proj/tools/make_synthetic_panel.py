"""Writes a synthetic quarterly panel in the FRED-QD file layout.

The target GDPC1 is driven by a persistent activity factor and a credit
factor with a fat left tail; the remaining series load on those factors with
noise. Output: data/synthetic_fredqd.csv and data/synthetic_fredqd_spec.json.
"""
import json
import pathlib

import numpy as np

SERIES = [
    # name, tcode, loading on activity, loading on credit, level
    ("GDPC1", 5, None, None, 3000.0),
    ("PCECC96", 5, 0.8, 0.1, 2000.0),
    ("GPDIC1", 5, 1.4, 0.5, 400.0),
    ("INDPRO", 5, 1.1, 0.2, 30.0),
    ("PAYEMS", 5, 0.7, 0.1, 55000.0),
    ("UNRATE", 2, -0.6, -0.2, 5.5),
    ("HOUST", 4, 0.9, 0.4, 1500.0),
    ("AMDMNOx", 5, 1.0, 0.3, 20000.0),
    ("CPIAUCSL", 6, 0.2, 0.0, 29.0),
    ("PCECTPI", 6, 0.1, 0.0, 17.0),
    ("FEDFUNDS", 2, 0.5, -0.3, 3.0),
    ("GS10", 2, 0.2, -0.1, 4.0),
    ("T10YFFM", 1, -0.4, 0.6, 1.0),
    ("BAA10YM", 1, -0.3, -1.0, 1.0),
    ("S&P 500", 5, 0.6, 0.8, 60.0),
    ("NFCI", 1, -0.2, -1.2, 0.0),
    ("M2REAL", 5, 0.1, 0.2, 1200.0),
    ("TOTRESNS", 6, 0.0, 0.1, 11.0),
    ("OILPRICEx", 5, 0.3, 0.0, 3.0),
    ("UMCSENTx", 2, 0.5, 0.5, 90.0),
]


def main(seed=20240131):
    rng = np.random.default_rng(seed)
    dates = [(y, q) for y in range(1959, 2022) for q in range(1, 5)][: (2021 - 1959) * 4 + 3]
    T = len(dates)
    act = np.zeros(T)
    credit = np.zeros(T)
    vol = np.zeros(T)
    for t in range(1, T):
        credit[t] = 0.85 * credit[t - 1] + 0.4 * rng.standard_normal()
        vol[t] = 0.9 * vol[t - 1] + 0.25 * rng.standard_normal()
        act[t] = 0.5 * act[t - 1] + 0.3 * credit[t - 1] + 0.5 * np.exp(vol[t] / 2) * rng.standard_normal()
    growth = np.zeros(T)
    for t in range(1, T):
        tail = -1.5 * max(0.0, -credit[t - 1] - 0.5) ** 2
        shock = np.exp(vol[t - 1] / 2) * (1.0 + 0.5 * max(0.0, -credit[t - 1])) * rng.standard_normal()
        growth[t] = 2.8 + 1.5 * act[t - 1] + 0.8 * credit[t - 1] + tail + 2.0 * shock
    covid = dates.index((2020, 2))
    growth[covid] = -31.0
    growth[covid + 1] = 33.0

    cols = {}
    cols["GDPC1"] = SERIES[0][4] * np.exp(np.cumsum(growth) / 400.0)
    for name, tcode, la, lc, level in SERIES[1:]:
        signal = la * act + lc * credit + 0.6 * rng.standard_normal(T)
        if name in ("PAYEMS", "PCECC96", "GPDIC1", "INDPRO"):
            signal[covid] -= 8.0
            signal[covid + 1] += 6.0
        if tcode == 5:
            x = level * np.exp(np.cumsum(0.5 + signal) / 100.0)
        elif tcode == 6:
            infl = 0.8 + np.cumsum(0.05 * signal) / 10.0
            x = level * np.exp(np.cumsum(infl) / 100.0)
        elif tcode == 4:
            x = level * np.exp(0.2 * signal)
        elif tcode == 2:
            x = level + np.cumsum(0.2 * signal)
        else:
            x = level + signal
        cols[name] = x

    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    names = [s[0] for s in SERIES]
    lines = ["sasdate," + ",".join(f'"{n}"' if "," in n else n for n in names)]
    lines.append("factors," + ",".join("1" for _ in names))
    lines.append("transform," + ",".join(str(s[1]) for s in SERIES))
    for i, (y, q) in enumerate(dates):
        month = 3 * (q - 1) + 1
        lines.append(f"{month}/1/{y}," + ",".join(f"{cols[n][i]:.10g}" for n in names))
    (out / "synthetic_fredqd.csv").write_text("\n".join(lines) + "\n")
    spec = [{"name": n, "tcode": t, "include": True} for n, t, *_ in SERIES]
    (out / "synthetic_fredqd_spec.json").write_text(json.dumps(spec, indent=1) + "\n")


if __name__ == "__main__":
    main()
