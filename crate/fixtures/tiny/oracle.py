"""Spreadsheet-style recomputation of the tiny fixture, written without
reference to the Rust implementation. Produces expected.json.

Run from this directory: python3 oracle.py
"""
import csv
import json
from datetime import date, datetime, timedelta, timezone

import numpy as np

EPS = 1e-9
STALE = 7
DUST_USD = 10.0
DATES = [date(2022, 1, 3), date(2022, 1, 10)]
ZERO = "0x" + "0" * 40

CRITERIA = [
    ("market_share", ["I11", "I12", "I13", "I14"]),
    ("valuation", ["I21", "I22", "I23"]),
    ("decentralization", ["I31", "I32", "I33"]),
]
CODES = [c for _, codes in CRITERIA for c in codes]


def load_csv(name):
    with open(name, newline="") as f:
        return list(csv.DictReader(f))


registry = {r["protocol"]: r for r in load_csv("registry.csv")}
classes = {r["address"]: r["kind"] for r in load_csv("classifications.csv")}
metrics = {}
for r in load_csv("metrics.csv"):
    metrics.setdefault((r["protocol"], r["metric"]), {})[date.fromisoformat(r["date"])] = float(r["value"])
transfers = {p: load_csv(f"transfers_{p}.csv") for p in registry}


def carried(protocol, metric, t):
    pts = metrics.get((protocol, metric), {})
    best = None
    for d in pts:
        if d <= t and (best is None or d > best):
            best = d
    if best is None or (t - best).days > STALE:
        return None
    return pts[best]


def annualized_revenue(protocol, t):
    pts = metrics.get((protocol, "revenue"), {})
    window = [d for d in pts if t - timedelta(days=365) < d <= t]
    if not window:
        return None
    total = sum(pts[d] for d in window)
    days = (t - min(window)).days + 1
    return total if days >= 365 else total * 365.0 / days


def ratio(a, b):
    if a is None or b is None or b <= 0:
        return None
    return a / b


def holders_at(protocol, t):
    cutoff = int(datetime(t.year, t.month, t.day, tzinfo=timezone.utc).timestamp()) + 86400 - 1
    bal = {}
    rows = sorted(transfers[protocol], key=lambda r: (int(r["block"]), int(r["log_index"])))
    for r in rows:
        if int(r["timestamp"]) > cutoff:
            continue
        amt = int(r["amount"])
        if r["from"] != ZERO:
            bal[r["from"]] -= amt
            assert bal[r["from"]] >= 0
        if r["to"] != ZERO:
            bal[r["to"]] = bal.get(r["to"], 0) + amt
    price = carried(protocol, "price", t)
    decimals = int(registry[protocol]["decimals"])
    kept = []
    for addr, b in bal.items():
        if b == 0 or classes.get(addr) in ("exchange", "contract"):
            continue
        if price is not None and b / 10**decimals * price < DUST_USD:
            continue
        kept.append(b)
    return kept


def gini(b):
    n = len(b)
    mean = sum(b) / n
    return sum(abs(x - y) for x in b for y in b) / (2 * n * n * mean)


def nakamoto(b):
    total = sum(b)
    acc = 0
    for k, x in enumerate(sorted(b, reverse=True), 1):
        acc += x
        if 2 * acc > total:
            return k


def top10(b):
    return sum(sorted(b, reverse=True)[:10]) / sum(b)


def eigen_weights(m):
    vals, vecs = np.linalg.eig(np.array(m, dtype=float))
    i = int(np.argmax(vals.real))
    v = np.abs(vecs[:, i].real)
    return list(v / v.sum())


def user_weights(w):
    return eigen_weights([[a / b for b in w] for a in w])


def raw_row(p, t):
    v = lambda m: carried(p, m, t)
    mcap, revenue, tvl = v("mcap"), v("revenue"), v("tvl")
    row = {
        "I11": mcap,
        "I12": v("borrow"),
        "I13": revenue,
        "I14": v("volume"),
        "I21": ratio(v("fdv"), annualized_revenue(p, t) if revenue is not None else None),
        "I22": ratio(tvl, revenue),
        "I23": ratio(mcap, tvl),
    }
    b = holders_at(p, t)
    row["I31"] = gini(b)
    row["I32"] = float(nakamoto(b))
    row["I33"] = top10(b)
    return row


def adjust(code, x):
    if x is None:
        return None
    if code in ("I31", "I33"):
        return 1.0 - x
    if code == "I22":
        return 1.0 / max(x, EPS)
    return x


def evaluate(t, criterion_user_weights):
    protocols = sorted(registry)
    raw = {p: raw_row(p, t) for p in protocols}
    adj = {p: {c: adjust(c, raw[p][c]) for c in CODES} for p in protocols}
    x = {p: {} for p in protocols}
    for c in CODES:
        present = [p for p in protocols if adj[p][c] is not None]
        total = sum(max(adj[p][c], EPS) for p in present)
        for p in protocols:
            x[p][c] = max(adj[p][c], EPS) / total if adj[p][c] is not None else None
    wc = user_weights(criterion_user_weights)
    wi = {name: user_weights([1.0] * len(codes)) for name, codes in CRITERIA}
    out = []
    for p in protocols:
        cs = {}
        for name, codes in CRITERIA:
            cs[name] = sum(w * (x[p][c] or 0.0) for w, c in zip(wi[name], codes))
        score = sum(w * cs[name] for w, (name, _) in zip(wc, CRITERIA))
        out.append({"protocol": p, "raw": raw[p], "x": x[p], "criteria": cs, "score": score})
    order = sorted(out, key=lambda r: (-r["score"], r["protocol"]))
    for rank, r in enumerate(order, 1):
        r["rank"] = rank
    return out


def main():
    expected = {
        "dates": [d.isoformat() for d in DATES],
        "baseline": {d.isoformat(): evaluate(d, [1.0, 1.0, 1.0]) for d in DATES},
        "decentralization_doubled": {d.isoformat(): evaluate(d, [1.0, 1.0, 2.0]) for d in DATES},
    }
    with open("expected.json", "w") as f:
        json.dump(expected, f, indent=1, sort_keys=True)
        f.write("\n")
    for key in ("baseline", "decentralization_doubled"):
        for d, rows in expected[key].items():
            print(key, d, [(r["protocol"], round(r["score"], 6), r["rank"]) for r in rows])


if __name__ == "__main__":
    main()
