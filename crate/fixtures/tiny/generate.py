"""Writes the hand-specified CSVs of the tiny fixture.

Run from this directory: python3 generate.py
"""
import csv
from datetime import datetime, timezone

E18 = 10**18
ZERO = "0x" + "0" * 40
BINANCE = "0xbe0eb53f46cd790cd13851d5eff43d12404d33e8"
VAULT = "0x00000000000000000000000000000000000c0de1"


def holder(n):
    return "0x" + f"{n:040x}"


def ts(day, hour=12):
    return int(datetime.strptime(day, "%Y-%m-%d").replace(hour=hour, tzinfo=timezone.utc).timestamp())


def tokens(x):
    # x may be fractional with at most 2 decimals
    return int(round(x * 100)) * E18 // 100


# (day, from, to, tokens)
TRANSFERS = {
    "aave": [
        ("2021-12-30", ZERO, holder(0xA1), 1000),
        ("2021-12-30", ZERO, holder(0xA2), 500),
        ("2021-12-30", ZERO, BINANCE, 300),
        ("2021-12-30", ZERO, VAULT, 200),
        ("2021-12-31", holder(0xA1), holder(0xA3), 100),
        ("2021-12-31", holder(0xA1), holder(0xA4), 50),
        ("2022-01-01", holder(0xA1), holder(0xA6), 0.01),
        ("2022-01-02", holder(0xA2), holder(0xA5), 120),
        ("2022-01-03", BINANCE, holder(0xA7), 40),
        ("2022-01-05", holder(0xA1), holder(0xA8), 200),
        ("2022-01-05", BINANCE, holder(0xA9), 100),
        ("2022-01-06", holder(0xA3), ZERO, 20),
        ("2022-01-06", holder(0xA2), holder(0xAA), 10),
        ("2022-01-06", holder(0xA2), holder(0xAB), 10),
        ("2022-01-07", holder(0xA2), holder(0xAC), 10),
        ("2022-01-07", holder(0xA2), holder(0xAD), 10),
        ("2022-01-08", holder(0xA2), holder(0xAE), 10),
        ("2022-01-08", holder(0xA2), holder(0xAF), 10),
        ("2022-01-09", holder(0xA5), holder(0xB0), 30),
        ("2022-01-11", holder(0xA1), holder(0xB1), 300),
    ],
    "compound": [
        ("2021-12-29", ZERO, holder(0xC1), 400),
        ("2021-12-29", ZERO, holder(0xC2), 400),
        ("2021-12-29", ZERO, holder(0xC3), 100),
        ("2021-12-29", ZERO, VAULT, 600),
        ("2021-12-30", holder(0xC1), holder(0xC4), 0.5),
        ("2022-01-02", holder(0xC3), holder(0xC5), 60),
        ("2022-01-04", VAULT, holder(0xC6), 300),
        ("2022-01-09", holder(0xC2), holder(0xC7), 150),
    ],
    "liquity": [
        ("2021-12-28", ZERO, holder(0xE1), 5000),
        ("2021-12-28", ZERO, holder(0xE2), 1000),
        ("2021-12-28", ZERO, holder(0xE3), 1000),
        ("2021-12-31", holder(0xE1), holder(0xE4), 500),
        ("2022-01-01", holder(0xE1), holder(0xE5), 2),
        ("2022-01-07", holder(0xE1), BINANCE, 2500),
        ("2022-01-08", BINANCE, holder(0xE6), 900),
        ("2022-01-08", BINANCE, holder(0xE7), 900),
    ],
}

# Point-in-time stocks: protocol -> metric -> [(date, value)].
STOCKS = {
    "aave": {
        "mcap": [("2022-01-01", 3.1e9), ("2022-01-08", 2.7e9)],
        "fdv": [("2022-01-01", 3.9e9), ("2022-01-08", 3.4e9)],
        "borrow": [("2022-01-01", 8.2e9), ("2022-01-08", 8.6e9)],
        "volume": [("2022-01-01", 2.4e8), ("2022-01-08", 3.1e8)],
        "tvl": [("2022-01-01", 1.42e10), ("2022-01-08", 1.35e10)],
        "price": [("2022-01-01", 250.0), ("2022-01-08", 205.0)],
    },
    "compound": {
        "mcap": [("2022-01-01", 1.4e9), ("2022-01-08", 1.25e9)],
        "fdv": [("2022-01-01", 2.2e9), ("2022-01-08", 1.95e9)],
        "borrow": [("2021-12-20", 3.9e9), ("2022-01-08", 4.1e9)],
        "volume": [("2022-01-01", 1.1e8), ("2022-01-08", 0.9e8)],
        "tvl": [("2022-01-01", 1.05e10), ("2022-01-08", 1.08e10)],
    },
    "liquity": {
        "mcap": [("2022-01-01", 4.5e8), ("2022-01-08", 3.2e8)],
        "fdv": [("2022-01-08", 1.1e9)],
        "borrow": [("2022-01-01", 9.0e8), ("2022-01-08", 7.5e8)],
        "tvl": [("2022-01-01", 3.6e9), ("2022-01-08", 3.1e9)],
        "price": [("2022-01-01", 4.0), ("2022-01-08", 3.2)],
    },
}

# Daily revenue from 2021-12-28 through 2022-01-10.
REVENUE = {
    "aave": [410e3, 395e3, 402e3, 388e3, 430e3, 415e3, 420e3, 398e3, 405e3, 390e3, 385e3, 410e3, 399e3, 401e3],
    "compound": [150e3, 160e3, 155e3, 149e3, 151e3, 162e3, 158e3, 147e3, 153e3, 150e3, 149e3, 151e3, 152e3, 150e3],
    "liquity": [30e3, 28e3, 35e3, 31e3, 29e3, 33e3, 30e3, 27e3, 26e3, 32e3, 30e3, 29e3, 31e3, 28e3],
}


def main():
    with open("registry.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["protocol", "token", "genesis_date", "decimals"])
        w.writerow(["aave", "AAVE", "2020-10-02", 18])
        w.writerow(["compound", "COMP", "2020-06-14", 18])
        w.writerow(["liquity", "LQTY", "2021-04-05", 18])

    with open("classifications.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["address", "kind", "label"])
        w.writerow([BINANCE, "exchange", "Binance 7 hot wallet"])
        w.writerow([VAULT, "contract", "fixture vault"])

    for protocol, events in TRANSFERS.items():
        with open(f"transfers_{protocol}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["block", "log_index", "timestamp", "from", "to", "amount"])
            per_day = {}
            for day, src, dst, amount in events:
                k = per_day.get(day, 0)
                per_day[day] = k + 1
                block = 13_900_000 + int(ts(day)) // 86400 * 10 % 100_000 + k
                w.writerow([block, k, ts(day) + 60 * k, src, dst, tokens(amount)])

    rows = []
    for protocol, metrics in STOCKS.items():
        for metric, points in metrics.items():
            for day, value in points:
                rows.append((day, protocol, metric, value))
    for protocol, values in REVENUE.items():
        for i, value in enumerate(values):
            day = datetime.fromordinal(datetime(2021, 12, 28).toordinal() + i).strftime("%Y-%m-%d")
            rows.append((day, protocol, "revenue", value))
    with open("metrics.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "protocol", "metric", "value"])
        for day, protocol, metric, value in rows:
            w.writerow([day, protocol, metric, repr(float(value))])


if __name__ == "__main__":
    main()
