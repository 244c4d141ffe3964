"""Regenerate the bundled 50-user / 200-item fixture in ./small.

The script also writes small/expected.json with counts computed here, from
the generating structures, so the Rust pipeline can be checked against them.
"""

import csv
import json
import math
import random
from pathlib import Path

SEED = 20240611
N_USERS = 50
N_WORKS = 200
OUT = Path(__file__).parent / "small"

FIRST = ["Ada", "Ben", "Cora", "Dev", "Edith", "Farid", "Greta", "Hugo", "Iris", "Jonas",
         "Kira", "Leon", "Mira", "Nils", "Olga", "Pavel", "Rosa", "Sami", "Tove", "Umar"]
LAST = ["Abbott", "Baines", "Calder", "Dunmore", "Ellery", "Fenwick", "Garland", "Hollis",
        "Ingram", "Jessop", "Kellner", "Lowry", "Marsh", "Norcott", "Oakes", "Penrose",
        "Quill", "Redfern", "Sterne", "Thorne", "Upton", "Vance", "Whitlow", "Yarrow", "Zeller"]


def isbn10(n):
    body = f"{n:09d}"
    check = sum((10 - i) * int(d) for i, d in enumerate(body)) % 11
    check = (11 - check) % 11
    return body + ("X" if check == 10 else str(check))


def isbn13(n):
    body = f"978{n:09d}"
    check = (10 - sum((3 if i % 2 else 1) * int(d) for i, d in enumerate(body)) % 10) % 10
    return body + str(check)


def hyphenate(isbn):
    if len(isbn) == 10:
        return f"{isbn[0]}-{isbn[1:4]}-{isbn[4:9]}-{isbn[9]}"
    return f"{isbn[:3]}-{isbn[3]}-{isbn[4:7]}-{isbn[7:12]}-{isbn[12]}"


def main():
    rng = random.Random(SEED)
    OUT.mkdir(exist_ok=True)

    # Authors: 90 with a single authority, 3 ambiguous (two authorities each,
    # female and male), 4 unknown, 8 without any authority.
    names = [f"{FIRST[i % 20]} {LAST[(i // 20 + 7 * (i % 20)) % 25]}" for i in range(105)]
    assert len(set(names)) == len(names)
    kinds = ["female"] * 40 + ["male"] * 50 + ["ambiguous"] * 3 + ["unknown"] * 4 + ["none"] * 8
    authorities = []
    author_gender = {}
    for i, (name, kind) in enumerate(zip(names, kinds)):
        first, last = name.split(" ")
        if kind in ("female", "male"):
            authorities.append({"authority_id": f"a{i:03d}", "names": [f"{last}, {first}", name.upper()], "genders": [kind]})
        elif kind == "ambiguous":
            authorities.append({"authority_id": f"a{i:03d}", "names": [f"{last}, {first}"], "genders": ["female"]})
            authorities.append({"authority_id": f"a{i:03d}b", "names": [name], "genders": ["male", "unknown"]})
        elif kind == "unknown":
            authorities.append({"authority_id": f"a{i:03d}", "names": [f"{last}, {first}"], "genders": ["unknown"]})
        author_gender[name] = {"none": "unlinked"}.get(kind, kind)

    # Works: author assignment, one or two editions each.
    records = []
    work_isbns = []
    work_gender = []
    for w in range(N_WORKS):
        author = names[w % len(names)] if w < 105 else names[rng.randrange(len(names))]
        no_author = w % 37 == 36
        base = 306000000 + w * 7919
        editions = [isbn10(base)]
        fields = [rng.choice([editions[0], hyphenate(editions[0]), f"{editions[0]} (pbk.)", f"ISBN {hyphenate(editions[0])} : $12.95"])]
        work_id = None
        if w % 5 == 0:
            editions.append(isbn13(base + 1))
            work_id = f"OL{w}W"
        records.append({"record_id": f"loc{w:03d}", "source": "loc", "isbn_fields": fields, "work_id": work_id,
                        "authors": [] if no_author else [author]})
        if len(editions) == 2:
            records.append({"record_id": f"ol{w:03d}", "source": "ol",
                            "isbn_fields": [f"{hyphenate(editions[1])} (hardcover)"], "work_id": work_id,
                            "authors": [] if no_author else [author]})
        work_isbns.append(editions)
        work_gender.append("unlinked" if no_author else author_gender[author])

    by_gender = {}
    for w, g in enumerate(work_gender):
        by_gender.setdefault(g, []).append(w)
    pop = [1.0 / (1 + (w * 31) % N_WORKS) ** 0.6 for w in range(N_WORKS)]

    def pick(pool, taken):
        choices = [w for w in pool if w not in taken]
        return rng.choices(choices, weights=[pop[w] for w in choices])[0]

    rows = []
    pairs = {}
    for u in range(N_USERS):
        user = f"u{u:02d}"
        theta = 1 / (1 + math.exp(-rng.gauss(-0.5, 1.2)))
        known = rng.randint(15, 45)
        extra = rng.randint(0, 6)
        taken = set()
        for _ in range(known):
            pool = by_gender["female"] if rng.random() < theta else by_gender["male"]
            taken.add(pick(pool, taken))
        other = by_gender["unknown"] + by_gender["ambiguous"] + by_gender["unlinked"]
        for _ in range(extra):
            taken.add(pick(other, taken))
        for w in sorted(taken):
            ratings = [rng.randint(1, 5)]
            if rng.random() < 0.08:
                ratings.append(rng.randint(1, 5))
            for r in ratings:
                isbn = rng.choice(work_isbns[w])
                shown = hyphenate(isbn) if rng.random() < 0.3 else isbn
                ts = "" if rng.random() < 0.2 else str(1_500_000_000 + rng.randrange(10**7))
                rows.append([user, shown, str(r), ts])
            pairs[(user, w)] = ratings
    # A few rows that match no catalog ISBN.
    for k in range(5):
        rows.append([f"u{k:02d}", f"{isbn10(999000000 + k)}", "3", ""])
    rng.shuffle(rows)

    with open(OUT / "records.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    with open(OUT / "authorities.jsonl", "w") as f:
        for a in authorities:
            f.write(json.dumps(a) + "\n")
    with open(OUT / "interactions.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["user", "item", "rating", "timestamp"])
        w.writerows(rows)

    def item_id(w):
        return "it:" + min(work_isbns[w])

    profiles = {}
    for (user, w), ratings in pairs.items():
        g = work_gender[w]
        n, y = profiles.get(user, (0, 0))
        if g in ("female", "male"):
            profiles[user] = (n + 1, y + (g == "female"))
        else:
            profiles.setdefault(user, (0, 0))
    medians = {f"{u}|{item_id(w)}": sorted(r)[len(r) // 2] if len(r) % 2 else sum(sorted(r)) / 2
               for (u, w), r in pairs.items() if len(r) > 1}
    expected = {
        "seed": SEED,
        "users": N_USERS,
        "items": N_WORKS,
        "records": len(records),
        "raw_rows": len(rows),
        "unmapped_rows": 5,
        "interactions": len(pairs),
        "gender_counts": {g: len(ws) for g, ws in sorted(by_gender.items())},
        "profiles": {u: {"n": n, "y": y} for u, (n, y) in sorted(profiles.items())},
        "merged_ratings": dict(sorted(medians.items())),
    }
    with open(OUT / "expected.json", "w") as f:
        json.dump(expected, f, indent=1, sort_keys=True)
        f.write("\n")
    print(json.dumps({k: v for k, v in expected.items() if k not in ("profiles", "merged_ratings")}, indent=1))


if __name__ == "__main__":
    main()
