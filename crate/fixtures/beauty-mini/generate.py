#!/usr/bin/env python3
"""Regenerate the beauty-mini fixture corpus (deterministic).

Writes metadata.jsonl (~200 items) and reviews.jsonl (~1000 reviews) next to
this script. The corpus mimics the public Amazon dump shape: `asin`, `title`,
`brand`, `categories` (list of root-to-leaf paths), `description`, `price`,
`related`, and review records with `reviewerID`/`asin`/`reviewText`/`overall`.
"""

import json
import random
from pathlib import Path

SEED = 20250809
N_ITEMS = 200
N_REVIEWS = 1000
N_USERS = 150

LEAVES = [
    (["Beauty", "Skin Care", "Serum"], "Serum",
     ["Hydrating", "Plumping", "Brightening", "Firming", "Soothing"]),
    (["Beauty", "Skin Care", "Cleanser"], "Cleanser",
     ["Foaming", "Exfoliating", "Hydrating", "Purifying"]),
    (["Beauty", "Skin Care", "Moisturizer"], "Cream",
     ["Moisturizing", "Nourishing", "Mattifying"]),
    (["Beauty", "Skin Care", "Face Mask"], "Mask",
     ["Clarifying", "Hydrating", "Detoxifying"]),
    (["Beauty", "Hair Care", "Shampoo"], "Shampoo",
     ["Volumizing", "Strengthening", "Clarifying"]),
    (["Beauty", "Hair Care", "Conditioner"], "Conditioner",
     ["Smoothing", "Repairing", "Detangling"]),
    (["Beauty", "Makeup", "Lipstick"], "Lipstick",
     ["Longwearing", "Hydrating", "Plumping"]),
    (["Beauty", "Makeup", "Foundation"], "Foundation",
     ["Mattifying", "Illuminating", "Perfecting"]),
    (["Beauty", "Bath & Body", "Body Lotion"], "Lotion",
     ["Firming", "Soothing", "Nourishing"]),
    (["Beauty", "Bath & Body", "Soap"], "Soap",
     ["Exfoliating", "Moisturizing", "Calming"]),
]

PREFIXES = ["Ultra", "Mega", "Daily", "Gentle", "Pure", "Active", "Intense",
            "Classic", "Natural", "Botanical"]
MIDDLES = ["Face", "Night", "Silk", "Rose", "Aloe", "Citrus", "Herbal",
           "Collagen", "Vitamin", "Pearl"]
BRANDS = ["Glow Labs", "Pure Botanica", "L'Essence", "Velvet & Vine", "Derma Co",
          "Aria Beauty", "Solstice", "Petal Works", "Nordic Skin", "Lumin"]

DESCRIPTION_WORDS = [
    "vegan", "cruelty-free", "lightweight", "fragrance-free", "hydrating",
    "moisturizing", "moisturising", "long-lasting", "non-greasy", "gentle",
    "organic", "soothing", "nourishing", "fast-absorbing", "dermatologist-tested",
    "colour-safe", "color-safe", "paraben-free", "unscented", "silky",
]

REVIEW_SENTENCES = [
    "Leaves my skin feeling {w1} and {w2}",
    "Really {w1}, with a {w2} finish",
    "My favourite part is how {w1} it is",
    "Smells {w2} and feels {w1} all day",
    "A bit pricey but genuinely {w1}",
    "Not {w2} at all, just {w1}",
    "This is so {w1} that I bought two",
    "Works as promised, very {w1} and {w2}",
]

REVIEW_WORDS = [
    "hydrating", "moisturizing", "moisturising", "gentle", "greasy", "sticky",
    "lightweight", "creamy", "silky", "soothing", "refreshing", "fruity",
    "floral", "subtle", "overpowering", "lasting", "absorbent", "smooth",
    "drying", "calming", "luxurious", "affordable", "effective", "mild",
]


def main() -> None:
    rng = random.Random(SEED)
    out_dir = Path(__file__).parent

    items = []
    asins = [f"B{1000 + i}" for i in range(N_ITEMS)]
    for i, asin in enumerate(asins):
        path, noun, modifiers = LEAVES[i % len(LEAVES)]
        title = " ".join([
            rng.choice(PREFIXES),
            rng.choice(modifiers),
            rng.choice(MIDDLES),
            noun,
        ])
        item = {"asin": asin, "title": title}
        if rng.random() < 0.9:
            item["brand"] = rng.choice(BRANDS)
        if i % 37 == 0:
            item["categories"] = []  # exercises the uncategorized leaf
        elif i % 23 == 0:
            other = LEAVES[(i + 3) % len(LEAVES)][0]
            item["categories"] = [path, other]
        else:
            item["categories"] = [path]
        if rng.random() < 0.7:
            words = rng.sample(DESCRIPTION_WORDS, k=rng.randint(2, 5))
            item["description"] = (
                f"A {words[0]} {noun.lower()} that is " + " and ".join(words[1:]) + "."
            )
        if rng.random() < 0.6:
            item["price"] = round(rng.uniform(4.0, 60.0), 2)
        related = {}
        for kind in ("also_bought", "also_viewed", "bought_together"):
            if rng.random() < 0.5:
                targets = []
                for _ in range(rng.randint(1, 3)):
                    if rng.random() < 0.7:
                        targets.append(rng.choice(asins))
                    else:
                        targets.append(f"B9{rng.randint(100, 999)}")
                related[kind] = targets
        if related:
            item["related"] = related
        items.append(item)

    with open(out_dir / "metadata.jsonl", "w") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")

    users = [f"U{100 + i}" for i in range(N_USERS)]
    with open(out_dir / "reviews.jsonl", "w") as fh:
        for i in range(N_REVIEWS):
            user = rng.choice(users)
            asin = rng.choice(asins)
            if rng.random() < 0.03:
                text = ""  # purchase signal only
            else:
                w1, w2 = rng.sample(REVIEW_WORDS, k=2)
                n = rng.randint(1, 2)
                text = ". ".join(
                    rng.choice(REVIEW_SENTENCES).format(w1=w1, w2=w2)
                    for _ in range(n)
                )
            record = {
                "reviewerID": user,
                "asin": asin,
                "reviewText": text,
                "overall": rng.randint(1, 5),
                "unixReviewTime": 1_400_000_000 + i * 86_400,
            }
            fh.write(json.dumps(record) + "\n")

    print(f"wrote {len(items)} items, {N_REVIEWS} reviews")


if __name__ == "__main__":
    main()
