#!/usr/bin/env python3
"""Writes the bundled synthetic corpus to data/synthetic/.

Five users with hand-shaped latent severity curves. Posts are assembled from
topic phrases whose tone follows the latent level; annotations are soft
distributions centred on the same level. Output is byte-identical for a
given --seed.
"""

import argparse
import datetime as dt
import json
import math
import pathlib
import random

TOPICS = {
    "music": ["listened to that metal album again", "went to a small gig downtown", "learning a new riff on guitar"],
    "sleep": ["barely slept last night", "woke up at four and stayed up", "slept a full night for once"],
    "work": ["shift ran late again", "my manager noticed the missed deadline", "finished the project at the office"],
    "family": ["called my sister", "dinner with my parents", "my brother visited for the weekend"],
    "nature": ["walked in the forest behind the house", "thinking about a cabin in the woods", "went hiking by the lake"],
    "gaming": ["played co-op with friends online", "stuck on the same level all night", "bought a new strategy game"],
    "friends": ["friends invited me out", "cancelled plans with friends again", "a friend checked in on me"],
    "school": ["exam week is coming", "skipped lectures today", "handed in the thesis chapter"],
    "cooking": ["tried a new pasta recipe", "only ate cereal today", "baked bread from scratch"],
    "pets": ["the dog needed a long walk", "my cat sat with me all evening", "took the dog to the vet"],
    "exercise": ["went for a run", "skipped the gym for a week", "started yoga in the mornings"],
    "therapy": ["had a session with my therapist", "thinking about finding a counsellor", "talked about coping skills"],
    "weather": ["grey rain all week", "first sunny day in ages", "snow again this morning"],
    "reading": ["reading a long fantasy series", "could not focus on a single page", "finished a book on a train"],
    "travel": ["planning a trip to the coast", "cancelled the trip", "back from visiting an old friend"],
    "art": ["sketched for an hour", "painted the view from the window", "sold a small drawing online"],
}

TONE = [
    ["feeling okay about it", "it was a good day", "honestly pretty content", "small things feel nice"],
    ["a bit tired of everything", "not sure how i feel", "it is hard to get started", "kind of flat lately"],
    ["i feel empty and hopeless", "nothing matters anymore", "i cannot stop crying", "everything feels heavy and pointless"],
]


def curve(points):
    """Piecewise-linear latent level from (day offset, level) vertices."""

    def at(day):
        for (d0, v0), (d1, v1) in zip(points, points[1:]):
            if d0 <= day <= d1:
                return v0 + (v1 - v0) * (day - d0) / max(d1 - d0, 1)
        return points[-1][1]

    at.vertices = [d for d, _ in points]
    return at


USERS = [
    # Long history with relapses.
    ("s2714", dt.date(2013, 9, 23), dt.date(2017, 5, 4), 3.0,
     ["music", "nature", "sleep", "work", "friends", "family", "gaming", "therapy", "reading",
      "weather", "cooking", "pets", "exercise", "travel", "art"],
     curve([(0, 0.8), (452, 1.7), (560, 1.0), (640, 1.5), (700, 0.6), (800, 1.3), (900, 1.9),
            (1000, 0.9), (1100, 1.4), (1200, 0.5), (1319, 0.4)])),
    # A localized episode between calmer periods.
    ("s9280", dt.date(2016, 1, 10), dt.date(2017, 3, 1), 2.5,
     ["school", "friends", "sleep", "gaming", "family", "exercise", "music", "cooking",
      "reading", "weather", "travel", "pets", "therapy", "art", "work"],
     curve([(0, 0.3), (150, 0.4), (220, 1.9), (290, 0.5), (416, 0.3)])),
    # Smooth, regular drift.
    ("s1257", dt.date(2015, 3, 1), dt.date(2016, 9, 30), 3.5,
     ["work", "cooking", "reading", "exercise", "family", "weather", "pets", "music",
      "travel", "friends", "sleep", "art", "gaming", "nature", "school"],
     curve([(0, 1.4), (579, 0.5)])),
    # Pronounced opening phase, then a long low plateau.
    ("s3307", dt.date(2014, 6, 1), dt.date(2016, 6, 1), 4.0,
     ["therapy", "sleep", "family", "work", "friends", "music", "art", "weather",
      "pets", "nature", "reading", "cooking", "exercise", "travel", "gaming"],
     curve([(0, 1.9), (120, 1.6), (200, 0.3), (731, 0.2)])),
    # Twenty consecutive days of activity.
    ("s0420", dt.date(2018, 2, 1), dt.date(2018, 2, 20), 1.0,
     ["school", "sleep", "friends", "gaming", "music", "family", "exercise", "cooking",
      "weather", "reading", "pets", "travel", "art", "work", "therapy"],
     curve([(0, 0.2), (10, 1.8), (19, 0.6)])),
]

CLASSES = ("no", "moderate", "severe")

# Annotation noise (std of the latent centre); the long history is kept clean.
NOISE = {"s2714": 0.05}


def distribution(level, rng, noise):
    centre = min(2.0, max(0.0, level + rng.gauss(0.0, noise)))
    weights = [math.exp(-((c - centre) ** 2) / 0.35) for c in range(3)]
    total = sum(weights)
    micro = [round(w / total * 1_000_000) for w in weights]
    micro[micro.index(max(micro))] += 1_000_000 - sum(micro)
    return {name: m / 1_000_000 for name, m in zip(CLASSES, micro)}


def post(level, topics, rng):
    topic = topics[min(int(rng.expovariate(0.25)), len(topics) - 1)]
    phrase = rng.choice(TOPICS[topic])
    tone = TONE[min(2, max(0, int(round(level + rng.gauss(0.0, 0.3)))))]
    text = f"{phrase}. {rng.choice(tone)}"
    if rng.random() < 0.35:
        text = text[0].upper() + text[1:]
    return topic, text


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "synthetic"))
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    events, annotations, assignments, user_topics, notes = [], [], [], [], []
    for user, start, end, gap, topics, level_at in USERS:
        user_topics.append({"user_id": user, "topics": topics})
        span = (end - start).days
        day = 0
        while day <= span:
            date = start + dt.timedelta(days=day)
            for _ in range(1 + (rng.random() < 0.2)):
                ts = dt.datetime.combine(date, dt.time()) + dt.timedelta(seconds=rng.randrange(6 * 3600, 86400))
                stamp = ts.strftime("%Y-%m-%dT%H:%M:%SZ")
                level = level_at(day)
                topic, text = post(level, topics, rng)
                events.append({"user_id": user, "timestamp": stamp, "source": "forum", "text": text})
                annotations.append({"user_id": user, "timestamp": stamp, "dimension": "depression",
                                    "probs": distribution(level, rng, NOISE.get(user, 0.25))})
                annotations.append({"user_id": user, "timestamp": stamp, "dimension": "anxiety",
                                    "probs": dict(zip(("no", "anxiety"), (0.5, 0.5)))})
                assignments.append({"user_id": user, "timestamp": stamp, "topics": [topic]})
            if day == span:
                break
            step = max(1, round(rng.expovariate(1.0 / gap))) if gap > 1 else 1
            # Vertex days always carry a post so the latent corners are observed.
            pinned = [v for v in level_at.vertices if day < v < day + step]
            day = min([span, day + step] + pinned)
        notes.append({"user_id": user, "key": f"note:{user}:intake", "date": start.isoformat(),
                      "text": "intake interview scheduled after first contact"})
        notes.append({"user_id": user, "key": f"note:{user}:followup",
                      "date": (start + dt.timedelta(days=span // 2)).isoformat(),
                      "text": "follow-up call, reports sleep problems and withdrawal from friends"})

    events.sort(key=lambda e: (e["timestamp"], e["user_id"]))

    def dump(name, rows):
        with open(out / name, "w", encoding="utf-8", newline="\n") as f:
            for r in rows:
                f.write(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n")

    dump("events.jsonl", events)
    dump("annotations.jsonl", annotations)
    dump("topics.jsonl", assignments)
    dump("user_topics.jsonl", user_topics)
    dump("notes.jsonl", notes)
    config = {
        "config_version": 1,
        "smoothing_window": 7,
        "k": 10,
        "classifier": {"kind": "precomputed", "annotations": "annotations.jsonl",
                       "dimensions": ["depression", "anxiety"]},
        "generator": {"kind": "template"},
        "variant": "full",
        "user_parallelism": 2,
    }
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
