#!/usr/bin/env python3
# Copyright 2026 The PriorSeq Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Writes metric fixtures scored by third-party reference implementations.

BLEU comes from nltk, ROUGE-L and CIDEr-D from pycocoevalcap. Plain CIDEr
(no clipping, no length penalty) has no packaged scorer and is computed here
from the same tf-idf definition.

    python3 tests/oracles/reference_scorer.py tests/fixtures
"""

import collections
import json
import math
import os
import random
import sys

from nltk.translate.bleu_score import SmoothingFunction, corpus_bleu, sentence_bleu
from pycocoevalcap.cider.cider import Cider
from pycocoevalcap.rouge.rouge import Rouge

LEXICON = ["with a", "on a", "of a", "in a", "and a"]

SUBJECTS = ["a man", "a woman", "a dog", "a cat", "two people", "a child",
            "a group of people", "a young boy", "an old man", "a girl"]
VERBS = ["riding", "holding", "sitting on", "standing next to", "walking with",
         "looking at", "playing with", "eating"]
OBJECTS = ["a horse", "a bike", "a surfboard", "a bench", "a frisbee",
           "a pizza", "a kite", "an umbrella", "a skateboard", "a laptop"]
PLACES = ["on a beach", "in a park", "on a street", "in a kitchen",
          "near the water", "in the snow", "at a table", "in a field"]
EXTRAS = ["with a hat", "with a red shirt", "in the sun", "at night",
          "with a friend", ""]


def scene_caption(rng, s, v, o, p):
    words = [s, v, o, p]
    extra = rng.choice(EXTRAS)
    if extra and rng.random() < 0.5:
        words.append(extra)
    if rng.random() < 0.2:
        words.insert(0, rng.choice(["there is", "this is"]))
    return " ".join(words)


def make_corpus(seed=2026, n=50):
    rng = random.Random(seed)
    items = []
    for i in range(n):
        s, v, o, p = (rng.choice(SUBJECTS), rng.choice(VERBS),
                      rng.choice(OBJECTS), rng.choice(PLACES))
        refs = []
        for _ in range(rng.randint(3, 5)):
            rs = s if rng.random() < 0.7 else rng.choice(SUBJECTS)
            rp = p if rng.random() < 0.7 else rng.choice(PLACES)
            refs.append(scene_caption(rng, rs, v, o, rp))
        kind = rng.random()
        if kind < 0.3:
            cand = " ".join([s, v, o]) + " " + rng.choice(LEXICON)
        elif kind < 0.4:
            cand = " ".join([s, v, o, p]) + " with a with a"
        elif kind < 0.75:
            cand = " ".join([s, v, rng.choice(OBJECTS), p])
        elif kind < 0.9:
            cand = " ".join([rng.choice(SUBJECTS), v, o])
        else:
            cand = rng.choice(["a picture", "food", "a man riding a horse"])
        items.append({"id": "m%03d" % i, "candidate": cand, "refs": refs})
    return items


def ngrams(words, n):
    return collections.Counter(tuple(words[i:i + n])
                               for i in range(len(words) - n + 1))


def plain_cider(items_cands, items_refs):
    """tf-idf cosine over n = 1..4, averaged over n and references, x10."""
    n_items = len(items_refs)
    log_n = math.log(float(n_items))
    df = collections.Counter()
    for refs in items_refs:
        seen = set()
        for r in refs:
            for k in range(1, 5):
                seen.update(ngrams(r, k).keys())
        df.update(seen)

    def vec(words):
        out = []
        for k in range(1, 5):
            out.append({g: c * (log_n - math.log(max(1.0, df[g])))
                        for g, c in ngrams(words, k).items()})
        return out

    def norm(v):
        return math.sqrt(sum(x * x for x in v.values()))

    scores = []
    for cand, refs in zip(items_cands, items_refs):
        vc = vec(cand)
        total = 0.0
        for r in refs:
            vr = vec(r)
            per_n = []
            for k in range(4):
                dot = sum(w * vr[k].get(g, 0.0) for g, w in vc[k].items())
                nc, nr = norm(vc[k]), norm(vr[k])
                per_n.append(dot / (nc * nr) if nc and nr else 0.0)
            total += sum(per_n) / 4.0
        scores.append(10.0 * total / len(refs))
    return scores


def bad_ending(words):
    best = ""
    for phrase in LEXICON:
        p = phrase.split()
        if len(words) >= len(p) and words[-len(p):] == p:
            if len(p) > len(best.split()):
                best = phrase
    return best


def strip(words):
    words = list(words)
    while True:
        b = bad_ending(words)
        if not b:
            return words
        words = words[:-len(b.split())]


def score_set(cands, refs):
    """Corpus and per-item scores; cands and refs are word lists."""
    method2 = SmoothingFunction().method2
    gts = {i: [" ".join(r) for r in rs] for i, rs in enumerate(refs)}
    res = {i: [" ".join(c)] for i, c in enumerate(cands)}
    rouge = [Rouge().calc_score(res[i], gts[i]) if cands[i] else 0.0
             for i in range(len(cands))]
    _, cider_d = Cider().compute_score(gts, res)
    cider = plain_cider(cands, refs)
    bleu_items = [sentence_bleu(r, c, smoothing_function=method2) if c else 0.0
                  for c, r in zip(cands, refs)]
    return {
        "bleu4": corpus_bleu(refs, cands),
        "rouge_l": sum(rouge) / len(rouge),
        "cider": sum(cider) / len(cider),
        "cider_d": float(sum(cider_d)) / len(cider_d),
        "items": {"bleu4": bleu_items, "rouge_l": rouge,
                  "cider": cider, "cider_d": [float(x) for x in cider_d]},
    }


def round6(x):
    v = x * 1e6
    return math.copysign(math.floor(abs(v) + 0.5), v) / 1e6


def score_report(items):
    cands = [it["candidate"].split() for it in items]
    refs = [[r.split() for r in it["refs"]] for it in items]
    raw = score_set(cands, refs)
    stripped = [strip(c) for c in cands]
    adj = score_set(stripped, refs)
    flagged = [bad_ending(c) for c in cands]
    hist = collections.Counter(b for b in flagged if b)
    report = collections.OrderedDict()
    report["metric_version"] = "priorseq-metrics/1"
    report["rouge_beta"] = 1.2
    report["cider_d_sigma"] = 6.0
    report["bleu"] = "corpus BLEU-4, closest reference length, unsmoothed"
    report["items"] = len(items)
    report["references"] = sum(len(r) for r in refs)
    for key in ("bleu4", "rouge_l", "cider", "cider_d"):
        report[key] = round6(raw[key])
    report["bad_end_rate"] = round6(sum(1 for b in flagged if b) / len(items))
    report["bad_end_histogram"] = collections.OrderedDict(sorted(hist.items()))
    a = collections.OrderedDict()
    for key in ("bleu4", "rouge_l", "cider", "cider_d"):
        a[key] = round6(adj[key])
    a["bad_end_rate"] = round6(
        sum(1 for c in stripped if bad_ending(c)) / len(items))
    report["adjusted"] = a
    rows = []
    for i, it in enumerate(items):
        row = collections.OrderedDict()
        row["id"] = it["id"]
        row["caption"] = " ".join(cands[i])
        for key in ("bleu4", "rouge_l", "cider", "cider_d"):
            row[key] = round6(raw["items"][key][i])
        row["bad_ending"] = flagged[i]
        rows.append(row)
    report["per_item"] = rows
    return report, raw, adj


def figure1():
    """A caption that gains CIDEr by appending a dangling phrase."""
    refs = ["a man with a hat riding a horse on the beach",
            "a man riding a brown horse with a saddle",
            "a person with a cowboy hat on a horse",
            "a man on a horse with a dog on the sand"]
    cand = "a man riding a horse on the beach"
    gts = {0: refs, 1: ["a plate of food on a table", "a bowl of soup"],
           2: ["a cat sleeping on a couch", "a small cat on a sofa"]}
    out = {"refs": refs, "plain": cand, "dangling": cand + " with a"}
    for key in ("plain", "dangling"):
        res = {0: [out[key]], 1: ["a plate of food"], 2: ["a cat on a couch"]}
        _, s = Cider().compute_score(gts, res)
        out["cider_d_" + key] = float(s[0])
        cands = [out[key].split(), "a plate of food".split(),
                 "a cat on a couch".split()]
        allrefs = [[r.split() for r in gts[i]] for i in range(3)]
        out["cider_" + key] = plain_cider(cands, allrefs)[0]
        out["bleu4_" + key] = sentence_bleu(
            [r.split() for r in refs], out[key].split(),
            smoothing_function=SmoothingFunction().method2)
    out["context"] = [{"refs": gts[1], "candidate": "a plate of food"},
                      {"refs": gts[2], "candidate": "a cat on a couch"}]
    assert out["cider_d_dangling"] > out["cider_d_plain"]
    assert out["cider_dangling"] > out["cider_plain"]
    return out


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    items = make_corpus()
    with open(os.path.join(out_dir, "metric_corpus.jsonl"), "w") as f:
        for it in items:
            f.write(json.dumps(it) + "\n")
    report, raw, adj = score_report(items)
    expected = {"corpus": {k: raw[k] for k in ("bleu4", "rouge_l", "cider",
                                               "cider_d")},
                "adjusted": {k: adj[k] for k in ("bleu4", "rouge_l", "cider",
                                                 "cider_d")},
                "items": raw["items"],
                "adjusted_items": adj["items"]}
    with open(os.path.join(out_dir, "metric_expected.json"), "w") as f:
        json.dump(expected, f, indent=1)
        f.write("\n")
    # Inputs and golden output for the score command.
    with open(os.path.join(out_dir, "score_captions.jsonl"), "w") as f:
        for it in items:
            f.write(json.dumps({"id": it["id"], "split": "test",
                                "refs": it["refs"]}) + "\n")
    with open(os.path.join(out_dir, "score_predictions.jsonl"), "w") as f:
        for it in items:
            f.write(json.dumps({"id": it["id"],
                                "caption": it["candidate"]}) + "\n")
    with open(os.path.join(out_dir, "score_report.json"), "w") as f:
        f.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    with open(os.path.join(out_dir, "figure1.json"), "w") as f:
        json.dump(figure1(), f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
