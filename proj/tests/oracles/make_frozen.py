"""Independent reference values for the C++ tests.

Written against mpmath at 50 digits, with no shared code. Run once; the
output is committed as frozen.json and the tests read it.
"""
import itertools
import json
import random
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50

VOCAB, SEP, EOS, ORDER = 4, 2, 3, 2


def softmax(xs, tau=1):
    m = max(xs)
    e = [mp.e ** ((x - m) / tau) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def sequential_pair_probs(f, m):
    """P(unordered set) for m draws without replacement."""
    out = {}
    for order in itertools.permutations(range(len(f)), m):
        p, left = mp.mpf(1), mp.mpf(1)
        for i in order:
            p *= f[i] / left
            left -= f[i]
        key = ",".join(map(str, sorted(order)))
        out[key] = out.get(key, 0) + p
    return out


def make_policy(seed):
    rng = random.Random(seed)
    rows = {}
    for n in range(ORDER + 1):
        for ctx in itertools.product(range(VOCAB), repeat=n):
            rows[",".join(map(str, ctx))] = [round(rng.uniform(-3, 3), 6) for _ in range(VOCAB)]
    return rows


def probs(rows, context):
    key = ",".join(map(str, context[-ORDER:])) if context else ""
    return softmax([mp.mpf(x) for x in rows[key]])


def greedy_continuation(rows, context, max_tokens):
    out = []
    while len(out) < max_tokens:
        p = probs(rows, context + out)
        best = max(range(VOCAB), key=lambda t: (p[t], -t))
        out.append(best)
        if best == EOS:
            break
    return out


def logprob(rows, prefix, seq):
    total, ctx = mp.mpf(0), list(prefix)
    for t in seq:
        total += mp.log(probs(rows, ctx)[t])
        ctx.append(t)
    return total


def foresight(rows, prefix, step, max_tokens):
    cont = [] if step[-1] == EOS else greedy_continuation(rows, prefix + step, max_tokens)
    return logprob(rows, prefix, step + cont) / (len(step) + len(cont)), cont


def sigmoid(z):
    return 1 / (1 + mp.e ** (-z))


def softplus(x):
    return mp.log(1 + mp.e ** x)


def main():
    out = {}
    out["softmax_123"] = [float(v) for v in softmax([1, 2, 3])]
    out["softmax_ln2_0"] = [float(v) for v in softmax([mp.log(2), 0])]
    pairs = sequential_pair_probs([mp.mpf("0.7"), mp.mpf("0.2"), mp.mpf("0.1")], 2)
    out["without_replacement_pairs"] = {k: float(v) for k, v in sorted(pairs.items())}
    out["categorical_052"] = [0.5, 0.3, 0.2]

    out["aco_loss"] = [
        {"beta": 1, "lr_w": 1, "lr_l": 0, "adv_w": 0, "adv_l": 0, "alpha": 1,
         "loss": float(softplus(-1))},
        {"beta": 1, "lr_w": 0, "lr_l": 2, "adv_w": 0, "adv_l": mp.log(2), "alpha": 1,
         "loss": float(softplus(1))},
        {"beta": 0.5, "lr_w": 0.3, "lr_l": -0.7, "adv_w": 0.1, "adv_l": 0.9, "alpha": 2,
         "loss": float(softplus(-(mp.mpf("0.5") * mp.mpf("0.3")
                                  - mp.mpf("0.5") * mp.e ** (-(mp.mpf("0.8")) / 2) * mp.mpf("-0.7"))))},
    ]
    for r in out["aco_loss"]:
        r["adv_l"] = float(r["adv_l"])
    out["calibration_e_inv"] = float(mp.e ** -1)
    out["ropo_z0_g1_e1"] = float(mp.log(2) + mp.mpf("0.5"))
    z = mp.mpf("0.37")
    out["cdpo_eps02_z037"] = {"loss": float(mp.mpf("0.8") * softplus(-z) + mp.mpf("0.2") * softplus(z)),
                               "dloss_dz": float(-(mp.mpf("0.8") - sigmoid(z)))}
    out["ropo_g12_e07_z037"] = {"loss": float(mp.mpf("1.2") * softplus(-z) + mp.mpf("0.7") * sigmoid(z)),
                                 "dloss_dz": float(-(mp.mpf("1.2") - mp.mpf("0.7") * sigmoid(z)) * (1 - sigmoid(z)))}

    rows = make_policy(20251015)
    cases = []
    rng = random.Random(7)
    for _ in range(12):
        prefix = [rng.randrange(VOCAB - 1) for _ in range(rng.randint(1, 3))]
        step = [rng.randrange(VOCAB) for _ in range(rng.randint(1, 3))]
        max_tokens = rng.randint(1, 6)
        score, cont = foresight(rows, prefix, step, max_tokens)
        cases.append({"prefix": prefix, "step": step, "max_tokens": max_tokens,
                      "continuation": cont, "fscore": float(score)})
    scores = [mp.mpf(c["fscore"]) for c in cases[:4]]
    out["policy"] = {"vocab": VOCAB, "sep": SEP, "eos": EOS, "order": ORDER, "rows": rows}
    out["foresight_cases"] = cases
    out["foresight_distribution_tau05"] = [float(v) for v in softmax(scores, mp.mpf("0.5"))]
    rollouts = []
    for prefix in ([0], [1, 0], [0, 2], [2, 1, 1]):
        scores_by_token = [float(foresight(rows, prefix, [t], 6)[0]) for t in range(VOCAB)]
        rollouts.append({"prefix": prefix, "max_tokens": 6, "fscore_by_first_token": scores_by_token})
    out["greedy_rollouts"] = rollouts
    seq_prefix, seq = [0, 1], [2, 0, 3, 1, 3]
    out["sequence_logprob"] = {"prefix": seq_prefix, "seq": seq, "value": float(logprob(rows, seq_prefix, seq))}

    Path(__file__).with_name("frozen.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
