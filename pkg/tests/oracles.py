"""Independent brute-force reference implementations used by the tests.

These stay deliberately dumb and separate from the production code paths
they check: a from-scratch ballot counter, a straight-line clarification
simulator, and a textbook mean/SEM.
"""

from __future__ import annotations

import math
from collections import deque


def brute_force_votes(ballots):
    """Recount a memory's ballots from scratch.

    ballots: list of candidate lists [(step, confidence), ...] in rank
    order. Returns up to three (step, aggregated_confidence) tuples:
    rank r is elected by every ballot's rank-r candidate, skipping steps
    already elected; an empty or fully excluded pool falls back to the
    nearest lower rank's leftover votes. A winner's confidence is the sum
    of its votes' confidences divided by the size of the pool it was
    elected from.
    """
    pools = [[], [], []]
    for ballot in ballots:
        for rank, (step, conf) in enumerate(ballot[:3]):
            pools[rank].append((step, conf))
    elected = []
    taken = set()
    for rank in range(3):
        winner = None
        for q in range(rank, -1, -1):
            pool = pools[q]
            tally = {}
            for step, conf in pool:
                if step in taken:
                    continue
                count, total = tally.get(step, (0, 0.0))
                tally[step] = (count + 1, total + conf)
            if not tally:
                continue
            best = None
            best_key = None
            for step, (count, total) in tally.items():
                key = (count, total, -step)
                if best_key is None or key > best_key:
                    best, best_key = step, key
            winner = (best, tally[best][1] / len(pool))
            break
        if winner is None:
            break
        elected.append(winner)
        taken.add(winner[0])
    return elected


def _monotone_unit(steps):
    return all(0 <= b - a <= 1 for a, b in zip(steps, steps[1:]))


def simulate_session(table, truth_steps, memory_update, prediction, threshold, answer_policy="oracle"):
    """Straight-line re-simulation of the guard and clarification rules.

    table: frame_index -> candidate tuples as dicts ({"step","confidence"}).
    Returns (query_frame_indices, accepted_per_frame).
    """
    capacity = math.ceil(prediction / memory_update)
    window = deque(maxlen=capacity)  # ballots or None after a clarification
    prev = 0
    pending = False
    record_steps = []
    queries = []
    accepted_per_frame = []
    for j in range(len(truth_steps)):
        i = j + 1
        if i % memory_update == 0:
            ballots = [(int(c["step"]), float(c["confidence"])) for c in table[j]]
            window.append(ballots)
        if i % prediction == 0 and not pending and any(b is not None for b in window):
            elected = brute_force_votes([b for b in window if b is not None])
            top_step, top_conf = elected[0]
            delta = top_step - prev
            if delta in (0, 1) and top_conf >= threshold:
                prev = top_step
                record_steps.append(top_step)
            elif delta in (0, 1) and _monotone_unit(record_steps):
                prev = top_step  # auto-accepted, below threshold: not logged
            else:
                queries.append(j)
                pending = True
                if answer_policy == "oracle" and truth_steps[j] >= 1:
                    prev = truth_steps[j]
                    record_steps.append(prev)
                    pending = False
                    for k in range(len(window)):
                        window[k] = None
        accepted_per_frame.append(prev)
    return queries, accepted_per_frame


def reference_mean_sem(scores):
    n = len(scores)
    mean = math.fsum(scores) / n
    if n == 1:
        return mean, 0.0
    variance = math.fsum((x - mean) ** 2 for x in scores) / (n - 1)
    return mean, math.sqrt(variance) / math.sqrt(n)
