"""The two synthetic experiments: an arbitrarily large cross-entropy gap
between constrained decoding and constrained training, and a case where the
two regimens disagree on the MAP label sequence."""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .constrained import compile_language, constrained_viterbi
from .errors import RegCCRFError
from .train import DataDistribution, TrainConfig, run_regimens

logger = logging.getLogger(__name__)

GAP_LANGUAGE = "(ac)*|(bc)*"
GAP_LABELS = ("a", "b", "c")
MAP_LANGUAGE = "acd|bcd|bce"
MAP_LABELS = ("a", "b", "c", "d", "e")
MAP_STRINGS = ("acd", "bcd", "bce")


def gap_distribution(k: int) -> DataDistribution:
    x = ("o",) * (2 * k)
    return DataDistribution([(x, tuple("ac" * k), 0.75), (x, tuple("bc" * k), 0.25)])


def map_distribution() -> DataDistribution:
    x = ("o",) * 3
    return DataDistribution([(x, tuple(y), p) for y, p in zip(MAP_STRINGS, (0.4, 0.3, 0.3))])


def binary_entropy(p: float) -> float:
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def gap_reference(k: int) -> dict:
    """Closed forms: with per-position independence the unconstrained CRF puts
    0.75**k on (ac)^k and 0.25**k on (bc)^k, so constrained decoding gives
    (ac)^k probability 3^k / (3^k + 1)."""
    p_cd = 3.0**k / (3.0**k + 1.0)
    return {
        "p_cd_ref": p_cd,
        "p_ct_ref": 0.75,
        "h_cd_ref": -0.75 * math.log(p_cd) - 0.25 * math.log(1.0 - p_cd),
        "h_data": binary_entropy(0.75),
    }


def _gap_trial(args) -> dict:
    k, config = args
    ts = compile_language(GAP_LANGUAGE, GAP_LABELS)
    res = run_regimens(gap_distribution(k), ts, config)
    cd, ct = res["constrained_decoding"], res["constrained_training"]
    return {
        "p_cd": cd.per_string[0][1],
        "p_ct": ct.per_string[0][1],
        "h_u": res["unconstrained"].cross_entropy,
        "h_cd": cd.cross_entropy,
        "h_ct": ct.cross_entropy,
    }


def _summarize(trials: list, keys) -> dict:
    row = {}
    for key in keys:
        vals = [t[key] for t in trials]
        row[key] = statistics.fmean(vals)
        if len(vals) > 1:
            row[f"{key}_std"] = statistics.stdev(vals)
    return row


def arbitrary_gap(
    k_values=range(1, 11), config: TrainConfig | None = None, trials: int = 1, jobs: int = 1
) -> list:
    """One row per k with mean model values over ``trials`` seeds
    (``config.seed``, ``config.seed + 1``, ...) and the analytic references.

    Failures are reported in the row's ``error`` field rather than aborting.
    """
    config = config or TrainConfig()
    k_values = list(k_values)
    tasks = [(k, replace(config, seed=config.seed + j)) for k in k_values for j in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_safe, _gap_trial, task) for task in tasks]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_safe(_gap_trial, task) for task in tasks]
    rows = []
    for i, k in enumerate(k_values):
        chunk = outcomes[i * trials:(i + 1) * trials]
        errors = [o for o in chunk if isinstance(o, str)]
        row = {"k": k, "trials": trials}
        if errors:
            row["error"] = errors[0]
        else:
            row.update(_summarize(chunk, ("p_cd", "p_ct", "h_u", "h_cd", "h_ct")))
        row.update(gap_reference(k))
        rows.append(row)
    return rows


def _safe(fn, arg):
    try:
        return fn(arg)
    except RegCCRFError as exc:
        logger.error("trial %r failed: %s", arg[0], exc)
        return f"{type(exc).__name__}: {exc}"


def map_reference() -> dict:
    """Markov-factorized unconstrained optimum: prefix (a 0.4, b 0.6) times
    suffix (d 0.7, e 0.3), renormalized over the language."""
    u = {"acd": 0.4 * 0.7, "bcd": 0.6 * 0.7, "bce": 0.6 * 0.3}
    z = sum(u.values())
    return {y: u[y] / z for y in MAP_STRINGS}


def map_inference(config: TrainConfig | None = None, trials: int = 1) -> dict:
    """Table-shaped report: data, constrained-decoding and constrained-training
    probability per string, plus each regimen's MAP string (from the first trial)."""
    config = config or TrainConfig()
    ts = compile_language(MAP_LANGUAGE, MAP_LABELS)
    dist = map_distribution()
    per_trial = []
    maps = None
    for j in range(trials):
        res = run_regimens(dist, ts, replace(config, seed=config.seed + j))
        cd, ct = res["constrained_decoding"], res["constrained_training"]
        per_trial.append(
            {
                **{f"p_cd:{''.join(y)}": p for y, p in cd.per_string},
                **{f"p_ct:{''.join(y)}": p for y, p in ct.per_string},
                "h_u": res["unconstrained"].cross_entropy,
                "h_cd": cd.cross_entropy,
                "h_ct": ct.cross_entropy,
            }
        )
        if maps is None:
            maps = {
                "map_cd": "".join(constrained_viterbi(ts, cd.params, 3)),
                "map_ct": "".join(constrained_viterbi(ts, ct.params, 3)),
            }
    summary = _summarize(per_trial, per_trial[0].keys())
    ref = map_reference()
    rows = []
    for (x, y, p) in dist.support:
        key = "".join(y)
        rows.append(
            {
                "y": key,
                "p_data": p,
                "p_cd": summary[f"p_cd:{key}"],
                "p_ct": summary[f"p_ct:{key}"],
                "p_cd_ref": ref[key],
            }
        )
    return {
        "rows": rows,
        **maps,
        "h_u": summary["h_u"],
        "h_cd": summary["h_cd"],
        "h_ct": summary["h_ct"],
        "h_data": dist.entropy(),
        "trials": trials,
    }
