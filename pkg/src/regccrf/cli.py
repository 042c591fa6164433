"""Command-line interface: ``regccrf <command> ...``.

Exit codes: 0 success, 1 experiment check failed, 2 usage or input error,
3 constraint violation, 4 state budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from . import automata
from .automata import DEFAULT_STATE_BUDGET, Nfa
from .bio import BioSpec, build_bio_nfa
from .constrained import build_tag_set, reduce_tag_set
from .errors import (
    AmbiguousAutomatonError,
    DivergenceError,
    EmptySupportError,
    OutOfLanguageError,
    StateBudgetExceeded,
)
from .estimator import RegCCRF, infer_alphabet
from .experiments import arbitrary_gap, map_inference
from .train import TrainConfig

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_VIOLATION = 3
EXIT_BUDGET = 4

logger = logging.getLogger("regccrf")


class InputError(Exception):
    """Malformed user input; maps to exit code 2."""


def _add_language_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--regex", help="constraint language as a regular expression")
    g.add_argument("--nfa", metavar="FILE", help="constraint automaton in JSON form")
    p.add_argument(
        "--label-set",
        nargs="+",
        metavar="LABEL",
        help="label alphabet (default: labels appearing in the regex)",
    )
    p.add_argument("--state-budget", type=int, default=DEFAULT_STATE_BUDGET)


def _add_train_args(p):
    d = TrainConfig()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--steps", type=int, default=d.steps)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--lr-decay-every", type=int, default=d.lr_decay_every)
    p.add_argument("--lr-decay-frac", type=float, default=d.lr_decay_frac)
    p.add_argument(
        "--loss-normalization", choices=("token", "sequence"), default=d.loss_normalization
    )


def _config(args) -> TrainConfig:
    return TrainConfig(
        steps=args.steps,
        batch_size=args.batch_size,
        lr=args.lr,
        lr_decay_every=args.lr_decay_every,
        lr_decay_frac=args.lr_decay_frac,
        seed=args.seed,
        loss_normalization=args.loss_normalization,
    )


def _load_language(args) -> tuple[Nfa, str | None]:
    """Epsilon-free NFA for --regex / --nfa, plus the regex source if any."""
    if args.nfa:
        with open(args.nfa) as fh:
            data = json.load(fh)
        return Nfa.from_dict(data.get("nfa", data)), None
    labels = args.label_set or infer_alphabet(args.regex)
    return automata.regex_to_nfa(args.regex, labels), args.regex


def _unambiguous(m: Nfa, regex: str | None, budget: int) -> Nfa:
    if regex is not None:
        return automata.compile_regex(regex, m.alphabet, budget)
    return automata.make_unambiguous(m, budget)


def _witness_dict(w) -> dict | None:
    if w is None:
        return None
    return {"string": list(w.string), "path_a": [list(e) for e in w.path_a], "path_b": [list(e) for e in w.path_b]}


def _split_string(text: str, alphabet) -> tuple:
    parts = text.split()
    if len(parts) == 1 and all(len(a) == 1 for a in alphabet):
        return tuple(parts[0])
    return tuple(parts)


def _emit(obj, out_path=None):
    text = json.dumps(obj, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_compile(args) -> int:
    raw, regex = _load_language(args)
    m = _unambiguous(raw, regex, args.state_budget)
    edge_form = build_tag_set(m)
    reduced = reduce_tag_set(edge_form)
    ts = edge_form if args.no_class_reduction else reduced
    report = {
        "input_states": raw.num_states,
        "input_edges": len(raw.edges),
        "input_unambiguous": automata.check_unambiguous(raw) is None,
        "states": m.num_states,
        "edges": len(m.edges),
        "deterministic": automata.is_deterministic(m),
        "unambiguous": automata.check_unambiguous(m) is None,
        "tags_edge_form": edge_form.num_tags,
        "tags_reduced": reduced.num_tags,
        "class_reduction": not args.no_class_reduction,
    }
    if args.out:
        skeleton = {
            "nfa": m.to_dict(),
            "class_reduction": ts.reduced,
            "tags": [list(t) for t in ts.tags],
        }
        with open(args.out, "w") as fh:
            json.dump(skeleton, fh, indent=1)
    _emit(report)
    return EXIT_OK


def cmd_check(args) -> int:
    m, _ = _load_language(args)
    witness = automata.check_unambiguous(m)
    report = {"unambiguous": witness is None, "witness": _witness_dict(witness)}
    status = EXIT_OK
    if args.string is not None:
        y = _split_string(args.string, m.alphabet)
        report["string"] = list(y)
        report["accepted"] = automata.accepts(m, y)
        if not report["accepted"]:
            status = EXIT_VIOLATION
    elif witness is not None:
        status = EXIT_VIOLATION
    _emit(report)
    return status


def _write_rows(rows: list, fmt: str, out_path: str | None):
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        fields = []
        for r in rows:
            fields += [k for k in r if k not in fields]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_experiment_gap(args) -> int:
    if not 1 <= args.k_min <= args.k_max:
        raise InputError("need 1 <= k-min <= k-max")
    rows = arbitrary_gap(
        range(args.k_min, args.k_max + 1), _config(args), trials=args.trials, jobs=args.jobs
    )
    _write_rows(rows, args.output, args.out)
    return EXIT_FAILED if any("error" in r for r in rows) else EXIT_OK


def cmd_experiment_map(args) -> int:
    report = map_inference(_config(args), trials=args.trials)
    if args.output == "json":
        _write_rows([report], "json", args.out)
    else:
        rows = [
            {**r, "map_cd": report["map_cd"], "map_ct": report["map_ct"]} for r in report["rows"]
        ]
        _write_rows(rows, "csv", args.out)
    ok = report["map_ct"] == "acd" and report["map_cd"] == "bcd"
    if not ok:
        logger.error(
            "expected MAP acd (constrained training) and bcd (constrained decoding), got %s and %s",
            report["map_ct"],
            report["map_cd"],
        )
    return EXIT_OK if ok else EXIT_FAILED


def cmd_build_bio(args) -> int:
    try:
        spec = BioSpec(args.core, args.noncore, args.continuation)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    m = build_bio_nfa(spec, args.state_budget)
    ts = build_tag_set(m, check=False)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(m.to_dict(), fh, indent=1)
    _emit(
        {
            "labels": len(m.alphabet),
            "states": m.num_states,
            "edges": len(m.edges),
            "tags_edge_form": ts.num_tags,
            "tags_reduced": reduce_tag_set(ts).num_tags,
        }
    )
    return EXIT_OK


def _read_lines(path: str) -> list:
    with open(path) as fh:
        return [line.split() for line in fh.read().splitlines()]


def _read_data(tokens_path: str, labels_path: str | None):
    X = _read_lines(tokens_path)
    for n, x in enumerate(X, 1):
        if not x:
            raise InputError(f"{tokens_path}:{n}: empty line")
    if labels_path is None:
        return X, None
    y = _read_lines(labels_path)
    if len(X) != len(y):
        raise InputError(f"{tokens_path} has {len(X)} lines but {labels_path} has {len(y)}")
    for n, (xs, ys) in enumerate(zip(X, y), 1):
        if len(xs) != len(ys):
            raise InputError(f"line {n}: {len(xs)} tokens but {len(ys)} labels")
    return X, y


def cmd_train(args) -> int:
    X, y = _read_data(args.tokens, args.labels)
    language = labels = None
    if args.nfa:
        language, _ = _load_language(args)
    elif args.regex:
        language = args.regex
        labels = args.label_set or None
    if labels is None and args.label_set:
        labels = args.label_set
    if labels is not None:
        for n, ys in enumerate(y, 1):
            bad = [a for a in ys if a not in labels]
            if bad:
                raise InputError(f"{args.labels}:{n}: unknown label {bad[0]!r}")
    if args.constrained and language is None:
        raise InputError("--constrained needs --regex or --nfa")
    est = RegCCRF(
        language=language,
        labels=labels,
        constrained_training=args.constrained,
        class_reduction=not args.no_class_reduction,
        token_features=not args.no_token_features,
        drop_violations=args.drop_violations,
        state_budget=args.state_budget,
        **{k: v for k, v in vars(_config(args)).items() if k != "seed"},
        random_state=args.seed,
    )
    if args.constrained and not args.drop_violations:
        labels = est._resolve_labels(y)
        m = language if isinstance(language, Nfa) else automata.regex_to_nfa(language, labels)
        bad = [n for n, ys in enumerate(y, 1) if not automata.accepts(m, ys)]
        for n in bad:
            print(f"{args.labels}:{n}: label sequence is not in the language", file=sys.stderr)
        if bad:
            return EXIT_VIOLATION
    est.fit(X, y)
    for i in est.dropped_:
        logger.warning("%s:%d: dropped out-of-language label sequence", args.labels, i + 1)
    est.save(args.model)
    return EXIT_OK


def cmd_decode(args) -> int:
    est = RegCCRF.load(args.model)
    X, _ = _read_data(args.tokens, None)
    out_lines, failed = [], []
    for n, x in enumerate(X, 1):
        try:
            out_lines.append(" ".join(est.predict([x])[0]))
        except EmptySupportError:
            failed.append(n)
            out_lines.append("")
    for n in failed:
        print(f"{args.tokens}:{n}: no label sequence of length {len(X[n - 1])} in the language", file=sys.stderr)
    text = "\n".join(out_lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_VIOLATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regccrf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a constraint language and report sizes")
    _add_language_args(p)
    p.add_argument("--no-class-reduction", action="store_true")
    p.add_argument("--out", help="write the automaton and tag set here")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("check", help="ambiguity and membership checks")
    _add_language_args(p)
    p.add_argument("--string", help="label sequence (whitespace separated)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("experiment", help="synthetic experiments")
    esub = p.add_subparsers(dest="experiment", required=True)
    for name, func in (("arbitrary-gap", cmd_experiment_gap), ("map-inference", cmd_experiment_map)):
        e = esub.add_parser(name)
        _add_train_args(e)
        e.add_argument("--trials", type=int, default=1)
        e.add_argument("--output", choices=("csv", "json"), default="csv")
        e.add_argument("--out", help="output file (default: stdout)")
        if name == "arbitrary-gap":
            e.add_argument("--k-min", type=int, default=1)
            e.add_argument("--k-max", type=int, default=10)
            e.add_argument("--jobs", type=int, default=1)
        e.set_defaults(func=func)

    p = sub.add_parser("build-bio", help="BIO constraint automaton for a role inventory")
    p.add_argument("--core", nargs="*", default=[])
    p.add_argument("--noncore", nargs="*", default=[])
    p.add_argument("--continuation", nargs="*", default=[])
    p.add_argument("--state-budget", type=int, default=DEFAULT_STATE_BUDGET)
    p.add_argument("--out", help="write the automaton JSON here")
    p.set_defaults(func=cmd_build_bio)

    p = sub.add_parser("train", help="train a model on token/label files")
    p.add_argument("--tokens", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True, help="output model file")
    _add_language_args(p, required=False)
    _add_train_args(p)
    p.add_argument("--constrained", action="store_true", help="train with the constraint")
    p.add_argument("--drop-violations", action="store_true")
    p.add_argument("--no-class-reduction", action="store_true")
    p.add_argument("--no-token-features", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode token sequences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (AmbiguousAutomatonError, OutOfLanguageError, EmptySupportError) as exc:
        print(f"regccrf: error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except StateBudgetExceeded as exc:
        print(f"regccrf: error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DivergenceError as exc:
        print(f"regccrf: error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (InputError, ValueError, KeyError, OSError) as exc:
        print(f"regccrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
