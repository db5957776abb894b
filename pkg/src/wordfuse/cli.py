"""Command-line front end for the fusion pipeline.

Subcommands:
    vote          aggregate per-sentence tokenizations into one segmentation
    init-weights  write a fresh deterministic weight bundle
    fuse          run the full pipeline over one sentence's hidden states
    check         run the randomized invariant suite

Typical usage:
    wordfuse vote --input sentences.jsonl --output segmented.jsonl
    wordfuse init-weights --seed 42 --dw 4 --dh 8 --output bundle.json
    wordfuse fuse --embeddings vecs.txt --weights bundle.json \\
        --hidden H.txt --segmentation seg.json --output fused.txt
    wordfuse check

Exit codes: 0 success, 1 user or data error (including failed checks),
2 unexpected internal error.  Commands never modify their input files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import check as checkmod
from . import lexicon, numerics, segvote
from .attention import pipeline_forward
from .fusion import FusionConfig
from .segvote import Segmentation, WordSpan

FUSE_DEFAULTS = {"lambda": 0.9, "mu": 0.5, "heads": 1, "debug_intermediates": False}


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_vote(args) -> int:
    out_lines = []
    try:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        return _fail(str(err))
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            sentence = record["sentence"]
            tokenizations = record["tokenizations"]
            if not isinstance(sentence, str):
                raise ValueError("'sentence' must be a string")
            if not isinstance(tokenizations, list) or not all(
                isinstance(t, list) and all(isinstance(w, str) for w in t) for t in tokenizations
            ):
                raise ValueError("'tokenizations' must be a list of word lists")
            seg = segvote.vote(sentence, tokenizations)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            return _fail(f"{args.input}: line {lineno}: {err}")
        out_lines.append(
            json.dumps(
                {
                    "sentence": sentence,
                    "words": seg.words,
                    "spans": [[s.start, s.end] for s in seg.spans],
                },
                ensure_ascii=False,
            )
        )
    text = "".join(line + "\n" for line in out_lines)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_init_weights(args) -> int:
    if args.dw < 1 or args.dh < 1:
        return _fail(f"dimensions must be positive, got --dw {args.dw} --dh {args.dh}")
    if args.heads < 1 or args.dh % args.heads:
        return _fail(f"--dh {args.dh} must be divisible by --heads {args.heads}")
    bundle = lexicon.init_bundle(args.seed, args.dw, args.dh)
    lexicon.save_bundle(bundle, args.output)
    print(f"wrote {args.output}", file=sys.stderr)
    return 0


def _load_segmentation(path: str) -> Segmentation:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ValueError(f"{path}: empty segmentation file")
    # a plain JSON object, or the first record of a JSON-lines file
    try:
        record = json.loads(text)
    except json.JSONDecodeError:
        record = json.loads(text.splitlines()[0])
    if not isinstance(record, dict) or "sentence" not in record:
        raise ValueError(f"{path}: expected an object with a 'sentence' field")
    sentence = record["sentence"]
    if "spans" in record:
        spans = tuple(WordSpan(int(s), int(e)) for s, e in record["spans"])
        return Segmentation(sentence, spans)
    if "words" in record:
        return segvote.validate_tokenization(sentence, record["words"])
    raise ValueError(f"{path}: record needs either 'spans' or 'words'")


def cmd_fuse(args) -> int:
    file_cfg = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            return _fail(f"{args.config}: config must be a JSON object")
        file_cfg = raw

    def pick(flag_value, key):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, FUSE_DEFAULTS.get(key))

    paths = {key: pick(getattr(args, key), key) for key in
             ("embeddings", "weights", "hidden", "segmentation", "output")}
    missing = [key for key, value in paths.items() if not value]
    if missing:
        return _fail(f"missing required settings: {', '.join(sorted(missing))}")
    lam = float(pick(args.lam, "lambda"))
    mu = float(pick(args.mu, "mu"))
    heads = int(pick(args.heads, "heads"))
    debug = bool(pick(args.debug_intermediates, "debug_intermediates"))

    try:
        hidden = numerics.read_matrix(paths["hidden"])
    except ValueError as err:
        return _fail(f"hidden states: {err}")
    try:
        seg = _load_segmentation(paths["segmentation"])
    except ValueError as err:
        return _fail(f"segmentation: {err}")
    try:
        table = lexicon.load_embeddings(paths["embeddings"])
    except ValueError as err:
        return _fail(f"embeddings: {err}")
    try:
        bundle = lexicon.load_bundle(paths["weights"])
    except ValueError as err:
        return _fail(f"weight bundle: {err}")

    d_h = hidden.shape[1]
    w1 = bundle["W1"]
    if w1.shape != (table.dim, d_h):
        return _fail(
            f"weight bundle: W1 is {w1.shape[0]}x{w1.shape[1]}, expected "
            f"{table.dim}x{d_h} (embeddings dim x hidden dim)"
        )
    if bundle["Wq1"].shape != (d_h, d_h):
        return _fail(
            f"weight bundle: attention matrices are "
            f"{bundle['Wq1'].shape[0]}x{bundle['Wq1'].shape[1]}, expected {d_h}x{d_h}"
        )
    try:
        cfg = FusionConfig(lam=lam, mu=mu, heads=heads, d_w=table.dim, d_h=d_h).validate()
        result = pipeline_forward(hidden, seg, table, bundle, cfg)
    except ValueError as err:
        return _fail(str(err))

    out = paths["output"]
    numerics.write_matrix(result.fused, out)
    if debug:
        numerics.write_matrix(result.mixed, f"{out}.mixed")
        numerics.write_matrix(result.h1, f"{out}.h1")
        numerics.write_matrix(result.h2, f"{out}.h2")
        Path(f"{out}.omega.json").write_text(
            json.dumps(list(result.omega)) + "\n", encoding="utf-8"
        )
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _corrupted_softmax(m):
    # intentionally wrong: inflates every row just past the tolerance
    return numerics.softmax_rows(m) * (1.0 + 1e-6)


def cmd_check(args) -> int:
    if args.cases < 1:
        return _fail(f"--cases must be >= 1, got {args.cases}")
    softmax_impl = _corrupted_softmax if args.corrupt == "softmax" else None
    results = checkmod.run_checks(seed=args.seed, cases=args.cases, softmax_impl=softmax_impl)
    width = max(len(r.name) for r in results)
    print(f"{'PROPERTY':<{width}}  CASES  RESULT")
    for r in results:
        print(f"{r.name:<{width}}  {r.cases:>5}  {'PASS' if r.passed else 'FAIL'}")
        if not r.passed:
            print(f"{'':<{width}}         {r.failure}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results)} properties: {len(results) - failed} passed, {failed} failed (seed {args.seed})")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordfuse",
        description="Word-semantics enrichment for character hidden states.",
        epilog="Exit codes: 0 success, 1 user/data error, 2 internal error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_vote = sub.add_parser("vote", help="aggregate tokenizations by majority + granularity")
    p_vote.add_argument("--input", required=True, help="JSON-lines records with sentence + tokenizations")
    p_vote.add_argument("--output", help="output path (default: stdout)")
    p_vote.set_defaults(func=cmd_vote)

    p_init = sub.add_parser("init-weights", help="write a deterministic weight bundle")
    p_init.add_argument("--seed", type=int, default=42)
    p_init.add_argument("--dw", type=int, required=True, help="word embedding width")
    p_init.add_argument("--dh", type=int, required=True, help="hidden width")
    p_init.add_argument("--heads", type=int, default=1)
    p_init.add_argument("--output", required=True)
    p_init.set_defaults(func=cmd_init_weights)

    p_fuse = sub.add_parser("fuse", help="run the fusion pipeline on one sentence")
    p_fuse.add_argument("--config", help="JSON config; explicit flags override its keys")
    p_fuse.add_argument("--embeddings", help="word2vec-style text embeddings")
    p_fuse.add_argument("--weights", help="JSON weight bundle")
    p_fuse.add_argument("--hidden", help="matrix text file of per-character hidden states")
    p_fuse.add_argument("--segmentation", help="JSON record with sentence + spans (or words)")
    p_fuse.add_argument("--output", help="where to write the fused matrix")
    p_fuse.add_argument("--lambda", dest="lam", type=float, help="key-information retention (default 0.9)")
    p_fuse.add_argument("--mu", type=float, help="attention fusion coefficient (default 0.5)")
    p_fuse.add_argument("--heads", type=int, help="attention heads (default 1)")
    p_fuse.add_argument(
        "--debug-intermediates",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="also write <output>.mixed/.h1/.h2 and <output>.omega.json",
    )
    p_fuse.set_defaults(func=cmd_fuse)

    p_check = sub.add_parser("check", help="run the randomized invariant suite")
    p_check.add_argument("--seed", type=int, default=checkmod.DEFAULT_SEED)
    p_check.add_argument("--cases", type=int, default=checkmod.DEFAULT_CASES)
    p_check.add_argument(
        "--corrupt",
        choices=["softmax"],
        help="testing hook: run with a deliberately broken kernel",
    )
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            stream.reconfigure(encoding="utf-8")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, ValueError) as err:
        return _fail(str(err))
    except Exception as err:  # noqa: BLE001 - contract: unexpected bug -> 2
        print(f"internal error: {err!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
