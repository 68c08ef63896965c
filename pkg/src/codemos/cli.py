"""``codemos`` command line: train coders, encode/decode text, run reports.

Option precedence is command-line flag > ``--config`` JSON file > default.
"""

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import assign, bench, bpe, codetable, corpus, mos
from .codelm import TrainConfig, save_checkpoint
from .exceptions import ArgumentError, CorpusDecodeError, MalformedSequenceError

log = logging.getLogger("codemos")


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read_lines(path):
    if path in (None, "-"):
        data = sys.stdin.buffer.read()
    else:
        with open(path, "rb") as fh:
            data = fh.read()
    try:
        return data.decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise CorpusDecodeError(exc.start, exc.reason) from None


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path in (None, "-"):
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="\n")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


# --- subcommands -------------------------------------------------------------------

def cmd_train_bpe(args):
    sentences = corpus.read_corpus(args.input)
    vocab = corpus.build_vocab(sentences, args.max_vocab)
    log.info("%d sentences, %d word types", len(sentences), len(vocab))
    merges = bpe.train_bpe(vocab, args.merges, args.eow)
    bpe.save_merges(merges, args.output, seed=args.seed)
    ranks = merges.ranks
    before = sum(c * (len(w) + 1) for w, c in vocab.entries)
    after = sum(c * len(bpe.bpe_encode(w, merges, ranks)) for w, c in vocab.entries)
    early = merges.dict_size < args.merges
    print(f"dict_size\t{merges.dict_size}")
    print(f"rules\t{len(merges.rules)}")
    print(f"compression\t{after / before:.6f}")
    print(f"early_stop\t{'yes' if early else 'no'}")
    return 0


def _lm_config(args):
    return TrainConfig(args.lr, args.epochs, args.batch_size, args.clip, args.seed)


def cmd_learn_table(args):
    if args.rounds < 1:
        raise ArgumentError(f"--rounds must be >= 1, got {args.rounds}")
    sentences = corpus.read_corpus(args.input)
    vocab = corpus.build_vocab(sentences, args.max_vocab)
    if args.k_freq > len(vocab):
        raise ArgumentError(f"--k-freq {args.k_freq} exceeds vocabulary size {len(vocab)}")
    codetable.check_capacity(len(vocab) + 1, args.k_freq, args.rows, args.cols)
    log.info("%d sentences, %d word types, %d codes", len(sentences), len(vocab),
             args.k_freq + args.rows + args.cols)
    if args.dry_run:
        print(f"ok\tvocab={len(vocab)}\tcapacity={args.k_freq + args.rows * args.cols}"
              f"\tcodes={args.k_freq + args.rows + args.cols}")
        return 0
    table, params, trace = assign.train_hybrid_lightrnn(
        sentences, vocab, args.k_freq, args.rows, args.cols, _lm_config(args), args.rounds,
        args.d_emb, args.d_hid, args.exact_cap, args.solver,
    )
    codetable.save_table(table, args.output, seed=args.seed)
    if args.trace:
        assign.save_trace(trace, args.trace, seed=args.seed)
    if args.checkpoint:
        save_checkpoint(params, args.checkpoint, seed=args.seed)
    n_codes = sum(len(codetable.encode_ids(table, s))
                  for s in codetable.sentence_ids(table, sentences))
    to_bits = 1.0 / (math.log(2) * max(n_codes, 1))
    for t in trace:
        print(f"round {t.round}\tnll_bits_per_code {t.nll_before * to_bits:.6f} -> {t.nll_after * to_bits:.6f}"
              f"\tot {t.ot_before:.6f} -> {t.ot_after:.6f}\t{t.solver}")
    return 0


def _load_coder(path):
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().split(" ")[0].strip()
    if magic == bpe.MAGIC:
        return "bpe", bpe.load_merges(path)
    if magic == codetable.MAGIC:
        return "table", codetable.load_table(path)
    raise ArgumentError(f"{path}: unrecognized coder file (magic {magic!r})")


def cmd_encode(args):
    kind, coder = _load_coder(args.coder)
    lines = _read_lines(args.input)
    with _Output(args.output) as out:
        if kind == "bpe":
            tok = bpe.BPETokenizer.from_merges(coder)
            for codes in tok.transform(lines):
                out.write(" ".join(codes) + "\n")
        else:
            ids = codetable.sentence_ids(coder, [corpus.tokenize(x) for x in lines])
            for codes in codetable.encode_corpus(coder, ids):
                out.write(" ".join(str(c) for c in codes) + "\n")
    return 0


def cmd_decode(args):
    kind, coder = _load_coder(args.coder)
    lines = _read_lines(args.input)
    decoded = []
    for lineno, line in enumerate(lines, 1):
        try:
            if kind == "bpe":
                words = bpe.bpe_decode(line.split(), coder.eow)
            else:
                try:
                    codes = [int(c) for c in line.split()]
                except ValueError:
                    raise MalformedSequenceError("non-integer code") from None
                names = list(coder.words) + [corpus.UNK]
                words = [names[w] for w in codetable.decode_sequence(coder, codes)]
        except MalformedSequenceError as exc:
            raise MalformedSequenceError(f"line {lineno}: {exc}", exc.position, exc.suffix) from None
        decoded.append(" ".join(words))
    with _Output(args.output) as out:
        for text in decoded:
            out.write(text + "\n")
    return 0


DUMP_MAGIC = "#dump-v1"


def dump_table(table, seed=None):
    names = list(table.words) + [corpus.UNK]
    head = DUMP_MAGIC if seed is None else f"{DUMP_MAGIC} seed={seed}"
    lines = [head, "freq\t" + " ".join(names[:table.k_freq])]
    for r in range(table.n_rows):
        row = [names[w] for c in range(table.n_cols) if (w := table.word_at(r, c)) >= 0]
        lines.append(f"{r}\t" + " ".join(row))
    return "\n".join(lines) + "\n"


def cmd_dump_table(args):
    table = codetable.load_table(args.table)
    with _Output(args.output) as out:
        out.write(dump_table(table, codetable.seed_of(args.table)))
    return 0


def cmd_rank(args):
    seeds = args.seeds if args.seeds else (args.seed,)
    cfg = mos.BottleneckConfig(
        n_contexts=args.n_contexts, v_out=args.v_out, d=args.d, truth_rank=args.truth_rank,
        mixtures=args.mixtures, seeds=seeds, iters=args.iters, lr=args.lr,
        restarts=args.restarts, context_dim=args.context_dim, rel_tol=args.rel_tol,
    )
    text = mos.format_report(mos.bottleneck_report(cfg))
    with _Output(args.output) as out:
        out.write(text)
    return 0


def cmd_bench(args):
    spec = bench.BenchSpec(args.batch, args.hidden, args.sizes, args.mixtures, args.reps,
                           args.warmup, args.seed, args.workers)
    results = bench.run_bench(spec)
    comparison = None
    if args.compare:
        vocab_size, codes = args.compare
        comparison = bench.compare_coded_vs_flat(vocab_size, codes, max(spec.mixtures), spec)
    with _Output(args.output) as out:
        out.write(bench.format_results(results, spec, comparison))
    return 0


# --- parser ---------------------------------------------------------------------------

def _pair(text):
    vals = _int_list(text.replace(":", ","))
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected VOCAB:CODES")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="codemos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("train-bpe", parents=[common], help="learn BPE merges from a corpus")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--merges", type=int, default=1000, help="target code dictionary size")
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--eow", default=bpe.EOW)
    p.set_defaults(func=cmd_train_bpe)

    p = sub.add_parser("learn-table", parents=[common], help="learn a Hybrid-LightRNN code table")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--trace")
    p.add_argument("--checkpoint")
    p.add_argument("--k-freq", type=int, default=100)
    p.add_argument("--rows", type=int, default=32)
    p.add_argument("--cols", type=int, default=32)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--d-emb", type=int, default=16)
    p.add_argument("--d-hid", type=int, default=32)
    p.add_argument("--solver", choices=("auto", "exact", "greedy"), default="auto")
    p.add_argument("--exact-cap", type=int, default=assign.EXACT_CAP)
    p.add_argument("--dry-run", action="store_true", help="validate options and capacity only")
    p.set_defaults(func=cmd_learn_table)

    for name, func, what in (("encode", cmd_encode, "text to codes"), ("decode", cmd_decode, "codes to text")):
        p = sub.add_parser(name, parents=[common], help=f"{what} with a merge or table file")
        p.add_argument("--coder", "-c", required=True)
        p.add_argument("--input", "-i", default="-")
        p.add_argument("--output", "-o", default="-")
        p.set_defaults(func=func)

    p = sub.add_parser("dump-table", parents=[common], help="list the words of each table row")
    p.add_argument("--table", "-t", required=True)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_dump_table)

    p = sub.add_parser("rank", parents=[common], help="softmax bottleneck report")
    p.add_argument("--n-contexts", type=int, default=16)
    p.add_argument("--v-out", type=int, default=16)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--truth-rank", type=int, default=8)
    p.add_argument("--mixtures", type=_int_list, default=(4,))
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--iters", type=int, default=12000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--context-dim", type=int, default=None)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench", parents=[common], help="softmax time/memory scaling")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--sizes", type=_int_list, default=(10000, 30000))
    p.add_argument("--mixtures", type=_int_list, default=(1, 3))
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--compare", type=_pair, default=None, metavar="VOCAB:CODES")
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(overrides) - known
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
    except OSError as exc:
        print(f"codemos: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, RuntimeError, MemoryError, OSError) as exc:
        print(f"codemos {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
