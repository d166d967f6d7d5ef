"""Command-line entry point: design, graph, simulate, genalg, spectrum, rerun.

Every command that writes an output file also writes ``<output>.manifest.json``
holding the argv needed to repeat the run, the resolved configuration and the
tool version.  ``polarldpc rerun <manifest>`` replays it.

Exit codes: 0 success, 1 runtime or invariant failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channelsim import SimConfig, default_workers, parse_snr_range, run_montecarlo
from .decoders import DECODERS, DecoderConfig
from .genalg import COSTS, GenAlgConfig, evolve
from .polarcode import (
    PolarCode,
    construct_5g,
    construct_bhattacharyya,
    encode,
    read_infoset,
    write_infoset,
)
from .spectrum import MAX_BRUTE_K, brute_force_spectrum, scl_spectrum_estimate
from .tannergraph import (
    forward_assignment,
    full_bipartite,
    girth_and_cycles,
    prune,
    read_alist,
    reduction_factor,
    write_alist,
)

log = logging.getLogger("polarldpc")


class CommandError(RuntimeError):
    """A failure that should end the run with exit code 1."""

    exit_code = 1


class UsageError(CommandError):
    exit_code = 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, command: str, argv: list[str], config: dict, started: str, outputs: list[str]):
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": started,
        "finished": _now(),
        "outputs": outputs,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _load_code(args) -> PolarCode:
    try:
        return read_infoset(args.infoset)
    except FileNotFoundError as exc:
        raise CommandError(f"cannot read info-set file: {exc.filename}") from exc


# --------------------------------------------------------------------------- commands


def cmd_design(args, argv):
    started = _now()
    if not 1 <= args.k <= args.n:
        raise UsageError(f"need 1 <= K <= N, got N={args.n} K={args.k}")
    try:
        if args.method == "5g":
            code = construct_5g(args.n, args.k)
        else:
            code = construct_bhattacharyya(args.n, args.k, args.eps)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    if args.out:
        write_infoset(code, args.out)
        cfg = {"N": args.n, "K": args.k, "method": args.method, "eps": args.eps, "seed": None}
        write_manifest(_manifest_path(args.out), "design", argv, cfg, started, [str(args.out)])
    print(" ".join(map(str, code.info_set)))
    return 0


def _check_preserves_code(code: PolarCode, graph, words: int = 64, seed: int = 0):
    """Random codewords must satisfy every check of the pruned graph."""
    rng = np.random.default_rng(seed)
    u = np.zeros((words, code.N), dtype=np.uint8)
    u[:, code.info_indices] = rng.integers(0, 2, (words, code.K), dtype=np.uint8)
    vals = forward_assignment(graph, u)
    if graph.num_cns and graph.syndrome(vals).any():
        raise CommandError("pruned graph rejects a valid codeword")
    x = encode(code, u[:, code.info_indices])
    if not np.array_equal(vals[:, : graph.num_channel], x[:, list(graph.channel_order)]):
        raise CommandError("pruned graph channel VNs do not carry the codeword")


def cmd_graph(args, argv):
    started = _now()
    code = _load_code(args)
    full = full_bipartite(code)
    graph = prune(full)
    _check_preserves_code(code, graph)
    red = reduction_factor(full, graph)
    print(f"code=P({code.N},{code.K}) full_vns={full.num_vns} full_cns={full.num_cns} full_edges={full.num_edges}")
    print(f"reduction={red:.4f}")
    if args.stats:
        print(girth_and_cycles(graph, args.max_cycle).report())
    else:
        print(f"vns={graph.num_vns} cns={graph.num_cns} edges={graph.num_edges} punctured={graph.num_punctured}")
    if args.out:
        write_alist(graph, args.out)
        cfg = {"infoset": str(args.infoset), "N": code.N, "K": code.K, "seed": None}
        outs = [str(args.out), str(Path(args.out).with_suffix(".punct"))]
        write_manifest(_manifest_path(args.out), "graph", argv, cfg, started, outs)
    return 0


def cmd_simulate(args, argv):
    started = _now()
    if args.infoset is None:
        raise CommandError("--infoset is required: the info set maps decoded bits back to data bits (give --alist as well to decode on a stored graph)")
    code = _load_code(args)
    graph = None
    if args.decoder in ("spa", "nms"):
        if args.alist:
            try:
                graph = read_alist(args.alist)
            except FileNotFoundError as exc:
                raise CommandError(f"cannot read alist file: {exc.filename}") from exc
            if graph.num_channel != code.N:
                raise CommandError(f"alist has {graph.num_channel} channel VNs but the code has N={code.N}")
        else:
            graph = prune(full_bipartite(code))
            log.info("derived pruned graph: %d VNs, %d CNs", graph.num_vns, graph.num_cns)
    elif args.alist:
        raise CommandError(f"decoder {args.decoder!r} works on the polar structure and cannot use --alist")
    try:
        snrs = parse_snr_range(args.snr)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    dconf = DecoderConfig(max_iters=args.max_iters, list_size=args.list_size)
    cfg = SimConfig(
        snr_points=snrs,
        max_frames=args.frames,
        target_block_errors=args.target_errors,
        seed=args.seed,
        decoder=args.decoder,
        decoder_config=dconf,
        batch_size=args.batch_size,
        workers=args.workers,
    )
    t0 = time.perf_counter()
    result = run_montecarlo(code, cfg, graph)
    for p in result.points:
        log.info("snr=%g frames=%d bler=%.3e ber=%.3e (%.1fs)", p.snr_db, p.frames, p.bler, p.ber, p.wall_time)
    csv = result.to_csv()
    if args.out:
        Path(args.out).write_text(csv)
        resolved = {
            "infoset": str(args.infoset),
            "alist": str(args.alist) if args.alist else None,
            "N": code.N,
            "K": code.K,
            "decoder": args.decoder,
            "snr_points": snrs,
            "max_iters": args.max_iters,
            "list_size": args.list_size,
            "max_frames": args.frames,
            "target_block_errors": args.target_errors,
            "batch_size": args.batch_size,
            "workers": args.workers,
            "seed": args.seed,
            "wall_time_s": round(time.perf_counter() - t0, 3),
        }
        write_manifest(_manifest_path(args.out), "simulate", argv, resolved, started, [str(args.out)])
    else:
        sys.stdout.write(csv)
    return 0


def cmd_genalg(args, argv):
    started = _now()
    try:
        cfg = GenAlgConfig(
            population_size=args.pop,
            elite_count=args.elite,
            mutation_swaps=args.swaps,
            generations=args.generations,
            snr_des=args.snr_des,
            cost=args.cost,
            frames_per_eval=args.frames,
            seed=args.seed,
            max_iters=args.max_iters,
            workers=args.workers,
            checkpoint_every=args.checkpoint_every,
        )
        PolarCode(args.n, tuple(range(1, args.k + 1)))
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    result = evolve(args.n, args.k, cfg, out_dir=args.out, resume=args.resume)
    best = [h[1] for h in result.history]
    if any(b > a for a, b in zip(best, best[1:])):
        raise CommandError("best fitness increased between generations")
    print(f"best_fitness={result.best.fitness:.6e}")
    print(" ".join(map(str, result.best.code.info_set)))
    out = Path(args.out)
    write_manifest(
        out / "manifest.json",
        "genalg",
        argv,
        {"N": args.n, "K": args.k, "resume": args.resume, **vars(cfg)},
        started,
        [str(out / f) for f in ("config.txt", "history.csv", "best_infoset.txt", "checkpoint.json")],
    )
    return 0


def cmd_spectrum(args, argv):
    started = _now()
    code = _load_code(args)
    if args.brute:
        if code.K > MAX_BRUTE_K:
            raise CommandError(f"--brute needs K <= {MAX_BRUTE_K}, got K={code.K}")
        res = brute_force_spectrum(code)
    else:
        res = scl_spectrum_estimate(code, args.list_size)
    line = res.line()
    print(line)
    if args.out:
        Path(args.out).write_text(line + "\n")
        cfg = {"infoset": str(args.infoset), "brute": args.brute, "list_size": args.list_size, "seed": None}
        write_manifest(_manifest_path(args.out), "spectrum", argv, cfg, started, [str(args.out)])
    return 0


def cmd_rerun(args, argv):
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CommandError(f"cannot read manifest: {exc}") from exc
    replay = list(manifest["argv"])
    if args.workers is not None:
        replay += ["--workers", str(args.workers)] if manifest["command"] in ("simulate", "genalg") else []
    log.info("replaying: %s", " ".join(replay))
    return main(replay)


# --------------------------------------------------------------------------- parser


def _positive_int(text):
    value = int(float(text))
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarldpc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="construct an information set")
    d.add_argument("--n", type=_positive_int, required=True)
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--method", choices=("bhatta", "5g"), default="bhatta")
    d.add_argument("--eps", type=float, default=0.5, help="design erasure probability for bhatta")
    d.add_argument("--out", type=Path, help="info-set file to write")
    d.set_defaults(func=cmd_design)

    g = sub.add_parser("graph", help="build and prune the Tanner graph of a polar code")
    g.add_argument("--infoset", type=Path, required=True)
    g.add_argument("--out", type=Path, help="alist file; punctured flags go to the same name with suffix .punct")
    g.add_argument("--stats", action="store_true", help="report girth and short-cycle counts")
    g.add_argument("--max-cycle", type=int, choices=(4, 6, 8), default=6)
    g.set_defaults(func=cmd_graph)

    s = sub.add_parser("simulate", help="Monte-Carlo BER/BLER over BPSK-AWGN")
    s.add_argument("--infoset", type=Path)
    s.add_argument("--alist", type=Path, help="stored graph for spa/nms (reads the sibling .punct file)")
    s.add_argument("--decoder", choices=DECODERS, default="sc")
    s.add_argument("--snr", default="1:4:1", help="Eb/N0 in dB, start:stop:step or a comma list")
    s.add_argument("--max-iters", type=_positive_int, default=200)
    s.add_argument("--list-size", type=_positive_int, default=8)
    s.add_argument("--frames", type=_positive_int, default=100_000, help="max frames per SNR point")
    s.add_argument("--target-errors", type=_positive_int, default=100)
    s.add_argument("--batch-size", type=_positive_int, default=256)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=_positive_int, default=None)
    s.add_argument("--out", type=Path, help="CSV file; stdout when omitted")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("genalg", help="genetic search over information sets")
    a.add_argument("--n", type=_positive_int, required=True)
    a.add_argument("--k", type=_positive_int, required=True)
    a.add_argument("--snr-des", type=float, default=3.0)
    a.add_argument("--cost", choices=COSTS, default="bler")
    a.add_argument("--generations", type=int, default=200)
    a.add_argument("--pop", type=int, default=20)
    a.add_argument("--elite", type=int, default=2)
    a.add_argument("--swaps", type=float, default=1.0, help="mean extra swaps per child")
    a.add_argument("--frames", type=int, default=20_000, help="frames per fitness evaluation")
    a.add_argument("--max-iters", type=_positive_int, default=200)
    a.add_argument("--checkpoint-every", type=int, default=10)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--workers", type=_positive_int, default=None)
    a.add_argument("--out", type=Path, required=True, help="run directory")
    a.add_argument("--resume", action="store_true", help="continue from <out>/checkpoint.json")
    a.set_defaults(func=cmd_genalg)

    sp = sub.add_parser("spectrum", help="minimum distance and its multiplicity")
    sp.add_argument("--infoset", type=Path, required=True)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--list-size", type=_positive_int)
    grp.add_argument("--brute", action="store_true")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("rerun", help="repeat a run from its manifest")
    r.add_argument("manifest", type=Path)
    r.add_argument("--workers", type=_positive_int, default=None, help="override the worker count")
    r.set_defaults(func=cmd_rerun)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if hasattr(args, "workers") and args.workers is None and args.command != "rerun":
        args.workers = default_workers()
    try:
        return args.func(args, argv)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
