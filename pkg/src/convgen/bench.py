"""Benchmark and verification command line (installed as ``convgen-bench``).

Subcommands:
  run      time naive vs cached generation over depth/batch sweeps, CSV out
  speedup  turn a run CSV into a per-configuration speedup table
  verify   run the equivalence / trace / op-count / causality property suite

Op counts are the primary signal (exact, machine-checkable); wall times are
the secondary, hardware-dependent one.  Timing excludes network construction
and cache initialisation: states are warmed up before the timed window.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dilated import (
    NetworkSpec,
    build_network,
    forward_full,
    incremental_generate,
    incremental_init,
    incremental_step,
    naive_generate,
    naive_init,
    naive_step,
)
from .errors import InvalidParameterError
from .image2d import (
    ImageSpec,
    build_image_network,
    forward_image,
    image_incremental_generate,
    image_naive_generate,
)
from .strided import (
    StridedPlan,
    build_strided_network,
    firing_trace,
    strided_incremental_generate,
    strided_incremental_init,
    strided_incremental_step,
    strided_naive_generate,
    strided_naive_init,
    strided_naive_step,
)
from .tensor import DTYPE, OpCounter

EQUIV_TOL = 1e-5
HOURGLASS_STRIDES = ("down2", "down2", "up2", "up2")

CSV_COLUMNS = (
    "model",
    "L",
    "stacks",
    "batch",
    "mode",
    "steps",
    "repeats",
    "wall_us_per_step",
    "macs_per_step",
    "max_abs_diff",
)


@dataclass
class BenchRecord:
    """One measurement row; field order == CSV column order."""

    model: str
    L: int
    stacks: int
    batch: int
    mode: str
    steps: int
    repeats: int
    wall_us_per_step: float
    macs_per_step: int
    max_abs_diff: float | None = None

    def csv_row(self) -> str:
        diff = "" if self.max_abs_diff is None else f"{self.max_abs_diff:.6g}"
        return (
            f"{self.model},{self.L},{self.stacks},{self.batch},{self.mode},"
            f"{self.steps},{self.repeats},{self.wall_us_per_step:.3f},"
            f"{self.macs_per_step},{diff}"
        )


# ---------------------------------------------------------------------------
# timing helpers (shared with the acceptance suite)
# ---------------------------------------------------------------------------


def _steppers_1d(network, engine: str, batch: int):
    if network.spec.family == "dilated":
        init = naive_init if engine == "naive" else incremental_init
        step = naive_step if engine == "naive" else incremental_step
    else:
        init = strided_naive_init if engine == "naive" else strided_incremental_init
        step = strided_naive_step if engine == "naive" else strided_incremental_step
    # one private counter per batch element (thread mode merges them at the end)
    states = [init(network, OpCounter()) for _ in range(batch)]
    xs = [np.float32(0.0)] * batch
    return states, xs, step


def time_1d(
    network,
    engine: str,
    steps: int,
    repeats: int,
    warmup: int | None = None,
    batch: int = 1,
    threads: bool = False,
) -> dict:
    """Per-step wall time (all batch elements advance once per step) and exact macs.

    Warm-up is excluded from the timed window; for the naive dilated engine it
    spans one receptive field, because earlier steps evaluate pruned trees and
    are cheaper than the steady state being measured.
    """
    if warmup is None:
        from .dilated import receptive_field

        warmup = 4
        if engine == "naive" and network.spec.family == "dilated":
            warmup = max(warmup, receptive_field(network.spec))
    states, xs, step = _steppers_1d(network, engine, batch)

    def total_macs() -> int:
        merged = OpCounter()
        for st in states:
            merged.merge(st.counter)
        return merged.macs

    def advance(n: int):
        for _ in range(n):
            for j, st in enumerate(states):
                xs[j] = step(network, st, xs[j])

    def advance_threaded(n: int):
        def run_one(j):
            x = xs[j]
            for _ in range(n):
                x = step(network, states[j], x)
            xs[j] = x

        with ThreadPoolExecutor(max_workers=len(states)) as pool:
            list(pool.map(run_one, range(len(states))))

    runner = advance_threaded if threads and batch > 1 else advance
    runner(warmup)
    macs0 = total_macs()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        runner(steps)
        times.append((time.perf_counter() - t0) * 1e6 / steps)
    macs_per_step = (total_macs() - macs0) // (repeats * steps)
    return {
        "median_us": statistics.median(times),
        "mean_us": statistics.fmean(times),
        "macs_per_step": macs_per_step,
    }


def time_image(network, engine: str, batch: int, repeats: int) -> dict:
    """Per-pixel wall time for whole-image generation (one warm-up image excluded)."""
    gen = image_naive_generate if engine == "naive" else image_incremental_generate
    pixels = network.spec.height * network.spec.width
    gen(network, batch=batch)  # warm-up image
    counter = OpCounter()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        gen(network, batch=batch, counter=counter)
        times.append((time.perf_counter() - t0) * 1e6 / pixels)
    return {
        "median_us": statistics.median(times),
        "mean_us": statistics.fmean(times),
        "macs_per_step": counter.macs // (repeats * pixels),
    }


# ---------------------------------------------------------------------------
# equivalence + property checks (shared by `verify` and the test suite)
# ---------------------------------------------------------------------------


def compare_dilated(naive_network, cached_network, n_steps: int, prime=()) -> float:
    a = naive_generate(naive_network, prime, n_steps)
    b = incremental_generate(cached_network, prime, n_steps)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def compare_strided(naive_network, cached_network, n_steps: int) -> float:
    a = strided_naive_generate(naive_network, n_steps)
    b = strided_incremental_generate(cached_network, n_steps)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def compare_image(naive_network, cached_network, batch: int = 1) -> float:
    a = image_naive_generate(naive_network, batch)
    b = image_incremental_generate(cached_network, batch)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def check_dilated_equivalence(n_configs: int, n_steps: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        spec = NetworkSpec(
            "dilated",
            stacks=int(rng.integers(1, 3)),
            layers_per_stack=int(rng.integers(1, 7)),
            channels=int(rng.choice([1, 4, 16])),
            seed=int(rng.integers(2**32)),
        )
        net = build_network(spec)
        worst = max(worst, compare_dilated(net, net, n_steps))
    return worst <= EQUIV_TOL, f"max|naive-cached|={worst:.3g} ({n_configs} configs x {n_steps} steps)"


def measure_nodes_per_step(network, engine: str, n_steps: int = 4) -> int:
    """Exact steady-state node evaluations per generated sample.

    Warm-up covers one receptive field so the naive engine's dependency
    tree no longer touches the zero-padded region (early trees are cheaper).
    """
    from .dilated import receptive_field

    counter = OpCounter()
    if engine == "naive":
        state, step = naive_init(network, counter), naive_step
    else:
        state, step = incremental_init(network, counter), incremental_step
    x = np.float32(0.0)
    for _ in range(receptive_field(network.spec)):
        x = step(network, state, x)
    before = counter.node_evals
    for _ in range(n_steps):
        x = step(network, state, x)
    total = counter.node_evals - before
    if total % n_steps:
        return -1  # not constant per step; callers treat as a failure
    return total // n_steps


def check_op_count_law(l_max: int = 8, n_steps: int = 4):
    for stacks in (1, 2):
        for L in range(1, l_max + 1):
            spec = NetworkSpec("dilated", stacks=stacks, layers_per_stack=L, channels=2, seed=7)
            net = build_network(spec)
            for engine, per_step in (
                ("naive", stacks * (2**L - 1) + 1),
                ("cached", stacks * L + 1),
            ):
                measured = measure_nodes_per_step(net, engine, n_steps)
                if measured != per_step:
                    return False, (
                        f"{engine} L={L} stacks={stacks}: node_evals/step "
                        f"{measured} != {per_step}"
                    )
    return True, f"exact for L=1..{l_max}, stacks in {{1,2}}"


def expected_hourglass_trace():
    """The burst/skip timeline for [down2, down2, up2, up2], steps 0..5."""
    burst = (1, 1, 2, 4)
    idle = (0, 0, 0, 0)
    return [
        (0, burst, "fresh"),
        (1, idle, "buffered"),
        (2, (1, 0, 0, 0), "buffered"),
        (3, idle, "buffered"),
        (4, burst, "fresh"),
        (5, idle, "buffered"),
    ]


def check_golden_trace():
    spec = NetworkSpec("strided", channels=2, strides=HOURGLASS_STRIDES, seed=0)
    plan = StridedPlan.from_spec(spec)
    trace = firing_trace(plan, 6)
    for rec, (t, nodes, emit) in zip(trace, expected_hourglass_trace()):
        if rec.t != t or rec.nodes != nodes or rec.emit != emit or rec.outputs_emitted != 1:
            return False, f"t={t}: got nodes={rec.nodes} emit={rec.emit}, want {nodes}/{emit}"
    return True, "burst at t=0 (4 outputs), idle t=1/t=3, one node at t=2, period 4"


def check_strided_equivalence(n_seeds: int, n_steps: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_seeds):
        spec = NetworkSpec(
            "strided", channels=3, strides=HOURGLASS_STRIDES, seed=int(rng.integers(2**32))
        )
        net = build_strided_network(spec)
        worst = max(worst, compare_strided(net, net, n_steps))
    return worst <= EQUIV_TOL, f"max|naive-cached|={worst:.3g} ({n_seeds} seeds x {n_steps} steps)"


def check_image_equivalence(n_seeds: int, sizes=((8, 8),), n_layers: int = 3, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for h, w in sizes:
        for _ in range(n_seeds):
            spec = ImageSpec(h, w, channels=4, n_layers=n_layers, seed=int(rng.integers(2**32)))
            net = build_image_network(spec)
            worst = max(worst, compare_image(net, net))
    return worst <= EQUIV_TOL, f"max|naive-cached|={worst:.3g} ({n_seeds} seeds, sizes {sizes})"


def check_causality(seed: int = 0):
    rng = np.random.default_rng(seed)

    spec = NetworkSpec("dilated", stacks=2, layers_per_stack=3, channels=2, seed=11)
    net = build_network(spec)
    x = rng.standard_normal(12).astype(DTYPE)
    base = forward_full(net, x)
    for t2 in range(12):
        xp = x.copy()
        xp[t2] += 1.0
        pert = forward_full(net, xp)
        if not np.array_equal(base[:t2], pert[:t2]):
            return False, f"dilated output before t={t2} changed by a perturbation at t={t2}"

    sspec = NetworkSpec("strided", channels=2, strides=HOURGLASS_STRIDES, seed=11)
    snet = build_strided_network(sspec)
    sx = rng.standard_normal(12).astype(DTYPE)
    sbase = _strided_forward(snet, sx)
    for t2 in range(12):
        xp = sx.copy()
        xp[t2] += 1.0
        pert = _strided_forward(snet, xp)
        if not np.array_equal(sbase[:t2], pert[:t2]):
            return False, f"strided output before t={t2} changed by a perturbation at t={t2}"

    ispec = ImageSpec(6, 6, channels=3, n_layers=3, seed=11)
    inet = build_image_network(ispec)
    img = rng.standard_normal((1, 6, 6, 1)).astype(DTYPE)
    ibase = forward_image(inet, img)
    for r2 in range(6):
        for c2 in range(6):
            ip = img.copy()
            ip[0, r2, c2, 0] += 1.0
            pert = forward_image(inet, ip)
            flat_base = ibase[0, :, :, 0].ravel()
            flat_pert = pert[0, :, :, 0].ravel()
            upto = r2 * 6 + c2 + 1  # raster positions <= (r2, c2) must be untouched
            if not np.array_equal(flat_base[:upto], flat_pert[:upto]):
                return False, f"image prediction before raster ({r2},{c2}) changed"
    return True, "all families: outputs at t invariant to perturbations after t"


def _strided_forward(network, inputs: np.ndarray) -> np.ndarray:
    """Forward map of the strided stack over a fixed input window."""
    state = strided_naive_init(network)
    out = np.empty(len(inputs), dtype=DTYPE)
    for i, v in enumerate(inputs):
        out[i] = strided_naive_step(network, state, v)
    return out


def check_constant_memory(n_steps: int = 1000):
    spec = NetworkSpec("dilated", stacks=2, layers_per_stack=4, channels=3, seed=5)
    net = build_network(spec)
    state = incremental_init(net)
    expected = sum(l.dilation * l.weights.in_channels for l in net.layers)
    x = np.float32(0.0)
    sizes = set()
    for t in range(n_steps):
        x = incremental_step(net, state, x)
        if t in (10, n_steps // 2, n_steps - 1):
            sizes.add(state.cached_values())
    if sizes != {expected}:
        return False, f"cache storage {sizes} != analytic {expected}"
    return True, f"{expected} stored values, constant over {n_steps} steps"


VERIFY_CHECKS = (
    "dilated-equivalence",
    "op-count-law",
    "golden-trace",
    "strided-equivalence",
    "image-equivalence",
    "causality",
    "constant-memory",
)


def run_verify(quick: bool, out=None) -> int:
    """Run every property check, one machine-readable line each; 0 iff all pass."""
    out = sys.stdout if out is None else out
    checks = [
        ("dilated-equivalence", lambda: check_dilated_equivalence(
            10 if quick else 40, 64 if quick else 192)),
        ("op-count-law", lambda: check_op_count_law(6 if quick else 8)),
        ("golden-trace", check_golden_trace),
        ("strided-equivalence", lambda: check_strided_equivalence(
            5 if quick else 20, 60 if quick else 160)),
        ("image-equivalence", lambda: check_image_equivalence(
            3 if quick else 8, ((8, 8),) if quick else ((8, 8), (12, 12)))),
        ("causality", check_causality),
        ("constant-memory", lambda: check_constant_memory(300 if quick else 1000)),
    ]
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok &= ok
        print(f"check={name} status={'pass' if ok else 'fail'} {detail}", file=out)
    print(f"verify {'passed' if all_ok else 'FAILED'}", file=out)
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# bench run
# ---------------------------------------------------------------------------


def _parse_layers(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(text)]
    if not values or any(v < 1 for v in values):
        raise ValueError(f"bad layer range {text!r}")
    return values


def _parse_batch(text: str) -> list[int]:
    values = [int(tok) for tok in text.split(",") if tok]
    if not values or any(v < 1 for v in values):
        raise ValueError(f"bad batch list {text!r}")
    return values


def _build_for(args, L: int):
    if args.model == "dilated":
        spec = NetworkSpec(
            "dilated", stacks=args.stacks, layers_per_stack=L,
            channels=args.channels, seed=args.seed,
        )
        return build_network(spec)
    if args.model == "strided":
        spec = NetworkSpec(
            "strided", channels=args.channels, strides=HOURGLASS_STRIDES, seed=args.seed
        )
        return build_strided_network(spec)
    spec = ImageSpec(
        args.image_size, args.image_size, channels=args.channels,
        n_layers=L, seed=args.seed,
    )
    return build_image_network(spec)


def run_bench(args, out=None) -> int:
    out = sys.stdout if out is None else out
    layers = args.layers_list
    batches = args.batch_list
    steps = args.steps
    repeats = args.repeats
    warmup = None
    if args.quick:
        steps = min(steps, 32)
        repeats = min(repeats, 3)
        warmup = 16  # quick mode also skips the full steady-state warm-up
    if args.model == "strided" and len(layers) > 1:
        print("note: --layers is ignored for the strided model", file=sys.stderr)
        layers = [len(HOURGLASS_STRIDES)]
    modes = ("naive", "cached") if args.mode == "both" else (args.mode,)
    print(",".join(CSV_COLUMNS), file=out)
    worst_diff = 0.0
    for L in layers:
        network = _build_for(args, L)
        eff_L = len(HOURGLASS_STRIDES) if args.model == "strided" else L
        stacks = args.stacks if args.model == "dilated" else 1
        for batch in batches:
            diff = None
            if args.mode == "both":
                if args.model == "dilated":
                    diff = compare_dilated(network, network, steps)
                elif args.model == "strided":
                    diff = compare_strided(network, network, steps)
                else:
                    diff = compare_image(network, network, batch)
                worst_diff = max(worst_diff, diff)
            summaries = {}
            for mode in modes:
                if args.model == "image2d":
                    res = time_image(network, mode, batch, repeats)
                    eff_steps = args.image_size * args.image_size
                else:
                    res = time_1d(
                        network, mode, steps, repeats, warmup=warmup,
                        batch=batch, threads=args.threads,
                    )
                    eff_steps = steps
                rec = BenchRecord(
                    model=args.model,
                    L=eff_L,
                    stacks=stacks,
                    batch=batch,
                    mode=mode,
                    steps=eff_steps,
                    repeats=repeats,
                    wall_us_per_step=res["median_us"],
                    macs_per_step=res["macs_per_step"],
                    max_abs_diff=diff,
                )
                print(rec.csv_row(), file=out)
                summaries[mode] = res
            note = " ".join(
                f"{m}: median={summaries[m]['median_us']:.1f}us mean={summaries[m]['mean_us']:.1f}us"
                for m in modes
            )
            if len(modes) == 2:
                note += f" speedup={summaries['naive']['median_us'] / summaries['cached']['median_us']:.2f}x"
            if diff is not None:
                note += f" max|diff|={diff:.3g}"
            print(f"# {args.model} L={eff_L} batch={batch} {note}", file=sys.stderr)
    if args.mode == "both" and worst_diff > EQUIV_TOL:
        print(f"error: naive/cached outputs differ by {worst_diff:.3g} > {EQUIV_TOL}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# speedup report
# ---------------------------------------------------------------------------


def speedup_report(csv_lines, out=None) -> int:
    """Pair naive/cached rows and print per-configuration speedups."""
    out = sys.stdout if out is None else out
    import csv as _csv

    rows = list(_csv.DictReader(csv_lines))
    if not rows:
        print("error: empty CSV", file=sys.stderr)
        return 1
    table = {}
    for row in rows:
        key = (row["model"], row["L"], row["stacks"], row["batch"], row["steps"])
        table.setdefault(key, {})[row["mode"]] = float(row["wall_us_per_step"])
    missing = [k for k, v in table.items() if not {"naive", "cached"} <= set(v)]
    if missing:
        for key in missing:
            have = ",".join(sorted(table[key]))
            print(
                "error: unmatched pair "
                f"model={key[0]} L={key[1]} stacks={key[2]} batch={key[3]} (have: {have})",
                file=sys.stderr,
            )
        return 1
    print("model,L,stacks,batch,naive_us,cached_us,speedup", file=out)
    for key in sorted(table):
        naive_us = table[key]["naive"]
        cached_us = table[key]["cached"]
        print(
            f"{key[0]},{key[1]},{key[2]},{key[3]},{naive_us:.3f},{cached_us:.3f},"
            f"{naive_us / cached_us:.3f}",
            file=out,
        )
    return 0


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convgen-bench",
        description="Benchmark cached vs naive generation for convolutional autoregressive models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="time a sweep and emit CSV rows")
    run.add_argument("--model", required=True, choices=("dilated", "strided", "image2d"))
    run.add_argument("--layers", default="3", help="layer count n or inclusive range a..b")
    run.add_argument("--stacks", type=int, default=2)
    run.add_argument("--channels", type=int, default=8)
    run.add_argument("--steps", type=int, default=128)
    run.add_argument("--batch", default="1", help="comma-separated batch sizes")
    run.add_argument("--mode", default="both", choices=("naive", "cached", "both"))
    run.add_argument("--repeats", type=int, default=20)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--csv", default="-", help="output path or - for stdout")
    run.add_argument("--quick", action="store_true",
                     help="clamp steps/repeats/warm-up for a fast smoke pass")
    run.add_argument("--threads", action="store_true", help="one thread per batch element")
    run.add_argument("--image-size", type=int, default=16, help="square image side for image2d")

    spd = sub.add_parser("speedup", help="per-configuration speedup table from a run CSV")
    spd.add_argument("csv", help="CSV path or - for stdin")

    ver = sub.add_parser("verify", help="run the naive-vs-cached property suite")
    ver.add_argument("--quick", action="store_true")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("run", "speedup", "verify", "-h", "--help"):
        argv = ["run"] + argv
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "verify":
        return run_verify(args.quick)

    if args.command == "speedup":
        if args.csv == "-":
            return speedup_report(sys.stdin)
        with open(args.csv) as fh:
            return speedup_report(fh)

    try:
        args.layers_list = _parse_layers(args.layers)
        args.batch_list = _parse_batch(args.batch)
    except ValueError as exc:
        parser.error(str(exc))
    if args.steps < 1 or args.repeats < 1:
        parser.error("--steps and --repeats must be >= 1")
    try:
        if args.csv == "-":
            return run_bench(args)
        with open(args.csv, "w") as fh:
            return run_bench(args, out=fh)
    except InvalidParameterError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
