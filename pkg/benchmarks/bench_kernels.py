"""Time the compiled kernels against their pure-numpy twins.

Runs the delay-Doppler channel kernels and the min-sum decoder on
representative desk- and full-scale workloads and prints per-call
timings plus the speedup.  The compiled path needs numba importable
and ``OTFSIM_NO_NUMBA`` unset; otherwise only the numpy column runs.

    python benchmarks/bench_kernels.py --scale full --repeats 30
"""

import argparse
import statistics
import time

import numpy as np

from otfsim import _kernels
from otfsim.channel import load_profile, sample_channel
from otfsim.fec import default_code
from otfsim.grid import desk_scale_params, full_scale_params


def time_call(fn, repeats):
    fn()  # warm up, includes any JIT compile
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_channel(params, repeats, rng):
    profile = load_profile("tdl_a", 37e-9)
    ch = sample_channel(profile, params, 2779.7, rng)
    n = params.block_len
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    args = (ch.gains, ch.delay_bins, ch.phase_rates)
    cases = {
        "ltv_stream": lambda use: _kernels.ltv_stream(v, *args, -params.cp_samples, use),
        "tap_apply": lambda use: _kernels.tap_apply(v, *args, use),
        "tap_apply_adjoint": lambda use: _kernels.tap_apply_adjoint(v, *args, use),
    }
    return {
        name: {
            use: time_call(lambda: fn(use), repeats)
            for use in available_paths()
        }
        for name, fn in cases.items()
    }


def bench_decoder(repeats, rng, sigma=0.8):
    code = default_code()
    cw = code.encode(rng.integers(0, 2, code.message_len))
    x = 1.0 - 2.0 * cw.astype(float)
    llr = 2.0 * (x + sigma * rng.standard_normal(cw.size)) / sigma**2
    return {
        "min_sum_decode": {
            use: time_call(
                lambda: _kernels.min_sum_decode(llr, code.graph, 0.75, 50, use),
                repeats,
            )
            for use in available_paths()
        }
    }


def available_paths():
    return (False, True) if _kernels.USING_NUMBA else (False,)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", choices=("desk", "full"), default="full")
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    params = full_scale_params() if args.scale == "full" else desk_scale_params()
    rng = np.random.default_rng(args.seed)
    rows = {}
    rows.update(bench_channel(params, args.repeats, rng))
    rows.update(bench_decoder(args.repeats, rng))

    both = _kernels.USING_NUMBA
    print(
        f"grid {params.num_delay_bins}x{params.num_doppler_bins}, "
        f"median of {args.repeats} calls"
        + ("" if both else "  (numba unavailable: numpy path only)")
    )
    header = f"{'kernel':<20} {'numpy':>12}" + (f" {'numba':>12} {'speedup':>8}" if both else "")
    print(header)
    for name, timings in rows.items():
        line = f"{name:<20} {timings[False] * 1e3:>10.3f} ms"
        if both:
            ratio = timings[False] / timings[True]
            line += f" {timings[True] * 1e3:>10.3f} ms {ratio:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
