"""Command-line frontend: ``agf {denoise,benchmark,verify,design-filters}``.

Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 property-suite
failure.
"""

import argparse
import csv
import io as _stdio
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from agf import io
from agf.errors import AgfError, ConfigError, DesignError, InputError
from agf.glr import DEFAULT_MU, GlrConfig, glr_denoise
from agf.graphbio import DEFAULT_DEGREES, design_filterbank, load_filterbank, save_filterbank
from agf.pipeline import AgfConfig, NoiseSpec, add_awgn, default_filterbank, denoise, psnr

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_SUITE = 0, 1, 2, 3
METHODS = ("agf", "glr")


@dataclass
class RunManifest:
    inputs: list
    method: str = "agf"
    noise: NoiseSpec = None
    agf: AgfConfig = field(default_factory=AgfConfig)
    glr: GlrConfig = field(default_factory=GlrConfig)
    out_dir: str = "."
    report: str = None
    ground_truth: list = None
    filterbank: object = None
    workers: int = 1

    def validate(self):
        missing = [p for p in self.inputs if not os.path.isfile(p)]
        if self.ground_truth:
            if len(self.ground_truth) != len(self.inputs):
                raise ConfigError("--gt must list one ground-truth file per input")
            missing += [p for p in self.ground_truth if not os.path.isfile(p)]
        if missing and len(missing) == len(self.inputs):
            raise InputError("no readable inputs: " + ", ".join(missing))
        os.makedirs(self.out_dir, exist_ok=True)
        if not os.access(self.out_dir, os.W_OK):
            raise InputError(f"output directory {self.out_dir} is not writable")


def format_value(v):
    """Lossless CSV rendering: ``repr`` floats, ``inf`` and ``NA`` sentinels."""
    if v is None:
        return "NA"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def parse_value(s):
    return None if s == "NA" else float(s)


def image_seed(seed, index, sigma=None):
    """Independent per-image noise seed derived from the run seed."""
    key = [int(seed), int(index)] if sigma is None else [int(seed), int(index), int(round(sigma * 1000))]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def run_method(method, img, manifest, stem="image"):
    """Denoise ``img``; ``stem`` names the external per-patch files."""
    cfg = replace(manifest.agf, stem=stem)
    if method == "agf":
        return denoise(img, cfg, manifest.filterbank)
    if method == "glr":
        return glr_denoise(img, manifest.glr, cfg)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def _denoise_one(k, manifest):
    path = manifest.inputs[k]
    img = io.read_image(path)
    if manifest.noise is not None:
        gt = img
        noisy = add_awgn(img, NoiseSpec(manifest.noise.sigma, image_seed(manifest.noise.seed, k)))
    else:
        noisy = img
        gt = io.read_image(manifest.ground_truth[k]) if manifest.ground_truth else None
    out = run_method(manifest.method, noisy, manifest, _stem(path))
    io.write_image(os.path.join(manifest.out_dir, f"{_stem(path)}_{manifest.method}.pgm"), out)
    if gt is None:
        return path, None, None
    # score the 8-bit image actually written, noisy input stays unclipped
    return path, psnr(gt, noisy), psnr(gt, io.to_uint8(out))


def cmd_denoise(manifest, stdout=sys.stdout, stderr=sys.stderr):
    """Denoise every input; emit ``file,psnr_noisy,psnr_out`` rows in input order."""
    manifest.validate()
    n = len(manifest.inputs)

    def job(k):
        try:
            return _denoise_one(k, manifest)
        except (InputError, OSError) as exc:
            return exc

    if manifest.workers > 1:
        with ThreadPoolExecutor(manifest.workers) as pool:
            results = list(pool.map(job, range(n)))
    else:
        results = [job(k) for k in range(n)]

    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "psnr_noisy", "psnr_out"])
    failures = 0
    for path, res in zip(manifest.inputs, results):
        if isinstance(res, Exception):
            failures += 1
            print(f"error: {path}: {res}", file=stderr)
            continue
        writer.writerow([res[0], format_value(res[1]), format_value(res[2])])
    _emit(buf.getvalue(), manifest.report, stdout)
    return EXIT_IO if failures == n else EXIT_OK


def _emit(text, report, stdout):
    if report and report != "-":
        with open(report, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def benchmark_columns(sigmas, methods):
    cols = ["image"]
    for s in sigmas:
        tag = f"s{s:g}"
        cols.append(f"noisy_{tag}")
        cols.extend(f"{m}_{tag}" for m in methods)
    return cols


def cmd_benchmark(manifest, sigmas, methods, seed=0, stdout=sys.stdout, stderr=sys.stderr):
    """PSNR table: one row per image plus an ``average`` row.

    Columns are ``noisy_s<sigma>`` followed by one column per method for each
    sigma, in the order given. Configurations are used as-is at every sigma,
    which is the train/test mismatch protocol when they were tuned at one
    noise level.
    """
    if not manifest.inputs:
        raise ConfigError("benchmark needs at least one image")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    manifest.validate()
    images = []
    for k, path in enumerate(manifest.inputs):
        try:
            images.append((k, path, io.read_image(path)))
        except InputError as exc:
            print(f"error: {path}: {exc}", file=stderr)
    if not images:
        return EXIT_IO, []

    def row_for(item):
        k, path, gt = item
        row = [_stem(path)]
        for s in sigmas:
            noisy = add_awgn(gt, NoiseSpec(s, image_seed(seed, k, s)))
            row.append(psnr(gt, noisy))
            row.extend(psnr(gt, run_method(m, noisy, manifest, _stem(path))) for m in methods)
        return row

    if manifest.workers > 1:
        with ThreadPoolExecutor(manifest.workers) as pool:
            rows = list(pool.map(row_for, images))
    else:
        rows = [row_for(item) for item in images]
    avg = ["average"] + [float(np.mean([r[c] for r in rows])) for c in range(1, len(rows[0]))]
    rows.append(avg)

    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(benchmark_columns(sigmas, methods))
    for r in rows:
        writer.writerow([r[0]] + [format_value(v) for v in r[1:]])
    _emit(buf.getvalue(), manifest.report, stdout)
    return EXIT_OK, rows


def read_table(text):
    """Parse a CSV report back into ``(header, rows)`` with floats restored."""
    reader = csv.reader(_stdio.StringIO(text))
    header = next(reader)
    rows = [[r[0]] + [parse_value(v) for v in r[1:]] for r in reader]
    return header, rows


def cmd_verify(fb, seed=0, scale=1.0, stdout=sys.stdout):
    from agf import suites

    results = suites.run_all(fb, seed=seed, scale=scale)
    for r in results:
        print(r.line(), file=stdout)
    ok = all(r.passed for r in results)
    print(f"{'all suites passed' if ok else 'SUITE FAILURE'} (seed={seed})", file=stdout)
    return EXIT_OK if ok else EXIT_SUITE


def cmd_design_filters(degrees, out_path, stdout=sys.stdout):
    fb = design_filterbank(*degrees)
    save_filterbank(fb, out_path)
    loaded = load_filterbank(out_path)
    res = loaded.check()
    print(f"wrote {out_path}: deg(h0)={fb.h0.degree} deg(g0)={fb.g0.degree} "
          + " ".join(f"{k}={v:.1e}" for k, v in res.items()), file=stdout)
    return EXIT_OK if loaded.is_valid() else EXIT_SUITE


def _add_config_flags(p):
    p.add_argument("--patch-size", type=int, default=24)
    p.add_argument("--cascades", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--cheb-order", type=int, default=30)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--mode", choices=("auto", "exact", "chebyshev"), default="auto")
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--jacobi", action="store_true", help="Jacobi-preconditioned CG for glr")
    p.add_argument("--features", choices=("intensity", "intensity+coords", "external"), default="intensity+coords")
    p.add_argument("--feature-dir", help="directory of <stem>_k<index>.agff feature files")
    p.add_argument("--prefilter", choices=("identity", "gaussian3x3", "external"), default="gaussian3x3")
    p.add_argument("--prefilter-dir", help="directory of <stem>_k<index>.agff pre-filtered patches")
    p.add_argument("--reuse-graph", action="store_true", help="use the diagonal-stage graph for both stages")
    p.add_argument("--coeffs", help="filterbank coefficients file (default: designed at startup)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--report", help="CSV report path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="agf", description="Analytical graph-filter image denoising")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise images")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", choices=METHODS, default="agf")
    p.add_argument("--sigma", type=float, help="treat inputs as clean and add AWGN of this sigma")
    p.add_argument("--gt", nargs="+", help="ground-truth images, one per input (when --sigma is not given)")
    _add_config_flags(p)

    p = sub.add_parser("benchmark", help="PSNR table over an image set")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--sigma", type=float, nargs="+", default=[50.0])
    p.add_argument("--method", nargs="+", choices=METHODS, default=list(METHODS))
    _add_config_flags(p)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on suite trial counts")
    p.add_argument("--coeffs", help="check this coefficients file instead of the designed bank")

    p = sub.add_parser("design-filters", help="design a filterbank and write its coefficients")
    p.add_argument("--degrees", type=int, nargs=2, default=list(DEFAULT_DEGREES), metavar=("K0", "K1"))
    p.add_argument("--out", required=True)
    return parser


def _filterbank(args):
    if getattr(args, "coeffs", None):
        return load_filterbank(args.coeffs)
    return default_filterbank()


def manifest_from_args(args):
    agf_cfg = AgfConfig(
        m=args.patch_size,
        cascades=args.cascades,
        eps=args.epsilon,
        cheb_order=args.cheb_order,
        alpha=args.alpha,
        prefilter=args.prefilter,
        provider=args.features,
        mode=args.mode,
        reuse_graph=args.reuse_graph,
        feature_dir=args.feature_dir,
        prefilter_dir=args.prefilter_dir,
    )
    # benchmark passes lists for --sigma/--method; only denoise uses them here
    single = args.command == "denoise"
    noise = NoiseSpec(args.sigma, args.seed) if single and args.sigma is not None else None
    return RunManifest(
        inputs=list(args.inputs),
        method=args.method if single else "agf",
        noise=noise,
        agf=agf_cfg,
        glr=GlrConfig(mu=args.mu, jacobi=args.jacobi),
        out_dir=args.out,
        report=args.report,
        ground_truth=getattr(args, "gt", None),
        filterbank=_filterbank(args),
        workers=args.workers,
    )


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.command == "denoise":
            return cmd_denoise(manifest_from_args(args), stdout, stderr)
        if args.command == "benchmark":
            code, _ = cmd_benchmark(manifest_from_args(args), args.sigma, args.method, args.seed, stdout, stderr)
            return code
        if args.command == "verify":
            return cmd_verify(_filterbank(args), args.seed, args.scale, stdout)
        if args.command == "design-filters":
            return cmd_design_filters(tuple(args.degrees), args.out, stdout)
    except (ConfigError, DesignError) as exc:
        print(f"configuration error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"I/O error: {exc}", file=stderr)
        return EXIT_IO
    except AgfError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
