"""Command-line pipeline: stats, train, enhance, mix, wer.

Exit codes: 0 success, 1 usage error, 2 data or format error,
3 numerical failure.  Every command validates its inputs before it
creates any output file, so a failed invocation leaves nothing behind.
A config file of key=value lines can preset any long option; explicit
flags win.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import corpus, dd, features, rnn, snr
from .dsp import AudioSignal, istft, stft
from .gain import GainRule, gain_for
# the package re-exports the train() function under the submodule's name,
# so pull what the commands need straight from the submodule
from .train import TrainConfig, infer_xi, train as run_training

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_GAIN_NAMES = {r.value: r for r in GainRule}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the pipeline reserves 2 for data
    # errors, so route parse failures through the usage path instead.
    def error(self, message):
        raise UsageError(message)


def _read_config(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        value = value.strip()
        # String defaults pass back through each option's type converter at
        # parse time; booleans need converting here.
        if value.lower() in ("true", "false"):
            value = value.lower() == "true"
        out[key.strip().replace("-", "_")] = value
    return out


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _require_dir(path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FileNotFoundError(f"{what} directory not found: {p}")
    return p


def _load_dir_wavs(path: Path):
    files = sorted(path.glob("*.wav"))
    if not files:
        raise ValueError(f"no .wav files in {path}")
    return [corpus.load_wav(f) for f in files]


def _snr_grid(text: str):
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad SNR grid {text!r}: {exc}") from exc
    if not grid:
        raise UsageError("empty grid")
    return grid


def cmd_stats(args) -> int:
    clean_dir = _require_dir(args.clean, "clean")
    noise_dir = _require_dir(args.noise, "noise")
    clean = _load_dir_wavs(clean_dir)
    noise = _load_dir_wavs(noise_dir)
    grid = range(args.snr_min, args.snr_max + 1, args.snr_step)
    stats = snr.estimate_stats(clean, noise, grid, seed=args.seed)
    snr.save_stats(stats, args.out)
    print(f"stats: {stats.n_bins} bins from {stats.n_frames} frames -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    clean_dir = _require_dir(args.clean, "clean")
    noise_dir = _require_dir(args.noise, "noise")
    stats = snr.load_stats(_require_file(args.stats, "stats file"))
    clean = _load_dir_wavs(clean_dir)
    noise = _load_dir_wavs(noise_dir)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learn_rate=args.lr,
        grad_clip_norm=args.clip,
        snr_min=args.snr_min,
        snr_max=args.snr_max,
        snr_step=args.snr_step,
        seed=args.seed,
    )
    params = rnn.init_network(
        seed=args.seed,
        cell_size=args.cell,
        n_blocks=args.blocks,
        bidirectional=args.bidirectional,
    )
    params, history = run_training(params, clean, noise, stats, cfg)
    if not np.all(np.isfinite(history)):
        raise FloatingPointError("training loss went non-finite")
    rnn.save_network(params, args.out)
    if args.loss_csv:
        lines = ["batch,loss"] + [f"{i},{v:.17g}" for i, v in enumerate(history)]
        Path(args.loss_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"train: {len(history)} batches, final loss {history[-1]:.6f} -> {args.out}")
    return EXIT_OK


def _estimate_for_enhance(args, noisy: AudioSignal):
    """xi (and gamma where the tracker is needed) for the chosen estimator."""
    spec = stft(noisy)
    power = spec.magnitude**2
    if args.estimator == "neural":
        params = rnn.load_network(_require_file(args.model, "model file"))
        stats = snr.load_stats(_require_file(args.stats, "stats file"))
        xi = infer_xi(params, noisy, stats)
    elif args.estimator == "oracle":
        clean = corpus.load_wav(_require_file(args.clean, "clean reference"))
        noise = corpus.load_wav(_require_file(args.noise, "noise reference"))
        if len(clean) != len(noisy) or len(noise) != len(noisy):
            raise ValueError("oracle references must match the input length")
        xi = snr.oracle_xi(stft(clean), stft(noise))
    else:
        raise UsageError(f"unknown estimator {args.estimator!r}")
    lam = dd.tracked_noise_power(power)
    gamma = power / np.maximum(lam, 1e-12)
    return spec, xi, gamma


def cmd_enhance(args) -> int:
    rule = _GAIN_NAMES[args.gain]
    in_path = _require_file(args.infile, "input")
    if args.estimator == "neural":
        _require_file(args.model, "model file") if args.model else None
        if not args.model or not args.stats:
            raise UsageError("estimator neural requires --model and --stats")
    if args.estimator == "oracle" and (not args.clean or not args.noise):
        raise UsageError("estimator oracle requires --clean and --noise references")
    noisy = corpus.load_wav(in_path)

    if args.unity_gain:
        out = istft(stft(noisy), len(noisy))
    elif args.estimator == "dd":
        out = dd.enhance_dd(noisy, rule)
    else:
        spec, xi, gamma = _estimate_for_enhance(args, noisy)
        g = gain_for(rule, xi, gamma)
        from .dsp import SpectroGram

        shaped = SpectroGram(spec.magnitude * g, spec.phase, spec.config)
        out = istft(shaped, len(noisy))
    samples = np.clip(out.samples, -1.0, 1.0)
    if not np.all(np.isfinite(samples)):
        raise FloatingPointError("enhancement produced non-finite samples")
    corpus.save_wav(AudioSignal(samples), args.out)
    print(f"enhance[{args.estimator}/{args.gain}]: {in_path} -> {args.out}")
    return EXIT_OK


def cmd_mix(args) -> int:
    out_dir = Path(args.out_dir)
    if args.manifest:
        manifest = corpus.load_manifest(_require_file(args.manifest, "manifest"))
        if not manifest.entries:
            raise ValueError(f"manifest {args.manifest} has no entries")
        for e in manifest.entries:
            _require_file(e.clean_path, "clean file")
            _require_file(e.noise_path, "noise file")
    else:
        if args.clean is None or args.noise is None:
            raise UsageError("mix needs either --manifest or --clean/--noise dirs")
        grid = _snr_grid(args.snr_grid)
        manifest = corpus.build_test_manifest(
            _require_dir(args.clean, "clean"),
            _require_dir(args.noise, "noise"),
            args.per_noise,
            grid,
            seed=args.seed,
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    if not args.manifest:
        corpus.save_manifest(manifest, args.manifest_out or out_dir / "manifest.tsv")

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(lambda e: corpus.run_mix_entry(e, out_dir), manifest.entries))
    else:
        for e in manifest.entries:
            corpus.run_mix_entry(e, out_dir)
    print(f"mix: {len(manifest.entries)} mixtures -> {out_dir}")
    return EXIT_OK


def cmd_wer(args) -> int:
    manifest = corpus.load_manifest(_require_file(args.manifest, "manifest"))
    if not manifest.entries:
        raise ValueError(f"manifest {args.manifest} has no entries")
    scores = features.score_manifest(
        manifest.entries,
        _require_dir(args.ref, "reference"),
        _require_dir(args.hyp, "hypothesis"),
    )
    features.write_score_csv(scores, args.out)
    for s in scores:
        print(f"{s.noise} @ {s.snr_db:g} dB: n={s.n} wer={s.wer_percent:.2f}%")
    print(f"wer: {len(scores)} conditions -> {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="sefront", description=__doc__)
    parser.add_argument("--config", help="key=value file presetting long options")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("stats", parents=[], help="estimate xi_dB map statistics")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-min", type=int, default=-10)
    p.add_argument("--snr-max", type=int, default=20)
    p.add_argument("--snr-step", type=int, default=5)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the spectral target network")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.add_argument("--cell", type=int, default=64)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--snr-min", type=int, default=-10)
    p.add_argument("--snr-max", type=int, default=20)
    p.add_argument("--snr-step", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance one noisy recording")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--estimator", choices=("neural", "dd", "oracle"), default="dd"
    )
    p.add_argument("--gain", choices=sorted(_GAIN_NAMES), default="srwf")
    p.add_argument("--model")
    p.add_argument("--stats")
    p.add_argument("--clean", help="clean reference (oracle estimator)")
    p.add_argument("--noise", help="noise reference (oracle estimator)")
    p.add_argument(
        "--unity-gain",
        action="store_true",
        help="debug: analysis/synthesis round trip with no gain",
    )
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("mix", help="build and run a mixing manifest")
    p.add_argument("--manifest", help="replay an existing manifest")
    p.add_argument("--clean")
    p.add_argument("--noise")
    p.add_argument("--per-noise", type=int, default=25)
    p.add_argument("--snr-grid", default="-5,0,5,10,15")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="noisy")
    p.add_argument("--manifest-out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("wer", help="score transcripts over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wer)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # Apply config-file values as subcommand defaults before parsing.
        if "--config" in argv:
            cfg_path = Path(argv[argv.index("--config") + 1])
            overrides = _read_config(cfg_path)
            ns, _ = parser.parse_known_args(argv)
            if ns.command is None:
                raise UsageError("missing command")
            sub_actions = [
                a for a in parser._actions
                if isinstance(a, argparse._SubParsersAction)
            ]
            sub_parser = sub_actions[0].choices[ns.command]
            known = {a.dest for a in sub_parser._actions}
            for key, value in overrides.items():
                if key not in known:
                    raise UsageError(f"config key {key!r} unknown for {ns.command}")
            sub_parser.set_defaults(**overrides)
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            raise UsageError("missing command (stats, train, enhance, mix, wer)")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, corpus.WavFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
