"""``wakegate`` command line.

Exit codes: 0 ok, 2 config error, 3 model/profile load failure, 4 data
error, 5 training error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import audio_io, augment, evalkit
from .backbone import init_native_embedder, load_embedder
from .config import AppConfig, ConfigError
from .errors import AudioFormatError, InsufficientAudio, ModelFormatError, SilentInput, SingleClassData, WakegateError
from .pipeline import Engine
from .speaker_auth import (
    approach_a_embedding,
    cosine_similarity,
    encode_speaker_256,
    enroll,
    init_native_encoder,
    load_profile,
    save_profile,
)
from .wakeword import init_fcn, load_fcn, save_fcn, train

log = logging.getLogger("wakegate")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_DATA, EXIT_TRAIN = 0, 2, 3, 4, 5
STDIN_BLOCK_BYTES = 3200


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _wavs(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise CliError(EXIT_DATA, f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav")


def _embedder(cfg: AppConfig):
    if cfg.embedder_path:
        try:
            return load_embedder(cfg.embedder_path)
        except (OSError, ModelFormatError) as exc:
            raise CliError(EXIT_MODEL, f"cannot load embedder: {exc}") from exc
    return init_native_embedder(cfg.backbone_seed, cfg.emb_features)


def _engine(cfg: AppConfig, model=None, profile=None) -> Engine:
    return Engine(cfg.pipeline_config(), _embedder(cfg), model if model is not None else _null_scorer,
                  profile, init_native_encoder(cfg.encoder_seed))


def _null_scorer(window) -> float:
    return 0.0


def _load_model(cfg: AppConfig):
    if not cfg.model_path:
        raise CliError(EXIT_MODEL, "model_path is not set")
    try:
        model = load_fcn(cfg.model_path)
    except (OSError, ModelFormatError) as exc:
        raise CliError(EXIT_MODEL, f"cannot load model: {exc}") from exc
    if model.ww_windows != cfg.ww_windows:
        raise CliError(EXIT_MODEL, f"model expects ww_windows={model.ww_windows}, config has {cfg.ww_windows}")
    return model


def _load_profile(cfg: AppConfig):
    if not cfg.profile_path:
        raise CliError(EXIT_MODEL, "profile_path is not set")
    try:
        return load_profile(cfg.profile_path)
    except (OSError, ModelFormatError) as exc:
        raise CliError(EXIT_MODEL, f"cannot load profile: {exc}") from exc


# commands -------------------------------------------------------------------


def cmd_detect(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    engine = _engine(cfg, _load_model(cfg), _load_profile(cfg))
    for name in args.inputs:
        if name == "-":
            engine.register_client("stdin")
            stream = sys.stdin.buffer
            carry = b""
            while block := stream.read(STDIN_BLOCK_BYTES):
                block = carry + block
                usable = len(block) - len(block) % 2
                carry = block[usable:]
                samples = audio_io.from_int16(np.frombuffer(block[:usable], dtype="<i2"))
                for ev in engine.step("stdin", samples):
                    out.write(ev.to_json() + "\n")
            continue
        try:
            samples = audio_io.read_wav(name)
        except AudioFormatError as exc:
            raise CliError(EXIT_DATA, str(exc)) from exc
        except OSError as exc:
            raise CliError(EXIT_DATA, f"cannot read {name}: {exc}") from exc
        client = Path(name).name
        engine.register_client(client)
        for ev in engine.step(client, samples):
            out.write(ev.to_json() + "\n")
    out.flush()
    return EXIT_OK


def cmd_enroll(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    auth = cfg.auth_config()
    encoder = init_native_encoder(cfg.encoder_seed)
    clips, names = [], []
    for path in _wavs(args.clips_dir):
        try:
            clip = audio_io.read_wav(path)
        except AudioFormatError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        if clip.size < auth.required_samples:
            log.warning("skipping %s: %d samples, approach %s needs %d",
                        path.name, clip.size, auth.approach, auth.required_samples)
            continue
        clips.append(clip)
        names.append(path.name)
    if not clips:
        raise CliError(EXIT_DATA, f"no usable enrollment clips in {args.clips_dir}")
    profile = enroll(clips, encoder, auth)
    target = args.out or cfg.profile_path
    if not target:
        raise CliError(EXIT_CONFIG, "no output path: pass --out or set profile_path")
    save_profile(profile, target)
    out.write(f"enrolled {profile.enrolled_clips} clips -> {target}\n")
    for name, clip in zip(names, clips):
        if auth.approach == "A":
            sim = cosine_similarity(approach_a_embedding(clip[-auth.a_required_samples:]), profile.ref_a)
        else:
            sim = cosine_similarity(encode_speaker_256(encoder, clip[-auth.b_chunk_samples:]), profile.ref_b)
        out.write(f"  {name}: similarity {sim:.4f}\n")
    return EXIT_OK


def _windows_from_dir(engine: Engine, directory):
    windows = []
    for path in _wavs(directory):
        try:
            clip = audio_io.read_wav(path)
        except AudioFormatError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        w = engine.clip_windows(clip)
        if len(w) == 0:
            log.warning("skipping %s: shorter than one mel chunk", path.name)
            continue
        windows.append(w)
    return windows


def cmd_train(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    if not _wavs(args.positives_dir) or not _wavs(args.negatives_dir):
        raise CliError(EXIT_DATA, "positives and negatives directories must both contain WAV files")
    engine = _engine(cfg)
    pos = _windows_from_dir(engine, args.positives_dir)
    neg = _windows_from_dir(engine, args.negatives_dir)
    if not pos and not neg:
        raise CliError(EXIT_DATA, "no usable training clips")
    X = np.concatenate(pos + neg)
    y = np.concatenate([np.ones(sum(len(w) for w in pos)), np.zeros(sum(len(w) for w in neg))])
    model = init_fcn(cfg.ww_windows, cfg.hidden_dim, cfg.train_seed)
    try:
        model, trace = train(model, X, y, cfg.train_config())
    except SingleClassData as exc:
        raise CliError(EXIT_TRAIN, str(exc)) from exc
    target = args.out or cfg.model_path
    if not target:
        raise CliError(EXIT_CONFIG, "no output path: pass --out or set model_path")
    save_fcn(model, target)
    trace_path = args.trace or str(Path(target).with_suffix(".loss.csv"))
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(trace, 1):
            w.writerow([i, repr(float(loss))])
    out.write(f"trained on {len(X)} windows; final loss {trace[-1]:.6f} -> {target}\n")
    return EXIT_OK


def cmd_eval(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    try:
        manifest = evalkit.read_manifest(args.manifest)
    except (OSError, WakegateError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    if args.task == "wakeword":
        engine = _engine(cfg, _load_model(cfg))
    else:
        engine = _engine(cfg, profile=_load_profile(cfg))
    scores = evalkit.collect_scores(engine, manifest, args.task, gate_level=args.gate_level)
    try:
        points = evalkit.sweep(scores)
    except WakegateError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    result = evalkit.eer(scores, args.method)
    if args.out:
        evalkit.report(points, result, args.out)
    out.write(f"positives {scores.positives.size}, negatives {scores.negatives.size}, "
              f"skipped {len(scores.skipped)}\n")
    out.write(f"Optimal Threshold: {result.threshold:.2f}\n")
    out.write(f"EER (%): {100 * result.eer:.2f}\n")
    return EXIT_OK


def parse_duration(text: str) -> int:
    """``"1s"``, ``"250ms"`` or a bare sample count -> samples at 16 kHz."""
    text = text.strip().lower()
    if text.endswith("ms"):
        return int(round(float(text[:-2]) * audio_io.SAMPLE_RATE / 1000))
    if text.endswith("s"):
        return int(round(float(text[:-1]) * audio_io.SAMPLE_RATE))
    return int(text)


def segment(clip, seg_len: int, gap: int) -> list:
    """Cut ``seg_len``-sample pieces separated by ``gap`` samples; drop a short tail."""
    period = seg_len + gap
    return [clip[s : s + seg_len] for s in range(0, clip.size - seg_len + 1, period)]


def cmd_prep(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    out_dir = Path(args.outputs_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _wavs(args.inputs_dir)
    done = failed = silent = 0
    for path in files:
        try:
            clip = audio_io.read_wav(path)
        except AudioFormatError as exc:
            log.warning("%s: %s", path.name, exc)
            failed += 1
            continue
        pieces = [(path.name, clip)]
        if args.segment:
            seg = segment(clip, parse_duration(args.segment), parse_duration(args.gap))
            pieces = [(f"{path.stem}_seg{i:03d}.wav", s) for i, s in enumerate(seg)]
        for name, piece in pieces:
            before = piece.size
            if args.normalize:
                try:
                    piece, _ = audio_io.rms_normalize(piece, cfg.normalize_dbfs)
                except SilentInput:
                    log.warning("%s: silent, not normalized", name)
                piece = audio_io.quantize(piece)
            if args.vad:
                piece, speech = audio_io.vad_trim(piece, cfg.vad_params())
                if not speech:
                    out.write(f"{name}: no speech, skipped\n")
                    silent += 1
                    continue
            audio_io.write_wav(piece, out_dir / name)
            done += 1
            if piece.size != before:
                out.write(f"{name}: {before / 16000:.3f}s -> {piece.size / 16000:.3f}s\n")
    out.write(f"processed {done} files, {silent} without speech, {failed} failed\n")
    if files and failed == len(files):
        return EXIT_DATA
    return EXIT_OK


def cmd_augment(cfg: AppConfig, args, out=None) -> int:
    out = out or sys.stdout
    noise_dir = args.noise_dir or cfg.noise_dir
    rir_dir = args.rir_dir or cfg.rir_dir
    noise_bank = [audio_io.read_wav(p) for p in _wavs(noise_dir)] if noise_dir else []
    rir_bank = [audio_io.read_wav(p) for p in _wavs(rir_dir)] if rir_dir else []
    try:
        plan = augment.AugmentPlan(cfg.augment_seed, cfg.p_noise, cfg.p_pitch, cfg.p_rir,
                                   cfg.p_distortion, cfg.p_band_stop, noise_bank, rir_bank,
                                   (cfg.snr_min, cfg.snr_max), (cfg.gain_min, cfg.gain_max))
    except WakegateError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    out_dir = Path(args.outputs_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    multiplier = args.multiplier or cfg.multiplier
    lines = []
    index = 0
    for path in _wavs(args.inputs_dir):
        clip = audio_io.read_wav(path)
        for n in range(multiplier):
            result, ops = augment.augment_clip(clip, plan, index)
            name = f"{path.stem}_aug{n}.wav"
            audio_io.write_wav(result, out_dir / name)
            lines.append(augment.ops_record(name, index, ops))
            index += 1
    (out_dir / "augment_manifest.jsonl").write_text("".join(line + "\n" for line in lines))
    out.write(f"wrote {len(lines)} augmented clips to {out_dir}\n")
    return EXIT_OK


# entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wakegate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.set_defaults(func=func)
        return p

    p = add("detect", cmd_detect, "stream WAV files (or '-' for raw s16le stdin) through the pipeline")
    p.add_argument("inputs", nargs="+")

    p = add("enroll", cmd_enroll, "build a speaker profile from a directory of WAVs")
    p.add_argument("clips_dir")
    p.add_argument("--out")

    p = add("train", cmd_train, "train the wakeword classifier")
    p.add_argument("positives_dir")
    p.add_argument("negatives_dir")
    p.add_argument("--out")
    p.add_argument("--trace", help="loss trace CSV (default: <out>.loss.csv)")

    p = add("eval", cmd_eval, "FRR/FAR sweep and EER over a manifest")
    p.add_argument("manifest")
    p.add_argument("--task", choices=("wakeword", "auth"), required=True)
    p.add_argument("--method", choices=("sweep_interpolated", "exact"), default="sweep_interpolated")
    p.add_argument("--gate-level", action="store_true", help="score clips by whether the full gate fires")
    p.add_argument("--out", help="report CSV path")

    p = add("prep", cmd_prep, "normalize / VAD-trim / segment WAV files")
    p.add_argument("inputs_dir")
    p.add_argument("outputs_dir")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--vad", action="store_true")
    p.add_argument("--segment", help="cut into pieces of this length, e.g. 1s")
    p.add_argument("--gap", default="2s", help="gap between segments (default 2s)")

    p = add("augment", cmd_augment, "write augmented copies of WAV files")
    p.add_argument("inputs_dir")
    p.add_argument("outputs_dir")
    p.add_argument("--multiplier", type=int)
    p.add_argument("--noise-dir")
    p.add_argument("--rir-dir")
    return parser


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = AppConfig.load(args.config, args.set)
        return args.func(cfg, args, out)
    except ConfigError as exc:
        print(f"wakegate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"wakegate: {exc}", file=sys.stderr)
        return exc.code
    except (AudioFormatError, InsufficientAudio) as exc:
        print(f"wakegate: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
