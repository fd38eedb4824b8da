"""Batch commands behind the CLI verbs.

Each ``cmd_*`` function writes its outputs under ``out_dir`` and returns a
process exit code.  Batch commands skip failing entries, record the reason,
and return 1 only when every entry fails.  Rows are always written in input
order, whatever ``jobs`` is.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io, plotting
from .directions import (
    LabeledLatentDataset,
    LogisticConfig,
    correlation_matrix,
    extract_direction,
    project_subtract,
    train_logistic,
)
from .editing import ADVISORY_ALPHA_RANGE, LayerMask, sweep
from .embedding import EmbedConfig, embed
from .errors import LatentEditError
from .generator import FeatureExtractor
from .geometry import (
    AlignConfig,
    BoundingBox,
    LandmarkSet,
    EYE_GROUPS_68,
    align_face,
    alignment_transform,
    eye_centers,
    rotation_angle,
    select_primary_face,
)
from .imaging import resample
from .metrics import fit_gaussian, frechet_distance, identity_distance, perceptual_distance, psnr, ssim

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

EXPECTED_ERRORS = (LatentEditError, ValueError, OSError, KeyError)

METRICS_COLUMNS = ("pair_id", "psnr", "ssim", "perceptual", "identity")


@dataclass
class Outcome:
    ok: bool
    row: tuple
    reason: str = ""
    trace: object = None


def _map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(i, x) for i, x in enumerate(items)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(len(items)), items))


def _guard(fn: Callable) -> Callable:
    def run(i, item):
        try:
            return fn(i, item)
        except EXPECTED_ERRORS as exc:
            reason = str(exc) or type(exc).__name__
            log.warning("entry %d skipped: %s", i, reason)
            return Outcome(False, (), reason)
    return run


def _exit_code(outcomes: Sequence[Outcome]) -> int:
    if outcomes and not any(o.ok for o in outcomes):
        return EXIT_FAILED
    return EXIT_OK


# --- align -------------------------------------------------------------------------

def _entry_landmarks(entry: dict) -> LandmarkSet:
    pts = entry.get("landmarks")
    if not pts:
        raise ValueError("no landmarks")
    return LandmarkSet(np.asarray(pts, dtype=np.float64),
                       tuple(entry.get("eye_left", EYE_GROUPS_68[0])),
                       tuple(entry.get("eye_right", EYE_GROUPS_68[1])))


def cmd_align(manifest, cfg: AlignConfig, out_dir, jobs: int = 1, fmt: str = "ppm") -> int:
    """Align every manifest entry; report columns:
    ``image,status,angle_deg,aligned_angle_deg,output,reason``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = io.load_manifest(manifest, "images")["entries"]

    def work(i, entry):
        boxes = [BoundingBox(*b) for b in entry.get("boxes") or []]
        if not boxes:
            raise ValueError("no faces detected")
        box = select_primary_face(boxes)
        lm = _entry_landmarks(entry)
        img = io.read_image(entry["image"])
        angle = rotation_angle(*eye_centers(lm))
        aligned = align_face(img, box, lm, cfg)
        t = alignment_transform(lm, cfg)
        residual = rotation_angle(*t.apply(np.stack(eye_centers(lm))))
        target = out_dir / f"{i:04d}_{Path(entry['image']).stem}.{fmt}"
        io.write_image(target, aligned)
        return Outcome(True, (entry["image"], "ok", angle, residual, target.name, ""))

    outcomes = _map(_guard(work), entries, jobs)
    rows = [o.row if o.ok else (e["image"], "skipped", None, None, "", o.reason)
            for o, e in zip(outcomes, entries)]
    io.write_csv(out_dir / "align_report.csv",
                 ("image", "status", "angle_deg", "aligned_angle_deg", "output", "reason"), rows)
    n_ok = sum(o.ok for o in outcomes)
    print(f"aligned {n_ok} / {len(entries)} entries ({len(entries) - n_ok} skipped)")
    return _exit_code(outcomes)


# --- embed -------------------------------------------------------------------------

def load_target(path, gen) -> np.ndarray:
    img = io.read_image(path)
    if img.shape[2] != gen.channels:
        raise ValueError(f"{path}: {img.shape[2]} channels, generator makes {gen.channels}")
    if img.shape[0] != gen.out_size:
        img = resample(img, gen.out_size)
    return img


def cmd_embed(images: Sequence, gen, cfg: EmbedConfig, ext: FeatureExtractor, out_dir,
              jobs: int = 1, plots: bool = True) -> int:
    """Summary columns: ``image,latent,best_loss,psnr,ssim,iterations,status,reason``.

    Metrics are computed on ``G(w*)`` with ``w*`` rounded to the stored f32
    precision, so they describe exactly what the LAT1 file reproduces.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = [str(p) for p in images]

    def work(i, path):
        target = load_target(path, gen)
        res = embed(target, gen, ext, cfg)
        stem = f"{i:04d}_{Path(path).stem}"
        lat_path = out_dir / f"{stem}.lat"
        io.save_latent(lat_path, res.w_star)
        io.write_loss_trace(out_dir / f"{stem}_loss.csv", res.loss_trace)
        rec = gen.generate(io.quantize_latent(res.w_star))
        io.write_image(out_dir / f"{stem}_embedded.ppm", rec)
        return Outcome(True, (path, lat_path.name, res.best_loss, psnr(rec, target),
                              ssim(rec, target), res.iterations_run, "ok", ""),
                       trace=res.loss_trace)

    outcomes = _map(_guard(work), images, jobs)
    if plots:  # pyplot is not thread-safe; draw after the workers finish
        for i, (o, p) in enumerate(zip(outcomes, images)):
            if o.ok:
                plotting.loss_trace(o.trace, out_dir / f"{i:04d}_{Path(p).stem}_loss.png",
                                    title=Path(p).name)
    rows = [o.row if o.ok else (p, "", None, None, None, 0, "failed", o.reason)
            for o, p in zip(outcomes, images)]
    io.write_csv(out_dir / "embed_summary.csv",
                 ("image", "latent", "best_loss", "psnr", "ssim", "iterations", "status", "reason"),
                 rows)
    for r in rows:
        print(f"{r[0]}: {r[6]} best_loss={io.fmt_float(r[2])} psnr={io.fmt_float(r[3])}")
    return _exit_code(outcomes)


# --- directions --------------------------------------------------------------------

def load_latent_dataset(manifest) -> LabeledLatentDataset:
    doc = io.load_manifest(manifest, "latents")
    entries = [e for e in doc["entries"] if "label" in e]
    if not entries:
        raise ValueError("manifest has no labelled entries")
    codes = np.stack([io.load_latent(e["latent"]) for e in entries])
    labels = np.array([e["label"] for e in entries])
    names = tuple(doc.get("label_names", ("negative", "positive")))
    return LabeledLatentDataset(codes, labels, names)


def cmd_extract_direction(manifest, cfg: LogisticConfig, name: str, out_file, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_latent_dataset(manifest)
    fit = train_logistic(ds, cfg)
    d = io.quantize_direction(extract_direction(fit.a_raw, fit.b, name, fit.train_acc))
    out_file = Path(out_file) if out_file else out_dir / f"{name}.dir"
    io.save_direction(out_file, d)
    n_train = int(round(cfg.split * len(ds)))
    io.write_csv(out_dir / f"{name}_accuracy.csv",
                 ("name", "n_train", "n_test", "train_acc", "test_acc"),
                 [(name, n_train, len(ds) - n_train, fit.train_acc, fit.test_acc)])
    print(f"{name}: train_acc={fit.train_acc:.4f} test_acc={fit.test_acc:.4f} -> {out_file}")
    return EXIT_OK


def _direction_names(dirs, paths) -> list[str]:
    names = [d.name or Path(p).stem for d, p in zip(dirs, paths)]
    if len(set(names)) != len(names):
        names = [Path(p).stem for p in paths]
    return names


def cmd_correlate(paths: Sequence, out_dir, disentangle=None, iterate: bool = False,
                  plots: bool = True) -> int:
    """Write ``correlation.csv``; optionally project the first direction off the rest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = [io.load_direction(p) for p in paths]
    c = correlation_matrix(dirs)
    names = _direction_names(dirs, paths)
    io.write_csv(out_dir / "correlation.csv", ("direction", *names),
                 [(n, *map(float, row)) for n, row in zip(names, c)])
    if plots:
        plotting.correlation_heatmap(c, names, out_dir / "correlation.png")
    print("correlation matrix:")
    for n, row in zip(names, c):
        print(f"  {n:>16s} " + " ".join(f"{v:+.3f}" for v in row))
    if disentangle:
        proj = project_subtract(dirs[0], dirs[1:], iterate=iterate)
        proj = io.quantize_direction(proj)
        io.save_direction(disentangle, proj)
        resid = max(abs(float(np.vdot(proj.a, x.a))) for x in dirs[1:])
        print(f"projected {names[0]} off {', '.join(names[1:])}: max |cos| = {resid:.3g} "
              f"-> {disentangle}")
    return EXIT_OK


# --- edit --------------------------------------------------------------------------

def cmd_edit(latent_path, direction_path, alphas: Sequence[float], mask_spec: str, gen,
             out_dir, plots: bool = True) -> int:
    """Write ``edit_XX.lat`` / ``edit_XX.ppm`` per alpha and ``sweep.csv``
    (``index,alpha,output_path``; output_path is the LAT1 file name relative
    to ``out_dir``, the rendered image sits beside it with the same stem)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w = io.load_latent(latent_path)
    d = io.load_direction(direction_path)
    mask = LayerMask.parse(mask_spec, w.shape[0])
    lo, hi = ADVISORY_ALPHA_RANGE
    for al in alphas:
        if not lo <= al <= hi:
            log.warning("alpha %g lies outside the advisory range [%g, %g]", al, lo, hi)
    codes = sweep(w, d, alphas, mask)
    rows, images = [], []
    for i, (al, code) in enumerate(zip(alphas, codes)):
        lat = out_dir / f"edit_{i:02d}.lat"
        io.save_latent(lat, code)
        img = gen.generate(code)
        io.write_image(out_dir / f"edit_{i:02d}.ppm", img)
        images.append(img)
        rows.append((i, float(al), lat.name))
    io.write_csv(out_dir / "sweep.csv", ("index", "alpha", "output_path"), rows)
    if plots:
        plotting.image_strip(images, [f"{a:+g}" for a in alphas], out_dir / "sweep.png")
    print(f"wrote {len(rows)} edits (mask layers {mask}) to {out_dir}")
    return EXIT_OK


# --- evaluate ----------------------------------------------------------------------

def cmd_evaluate(pairs_manifest, ext: FeatureExtractor, embedder_factory: Callable, out_dir,
                 jobs: int = 1) -> int:
    """``metrics.csv`` has columns ``pair_id,psnr,ssim,perceptual,identity``;
    ``metrics_set.csv`` holds one ``set,n_a,n_b,frechet`` line; failures go to
    ``metrics_skipped.csv`` (``pair_id,reason``)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = io.load_manifest(pairs_manifest, "pairs")["pairs"]
    embedders: dict = {}

    def work(i, pair):
        a, b = io.read_image(pair["a"]), io.read_image(pair["b"])
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        emb = embedders.setdefault(a.shape, embedder_factory(a.shape))
        pid = pair.get("id", str(i))
        row = (pid, psnr(a, b), ssim(a, b), perceptual_distance(ext, a, b),
               identity_distance(emb, a, b))
        return Outcome(True, row + (ext.extract(a), ext.extract(b)))

    # embedders are built per shape before threads race on the cache
    for pair in pairs:
        try:
            shape = io.read_image(pair["a"]).shape
            embedders.setdefault(shape, embedder_factory(shape))
        except EXPECTED_ERRORS:
            pass
    outcomes = _map(_guard(work), pairs, jobs)
    good = [o for o in outcomes if o.ok]
    io.write_csv(out_dir / "metrics.csv", METRICS_COLUMNS, [o.row[:5] for o in good])
    io.write_csv(out_dir / "metrics_skipped.csv", ("pair_id", "reason"),
                 [(p.get("id", str(i)), o.reason)
                  for i, (p, o) in enumerate(zip(pairs, outcomes)) if not o.ok])
    fd = None
    if len(good) >= 2:
        fa = fit_gaussian([o.row[5] for o in good])
        fb = fit_gaussian([o.row[6] for o in good])
        fd = frechet_distance(fa, fb)
    io.write_csv(out_dir / "metrics_set.csv", ("set", "n_a", "n_b", "frechet"),
                 [("all", len(good), len(good), fd)])
    print(f"evaluated {len(good)} / {len(pairs)} pairs; frechet={io.fmt_float(fd)}")
    return _exit_code(outcomes)
