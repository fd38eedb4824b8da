"""Self-contained synthetic run of the whole align -> embed -> direction -> edit
-> evaluate pipeline, with a pass/fail line per threshold."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io, plotting
from .directions import (
    LogisticConfig,
    correlation_matrix,
    cosine_similarity,
    extract_direction,
    project_subtract,
    train_logistic,
)
from .editing import EditSpec, LayerMask, edit_latent, sweep
from .embedding import EmbedConfig, InitStrategy, embed, init_latent, pixel_mse, total_loss
from .generator import LinearGenerator, PatchFeatures, ProjectionEmbedder, sample_latent
from .geometry import AlignConfig, align_face, alignment_transform, eye_centers, rotation_angle
from .metrics import fit_gaussian, frechet_distance, identity_distance, perceptual_distance, psnr, ssim
from .synthetic import correlated_direction, dark_blob_centroid, planted_dataset, render_face

DEMO_ALPHAS = (-5.0, -3.0, 0.0, 3.0, 5.0)


@dataclass
class Check:
    name: str
    value: float
    op: str
    threshold: float

    @property
    def ok(self) -> bool:
        v, t = self.value, self.threshold
        return {"<=": v <= t, ">=": v >= t, "<": v < t, ">": v > t, "==": v == t}[self.op]

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status}  {self.name:<38s} {self.value:.6g} {self.op} {self.threshold:g}"


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_demo(seed: int = 0, out_dir="demo_out", plots: bool = True,
             iterations: int = 1000, n_latents: int = 2000) -> list[Check]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    s = _seeds(seed, 12)
    checks: list[Check] = []

    # 1. alignment of a rotated synthetic face
    img, box, lm = render_face(128, angle=23.0)
    acfg = AlignConfig(out_size=128)
    aligned = align_face(img, box, lm, acfg)
    le, re = alignment_transform(lm, acfg).apply(np.stack(eye_centers(lm)))
    r = 0.1 * acfg.out_size
    blob_angle = rotation_angle(dark_blob_centroid(aligned, le, r), dark_blob_centroid(aligned, re, r))
    checks.append(Check("aligned eye angle |deg|", abs(blob_angle), "<=", 0.1))
    io.write_image(out_dir / "face_input.ppm", img)
    io.write_image(out_dir / "face_aligned.ppm", aligned)

    # 2. synthetic world
    gen = LinearGenerator(s[0])
    io.save_generator(out_dir / "world.gen", gen)
    d = gen.planted
    shape = gen.latent_shape
    lcfg = LogisticConfig(seed=s[1])

    # 3. attribute directions from noisy labels
    ds = planted_dataset(d, n_latents, s[2], noise=0.1, names=("thin", "heavy"))
    fit = train_logistic(ds, lcfg)
    weight = io.quantize_direction(extract_direction(fit.a_raw, fit.b, "weight", fit.train_acc))
    cos_w = abs(float(np.vdot(weight.a, d)))
    checks.append(Check("|cos(extracted, planted)|", cos_w, ">=", 0.95))

    rng = np.random.Generator(np.random.PCG64(s[3]))
    shuffled = type(ds)(ds.codes, rng.permutation(ds.labels), ds.label_names)
    ctrl = train_logistic(shuffled, lcfg)
    checks.append(Check("shuffled-label |test_acc - 0.5|", abs(ctrl.test_acc - 0.5), "<=", 0.1))

    x_true = correlated_direction(d, 0.3, s[4])
    ds_x = planted_dataset(x_true, n_latents, s[5], noise=0.1, names=("closed", "open"))
    fit_x = train_logistic(ds_x, lcfg)
    other = io.quantize_direction(extract_direction(fit_x.a_raw, fit_x.b, "mouth", fit_x.train_acc))
    corr = correlation_matrix([weight, other])
    projected = project_subtract(weight, [other], iterate=True)
    resid = abs(float(np.vdot(projected.a, other.a)))
    checks.append(Check("max |<a', x>| after projection", resid, "<=", 1e-10))
    io.save_direction(out_dir / "weight.dir", weight)
    io.save_direction(out_dir / "mouth.dir", other)
    io.save_direction(out_dir / "weight_projected.dir", io.quantize_direction(projected))

    # 4. inversion of a held-out image
    ext = PatchFeatures(4)
    w0 = sample_latent(s[6], shape)
    target = gen.generate(w0)
    ecfg = EmbedConfig(iterations=iterations, init=InitStrategy("random", seed=s[7]))
    res = embed(target, gen, ext, ecfg)
    vgg, mse_size = ecfg.sizes(gen.out_size)
    recon = gen.generate(res.w_star)
    mse = pixel_mse(recon, target)
    reeval = total_loss(ecfg.weights, ext, recon, target, vgg, mse_size)
    checks.append(Check("embed pixel_mse", mse, "<=", 1e-4))
    checks.append(Check("embed PSNR dB", psnr(recon, target), ">=", 40.0))
    checks.append(Check("|best_loss - min(trace)|", abs(res.best_loss - res.loss_trace.min()), "<=", 0.0))
    checks.append(Check("|loss(G(w*)) - best_loss|", abs(reeval - res.best_loss), "<=", 1e-12))
    io.save_latent(out_dir / "embedded.lat", res.w_star)
    io.write_loss_trace(out_dir / "embed_loss.csv", res.loss_trace)

    # 5. initialisation comparison over 20 seeded images
    init_rows = []
    for k, ts in enumerate(_seeds(s[8], 20)):
        tgt = gen.generate(sample_latent(ts, shape))
        row = [k]
        for strat in (InitStrategy("encoder"), InitStrategy("random", seed=ts + 1),
                      InitStrategy("mean_latent", seed=ts + 2, samples=1000)):
            w = init_latent(strat, gen, tgt)
            row.append(total_loss(ecfg.weights, ext, gen.generate(w), tgt, vgg, mse_size))
        init_rows.append(row)
    init_arr = np.array([r[1:] for r in init_rows])
    io.write_csv(out_dir / "init_comparison.csv", ("trial", "encoder", "random", "mean_latent"),
                 [(r[0], *map(float, r[1:])) for r in init_rows])
    checks.append(Check("mean init loss: encoder - random", float(init_arr[:, 0].mean()
                                                                   - init_arr[:, 1].mean()), "<", 0.0))

    # 6. editing sweeps along the disentangled direction
    mask = LayerMask.default(shape[0])
    full = LayerMask.full(shape[0])
    w_star = io.quantize_latent(res.w_star)
    same = edit_latent(w_star, EditSpec(projected, 0.0, mask))
    checks.append(Check("alpha=0 max |diff|", float(np.max(np.abs(same - w_star))), "==", 0.0))
    twice = edit_latent(edit_latent(w_star, EditSpec(projected, 1.5, full)), EditSpec(projected, 2.0, full))
    once = edit_latent(w_star, EditSpec(projected, 3.5, full))
    checks.append(Check("composition max |diff|", float(np.max(np.abs(twice - once))), "<=", 1e-12))
    shifted = edit_latent(w_star, EditSpec(projected, 3.0, full))
    logit_shift = float(np.vdot(projected.a, shifted) - np.vdot(projected.a, w_star))
    checks.append(Check("full-mask logit shift - alpha", abs(logit_shift - 3.0), "<=", 1e-12))

    held = [sample_latent(hs, shape) for hs in _seeds(s[9], 10)]
    curves = []
    for w in held:
        curves.append([gen.statistic(gen.generate(c)) for c in sweep(w, projected, DEMO_ALPHAS, mask)])
    min_step = float(np.min(np.diff(np.array(curves), axis=1)))
    checks.append(Check("min statistic step across alpha sweep", min_step, ">", 0.0))

    edits = sweep(w_star, projected, DEMO_ALPHAS, mask)
    edit_imgs = [gen.generate(c) for c in edits]
    for i, (al, c, im) in enumerate(zip(DEMO_ALPHAS, edits, edit_imgs)):
        io.save_latent(out_dir / f"edit_{i:02d}.lat", c)
        io.write_image(out_dir / f"edit_{i:02d}.ppm", im)
    io.write_csv(out_dir / "sweep.csv", ("index", "alpha", "output_path"),
                 [(i, al, f"edit_{i:02d}.lat") for i, al in enumerate(DEMO_ALPHAS)])

    # 7. evaluation
    embedder = ProjectionEmbedder(s[10], 64, target.shape)
    metric_rows = [("embedding", psnr(recon, target), ssim(recon, target),
                    perceptual_distance(ext, recon, target), identity_distance(embedder, recon, target))]
    ref_imgs = [gen.generate(w) for w in held]
    trans_imgs = [gen.generate(c) for w in held for c in sweep(w, projected, (-5.0, -3.0, 3.0, 5.0), mask)]
    fr = [identity_distance(embedder, ref_imgs[i // 4], im) for i, im in enumerate(trans_imgs)]
    fd = frechet_distance(fit_gaussian([ext.extract(im) for im in ref_imgs]),
                          fit_gaussian([ext.extract(im) for im in trans_imgs]))
    for name, val in (("identity (mean FR analog)", float(np.mean(fr))), ("frechet (FID analog)", fd)):
        metric_rows.append((name, None, None, None, val))
    io.write_csv(out_dir / "metrics.csv", ("item", "psnr", "ssim", "perceptual", "value"), metric_rows)
    checks.append(Check("identity distance in [0, 4]", float(max(fr)), "<=", 4.0))

    corr_names = ["weight", "mouth"]
    io.write_csv(out_dir / "correlation.csv", ("direction", *corr_names),
                 [(n, *map(float, row)) for n, row in zip(corr_names, corr)])

    if plots:
        plotting.loss_trace(res.loss_trace, out_dir / "embed_loss.png", title="inversion")
        plotting.image_strip([target, *edit_imgs], ["target", *(f"{a:+g}" for a in DEMO_ALPHAS)],
                             out_dir / "sweep.png")
        plotting.image_strip([img, aligned], ["input", "aligned"], out_dir / "alignment.png")
        plotting.correlation_heatmap(corr, corr_names, out_dir / "correlation.png")
        plotting.statistic_curves(DEMO_ALPHAS, curves, out_dir / "statistic_sweep.png")

    summary = [
        f"seed {seed}",
        f"logistic test_acc weight={fit.test_acc:.4f} mouth={fit_x.test_acc:.4f} "
        f"shuffled={ctrl.test_acc:.4f}",
        f"cos(weight, mouth) = {cosine_similarity(weight, other):.4f}",
        f"embed best_loss = {res.best_loss:.6g}",
        *(c.line() for c in checks),
    ]
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    io.write_csv(out_dir / "demo_summary.csv", ("check", "value", "op", "threshold", "status"),
                 [(c.name, float(c.value), c.op, float(c.threshold), "pass" if c.ok else "fail")
                  for c in checks])
    print("\n".join(summary))
    return checks


def cmd_demo(seed: int, out_dir, plots: bool = True) -> int:
    checks = run_demo(seed, out_dir, plots)
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)} / {len(checks)} checks passed")
    return 0 if not failed else 1

