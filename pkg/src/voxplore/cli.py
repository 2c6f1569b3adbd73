"""Command-line workbench wrapping the full pipeline.

Exit codes by error family: 0 success, 2 usage, 3 unreadable or
inconsistent input data, 4 malformed artifact/document, 5 stale or
missing feature cache, 6 violated precondition, 7 diverged computation.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .cache import FeatureCache, StaleFeaturesError
from .forest import (ForestFormatError, ProbabilityVolume, ScribbleError,
                     ScribbleSet, apply_background_rule,
                     load_probability_volume, save_forest,
                     save_probability_volume)
from .inr import InrFeatures, load_checkpoint, extract_features, save_checkpoint, save_features
from .inr.checkpoint import CheckpointError, read_checkpoint_meta
from .inr.features import FeatureCacheError, load_features, volume_content_hash
from .inr.train import TrainingDiverged
from .metrics import f1_scores
from .phantoms import PhantomError, generate_phantom
from .render import (Camera, CameraError, RenderConfig, TfError,
                     TransferFunctionSet, default_class_tfs, grayscale_tf,
                     render, render_intensity, render_slice, save_png)
from .render.camera import orbit_camera
from .scribblesim import BudgetError, simulate_scribble_levels, simulate_scribbles
from .viewpoints import recommend_viewpoints
from .volume import (LabelVolume, ScalarVolume, VolumeError, load_labels,
                     load_volume, save_labels, save_volume)

EXIT_INPUT = 3
EXIT_FORMAT = 4
EXIT_STALE = 5
EXIT_PRECONDITION = 6
EXIT_RUNTIME = 7

_ERROR_FAMILIES = (
    ((VolumeError, PhantomError, FileNotFoundError), EXIT_INPUT),
    ((CheckpointError, FeatureCacheError, ForestFormatError, TfError,
      json.JSONDecodeError), EXIT_FORMAT),
    ((StaleFeaturesError,), EXIT_STALE),
    ((ScribbleError, BudgetError, CameraError, ValueError), EXIT_PRECONDITION),
    ((TrainingDiverged,), EXIT_RUNTIME),
)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:           # noqa: BLE001 - mapped to exit codes
            for types, code in _ERROR_FAMILIES:
                if isinstance(exc, types):
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(code)
            raise
    return wrapper


def apply_config(ctx, kwargs):
    """Fill parameters from --config JSON where flags were not given."""
    config_path = kwargs.pop("config", None)
    if not config_path:
        return kwargs
    doc = json.loads(Path(config_path).read_text())
    for name, value in doc.items():
        if name not in kwargs:
            continue
        source = ctx.get_parameter_source(name)
        if source is not None and source.name == "DEFAULT":
            kwargs[name] = value
    return kwargs


def inr_options(fn):
    opts = [
        click.option("--levels", default=8, show_default=True, type=int),
        click.option("--features-per-level", default=2, show_default=True, type=int),
        click.option("--table-size", default=1 << 16, show_default=True, type=int),
        click.option("--base-resolution", default=16, show_default=True, type=int),
        click.option("--per-level-scale", default=1.5, show_default=True, type=float),
        click.option("--patch-side", default=5, show_default=True, type=int),
        click.option("--fusion", default="film", show_default=True,
                     type=click.Choice(["film", "concat", "none"])),
        click.option("--learning-rate", default=1e-4, show_default=True, type=float),
        click.option("--epochs", default=100, show_default=True, type=int),
        click.option("--batch-size", default=65536, show_default=True, type=int),
        click.option("--lambda-grad", default=1.0, show_default=True, type=float),
        click.option("--lambda-stat", default=0.5, show_default=True, type=float),
        click.option("--seed", default=0, show_default=True, type=int),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def forest_options(fn):
    opts = [
        click.option("--trees", default=1000, show_default=True, type=int),
        click.option("--min-samples-split", default=8, show_default=True, type=int),
        click.option("--tau", default=0.5, show_default=True, type=float),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


_INR_KEYS = ("levels", "features_per_level", "table_size", "base_resolution",
             "per_level_scale", "patch_side", "fusion", "learning_rate",
             "epochs", "batch_size", "lambda_grad", "lambda_stat", "seed")


def estimator_from(kwargs) -> InrFeatures:
    return InrFeatures(**{k: kwargs[k] for k in _INR_KEYS})


def _load_scribbles(path, dims) -> ScribbleSet:
    doc = json.loads(Path(path).read_text())
    return ScribbleSet.from_document(doc, dims=dims)


def _camera_from_file(path, vol) -> Camera:
    doc = json.loads(Path(path).read_text())
    if "direction" in doc:
        extent = np.array(vol.dims) * np.array(vol.spacing)
        return orbit_camera(extent / 2.0, doc["direction"],
                            doc.get("radius_scale", 1.5) * float(np.linalg.norm(extent)),
                            width=doc.get("width", 256), height=doc.get("height", 256),
                            fov_y_deg=doc.get("fov_y_deg", 40.0))
    return Camera(tuple(doc["eye"]), tuple(doc["look_at"]),
                  tuple(doc.get("up", (0, 0, 1))), doc.get("fov_y_deg", 40.0),
                  doc.get("width", 256), doc.get("height", 256))


def _default_camera(vol, width=256, height=256) -> Camera:
    extent = np.array(vol.dims) * np.array(vol.spacing)
    return orbit_camera(extent / 2.0, (1.0, 1.0, 1.0),
                        1.5 * float(np.linalg.norm(extent)),
                        width=width, height=height)


@click.group()
def main():
    """Neural volume-exploration workbench."""


@main.command()
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--config", "-c", default=None, type=click.Path(exists=True))
@inr_options
@click.pass_context
@handles_errors
def train(ctx, **kwargs):
    """Train the feature network and write checkpoint + loss log."""
    kwargs = apply_config(ctx, kwargs)
    vol = load_volume(kwargs["volume"])
    est = estimator_from(kwargs)
    out = Path(kwargs["out"])
    out.mkdir(parents=True, exist_ok=True)

    def progress(epoch, total, losses):
        if epoch == 1 or epoch % 10 == 0 or epoch == total:
            click.echo(f"epoch {epoch}/{total} loss={losses['total']:.6f}")

    if kwargs["cache_dir"]:
        cache = FeatureCache(kwargs["cache_dir"])
        features, model, hit = cache.get_or_train(vol, est, progress_cb=progress)
        click.echo("cache hit" if hit else "trained and cached")
        history = [] if hit else est.history_
        save_features(features, out / "features.vxfv")
    else:
        est.fit(vol, progress_cb=progress)
        model, history = est.model_, est.history_
        save_features(est.transform(), out / "features.vxfv")
    save_checkpoint(model, out / "checkpoint.vxpc", est.train_config())
    (out / "losses.json").write_text(json.dumps(history, indent=2) + "\n")
    click.echo(f"wrote {out / 'checkpoint.vxpc'}")


@main.command()
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--half", is_flag=True, help="store float16 payload")
@handles_errors
def features(volume, checkpoint, out, half):
    """Extract per-voxel features from a trained checkpoint."""
    vol = load_volume(volume)
    model = load_checkpoint(checkpoint)
    meta = read_checkpoint_meta(checkpoint)
    source_hash = ""
    if "train" in meta:
        from .inr.config import TrainConfig
        from .inr.features import feature_source_hash
        source_hash = feature_source_hash(vol, model.config,
                                          TrainConfig.from_dict(meta["train"]))
    fv = extract_features(model, vol, source_hash)
    save_features(fv, out, half=half)
    click.echo(f"wrote {out} ({fv.width}-D, dims {fv.dims})")


@main.command()
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--features", "-f", "features_path", default=None, type=click.Path())
@click.option("--scribbles", "-s", required=True, type=click.Path(exists=True))
@click.option("--out", "-o", required=True, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--retrain", is_flag=True,
              help="train features when missing or stale")
@click.option("--config", "-c", default=None, type=click.Path(exists=True))
@forest_options
@click.option("--forest-seed", default=0, show_default=True, type=int)
@inr_options
@click.pass_context
@handles_errors
def classify(ctx, **kwargs):
    """Fit the scribble forest and write probability volume + labels."""
    kwargs = apply_config(ctx, kwargs)
    vol = load_volume(kwargs["volume"])
    fv = None
    if kwargs["features_path"] and Path(kwargs["features_path"]).exists():
        fv = load_features(kwargs["features_path"])
        if fv.volume_hash and fv.volume_hash != volume_content_hash(vol):
            if not kwargs["retrain"]:
                raise StaleFeaturesError(
                    "feature cache was built from a different volume "
                    "(source hash mismatch); pass --retrain to rebuild")
            fv = None
    elif not kwargs["retrain"] and not kwargs["cache_dir"]:
        raise StaleFeaturesError("missing features: pass --features, or "
                                 "--retrain/--cache-dir to train them")
    if fv is None:
        est = estimator_from(kwargs)
        if kwargs["cache_dir"]:
            fv, _, _ = FeatureCache(kwargs["cache_dir"]).get_or_train(vol, est)
        else:
            fv = est.fit(vol).transform()
    if fv.dims != vol.dims:
        raise StaleFeaturesError(f"feature dims {fv.dims} do not cover volume "
                                 f"dims {vol.dims}")

    scribbles = _load_scribbles(kwargs["scribbles"], vol.dims)
    pred, pv, forest = harness.classify_features(
        fv.features, scribbles, vol.dims,
        {"trees": kwargs["trees"], "min_samples_split": kwargs["min_samples_split"],
         "seed": kwargs["forest_seed"]},
        kwargs["tau"])
    out = Path(kwargs["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_probability_volume(pv, out / "probabilities.vxpv")
    save_forest(forest, out / "forest.vxrf")
    nx, ny, nz = vol.dims
    save_labels(LabelVolume(pred.reshape((nx, ny, nz), order="F").astype(np.int32)),
                out / "predicted_labels.json")
    flat = scribbles.flat_indices(vol.dims)
    train_pred = pred[flat]
    accuracy = {}
    for cid in sorted(set(scribbles.classes.tolist())):
        sel = scribbles.classes == cid
        accuracy[str(cid)] = float((train_pred[sel] == cid).mean())
    report = {"classes": [int(c) for c in forest.classes_],
              "n_scribbles": len(scribbles),
              "train_accuracy_per_class": accuracy, "tau": kwargs["tau"]}
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    click.echo(json.dumps(report))


@main.command(name="render")
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--prob", "-p", required=True, type=click.Path(exists=True))
@click.option("--tf", "tf_path", default=None, type=click.Path(exists=True))
@click.option("--camera", "camera_path", default=None, type=click.Path(exists=True))
@click.option("--mode", default="probability_intensity", show_default=True,
              type=click.Choice(["probabilistic", "probability_intensity"]))
@click.option("--step-size", default=0.5, show_default=True, type=float)
@click.option("--width", default=256, show_default=True, type=int)
@click.option("--height", default=256, show_default=True, type=int)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def render_cmd(volume, prob, tf_path, camera_path, mode, step_size, width,
               height, out):
    """Ray-cast the probability volume to a PNG image."""
    vol = load_volume(volume)
    pv = load_probability_volume(prob)
    if tf_path:
        tfs = TransferFunctionSet.from_document(json.loads(Path(tf_path).read_text()))
    else:
        tfs = default_class_tfs(pv.foreground_ids)
    cam = (_camera_from_file(camera_path, vol) if camera_path
           else _default_camera(vol, width, height))
    img = render(vol, pv, tfs, cam, RenderConfig(mode=mode, step_size=step_size))
    save_png(img, out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--axis", default=2, show_default=True, type=click.IntRange(0, 2))
@click.option("--index", required=True, type=int)
@click.option("--overlay", default="none", show_default=True,
              type=click.Choice(["none", "scribbles", "probability", "label"]))
@click.option("--scribbles", "-s", default=None, type=click.Path(exists=True))
@click.option("--prob", "-p", default=None, type=click.Path(exists=True))
@click.option("--labels", "-l", default=None, type=click.Path(exists=True))
@click.option("--overlay-alpha", default=0.6, show_default=True, type=float)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def slices(volume, axis, index, overlay, scribbles, prob, labels,
           overlay_alpha, out):
    """Write one slice as a grayscale PNG with optional overlays."""
    vol = load_volume(volume)
    ss = _load_scribbles(scribbles, vol.dims) if scribbles else None
    pv = load_probability_volume(prob) if prob else None
    lv = load_labels(labels) if labels else None
    img = render_slice(vol, axis, index, overlay, scribbles=ss, prob=pv,
                       labels=lv, overlay_alpha=overlay_alpha)
    save_png(img, out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--volume", "-v", required=True, type=click.Path(exists=True))
@click.option("--features", "-f", "features_path", required=True,
              type=click.Path(exists=True))
@click.option("--k", default=50, show_default=True, type=int)
@click.option("--m", default=1800, show_default=True, type=int)
@click.option("--coverage", default=0.95, show_default=True, type=float)
@click.option("--max-views", default=8, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--thumbnails/--no-thumbnails", default=True, show_default=True)
@click.option("--thumb-size", default=128, show_default=True, type=int)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def viewpoints(volume, features_path, k, m, coverage, max_views, seed,
               thumbnails, thumb_size, out):
    """Recommend complementary viewpoints from clustered features."""
    from .volume import compute_derived_fields
    vol = load_volume(volume)
    fv = load_features(features_path)
    if fv.dims != vol.dims:
        raise StaleFeaturesError(f"feature dims {fv.dims} do not cover volume "
                                 f"dims {vol.dims}")
    fields = compute_derived_fields(vol, 5)
    report, clusters = recommend_viewpoints(fv, vol, fields, k=k, m=m, seed=seed,
                                            coverage_target=coverage,
                                            max_views=max_views)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "viewpoints.json").write_text(
        json.dumps(report.to_document(), indent=2) + "\n")
    if thumbnails:
        gray = grayscale_tf()
        for rank, idx in enumerate(report.selected):
            cam = orbit_camera(report.views.center, report.views.directions[idx],
                               report.views.radius, width=thumb_size,
                               height=thumb_size)
            img = render_intensity(vol, gray, cam)
            save_png(img, out / f"viewpoint_{rank:02d}_idx{idx}.png")
    click.echo(json.dumps({"selected": report.selected,
                           "coverage": report.coverage}))


@main.command()
@click.option("--kind", default="nested-spheres-overlapping-intensity",
              show_default=True)
@click.option("--dims", default="48,48,48", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--noise-sigma", default=None, type=float)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def phantom(kind, dims, seed, noise_sigma, out):
    """Generate a synthetic phantom volume with ground-truth labels."""
    dims_t = tuple(int(d) for d in dims.split(","))
    if len(dims_t) == 1:
        dims_t = dims_t * 3
    params = {} if noise_sigma is None else {"noise_sigma": noise_sigma}
    ph = generate_phantom(kind, dims_t, seed=seed, **params)
    out = Path(out)
    meta = save_volume(ph.vol, out)
    labels_path = out.parent / (out.stem + "_labels.json")
    save_labels(ph.labels, labels_path)
    (out.parent / (out.stem + "_descriptor.json")).write_text(
        json.dumps(ph.descriptor, indent=2) + "\n")
    click.echo(f"wrote {meta} and {labels_path}")


@main.command()
@click.option("--kind", default="nested-spheres-overlapping-intensity",
              show_default=True)
@click.option("--dims", default="48,48,48", show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--levels", default="S1,S2,S3,S4", show_default=True)
@click.option("--trees", default=1000, show_default=True, type=int)
@click.option("--epochs", default=100, show_default=True, type=int)
@click.option("--batch-size", default=8192, show_default=True, type=int)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def eval(kind, dims, seeds, levels, trees, epochs, batch_size, out):
    """Scribble-sensitivity sweep on a phantom (budget ladder x seeds)."""
    dims_t = tuple(int(d) for d in dims.split(","))
    if len(dims_t) == 1:
        dims_t = dims_t * 3
    seed_list = [int(s) for s in seeds.split(",")]
    level_list = levels.split(",")
    ph = generate_phantom(kind, dims_t, seed=seed_list[0])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_volume(ph.vol, out / "phantom.json")
    save_labels(ph.labels, out / "phantom_labels.json")
    rows = harness.run_scribble_sensitivity(
        ph, seeds=seed_list, levels=level_list,
        inr_kwargs={"epochs": epochs, "batch_size": batch_size},
        forest_kwargs={"trees": trees})
    harness.write_csv(rows, out / "sensitivity.csv")
    summary = harness.summarize(rows, "level")
    lines = [f"{level}: mean F1 over seeds = {summary[level]:.4f}"
             for level in level_list]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    click.echo("\n".join(lines))


@main.command()
@click.option("--kind", default="nested-spheres-overlapping-intensity",
              show_default=True)
@click.option("--dims", default="48,48,48", show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--level", default="S1", show_default=True)
@click.option("--trees", default=1000, show_default=True, type=int)
@click.option("--epochs", default=100, show_default=True, type=int)
@click.option("--batch-size", default=8192, show_default=True, type=int)
@click.option("--out", "-o", required=True, type=click.Path())
@handles_errors
def ablate(kind, dims, seeds, level, trees, epochs, batch_size, out):
    """Architecture ladder + local-feature baseline at a fixed budget."""
    dims_t = tuple(int(d) for d in dims.split(","))
    if len(dims_t) == 1:
        dims_t = dims_t * 3
    seed_list = [int(s) for s in seeds.split(",")]
    ph = generate_phantom(kind, dims_t, seed=seed_list[0])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.run_ablation(
        ph, level=level, seeds=seed_list,
        inr_kwargs={"epochs": epochs, "batch_size": batch_size},
        forest_kwargs={"trees": trees})
    harness.write_csv(rows, out / "ablation.csv")
    summary = harness.summarize(rows, "config")
    lines = [f"{name}: mean F1 over seeds = {value:.4f}"
             for name, value in summary.items()]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    click.echo("\n".join(lines))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8800, show_default=True, type=int)
@click.option("--cache-dir", default=None, type=click.Path())
@handles_errors
def serve(host, port, cache_dir):
    """Run the HTTP service for the interactive UI."""
    import uvicorn
    from .service.app import create_app
    uvicorn.run(create_app(cache_dir=cache_dir), host=host, port=port)


if __name__ == "__main__":
    main()
