"""Command-line front end.

Every option can come from a flat ``key = value`` config file (``--config``)
and be overridden by the flag of the same name. Exit codes: 0 success,
1 per-file failures occurred, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import plotting
from .augment import AppliedParams, AugmentSpec, apply_params, draw_params
from .errors import ConfigError, SoftLabelError
from .io import (atomic_write, decode_prd, float_tiff_bytes, png_bytes, read_gray, read_rgb,
                 sha256_bytes, sha256_file)
from .labels import CITYSCAPES_CLASSES, IGNORE, ClassIdMap, LabelImage, SoftLabelMap, harden, remap_ids
from .losses import EXCLUDE_MC, INCLUDE_MC, PredictionMap, ce_loss, export_loss_map, kl_loss
from .metrics import ConfusionMatrix, class_histogram, confusion, entropy, iou, retention_from_histograms
from .resample import (ALIGNMENTS, KINDS, ColorImage, KernelSpec, downsample_color, downsample_labels,
                       downsample_labels_nn, parse_scale)
from .slt import encode, export_dense, read_slt

log = logging.getLogger("softlabel")

EXIT_OK, EXIT_FILE_ERRORS, EXIT_CONFIG = 0, 1, 2
STRATEGIES = ("soft_paired", "nearest_baseline")


@dataclass
class RunConfig:
    color_dir: str = None
    label_dir: str = None
    output_dir: str = None
    id_map: str = None
    num_classes: int = None
    kernel: str = "bilinear"
    alignment: str = "half_pixel_center"
    gamma: str = "1/2"
    strategy: str = "soft_paired"
    workers: int = 1
    seed: int = 0
    color_suffix: str = ""
    label_suffix: str = ""
    # metrics / loss
    run_dir: list = field(default_factory=list)
    pred_dir: str = None
    region: str = None
    region_image: str = None
    exact: bool = False
    # augment
    crop: str = None
    scale_range: str = "0.5,2.0"
    samples: int = 1
    pad: bool = True
    replay: str = None
    # export
    input: str = None
    output: str = None
    with_ignore: bool = False
    hard: str = None

    @property
    def scale(self) -> Fraction:
        try:
            return parse_scale(self.gamma)
        except (ValueError, ZeroDivisionError, SoftLabelError) as exc:
            raise ConfigError(f"gamma {self.gamma!r} is not a positive rational") from exc

    def kernel_spec(self, kind=None) -> KernelSpec:
        return KernelSpec(kind or self.kernel, self.scale, self.alignment)

    def class_map(self) -> ClassIdMap:
        if self.id_map in (None, "", "identity"):
            if not self.num_classes:
                raise ConfigError("either id_map or num_classes must be given")
            return ClassIdMap.identity(int(self.num_classes))
        if self.id_map == "cityscapes":
            return ClassIdMap.cityscapes()
        path = Path(self.id_map)
        if not path.is_file():
            raise ConfigError(f"class-id map file {path} does not exist")
        return ClassIdMap.load(path, int(self.num_classes) if self.num_classes else None)

    def class_names(self):
        return CITYSCAPES_CLASSES if self.id_map == "cityscapes" else None

    def validate_common(self):
        if self.kernel not in KINDS:
            raise ConfigError(f"kernel must be one of {KINDS}, got {self.kernel!r}")
        if self.alignment not in ALIGNMENTS:
            raise ConfigError(f"alignment must be one of {ALIGNMENTS}, got {self.alignment!r}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        self.scale  # noqa: B018 - validates gamma


_BOOL_KEYS = {"exact", "pad", "with_ignore"}
_INT_KEYS = {"num_classes", "workers", "seed", "samples"}
_LIST_KEYS = {"run_dir"}


def _coerce(key, value):
    if key in _BOOL_KEYS:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return text in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        try:
            return int(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc
    if key in _LIST_KEYS:
        if isinstance(value, list):
            return value
        return [v.strip() for v in str(value).split(",") if v.strip()]
    return value


def parse_config_file(path) -> dict:
    known = set(RunConfig.__dataclass_fields__)
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def build_config(args) -> RunConfig:
    values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    for key in RunConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag)
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# dataset discovery


def _stem(path: Path, suffix: str):
    name = path.stem
    if suffix and name.endswith(suffix):
        name = name[: -len(suffix)]
    return name


def discover_pairs(cfg: RunConfig):
    """Sorted ``(stem, color_path, label_path_or_None)`` triples."""
    for key in ("color_dir", "label_dir", "output_dir"):
        if not getattr(cfg, key):
            raise ConfigError(f"{key} is required")
    color_dir, label_dir = Path(cfg.color_dir), Path(cfg.label_dir)
    for d in (color_dir, label_dir):
        if not d.is_dir():
            raise ConfigError(f"directory {d} does not exist")
    pairs = []
    for color in sorted(color_dir.glob("*.png")):
        stem = _stem(color, cfg.color_suffix)
        label = label_dir / f"{stem}{cfg.label_suffix}.png"
        pairs.append((stem, color, label if label.is_file() else None, label))
    return pairs


def load_label(path, id_map: ClassIdMap) -> LabelImage:
    return remap_ids(read_gray(path), id_map)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _run_pool(func, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


# ---------------------------------------------------------------------------
# downsample


def _downsample_one(job):
    cfg, stem, color_path, label_path, missing = job
    if label_path is None:
        return {"image": stem, "error": f"missing label file {missing}"}
    try:
        out = Path(cfg.output_dir)
        id_map = cfg.class_map()
        color = ColorImage.from_uint8(read_rgb(color_path))
        label = load_label(label_path, id_map)
        if color.shape != label.shape:
            raise SoftLabelError(f"color {color_path.name} is {color.shape}, label {label_path.name} is {label.shape}")
        kernel = cfg.kernel_spec()
        color_png = png_bytes(downsample_color(color, kernel).to_uint8())
        if cfg.strategy == "soft_paired":
            label_bytes = encode(downsample_labels(label, kernel))
            label_name = f"labels/{stem}.slt"
        else:
            label_bytes = png_bytes(downsample_labels_nn(label, cfg.kernel_spec("nearest")).data)
            label_name = f"labels/{stem}.png"
        atomic_write(out / "color" / f"{stem}.png", color_png)
        atomic_write(out / label_name, label_bytes)
        sidecar = {
            "image": stem,
            "gamma": str(kernel.scale),
            "kernel": kernel.to_dict(),
            "label_kernel": (kernel if cfg.strategy == "soft_paired" else cfg.kernel_spec("nearest")).to_dict(),
            "strategy": cfg.strategy,
            "num_classes": id_map.num_train_classes,
            "ignore": id_map.ignore,
            "input_size": list(label.shape),
            "output_size": list(kernel.out_size(label.shape)),
            "inputs": {"color": sha256_file(color_path), "label": sha256_file(label_path)},
            "outputs": {f"color/{stem}.png": sha256_bytes(color_png), label_name: sha256_bytes(label_bytes)},
        }
        atomic_write(out / "meta" / f"{stem}.json", _json_bytes(sidecar))
        return {"image": stem, "color": f"color/{stem}.png", "label": label_name}
    except (OSError, SoftLabelError, ValueError) as exc:
        return {"image": stem, "error": f"{color_path.name}: {exc}"}


def cmd_downsample(cfg: RunConfig) -> int:
    cfg.validate_common()
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {cfg.strategy!r}")
    cfg.class_map()
    pairs = discover_pairs(cfg)
    jobs = [(cfg, stem, c, l, m) for stem, c, l, m in pairs]
    records = _run_pool(_downsample_one, jobs, int(cfg.workers))
    manifest = {
        "gamma": str(cfg.scale),
        "kernel": cfg.kernel_spec().to_dict(),
        "strategy": cfg.strategy,
        "images": records,
    }
    atomic_write(Path(cfg.output_dir) / "manifest.json", _json_bytes(manifest))
    failures = [r for r in records if "error" in r]
    for r in failures:
        log.error("%s", r["error"])
    return EXIT_FILE_ERRORS if failures else EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def parse_region(text):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        parts = []
    if len(parts) != 4 or parts[2] < 1 or parts[3] < 1 or min(parts) < 0:
        raise ConfigError(f"region must be 'y0,x0,h,w' with non-negative ints and positive size, got {text!r}")
    return tuple(parts)


def _load_run(run_dir: Path):
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"{run_dir} has no manifest.json; run 'downsample' first")
    return json.loads(manifest_path.read_text())


def load_down_labels(run_dir: Path, record, meta):
    """Down-sampled labels of one image as written by ``downsample``."""
    path = run_dir / record["label"]
    if path.suffix == ".slt":
        return read_slt(path)
    return LabelImage(read_gray(path), meta["num_classes"], meta["ignore"])


def _strategy_name(manifest):
    if manifest["strategy"] == "nearest_baseline":
        return "nearest"
    return f"soft_{manifest['kernel']['kind']}"


def _region_down(region, scale, shape):
    top, left, h, w = region
    t0 = int(Fraction(top) * scale)
    l0 = int(Fraction(left) * scale)
    t1 = -int(-(Fraction(top + h) * scale) // 1)
    l1 = -int(-(Fraction(left + w) * scale) // 1)
    t1, l1 = min(max(t1, t0 + 1), shape[0]), min(max(l1, l0 + 1), shape[1])
    return (t0, l0, t1 - t0, l1 - l0)


def cmd_metrics(cfg: RunConfig) -> int:
    if not cfg.label_dir or not cfg.output_dir or not cfg.run_dir:
        raise ConfigError("metrics needs label_dir, run_dir and output_dir")
    region = parse_region(cfg.region) if cfg.region else None
    id_map = cfg.class_map()
    out = Path(cfg.output_dir)
    label_dir = Path(cfg.label_dir)
    failures = []
    reports = []
    entropy_summary = {}
    region_hists, region_labels = [], []

    originals = {}

    def original(stem):
        if stem not in originals:
            path = label_dir / f"{stem}{cfg.label_suffix}.png"
            if not path.is_file():
                raise FileNotFoundError(f"missing original label file {path}")
            originals[stem] = load_label(path, id_map)
        return originals[stem]

    for run in cfg.run_dir:
        run_dir = Path(run)
        manifest = _load_run(run_dir)
        strategy = _strategy_name(manifest)
        scale = Fraction(manifest["gamma"])
        hist_orig = hist_down = None
        region_stem = cfg.region_image
        for record in manifest["images"]:
            if "error" in record:
                continue
            stem = record["image"]
            try:
                meta = json.loads((run_dir / "meta" / f"{stem}.json").read_text())
                orig = original(stem)
                down = load_down_labels(run_dir, record, meta)
                exact = cfg.exact and isinstance(down, SoftLabelMap)
                h_o, h_d = class_histogram(orig), class_histogram(down, exact=exact)
            except (OSError, SoftLabelError, ValueError) as exc:
                failures.append(f"{run_dir.name}/{stem}: {exc}")
                continue
            hist_orig = h_o if hist_orig is None else hist_orig.merge(h_o)
            hist_down = h_d if hist_down is None else hist_down.merge(h_d)
            if region is not None and (region_stem is None or region_stem == stem):
                region_stem = stem
                try:
                    if not region_hists:
                        region_hists.append(class_histogram(orig, region))
                        region_labels.append("original")
                    region_hists.append(class_histogram(down, _region_down(region, scale, down.shape)))
                    region_labels.append(strategy)
                except IndexError as exc:
                    raise ConfigError(str(exc)) from exc
        if hist_orig is None:
            failures.append(f"{run_dir}: no usable images")
            continue
        report = retention_from_histograms(hist_orig, hist_down, scale, strategy)
        reports.append(report)
        atomic_write(out / f"retention_{strategy}.json", report.to_json().encode())
        atomic_write(out / f"retention_{strategy}.csv", report.to_csv().encode())
        h_float = replace(hist_down, counts=np.asarray(hist_down.counts, dtype=np.float64),
                          ignore=float(hist_down.ignore))
        e_orig, e_down = entropy(hist_orig), entropy(h_float)
        entropy_summary[strategy] = {"gamma": str(scale), "original": e_orig, "downsampled": e_down,
                                     "difference": e_down - e_orig}

    if reports:
        atomic_write(out / "entropy.json", _json_bytes(entropy_summary))
        atomic_write(out / "retention.png", plotting.retention_figure(reports, cfg.class_names()))
    if region_hists:
        rows = {lab: [float(x) for x in h.distribution()] for lab, h in zip(region_labels, region_hists)}
        atomic_write(out / "region_hist.json", _json_bytes({"region": list(region), "image": region_stem,
                                                            "distributions": rows}))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class_id"] + region_labels)
        for c in range(region_hists[0].num_classes):
            writer.writerow([c] + [repr(float(h.distribution()[c])) for h in region_hists])
        atomic_write(out / "region_hist.csv", buf.getvalue().encode())
        atomic_write(out / "region_hist.png",
                     plotting.region_figure(region_hists, region_labels, cfg.class_names()))
    for f in failures:
        log.error("%s", f)
    return EXIT_FILE_ERRORS if failures else EXIT_OK


# ---------------------------------------------------------------------------
# loss


def load_prediction(path: Path, num_classes) -> PredictionMap:
    if path.suffix == ".prd":
        return decode_prd(path.read_bytes())
    return PredictionMap.from_labels(read_gray(path), num_classes)


def _loss_one(job):
    cfg, run_dir, record = job
    stem = record["image"]
    try:
        meta = json.loads((run_dir / "meta" / f"{stem}.json").read_text())
        gt = load_down_labels(run_dir, record, meta)
        soft = gt if isinstance(gt, SoftLabelMap) else SoftLabelMap.from_label(gt)
        pred_dir = Path(cfg.pred_dir)
        candidates = [pred_dir / f"{stem}.prd", pred_dir / f"{stem}.png"]
        pred_path = next((p for p in candidates if p.is_file()), None)
        if pred_path is None:
            raise FileNotFoundError(f"no prediction {stem}.prd or {stem}.png in {pred_dir}")
        pred = load_prediction(pred_path, soft.num_classes)
        row = {"image": stem}
        maps = {}
        for name, fn in (("kl", kl_loss), ("ce", ce_loss)):
            for mode in (INCLUDE_MC, EXCLUDE_MC):
                value, lmap = fn(pred, soft, mode)
                row[f"{name}_{mode}"] = value
                row[f"n_{mode}"] = int(lmap.included.sum())
                row[f"sum_{name}_{mode}"] = float(lmap.values.sum())
                if mode == INCLUDE_MC:
                    maps[name] = lmap
        gt_hard = harden(soft, IGNORE)
        cm = confusion(LabelImage(pred.argmax(), soft.num_classes), gt_hard)
        row["confusion"] = cm.counts.tolist()
        out = Path(cfg.output_dir) / "loss_maps"
        for name, lmap in maps.items():
            norm = export_loss_map(lmap, normalize=True)
            atomic_write(out / f"{stem}_{name}.png", png_bytes(np.rint(norm * 255)))
            atomic_write(out / f"{stem}_{name}.tiff", float_tiff_bytes(export_loss_map(lmap, normalize=False)))
        return row
    except (OSError, SoftLabelError, ValueError) as exc:
        return {"image": stem, "error": str(exc)}


def cmd_loss(cfg: RunConfig) -> int:
    if not cfg.run_dir or not cfg.pred_dir or not cfg.output_dir:
        raise ConfigError("loss needs run_dir, pred_dir and output_dir")
    if not Path(cfg.pred_dir).is_dir():
        raise ConfigError(f"prediction directory {cfg.pred_dir} does not exist")
    run_dir = Path(cfg.run_dir[0])
    manifest = _load_run(run_dir)
    jobs = [(cfg, run_dir, r) for r in manifest["images"] if "error" not in r]
    rows = _run_pool(_loss_one, jobs, int(cfg.workers))
    good = [r for r in rows if "error" not in r]
    aggregate = {}
    cm_total = None
    for name in ("kl", "ce"):
        for mode in (INCLUDE_MC, EXCLUDE_MC):
            n = sum(r[f"n_{mode}"] for r in good)
            total = sum(r[f"sum_{name}_{mode}"] for r in good)
            aggregate[f"{name}_{mode}"] = total / n if n else 0.0
    for r in good:
        cm = np.asarray(r.pop("confusion"))
        cm_total = cm if cm_total is None else cm_total + cm
    if cm_total is not None and cm_total.sum() > 0:
        per_class, miou = iou(ConfusionMatrix(cm_total))
        aggregate["miou"] = miou
        aggregate["iou"] = [None if np.isnan(v) else float(v) for v in per_class]
    report = {"strategy": _strategy_name(manifest), "gamma": manifest["gamma"],
              "images": rows, "aggregate": aggregate}
    out = Path(cfg.output_dir)
    atomic_write(out / "loss_report.json", _json_bytes(report))
    buf = io.StringIO()
    cols = ["image"] + [f"{n}_{m}" for n in ("kl", "ce") for m in (INCLUDE_MC, EXCLUDE_MC)]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in good:
        writer.writerow([r["image"]] + [repr(r[c]) for c in cols[1:]])
    atomic_write(out / "loss_report.csv", buf.getvalue().encode())
    failures = [r for r in rows if "error" in r]
    for r in failures:
        log.error("%s: %s", r["image"], r["error"])
    return EXIT_FILE_ERRORS if failures else EXIT_OK


# ---------------------------------------------------------------------------
# augment


def parse_crop(text):
    try:
        h, w = (int(p) for p in str(text).lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"crop must look like HxW, got {text!r}") from exc
    return (h, w)


def parse_range(text):
    try:
        lo, hi = (float(p) for p in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"scale_range must look like lo,hi, got {text!r}") from exc
    return (lo, hi)


def augment_spec(cfg: RunConfig) -> AugmentSpec:
    if not cfg.crop:
        raise ConfigError("augment needs crop (HxW)")
    return AugmentSpec(parse_crop(cfg.crop), parse_range(cfg.scale_range), cfg.kernel, cfg.alignment,
                       int(cfg.seed), bool(cfg.pad))


def _augment_one(job):
    cfg, spec, stem, color_path, label_path, missing, indices, recorded = job
    if label_path is None:
        return [{"image": stem, "error": f"missing label file {missing}"}]
    try:
        color = ColorImage.from_uint8(read_rgb(color_path))
        label = load_label(label_path, cfg.class_map())
        spec.check_image(*label.shape)
        out = Path(cfg.output_dir)
        records = []
        for i, index in enumerate(indices):
            params = recorded[i] if recorded else draw_params(spec, label.shape, index)
            crop_color, crop_soft = apply_params(color, label, spec, params)
            name = f"{stem}_{i:03d}"
            atomic_write(out / "color" / f"{name}.png", png_bytes(crop_color.to_uint8()))
            atomic_write(out / "labels" / f"{name}.slt", encode(crop_soft))
            records.append({"image": stem, "sample": i, "name": name, "params": params.to_dict()})
        return records
    except ConfigError:
        raise
    except (OSError, SoftLabelError, ValueError) as exc:
        return [{"image": stem, "error": f"{color_path.name}: {exc}"}]


def cmd_augment(cfg: RunConfig) -> int:
    cfg.validate_common()
    spec = augment_spec(cfg)
    pairs = discover_pairs(cfg)
    n = int(cfg.samples)
    if n < 1:
        raise ConfigError("samples must be >= 1")
    recorded = {}
    if cfg.replay:
        try:
            log_entries = json.loads(Path(cfg.replay).read_text())["samples"]
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read replay log {cfg.replay}: {exc}") from exc
        for e in log_entries:
            recorded.setdefault(e["image"], []).append(AppliedParams.from_dict(e["params"]))
    jobs = []
    for k, (stem, c, l, m) in enumerate(pairs):
        indices = list(range(k * n, (k + 1) * n))
        jobs.append((cfg, spec, stem, c, l, m, indices, recorded.get(stem)))
    results = _run_pool(_augment_one, jobs, int(cfg.workers))
    samples = [r for rs in results for r in rs if "error" not in r]
    failures = [r for rs in results for r in rs if "error" in r]
    log_doc = {"spec": {"crop_size": list(spec.crop_size), "scale_range": list(spec.scale_range),
                        "kernel_kind": spec.kernel_kind, "alignment": spec.alignment,
                        "seed": spec.seed, "pad": spec.pad},
               "samples": samples, "errors": failures}
    atomic_write(Path(cfg.output_dir) / "params.json", _json_bytes(log_doc))
    for r in failures:
        log.error("%s", r["error"])
    return EXIT_FILE_ERRORS if failures else EXIT_OK


# ---------------------------------------------------------------------------
# export


def cmd_export(cfg: RunConfig) -> int:
    if not cfg.input or not (cfg.output or cfg.hard):
        raise ConfigError("export needs input and at least one of output / hard")
    try:
        soft = read_slt(cfg.input)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_FILE_ERRORS
    if cfg.output:
        buf = io.BytesIO()
        np.save(buf, export_dense(soft, with_ignore=bool(cfg.with_ignore)))
        atomic_write(cfg.output, buf.getvalue())
    if cfg.hard:
        if soft.num_classes > IGNORE:
            raise ConfigError("hard PNG export supports at most 255 classes")
        atomic_write(cfg.hard, png_bytes(harden(soft).data))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="softlabel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--id-map", dest="id_map", help="'cityscapes', a map file path, or 'identity'")
        p.add_argument("--num-classes", dest="num_classes")
        p.add_argument("--workers")
        p.add_argument("--label-suffix", dest="label_suffix")

    def dataset(p):
        p.add_argument("--color-dir", dest="color_dir")
        p.add_argument("--label-dir", dest="label_dir")
        p.add_argument("--color-suffix", dest="color_suffix")
        p.add_argument("--kernel", choices=KINDS)
        p.add_argument("--alignment", choices=ALIGNMENTS)
        p.add_argument("--seed")

    p = sub.add_parser("downsample", help="paired color/label down-sampling of a dataset")
    common(p)
    dataset(p)
    p.add_argument("--gamma", help="scale factor as a rational, e.g. 1/8")
    p.add_argument("--strategy", choices=STRATEGIES)

    p = sub.add_parser("metrics", help="retention, entropy and region reports for downsample runs")
    common(p)
    p.add_argument("--label-dir", dest="label_dir", help="original label PNGs")
    p.add_argument("--run-dir", dest="run_dir", action="append", help="downsample output dir (repeatable)")
    p.add_argument("--region", help="y0,x0,h,w in original pixels")
    p.add_argument("--region-image", dest="region_image")
    p.add_argument("--exact", action="store_const", const=True, help="sum soft weights as exact rationals")

    p = sub.add_parser("loss", help="KL/CE of predictions against down-sampled labels")
    common(p)
    p.add_argument("--run-dir", dest="run_dir", action="append")
    p.add_argument("--pred-dir", dest="pred_dir", help=".prd tensors or hard .png predictions")

    p = sub.add_parser("augment", help="seeded random-resize + crop of a dataset")
    common(p)
    dataset(p)
    p.add_argument("--crop", help="HxW")
    p.add_argument("--scale-range", dest="scale_range", help="lo,hi (default 0.5,2.0)")
    p.add_argument("--samples", help="crops per image")
    p.add_argument("--no-pad", dest="pad", action="store_const", const=False)
    p.add_argument("--replay", help="params.json from an earlier run")

    p = sub.add_parser("export", help="SLT container to dense .npy and/or hard PNG")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--output", help=".npy path for the dense (C, H, W) float32 tensor")
    p.add_argument("--with-ignore", dest="with_ignore", action="store_const", const=True)
    p.add_argument("--hard", help="PNG path for the hardened label image")
    return parser


COMMANDS = {
    "downsample": cmd_downsample,
    "metrics": cmd_metrics,
    "loss": cmd_loss,
    "augment": cmd_augment,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"softlabel: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
