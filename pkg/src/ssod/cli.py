"""Command-line entry point: ``ssod <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data/validation error (including a
failed leakage audit). Stages exchange data only through manifest files.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import shutil
import sys
from pathlib import Path
from typing import Any, Iterator, Sequence

from ssod import curation, formats, metrics, pseudolabel, quadrant, synth
from ssod.core import ClassMap, DatasetManifest
from ssod.errors import SSODError, ValidationError
from ssod.parallel import JOBS_ENV, resolve_jobs

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
PIPELINE_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which we reserve for data errors
        raise UsageError(f"{self.prog}: {message}")


class Outputs:
    """Tracks files and directories a command creates; removes them all on failure."""

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def file(self, path: str | os.PathLike) -> Path:
        p = Path(path)
        if not p.parent.exists():
            self.dir(p.parent)
        self.paths.append(p)
        return p

    def dir(self, path: str | os.PathLike) -> Path:
        p = Path(path)
        missing = []
        q = p
        while not q.exists():
            missing.append(q)
            q = q.parent
        p.mkdir(parents=True, exist_ok=True)
        self.paths.extend(reversed(missing))
        return p

    def rollback(self) -> None:
        for p in reversed(self.paths):
            if p.is_dir():
                shutil.rmtree(p, ignore_errors=True)
            elif p.exists():
                p.unlink()


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except SSODError as exc:
        raise SSODError(f"stage {name}: {exc}") from exc
    except OSError as exc:
        raise SSODError(f"stage {name}: {exc}") from exc


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if args.report == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _class_map_arg(text: str) -> ClassMap:
    p = Path(text)
    if p.is_file():
        names = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
    else:
        names = [n.strip() for n in text.split(",")]
    return ClassMap.from_names(names)


def _target_class(manifest: DatasetManifest, key: str | None) -> int:
    if key is None:
        return pseudolabel.find_difficult_class(manifest.class_map)
    return manifest.class_map.resolve(key)


# -- convert ------------------------------------------------------------------


def cmd_convert(args, out: Outputs) -> int:
    with stage("read"):
        if args.src == "yolo":
            if not args.dims or not args.classes:
                raise UsageError("--from yolo needs --dims and --classes")
            dims, groups = formats.read_dims_table(args.dims)
            manifest = formats.parse_yolo_dir(
                args.input, dims, _class_map_arg(args.classes), name=args.name, groups=groups
            )
        elif args.src == "coco":
            manifest = formats.parse_coco(args.input, name=args.name)
        else:
            manifest = formats.parse_manifest(args.input, strict=args.strict)
    with stage("write"):
        if args.dst == "yolo":
            out.dir(args.output)
            for p in sorted(Path(args.output).glob("*.txt")):
                raise ValidationError(f"output directory already has label files ({p.name})")
            out.paths.extend(formats.write_yolo_dir(manifest, args.output))
            dims_path = out.file(Path(args.output) / "dims.csv")
            formats.write_dims_table(manifest, dims_path)
        elif args.dst == "coco":
            formats.write_coco(manifest, out.file(args.output))
        else:
            formats.write_manifest(manifest, out.file(args.output))
    counts = curation.class_counts(manifest)
    _emit(args, {"converted": counts.to_dict()}, f"{manifest.name}: {len(manifest)} images\n{counts.text()}")
    return EXIT_OK


# -- quadrants ----------------------------------------------------------------


def cmd_quadrants(args, out: Outputs) -> int:
    if not 0 < args.tau <= 1:
        raise UsageError(f"--tau must lie in (0, 1], got {args.tau}")
    with stage("quadrants"):
        manifest = formats.parse_manifest(args.manifest)
        target = _target_class(manifest, args.target_class)
        samples = quadrant.emit_classification_dataset(manifest, target, args.tau)
        table = quadrant.samples_to_csv(samples)
        if args.out:
            out.file(args.out).write_text(table, encoding="utf-8")
        else:
            sys.stdout.write(table)
    if args.out:
        positives = sum(s.label for s in samples)
        _emit(
            args,
            {"samples": len(samples), "positive": positives, "tau": args.tau},
            f"{len(samples)} quadrant samples, {positives} positive (tau={args.tau})",
        )
    return EXIT_OK


# -- curate -------------------------------------------------------------------


def cmd_counts(args, out: Outputs) -> int:
    with stage("counts"):
        manifest = formats.parse_manifest(args.manifest)
        table = curation.class_counts(manifest)
        if args.figures:
            from ssod.plotting import plot_class_counts

            fig_dir = out.dir(args.figures)
            plot_class_counts(table, out.file(fig_dir / "class_counts.png"))
    _emit(args, table.to_dict(), table.text())
    return EXIT_OK


def cmd_rebalance(args, out: Outputs) -> int:
    if args.ratio < 1:
        raise UsageError(f"--ratio must be >= 1, got {args.ratio}")
    with stage("rebalance"):
        manifest = formats.parse_manifest(args.manifest)
        majority = manifest.class_map.resolve(args.majority)
        result = curation.rebalance(manifest, majority, args.ratio, args.seed)
        formats.write_manifest(result, out.file(args.out))
    before, after = curation.class_counts(manifest), curation.class_counts(result)
    payload = {
        "images_before": len(manifest),
        "images_after": len(result),
        "before": before.to_dict()["per_class"],
        "after": after.to_dict()["per_class"],
    }
    _emit(args, payload, f"removed {len(manifest) - len(result)} images\n{after.text()}")
    return EXIT_OK


def cmd_split(args, out: Outputs) -> int:
    fracs = _floats(args.fracs, 3)
    group_by = "group_id" if args.group_by in ("paddock", "group_id") else "image"
    try:
        spec = curation.SplitSpec(*fracs, seed=args.seed, group_by=group_by)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    with stage("split"):
        manifest = formats.parse_manifest(args.manifest)
        parts = curation.split_dataset(manifest, spec)
        d = out.dir(args.out_dir)
        for part in parts:
            formats.write_manifest(part, out.file(d / f"{part.split_tag}.json"))
        audit = curation.leakage_audit(parts, strict_groups=group_by == "group_id")
    payload = {p.split_tag: len(p) for p in parts} | {"audit": audit.verdict}
    _emit(args, payload, " / ".join(f"{p.split_tag} {len(p)}" for p in parts) + f"  ({audit.verdict})")
    return EXIT_OK


def cmd_audit(args, out: Outputs) -> int:
    if len(args.manifests) < 2:
        raise UsageError("audit needs at least two manifests")
    with stage("audit"):
        manifests = [formats.parse_manifest(p) for p in args.manifests]
        report = curation.leakage_audit(manifests, strict_groups=args.strict_groups)
    _emit(args, report.to_dict(), report.text())
    return EXIT_OK if report.passed else EXIT_DATA


# -- pseudo -------------------------------------------------------------------


def _pseudo_config(args, class_map: ClassMap) -> pseudolabel.PseudoLabelConfig:
    difficult: list[int] = []
    if args.preset == "detr":
        if args.difficult_class:
            difficult = [class_map.resolve(k) for k in args.difficult_class]
        else:
            difficult = [pseudolabel.find_difficult_class(class_map)]
    return pseudolabel.preset(
        args.preset,
        difficult_classes=difficult,
        min_area_fraction=args.min_area,
        lambda_weight=args.lambda_weight,
    )


def _check_pseudo_args(args) -> None:
    if not 0 <= args.min_area < 1:
        raise UsageError(f"--min-area must lie in [0, 1), got {args.min_area}")
    if args.lambda_weight < 0:
        raise UsageError(f"--lambda must be >= 0, got {args.lambda_weight}")


def cmd_pseudo_filter(args, out: Outputs) -> int:
    _check_pseudo_args(args)
    with stage("filter"):
        unlabeled = formats.parse_manifest(args.unlabeled)
        preds = formats.parse_predictions(args.preds)
        cfg = _pseudo_config(args, unlabeled.class_map)
        pseudo, report = pseudolabel.filter_predictions(preds, unlabeled, cfg, jobs=args.jobs)
        formats.write_manifest(pseudo, out.file(args.out))
        payload = report.to_dict(unlabeled.class_map)
        if args.report_file:
            _dump_json(out.file(args.report_file), payload)
    kept = sum(report.kept.values())
    _emit(args, payload, f"kept {kept}/{report.total} boxes on {report.images_kept}/{report.images_in} images")
    return EXIT_OK


def cmd_pseudo_merge(args, out: Outputs) -> int:
    if args.lambda_weight < 0:
        raise UsageError(f"--lambda must be >= 0, got {args.lambda_weight}")
    with stage("merge"):
        labeled = formats.parse_manifest(args.labeled)
        pseudo = formats.parse_manifest(args.pseudo)
        student = pseudolabel.build_student_manifest(labeled, pseudo, args.lambda_weight)
        formats.write_manifest(student, out.file(args.out))
    _emit(
        args,
        {"labeled": len(labeled), "pseudo": len(pseudo), "student": len(student)},
        f"student set: {len(labeled)} labeled + {len(pseudo)} pseudo = {len(student)} images",
    )
    return EXIT_OK


# -- eval ---------------------------------------------------------------------


def cmd_eval_det(args, out: Outputs) -> int:
    if not 0 <= args.conf <= 1:
        raise UsageError(f"--conf must lie in [0, 1], got {args.conf}")
    with stage("eval"):
        truth = formats.parse_manifest(args.truth)
        preds = formats.parse_predictions(args.preds)
        report = metrics.evaluate_detection(preds, truth, args.conf, jobs=args.jobs)
        payload = report.to_dict()
        if args.out:
            _dump_json(out.file(args.out), payload)
            out.file(Path(args.out).with_suffix(".txt")).write_text(report.text() + "\n", encoding="utf-8")
        if args.figures:
            from ssod.plotting import plot_pr_curves

            fig_dir = out.dir(args.figures)
            for p in plot_pr_curves(preds, truth, report, fig_dir):
                out.paths.append(p)
    _emit(args, payload, report.text())
    return EXIT_OK


def cmd_eval_cls(args, out: Outputs) -> int:
    with stage("eval"):
        pred = quadrant.read_label_csv(Path(args.preds).read_text(encoding="utf-8"))
        true = quadrant.read_label_csv(Path(args.truth).read_text(encoding="utf-8"))
        missing = sorted(set(true) ^ set(pred))
        if missing:
            raise ValidationError(f"prediction and truth tables disagree on samples: {missing[:5]}")
        keys = sorted(true)
        report = metrics.evaluate_classification([pred[k] for k in keys], [true[k] for k in keys])
        payload = report.to_dict()
        if args.out:
            _dump_json(out.file(args.out), payload)
        if args.figures:
            from ssod.plotting import plot_confusion

            fig_dir = out.dir(args.figures)
            plot_confusion(report, out.file(fig_dir / "confusion.png"))
    _emit(args, payload, report.text())
    return EXIT_OK


# -- synth --------------------------------------------------------------------


def cmd_synth_gen(args, out: Outputs) -> int:
    try:
        cfg = synth.SceneConfig(
            seed=args.seed,
            n_images=args.images,
            width=args.width,
            height=args.height,
            boxes_per_class={0: tuple(map(int, _floats(args.sugarcane, 2))),
                             1: tuple(map(int, _floats(args.guinea, 2)))},
            shadow_rate=args.shadow_rate,
            prefix=args.prefix,
        )
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    with stage("synth"):
        manifest, rasters, _ = synth.generate_scenes(cfg, name=args.name, jobs=args.jobs)
        root = out.dir(args.out_dir)
        raster_dir = out.dir(root / "rasters")
        for image_id, pixels in rasters.items():
            synth.write_pgm(out.file(raster_dir / f"{image_id}.pgm"), pixels)
        formats.write_manifest(manifest, out.file(root / "manifest.json"))
    counts = curation.class_counts(manifest)
    _emit(args, counts.to_dict(), f"{len(manifest)} scenes -> {root}\n{counts.text()}")
    return EXIT_OK


def cmd_synth_teach(args, out: Outputs) -> int:
    try:
        cfg = synth.MockTeacherConfig(
            miss_rate=args.miss_rate,
            false_positive_rate=args.fp_rate,
            tp_confidence_range=tuple(_floats(args.tp_conf, 2)),
            fp_confidence_range=tuple(_floats(args.fp_conf, 2)),
            jitter_sigma=args.jitter,
            seed=args.seed,
        )
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    with stage("teach"):
        truth = formats.parse_manifest(args.truth)
        preds = synth.mock_teacher(truth, cfg, jobs=args.jobs)
        formats.write_manifest(formats.predictions_manifest(preds, truth), out.file(args.out))
    n = sum(len(v) for v in preds.values())
    _emit(args, {"images": len(preds), "detections": n}, f"{n} detections on {len(preds)} images")
    return EXIT_OK


def cmd_synth_fit(args, out: Outputs) -> int:
    try:
        grid = synth.parse_grid(args.grid)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    with stage("fit"):
        train = formats.parse_manifest(args.manifest)
        target = _target_class(train, args.target_class)
        rasters = synth.load_rasters(args.rasters, train.image_ids)
        theta, loss = synth.fit_toy_detector(train, rasters, grid, target)
    _emit(args, {"best_param": theta, "best_loss": loss, "grid": grid},
          f"best threshold {theta:g} (loss {loss:.6f}) over {len(grid)} grid points")
    return EXIT_OK


# -- pipeline -----------------------------------------------------------------


def cmd_pipeline(args, out: Outputs) -> int:
    _check_pseudo_args(args)
    if not 0 <= args.conf <= 1:
        raise UsageError(f"--conf must lie in [0, 1], got {args.conf}")
    with stage("load"):
        labeled = formats.parse_manifest(args.labeled)
        unlabeled = formats.parse_manifest(args.unlabeled)
        teacher = formats.parse_predictions(args.teacher_preds)
        test = formats.parse_manifest(args.test)
        test_preds = formats.parse_predictions(args.test_preds)
        cfg = _pseudo_config(args, unlabeled.class_map)
    root = out.dir(args.out_dir)
    with stage("filter"):
        pseudo, filt = pseudolabel.filter_predictions(teacher, unlabeled, cfg, jobs=args.jobs)
        formats.write_manifest(pseudo, out.file(root / "pseudo.json"))
    with stage("merge"):
        student = pseudolabel.build_student_manifest(labeled, pseudo, cfg.lambda_weight)
        formats.write_manifest(student, out.file(root / "student.json"))
    with stage("audit"):
        audit = curation.leakage_audit([student, test])
        if not audit.passed:
            raise SSODError(audit.text())
    with stage("evaluate"):
        report = metrics.evaluate_detection(test_preds, test, args.conf, jobs=args.jobs)
    payload: dict[str, Any] = {
        "schema_version": PIPELINE_SCHEMA_VERSION,
        "inputs": {
            "labeled": labeled.name,
            "unlabeled": unlabeled.name,
            "test": test.name,
        },
        "filter": filt.to_dict(unlabeled.class_map),
        "student": {
            "images": len(student),
            "labeled": len(labeled),
            "pseudo": len(pseudo),
            "counts": curation.class_counts(student).to_dict()["per_class"],
        },
        "audit": audit.to_dict(),
        "evaluation": report.to_dict(),
    }
    with stage("report"):
        _dump_json(out.file(root / "report.json"), payload)
    _emit(args, payload, f"pipeline OK -> {root}\n{report.text()}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--report", choices=("text", "json"), default="text",
                        help="stdout format (default: text)")
    common.add_argument("--jobs", type=int, default=None,
                        help=f"per-image parallelism (default: ${JOBS_ENV} or 1)")

    parser = _Parser(prog="ssod", description="Data pipeline for semi-supervised weed detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", parents=[common], help="convert between YOLO, COCO and manifest")
    p.add_argument("--from", dest="src", choices=("yolo", "coco", "manifest"), required=True)
    p.add_argument("--to", dest="dst", choices=("yolo", "coco", "manifest"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dims", help="YOLO sidecar CSV image_id,width,height[,group_id]")
    p.add_argument("--classes", help="comma list or file of class names (YOLO input)")
    p.add_argument("--name")
    p.add_argument("--strict", action="store_true", help="reject unknown manifest fields")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("quadrants", parents=[common], help="quadrant classification labels (CSV)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--target-class", help="id or name (default: the Guinea Grass class)")
    p.add_argument("--tau", type=float, default=quadrant.DEFAULT_TAU)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_quadrants)

    curate = sub.add_parser("curate", help="dataset statistics, rebalancing, splitting, audits")
    csub = curate.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = csub.add_parser("counts", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--figures", help="directory for a class-count bar chart")
    p.set_defaults(func=cmd_counts)
    p = csub.add_parser("rebalance", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--majority", required=True, help="majority class id or name")
    p.add_argument("--ratio", type=float, default=curation.DEFAULT_TARGET_RATIO)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_rebalance)
    p = csub.add_parser("split", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fracs", default="0.7,0.2,0.1")
    p.add_argument("--group-by", choices=("image", "paddock"), default="image")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_split)
    p = csub.add_parser("audit", parents=[common])
    p.add_argument("manifests", nargs="+")
    p.add_argument("--strict-groups", action="store_true",
                   help="also fail when a paddock/group id spans manifests")
    p.set_defaults(func=cmd_audit)

    pseudo = sub.add_parser("pseudo", help="pseudo-label filtering and student-set merging")
    psub = pseudo.add_subparsers(dest="action", required=True, parser_class=_Parser)
    filt_args = _Parser(add_help=False)
    filt_args.add_argument("--preset", choices=pseudolabel.PRESETS, default="yolo")
    filt_args.add_argument("--difficult-class", action="append",
                           help="class id/name held to the 0.8 threshold by the detr preset")
    filt_args.add_argument("--min-area", type=float, default=pseudolabel.DEFAULT_MIN_AREA_FRACTION)
    filt_args.add_argument("--lambda", dest="lambda_weight", type=float,
                           default=pseudolabel.DEFAULT_LAMBDA)
    p = psub.add_parser("filter", parents=[common, filt_args])
    p.add_argument("--preds", required=True, help="teacher predictions manifest")
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report-file", help="write the filter report JSON here")
    p.set_defaults(func=cmd_pseudo_filter)
    p = psub.add_parser("merge", parents=[common])
    p.add_argument("--labeled", required=True)
    p.add_argument("--pseudo", required=True)
    p.add_argument("--lambda", dest="lambda_weight", type=float, default=pseudolabel.DEFAULT_LAMBDA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo_merge)

    ev = sub.add_parser("eval", help="detection or classification metrics")
    esub = ev.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = esub.add_parser("det", parents=[common])
    p.add_argument("--preds", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--conf", type=float, required=True,
                   help="confidence threshold for precision/recall")
    p.add_argument("--out", help="report JSON path (a .txt table is written alongside)")
    p.add_argument("--figures", help="directory for precision-recall figures")
    p.set_defaults(func=cmd_eval_det)
    p = esub.add_parser("cls", parents=[common])
    p.add_argument("--preds", required=True, help="CSV with image_id,quadrant,label")
    p.add_argument("--truth", required=True, help="CSV with image_id,quadrant,label")
    p.add_argument("--out")
    p.add_argument("--figures")
    p.set_defaults(func=cmd_eval_cls)

    sy = sub.add_parser("synth", help="synthetic scenes, mock teacher, toy trainer")
    ssub = sy.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = ssub.add_parser("gen", parents=[common])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--images", type=int, default=100)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--sugarcane", default="1,3", help="min,max sugarcane boxes per image")
    p.add_argument("--guinea", default="0,2", help="min,max Guinea Grass boxes per image")
    p.add_argument("--shadow-rate", type=float, default=0.0)
    p.add_argument("--prefix", default="scene")
    p.add_argument("--name", default="synth")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth_gen)
    p = ssub.add_parser("teach", parents=[common])
    p.add_argument("--truth", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--miss-rate", type=float, default=0.1)
    p.add_argument("--fp-rate", type=float, default=0.5)
    p.add_argument("--tp-conf", default="0.6,1.0")
    p.add_argument("--fp-conf", default="0.0,0.7")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_teach)
    p = ssub.add_parser("fit", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--rasters", required=True)
    p.add_argument("--grid", default="0.1:0.8:0.1")
    p.add_argument("--target-class")
    p.set_defaults(func=cmd_synth_fit)

    p = sub.add_parser("pipeline", parents=[common, filt_args],
                       help="filter -> merge -> audit -> evaluate, one JSON report")
    p.add_argument("--labeled", required=True)
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--teacher-preds", required=True, help="teacher predictions on --unlabeled")
    p.add_argument("--test", required=True)
    p.add_argument("--test-preds", required=True, help="model predictions on --test")
    p.add_argument("--conf", type=float, default=0.25)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    out = Outputs()
    try:
        args = parser.parse_args(argv)
        try:
            args.jobs = resolve_jobs(args.jobs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return args.func(args, out)
    except UsageError as exc:
        out.rollback()
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SSODError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
