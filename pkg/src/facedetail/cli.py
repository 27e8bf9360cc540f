"""
Command-line entry point.

    python main.py make-toy-model --seed 7 --out assets/toy
    python main.py fit --model assets/toy --image face.png --landmarks face.txt --out runs/fit
    python main.py eval --scan scan.obj --mesh recon.obj --out runs/eval

Every subcommand accepts the common flags (--seed, --config, --out, --threads,
--log-level, --error-json, --disable-term). Any FaceDetailError exits with
status 1, usage errors with status 2.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .appearance.albedo import AlbedoModel, synthesize_toy_albedo
from .appearance.rendering import to_display
from .assets.container import load_model, save_model
from .assets.formats import read_landmarks, read_obj, read_png, write_json, write_png
from .common.errors import ConfigurationError, FaceDetailError
from .common.log import configure_logging
from .common.settings import Settings
from .common.tensors import DTYPE
from .detail.decoder import DetailDecoder, DisplacementMap, load_decoder, save_decoder
from .detail.displacement import detail_mesh
from .evalkit.landmark_filter import DEFAULT_THRESHOLD, landmark_consistency_filter
from .evalkit.stats import evaluate_reconstruction
from .losses.weights import canonical_term
from .model_core.geometry import decode_geometry
from .model_core.head_model import ParametricHeadModel
from .model_core.toy import synthesize_toy_model
from .pipeline.animation import animate_sequence, retarget
from .pipeline.code import LatentCode
from .pipeline.config import RunConfig, load_run_config
from .pipeline.fitting import fit_coarse, fit_detail
from .pipeline.renderer import FaceRenderer
from .pipeline.subjects import SubjectImage, load_subject_sets
from .pipeline.synthetic import default_scale, random_code, separable_detail_fixture, synthesize_sample
from .pipeline.training import cross_subject_swap_loss, train_detail_decoder, within_subject_swap_loss

logger = logging.getLogger(__name__)


#################
## PARSER
#################
def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every random generator of the run")
    common.add_argument("--config", type=Path, default=None, help="TOML or JSON run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory (or file for make-toy-model)")
    common.add_argument("--threads", type=int, default=None, help="cap torch and KD-tree parallelism")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--error-json", action="store_true", help="print errors as JSON on stderr")
    common.add_argument("--disable-term", action="append", default=[], metavar="NAME", help="zero one loss weight")
    return common


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", type=Path, default=None, help="model container; the toy model when omitted")
    parser.add_argument("--model-seed", type=int, default=0, help="seed of the in-process toy model")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="facedetail", description="Animatable face detail toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    decode = commands.add_parser("decode", parents=[common], help="code -> mesh OBJ")
    _model_flags(decode)
    decode.add_argument("--code", type=Path, help="code JSON; the zero code when omitted")
    decode.add_argument("--decoder", type=Path, help="also export the detail mesh with this decoder")

    render = commands.add_parser("render", parents=[common], help="code -> rendered PNG")
    _model_flags(render)
    render.add_argument("--code", type=Path)
    render.add_argument("--decoder", type=Path, help="render with decoded detail")

    fit = commands.add_parser("fit", parents=[common], help="fit a coarse code to one image")
    _model_flags(fit)
    _image_flags(fit)
    fit.add_argument("--synthetic", type=int, metavar="SEED", help="fit a rendered random code instead of --image")
    fit.add_argument("--iterations", type=int, nargs="+", help="iterations per stage")

    fit_d = commands.add_parser("fit-detail", parents=[common], help="fit a detail code with a fixed decoder")
    _model_flags(fit_d)
    _image_flags(fit_d)
    fit_d.add_argument("--code", type=Path, required=True, help="coarse code JSON")
    fit_d.add_argument("--decoder", type=Path)
    fit_d.add_argument("--iterations", type=int)

    train = commands.add_parser("train-decoder", parents=[common], help="train the detail decoder")
    _model_flags(train)
    source = train.add_mutually_exclusive_group(required=True)
    source.add_argument("--subjects", type=Path, help="subjects JSON")
    source.add_argument("--fixture", action="store_true", help="generate the separable synthetic fixture")
    train.add_argument("--n-subjects", type=int, default=2)
    train.add_argument("--n-expressions", type=int, default=3)
    train.add_argument("--decoder", type=Path, help="initial decoder weights")
    train.add_argument("--iterations", type=int)
    train.add_argument("--holdout", type=int, help="images per subject kept out of training for the swap report")

    retarget_cmd = commands.add_parser("retarget", parents=[common], help="drive one code with another's expression")
    _model_flags(retarget_cmd)
    retarget_cmd.add_argument("--identity", type=Path, required=True)
    retarget_cmd.add_argument("--expression", type=Path, required=True)
    retarget_cmd.add_argument("--decoder", type=Path)

    animate = commands.add_parser("animate", parents=[common], help="render a retargeted expression sequence")
    _model_flags(animate)
    animate.add_argument("--identity", type=Path, required=True)
    animate.add_argument("--expressions", type=Path, nargs="+", required=True)
    animate.add_argument("--decoder", type=Path)
    animate.add_argument("--export-obj", action="store_true")

    evaluate = commands.add_parser("eval", parents=[common], help="scan-to-mesh distance statistics")
    evaluate.add_argument("--scan", type=Path, required=True)
    evaluate.add_argument("--mesh", type=Path, required=True)
    evaluate.add_argument("--scan-landmarks", type=Path)
    evaluate.add_argument("--mesh-landmarks", type=Path)
    evaluate.add_argument("--icp", action="store_true")
    evaluate.add_argument("--with-scale", action="store_true")
    evaluate.add_argument("--unit-scale", type=float, default=1.0, help="model units to mm")

    lmk = commands.add_parser("filter-landmarks", parents=[common], help="landmark-consistency check")
    lmk.add_argument("--k1", type=Path, required=True)
    lmk.add_argument("--k2", type=Path, required=True)
    lmk.add_argument("--bbox", type=float, nargs=2, required=True, metavar=("WIDTH", "HEIGHT"))
    lmk.add_argument("--shift", type=float, nargs=2, default=(0.0, 0.0), metavar=("DX", "DY"))
    lmk.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)

    toy = commands.add_parser("make-toy-model", parents=[common], help="write the synthetic toy model")
    toy.add_argument("--subdiv", type=int, default=3)
    return parser


def _image_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--image", type=Path, help="RGB PNG")
    parser.add_argument("--landmarks", type=Path, help="68 lines of 'x y'")
    parser.add_argument("--mask", type=Path, help="skin mask PNG; the whole image when omitted")


#################
## SHARED STEPS
#################
def _assets(args, run: RunConfig) -> tuple[ParametricHeadModel, AlbedoModel]:
    if args.model is not None:
        return load_model(args.model)
    model = synthesize_toy_model(seed=args.model_seed)
    return model, synthesize_toy_albedo(args.model_seed, size=run.render.uv_size, n_albedo=run.render.n_albedo)


def _decoder(args, run: RunConfig, model: ParametricHeadModel, albedo: AlbedoModel) -> DetailDecoder:
    path = getattr(args, "decoder", None)
    if path is not None:
        return load_decoder(path)
    spec = replace(run.decoder, n_expression=model.n_expression, size=albedo.size)
    return DetailDecoder(spec, seed=run.seed)


def _code(path: Path | None, model: ParametricHeadModel, albedo: AlbedoModel, run: RunConfig) -> LatentCode:
    if path is not None:
        code = LatentCode.from_json(path)
        code.check(model, albedo.n_albedo)
        return code
    size = run.render.image_size
    return LatentCode.zeros(
        model,
        albedo.n_albedo,
        n_detail=run.decoder.n_detail,
        scale=default_scale(size),
        translation=(size / 2.0, size / 2.0),
    )


def _target(args) -> SubjectImage:
    if args.image is None or args.landmarks is None:
        raise ConfigurationError("--image and --landmarks are required")
    image = torch.from_numpy(read_png(args.image)).to(DTYPE)
    if image.ndim == 2:
        image = image[..., None].expand(-1, -1, 3)
    if args.mask is not None:
        mask_data = read_png(args.mask)
        mask = torch.from_numpy(mask_data.reshape(mask_data.shape[0], mask_data.shape[1], -1)[..., 0] > 0.5)
    else:
        mask = torch.ones(image.shape[:2], dtype=torch.bool)
    landmarks = torch.from_numpy(read_landmarks(args.landmarks, columns=2))
    return SubjectImage(image=image[..., :3].contiguous(), landmarks=landmarks, mask=mask)


def _out(run: RunConfig) -> Path:
    run.output_dir.mkdir(parents=True, exist_ok=True)
    return run.output_dir


#################
## COMMANDS
#################
def cmd_decode(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    code = _code(args.code, model, albedo, run)
    mesh = decode_geometry(model, code.shape, code.pose, code.expression)
    out = _out(run)
    mesh.to_obj(out / "mesh.obj")
    if args.decoder is not None:
        decoder = _decoder(args, run, model, albedo)
        with torch.no_grad():
            displacement = decoder(code.detail, code.expression, code.jaw_pose)
        detail_mesh(mesh, displacement).to_obj(out / "mesh_detail.obj")
    return 0


def cmd_render(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    code = _code(args.code, model, albedo, run)
    renderer = FaceRenderer(model, albedo, run.render.image_size)
    with torch.no_grad():
        if args.decoder is not None:
            decoder = _decoder(args, run, model, albedo)
            result = renderer.render_detail(code, decoder(code.detail, code.expression, code.jaw_pose))
        else:
            result = renderer.render(code)
    out = _out(run)
    write_png(out / "render.png", to_display(result.image))
    write_png(out / "coverage.png", result.coverage.to(DTYPE))
    return 0


def cmd_fit(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    if args.synthetic is not None:
        renderer = FaceRenderer(model, albedo, run.render.image_size)
        target = synthesize_sample(renderer, random_code(renderer, args.synthetic))
    else:
        target = _target(args)
        renderer = FaceRenderer(model, albedo, tuple(target.image.shape[:2]))
    config = run.fit.with_iterations(*args.iterations) if args.iterations else run.fit
    result = fit_coarse(
        model, albedo, target.image, target.landmarks, target.mask, config, weights=run.weights, renderer=renderer
    )
    out = _out(run)
    result.code.to_json(out / "code.json")
    result.trace.to_csv(out / "trace.csv")
    write_json(out / "report.json", result.report.values())
    with torch.no_grad():
        rendered = renderer.render(result.code)
    rendered.mesh.to_obj(out / "mesh.obj")
    write_png(out / "render.png", to_display(rendered.image))
    if target.code is not None:
        target.code.to_json(out / "target_code.json")
    logger.info("fit done: total loss %.6g", float(result.report.total))
    return 0


def cmd_fit_detail(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    target = _target(args)
    code = _code(args.code, model, albedo, run)
    decoder = _decoder(args, run, model, albedo)
    config = replace(run.detail_fit, iterations=args.iterations) if args.iterations is not None else run.detail_fit
    renderer = FaceRenderer(model, albedo, tuple(target.image.shape[:2]))
    result = fit_detail(
        model, code, decoder, target.image, target.mask, config, weights=run.weights, renderer=renderer
    )
    out = _out(run)
    result.code.to_json(out / "code.json")
    result.displacement.to_pfm(out / "displacement.pfm")
    result.displacement.to_png(out / "displacement.png", bits=16)
    result.trace.to_csv(out / "trace.csv")
    write_json(out / "report.json", result.report.values())
    with torch.no_grad():
        rendered = renderer.render_detail(result.code, result.displacement.data)
    write_png(out / "render.png", to_display(rendered.image))
    return 0


def cmd_train_decoder(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    renderer = FaceRenderer(model, albedo, run.render.image_size)
    if args.fixture:
        subjects = separable_detail_fixture(renderer, args.n_subjects, args.n_expressions, seed=run.seed)
    else:
        subjects = load_subject_sets(args.subjects)
        renderer = FaceRenderer(model, albedo, tuple(subjects[0].images[0].image.shape[:2]))
    decoder = _decoder(args, run, model, albedo)
    config = replace(run.train, iterations=args.iterations) if args.iterations is not None else run.train
    if args.holdout is not None:
        config = replace(config, holdout=args.holdout)
    result = train_detail_decoder(
        model, subjects, decoder, config, renderer=renderer, weights=run.weights, fit_config=run.fit
    )
    out = _out(run)
    save_decoder(out / "decoder.pt", result.decoder)
    result.trace.to_csv(out / "trace.csv")
    details = {f"{subjects[s].subject_id}/{p}": delta.tolist() for (s, p), delta in sorted(result.details.items())}
    write_json(out / "details.json", details)
    if len(subjects) > 1:
        swaps = {
            "within_subject": within_subject_swap_loss(renderer, result, weights=run.weights),
            "cross_subject": cross_subject_swap_loss(renderer, result, weights=run.weights),
        }
        if result.held_out:
            swaps["held_out_within_subject"] = within_subject_swap_loss(renderer, result, held_out=True, weights=run.weights)
            swaps["held_out_cross_subject"] = cross_subject_swap_loss(renderer, result, held_out=True, weights=run.weights)
        write_json(out / "swap.json", swaps)
    return 0


def cmd_retarget(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    identity = _code(args.identity, model, albedo, run)
    expression = _code(args.expression, model, albedo, run)
    decoder = _decoder(args, run, model, albedo)
    result = retarget(identity, expression, decoder)
    out = _out(run)
    result.code.to_json(out / "code.json")
    result.displacement.to_pfm(out / "displacement.pfm")
    result.displacement.to_png(out / "displacement.png", bits=16)
    with torch.no_grad():
        mesh = decode_geometry(model, result.code.shape, result.code.pose, result.code.expression)
        detail_mesh(mesh, result.displacement).to_obj(out / "mesh_detail.obj")
    return 0


def cmd_animate(args, run: RunConfig) -> int:
    model, albedo = _assets(args, run)
    identity = _code(args.identity, model, albedo, run)
    expressions = [_code(path, model, albedo, run) for path in args.expressions]
    decoder = _decoder(args, run, model, albedo)
    renderer = FaceRenderer(model, albedo, run.render.image_size)
    frames = animate_sequence(identity, expressions, decoder, renderer, _out(run), export_obj=args.export_obj)
    logger.info("wrote %d frames to %s", len(frames), run.output_dir)
    return 0


def cmd_eval(args, run: RunConfig) -> int:
    scan, _, _ = read_obj(args.scan)
    vertices, triangles, _ = read_obj(args.mesh)
    landmarks = (None, None)
    if args.scan_landmarks is not None and args.mesh_landmarks is not None:
        landmarks = (read_landmarks(args.scan_landmarks, columns=3), read_landmarks(args.mesh_landmarks, columns=3))
    report = evaluate_reconstruction(
        scan, vertices, triangles, *landmarks, icp=args.icp, with_scale=args.with_scale, unit_scale=args.unit_scale
    )
    report.write(_out(run))
    print(json.dumps(report.stats()))
    return 0


def cmd_filter_landmarks(args, run: RunConfig) -> int:
    decision = landmark_consistency_filter(
        read_landmarks(args.k1, columns=2),
        read_landmarks(args.k2, columns=2),
        args.bbox[0],
        args.bbox[1],
        shift=np.asarray(args.shift),
        threshold=args.threshold,
    )
    payload = {"keep": decision.keep, "score": decision.score, "worst": decision.worst}
    if args.out is not None:
        write_json(_out(run) / "decision.json", payload)
    print(json.dumps(payload))
    return 0


def cmd_make_toy_model(args, run: RunConfig) -> int:
    seed = run.seed
    model = synthesize_toy_model(seed=seed, n_subdiv=args.subdiv)
    albedo = synthesize_toy_albedo(seed, size=run.render.uv_size, n_albedo=run.render.n_albedo)
    path = args.out if args.out is not None else Path("out") / "toy_model"
    save_model(path, model, albedo)
    print(str(path))
    return 0


COMMANDS = {
    "decode": cmd_decode,
    "render": cmd_render,
    "fit": cmd_fit,
    "fit-detail": cmd_fit_detail,
    "train-decoder": cmd_train_decoder,
    "retarget": cmd_retarget,
    "animate": cmd_animate,
    "eval": cmd_eval,
    "filter-landmarks": cmd_filter_landmarks,
    "make-toy-model": cmd_make_toy_model,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigurationError("--threads must be >= 1")
            torch.set_num_threads(args.threads)
            Settings().set("threads", args.threads)
        disabled = tuple(canonical_term(name) for name in args.disable_term)
        run = load_run_config(args.config).with_overrides(args.seed, args.out, disabled)
        return COMMANDS[args.command](args, run)
    except FaceDetailError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        if args.error_json:
            print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
