"""Command-line entry point: ``python -m src <command> [<action>] [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error or failed selftest,
3 non-convergence (only with --fail-on-nonconvergence).
"""

import argparse
import sys
from typing import List, Optional, Sequence

from .attitude_codec import AttitudeCodebook, build_codebook, load_codebook, save_codebook
from .camera_geometry import resolve_camera
from .config import Config
from .errors import NonConvergenceError, SpnKitError, UsageError
from .evaluation import evaluate, write_reports
from .logger import set_level, setup_logger
from .pose_pipeline import PosePipeline, load_predictions, solve_records, write_predictions, write_solve_csv
from .position_solver import SolverConfig
from .predictors import OraclePredictor, ToyPredictor, TrainConfig, TruthPredictor, load_toy_model, save_toy_model, train_toy
from .scene_generator import Dataset, GenConfig, check_codebook, generate_dataset, load_dataset
from .selftest import run_selftest
from .wireframe_model import characteristic_length, resolve_model

logger = setup_logger()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGENCE = 3


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="dotenv-style settings file (keys without the SPNKIT_ prefix)")
    parser.add_argument("--jobs", type=int, help="worker processes (default: SPNKIT_JOBS or logical cores)")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), type=str.upper,
                        help="override SPNKIT_LOG_LEVEL for this run")


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--camera", default="speed", help="camera preset name or camera file")
    parser.add_argument("--model", default="mock", help="wireframe model file, or 'mock'")
    parser.add_argument("--lc-method", choices=("cuboid", "pairwise"), help="characteristic length definition")
    parser.add_argument("--composed-bearing", action="store_true", default=None,
                        help="build the initial position from two composed axis rotations")
    parser.add_argument("--fail-on-nonconvergence", action="store_true",
                        help="exit with status 3 when a solve hits the iteration cap")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="spnkit", description="Monocular spacecraft pose toolkit")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    codebook = commands.add_parser("codebook", help="attitude class codebooks")
    codebook_actions = codebook.add_subparsers(dest="action", required=True, parser_class=ArgumentParser)
    gen = codebook_actions.add_parser("gen", help="sample m uniformly distributed attitude classes")
    gen.add_argument("--m", type=int, help="number of classes (default 1000)")
    gen.add_argument("--n", type=int, help="classes per label the codebook is meant for (default 5)")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True, help="codebook file to write")
    _common(gen)

    model = commands.add_parser("model", help="wireframe models")
    model_actions = model.add_subparsers(dest="action", required=True, parser_class=ArgumentParser)
    info = model_actions.add_parser("info", help="print vertex count, extents and characteristic length")
    info.add_argument("path", help="model file, or 'mock'")
    _common(info)

    dataset = commands.add_parser("dataset", help="synthetic scene datasets")
    dataset_actions = dataset.add_subparsers(dest="action", required=True, parser_class=ArgumentParser)
    dgen = dataset_actions.add_parser("gen", help="sample labeled scenes")
    dgen.add_argument("--count", type=int, help="number of scenes (default: split preset)")
    dgen.add_argument("--split", choices=("train", "test"), default="train", help="preset count when --count is absent")
    dgen.add_argument("--seed", type=int, required=True)
    dgen.add_argument("--camera", default="speed", help="camera preset name or camera file")
    dgen.add_argument("--model", default="mock", help="wireframe model file, or 'mock'")
    dgen.add_argument("--codebook", required=True, help="codebook file used for labels")
    dgen.add_argument("--n", type=int, help="classes per label (default 5)")
    dgen.add_argument("--weight-rule", choices=("literal", "squared"), help="target weight formula")
    dgen.add_argument("--out", required=True, help="output directory")
    _common(dgen)

    solve = commands.add_parser("solve", help="solve positions from dataset boxes")
    solve.add_argument("--labels", required=True, help="dataset directory")
    solve.add_argument("--attitude", default="truth", help="'truth' or a predictions CSV with q per id")
    solve.add_argument("--out", required=True, help="output CSV")
    _solver_flags(solve)
    _common(solve)

    train = commands.add_parser("train", help="train predictors")
    train_actions = train.add_subparsers(dest="action", required=True, parser_class=ArgumentParser)
    toy = train_actions.add_parser("toy", help="train the linear model on silhouette features")
    toy.add_argument("--dataset", required=True, help="dataset directory")
    toy.add_argument("--codebook", required=True, help="codebook file the dataset was labeled with")
    toy.add_argument("--grid", type=int, help="feature grid size G (default 16)")
    toy.add_argument("--epochs", type=int, default=10)
    toy.add_argument("--seed", type=int, required=True)
    toy.add_argument("--lr", type=float, help="initial learning rate (default 0.003)")
    toy.add_argument("--lam", type=float, help="L2 strength (default 1e-4)")
    toy.add_argument("--mu", type=float, help="weight-regression loss mix (default 1.0)")
    toy.add_argument("--batch-size", type=int, help="scenes per step (default 16)")
    toy.add_argument("--camera", default="speed", help="camera preset name or camera file")
    toy.add_argument("--model", default="mock", help="wireframe model file, or 'mock'")
    toy.add_argument("--skip-gradient-check", action="store_true", help="skip the startup gradient self-test")
    toy.add_argument("--out", required=True, help="model file to write")
    _common(toy)

    predict = commands.add_parser("predict", help="run a predictor and the position solver over a dataset")
    predict.add_argument("--dataset", required=True, help="dataset directory")
    predict.add_argument("--codebook", required=True, help="codebook file the dataset was labeled with")
    predict.add_argument("--predictor", choices=("truth", "oracle", "toy"), default="truth")
    predict.add_argument("--toy-model", help="trained toy model file (for --predictor toy)")
    predict.add_argument("--sigma-att", type=float, default=0.0, help="oracle attitude noise, rad")
    predict.add_argument("--sigma-box", type=float, default=0.0, help="oracle box-edge noise, px")
    predict.add_argument("--seed", type=int, default=0, help="oracle noise seed")
    predict.add_argument("--n", type=int, help="classes averaged when decoding (default: dataset n)")
    predict.add_argument("--out", required=True, help="predictions CSV")
    _solver_flags(predict)
    _common(predict)

    ev = commands.add_parser("eval", help="metrics of predictions against a dataset")
    ev.add_argument("--truth", required=True, help="dataset directory")
    ev.add_argument("--pred", required=True, help="predictions CSV")
    ev.add_argument("--bin", type=int, help="records per range bin (default 100)")
    ev.add_argument("--out", required=True, help="report directory")
    _common(ev)

    st = commands.add_parser("selftest", help="gradient and rotation-sampling checks")
    st.add_argument("--seed", type=int, default=0)
    _common(st)
    return parser


def _jobs(args, settings) -> int:
    return max(1, Config.resolve("JOBS", args.jobs, settings, int))


def _solver_config(args, settings) -> SolverConfig:
    return SolverConfig(
        max_iterations=Config.resolve("SOLVER_MAX_ITERATIONS", None, settings, int),
        step_tol=Config.resolve("SOLVER_STEP_TOL", None, settings, float),
        residual_tol=Config.resolve("SOLVER_RESIDUAL_TOL", None, settings, float),
        lambda_init=Config.resolve("SOLVER_LAMBDA", None, settings, float),
        lambda_down=Config.resolve("SOLVER_LAMBDA_DOWN", None, settings, float),
        lambda_up=Config.resolve("SOLVER_LAMBDA_UP", None, settings, float),
        composed_bearing=Config.resolve("COMPOSED_BEARING", args.composed_bearing, settings,
                                   lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
        fail_on_nonconvergence=args.fail_on_nonconvergence,
    )


def _dataset_n(dataset: Dataset) -> int:
    if dataset.records:
        return dataset.records[0].label.n
    return int(dataset.manifest.get("n", Config.CODEBOOK_N))


def _load_labeled(dataset_dir: str, codebook_path: str):
    dataset = load_dataset(dataset_dir)
    book = load_codebook(codebook_path)
    check_codebook(dataset, book)
    return dataset, book


def cmd_codebook_gen(args, settings) -> int:
    m = Config.resolve("CODEBOOK_M", args.m, settings, int)
    n = Config.resolve("CODEBOOK_N", args.n, settings, int)
    if not (1 <= n <= m):
        raise UsageError(f"Need 1 <= n <= m, got n={n}, m={m}")
    book = build_codebook(m, args.seed)
    save_codebook(book, args.out)
    return EXIT_OK


def cmd_model_info(args, settings) -> int:
    model = resolve_model(args.path)
    lo, hi = model.vertices.min(axis=0), model.vertices.max(axis=0)
    print(f"name: {model.name}")
    print(f"vertices: {len(model.vertices)}")
    print(f"edges: {len(model.edges)}")
    print(f"extents_m: {' '.join(f'{e:.6g}' for e in model.extents)}")
    print(f"min_m: {' '.join(f'{c:.6g}' for c in lo)}")
    print(f"max_m: {' '.join(f'{c:.6g}' for c in hi)}")
    print(f"L_C_cuboid_m: {characteristic_length(model, 'cuboid'):.6g}")
    print(f"L_C_pairwise_m: {characteristic_length(model, 'pairwise'):.6g}")
    return EXIT_OK


def cmd_dataset_gen(args, settings) -> int:
    preset = "TRAIN_COUNT" if args.split == "train" else "TEST_COUNT"
    book = load_codebook(args.codebook)
    cfg = GenConfig(
        count=Config.resolve(preset, args.count, settings, int),
        seed=args.seed,
        camera=resolve_camera(args.camera),
        model=resolve_model(args.model),
        codebook=book,
        n=Config.resolve("CODEBOOK_N", args.n, settings, int),
        range_mean=Config.resolve("RANGE_MEAN", None, settings, float),
        range_spread=Config.resolve("RANGE_SPREAD", None, settings, float),
        range_bounds=(Config.resolve("RANGE_MIN", None, settings, float),
                      Config.resolve("RANGE_MAX", None, settings, float)),
        weight_rule=Config.resolve("WEIGHT_RULE", args.weight_rule, settings),
        max_draws=Config.resolve("MAX_DRAWS", None, settings, lambda s: int(float(s))),
        center_spread_factor=Config.resolve("CENTER_SPREAD_FACTOR", None, settings, float),
        camera_ref=args.camera,
        model_ref=args.model,
    )
    generate_dataset(cfg, args.out, jobs=_jobs(args, settings))
    return EXIT_OK


def cmd_solve(args, settings) -> int:
    camera = resolve_camera(args.camera)
    model = resolve_model(args.model)
    dataset = load_dataset(args.labels)
    attitudes = None
    if args.attitude != "truth":
        attitudes = {e.id: e.q for e in load_predictions(args.attitude)}
    l_c = characteristic_length(model, Config.resolve("LC_METHOD", args.lc_method, settings))
    results = solve_records(camera, model, dataset.records, attitudes, l_c,
                            _solver_config(args, settings), _jobs(args, settings))
    write_solve_csv(results, args.out)
    return EXIT_OK


def cmd_train_toy(args, settings) -> int:
    dataset, book = _load_labeled(args.dataset, args.codebook)
    cfg = TrainConfig(
        epochs=args.epochs,
        seed=args.seed,
        grid=Config.resolve("GRID", args.grid, settings, int),
        n=_dataset_n(dataset),
        lam=Config.resolve("L2_LAMBDA", args.lam, settings, float),
        mu=Config.resolve("LOSS_MU", args.mu, settings, float),
        lr=Config.resolve("LEARNING_RATE", args.lr, settings, float),
        lr_decay=Config.resolve("LR_DECAY", None, settings, float),
        lr_decay_steps=Config.resolve("LR_DECAY_STEPS", None, settings, int),
        batch_size=Config.resolve("BATCH_SIZE", args.batch_size, settings, int),
        train_fraction=Config.resolve("TRAIN_FRACTION", None, settings, float),
        edge_samples=Config.resolve("EDGE_SAMPLES", None, settings, int),
        gradient_check=not args.skip_gradient_check,
    )
    model = train_toy(dataset.records, book, cfg, resolve_camera(args.camera), resolve_model(args.model))
    save_toy_model(model, args.out)
    return EXIT_OK


def _make_predictor(args, book: AttitudeCodebook, camera, model, n: int):
    if args.predictor == "truth":
        return TruthPredictor()
    if args.predictor == "oracle":
        return OraclePredictor(book, args.sigma_att, args.sigma_box, args.seed, n)
    if not args.toy_model:
        raise UsageError("--predictor toy needs --toy-model")
    toy = load_toy_model(args.toy_model)
    if toy.m != book.m:
        raise UsageError(f"Toy model has {toy.m} classes but the codebook has {book.m}")
    return ToyPredictor(toy, camera, model)


def cmd_predict(args, settings) -> int:
    dataset, book = _load_labeled(args.dataset, args.codebook)
    camera = resolve_camera(args.camera)
    model = resolve_model(args.model)
    n = args.n or _dataset_n(dataset)
    pipeline = PosePipeline(
        camera, model, book,
        predictor=_make_predictor(args, book, camera, model, n),
        n=n,
        solver=_solver_config(args, settings),
        l_c=characteristic_length(model, Config.resolve("LC_METHOD", args.lc_method, settings)),
    )
    estimates = pipeline.process_records(dataset.records, jobs=_jobs(args, settings))
    write_predictions(estimates, args.out)
    return EXIT_OK


def cmd_eval(args, settings) -> int:
    dataset = load_dataset(args.truth)
    records = evaluate(dataset.records, load_predictions(args.pred))
    write_reports(records, args.out, Config.resolve("BIN_SIZE", args.bin, settings, int))
    return EXIT_OK


def cmd_selftest(args, settings) -> int:
    results = run_selftest(args.seed)
    for result in results:
        print(result.summary())
    return EXIT_OK if all(r.passed for r in results) else EXIT_DATA


COMMANDS = {
    ("codebook", "gen"): cmd_codebook_gen,
    ("model", "info"): cmd_model_info,
    ("dataset", "gen"): cmd_dataset_gen,
    ("solve", None): cmd_solve,
    ("train", "toy"): cmd_train_toy,
    ("predict", None): cmd_predict,
    ("eval", None): cmd_eval,
    ("selftest", None): cmd_selftest,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        settings = Config.load_file(args.config)
        if args.log_level:
            set_level(args.log_level)
        handler = COMMANDS[(args.command, getattr(args, "action", None))]
        return handler(args, settings)
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else EXIT_OK
    except NonConvergenceError as e:
        logger.error(str(e))
        return EXIT_NONCONVERGENCE
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (SpnKitError, OSError) as e:
        logger.error(str(e))
        return EXIT_DATA
    except ValueError as e:
        logger.error(f"Invalid setting: {e}")
        return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
