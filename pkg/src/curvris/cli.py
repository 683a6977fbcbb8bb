"""Command-line front end.

Commands: generate, train, fit-nls, sweep, pattern, evaluate.  Every command
prints its resolved configuration first and is deterministic under a fixed
--seed.  CSV outputs get a rendered PNG companion unless --no-plot is given.

Exit codes: 0 success, 1 invalid arguments/config, 2 I/O or corrupt input,
3 solver or training failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import measurement
from .config import ExperimentConfig, parse_config_file
from .errors import ConfigError, DataFormatError, SolverError, TrainingError
from .estimator_nls import NlsOptions, nls_fit
from .estimator_nn import (TrainConfig, TrainedModel, load_model,
                           mean_squared_error, per_parameter_mse, save_model, train)
from .evaluation import (DesignKind, beam_profile, eval_snr, export_training_curves,
                         sweep_location_error, sweep_sigma, write_sweep_csv)
from .geometry import SurfaceCoeffs, sample_coeffs
from .measurement import (apply_scaler, build_power_table, generate_dataset,
                          load_dataset, load_table_csv, min_spacing,
                          normalize_minmax, planar_measurement_plan, save_dataset,
                          save_scaler, split)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_SOLVER = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_vec3(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"expected 'x,y,z', got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = cfg.with_values(parse_config_file(args.config))
    overrides: dict[str, str] = {}
    for attr, key in (
        ("s", "data.samples"),
        ("sigma", "data.sigma"),
        ("seed", "data.seed"),
        ("scheme", "data.scheme"),
        ("max_epochs", "train.max_epochs"),
        ("batch_size", "train.batch_size"),
        ("patience", "train.patience"),
        ("lr", "train.learning_rate"),
        ("trials", "sweep.trials"),
        ("out_dir", "out.dir"),
        ("threads", "run.threads"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "include_coords", False):
        overrides["data.include_coords"] = "true"
    if getattr(args, "noise", False):
        overrides["data.noise"] = "true"
    return cfg.with_values(overrides)


def _print_config(cfg: ExperimentConfig) -> None:
    for key, value in cfg.items():
        print(f"{key} = {value}")


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _maybe_plot(args, render, *render_args) -> None:
    if not getattr(args, "no_plot", False):
        render(*render_args)


def cmd_generate(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    scene = cfg.scene
    plan = scene.build_plan(cfg.scheme)
    noise_w = scene.noise_power_w if cfg.measurement_noise else None
    dataset = generate_dataset(
        cfg.n_samples, cfg.sigma, plan, scene.grid, scene.radio,
        np.random.default_rng(cfg.seed), include_coords=cfg.include_coords,
        noise_power_w=noise_w, threads=cfg.threads,
    )
    path = out / (args.name + ".fris")
    save_dataset(dataset, path)
    # the persisted scaler mirrors what training will fit on its train split;
    # tiny datasets that cannot be split are scaled on all samples
    if dataset.n_samples >= 10:
        train_part, _, _ = split(dataset, rng=np.random.default_rng([cfg.seed, 0]))
    else:
        train_part = dataset
    _, scaler = normalize_minmax(train_part)
    save_scaler(scaler, path.with_suffix(".scaler"))
    print(f"samples = {dataset.n_samples}")
    print(f"input_dim = {dataset.input_dim}")
    print(f"dataset = {path}")
    print(f"sha256 = {_sha256(path)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    dataset = load_dataset(args.dataset)
    train_part, val_part, test_part = split(dataset, rng=np.random.default_rng([cfg.seed, 0]))
    train_norm, scaler = normalize_minmax(train_part)
    val_norm = apply_scaler(val_part, scaler)
    test_norm = apply_scaler(test_part, scaler)

    params, history = train(train_norm, val_norm, cfg.train,
                            np.random.default_rng([cfg.seed, 1]))
    if not np.all(np.isfinite(history.val_mse)):
        raise TrainingError("validation loss diverged")
    model = TrainedModel(params=params, scaler=scaler)

    model_path = out / (args.name + ".mlp")
    save_model(model, model_path)
    history_path = out / (args.name + "_history.csv")
    export_training_curves(history, history_path)
    from .plots import save_training_plot
    _maybe_plot(args, save_training_plot, history, history_path.with_suffix(".png"))

    test_mse = per_parameter_mse(params, test_norm)
    print(f"epochs_run = {history.n_epochs}")
    print(f"stopped_early = {str(history.stopped_early).lower()}")
    print(f"best_epoch = {history.best_epoch}")
    print(f"best_val_mse = {history.val_mse[history.best_epoch - 1]!r}")
    print(f"test_mse_overall = {mean_squared_error(params, test_norm)!r}")
    names = ("a_yy", "a_zz", "a_yz", "a_y", "a_z")
    for name, value in zip(names, test_mse):
        print(f"test_mse_{name} = {value!r}")
    print(f"model = {model_path}")
    print(f"sha256 = {_sha256(model_path)}")
    return EXIT_OK


def cmd_fit_nls(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    scene = cfg.scene

    truth = None
    if args.synthesize is not None:
        sigma = args.synthesize
        truth = sample_coeffs(sigma, np.random.default_rng(cfg.seed))
        plan = scene.build_plan(cfg.scheme)
        table = build_power_table(truth, plan, scene.grid, scene.radio)
    elif args.table:
        locations, powers, scheme = load_table_csv(args.table)
        plan = planar_measurement_plan(scene.grid, scene.radio, scene.u_bs,
                                       locations, scheme)
        table = measurement.PowerTable(powers=powers, plan=plan)
    else:
        raise ConfigError("fit-nls needs --table FILE or --synthesize SIGMA")

    opts = NlsOptions(multistart=args.multistart, max_iterations=args.max_iter,
                      seed=cfg.seed)
    coeffs, diag = nls_fit(table, plan, scene.grid, scene.radio, opts)

    path = out / (args.name + ".csv")
    names = ("a_yy", "a_zz", "a_yz", "a_y", "a_z")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(names) + ["cost", "iterations", "converged", "ambiguous"]
        row = [repr(v) for v in coeffs.as_array()] + [
            repr(diag.final_cost), diag.iterations,
            str(diag.converged).lower(), str(diag.ambiguous).lower(),
        ]
        if truth is not None:
            header += [f"true_{n}" for n in names]
            row += [repr(v) for v in truth.as_array()]
        writer.writerow(header)
        writer.writerow(row)

    for name, value in zip(names, coeffs.as_array()):
        print(f"{name} = {value!r}")
    print(f"cost = {diag.final_cost!r}")
    print(f"iterations = {diag.iterations}")
    print(f"converged = {str(diag.converged).lower()}")
    print(f"ambiguous = {str(diag.ambiguous).lower()}")
    print(f"result = {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    model = load_model(args.model)
    rng = np.random.default_rng(cfg.seed)
    values = _parse_float_list(args.values) if args.values else None
    if args.kind == "sigma":
        result = sweep_sigma(values or cfg.sweep_sigma_values, cfg.sweep_trials,
                             model, cfg.scene, rng)
    else:
        result = sweep_location_error(values or cfg.sweep_epsilon_values,
                                      cfg.sweep_trials, model, cfg.scene, rng,
                                      sigma=cfg.sigma)
    path = out / (args.name + ".csv")
    write_sweep_csv(result, path)
    from .plots import save_sweep_plot
    _maybe_plot(args, save_sweep_plot, result, path.with_suffix(".png"))
    for vi, value in enumerate(result.values):
        cells = ", ".join(
            f"{design}={result.mean_snr_db[vi, di]:.2f} dB"
            for di, design in enumerate(result.designs)
        )
        print(f"{result.variable}={value:g}: {cells}")
    print(f"result = {path}")
    return EXIT_OK


def cmd_pattern(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    scene = cfg.scene
    target = _parse_vec3(args.target)
    coeffs = None
    if args.sigma_surface is not None:
        coeffs = sample_coeffs(args.sigma_surface, np.random.default_rng(cfg.seed))
    profile = beam_profile(scene, target, axis=args.axis, span=args.span,
                           steps=args.steps, coeffs=coeffs)

    path = out / (args.name + ".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if profile.grid_shape is None:
            writer.writerow(["offset_m", "power_w", "rel_db"])
            for off, p_w, db in zip(profile.offsets, profile.power_w, profile.rel_db):
                writer.writerow([repr(float(off)), repr(float(p_w)), repr(float(db))])
        else:
            writer.writerow(["offset_x_m", "offset_y_m", "power_w", "rel_db"])
            for off, p_w, db in zip(profile.offsets, profile.power_w, profile.rel_db):
                writer.writerow([repr(float(off[0])), repr(float(off[1])),
                                 repr(float(p_w)), repr(float(db))])
    from .plots import save_profile_plot
    _maybe_plot(args, save_profile_plot, profile, path.with_suffix(".png"))

    if profile.grid_shape is None and args.axis == "y":
        probe = min_spacing(scene.measurement_range_m, scene.grid.n_y)
        inside = np.abs(np.abs(profile.offsets) - probe) < 1e-9
        if np.any(inside):
            print(f"rel_db_at_{probe:g}m = {profile.rel_db[inside].max()!r}")
    print(f"peak_offset = {profile.offsets[np.argmax(profile.power_w)]!r}")
    print(f"result = {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    _print_config(cfg)
    out = _out_dir(cfg)
    scene = cfg.scene
    model = load_model(args.model) if args.model else None
    noise_w = scene.noise_power_w
    plan = scene.build_plan()

    designs = [DesignKind.PLANAR, DesignKind.ORACLE]
    if model is not None:
        designs.insert(1, DesignKind.PROPOSED)

    rician = None
    if args.channel == "rician":
        from . import channel as ch
        rician = ch  # imported lazily just to signal the mode below

    streams = np.random.default_rng(cfg.seed).bit_generator.seed_seq.spawn(args.trials)
    rows = []
    for t in range(args.trials):
        g = np.random.default_rng(streams[t])
        coeffs = sample_coeffs(cfg.sigma, g)
        lo, hi = scene.coverage_lo, scene.coverage_hi
        u_mu = np.array([g.uniform(lo[0], hi[0]), g.uniform(lo[1], hi[1]),
                         g.uniform(lo[2], hi[2])])
        for design in designs:
            snr = eval_snr(coeffs, design, u_mu, scene, noise_w, model=model, plan=plan)
            rows.append((t + 1, design.value, "los", snr))
        if rician is not None:
            for design in designs:
                snr = _rician_snr(coeffs, design, u_mu, scene, noise_w, model, plan, g)
                rows.append((t + 1, design.value, "rician", snr))

    path = out / (args.name + ".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "design", "channel", "snr_db"])
        for trial, design, kind, snr in rows:
            writer.writerow([trial, design, kind, repr(float(snr))])

    for design in designs:
        values = [snr for _, d, k, snr in rows if d == design.value and k == "los"]
        print(f"mean_snr_{design.value} = {np.mean(values):.3f} dB")
    print(f"result = {path}")
    return EXIT_OK


def _rician_snr(coeffs, design, u_mu, scene, noise_w, model, plan, rng) -> float:
    """SNR through the full two-hop cascade with scattered components."""
    from .channel import (draw_scatterers, los_channel, nlos_channel,
                          pathloss_amplitude, rician_channel)
    from .evaluation import _design_phases
    from .geometry import element_positions
    from .measurement import PowerModel

    radio = scene.radio
    kappa = radio.wave_number
    measure = PowerModel(scene.grid, radio, plan) if design is DesignKind.PROPOSED else None
    phases = _design_phases(design, coeffs, u_mu, scene, model, measure)
    pos = element_positions(scene.grid, coeffs)

    exps = radio.pathloss_exponents
    c_t = pathloss_amplitude(float(np.linalg.norm(scene.u_bs)), radio, exps[1])
    c_r = pathloss_amplitude(float(np.linalg.norm(u_mu)), radio, exps[2])
    h_t_los = los_channel(pos, scene.u_bs[None, :], c_t, kappa)
    h_r_los = los_channel(u_mu[None, :], pos, c_r, kappa)
    h_t_nlos = nlos_channel(draw_scatterers(scene.rician, c_t, rng),
                            pos, scene.u_bs[None, :], kappa)
    h_r_nlos = nlos_channel(draw_scatterers(scene.rician, c_r, rng),
                            u_mu[None, :], pos, kappa)
    h_t = rician_channel(h_t_los, h_t_nlos, scene.rician.k_factors[1])
    h_r = rician_channel(h_r_los, h_r_nlos, scene.rician.k_factors[2])

    gamma = phases.reflection_coefficients()
    amp = (h_r * gamma[None, :]) @ h_t * np.sqrt(radio.tx_power_w)
    return float(10.0 * np.log10(abs(amp[0, 0]) ** 2 / noise_w))


def build_parser() -> _Parser:
    parser = _Parser(prog="curvris",
                     description="Curved-panel RIS simulation and estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, name_default):
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--threads", type=int, help="worker thread cap")
        p.add_argument("--name", default=name_default, help="output file basename")
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p = sub.add_parser("generate", help="generate a training dataset")
    add_common(p, "dataset")
    p.add_argument("--s", type=int, help="number of samples")
    p.add_argument("--sigma", type=float, help="geometry spread")
    p.add_argument("--scheme", choices=["diagonal", "full"])
    p.add_argument("--include-coords", action="store_true",
                   help="append measurement (x, y) coordinates to inputs")
    p.add_argument("--noise", action="store_true", help="add receiver noise")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("train", help="train the coefficient regressor")
    add_common(p, "model")
    p.add_argument("--dataset", required=True, help="dataset file from 'generate'")
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--lr", type=float, help="learning rate")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("fit-nls", help="least-squares fit of a power table")
    add_common(p, "nls_fit")
    p.add_argument("--table", help="power-table CSV")
    p.add_argument("--synthesize", type=float, metavar="SIGMA",
                   help="draw a surface and fit its synthetic table")
    p.add_argument("--scheme", choices=["diagonal", "full"])
    p.add_argument("--sigma", type=float, help=argparse.SUPPRESS)
    p.add_argument("--multistart", type=int, default=8)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=200)
    p.set_defaults(handler=cmd_fit_nls)

    p = sub.add_parser("sweep", help="benchmark designs over sigma or location error")
    add_common(p, "sweep")
    p.add_argument("--kind", choices=["sigma", "error"], required=True)
    p.add_argument("--model", required=True, help="model file from 'train'")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma", type=float,
                   help="geometry spread for the error sweep")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("pattern", help="received-power profile around a target")
    add_common(p, "pattern")
    p.add_argument("--target", default="10,2,-5", help="target location x,y,z")
    p.add_argument("--axis", choices=["y", "x", "area"], default="y")
    p.add_argument("--span", type=float, default=1.0, help="profile half-width (m)")
    p.add_argument("--steps", type=int, default=161)
    p.add_argument("--sigma-surface", dest="sigma_surface", type=float,
                   help="evaluate on a random surface of this spread")
    p.set_defaults(handler=cmd_pattern)

    p = sub.add_parser("evaluate", help="per-trial SNR of the three designs")
    add_common(p, "evaluate")
    p.add_argument("--model", help="model file (enables the proposed design)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--channel", choices=["los", "rician"], default="los")
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, DataFormatError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
