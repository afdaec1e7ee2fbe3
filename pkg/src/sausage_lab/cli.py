"""Command-line front end.

Configuration is a flat key=value namespace. Precedence, lowest to highest:
built-in defaults, a named preset (preset=desk or preset=reference), a
config file (--config, one key=value per line, # comments), then key=value
arguments on the command line. Unknown keys are rejected.

Every run writes under <out_dir>/<command>/<hash>/ where the hash digests
the fully resolved configuration, so a rerun with identical settings lands
in the same directory and reproduces byte-identical result files. All
randomness descends from the single seed key. --dry-run prints the seed
schedule and a work estimate, touching nothing on disk.

Worker threads for the volume-estimation stage are capped by the
SAUSAGE_LAB_WORKERS environment variable; results never depend on it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import obstacles, rates, sausage
from .errors import ConfigurationError, FieldValidationError, SausageLabError
from .fields import resolve_field, validate_field
from .sde import IntegratorConfig, integrate

_PRESETS = {
    # quick settings for a laptop-scale sanity run
    "desk": {"T": 200.0, "dt": 0.01, "J": 2000, "n_realizations": 4},
    # the long-horizon reference recipe (hours of compute at defaults)
    "reference": {"T": 10_000.0, "dt": 0.01, "J": 10_000, "n_realizations": 16},
}

_COMMON = {
    "field": "zero",
    "dimension": 3,
    "eps": 0.25,
    "r": 1.0,
    "T": 10_000.0,
    "dt": 0.01,
    "m": 4,
    "J": 10_000,
    "n_realizations": 4,
    "seed": 0,
    "section": "ball",
    "radius": 1.0,
    "half_widths": "",
    "out_dir": "runs",
    "preset": "",
}

_DEFAULTS = {
    "growth-rate": dict(_COMMON),
    "sweep-r": {**_COMMON, "r_values": "0.01,0.1,1,10,50", "resume": False},
    "diffusivity": {
        k: v for k, v in _COMMON.items() if k not in ("m", "J", "section", "radius", "half_widths")
    },
    "capacity": {
        k: v for k, v in _COMMON.items() if k not in ("field", "r", "eps")
    },
    "survival": {
        "field": "zero",
        "dimension": 3,
        "eps": 1.0,
        "r": 1.0,
        "sigma": 24.0,
        "n_paths": 200,
        "n_obstacle_fields": 1,
        "dt": 0.01,
        "lambda_ref": 0.0,
        "horizon_lifetimes": 3.0,
        "region_half_side": 0.0,
        "seed": 0,
        "section": "ball",
        "radius": 1.0,
        "half_widths": "",
        "out_dir": "runs",
        "preset": "",
    },
    "oracle-check": {"m": 4, "J": 10_000, "resolution": 9, "seed": 0, "out_dir": "runs", "preset": ""},
    "validate-field": {"field": "", "dimension": 3, "out_dir": "runs", "preset": ""},
}

_DEFAULTS["diffusivity"]["n_realizations"] = 1000
_DEFAULTS["capacity"]["a_bar"] = "1,1,1"
_DEFAULTS["capacity"]["T"] = 1000.0
_DEFAULTS["capacity"]["n_realizations"] = 16


def _parse_value(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _load_config_file(path: str) -> dict:
    out = {}
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file not found: {path}")
    for line_no, line in enumerate(p.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigurationError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = text.partition("=")
        out[key.strip()] = _parse_value(value)
    return out


def _resolve_config(command: str, file_cfg: dict, overrides: list[str]) -> dict:
    cfg = dict(_DEFAULTS[command])
    layered = dict(file_cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        layered[key.strip()] = _parse_value(value)
    preset = str(layered.get("preset", cfg.get("preset", "")) or "")
    if preset:
        if preset not in _PRESETS:
            raise ConfigurationError(
                f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}"
            )
        for key, value in _PRESETS[preset].items():
            if key in cfg:
                cfg[key] = value
        cfg["preset"] = preset
    for key, value in layered.items():
        if key not in cfg:
            raise ConfigurationError(f"unknown config key {key!r} for {command}")
        cfg[key] = value
    return cfg


# operational knobs that do not change what is computed; they stay out of the
# run-directory hash so a resumed or relocated run reuses its directory
_EPHEMERAL_KEYS = ("out_dir", "resume")


def _config_hash(command: str, cfg: dict) -> str:
    persistent = {k: v for k, v in cfg.items() if k not in _EPHEMERAL_KEYS}
    blob = json.dumps({"command": command, "config": persistent}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _run_dir(command: str, cfg: dict) -> Path:
    d = Path(cfg["out_dir"]) / command / _config_hash(command, cfg)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _section_from(cfg: dict) -> sausage.CrossSection:
    kind = str(cfg.get("section", "ball"))
    if kind == "ball":
        return sausage.ball(radius=float(cfg["radius"]), dimension=int(cfg["dimension"]))
    if kind == "box":
        text = str(cfg.get("half_widths", "")).strip()
        if not text:
            raise ConfigurationError("section=box requires half_widths=a,b,c")
        hw = [float(x) for x in text.split(",")]
        return sausage.box(half_widths=hw)
    raise ConfigurationError(f"unknown section kind {kind!r}")


def _field_from(cfg: dict):
    base = resolve_field(str(cfg["field"]), dimension=int(cfg["dimension"]))
    r = float(cfg.get("r", 1.0))
    return base.with_scale(r) if r != 1.0 else base


def _float_list(text: str, key: str) -> list[float]:
    try:
        values = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"{key} must be a comma-separated number list") from exc
    if not values:
        raise ConfigurationError(f"{key} must be nonempty")
    return values


def _dry_run_report(command: str, cfg: dict, n_streams: int, step_estimate: float) -> str:
    seed = int(cfg.get("seed", 0))
    shown = min(n_streams, 5)
    pairs = ", ".join(f"({seed}, {i})" for i in range(shown))
    if n_streams > shown:
        pairs += f", ... ({seed}, {n_streams - 1})"
    lines = [
        f"command: {command}",
        f"run dir would be: {Path(cfg['out_dir']) / command / _config_hash(command, cfg)}",
        f"integrator streams: {pairs}",
        f"estimated Euler steps: {step_estimate:.3g}",
    ]
    return "\n".join(lines)


def _cmd_growth_rate(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    field = _field_from(cfg)
    section = _section_from(cfg)
    n_steps = round(float(cfg["T"]) / float(cfg["dt"]))
    if dry:
        print(_dry_run_report("growth-rate", cfg, int(cfg["n_realizations"]), n_steps * int(cfg["n_realizations"])))
        return {}, {}
    res = rates.estimate_growth_rate(
        field,
        float(cfg["eps"]),
        section,
        T=float(cfg["T"]),
        dt=float(cfg["dt"]),
        m=int(cfg["m"]),
        n_offsets=int(cfg["J"]),
        n_realizations=int(cfg["n_realizations"]),
        master_seed=int(cfg["seed"]),
    )
    return res.to_json_dict(), {}


def _cmd_sweep_r(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    field = _field_from(cfg)
    section = _section_from(cfg)
    r_values = _float_list(cfg["r_values"], "r_values")
    if dry:
        steps = sum(
            float(cfg["T"]) / min(float(cfg["dt"]), rates.suggested_dt(field.with_scale(r)))
            for r in r_values
        ) * int(cfg["n_realizations"])
        print(_dry_run_report("sweep-r", cfg, int(cfg["n_realizations"]), steps))
        return {}, {}
    run_dir = _run_dir("sweep-r", cfg)
    csv_path = run_dir / "sweep.csv"
    res = rates.sweep_r(
        field,
        float(cfg["eps"]),
        section,
        r_values,
        T=float(cfg["T"]),
        dt=float(cfg["dt"]),
        m=int(cfg["m"]),
        n_offsets=int(cfg["J"]),
        n_realizations=int(cfg["n_realizations"]),
        master_seed=int(cfg["seed"]),
        csv_path=csv_path,
        resume=bool(cfg["resume"]),
    )
    payload = {
        "rows": [dict(zip(rates.SWEEP_COLUMNS, row.as_list())) for row in res.rows],
        "errors": [{"r": r, "message": msg} for r, msg in res.errors],
        "csv": csv_path.name,
    }
    return payload, {"csv": csv_path}


def _cmd_diffusivity(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    field = _field_from(cfg)
    n_steps = round(float(cfg["T"]) / float(cfg["dt"]))
    if dry:
        print(_dry_run_report("diffusivity", cfg, int(cfg["n_realizations"]), n_steps * int(cfg["n_realizations"])))
        return {}, {}
    res = rates.estimate_effective_diffusivity(
        field,
        float(cfg["eps"]),
        T=float(cfg["T"]),
        dt=float(cfg["dt"]),
        n_realizations=int(cfg["n_realizations"]),
        master_seed=int(cfg["seed"]),
    )
    return res.to_json_dict(), {}


def _cmd_capacity(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    section = _section_from(cfg)
    diag = _float_list(cfg["a_bar"], "a_bar")
    if len(diag) not in (int(cfg["dimension"]), int(cfg["dimension"]) ** 2):
        raise ConfigurationError("a_bar must list the diagonal or the full matrix")
    d = int(cfg["dimension"])
    a_bar = np.array(diag) if len(diag) == d else np.array(diag).reshape(d, d)
    n_steps = round(float(cfg["T"]) / float(cfg["dt"]))
    if dry:
        print(_dry_run_report("capacity", cfg, int(cfg["n_realizations"]), n_steps * int(cfg["n_realizations"])))
        return {}, {}
    res = rates.capacity_anisotropic(
        a_bar,
        section,
        T=float(cfg["T"]),
        dt=float(cfg["dt"]),
        m=int(cfg["m"]),
        n_offsets=int(cfg["J"]),
        n_realizations=int(cfg["n_realizations"]),
        master_seed=int(cfg["seed"]),
    )
    return res.to_json_dict(), {}


def _cmd_survival(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    field = _field_from(cfg)
    section = _section_from(cfg)
    lam = float(cfg["lambda_ref"])
    if lam <= 0:
        raise ConfigurationError("lambda_ref must be set to a positive reference rate")
    t_max = float(cfg["horizon_lifetimes"]) * float(cfg["sigma"]) ** 2 / lam
    if dry:
        steps = (t_max / float(cfg["dt"])) * int(cfg["n_paths"])
        print(_dry_run_report("survival", cfg, int(cfg["n_paths"]), steps))
        return {}, {}
    region = None
    if float(cfg["region_half_side"]) > 0:
        center = np.zeros(int(cfg["dimension"]))
        region = obstacles.Region.cube(center, float(cfg["region_half_side"]))
    res = obstacles.survival_experiment(
        field,
        float(cfg["eps"]),
        section,
        sigma=float(cfg["sigma"]),
        n_paths=int(cfg["n_paths"]),
        n_obstacle_fields=int(cfg["n_obstacle_fields"]),
        dt=float(cfg["dt"]),
        master_seed=int(cfg["seed"]),
        lambda_ref=lam,
        horizon_lifetimes=float(cfg["horizon_lifetimes"]),
        region=region,
    )
    run_dir = _run_dir("survival", cfg)
    trials_path = run_dir / "trials.csv"
    obstacles.write_trials_csv(res.trials, trials_path)
    payload = res.to_json_dict()
    payload["trials_csv"] = trials_path.name
    return payload, {"trials": trials_path}


def _cmd_oracle_check(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    """Quick closed-form battery for the volume estimator."""
    if dry:
        print(_dry_run_report("oracle-check", cfg, 1, 0))
        return {}, {}
    m, J, seed = int(cfg["m"]), int(cfg["J"]), int(cfg["seed"])
    section = sausage.ball(radius=1.0, dimension=3)
    checks = []

    from .sde import SamplePath

    still = SamplePath(positions=np.zeros((2, 3)), dt=1.0, seed=seed)
    est = sausage.estimate_volume(still, section, m=m, n_offsets=J, seed=seed)
    target = 4.0 * np.pi / 3.0
    checks.append(("point-ball", est.v_hat, target, abs(est.v_hat / target - 1) <= 0.02))

    # dense sampling: the estimator measures the union of balls at the
    # recorded points, which matches the continuum capsule only when the
    # spacing is well under the radius
    seg = np.zeros((51, 3))
    seg[:, 0] = np.linspace(0.0, 5.0, 51)
    capsule = SamplePath(positions=seg, dt=1.0, seed=seed)
    est2 = sausage.estimate_volume(capsule, section, m=m, n_offsets=J, seed=seed)
    target2 = 5.0 * np.pi + 4.0 * np.pi / 3.0
    checks.append(("segment-capsule", est2.v_hat, target2, abs(est2.v_hat / target2 - 1) <= 0.02))

    cfg_i = IntegratorConfig(x0=np.zeros(3), dt=0.01, n_steps=1000, epsilon=1.0, seed=seed)
    from .fields import zero_field

    path = integrate(zero_field(3), cfg_i)
    est3 = sausage.estimate_volume(path, section, m=m, n_offsets=J, seed=seed)
    vox = sausage.voxel_oracle_volume(path, section, resolution=int(cfg["resolution"]))
    checks.append(("voxel-agreement", est3.v_hat, vox, abs(est3.v_hat / vox - 1) <= 0.02))

    payload = {"checks": []}
    ok = True
    for name, got, want, passed in checks:
        ok &= passed
        line = f"{'PASS' if passed else 'FAIL'} {name}: got {got:.6g}, reference {want:.6g}"
        print(line)
        payload["checks"].append(
            {"name": name, "value": got, "reference": want, "passed": passed}
        )
    if not ok:
        raise SausageLabError("oracle check failed")
    return payload, {}


def _cmd_validate_field(cfg: dict, dry: bool) -> tuple[dict, dict[str, Path]]:
    name = str(cfg["field"])
    if not name:
        raise ConfigurationError("validate-field requires field=<id>")
    if dry:
        print(_dry_run_report("validate-field", cfg, 1, 0))
        return {}, {}
    field = resolve_field(name, dimension=int(cfg["dimension"]))
    report = validate_field(field)
    for key, value in sorted(report.items()):
        print(f"{key}: {value}")
    return dict(report), {}


_COMMANDS = {
    "growth-rate": _cmd_growth_rate,
    "sweep-r": _cmd_sweep_r,
    "diffusivity": _cmd_diffusivity,
    "capacity": _cmd_capacity,
    "survival": _cmd_survival,
    "oracle-check": _cmd_oracle_check,
    "validate-field": _cmd_validate_field,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sausage-lab",
        description="Sausage growth rates for periodic incompressible drifts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--dry-run", action="store_true", help="print seed schedule and work estimate only")
        p.add_argument("overrides", nargs="*", help="key=value overrides")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # accept key=value overrides after flags too (argparse cannot resume a
    # nargs="*" positional once an optional interrupts it)
    args, extra = parser.parse_known_args(argv)
    stray = [t for t in extra if t.startswith("-") or "=" not in t]
    if stray:
        parser.error(f"unrecognized arguments: {' '.join(stray)}")
    args.overrides = list(args.overrides) + extra
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        cfg = _resolve_config(args.command, file_cfg, args.overrides)
    except (ConfigurationError, FieldValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.dry_run:
            _COMMANDS[args.command](cfg, dry=True)
            return 0
        started = time.monotonic()
        payload, _ = _COMMANDS[args.command](cfg, dry=False)
        run_dir = _run_dir(args.command, cfg)
        _write_json(run_dir / "config.json", {"command": args.command, "config": cfg})
        _write_json(run_dir / "result.json", {"command": args.command, "config": cfg, "result": payload})
        elapsed = time.monotonic() - started
        with (run_dir / "log.txt").open("a") as fh:
            fh.write(f"command={args.command} elapsed={elapsed:.3f}s status=ok\n")
        print(f"wrote {run_dir / 'result.json'}")
        return 0
    except (ConfigurationError, FieldValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SausageLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
