"""
Command-line front end.

    hlddc synth    --example dc_motor --out run/
    hlddc compare  --example flexible_transmission --out cmp/
    hlddc freqdata --plant-num 0.01 --plant-den 0.005,0.06,0.1001 --T 0.9 --out data/
    hlddc synth    --plant-data data/plant_freq.csv --ref-num 1 --ref-den 1,2,1 --T 0.9 --out run/

Exit codes: 0 success, 1 input error, 2 unstable loop verdict, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import (
    DivergedSimulation,
    DuplicateFrequency,
    EmptyFile,
    HlddcError,
    InputError,
    IoError,
    MalformedRow,
    NumericalError,
)
from .hybrid import (
    HybridLoop,
    hybrid_stability_check,
    mismatch_metrics,
    simulate_hybrid_step,
)
from .lti import RationalTF, evaluate, is_stable, step_response, tustin_discretize
from .synthesis import (
    PlantData,
    SynthesisOptions,
    SynthesisResult,
    hold_response,
    sample_grid,
    sample_plant,
    synthesize_hlddc,
    synthesize_lddc_continuous,
)

log = logging.getLogger("hlddc")

SCHEMA_VERSION = 1
FREQ_HEADER = ["omega_rad_s", "re", "im"]
COMMANDS = ("synth", "lddc", "tustin", "simulate", "compare", "check", "freqdata")
EXAMPLES = ("dc_motor", "flexible_transmission")
LDDC_GRID = (0.1, 1e3, 100)

EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 1, 2, 3


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


# --------------------------------------------------------------------------
# file formats


def parse_frequency_csv(path) -> PlantData:
    """Read plant samples from a CSV with header ``omega_rad_s,re,im``.

    Rows may come in any order; they are sorted by frequency.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    lineno, header = rows[0]
    if [h.strip() for h in header.split(",")] != FREQ_HEADER:
        raise MalformedRow(lineno, header)
    omega, values = [], []
    for lineno, text in rows[1:]:
        parts = text.split(",")
        if len(parts) != 3:
            raise MalformedRow(lineno, text)
        try:
            w, re_, im = (float(p) for p in parts)
        except ValueError:
            raise MalformedRow(lineno, text) from None
        if not (np.isfinite(w) and np.isfinite(re_) and np.isfinite(im)) or w <= 0:
            raise MalformedRow(lineno, text)
        omega.append(w)
        values.append(complex(re_, im))
    if not omega:
        raise EmptyFile(f"{path} has a header but no samples")
    omega = np.array(omega)
    values = np.array(values)
    order = np.argsort(omega, kind="stable")
    note = f"read from {path.name}"
    if np.any(order != np.arange(order.size)):
        note += "; rows reordered by frequency"
    omega, values = omega[order], values[order]
    dup = np.flatnonzero(np.diff(omega) == 0)
    if dup.size:
        raise DuplicateFrequency(f"frequency {omega[dup[0]]} appears more than once")
    return PlantData(omega, values, note)


def _atomic_write(path: Path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_csv(path: Path, header: List[str], columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _write_json(path: Path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, allow_nan=True) + "\n")


def write_frequency_csv(path, plant: PlantData):
    v = plant.values
    _write_csv(Path(path), FREQ_HEADER, (plant.omega, v.real, v.imag))


def controller_dict(tf: RationalTF) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "T": tf.dt,
        "num": [float(c) for c in np.real(tf.num)],
        "den": [float(c) for c in np.real(tf.den)],
        "order": tf.order,
        "stable": bool(is_stable(tf)),
    }


def load_controller(path) -> RationalTF:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read controller {path}: {exc}") from None
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {d.get('schema_version')!r}")
    try:
        return RationalTF(np.array(d["num"], dtype=float), np.array(d["den"], dtype=float), d["T"])
    except KeyError as exc:
        raise InputError(f"{path}: missing field {exc}") from None


def emit_controller(result: SynthesisResult, out_dir, extra: Optional[dict] = None) -> List[Path]:
    """Write ``controller.json``, ``report.json`` and ``freqresp.csv``.

    The CSV has one row per synthesis node: the ideal discrete response, the
    achieved controller response and the holder-completed ``K_d R``.
    """
    out = Path(out_dir)
    tf = result.tf
    paths = [out / "controller.json", out / "report.json", out / "freqresp.csv"]
    _write_json(paths[0], controller_dict(tf))
    report = {"schema_version": SCHEMA_VERSION, **(extra or {}), **result.report.as_dict()}
    _write_json(paths[1], report)

    data = result.data
    if tf.dt is None:
        omega = data.nodes.imag
        R = np.ones_like(omega, dtype=complex)
    else:
        omega = np.angle(data.nodes) / tf.dt
        R = hold_response(omega, tf.dt)
    kd = np.array([evaluate(tf, x) for x in data.nodes])
    psi, kdr = data.values, kd * R
    header = ["omega_rad_s", "psi_re", "psi_im", "kd_re", "kd_im", "kdr_re", "kdr_im"]
    _write_csv(paths[2], header, (omega, psi.real, psi.imag, kd.real, kd.imag, kdr.real, kdr.imag))
    return paths


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str
    options: SynthesisOptions
    reference_tf: Optional[RationalTF]
    output_dir: Path
    plant_tf: Optional[RationalTF] = None
    plant_data: Optional[Path] = None
    oversample: int = 20
    duration: float = 10.0
    seed: int = 0
    lddc_stabilize: bool = False
    controller: Optional[Path] = None
    name: str = ""
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if (self.plant_tf is None) == (self.plant_data is None):
            raise InputError("give exactly one of a plant model or a plant data file")

    def plant(self):
        if self.plant_tf is not None:
            return self.plant_tf
        return parse_frequency_csv(self.plant_data)

    def require_model(self, what: str) -> RationalTF:
        if self.plant_tf is None:
            raise InputError(f"{what} needs a plant model (--plant-num/--plant-den)")
        return self.plant_tf

    def require_reference(self) -> RationalTF:
        if self.reference_tf is None:
            raise InputError("a reference model is required (--ref-num/--ref-den)")
        return self.reference_tf


def load_example(name: str) -> dict:
    if name not in EXAMPLES:
        raise InputError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    text = resources.files("hlddc").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)


def _coeffs(text: str) -> List[float]:
    try:
        return [float(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise InputError(f"bad coefficient list {text!r}") from None


def _poly(d, key):
    """Coefficients from ``key`` or from a product of ``key_factors``."""
    if key in d:
        return np.asarray(d[key], dtype=float)
    factors = d.get(f"{key}_factors")
    if factors is None:
        raise InputError(f"transfer function needs '{key}' or '{key}_factors'")
    out = np.array([1.0])
    for f in factors:
        out = np.polymul(out, np.asarray(f, dtype=float))
    return out


def _tf(d) -> Optional[RationalTF]:
    """Transfer function from ``{"num", "den"}`` or from factor lists with an
    optional leading ``gain``."""
    if d is None:
        return None
    return RationalTF(d.get("gain", 1.0) * _poly(d, "num"), _poly(d, "den"))


def build_config(args) -> RunConfig:
    """Merge an example or config file with command-line overrides."""
    cfg = {}
    if args.example:
        cfg = load_example(args.example)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg.update(json.load(fh))
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config} is not valid JSON: {exc}") from None

    flat = {
        "T": args.T, "n_samples": args.n_samples, "grid": args.grid,
        "omega_min": args.omega_min, "omega_max_frac": args.omega_max_frac,
        "rank_tol": args.rank_tol, "reduce_to": args.reduce_to,
        "oversample": args.oversample, "duration": args.duration, "seed": args.seed,
    }
    cfg.update({k: v for k, v in flat.items() if v is not None})
    if args.stabilize:
        cfg["stabilize"] = True
    if args.no_stabilize:
        cfg["stabilize"] = False
    if args.plant_num is not None or args.plant_den is not None:
        if args.plant_num is None or args.plant_den is None:
            raise InputError("--plant-num and --plant-den go together")
        cfg["plant_tf"] = {"num": _coeffs(args.plant_num), "den": _coeffs(args.plant_den)}
        cfg.pop("plant_data", None)
    if args.plant_data is not None:
        cfg["plant_data"] = args.plant_data
        cfg.pop("plant_tf", None)
    if args.ref_num is not None or args.ref_den is not None:
        if args.ref_num is None or args.ref_den is None:
            raise InputError("--ref-num and --ref-den go together")
        cfg["reference_tf"] = {"num": _coeffs(args.ref_num), "den": _coeffs(args.ref_den)}

    if "T" not in cfg and args.command != "lddc":
        raise InputError("the sample period --T is required")
    opts = SynthesisOptions(
        T=float(cfg.get("T", 1.0)),
        n_samples=int(cfg.get("n_samples", 50)),
        grid=cfg.get("grid", "log"),
        omega_min=float(cfg.get("omega_min", 0.1)),
        omega_max_fraction=float(cfg.get("omega_max_frac", 0.95)),
        rank_tol=float(cfg.get("rank_tol", 1e-10)),
        stabilize=bool(cfg.get("stabilize", False)),
        reduce_to=cfg.get("reduce_to"),
    )
    plant_data = cfg.get("plant_data")
    return RunConfig(
        command=args.command,
        options=opts,
        reference_tf=_tf(cfg.get("reference_tf")),
        output_dir=Path(args.out),
        plant_tf=_tf(cfg.get("plant_tf")),
        plant_data=None if plant_data is None else Path(plant_data),
        oversample=int(cfg.get("oversample", 20)),
        duration=float(cfg.get("duration", 10.0)),
        seed=int(cfg.get("seed", 0)),
        lddc_stabilize=bool(cfg.get("lddc_stabilize", False)),
        controller=None if args.controller is None else Path(args.controller),
        name=cfg.get("name", ""),
    )


def _options_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg.options)
    d.update(oversample=cfg.oversample, duration=cfg.duration, seed=cfg.seed)
    return d


# --------------------------------------------------------------------------
# commands


def _lddc(cfg: RunConfig) -> SynthesisResult:
    plant = cfg.plant()
    omega = None if isinstance(plant, PlantData) else np.logspace(
        np.log10(LDDC_GRID[0]), np.log10(LDDC_GRID[1]), LDDC_GRID[2])
    return synthesize_lddc_continuous(plant, cfg.require_reference(), omega=omega,
                                      rank_tol=cfg.options.rank_tol, stabilize=cfg.lddc_stabilize)


def tustin_baseline(cfg: RunConfig) -> RationalTF:
    """Tustin discretization of the continuous data-driven controller."""
    return tustin_discretize(_lddc(cfg).tf, cfg.options.T)


def run_synth(cfg: RunConfig) -> int:
    res = synthesize_hlddc(cfg.plant(), cfg.require_reference(), cfg.options)
    code = EXIT_OK
    if cfg.plant_tf is not None:
        verdict = hybrid_stability_check(cfg.plant_tf, res.tf)
        res.report.hybrid_loop_verdict = verdict
        if not verdict.stable:
            code = EXIT_UNSTABLE
    emit_controller(res, cfg.output_dir, {"command": "synth", "options": _options_dict(cfg)})
    log.info("controller of order %d written to %s", res.tf.order, cfg.output_dir)
    return code


def run_lddc(cfg: RunConfig) -> int:
    res = _lddc(cfg)
    emit_controller(res, cfg.output_dir, {"command": "lddc", "options": _options_dict(cfg)})
    return EXIT_OK


def run_tustin(cfg: RunConfig) -> int:
    tf = tustin_baseline(cfg)
    _write_json(cfg.output_dir / "controller.json", controller_dict(tf))
    if cfg.plant_tf is not None:
        verdict = hybrid_stability_check(cfg.plant_tf, tf)
        _write_json(cfg.output_dir / "verdict.json", verdict.as_dict())
        if not verdict.stable:
            return EXIT_UNSTABLE
    return EXIT_OK


def _controller(cfg: RunConfig) -> RationalTF:
    if cfg.controller is not None:
        return load_controller(cfg.controller)
    return synthesize_hlddc(cfg.plant(), cfg.require_reference(), cfg.options).tf


def run_check(cfg: RunConfig) -> int:
    plant = cfg.require_model("check")
    K = _controller(cfg)
    verdict = hybrid_stability_check(plant, K)
    _write_json(cfg.output_dir / "verdict.json", {"schema_version": SCHEMA_VERSION, **verdict.as_dict()})
    print(f"{'stable' if verdict.stable else 'UNSTABLE'} (spectral radius {verdict.spectral_radius:.6g})")
    return EXIT_OK if verdict.stable else EXIT_UNSTABLE


def run_simulate(cfg: RunConfig) -> int:
    plant = cfg.require_model("simulate")
    K = _controller(cfg)
    verdict = hybrid_stability_check(plant, K)
    if not verdict.stable:
        _write_json(cfg.output_dir / "verdict.json", {"schema_version": SCHEMA_VERSION, **verdict.as_dict()})
        return EXIT_UNSTABLE
    tr = simulate_hybrid_step(HybridLoop(plant, K, cfg.oversample), cfg.duration, cfg.reference_tf)
    cols = [tr.time, tr.r, tr.eps, tr.u, tr.y]
    header = ["time_s", "r", "eps", "u", "y"]
    if tr.y_ref is not None:
        cols += [tr.y_ref, tr.e]
        header += ["y_ref", "e"]
    _write_csv(cfg.output_dir / "step.csv", header, cols)
    return EXIT_OK


def run_compare(cfg: RunConfig) -> int:
    """HLDDC and Tustin loops side by side, with the reference step.

    Artifacts are written even when a loop fails the stability check; the
    exit code is then 2.
    """
    plant = cfg.require_model("compare")
    M = cfg.require_reference()
    T, m = cfg.options.T, cfg.oversample
    res = synthesize_hlddc(plant, M, cfg.options)
    controllers = {"hlddc": res.tf, "tustin": tustin_baseline(cfg)}
    ref = step_response(M, cfg.duration, T / m)

    metrics = {"schema_version": SCHEMA_VERSION, "T": T, "oversample": m, "duration": cfg.duration}
    traces = {}
    code = EXIT_OK
    for name, K in controllers.items():
        verdict = hybrid_stability_check(plant, K)
        entry = {"order": K.order, "verdict": verdict.as_dict(), "metrics": None}
        if name == "hlddc":
            res.report.hybrid_loop_verdict = verdict
        if not verdict.stable:
            code = EXIT_UNSTABLE
        try:
            tr = simulate_hybrid_step(HybridLoop(plant, K, m), cfg.duration, M)
            traces[name] = tr.y
            entry["metrics"] = mismatch_metrics(tr, ref).as_dict()
        except DivergedSimulation as exc:
            log.warning("%s loop diverged: %s", name, exc)
            traces[name] = np.full(ref.time.size, np.nan)
        metrics[name] = entry
    metrics["linf_difference"] = float(np.nanmax(np.abs(traces["hlddc"] - traces["tustin"]))) \
        if np.isfinite(traces["hlddc"]).any() and np.isfinite(traces["tustin"]).any() else None

    out = cfg.output_dir
    emit_controller(res, out, {"command": "compare", "options": _options_dict(cfg)})
    _write_json(out / "tustin_controller.json", controller_dict(controllers["tustin"]))
    _write_csv(out / "step_compare.csv", ["time_s", "y_ref", "y_hlddc", "y_tustin"],
               (ref.time, ref.y, traces["hlddc"], traces["tustin"]))
    _write_json(out / "metrics.json", metrics)
    return code


def run_freqdata(cfg: RunConfig) -> int:
    plant = cfg.require_model("freqdata")
    data = sample_plant(plant, sample_grid(cfg.options))
    write_frequency_csv(cfg.output_dir / "plant_freq.csv", data)
    return EXIT_OK


RUNNERS = {
    "synth": run_synth, "lddc": run_lddc, "tustin": run_tustin, "simulate": run_simulate,
    "compare": run_compare, "check": run_check, "freqdata": run_freqdata,
}


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hlddc", description="Data-driven controller synthesis for sampled-data loops.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_argument_group("problem")
    src.add_argument("--example", choices=EXAMPLES, help="start from a bundled example")
    src.add_argument("--config", help="JSON config file (overrides the example)")
    src.add_argument("--plant-data", help="CSV with header omega_rad_s,re,im")
    src.add_argument("--plant-num", help="comma-separated plant numerator, descending powers")
    src.add_argument("--plant-den")
    src.add_argument("--ref-num", help="comma-separated reference-model numerator")
    src.add_argument("--ref-den")
    src.add_argument("--controller", help="controller.json to check or simulate instead of synthesizing")

    syn = p.add_argument_group("synthesis")
    syn.add_argument("--T", type=float, help="sample period in seconds")
    syn.add_argument("--n-samples", type=int)
    syn.add_argument("--grid", choices=("log", "linear"))
    syn.add_argument("--omega-min", type=float)
    syn.add_argument("--omega-max-frac", type=float, help="upper grid edge as a fraction of pi/T")
    syn.add_argument("--rank-tol", type=float)
    syn.add_argument("--stabilize", action="store_true")
    syn.add_argument("--no-stabilize", action="store_true")
    syn.add_argument("--reduce-to", type=int)

    sim = p.add_argument_group("simulation")
    sim.add_argument("--oversample", type=int, help="integration steps per sample period")
    sim.add_argument("--duration", type=float)
    sim.add_argument("--seed", type=int, help="recorded in the report; runs are deterministic")

    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return RUNNERS[args.command](cfg)
    except (InputError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"hlddc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IoError as exc:
        print(f"hlddc: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, HlddcError, np.linalg.LinAlgError) as exc:
        print(f"hlddc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
