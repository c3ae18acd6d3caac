"""Configuration-driven command-line front end.

Subcommands: ``qfim``, ``attainability``, ``detection-modes``,
``list-families``.  Every run reads a JSON config (flags override file
values), writes machine-readable reports with full provenance, and is
deterministic: identical configs produce byte-identical outputs.

Exit codes: 0 success, 1 engine/numerical failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .engine import (
    attainability,
    attainability_single_mode,
    build_generators,
    crb_bounds,
    detection_modes_for,
    qfim_mode_split,
)
from .errors import ConfigError, ModalQcrbError
from .families import FAMILY_REGISTRY, build_family
from .modes import gram_schmidt
from .states import state_from_spec
from . import tolerances

_STATE_KINDS = ("coherent", "fock", "thermal", "squeezed-vacuum")

_CONVENTIONS = {
    "quadrature": "q = a + a_dagger, vacuum variance 1",
    "detection_mode_phase": "derivative mode rotated by i and normalized",
    "single_mode_first_term": "overlap product times number information, no extra scale",
    "inner_product": "conjugate-linear in the first argument",
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["family", "state", "qfim", "bounds", "attainability", "detection_modes", "provenance"],
    "properties": {
        "family": {
            "type": "object",
            "required": ["name", "parameters", "units", "geometry", "grid"],
            "properties": {
                "name": {"type": "string"},
                "parameters": {"type": "array", "items": {"type": "string"}},
                "units": {"type": "array", "items": {"type": "string"}},
                "geometry": {"type": "object"},
                "grid": {"type": "object"},
            },
        },
        "state": {"type": "object", "required": ["kind"]},
        "qfim": {
            "type": "object",
            "required": ["labels", "matrix", "pseudo_inverse"],
            "properties": {
                "labels": {"type": "array", "items": {"type": "string"}},
                "matrix": {"type": "array"},
                "pseudo_inverse": {"type": "array"},
            },
        },
        "bounds": {
            "type": "object",
            "required": [
                "repetitions",
                "multiparameter",
                "single_parameter",
                "penalty_ratio",
                "degenerate_parameters",
            ],
        },
        "attainability": {
            "type": "object",
            "required": ["attainable", "commutator_matrix", "pairs"],
        },
        "detection_modes": {
            "type": "object",
            "required": ["labels", "weights", "degenerate"],
        },
        "provenance": {
            "type": "object",
            "required": ["engine_version", "tolerances", "conventions", "grid", "fock_cutoff", "threads"],
        },
    },
}


@dataclass
class RunConfig:
    """Resolved run configuration (file values merged with flag overrides)."""

    family: str
    geometry: dict
    state: dict
    out: Path
    grid_points: int | None = None
    fock_cutoff: int | None = None
    fd_step: float | None = None
    derivative_method: str = "analytic"
    repetitions: int = 1
    threads: int = 0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        raw: dict = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config: file '{path}' not found")
            try:
                raw = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON ({exc})") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config: top level must be a JSON object")

        def pick(flag, key, default=None):
            value = getattr(args, flag, None)
            return value if value is not None else raw.get(key, default)

        family = pick("family", "family")
        if not family:
            raise ConfigError("family: required (flag --family or config key)")
        if family not in FAMILY_REGISTRY:
            known = ", ".join(sorted(FAMILY_REGISTRY))
            raise ConfigError(f"family: unknown '{family}'; known families: {known}")

        state = raw.get("state", {})
        if getattr(args, "state", None) is not None:
            try:
                state = json.loads(args.state)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"state: invalid JSON ({exc})") from exc
        if not isinstance(state, dict):
            raise ConfigError("state: must be an object")
        if "kind" not in state:
            raise ConfigError('state: required object with a "kind" field')
        if state["kind"] not in _STATE_KINDS:
            raise ConfigError(
                f"state.kind: unknown '{state['kind']}'; supported: "
                + ", ".join(_STATE_KINDS)
            )

        geometry = raw.get("geometry", {})
        if getattr(args, "geometry", None) is not None:
            try:
                geometry = json.loads(args.geometry)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"geometry: invalid JSON ({exc})") from exc
        if not isinstance(geometry, dict):
            raise ConfigError("geometry: must be an object")
        schema = FAMILY_REGISTRY[family]["geometry"]
        for key in schema:
            if key not in geometry:
                raise ConfigError(f"geometry.{key}: required for family '{family}'")
            try:
                value = float(geometry[key])
            except (TypeError, ValueError):
                raise ConfigError(f"geometry.{key}: must be a number")
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"geometry.{key}: must be finite and positive")

        out = pick("out", "out", "qcrb-report")
        grid_points = pick("grid_points", "grid_points")
        if grid_points is not None:
            grid_points = int(grid_points)
            if grid_points < 8:
                raise ConfigError("grid_points: must be at least 8")
        fock_cutoff = pick("fock_cutoff", "fock_cutoff")
        if fock_cutoff is not None:
            fock_cutoff = int(fock_cutoff)
            if fock_cutoff < 1:
                raise ConfigError("fock_cutoff: must be at least 1")
        fd_step = pick("fd_step", "fd_step")
        if fd_step is not None:
            fd_step = float(fd_step)
            if not np.isfinite(fd_step) or fd_step <= 0:
                raise ConfigError("fd_step: must be finite and positive")
        method = raw.get("derivative_method", "analytic")
        if fd_step is not None:
            method = "finite-difference"
        if method not in ("analytic", "finite-difference"):
            raise ConfigError("derivative_method: 'analytic' or 'finite-difference'")
        repetitions = int(pick("repetitions", "repetitions", 1))
        if repetitions < 1:
            raise ConfigError("repetitions: must be at least 1")

        threads_env = os.environ.get("MODAL_QCRB_THREADS", "0")
        try:
            threads = int(threads_env)
        except ValueError:
            raise ConfigError("MODAL_QCRB_THREADS: must be an integer")
        if threads < 0:
            raise ConfigError("MODAL_QCRB_THREADS: must be non-negative")

        return cls(
            family=family,
            geometry=dict(geometry),
            state=dict(state),
            out=Path(out),
            grid_points=grid_points,
            fock_cutoff=fock_cutoff,
            fd_step=fd_step,
            derivative_method=method,
            repetitions=repetitions,
            threads=threads,
        )


# ---------------------------------------------------------------------------
# Serialization helpers


def _fmt(value: float) -> str:
    """17 significant digits: lossless double round-trip, locale-free."""
    return f"{value:.17g}"


def _matrix_rows(matrix: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.atleast_2d(matrix)]


def _vector(values) -> list:
    return [None if (isinstance(v, float) and not np.isfinite(v)) else float(v) for v in np.atleast_1d(values)]


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_matrix_csv(path: Path, labels, matrix: np.ndarray) -> None:
    lines = [",".join(labels)]
    for row in np.atleast_2d(matrix):
        lines.append(",".join(_fmt(float(v)) for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


@dataclass
class ReportBundle:
    """All artifacts of one run, serializable losslessly to JSON."""

    report: dict

    def to_json(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=False, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ReportBundle":
        return cls(report=json.loads(text))


# ---------------------------------------------------------------------------
# Pipeline


def _build_case(config: RunConfig):
    grid_options = {}
    if config.grid_points is not None:
        grid_options["points"] = config.grid_points
    family = build_family(config.family, config.geometry, **grid_options)
    state = state_from_spec(config.state, cutoff=config.fock_cutoff)
    return family, state


def _assemble_report(config: RunConfig) -> tuple[ReportBundle, "np.ndarray", tuple]:
    family, state = _build_case(config)
    method = config.derivative_method
    step = config.fd_step

    generators = build_generators(family, method=method, step=step)
    qfim = qfim_mode_split(state, family, method=method, step=step)
    att = attainability(state, generators)
    single = attainability_single_mode(family, method=method, step=step)
    weights = generators.total_weights()
    report = crb_bounds(
        qfim,
        config.repetitions,
        family.parameters,
        attainability_result=att,
        single_mode_result=single,
        weights=weights,
    )

    labels = list(family.parameters)
    pairs = []
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            pairs.append(
                {
                    "param_a": labels[a],
                    "param_b": labels[b],
                    "im_overlap": float(single.imaginary_overlaps[a, b]),
                    "normalized_im_overlap": float(single.normalized[a, b]),
                    "commutator_expectation": float(att.matrix[a, b]),
                    "attainable": bool(att.pair_attainable[a, b]),
                }
            )

    grid_meta = {
        "shape": list(family.grid.shape),
        "axis_ranges": [[float(ax[0]), float(ax[-1])] for ax in family.grid.axes],
    }
    degenerate_flags = [bool(w == 0.0) for w in weights]
    doc = {
        "family": {
            "name": family.name,
            "parameters": labels,
            "units": list(family.units),
            "geometry": {k: float(v) for k, v in config.geometry.items()},
            "grid": grid_meta,
        },
        "state": dict(config.state) | {"fock_cutoff": int(state.space.cutoff)},
        "qfim": {
            "labels": labels,
            "matrix": _matrix_rows(report.qfim),
            "pseudo_inverse": _matrix_rows(report.pseudo_inverse),
        },
        "bounds": {
            "repetitions": report.repetitions,
            "multiparameter": _vector(report.multiparameter_bounds),
            "single_parameter": _vector(report.single_parameter_bounds),
            "penalty_ratio": _vector(report.penalty_ratios),
            "degenerate_parameters": list(report.degenerate_parameters),
        },
        "attainability": {
            "attainable": att.attainable,
            "commutator_matrix": _matrix_rows(att.matrix),
            "real_residual": float(att.real_residual),
            "pairs": pairs,
            "single_mode": {
                "imaginary_overlaps": _matrix_rows(single.imaginary_overlaps),
                "normalized": _matrix_rows(single.normalized),
            },
        },
        "detection_modes": {
            "labels": labels,
            "weights": _vector(weights),
            "degenerate": degenerate_flags,
        },
        "provenance": {
            "engine_version": __version__,
            "tolerances": tolerances.as_dict(),
            "conventions": dict(_CONVENTIONS),
            "grid": grid_meta,
            "fock_cutoff": int(state.space.cutoff),
            "derivative_method": method,
            "fd_step": step,
            "threads": config.threads,
        },
    }
    return ReportBundle(report=doc), report.qfim, (report, att, single, family)


def run_qfim(config: RunConfig) -> ReportBundle:
    """Compute the information matrix and write report.json plus CSVs."""
    bundle, qfim, extras = _assemble_report(config)
    report = extras[0]
    labels = bundle.report["qfim"]["labels"]
    out = config.out
    _write_atomic(out / "report.json", bundle.to_json() + "\n")
    _write_matrix_csv(out / "qfim.csv", labels, qfim)
    _write_matrix_csv(out / "qfim_inverse.csv", labels, report.pseudo_inverse)
    return bundle


def run_attainability(config: RunConfig) -> ReportBundle:
    """Write the per-pair attainability table."""
    bundle, _, _ = _assemble_report(config)
    rows = [
        "param_a,param_b,Im_overlap,normalized_Im_overlap,commutator_expectation,attainable_flag"
    ]
    for pair in bundle.report["attainability"]["pairs"]:
        rows.append(
            ",".join(
                [
                    pair["param_a"],
                    pair["param_b"],
                    _fmt(pair["im_overlap"]),
                    _fmt(pair["normalized_im_overlap"]),
                    _fmt(pair["commutator_expectation"]),
                    str(pair["attainable"]).lower(),
                ]
            )
        )
    _write_atomic(config.out / "attainability.csv", "\n".join(rows) + "\n")
    return bundle


def export_detection_modes(config: RunConfig) -> ReportBundle:
    """Write per-parameter detection-mode samples and the readout basis."""
    family, _ = _build_case(config)
    return export_detection_modes_for(
        family,
        config.out,
        method=config.derivative_method,
        step=config.fd_step,
    )


def export_detection_modes_for(family, out: Path, *, method="analytic", step=None) -> ReportBundle:
    detections = detection_modes_for(family, method=method, step=step)
    live = [d for d in detections if not d.degenerate]
    gs = None
    if live:
        gs = gram_schmidt([d.mode for d in live], on_dependent="drop")

    # map each live detection mode to its readout-basis row, if kept
    readout_samples: dict[str, np.ndarray] = {}
    pivot_by_label: dict[str, float] = {}
    dependent_labels: list[str] = []
    if gs is not None:
        kept = [i for i in range(len(live)) if i not in gs.dependent_indices]
        for row, idx in enumerate(kept):
            readout_samples[live[idx].label] = gs.basis.modes[row].samples
        for i in gs.dependent_indices:
            dependent_labels.append(live[i].label)
        for i, det in enumerate(live):
            pivot_by_label[det.label] = float(gs.pivot_norms[i])

    coords = family.grid.mesh()
    coord_names = ["x", "y"] if family.grid.ndim == 2 else ["omega"]
    flat_coords = [c.ravel() for c in coords]

    for det in detections:
        header = coord_names + ["detection_re", "detection_im", "readout_re", "readout_im"]
        lines = [",".join(header)]
        if not det.degenerate:
            samples = det.mode.samples.ravel()
            readout = readout_samples.get(det.label)
            readout_flat = (
                readout.ravel() if readout is not None else np.zeros_like(samples)
            )
            for i in range(samples.size):
                row = [_fmt(float(c[i])) for c in flat_coords]
                row += [
                    _fmt(samples[i].real),
                    _fmt(samples[i].imag),
                    _fmt(readout_flat[i].real),
                    _fmt(readout_flat[i].imag),
                ]
                lines.append(",".join(row))
        _write_atomic(out / f"modes_{det.label}.csv", "\n".join(lines) + "\n")

    sidecar = {
        "family": family.name,
        "labels": [d.label for d in detections],
        "weights": [float(d.weight) for d in detections],
        "degenerate": [bool(d.degenerate) for d in detections],
        "readout_basis": {
            "kept": sorted(readout_samples),
            "dependent_on_predecessors": dependent_labels,
            "pivot_norms": pivot_by_label,
            "note": "pivot norm sqrt(1 - |overlap|^2) goes to 0 as detection modes "
            "become proportional; dependent modes carry no independent readout",
        },
    }
    bundle = ReportBundle(report=sidecar)
    _write_atomic(out / "detection_modes.json", bundle.to_json() + "\n")
    return bundle


# ---------------------------------------------------------------------------
# Entry point


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--family", help="family name (overrides config)")
    parser.add_argument("--geometry", help='geometry JSON, e.g. {"w0":1.0,"k":10.0}')
    parser.add_argument("--state", help='state spec JSON, e.g. {"kind":"thermal","nbar":1.0}')
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--grid-points", dest="grid_points", type=int, help="grid points per axis")
    parser.add_argument("--fock-cutoff", dest="fock_cutoff", type=int, help="per-mode photon cutoff")
    parser.add_argument(
        "--fd-step",
        dest="fd_step",
        type=float,
        help="finite-difference step (selects the finite-difference derivative path)",
    )
    parser.add_argument("--repetitions", type=int, help="measurement repetitions M")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modal-qcrb",
        description="Information matrices and Cramer-Rao bounds for mode-encoded parameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("qfim", "compute the information matrix and bounds"),
        ("attainability", "compute the per-pair attainability table"),
        ("detection-modes", "export detection-mode samples and the readout basis"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_run_flags(p)
    sub.add_parser("list-families", help="print the family registry")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-families":
        listing = {
            name: {k: v for k, v in entry.items() if k != "build"}
            for name, entry in sorted(FAMILY_REGISTRY.items())
        }
        print(json.dumps(listing, indent=2))
        return 0
    try:
        config = RunConfig.from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "qfim":
            run_qfim(config)
        elif args.command == "attainability":
            run_attainability(config)
        else:
            export_detection_modes(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModalQcrbError as exc:
        print(f"{args.command} failed in {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
