"""Experiment orchestration: configs, sample files, checks, reports.

The command line is a thin wrapper over this module; everything here is
callable from Python directly. A run decomposes one function (a catalog
case or a raw sample file), sweeps a list of rank vectors, evaluates the
requested checks and optionally writes a machine-readable report plus a
spectrum table.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np

from .cases import get_case, sample_case
from .diagnostics import h1_convergence_flag, rate_fit
from .discretization import GridFunction, make_axis
from .errors import ConfigError, DegenerateDataError, SampleFileError
from .sobolev import derivative_data, norm_ek, norm_h1, norm_l2, retained_count
from .svd_engine import mode_svd, numerical_rank
from .tensor_core import mode_product
from .truncation import h1_identity, h1_sandwich, hosvd_project, truncate_svd

CHECK_NAMES = (
    "eckart_young",
    "h1_identity",
    "ek_identity",
    "hosvd_bound",
    "quasi_opt",
    "sandwich",
    "derivative_bound",
    "diagnostics",
)

DEFAULT_TOLERANCES = {
    "eckart_young": 1e-10,
    "h1_identity": 1e-9,
    "ek_identity": 1e-9,
    "hosvd_bound": 1e-10,
    "quasi_opt": 1e-10,
    "sandwich": 1e-9,
    "derivative_bound": 1e-10,
}

_TINY = 1e-300  # guards divisions for the all-zero input


def _load_schema(name: str) -> dict:
    text = resources.files("sobosvd").joinpath("schemas", name).read_text("utf-8")
    return json.loads(text)


CONFIG_SCHEMA = _load_schema("config.schema.json")
REPORT_SCHEMA = _load_schema("report.schema.json")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one run.

    Exactly one of ``case_name``/``sample_file`` is set. ``rank_vectors``
    holds explicit vectors when the config gave them; otherwise
    ``rank_sweep`` (or, with both unset, a default sweep) is resolved
    against the function's dimension when the run starts.
    """

    case_name: str | None = None
    case_params: dict | None = None
    sample_file: Path | None = None
    grid_sizes: tuple[int, ...] | None = None
    rank_vectors: tuple[tuple[int, ...], ...] | None = None
    rank_sweep: dict | None = None
    checks: tuple[str, ...] = CHECK_NAMES
    tolerances: dict | None = None
    output: Path | None = None

    def tolerance(self, name: str) -> float:
        merged = dict(DEFAULT_TOLERANCES)
        if self.tolerances:
            merged.update(self.tolerances)
        return merged[name]

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | str = ".") -> "ExperimentConfig":
        base = Path(base_dir)
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            where = "/".join(str(p) for p in err.absolute_path) or "top level"
            raise ConfigError(f"config invalid at {where}: {err.message}")

        fn = data["function"]
        tolerances = data.get("tolerances")
        if tolerances:
            unknown = sorted(set(tolerances) - set(DEFAULT_TOLERANCES))
            if unknown:
                raise ConfigError(
                    f"unknown tolerance keys {unknown}; valid: "
                    f"{sorted(DEFAULT_TOLERANCES)}"
                )

        checks = data.get("checks")
        if checks is None:
            checks = CHECK_NAMES
        else:
            checks = tuple(n for n in CHECK_NAMES if n in set(checks))

        ranks = data.get("ranks")
        explicit = sweep = None
        if ranks and "explicit" in ranks:
            explicit = tuple(tuple(int(r) for r in rv) for rv in ranks["explicit"])
        elif ranks:
            sweep = dict(ranks["sweep"])

        grid = data.get("grid")
        return cls(
            case_name=fn.get("case"),
            case_params=fn.get("params"),
            sample_file=(base / fn["file"]) if "file" in fn else None,
            grid_sizes=tuple(int(n) for n in grid["n"]) if grid else None,
            rank_vectors=explicit,
            rank_sweep=sweep,
            checks=checks,
            tolerances=dict(tolerances) if tolerances else None,
            output=(base / data["output"]) if "output" in data else None,
        )

    @classmethod
    def from_file(cls, path: Path | str) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {p} must hold a JSON object")
        return cls.from_dict(data, base_dir=p.parent)


# ---------------------------------------------------------------------------
# raw sample files

_SAMPLE_FORMAT = "sobosvd-raw-1"


def save_samples(u: GridFunction, path: Path | str) -> Path:
    """Write grid samples as little-endian float64 in colexicographic
    order, with a JSON sidecar describing shape and axis intervals."""
    p = Path(path)
    meta = {
        "format": _SAMPLE_FORMAT,
        "dtype": "<f8",
        "order": "colex",
        "shape": list(u.shape),
        "axes": [{"lower": ax.lower, "upper": ax.upper} for ax in u.axes],
    }
    payload = np.ascontiguousarray(u.values.ravel(order="F"), dtype="<f8")
    _atomic_write_bytes(p, payload.tobytes())
    _atomic_write_text(
        Path(str(p) + ".meta.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    return p


def load_samples(path: Path | str, shape=None) -> GridFunction:
    """Read a raw sample file written by :func:`save_samples`.

    ``shape`` cross-checks the sidecar when given. The byte content of a
    save/load round trip is preserved exactly.
    """
    p = Path(path)
    meta_p = Path(str(p) + ".meta.json")
    try:
        meta = json.loads(meta_p.read_text("utf-8"))
    except OSError as exc:
        raise SampleFileError(f"cannot read sample sidecar {meta_p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SampleFileError(f"sample sidecar {meta_p} is not valid JSON: {exc}") from exc

    if not isinstance(meta, dict) or meta.get("format") != _SAMPLE_FORMAT:
        raise SampleFileError(f"{meta_p}: unrecognized sample format")
    if meta.get("dtype") != "<f8" or meta.get("order") != "colex":
        raise SampleFileError(f"{meta_p}: unsupported dtype or ordering")
    file_shape = tuple(int(n) for n in meta.get("shape", ()))
    axes_meta = meta.get("axes", ())
    if len(file_shape) != len(axes_meta) or not file_shape:
        raise SampleFileError(f"{meta_p}: shape and axes entries disagree")
    if shape is not None and tuple(shape) != file_shape:
        raise SampleFileError(
            f"{p}: expected shape {tuple(shape)}, sidecar says {file_shape}"
        )

    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise SampleFileError(f"cannot read samples {p}: {exc}") from exc
    expected = int(np.prod(file_shape)) * 8
    if len(raw) != expected:
        raise SampleFileError(
            f"{p}: {len(raw)} bytes on disk, shape {file_shape} needs {expected}"
        )
    values = np.frombuffer(raw, dtype="<f8").reshape(file_shape, order="F").copy()

    try:
        axes = tuple(
            make_axis(n, float(a["lower"]), float(a["upper"]))
            for n, a in zip(file_shape, axes_meta)
        )
        return GridFunction(axes, values)
    except (KeyError, TypeError) as exc:
        raise SampleFileError(f"{meta_p}: malformed axis entry: {exc}") from exc
    except ValueError as exc:
        raise SampleFileError(f"{p}: {exc}") from exc


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# run plumbing


def _build_function(config: ExperimentConfig):
    if config.case_name is not None:
        case = get_case(config.case_name, **(config.case_params or {}))
        if config.grid_sizes is None:
            raise ConfigError("grid sizes are required for a catalog case")
        sizes = config.grid_sizes
        if len(sizes) == 1:
            sizes = sizes * case.dim
        if len(sizes) != case.dim:
            raise ConfigError(
                f"grid lists {len(sizes)} sizes but case {case.name} has "
                f"{case.dim} dimensions"
            )
        u = sample_case(case, sizes)
        desc = {
            "case": case.name,
            "params": _jsonable(case.params),
            "summary": case.summary,
        }
        return u, desc

    u = load_samples(config.sample_file)
    if config.grid_sizes is not None:
        sizes = config.grid_sizes
        if len(sizes) == 1:
            sizes = sizes * u.ndim
        if tuple(sizes) != u.shape:
            raise ConfigError(
                f"config grid {tuple(sizes)} does not match sample file "
                f"shape {u.shape}"
            )
    return u, {"file": str(config.sample_file)}


def _broadcast(value, dim: int, what: str) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,) * dim
    out = tuple(int(v) for v in value)
    if len(out) != dim:
        raise ConfigError(f"ranks.sweep.{what} lists {len(out)} entries for {dim} modes")
    return out


def _resolve_ranks(config: ExperimentConfig, u: GridFunction):
    d = u.ndim
    if config.rank_vectors is not None:
        vectors = config.rank_vectors
    elif config.rank_sweep is not None:
        lo = _broadcast(config.rank_sweep["from"], d, "from")
        hi = _broadcast(config.rank_sweep["to"], d, "to")
        step = _broadcast(config.rank_sweep.get("step", 1), d, "step")
        if any(s < 1 for s in step):
            raise ConfigError("ranks.sweep.step entries must be >= 1")
        if any(h < l for l, h in zip(lo, hi)):
            raise ConfigError("ranks.sweep.to must not be below ranks.sweep.from")
        count = min((h - l) // s for l, h, s in zip(lo, hi, step)) + 1
        vectors = tuple(
            tuple(l + t * s for l, s in zip(lo, step)) for t in range(count)
        )
    else:
        top = min(8, min(u.shape))
        vectors = tuple((r,) * d for r in range(1, top + 1))

    for rv in vectors:
        if len(rv) != d:
            raise ConfigError(f"rank vector {list(rv)} has {len(rv)} entries, grid has {d}")
        for j, r in enumerate(rv):
            if r < 0:
                raise ConfigError(f"rank vector {list(rv)}: negative rank in mode {j + 1}")
            if r > u.shape[j]:
                raise ConfigError(
                    f"rank {r} exceeds the {u.shape[j]} grid points of mode {j + 1}"
                )
    return vectors


def _single_mode_projection(u, system, r: int) -> GridFunction:
    q = system.left_vectors[:, :r]
    w = u.axes[system.mode].quad_weights
    p = q @ ((q * w[:, None]).T)
    return GridFunction(u.axes, mode_product(u.values, p, system.mode))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


# ---------------------------------------------------------------------------
# individual checks


def _check_eckart_young(u, systems, rvs, tol):
    scale = max(norm_l2(u) ** 2, _TINY)
    worst = 0.0
    for rv in rvs:
        for j, system in enumerate(systems):
            r = min(rv[j], system.k_max)
            proj = _single_mode_projection(u, system, r)
            measured = norm_l2(u - proj) ** 2
            predicted = float(np.sum(system.sigmas[r:] ** 2))
            worst = max(worst, abs(measured - predicted) / scale)
    detail = (
        f"worst relative gap {worst:.3e} between measured single-mode "
        f"truncation error and the spectral tail"
    )
    return ("pass" if worst <= tol else "fail"), worst, detail


def _check_h1_identity(u, systems, derivs, rvs, tol):
    scale = max(norm_h1(u) ** 2, _TINY)
    worst = 0.0
    for rv in rvs:
        r = min(min(rv), systems[0].k_max)
        ur = truncate_svd(systems[0], r)
        ident = h1_identity(systems[0], derivs[0], derivs[1], r)
        worst = max(worst, abs(norm_h1(ur) ** 2 - ident.norm_sq) / scale)
        worst = max(worst, abs(norm_h1(u - ur) ** 2 - ident.error_sq) / scale)
    detail = f"worst relative defect {worst:.3e} in the two-sided Sobolev series"
    return ("pass" if worst <= tol else "fail"), worst, detail


def _check_ek_identity(u, systems, derivs, rvs, tol):
    worst = 0.0
    for j, system in enumerate(systems):
        scale = max(norm_ek(u, j) ** 2, _TINY)
        sig_sq = system.sigmas**2
        dpsi = np.zeros(system.k_max)
        m = min(derivs[j].count, system.k_max)
        dpsi[:m] = derivs[j].dpsi_norms[:m]
        terms = sig_sq * (1.0 + dpsi**2)
        for rv in rvs:
            r = min(rv[j], system.k_max)
            proj = _single_mode_projection(u, system, r)
            worst = max(
                worst, abs(norm_ek(proj, j) ** 2 - float(np.sum(terms[:r]))) / scale
            )
            worst = max(
                worst,
                abs(norm_ek(u - proj, j) ** 2 - float(np.sum(terms[r:]))) / scale,
            )
    detail = f"worst relative defect {worst:.3e} in the one-direction series"
    return ("pass" if worst <= tol else "fail"), worst, detail


def _check_hosvd_bound(u, reports, tol):
    scale = max(norm_l2(u) ** 2, _TINY)
    worst = max(
        (rep.residual_l2**2 - rep.l2_tail_sq_sum) / scale for rep in reports
    )
    detail = f"worst normalized excess {worst:.3e} over the spectral tail sum"
    return ("pass" if worst <= tol else "fail"), worst, detail


def _check_quasi_opt(u, reports, tol):
    scale = max(norm_l2(u) ** 2, _TINY)
    worst = max(
        (rep.residual_l2**2 - rep.quasi_opt_reference) / scale for rep in reports
    )
    detail = (
        f"worst normalized excess {worst:.3e} over d times the refined "
        f"reference error"
    )
    return ("pass" if worst <= tol else "fail"), worst, detail


def _check_sandwich(u, reports, tol):
    scale = max(norm_h1(u) ** 2, _TINY)
    worst = -np.inf
    for rep in reports:
        for lower, value, upper in (
            (rep.norm_lower, rep.approx_h1_sq, rep.norm_upper),
            (rep.h1_lower, rep.residual_h1**2, rep.h1_upper),
        ):
            worst = max(worst, (lower - value) / scale, (value - upper) / scale)
    detail = f"worst normalized bracket violation {worst:.3e}"
    return ("pass" if worst <= tol else "fail"), float(worst), detail


def _check_derivative_bound(derivs, tol):
    worst = -np.inf
    count = 0
    for deriv in derivs:
        for dpsi, bound in zip(deriv.dpsi_norms, deriv.bound_values):
            worst = max(worst, (dpsi - bound) / max(bound, 1.0))
            count += 1
    if count == 0:
        return "pass", 0.0, "no retained directions to bound"
    detail = f"worst normalized excess {worst:.3e} over {count} retained directions"
    return ("pass" if worst <= tol else "fail"), float(worst), detail


def _diagnostics_block(u, reports, rvs):
    ranks_axis = [min(rv) for rv in rvs]
    usable = [i for i, r in enumerate(ranks_axis) if r >= 1]
    l2_scale = max(norm_l2(u), _TINY)
    h1_scale = max(norm_h1(u), _TINY)

    block = {
        "rank_axis": [int(r) for r in ranks_axis],
        "l2_slope": None,
        "l2_r2": None,
        "h1_slope": None,
        "h1_r2": None,
        "flag": None,
    }
    try:
        fit = rate_fit(
            [ranks_axis[i] for i in usable],
            [reports[i].residual_l2 / l2_scale for i in usable],
        )
        block["l2_slope"], block["l2_r2"] = fit.slope, fit.r2
    except DegenerateDataError:
        pass
    try:
        fit = rate_fit(
            [ranks_axis[i] for i in usable],
            [reports[i].residual_h1 / h1_scale for i in usable],
        )
        block["h1_slope"], block["h1_r2"] = fit.slope, fit.r2
    except DegenerateDataError:
        pass

    if u.ndim == 2:
        sums = [rep.h1_norm_sq_series for rep in reports]
    else:
        sums = [float(np.sum(rep.ek_norm_sq_series)) for rep in reports]
    try:
        block["flag"] = h1_convergence_flag(sums)
    except DegenerateDataError:
        pass
    return block


def _edge_case_check(u, systems):
    problems = []
    scale = max(norm_l2(u), _TINY)

    full = tuple(numerical_rank(s) for s in systems)
    resid = norm_l2(u - hosvd_project(u, full, systems=systems).projected)
    if resid > 1e-10 * scale:
        problems.append(f"full-rank projection leaves relative residual {resid / scale:.3e}")

    zero_rank = hosvd_project(u, (0,) * u.ndim, systems=systems).projected
    if norm_l2(zero_rank) != 0.0:
        problems.append("rank-zero projection is not identically zero")
    if abs(norm_l2(u - zero_rank) - norm_l2(u)) > 1e-12 * scale:
        problems.append("rank-zero residual differs from the function norm")

    z = GridFunction(u.axes, np.zeros(u.shape))
    zs = mode_svd(z, 0)
    if numerical_rank(zs) != 0 or retained_count(zs) != 0:
        problems.append("all-zero input reports nonzero rank")

    if problems:
        return "fail", None, "; ".join(problems)
    return "pass", None, "full-rank, rank-zero and zero-input behaviour as expected"


# ---------------------------------------------------------------------------
# the run itself


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    function: GridFunction
    report: dict
    passed: bool
    report_path: Path | None = None
    sigma_path: Path | None = None


def run_experiment(
    config: ExperimentConfig,
    *,
    out_dir: Path | str | None = None,
    edge_cases: bool = False,
    log: Callable[[str], None] | None = None,
) -> ExperimentResult:
    """Run one experiment end to end.

    Raises ConfigError for anything wrong with the description (unknown
    case, rank exceeding the grid, dimension mismatches) and
    SampleFileError for unreadable or inconsistent sample files. Check
    failures never raise; they are recorded in the report and reflected
    in ``passed``.
    """
    u, fdesc = _build_function(config)
    if u.ndim < 2:
        raise ConfigError("the decomposition needs at least two axes")
    rvs = _resolve_ranks(config, u)

    d = u.ndim
    systems = tuple(mode_svd(u, j) for j in range(d))
    derivs = tuple(derivative_data(u, systems[j], j) for j in range(d))

    spectra = []
    for j in range(d):
        spectra.append(
            {
                "mode": j,
                "sigmas": [float(s) for s in systems[j].sigmas],
                "numerical_rank": numerical_rank(systems[j]),
                "retained": derivs[j].count,
                "dpsi_norms": [float(v) for v in derivs[j].dpsi_norms],
                "bound_values": [float(v) for v in derivs[j].bound_values],
            }
        )

    checks_wanted = config.checks
    h1_sq = norm_h1(u) ** 2
    sandwich_slack = config.tolerance("sandwich") * max(1.0, h1_sq)
    want_quasi = "quasi_opt" in checks_wanted
    reports = [
        h1_sandwich(
            u,
            rv,
            systems=systems,
            derivs=derivs,
            hooi_reference=want_quasi,
            slack=sandwich_slack,
        )
        for rv in rvs
    ]

    checks = []

    def record(name, status, worst, detail, tolerance=None):
        checks.append(
            {
                "name": name,
                "status": status,
                "detail": detail,
                "worst": None if worst is None else float(worst),
                "tolerance": tolerance,
            }
        )
        if log is not None:
            log(f"{status.upper():>4}  {name}: {detail}")

    diagnostics = None
    for name in checks_wanted:
        tol = config.tolerance(name) if name in DEFAULT_TOLERANCES else None
        if name == "eckart_young":
            record(name, *_check_eckart_young(u, systems, rvs, tol), tol)
        elif name == "h1_identity":
            if d != 2:
                record(name, "skipped", None, "two-sided series needs d = 2")
            else:
                record(name, *_check_h1_identity(u, systems, derivs, rvs, tol), tol)
        elif name == "ek_identity":
            record(name, *_check_ek_identity(u, systems, derivs, rvs, tol), tol)
        elif name == "hosvd_bound":
            record(name, *_check_hosvd_bound(u, reports, tol), tol)
        elif name == "quasi_opt":
            record(name, *_check_quasi_opt(u, reports, tol), tol)
        elif name == "sandwich":
            record(name, *_check_sandwich(u, reports, tol), tol)
        elif name == "derivative_bound":
            record(name, *_check_derivative_bound(derivs, tol), tol)
        elif name == "diagnostics":
            if len(rvs) < 3:
                record(name, "skipped", None, "rate fits need at least 3 rank vectors")
            else:
                diagnostics = _diagnostics_block(u, reports, rvs)
                parts = []
                if diagnostics["l2_slope"] is not None:
                    parts.append(f"l2 slope {diagnostics['l2_slope']:.3f}")
                if diagnostics["h1_slope"] is not None:
                    parts.append(f"h1 slope {diagnostics['h1_slope']:.3f}")
                parts.append(f"flag {diagnostics['flag'] or 'unavailable'}")
                record(name, "pass", None, ", ".join(parts))

    if edge_cases:
        record("edge_cases", *_edge_case_check(u, systems))

    passed = all(c["status"] != "fail" for c in checks)

    threads = os.environ.get("SOBOSVD_THREADS")
    report = {
        "schema": "sobosvd-report-1",
        "function": fdesc,
        "grid": {
            "n": [int(n) for n in u.shape],
            "scheme": u.axes[0].scheme,
            "domain": [[float(ax.lower), float(ax.upper)] for ax in u.axes],
        },
        "threads": int(threads) if threads and threads.isdigit() else None,
        "ranks": [list(rv) for rv in rvs],
        "spectra": spectra,
        "reports": [_jsonable(rep.to_dict()) for rep in reports],
        "checks": checks,
        "diagnostics": diagnostics,
        "passed": passed,
    }
    jsonschema.Draft202012Validator(REPORT_SCHEMA).validate(report)

    report_path = sigma_path = None
    out = Path(out_dir) if out_dir is not None else config.output
    if out is not None:
        report_path = Path(out) / "report.json"
        sigma_path = Path(out) / "sigma.csv"
        _atomic_write_text(
            report_path, json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
        _atomic_write_text(sigma_path, _sigma_csv(spectra))

    return ExperimentResult(config, u, report, passed, report_path, sigma_path)


def _sigma_csv(spectra) -> str:
    """Spectrum table; modes and directions are 1-based in the file."""
    lines = ["mode,k,sigma,dpsi_norm,bound_value"]
    for entry in spectra:
        retained = entry["retained"]
        for k, sigma in enumerate(entry["sigmas"]):
            if k < retained:
                dpsi = repr(entry["dpsi_norms"][k])
                bound = repr(entry["bound_values"][k])
            else:
                dpsi = bound = ""
            lines.append(f"{entry['mode'] + 1},{k + 1},{repr(sigma)},{dpsi},{bound}")
    return "\n".join(lines) + "\n"
