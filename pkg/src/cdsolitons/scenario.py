"""Scenario files: schema, evaluation and artifact writing.

A scenario is JSON with ``"version": 1``; complex numbers are ``[re, im]``.
"""

import copy
import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import darboux, model, su2, verify

log = logging.getLogger(__name__)

Complex = Tuple[float, float]

MATRIX_CHECKS = ("eom", "zero_curvature", "m_conditions", "reduction")
SCALAR_CHECKS = ("cd_system", "circle_invariant", "sine_gordon")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 1, 2, 3


class ScenarioError(ValueError):
    """Schema or consistency violation (exit status 2)."""


class NumericalFailure(RuntimeError):
    """Evaluation produced nothing usable (exit status 3)."""


def _c(v):
    return complex(v[0], v[1])


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SystemSpec(_Model):
    n: int = Field(ge=1, le=8)
    g_diag: List[Complex]
    k_diag: List[Complex]
    unitary_reduction: bool = False

    def build(self):
        return model.SystemConfig(
            self.n, tuple(_c(v) for v in self.g_diag), tuple(_c(v) for v in self.k_diag), self.unitary_reduction
        )


class PairSpec(_Model):
    lambda_: Complex = Field(alias="lambda")
    e1: Tuple[Complex, Complex]


class StageSpec(_Model):
    lambdas: Optional[List[Complex]] = None
    vectors: Optional[List[List[Complex]]] = None  # vectors[k] is the column e_k
    pair: Optional[PairSpec] = None

    @model_validator(mode="after")
    def _one_form(self):
        explicit = self.lambdas is not None and self.vectors is not None
        if explicit == (self.pair is not None):
            raise ValueError("a stage needs either 'lambdas' and 'vectors', or 'pair'")
        return self

    def build(self):
        if self.pair is not None:
            return model.SpectralStep.su2_pair(_c(self.pair.lambda_), tuple(_c(v) for v in self.pair.e1))
        cols = np.array([[_c(v) for v in col] for col in self.vectors]).T
        return model.SpectralStep(tuple(_c(v) for v in self.lambdas), cols)


class PointSpec(_Model):
    lambda_: Complex = Field(alias="lambda")
    alpha: Complex = (1.0, 0.0)
    beta: Complex = (1.0, 0.0)

    def build(self):
        return su2.ScalarSpectralPoint(_c(self.lambda_), _c(self.alpha), _c(self.beta))


class GridSpec(_Model):
    x0: float
    x1: float
    nx: int = Field(ge=3)
    t0: float
    t1: float
    nt: Optional[int] = Field(default=None, ge=3)  # defaults to nx

    def build(self):
        return verify.Grid(self.x0, self.x1, self.nx, self.t0, self.t1, self.nt or self.nx)


class OutputSpec(_Model):
    csv: str = "fields.csv"
    report: str = "report.json"
    summary: str = "summary.txt"


class Scenario(_Model):
    version: Literal[1]
    name: str = "scenario"
    mode: Literal["matrix", "su2-scalar"]
    system: Optional[SystemSpec] = None
    spectral: List[Union[StageSpec, PointSpec]] = Field(default_factory=list)
    grid: GridSpec
    checks: Optional[List[str]] = None
    lax_lambda: Complex = (0.7, 0.2)
    sign_convention: Literal["oracle", "paper"] = "oracle"
    outputs: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="before")
    @classmethod
    def _typed_spectral(cls, data):
        # pick the spectral entry type from the mode rather than by trial
        if isinstance(data, dict) and isinstance(data.get("spectral"), list):
            kind = StageSpec if data.get("mode") == "matrix" else PointSpec
            data = dict(data)
            data["spectral"] = [kind.model_validate(s) if isinstance(s, dict) else s for s in data["spectral"]]
        return data

    @model_validator(mode="after")
    def _consistent(self):
        allowed = MATRIX_CHECKS if self.mode == "matrix" else SCALAR_CHECKS
        for c in self.checks or ():
            if c not in allowed:
                raise ValueError(f"check {c!r} is not available in {self.mode} mode (choose from {allowed})")
        if self.mode == "matrix" and self.system is None:
            raise ValueError("matrix mode needs a 'system' block")
        if self.mode == "su2-scalar" and self.system is not None:
            cfg = self.system.build()
            ref = model.su2_config()
            if cfg.n != 2 or not np.allclose(cfg.g_diag, ref.g_diag) or not np.allclose(cfg.k_diag, ref.k_diag):
                raise ValueError("su2-scalar mode only supports K = i diag(1,-1), G = -(i/2) diag(1,-1)")
        if self.mode == "matrix":
            n = self.system.n
            for k, s in enumerate(self.spectral):
                if s.pair is not None and n != 2:
                    raise ValueError(f"stage {k}: 'pair' stages need n = 2")
                if s.lambdas is not None and (len(s.lambdas) != n or len(s.vectors) != n or any(len(v) != n for v in s.vectors)):
                    raise ValueError(f"stage {k}: needs {n} eigenvalues and {n} vectors of length {n}")
        return self

    @property
    def selected_checks(self):
        if self.checks is not None:
            return list(self.checks)
        return list(MATRIX_CHECKS if self.mode == "matrix" else SCALAR_CHECKS)


def load_scenario(path):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return raw, parse_scenario(raw)


def parse_scenario(raw):
    try:
        return Scenario.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(str(exc)) from exc


@dataclass
class RunResult:
    scenario: Scenario
    grid: verify.Grid
    reports: list
    header: list
    rows: list
    field_stats: dict
    convergence: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.reports)

    @property
    def exit_code(self):
        return EXIT_OK if self.passed else EXIT_CHECK_FAILED

    def report_dict(self):
        return {
            "scenario": self.scenario.name,
            "mode": self.scenario.mode,
            "sign_convention": self.scenario.sign_convention,
            "grid": {"x0": self.grid.x0, "x1": self.grid.x1, "nx": self.grid.nx,
                     "t0": self.grid.t0, "t1": self.grid.t1, "nt": self.grid.nt},
            "checks": [r.to_dict() for r in self.reports],
            "convergence": self.convergence,
            "field_stats": self.field_stats,
            "passed": self.passed,
        }

    def summary(self):
        lines = [f"scenario {self.scenario.name} ({self.scenario.mode}, {self.grid.nx}x{self.grid.nt} grid)"]
        for r in self.reports:
            lines.append(f"  {r.name:<18} max {r.max_norm:.3e}  tol {r.tolerance:.3e}  masked {r.masked_points:>5}  {r.verdict.upper()}")
            lines.extend(f"    note: {n}" for n in r.notes)
        for name, ratios in self.convergence.items():
            lines.append(f"  {name:<18} refinement ratios " + ", ".join(f"{x:.3f}" for x in ratios))
        for k, v in self.field_stats.items():
            lines.append(f"  {k} = {v!r}")
        lines.extend(f"  note: {n}" for n in self.notes)
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return repr(float(v))


def _fd_checks(pairs, base_grid, refined):
    """Run FD residual checks; tolerances from the coarsest grid when refined.

    ``pairs`` maps a check name to ``(residual_fn, make_fields(grid))``.
    """
    reports, conv = [], {}
    for name, (residual, make) in pairs.items():
        if refined:
            grids = [base_grid.refine(i) for i in range(refined + 1)]
            reps, ratios = verify.convergence_study(residual, make, grids)
            rep = reps[-1]
            rep.name = name
            conv[name] = ratios
            reports.append(rep)
        else:
            reports.append(verify.fd_report(name, residual, make(base_grid)))
    return reports, conv


def _run_scalar(sc, grid, base_grid, refined):
    points = [s.build() for s in sc.spectral]
    if sc.system is not None and sc.system.unitary_reduction:
        for k, p in enumerate(points):
            problems = p.check_reduction()
            if problems:
                raise ScenarioError(f"spectral point {k}: " + "; ".join(problems))
    sol = su2.ScalarSolution(points, sc.sign_convention)

    def fields(g):
        X, T = g.mesh()
        e = sol.evaluate(X, T)
        return e, X, T

    e, X, T = fields(grid)
    if e.pole.all():
        raise NumericalFailure("every grid point is a pole")
    sg = su2.sine_gordon(points, grid)
    checks = sc.selected_checks
    pairs = {}
    if "cd_system" in checks:
        def make_cd(g):
            ee, _, _ = fields(g)
            return verify.FieldGrid(g, ee.q, ee.pole), verify.FieldGrid(g, ee.r, ee.pole)
        pairs["cd_system"] = (verify.cd_residual, make_cd)
    if "sine_gordon" in checks:
        def make_sg(g):
            f = su2.sine_gordon(points, g)
            return (verify.FieldGrid(g, f.phi, f.pole),)
        pairs["sine_gordon"] = (verify.sine_gordon_residual, make_sg)
    reports, conv = _fd_checks(pairs, base_grid, refined)
    if "sine_gordon" in checks:
        notes = verify.check_sine_gordon(verify.FieldGrid(grid, sg.phi, sg.pole), tolerance=np.inf).notes
        for r in reports:
            if r.name == "sine_gordon":
                r.notes = notes
    if "circle_invariant" in checks:
        reports.append(verify.check_circle_invariant(e.qx, e.rx, e.pole, 1e-8, grid.hx, grid.ht))
    order = {c: i for i, c in enumerate(SCALAR_CHECKS)}
    reports.sort(key=lambda r: order[r.name])

    header = ["x", "t", "q", "dq_dx", "r", "phi", "pole"]
    rows = []
    for it in range(grid.nt):
        for ix in range(grid.nx):
            if e.pole[it, ix] or sg.pole[it, ix]:
                rows.append([_fmt(X[it, ix]), _fmt(T[it, ix]), "", "", "", "", "1"])
            else:
                rows.append([_fmt(X[it, ix]), _fmt(T[it, ix]), _fmt(e.q[it, ix].real), _fmt(e.qx[it, ix].real),
                             _fmt(e.r[it, ix].real), _fmt(sg.phi[it, ix].real), "0"])
    good = ~e.pole
    stats = {
        "order": len(points),
        "peak_abs_r": float(np.abs(e.r[good]).max()),
        "min_dq_dx": float(e.qx[good].real.min()),
        "max_dq_dx": float(e.qx[good].real.max()),
        "max_imag_q": float(np.abs(e.q[good].imag).max()),
        "max_imag_r": float(np.abs(e.r[good].imag).max()),
        "r_phi_sign": "r = -(1/2) phi_t" if sc.sign_convention == "oracle" else "r = +(1/2) phi_t",
        "pole_points": int(e.pole.sum()),
    }
    return reports, conv, header, rows, stats


def _run_matrix(sc, grid, base_grid, refined):
    cfg = sc.system.build()
    try:
        seed = model.vacuum_seed(cfg)
    except model.ConfigError as exc:
        raise ScenarioError(f"invalid system: {exc}") from exc
    try:
        stages = [s.build() for s in sc.spectral]
    except ValueError as exc:
        raise ScenarioError(f"invalid stage: {exc}") from exc
    if cfg.unitary_reduction:
        for k, st in enumerate(stages):
            problems = st.check_reduction()
            if problems:
                raise ScenarioError(f"stage {k}: " + "; ".join(problems))
    handle = darboux.SolutionHandle(seed, stages)
    X, T = grid.mesh()
    ev = handle.evaluate(X, T)
    if ev.pole.all():
        raise NumericalFailure("every grid point is a pole")
    lam = _c(sc.lax_lambda)
    checks = sc.selected_checks
    pairs = {}
    if "eom" in checks:
        pairs["eom"] = (model._eom(seed.G), lambda g: (darboux.sample_S(handle, g),))
    if "zero_curvature" in checks:
        pairs["zero_curvature"] = (model.zc_residual, lambda g: darboux.sample_lax(handle, g, lam))
    if "m_conditions" in checks:
        m1, m2 = darboux._m_residuals(seed.G)
        for j in range(len(stages)):
            make = lambda g, j=j: darboux.sample_stage_grids(handle, g, j)
            pairs[f"m1_stage{j}"] = (m1, make)
            pairs[f"m2_stage{j}"] = (m2, make)
    reports, conv = _fd_checks(pairs, base_grid, refined)
    if "reduction" in checks and cfg.unitary_reduction:
        reports.append(verify.check_reduction(handle, grid))

    n = cfg.n
    header = ["x", "t"] + [f"S{i}{j}_{part}" for i in range(n) for j in range(n) for part in ("re", "im")] + ["pole"]
    rows = []
    S = ev.S
    for it in range(grid.nt):
        for ix in range(grid.nx):
            if ev.pole[it, ix]:
                rows.append([_fmt(X[it, ix]), _fmt(T[it, ix])] + [""] * (2 * n * n) + ["1"])
                continue
            vals = []
            for v in S[it, ix].reshape(-1):
                vals += [_fmt(v.real), _fmt(v.imag)]
            rows.append([_fmt(X[it, ix]), _fmt(T[it, ix])] + vals + ["0"])
    good = ~ev.pole
    stats = {
        "order": len(stages),
        "max_abs_S_entry": float(np.abs(S[good]).max()),
        "pole_points": int(ev.pole.sum()),
    }
    if n == 2 and cfg.unitary_reduction:
        q, r = su2.qr_from_matrix(S[good])
        stats["peak_abs_r"] = float(np.abs(r).max())
    return reports, conv, header, rows, stats


def run_scenario(sc, grid_refine=0, sign_convention=None):
    if sign_convention is not None:
        if sc.mode != "su2-scalar":
            raise ScenarioError("--sign-convention only applies to su2-scalar scenarios")
        sc = sc.model_copy(update={"sign_convention": sign_convention})
    if grid_refine < 0:
        raise ScenarioError("grid refinement must be non-negative")
    try:
        base = sc.grid.build()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    grid = base.refine(grid_refine)
    runner = _run_matrix if sc.mode == "matrix" else _run_scalar
    try:
        reports, conv, header, rows, stats = runner(sc, grid, base, grid_refine)
    except (ScenarioError, NumericalFailure):
        raise
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        raise NumericalFailure(f"{type(exc).__name__}: {exc}") from exc
    return RunResult(sc, grid, reports, header, rows, stats, conv)


def write_artifacts(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    o = result.scenario.outputs
    with open(out / o.csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        w.writerows(result.rows)
    (out / o.report).write_text(json.dumps(result.report_dict(), indent=2) + "\n", encoding="utf-8")
    (out / o.summary).write_text(result.summary(), encoding="utf-8")
    return out


# sweeps ---------------------------------------------------------------------


def set_path(raw, path, value):
    """Return a copy of ``raw`` with the scalar at dotted ``path`` replaced."""
    data = copy.deepcopy(raw)
    keys = path.split(".")
    node = data
    try:
        for k in keys[:-1]:
            node = node[int(k)] if isinstance(node, list) else node[k]
        last = int(keys[-1]) if isinstance(node, list) else keys[-1]
        old = node[last]
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ScenarioError(f"parameter path {path!r} does not address a scenario value") from exc
    if isinstance(old, bool) or not isinstance(old, (int, float)):
        raise ScenarioError(f"parameter path {path!r} does not address a number")
    if isinstance(old, int) and float(value).is_integer():
        value = int(value)
    node[last] = value
    return data


def run_sweep(raw, param, values, out_dir, grid_refine=0, sign_convention=None):
    """One run per value into ``out_dir/run_XXX``, plus ``index.json``.

    Returns ``(exit_code, index)``.
    """
    if not values:
        raise ScenarioError("sweep needs at least one value")
    parse_scenario(raw)
    out = Path(out_dir)
    runs = []
    codes = []
    for k, v in enumerate(values):
        sc = parse_scenario(set_path(raw, param, v))
        sub = out / f"run_{k:03d}"
        try:
            res = run_scenario(sc, grid_refine, sign_convention)
        except NumericalFailure as exc:
            codes.append(EXIT_NUMERICAL)
            runs.append({"value": v, "dir": sub.name, "exit_code": EXIT_NUMERICAL, "error": str(exc)})
            continue
        write_artifacts(res, sub)
        codes.append(res.exit_code)
        runs.append({
            "value": v,
            "dir": sub.name,
            "exit_code": res.exit_code,
            "checks": {r.name: r.max_norm for r in res.reports},
            "field_stats": res.field_stats,
        })
    names = sorted({n for r in runs for n in r.get("checks", {})})
    ratios = {}
    for name in names:
        seq = [r["checks"].get(name) for r in runs if "checks" in r]
        ratios[name] = [a / b if b else None for a, b in zip(seq, seq[1:]) if a is not None and b is not None]
    index = {"param": param, "values": list(values), "runs": runs, "ratios": ratios}
    out.mkdir(parents=True, exist_ok=True)
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    if EXIT_NUMERICAL in codes:
        code = EXIT_NUMERICAL
    elif EXIT_CHECK_FAILED in codes:
        code = EXIT_CHECK_FAILED
    else:
        code = EXIT_OK
    return code, index
