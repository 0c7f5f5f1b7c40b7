"""Config-driven scenario runner with machine-readable defect reports.

Usage:
    drmoduli verify <config.json> [--fd-step H] [--seed N] [--tol T] [--format F] [--out PATH]
    drmoduli export --what triple --out <path> [--grid lo:hi:step]
    drmoduli list-presets

Config schema (JSON object):
    {"kind": "moduli_triple" | "quasi_check" | "decompose" | "gauge" |
             "fock_rosly" | "reduced_bracket" | "gspace" | "iso21",
     "algebra": "su2" | "iso21" | "abelian:<n>" | {inline definition},
     "seed": int (required with random sampling),
     "samples": int, "grid": {"lo": .., "hi": .., "step": .., "exclude_abs_lt": ..},
     "fd_step": float, "richardson": bool, "tol": float, "out": path}

Exit code 0 iff every check passes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .liealg import algebra_preset, algebra_from_json, quasi_obstruction, cartan_three_tensor
from .group import GroupElement
from .manifold import section_preset, FD_STEP
from .quasipoisson import build_pi_G, build_surface_quasi, quasi_defect, decompose_on_section, fuse
from .drmatrix import (
    cartan_omega,
    compat_defect,
    gdybe_defect,
    gauge_transform,
    h_projector,
    iso21_triple,
    moduli_triple,
    morphism_defect,
)
from .fockrosly import SurfaceScenario, ReducedModuli, fr_bracket
from .gspace import ClassicalDynamicalRMatrix, build_pi_r_gspace, build_sklyanin
from scipy.linalg import expm

__all__ = ["ScenarioConfig", "DefectReport", "run_scenario", "emit_report", "main"]

KINDS = (
    "quasi_check", "decompose", "moduli_triple", "gauge",
    "fock_rosly", "reduced_bracket", "gspace", "iso21",
)

DEFAULT_TOL = {
    "moduli_triple": 1e-8,
    "decompose": 1e-8,
    "quasi_check": 1e-5,
    "gauge": 1e-5,
    "fock_rosly": 1e-5,
    "reduced_bracket": 1e-5,
    "gspace": 1e-5,
    "iso21": 1e-10,
}


class ConfigError(ValueError):
    def __init__(self, pointer: str, msg: str):
        super().__init__(f"config error at {pointer}: {msg}")
        self.pointer = pointer


@dataclass
class ScenarioConfig:
    kind: str
    algebra: object = "su2"
    seed: int = None
    samples: int = 10
    grid: dict = None
    fd_step: float = FD_STEP
    richardson: bool = False
    tol: float = None
    out: str = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("/", "config must be a JSON object")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise ConfigError("/kind", f"must be one of {KINDS}, got {kind!r}")
        known = {"kind", "algebra", "seed", "samples", "grid", "fd_step", "richardson", "tol", "out"}
        extra = {k: v for k, v in doc.items() if k not in known}
        cfg = cls(
            kind=kind,
            algebra=doc.get("algebra", "su2"),
            seed=doc.get("seed"),
            samples=int(doc.get("samples", 10)),
            grid=doc.get("grid"),
            fd_step=float(doc.get("fd_step", FD_STEP)),
            richardson=bool(doc.get("richardson", False)),
            tol=doc.get("tol"),
            out=doc.get("out"),
            extra=extra,
        )
        if cfg.tol is not None and cfg.tol <= 0:
            raise ConfigError("/tol", "tolerances must be positive")
        needs_rng = kind in ("quasi_check", "reduced_bracket", "fock_rosly", "gspace", "gauge")
        if needs_rng and cfg.seed is None:
            raise ConfigError("/seed", f"kind {kind!r} samples randomly; a seed is required")
        return cfg

    def algebra_obj(self):
        if isinstance(self.algebra, str):
            return algebra_preset(self.algebra)
        return algebra_from_json(self.algebra)

    def tolerance(self) -> float:
        return float(self.tol) if self.tol is not None else DEFAULT_TOL[self.kind]

    def grid_values(self, lo=-1.2, hi=1.2, step=0.3, exclude=0.05):
        g = self.grid or {}
        lo = g.get("lo", lo)
        hi = g.get("hi", hi)
        step = g.get("step", step)
        exclude = g.get("exclude_abs_lt", exclude)
        vals = np.arange(lo, hi + step / 2, step)
        return [float(v) for v in vals if abs(v) >= exclude]


@dataclass
class DefectReport:
    scenario: str
    records: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    timestamp: str = ""

    def add(self, name: str, sample, residual: float, tol: float):
        self.records.append(
            {
                "name": name,
                "sample": sample,
                "residual": float(residual),
                "tol": float(tol),
                "pass": bool(residual < tol),
            }
        )

    @property
    def summary(self) -> dict:
        per_check: dict = {}
        for rec in self.records:
            cur = per_check.setdefault(rec["name"], 0.0)
            per_check[rec["name"]] = max(cur, rec["residual"])
        return {
            "max_residual_per_check": per_check,
            "overall_pass": all(r["pass"] for r in self.records),
            "n_records": len(self.records),
        }

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "records": self.records,
            "summary": self.summary,
            "environment": self.environment,
            "timestamp": self.timestamp,
        }


def _sample_repr(x) -> str:
    if isinstance(x, (int, float)):
        return repr(round(float(x), 12))
    if isinstance(x, np.ndarray):
        return np.array2string(x, precision=10, separator=",")
    if isinstance(x, tuple):
        return "(" + ",".join(_sample_repr(e) for e in x) + ")"
    return str(x)


def _rand_matfun(rng, nfac):
    Ws = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(nfac)]

    def f(point):
        entries = [p for p in point if isinstance(p, np.ndarray) and p.ndim == 2]
        v = sum(float(np.real(np.trace(W @ m))) for W, m in zip(Ws, entries))
        chart = [p for p in point if not (isinstance(p, np.ndarray) and p.ndim == 2)]
        for c in chart:
            v += float(np.sum(np.sin(np.atleast_1d(c))))
        return v

    return f


def _rand_su2_pt(rng, alg):
    v = rng.normal(size=3)
    v = v / np.linalg.norm(v) * rng.uniform(0.2, 1.3)
    return expm(alg.matrix(v))


def _rand_class_pt(rng, alg):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return alg.matrix(v)


# ---------------------------------------------------------------------------
# scenario pipelines
# ---------------------------------------------------------------------------

def run_scenario(config: ScenarioConfig) -> DefectReport:
    report = DefectReport(
        scenario=config.kind,
        environment={
            "fd_step": config.fd_step,
            "richardson": config.richardson,
            "seed": config.seed,
            "version": __version__,
            "algebra": config.algebra if isinstance(config.algebra, str) else "inline",
        },
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    tol = config.tolerance()
    runner = {
        "moduli_triple": _run_moduli,
        "decompose": _run_decompose,
        "quasi_check": _run_quasi,
        "gauge": _run_gauge,
        "fock_rosly": _run_fock_rosly,
        "reduced_bracket": _run_reduced,
        "gspace": _run_gspace,
        "iso21": _run_iso21,
    }[config.kind]
    try:
        runner(config, report, tol)
    except Exception as exc:  # degenerate geometry becomes a failed record
        report.add(f"error:{type(exc).__name__}", str(exc), float("inf"), tol)
    return report


def _golden_triple_values(alpha):
    """Reference values of the SU(2) worked example in this convention system:
    theta = d/dalpha (x) e3, pi_U = 0, r = (1/2) tan(alpha) e1^e2.

    The source display quotes r = tan(alpha) e1^e2; its own closed-form
    reduction formula produces the extra 1/2 (see decisions ledger)."""
    th = np.zeros((1, 3)); th[0, 2] = 1.0
    rr = np.zeros((3, 3))
    rr[0, 1] = 0.5 * np.tan(alpha)
    rr[1, 0] = -rr[0, 1]
    return np.zeros((1, 1)), th, rr


def _run_moduli(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    section = section_preset(cfg.extra.get("section", "paper_su2"), alg)
    trip = moduli_triple(section, alg)
    omega = cartan_omega(alg)
    for a in cfg.grid_values():
        piu, th, rr = trip.pi_U([a]), trip.theta([a]), trip.r([a])
        g_piu, g_th, g_r = _golden_triple_values(a)
        report.add("pi_U_zero", a, np.max(np.abs(piu - g_piu)), tol)
        report.add("theta_golden", a, np.max(np.abs(th - g_th)), tol)
        report.add("r_golden", a, np.max(np.abs(rr - g_r)), tol)
        report.add("gdybe", a, gdybe_defect(trip, omega, [a]).norm(), max(tol, 1e-6))
        report.add("compat", a, np.max(np.abs(compat_defect(trip, [a]))), max(tol, 1e-6))
    # H projector against the worked-example display (basepoint [[0,i],[i,0]])
    base = GroupElement(alg.rep[0])
    for a in cfg.grid_values():
        H = h_projector(section, base, [a], alg=alg)
        expect = np.zeros((3, 3))
        expect[:, 1] = [1.0 / np.tan(a), 1.0, 0.0]
        expect[:, 2] = [0.0, 0.0, 1.0]
        report.add("h_projector", a, np.max(np.abs(H - expect)), tol)
        report.add("h_idempotent", a, np.max(np.abs(H @ H - H)), tol)


def _run_decompose(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    section = section_preset(cfg.extra.get("section", "paper_su2"), alg)
    trip = moduli_triple(section, alg)
    space = build_surface_quasi(alg, [GroupElement(section.meta["pinned_base"])] * 2, genus=0)
    for a in cfg.grid_values():
        piu, th, rr = decompose_on_section(space, section, [a])
        report.add("pi_U_match", a, np.max(np.abs(piu - trip.pi_U([a]))), tol)
        report.add("theta_match", a, np.max(np.abs(th - trip.theta([a]))), tol)
        report.add("r_match", a, np.max(np.abs(rr - trip.r([a]))), tol)


def _run_quasi(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    rng = np.random.default_rng(cfg.seed)
    space = build_pi_G(alg)
    for s in range(cfg.samples):
        if alg.name == "su2":
            pt = (_rand_su2_pt(rng, alg),)
        else:
            pt = (expm(alg.matrix(rng.normal(size=alg.dim) * 0.3)),)
        fs = [_rand_matfun(rng, 1) for _ in range(3)]
        d = quasi_defect(space, *fs, pt, step=cfg.fd_step, richardson=cfg.richardson)
        report.add("quasi_defect", s, abs(d), tol)


def _run_gauge(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    section = section_preset("paper_su2", alg)
    trip = moduli_triple(section, alg)
    gm = lambda a: expm(float(a[0]) * alg.rep[0])
    gt = gauge_transform(trip, gm)
    omega = cartan_omega(alg)
    for a in cfg.grid_values():
        report.add("gauge_gdybe", a, gdybe_defect(gt, omega, [a]).norm(), tol)
        report.add("gauge_compat", a, np.max(np.abs(compat_defect(gt, [a]))), tol)
        report.add("gauge_morphism", a, np.max(np.abs(morphism_defect(gt, [a]))), tol)


def _run_fock_rosly(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.extra.get("n", 2))
    sc_k = SurfaceScenario(alg, n=n, genus=int(cfg.extra.get("genus", 0)))
    skew = rng.normal(size=(alg.dim, alg.dim))
    skew = skew - skew.T
    sc_r = SurfaceScenario(alg, n=n, genus=sc_k.genus, r=alg.kappa + skew)
    for s in range(cfg.samples):
        pt = tuple(_rand_class_pt(rng, alg) for _ in range(n + 2 * sc_k.genus))
        Finv = lambda p: float(sum(np.real(np.trace(m)) for m in p))  # conjugation invariant
        H = _rand_matfun(rng, n + 2 * sc_k.genus)
        d = abs(
            fr_bracket(sc_k, Finv, H, pt, h=cfg.fd_step)
            - fr_bracket(sc_r, Finv, H, pt, h=cfg.fd_step)
        )
        report.add("skew_insensitivity", s, d, tol)


def _run_reduced(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.extra.get("n", 3))
    section = section_preset("paper_su2", alg)
    trip = moduli_triple(section, alg)
    sc = SurfaceScenario(alg, n=n, genus=int(cfg.extra.get("genus", 0)))
    red = ReducedModuli(sc, trip)
    nfac = n - 2 + 2 * sc.genus
    for s in range(cfg.samples):
        pt = (np.array([rng.uniform(0.25, 1.1)]),) + tuple(
            _rand_class_pt(rng, alg) for _ in range(nfac)
        )
        fs = [_rand_matfun(rng, nfac + 1) for _ in range(3)]

        def br(u, v):
            return lambda q: red.bracket(u, v, q, h=cfg.fd_step)

        jac = (
            red.bracket(fs[0], br(fs[1], fs[2]), pt, h=cfg.fd_step)
            + red.bracket(fs[1], br(fs[2], fs[0]), pt, h=cfg.fd_step)
            + red.bracket(fs[2], br(fs[0], fs[1]), pt, h=cfg.fd_step)
        )
        report.add("jacobiator", s, abs(jac), tol)


def _run_gspace(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = cfg.algebra_obj()
    rng = np.random.default_rng(cfg.seed)
    cdr = ClassicalDynamicalRMatrix(alg, lambda x: np.zeros((alg.dim, alg.dim)))
    gs = build_pi_r_gspace(cdr, np.zeros((alg.dim, alg.dim)))
    for s in range(cfg.samples):
        pt = (rng.normal(size=alg.dim) * 0.6, _rand_su2_pt(rng, alg))
        fs = [_rand_matfun(rng, 2) for _ in range(3)]

        def br(u, v):
            return lambda q: gs.bracket(u, v, q, h=cfg.fd_step)

        jac = (
            gs.bracket(fs[0], br(fs[1], fs[2]), pt, h=cfg.fd_step)
            + gs.bracket(fs[1], br(fs[2], fs[0]), pt, h=cfg.fd_step)
            + gs.bracket(fs[2], br(fs[0], fs[1]), pt, h=cfg.fd_step)
        )
        report.add("jacobiator", s, abs(jac), tol)


def _run_iso21(cfg: ScenarioConfig, report: DefectReport, tol: float):
    alg = algebra_preset("iso21")
    # constructor invariants are enforced; residuals recomputed for the report
    f, K = alg.f, alg.K
    jac = (
        np.einsum("abd,dce->abce", f, f)
        + np.einsum("bcd,dae->abce", f, f)
        + np.einsum("cad,dbe->abce", f, f)
    )
    report.add("jacobi", "-", float(np.max(np.abs(jac))), tol)
    adinv = np.einsum("abd,dc->abc", f, K) + np.einsum("acd,bd->abc", f, K)
    report.add("ad_invariance", "-", float(np.max(np.abs(adinv))), tol)
    phi = cartan_three_tensor(alg)
    comm = -np.einsum("pb,ct,bcq->pqt", alg.kappa, alg.kappa, f)
    report.add("kappa_identity", "-", float(np.max(np.abs(phi.coeffs - comm))), tol)
    V = np.diag([0.3, -0.2, 0.5])
    zero3 = lambda *_: np.zeros(3)
    trip = iso21_triple(alg, zero3, zero3, zero3, zero3, lambda psi: V)
    c = compat_defect(trip, [0.4, 0.3])
    report.add("template_compat", "-", float(np.max(np.abs(c))), tol)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def emit_report(report: DefectReport, fmt: str = "json", path: str = None) -> str:
    """Serialize the report; returns the text (and writes it when path given).
    json: canonical machine format (sorted keys, timestamp isolated);
    csv: flattened records; md: summary table."""
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True, default=str)
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["name", "sample", "residual", "tol", "pass"])
        for rec in report.records:
            w.writerow([rec["name"], _sample_repr(rec["sample"]), f"{rec['residual']:.12e}",
                        rec["tol"], rec["pass"]])
        text = buf.getvalue()
    elif fmt == "md":
        lines = [f"# scenario {report.scenario}", "", "| check | max residual | pass |", "|---|---|---|"]
        for name, mx in report.summary["max_residual_per_check"].items():
            ok = all(r["pass"] for r in report.records if r["name"] == name)
            lines.append(f"| {name} | {mx:.3e} | {'yes' if ok else 'NO'} |")
        lines.append("")
        lines.append(f"overall: {'PASS' if report.summary['overall_pass'] else 'FAIL'}")
        text = "\n".join(lines)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
    return text


def export_triple_csv(path: str, grid=None) -> str:
    """Plot-ready samples of the SU(2) moduli triple: alpha, r components,
    theta components."""
    alg = algebra_preset("su2")
    section = section_preset("paper_su2", alg)
    trip = moduli_triple(section, alg)
    grid = grid if grid is not None else [a for a in np.arange(-1.2, 1.21, 0.1) if abs(a) > 0.05]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["alpha", "r_12", "r_13", "r_23", "theta_1", "theta_2", "theta_3"])
    for a in grid:
        rr, th = trip.r([a]), trip.theta([a])
        w.writerow([f"{a:.6f}"] + [f"{v:.12e}" for v in (rr[0, 1], rr[0, 2], rr[1, 2],
                                                         th[0, 0], th[0, 1], th[0, 2])])
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    return text


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="drmoduli", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a scenario config and report defects")
    v.add_argument("config", help="path to the scenario JSON")
    v.add_argument("--fd-step", type=float, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--tol", type=float, default=None)
    v.add_argument("--format", default="json", choices=("json", "csv", "md"))
    v.add_argument("--out", default=None)

    e = sub.add_parser("export", help="export sampled triples or brackets")
    e.add_argument("--what", default="triple", choices=("triple",))
    e.add_argument("--out", required=True)
    e.add_argument("--grid", default=None, help="lo:hi:step")

    sub.add_parser("list-presets", help="list shipped algebra and section presets")

    args = ap.parse_args(argv)

    if args.command == "list-presets":
        print("algebras: su2, iso21, abelian:<n>")
        print("sections: paper_su2")
        print("scenario kinds:", ", ".join(KINDS))
        return 0

    if args.command == "export":
        grid = None
        if args.grid:
            lo, hi, step = (float(x) for x in args.grid.split(":"))
            grid = [a for a in np.arange(lo, hi + step / 2, step) if abs(a) > 0.05]
        export_triple_csv(args.out, grid)
        print(f"wrote {args.out}")
        return 0

    with open(args.config) as fh:
        doc = json.load(fh)
    if args.fd_step is not None:
        doc["fd_step"] = args.fd_step
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.tol is not None:
        doc["tol"] = args.tol
    cfg = ScenarioConfig.from_dict(doc)
    report = run_scenario(cfg)
    text = emit_report(report, fmt=args.format, path=args.out or cfg.out)
    print(text)
    return 0 if report.summary["overall_pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
