"""Run configurations, workflow drivers and flat-file reports.

A run is described by a small YAML document::

    workflow: roundtrip          # forward | invert | roundtrip | boundstates | verify
    lambda_max: 50
    grid_points: 2000            # even, >= 64; 0 is always a grid point
    refine: [1.2]                # optional extra points near these λ
    output_dir: out
    orthogonal: false            # channels independent (n >= 2 inversion)
    tolerances: {alpha_rel: 1.0e-2}
    potential:
      - {alpha: 0.7, kind: exp_decay, a: 1.0}

``invert`` reads a phase table instead (``data: phase.csv``, optional
``real_zeros`` and ``kappas``); a potential, when present, is used as
ground truth.  Every driver writes CSV series, an SVG per series, a
``checks.csv`` table and ``report.txt``, and returns the exit code.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, DataError, ScatteringError
from .forward_scattering import det_identity_residual, resolvent_T, scattering_S, zero_mask
from .inverse_scattering import (ScatteringData, extract_zeta, invert, perron_stieltjes_check,
                                 validate_class)
from .plotting import line_plot
from .spectral_zeros import (boundstate_eigenfunction, find_bound_states, find_real_zeros,
                             rayleigh_quotient, verify_boundstate_tracelaw)
from .transforms import (SeparablePotential, SpectralGrid, from_record, transform_identity_residual,
                         make_grid, sine_W, transform_set)

WORKFLOWS = ("forward", "invert", "roundtrip", "boundstates", "verify")
THREADS_ENV = "SEPSCAT_THREADS"
NORM_TOL = 1e-6
FMT = "%.12e"
EIGEN_X_CAP = 480.0

DEFAULT_TOLERANCES = {
    "identity": 1e-6,          # transform identity, max over |λ| <= 20
    "unimodular": 1e-6,     # ||S| - 1|
    "symmetry": 1e-10,      # |S(-λ) - conj S(λ)|
    "s_far": 0.05,          # |S(Λ) - 1|
    "factorization": 1e-8,  # |det(I+αT) - Πb_k| / (1+|det|)
    "product": 1e-6,        # |S - ΠS_k|
    "orthogonal": 1e-8,     # off-diagonal resolvent entries
    "trace": 1e-4,          # rank-one trace law
    "kernel": 1e-8,         # bound-state secular residual
    "eigen_boundary": 1e-4,  # |e(iκ,0)| / max|e|
    "eigen_tail": 1e-3,     # L² mass of normalized e on the outer half of the x-window
    "rayleigh": 1e-3,       # |RQ + κ²|
    "alpha_rel": 1e-2,
    "wsq_rel": 1e-2,        # relative L² error of |W|² on [0, min(20, Λ)]
    "perron": 1e-4,
}

TOP_KEYS = {"workflow", "lambda_max", "grid_points", "refine", "output_dir", "orthogonal",
            "tolerances", "potential", "data", "real_zeros", "kappas", "x_max", "alt_constants"}


@dataclass
class RunConfig:
    workflow: str = "forward"
    potential: SeparablePotential | None = None
    lambda_max: float = 50.0
    grid_points: int = 2000
    refine: tuple = ()
    output_dir: str = "out"
    orthogonal: bool = False
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    data: str | None = None
    real_zeros: list = field(default_factory=list)
    kappas: list = field(default_factory=list)
    x_max: float = 40.0
    alt_constants: bool = False
    renormalized: list = field(default_factory=list)

    def grid(self):
        return make_grid(self.lambda_max, self.grid_points, self.refine)


# ---------------------------------------------------------------------------
# parsing

def _line(node):
    return node.start_mark.line + 1 if node is not None else None


def _mapping(node):
    """{key: (key_node, value_node)} for a YAML mapping node."""
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("expected a mapping", _line(node))
    out = {}
    for k, v in node.value:
        if k.value in out:
            raise ConfigError(f"duplicate key {k.value!r}", _line(k))
        out[k.value] = (k, v)
    return out


def _scalar(node, kind, name):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{name} must be a scalar", _line(node))
    raw = node.value
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {kind.__name__}", _line(node)) from None


def _float_list(node, name):
    if isinstance(node, yaml.ScalarNode) and node.value in ("", "null", "~"):
        return []
    if not isinstance(node, yaml.SequenceNode):
        raise ConfigError(f"{name} must be a list", _line(node))
    out = []
    for item in node.value:
        if isinstance(item, yaml.SequenceNode):
            out.append(_float_list(item, name))
        else:
            out.append(_scalar(item, float, name))
    return out


def _term(node):
    m = _mapping(node)
    if "alpha" not in m:
        raise ConfigError("potential term needs alpha", _line(node))
    alpha = _scalar(m["alpha"][1], float, "alpha")
    if alpha == 0:
        raise ConfigError("coupling must be nonzero", _line(m["alpha"][1]))
    rec = {}
    for key, (kn, vn) in m.items():
        if key == "alpha":
            continue
        if key == "kind":
            rec[key] = _scalar(vn, str, key)
        elif isinstance(vn, yaml.SequenceNode):
            rec[key] = _float_list(vn, key)
        else:
            rec[key] = _scalar(vn, float, key)
    if "kind" not in rec:
        raise ConfigError("potential term needs kind", _line(node))
    try:
        f = from_record(rec)
    except (DataError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {rec.get('kind')!r} term: {exc}", _line(node)) from None
    return alpha, f


def _normalize(terms, cfg):
    out = []
    for k, (alpha, f) in enumerate(terms):
        nv = f.norm()
        if nv == 0 or not math.isfinite(nv):
            raise ConfigError(f"term {k + 1}: kernel has zero or infinite norm")
        if abs(nv - 1) > NORM_TOL:
            # α⟨·,v⟩v = (α‖v‖²)⟨·,v/‖v‖⟩ v/‖v‖
            warnings.warn(f"term {k + 1}: ‖v‖ = {nv:.6g}; renormalized, α {alpha:.6g} -> {alpha * nv * nv:.6g}")
            cfg.renormalized.append((k, nv))
            out.append((alpha * nv * nv, f.scaled(1 / nv)))
        else:
            out.append((alpha, f))
    return SeparablePotential(out)


def load_config(text) -> RunConfig:
    """Parse and validate a YAML run description."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("empty configuration")
    m = _mapping(root)
    cfg = RunConfig()
    for key, (kn, _) in m.items():
        if key not in TOP_KEYS:
            raise ConfigError(f"unknown key {key!r}", _line(kn))
    if "workflow" in m:
        cfg.workflow = _scalar(m["workflow"][1], str, "workflow")
        if cfg.workflow not in WORKFLOWS:
            raise ConfigError(f"workflow must be one of {', '.join(WORKFLOWS)}", _line(m["workflow"][1]))
    if "lambda_max" in m:
        cfg.lambda_max = _scalar(m["lambda_max"][1], float, "lambda_max")
        if not cfg.lambda_max > 0:
            raise ConfigError("lambda_max must be positive", _line(m["lambda_max"][1]))
    if "grid_points" in m:
        cfg.grid_points = _scalar(m["grid_points"][1], int, "grid_points")
        if cfg.grid_points < 64 or cfg.grid_points % 2:
            raise ConfigError("grid_points must be even and at least 64", _line(m["grid_points"][1]))
    if "refine" in m:
        cfg.refine = tuple(_float_list(m["refine"][1], "refine"))
    if "output_dir" in m:
        cfg.output_dir = _scalar(m["output_dir"][1], str, "output_dir")
    if "orthogonal" in m:
        cfg.orthogonal = _scalar(m["orthogonal"][1], bool, "orthogonal")
    if "alt_constants" in m:
        cfg.alt_constants = _scalar(m["alt_constants"][1], bool, "alt_constants")
    if "x_max" in m:
        cfg.x_max = _scalar(m["x_max"][1], float, "x_max")
    if "data" in m:
        cfg.data = _scalar(m["data"][1], str, "data")
    for key in ("real_zeros", "kappas"):
        if key in m:
            setattr(cfg, key, _float_list(m[key][1], key))
    if "tolerances" in m:
        for key, (kn, vn) in _mapping(m["tolerances"][1]).items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}", _line(kn))
            val = _scalar(vn, float, key)
            if not val > 0:
                raise ConfigError(f"tolerance {key} must be positive", _line(vn))
            cfg.tolerances[key] = val
    if "potential" in m:
        pn = m["potential"][1]
        if not isinstance(pn, yaml.SequenceNode) or not pn.value:
            raise ConfigError("potential must be a non-empty list of terms", _line(pn))
        cfg.potential = _normalize([_term(t) for t in pn.value], cfg)
    elif cfg.workflow != "invert":
        raise ConfigError(f"workflow {cfg.workflow} needs a potential")
    if cfg.workflow == "invert" and not cfg.data:
        raise ConfigError("invert needs a data table (data: phase.csv)")
    return cfg


def parse_tol(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol expects KEY=VAL with KEY in {sorted(DEFAULT_TOLERANCES)}, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"--tol {key}: {val!r} is not a number") from None
    return out


# ---------------------------------------------------------------------------
# reports

@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    @classmethod
    def below(cls, name, value, tol):
        value = float(value)
        return cls(name, value, tol, bool(np.isfinite(value) and value <= tol))


class Report:
    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.checks: list[Check] = []
        self.lines: list[str] = []
        self.files: list[str] = []

    def add(self, check: Check):
        self.checks.append(check)

    def note(self, text):
        self.lines.append(text)

    def csv(self, name, header, columns):
        """Columns of equal length; written with a fixed format for reproducibility."""
        cols = [np.asarray(c, dtype=float).ravel() for c in columns]
        data = np.column_stack(cols) if cols else np.empty((0, 0))
        path = self.dir / name
        np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=FMT)
        self.files.append(name)
        return path

    def svg(self, name, x, series, **kw):
        path = self.dir / name
        line_plot(path, x, series, **kw)
        self.files.append(name)
        return path

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def finish(self):
        rows = [(c.name, c.value, c.tolerance, int(c.passed)) for c in self.checks]
        with open(self.dir / "checks.csv", "w") as fh:
            fh.write("name,value,tolerance,pass\n")
            for name, v, t, p in rows:
                fh.write(f"{name},{FMT % v},{FMT % t},{p}\n")
        with open(self.dir / "report.txt", "w") as fh:
            for line in self.lines:
                fh.write(line + "\n")
            fh.write("\n")
            for c in self.checks:
                tol = "flag" if math.isnan(c.tolerance) else f"tol {c.tolerance:.1e}"
                fh.write(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28s} {c.value:.3e}  ({tol})\n")
            fh.write(f"\n{'all checks passed' if self.ok else 'some checks failed'}\n")
        return 0 if self.ok else 1


# ---------------------------------------------------------------------------
# shared pieces

def _describe(pot):
    return "; ".join(f"α={a:.6g} {f!r}" for a, f in pot.terms)


def _masked_max(v, mask):
    v = np.asarray(v)[~mask]
    return float(np.max(v)) if v.size else 0.0


def forward_checks(rep: Report, pot, ts, prof, tol):
    grid = ts.grid
    lam = grid.points
    near = lam[np.abs(lam) <= 20]
    worst = 0.0
    for fs in pot.funcs:
        for fk in pot.funcs:
            worst = max(worst, transform_identity_residual(fs, fk, near))
    rep.add(Check.below("transform_identity", worst, tol["identity"]))
    fl = prof.flagged
    rep.add(Check.below("unimodular", _masked_max(np.abs(np.abs(prof.S) - 1), fl), tol["unimodular"]))
    sym = np.abs(prof.S[::-1] - np.conj(prof.S))
    rep.add(Check.below("symmetry", _masked_max(sym, fl | fl[::-1]), tol["symmetry"]))
    rep.add(Check.below("S_at_lambda_max", abs(prof.S[-1] - 1), tol["s_far"]))
    prod = np.abs(prof.S - np.prod(prof.Sk, axis=0))
    rep.add(Check.below("S_product", _masked_max(prod, fl), tol["product"]))
    if pot.n > 1:
        rng = np.random.default_rng(20240601)
        zs = rng.uniform(-10, 10, 12) + 1j * rng.choice([-1, 1], 12) * rng.uniform(0.1, 5, 12)
        res = max(det_identity_residual(pot, ts, z) for z in zs)
        rep.add(Check.below("det_factorization", res, tol["factorization"]))


def bound_state_checks(rep: Report, pot, states, tol, write=True):
    for j, bs in enumerate(states, 1):
        rep.add(Check.below(f"kernel_residual_{j}", bs.residual, tol["kernel"]))
        if pot.n == 1:
            rep.add(Check.below(f"trace_law_{j}", verify_boundstate_tracelaw(bs, pot), tol["trace"]))
        # slowly decaying kernels give slowly decaying eigenfunctions; widen the window
        X = max(30.0, 30.0 / bs.kappa)
        while True:
            x = np.linspace(0, X, int(100 * X) + 1)
            e = boundstate_eigenfunction(bs, pot, None, x)
            outer = x >= X / 2
            tail = float(np.trapezoid(np.abs(e[outer]) ** 2, x[outer]))
            if tail <= tol["eigen_tail"] or X >= EIGEN_X_CAP:
                break
            X *= 2
        amax = float(np.max(np.abs(e)))
        rep.add(Check.below(f"eigen_boundary_{j}", abs(e[0]) / amax, tol["eigen_boundary"]))
        rep.add(Check.below(f"eigen_tail_{j}", tail, tol["eigen_tail"]))
        rq = rayleigh_quotient(e, x, pot)
        rep.add(Check.below(f"rayleigh_{j}", abs(rq + bs.kappa ** 2) / max(1.0, bs.kappa ** 2), tol["rayleigh"]))
        if write:
            rep.csv(f"eigenfunction_{j}.csv", ["x", "re_e", "im_e"], [x, e.real, e.imag])
            rep.svg(f"eigenfunction_{j}.svg", x, [("Re e", e.real), ("Im e", e.imag, "--")],
                    xlabel="$x$", title=f"bound state κ = {bs.kappa:.6g}")


def channel_inputs(pot, grid, ts, prof, orthogonal):
    """Per-channel (S_k, real zeros, κ list, B_k⁺) for the inverse problem."""
    if pot.n == 1:
        zs = find_real_zeros(prof, ts).zeros
        ks = [b.kappa for b in find_bound_states(pot)]
        return [(prof.Sk[0], zs, ks, prof.bk[0])]
    if not orthogonal:
        raise ConfigError("channel inversion needs n = 1 or orthogonal: true")
    out = []
    for k, term in enumerate(pot.terms):
        single = SeparablePotential([term])
        ts1 = transform_set(single, grid)
        p1 = scattering_S(ts1, single)
        zs = find_real_zeros(p1, ts1).zeros
        ks = [b.kappa for b in find_bound_states(single)]
        out.append((prof.Sk[k], zs, ks, prof.bk[k]))
    return out


def _orthogonality(pot, ts):
    zs = [0.3 - 0.5j, 2.0 - 1.0j, -1.0 - 0.2j, 10.0 + 3.0j]
    worst = 0.0
    for z in zs:
        T = resolvent_T(ts, z).T
        worst = max(worst, float(np.max(np.abs(T - np.diag(np.diag(T))))))
    return worst


def _rel_l2(a, b, mask):
    den = math.sqrt(float(np.sum(b[mask] ** 2)))
    return math.sqrt(float(np.sum((a[mask] - b[mask]) ** 2))) / den if den > 0 else math.inf


def _write_inversion(rep, k, grid, zeta, res, truth=None, xg=None):
    lam = grid.points
    i0 = grid.zero_index
    cols = [lam, zeta, res.Wabs_sq]
    head = ["lambda", "zeta", "wsq_recovered"]
    series = [("recovered", res.Wabs_sq)]
    if truth is not None:
        cols.append(truth)
        head.append("wsq_true")
        series.append(("true", truth, "--"))
    rep.csv(f"wsq_{k}.csv", head, cols)
    rep.svg(f"wsq_{k}.svg", lam[i0:], [(s[0], s[1][i0:]) + tuple(s[2:]) for s in series],
            ylabel=r"$|W|^2$", title=f"channel {k}")
    rep.svg(f"zeta_{k}.svg", lam, [(r"$\zeta$", zeta)], ylabel=r"$\zeta$")
    x = res.v_candidate.x
    vr = res.v_candidate.v(x)
    vc = [x, vr]
    vh = ["x", "v_recovered"]
    vs = [("recovered", vr)]
    if xg is not None:
        vc.append(xg)
        vh.append("v_true")
        vs.append(("true", xg, "--"))
    rep.csv(f"v_{k}.csv", vh, vc)
    rep.svg(f"v_{k}.svg", x, vs, xlabel="$x$", title=f"kernel candidate, channel {k}")


def _phase_channels(pot, grid, ts, prof, orthogonal):
    chans = channel_inputs(pot, grid, ts, prof, orthogonal)
    zetas = []
    for Sk, zs, ks, _ in chans:
        fl = zero_mask(grid, zs)
        zetas.append(extract_zeta(grid, S=Sk, real_zeros=zs, kappas=ks, flagged=fl))
    return chans, zetas


# ---------------------------------------------------------------------------
# workflows

def run_forward(cfg: RunConfig, out_dir=None):
    rep = Report(out_dir or cfg.output_dir)
    pot = cfg.potential
    grid = cfg.grid()
    rep.note(f"forward  n={pot.n}  {_describe(pot)}")
    rep.note(f"grid  Λ={grid.lambda_max:g}  points={grid.size}")
    ts = transform_set(pot, grid)
    prof = scattering_S(ts, pot)
    zs = find_real_zeros(prof, ts).zeros
    if zs:
        prof = scattering_S(ts, pot, real_zeros=zs)
        rep.note("real zeros  " + ", ".join(f"{z:.10g}" for z in zs))
    states = find_bound_states(pot)
    rep.note(f"bound states  {len(states)}" + "".join(f"\n  κ={b.kappa:.10g}  E={b.energy:.10g}" for b in states))
    lam = grid.points
    S = prof.S
    rep.csv("S.csv", ["lambda", "re_S", "im_S", "abs_S", "flagged"],
            [lam, S.real, S.imag, np.abs(S), prof.flagged])
    cols, head = [lam], ["lambda"]
    for k in range(pot.n):
        cols += [prof.Sk[k].real, prof.Sk[k].imag]
        head += [f"re_S{k + 1}", f"im_S{k + 1}"]
    rep.csv("Sk.csv", head, cols)
    rep.csv("r.csv", ["lambda", "re_r", "im_r"], [lam, prof.r.real, prof.r.imag])
    rep.csv("boundstates.csv", ["kappa", "energy", "residual", "multiplicity"],
            [[b.kappa for b in states], [b.energy for b in states],
             [b.residual for b in states], [b.multiplicity for b in states]])
    rep.svg("S.svg", lam, [("Re S", S.real), ("Im S", S.imag, "--"), ("|S|", np.abs(S), ":")],
            ylabel="$S$")
    forward_checks(rep, pot, ts, prof, cfg.tolerances)
    bound_state_checks(rep, pot, states, cfg.tolerances)
    if pot.n == 1 or cfg.orthogonal:
        chans, zetas = _phase_channels(pot, grid, ts, prof, cfg.orthogonal)
        rep.csv("phase.csv", ["lambda"] + [f"zeta_{k + 1}" for k in range(len(zetas))], [lam] + zetas)
        rep.svg("phase.svg", lam, [(f"channel {k + 1}", z) for k, z in enumerate(zetas)],
                ylabel=r"$\zeta$")
        hint = {"workflow": "invert", "data": "phase.csv",
                "real_zeros": [[float(z) for z in c[1]] for c in chans],
                "kappas": [[float(z) for z in c[2]] for c in chans]}
        with open(rep.dir / "invert.yaml", "w") as fh:
            yaml.safe_dump(hint, fh, sort_keys=True)
    else:
        rep.note("phase table skipped: channels are coupled (set orthogonal: true if they are not)")
    return rep.finish()


def run_boundstates(cfg: RunConfig, out_dir=None):
    rep = Report(out_dir or cfg.output_dir)
    pot = cfg.potential
    rep.note(f"boundstates  n={pot.n}  {_describe(pot)}")
    states = find_bound_states(pot)
    rep.note(f"found {len(states)} (n_- = {pot.n_minus})")
    for b in states:
        rep.note(f"  κ={b.kappa:.10g}  E={b.energy:.10g}  multiplicity={b.multiplicity}")
    rep.add(Check("count_le_n_minus", float(len(states)), float(pot.n_minus),
                  sum(b.multiplicity for b in states) <= pot.n_minus))
    rep.csv("boundstates.csv", ["kappa", "energy", "residual", "multiplicity"],
            [[b.kappa for b in states], [b.energy for b in states],
             [b.residual for b in states], [b.multiplicity for b in states]])
    bound_state_checks(rep, pot, states, cfg.tolerances)
    return rep.finish()


def _invert_channels(rep, cfg, grid, chans_data, truth_pot=None, bks=None):
    tol = cfg.tolerances
    lam = grid.points
    m = (lam >= 0) & (lam <= min(20.0, grid.lambda_max))
    xg = np.linspace(0.0, cfg.x_max, 801)
    rows = []
    for k, (zeta, zs, ks) in enumerate(chans_data, 1):
        data = ScatteringData(grid, zeta, zs, ks)
        cls = validate_class(data)
        for name, r in cls.items():
            if isinstance(r, dict) and not r["approximate"] and name != "edge_decay":
                rep.add(Check(f"class_{name}_{k}", r["value"], math.nan, r["pass"]))
            elif isinstance(r, dict):
                rep.note(f"channel {k} class {name}: {'ok' if r['pass'] else 'fails'} "
                         f"({r['value']:.3e}{', approximate' if r['approximate'] else ''})")
        res = invert(data, xg, cfg.alt_constants)
        rep.note(f"channel {k}  class {data.class_tag}  α = {res.alpha:.10g}")
        truth = vt = None
        row = [k, res.alpha, math.nan, math.nan, math.nan]
        if truth_pot is not None:
            a_true, f = truth_pot.terms[k - 1]
            truth = np.abs(sine_W(f, grid)) ** 2
            vt = f.v(xg)
            ea = abs(res.alpha - a_true) / abs(a_true)
            ew = _rel_l2(res.Wabs_sq, truth, m)
            rep.add(Check.below(f"alpha_rel_{k}", ea, tol["alpha_rel"]))
            rep.add(Check.below(f"wsq_rel_l2_{k}", ew, tol["wsq_rel"]))
            row = [k, res.alpha, a_true, ea, ew]
            if bks is not None:
                ps = perron_stieltjes_check(bks[k - 1], a_true, truth, grid, cfg.alt_constants)
                rep.add(Check.below(f"perron_stieltjes_{k}", ps, tol["perron"]))
        rows.append(row)
        _write_inversion(rep, k, grid, zeta, res, truth, vt)
    rows = np.array(rows, dtype=float)
    rep.csv("recovered.csv", ["channel", "alpha", "alpha_true", "alpha_rel_err", "wsq_rel_l2"], rows.T)


def run_roundtrip(cfg: RunConfig, out_dir=None):
    rep = Report(out_dir or cfg.output_dir)
    pot = cfg.potential
    grid = cfg.grid()
    rep.note(f"roundtrip  n={pot.n}  {_describe(pot)}")
    ts = transform_set(pot, grid)
    prof = scattering_S(ts, pot)
    if pot.n > 1:
        if not cfg.orthogonal:
            raise ConfigError("roundtrip with n > 1 needs orthogonal: true")
        rep.add(Check.below("orthogonality", _orthogonality(pot, ts), cfg.tolerances["orthogonal"]))
    chans, zetas = _phase_channels(pot, grid, ts, prof, cfg.orthogonal)
    for k, c in enumerate(chans, 1):
        rep.note(f"channel {k}: real zeros {list(map(float, c[1]))}, κ {list(map(float, c[2]))}")
    _invert_channels(rep, cfg, grid, [(z, c[1], c[2]) for z, c in zip(zetas, chans)],
                     pot, [c[3] for c in chans])
    return rep.finish()


def read_phase_table(path):
    """(grid, [ζ_k]) from a CSV with columns lambda, zeta_1, ..."""
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read phase table: {exc}") from None
    if header[0] != "lambda" or len(header) < 2:
        raise DataError("phase table needs a 'lambda' column followed by zeta columns")
    lam = arr[:, 0]
    grid = SpectralGrid(lam, float(lam[-1]))
    return grid, [arr[:, j] for j in range(1, arr.shape[1])]


def _per_channel(vals, n, name):
    if not vals:
        return [[] for _ in range(n)]
    if all(isinstance(v, list) for v in vals):
        if len(vals) != n:
            raise ConfigError(f"{name}: one list per channel expected ({n})")
        return vals
    if n != 1:
        raise ConfigError(f"{name}: give one list per channel")
    return [vals]


def run_invert(cfg: RunConfig, out_dir=None, base=None):
    rep = Report(out_dir or cfg.output_dir)
    path = Path(cfg.data)
    if not path.is_absolute() and base is not None:
        path = Path(base) / path
    grid, zetas = read_phase_table(path)
    n = len(zetas)
    zs = _per_channel(cfg.real_zeros, n, "real_zeros")
    ks = _per_channel(cfg.kappas, n, "kappas")
    truth = cfg.potential
    if truth is not None and truth.n != n:
        raise ConfigError(f"ground-truth potential has {truth.n} terms but the table has {n} channels")
    rep.note(f"invert  {n} channel(s) from {path.name}, Λ={grid.lambda_max:g}, points={grid.size}")
    _invert_channels(rep, cfg, grid, list(zip(zetas, zs, ks)), truth)
    return rep.finish()


def run_verify(cfg: RunConfig, out_dir=None):
    rep = Report(out_dir or cfg.output_dir)
    pot = cfg.potential
    grid = cfg.grid()
    rep.note(f"verify  n={pot.n}  {_describe(pot)}")
    ts = transform_set(pot, grid)
    prof = scattering_S(ts, pot)
    zs = find_real_zeros(prof, ts).zeros
    if zs:
        prof = scattering_S(ts, pot, real_zeros=zs)
    forward_checks(rep, pot, ts, prof, cfg.tolerances)
    states = find_bound_states(pot)
    rep.add(Check("count_le_n_minus", float(len(states)), float(pot.n_minus),
                  sum(b.multiplicity for b in states) <= pot.n_minus))
    bound_state_checks(rep, pot, states, cfg.tolerances, write=False)
    if pot.n > 1 and cfg.orthogonal:
        rep.add(Check.below("orthogonality", _orthogonality(pot, ts), cfg.tolerances["orthogonal"]))
    return rep.finish()


RUNNERS = {"forward": run_forward, "invert": run_invert, "roundtrip": run_roundtrip,
           "boundstates": run_boundstates, "verify": run_verify}


# ---------------------------------------------------------------------------
# command line

def build_parser():
    p = argparse.ArgumentParser(prog="sepscat",
                                description="Forward and inverse scattering for -y'' plus a separable potential.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in WORKFLOWS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        s.add_argument("--tol", action="append", metavar="KEY=VAL", default=[])
        s.add_argument("--grid-points", type=int, metavar="N")
        s.add_argument("--lambda-max", type=float, metavar="X")
    return p


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv=None):
    """Exit codes: 0 all checks pass, 1 a check failed, 2 bad input, 3 computation error."""
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = load_config(text)
        cfg.workflow = args.command
        if cfg.workflow == "invert" and not cfg.data:
            raise ConfigError("invert needs a data table (data: phase.csv)")
        if cfg.workflow != "invert" and cfg.potential is None:
            raise ConfigError(f"workflow {cfg.workflow} needs a potential")
        cfg.tolerances.update(parse_tol(args.tol))
        if args.grid_points is not None:
            if args.grid_points < 64 or args.grid_points % 2:
                raise ConfigError("--grid-points must be even and at least 64")
            cfg.grid_points = args.grid_points
        if args.lambda_max is not None:
            if not args.lambda_max > 0:
                raise ConfigError("--lambda-max must be positive")
            cfg.lambda_max = args.lambda_max
        nthreads = _threads()
    except (ConfigError, OSError) as exc:
        print(f"sepscat: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.output_dir
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=nthreads):
            if cfg.workflow == "invert":
                code = run_invert(cfg, out, base=Path(args.config).parent)
            else:
                code = RUNNERS[cfg.workflow](cfg, out)
    except ConfigError as exc:
        print(f"sepscat: {exc}", file=sys.stderr)
        return 2
    except (ScatteringError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"sepscat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"{cfg.workflow}: {'all checks passed' if code == 0 else 'some checks failed'} ({out})")
    return code


if __name__ == "__main__":
    sys.exit(main())
