"""Command-line driver: ``quatgeo {dirac,willmore,plucker,spectral-genus,riemann-roch}``.

Exit status is 0 when every bound and verification passes, 1 when one fails
and 2 on input errors.  Reports are written atomically (temporary file plus
rename) and only after the computation has finished.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialisation


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys and floats with 17 significant digits."""
    import numpy as np

    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps(cfg, indent=0).encode()).hexdigest()


class Outputs:
    """Collects output files and writes them atomically at the end."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def commit(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        staged = []
        try:
            for name, text in self.files.items():
                fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
                staged.append((tmp, self.out_dir / name))
            for tmp, dst in staged:
                os.replace(tmp, dst)
        finally:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.unlink(tmp)


# ---------------------------------------------------------------------------
# SVG


def svg_plot(title: str, series: list[dict], xlabel: str, ylabel: str, hlines=(), width=640, height=400) -> str:
    """Line/scatter plot with the plotted data embedded as CSV in ``<metadata>``.

    Each series is ``{"name", "x", "y", "style": "line"|"points"}``.
    """
    from xml.sax.saxutils import escape

    xs = [float(v) for s in series for v in s["x"]]
    ys = [float(v) for s in series for v in s["y"]] + [float(h[0]) for h in hlines]
    xs = [v for v in xs if math.isfinite(v)] or [0.0, 1.0]
    ys = [v for v in ys if math.isfinite(v)] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    body = [f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
            f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="16" y="{height / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {height / 2})">{escape(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        body.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle" font-size="10">{xv:.4g}</text>')
        body.append(f'<text x="{ml - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" font-size="10">{yv:.4g}</text>')
    for val, label in hlines:
        body.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{py(val):.1f}" y2="{py(val):.1f}" '
                    f'stroke="#888" stroke-dasharray="4 3"/>')
        body.append(f'<text x="{ml + pw - 4}" y="{py(val) - 4:.1f}" text-anchor="end" font-size="10">'
                    f'{escape(label)}</text>')
    rows = []
    for i, s in enumerate(series):
        col = colours[i % len(colours)]
        pts = [(px(float(a)), py(float(b))) for a, b in zip(s["x"], s["y"]) if math.isfinite(float(b))]
        if s.get("style", "line") == "line" and len(pts) > 1:
            body.append('<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>'.format(
                col, " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)))
        else:
            body += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{col}"/>' for a, b in pts]
        body.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * i}" font-size="11" fill="{col}">{escape(s["name"])}</text>')
        rows += [f"{s['name']},{_fmt_float(float(a))},{_fmt_float(float(b))}" for a, b in zip(s["x"], s["y"])]
    data = escape("series,x,y\n" + "\n".join(rows))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<metadata id="data">\n{data}\n</metadata>\n'
            + "\n".join(body) + "\n</svg>\n")


# ---------------------------------------------------------------------------
# input handling


def load_json(path: str | None, what: str) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise InputError(f"{what} file {path}: top level must be an object")
    return data


def _field(cfg: dict, key: str, typ, default=None, positive=False):
    if key not in cfg or cfg[key] is None:
        return default
    v = cfg[key]
    try:
        v = typ(v)
    except (TypeError, ValueError):
        raise InputError(f"field {key!r}: expected {typ.__name__}, got {cfg[key]!r}")
    if positive and not v > 0:
        raise InputError(f"field {key!r}: must be positive, got {v!r}")
    return v


def _pair(text: str, what: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in str(text).split(","))
    except ValueError:
        raise InputError(f"{what}: expected two comma-separated numbers, got {text!r}")
    return a, b


def _domain(cfg: dict):
    from .domain import domain_from_config

    if not isinstance(cfg, dict):
        raise InputError("field 'domain' must be an object")
    try:
        return domain_from_config(cfg)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"field 'domain': {exc}")


# ---------------------------------------------------------------------------
# commands


def cmd_dirac(args, cfg) -> tuple[int, dict, Outputs]:
    import numpy as np

    from .dirac import (SpinStructureTorus, assemble_dirac_flat_torus, assemble_dirac_round_sphere,
                        check_eigenvalue_bound, compute_spectrum, flat_torus_oracle)
    from .domain import IcosphereDomain, TorusDomain

    preset = args.preset or cfg.get("preset")
    dom_cfg = cfg.get("domain")
    if dom_cfg is None:
        if preset in (None, "round-sphere"):
            dom_cfg = {"type": "sphere", "subdiv": 5}
        elif preset == "flat-torus":
            dom_cfg = {"type": "torus", "tau_re": 0.0, "tau_im": 1.0, "nx": 16, "ny": 16, "scale": 2 * math.pi}
        else:
            raise InputError(f"unknown dirac preset {preset!r}")
    dom = _domain(dom_cfg)
    spin = args.spin or cfg.get("spin", "0,0")
    method = cfg.get("method", "spectral")
    is_sphere = isinstance(dom, IcosphereDomain)
    default_tol = 1e-2 if is_sphere else 1e-6
    tol = args.cluster_tol if args.cluster_tol is not None else _field(cfg, "cluster_tol", float, default_tol, True)
    k = args.k if args.k is not None else _field(cfg, "k", int, 30 if is_sphere else 40, True)
    if is_sphere:
        d = assemble_dirac_round_sphere(dom)
        genus, spin_used = 0, None
    elif isinstance(dom, TorusDomain):
        try:
            eps = SpinStructureTorus.parse(spin)
        except ValueError as exc:
            raise InputError(f"spin structure: {exc}")
        d = assemble_dirac_flat_torus(dom, eps, method)
        genus, spin_used = 1, list(eps.as_tuple())
    else:
        raise InputError("dirac needs a sphere (icosphere) or torus domain")
    spec = compute_spectrum(d, k, tol)
    # the round sphere attains the bound, so mesh error must be absorbed by the slack
    slack = _field(cfg, "bound_slack", float, 1e-2 if is_sphere else 1e-9)
    if slack < 0:
        raise InputError("field 'bound_slack': must be non-negative")
    rows = check_eigenvalue_bound(spec, d.area, genus, slack)
    checks = {"bounds": all(r.passed for r in rows), "hermitian": d.hermiticity_residual() < 1e-12}
    oracle = None
    if not is_sphere and method == "spectral" and spec.clusters:
        top = max(abs(c.lam) for c in spec.clusters)
        ref = flat_torus_oracle(dom, eps, top + 1e-9)
        got = np.sort([c.lam for c in spec.clusters for _ in range(c.complex_count)])
        ok = len(ref) == len(got)
        dev = float(np.max(np.abs(ref - got))) if ok and len(got) else (0.0 if ok else float("inf"))
        oracle = {"max_deviation": dev, "count_match": ok}
        checks["oracle"] = ok and dev < 1e-6
    header = "lambda,mult_quat,lhs,rhs,margin,pass\n"
    csv = header + "".join(f"{_fmt_float(r.lam)},{r.mult},{_fmt_float(r.lhs)},{_fmt_float(r.rhs)},"
                           f"{_fmt_float(r.margin)},{str(r.passed).lower()}\n" for r in rows)
    out = Outputs(Path(args.out))
    out.add("spectrum.csv", csv)
    effective = {"command": "dirac", "domain": dom.config(), "spin": spin_used, "k": k, "method": method,
                 "cluster_tol": tol, "bound_slack": slack}
    report = {
        "command": "dirac",
        "genus": genus,
        "area": d.area,
        "clusters": [{"lambda": r.lam, "mult_quat": r.mult, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin,
                      "pass": r.passed} for r in rows],
        "hermiticity_residual": d.hermiticity_residual(),
        "anticommutator_residual": d.anticommutator_residual(),
        "oracle": oracle,
        "checks": checks,
        "pass": all(checks.values()),
    }
    if args.plot:
        out.add("spectrum.svg", svg_plot(
            "Dirac spectrum: lambda^2 area against the bound",
            [{"name": "lambda^2 area", "x": [r.lam for r in rows], "y": [r.lhs for r in rows], "style": "points"},
             {"name": "bound", "x": [r.lam for r in rows], "y": [r.rhs for r in rows], "style": "points"}],
            "lambda", "lambda^2 area"))
    return (EXIT_OK if report["pass"] else EXIT_FAIL), report, out, effective, \
        {"cluster_tol": tol, "bound_slack": slack}


def _immersion_from_config(cfg):
    import numpy as np

    from .domain import IcosphereDomain
    from .immersion import derive_shape, derive_shape_mesh, immersion_preset

    kind = cfg.get("kind", "analytic-preset" if "preset" in cfg else "samples")
    if kind == "analytic-preset":
        name = cfg.get("preset")
        if not isinstance(name, str):
            raise InputError("field 'preset': missing preset name")
        try:
            surface, dom = immersion_preset(name, cfg.get("params") or {})
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"field 'preset': {exc}")
        if "domain" in cfg:
            dom = _domain(cfg["domain"])
        return name, dom, derive_shape(dom, surface)
    if kind != "samples":
        raise InputError(f"field 'kind': expected 'analytic-preset' or 'samples', got {kind!r}")
    if "domain" not in cfg or "samples" not in cfg:
        raise InputError("sampled immersions need 'domain' and 'samples'")
    dom = _domain(cfg["domain"])
    try:
        pts = np.asarray(cfg["samples"], dtype=float)
    except (TypeError, ValueError):
        raise InputError("field 'samples': expected a list of [x, y, z] triples")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError(f"field 'samples': expected shape (n, 3), got {pts.shape}")
    if isinstance(dom, IcosphereDomain):
        if len(pts) != len(dom.vertices):
            raise InputError(f"field 'samples': icosphere has {len(dom.vertices)} vertices, got {len(pts)}")
        normals = np.asarray(cfg["normals"], dtype=float) if "normals" in cfg else None
        return "samples", dom, derive_shape_mesh(dom, pts, normals)
    shape = dom.grid_shape
    if len(pts) != shape[0] * shape[1]:
        raise InputError(f"field 'samples': grid needs {shape[0] * shape[1]} points, got {len(pts)}")
    periods = cfg.get("periods")
    if periods is not None:
        periods = [np.asarray(p, dtype=float) for p in periods]
    return "samples", dom, derive_shape(dom, samples=pts.reshape(shape + (3,)), periods=periods)


def cmd_willmore(args, cfg):
    import numpy as np

    from .domain import LonLatDomain
    from .immersion import (ImmersionData, gauss_bonnet, harmonic_energy_and_relation, normal_map,
                            willmore_energy, willmore_energy_hopf)

    if args.preset:
        cfg = {"kind": "analytic-preset", "preset": args.preset, **{k: v for k, v in cfg.items() if k != "preset"}}
    if not cfg:
        raise InputError("willmore needs --config with an immersion file or --preset")
    name, dom, data = _immersion_from_config(cfg)
    w = willmore_energy(data)
    report = {"command": "willmore", "surface": name, "W": w, "area": data.area, "closed": data.closed}
    checks = {"W_nonnegative": w > -1e-6 * max(1.0, data.area)}
    if isinstance(data, ImmersionData):
        wq = willmore_energy_hopf(data)
        rel = abs(w - wq) / max(abs(w), abs(wq), 1e-12)
        report.update({"W_hopf": wq, "W_relative_difference": rel,
                       "conformality_residual": float(np.max(data.conformality_residual))})
        checks["W_routes_agree"] = rel < 5e-3 or max(abs(w), abs(wq)) < 1e-9
    gb = gauss_bonnet(data)
    report["gauss_bonnet"] = gb
    if isinstance(dom, LonLatDomain) and name == "sphere":
        rel = harmonic_energy_and_relation(normal_map("identity", dom))
        report["energy_relation"] = {"E": rel.E, "W": rel.W, "degree": rel.degree, "residual": rel.residual}
        checks["energy_relation"] = rel.residual < 0.02 * 4 * np.pi
    report["checks"] = checks
    report["pass"] = all(checks.values())
    effective = {"command": "willmore", "input": cfg}
    return (EXIT_OK if report["pass"] else EXIT_FAIL), report, Outputs(Path(args.out)), effective, \
        {"W_routes_rel": 5e-3}


def _plucker_system(cfg):
    from .plucker import LinearSystemH, PolynomialSection

    preset = cfg.get("preset")
    if preset:
        p = str(preset).replace(" ", "")
        if p == "cuspidal-cubic":
            coeffs = [[1], [0, 0, 1], [0, 0, 0, 1]]
            return LinearSystemH([PolynomialSection.holomorphic(c) for c in coeffs], 3, 0), {}
        if p.startswith("rational-normal"):
            try:
                n = int(p[p.index("(") + 1: p.index(")")])
            except ValueError:
                raise InputError(f"preset {preset!r}: expected rational-normal(n)")
            return LinearSystemH([PolynomialSection.holomorphic([0] * k + [1]) for k in range(n + 1)], n, 0), {}
        raise InputError(f"unknown plucker preset {preset!r}")
    if "basis" not in cfg or "degree" not in cfg:
        raise InputError("system file needs 'basis' and 'degree'")
    basis = []
    for i, sec in enumerate(cfg["basis"]):
        try:
            if "terms" in sec:
                terms = {(int(t[0]), int(t[1])): complex(t[2], t[3] if len(t) > 3 else 0.0) for t in sec["terms"]}
                basis.append(PolynomialSection(terms))
            else:
                cs = [complex(*c) if isinstance(c, list) else complex(c) for c in sec["coeffs"]]
                basis.append(PolynomialSection.holomorphic(cs))
        except (KeyError, TypeError, ValueError, IndexError):
            raise InputError(f"field 'basis[{i}]': expected 'coeffs' or 'terms' coefficient data")
    sys_ = LinearSystemH(basis, _field(cfg, "degree", int), _field(cfg, "genus", int, 0),
                         bool(cfg.get("quaternionic", False)))
    return sys_, {"W": _field(cfg, "W", float, 0.0), "W_star": _field(cfg, "W_star", float, 0.0)}


def _parse_points(text: str):
    pts = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        chart, _, val = tok.rpartition(":")
        if tok == "inf":
            chart, val = "inf", "0"
        chart = chart or "0"
        if chart not in ("0", "inf"):
            raise InputError(f"--points: unknown chart {chart!r} in {tok!r}")
        try:
            pts.append((chart, complex(val.replace(" ", ""))))
        except ValueError:
            raise InputError(f"--points: cannot parse {tok!r}")
    if not pts:
        raise InputError("--points: empty point list")
    return pts


def cmd_plucker(args, cfg):
    from .plucker import (DepthExceededError, auto_candidates, order_h, plucker_verify, weierstrass_gaps,
                          willmore_lower_bound)

    if args.system:
        cfg = load_json(args.system, "system")
    if args.preset:
        cfg = {"preset": args.preset}
    if not cfg:
        raise InputError("plucker needs --system, --config or --preset")
    system, energies = _plucker_system(cfg)
    points = args.points or cfg.get("points", "auto")
    if points == "auto":
        cands = auto_candidates(system)
        label = "exact"
    else:
        cands = _parse_points(points)
        label = "lower bound on ord H"
    if system.independence_residual(seed=args.seed or 0) < 1e-10:
        raise InputError("basis sections are linearly dependent")
    try:
        total, rows = order_h(system, cands, detail=True)
        base = weierstrass_gaps(system, 0.0)
    except (DepthExceededError, ValueError) as exc:
        raise InputError(str(exc))
    n, d, g = system.n, system.degree, system.genus
    w, ws = energies.get("W", 0.0), energies.get("W_star", 0.0)
    residual = plucker_verify(d, g, n, total, w, ws)
    report = {
        "command": "plucker",
        "n": n, "degree": d, "genus": g,
        "ordH": total,
        "ordH_label": label,
        "weierstrass_points": [{"chart": r.chart, "point": r.point, "gaps": list(r.gaps), "order": r.order}
                               for r in rows],
        "gaps_at_origin": list(base.gaps),
        "classical_ordH": (n + 1) * (n * (g - 1) + d),
        "W": w, "W_star": ws,
        "residual": residual,
        "willmore_lower_bound": willmore_lower_bound(n, d, g),
        "candidates": len(cands),
    }
    ok = residual == 0 if isinstance(residual, int) else abs(residual) < 1e-9
    report["pass"] = bool(ok)
    effective = {"command": "plucker", "system": cfg, "points": points}
    return (EXIT_OK if ok else EXIT_FAIL), report, Outputs(Path(args.out)), effective, {"rank_rtol": 1e-9}


def _harmonic_from_config(cfg, preset):
    import numpy as np

    from .domain import TorusDomain
    from .spectral import harmonic_from_samples, harmonic_preset

    name = preset or cfg.get("preset")
    if name:
        try:
            return harmonic_preset(str(name))
        except ValueError as exc:
            raise InputError(str(exc))
    if "domain" not in cfg or "samples" not in cfg:
        raise InputError("harmonic input needs a preset name or 'domain' and 'samples'")
    dom = _domain(cfg["domain"])
    if not isinstance(dom, TorusDomain):
        raise InputError("harmonic samples must live on a torus domain")
    try:
        pts = np.asarray(cfg["samples"], dtype=float).reshape(dom.grid_shape + (3,))
        return harmonic_from_samples(dom, pts)
    except ValueError as exc:
        raise InputError(f"field 'samples': {exc}")


def cmd_spectral_genus(args, cfg):
    import numpy as np

    from .spectral import (MIX, branch_detect, energy_area_bound, harmonic_energy, holonomy_scan,
                           small_energy_verdict)

    if args.input:
        cfg = load_json(args.input, "harmonic input")
    data = _harmonic_from_config(cfg, args.preset)
    annulus = _pair(args.annulus, "--annulus") if args.annulus else tuple(cfg.get("annulus", (0.25, 4.0)))
    grid = args.grid or _field(cfg, "grid", int, 41, True)
    mix = MIX
    if args.seed is not None:
        mix = float(np.random.default_rng(args.seed).uniform(0.2, 0.45))
    try:
        scan = holonomy_scan(data, annulus, grid)
    except ValueError as exc:
        raise InputError(str(exc))
    summary = branch_detect(data, annulus, grid, c=mix, scan=scan)
    energy = harmonic_energy(data)
    threshold = energy_area_bound(summary.genus, "harmonic")
    bound_pass = energy >= threshold * (1 - 1e-9)
    verdict = small_energy_verdict(energy, summary)
    inv = summary.invariants
    inv_pass = (inv["det"] < 1e-8 and inv["symmetry"] < 1e-6 and inv["unitarity"] < 1e-6
                and inv["commutator"] < 1e-6)
    report = summary.to_dict()
    report.update({
        "command": "spectral-genus",
        "preset": data.name,
        "params": data.params,
        "energy": energy,
        "bounds": {"threshold": threshold, "pass": bool(bound_pass)},
        "verdict": {"triggered": verdict.triggered, "consistent": verdict.consistent, "message": verdict.message},
        "invariants_pass": bool(inv_pass),
        "mix": mix,
    })
    ok = bound_pass and verdict.consistent and inv_pass and not summary.flags
    report["pass"] = bool(ok)
    out = Outputs(Path(args.out))
    if args.plot:
        mid = len(scan.s) // 2
        th = list(scan.theta)
        out.add("trace.svg", svg_plot(
            "Holonomy traces on |mu| = 1",
            [{"name": "Re tr H1", "x": th, "y": list(scan.t1[mid].real)},
             {"name": "Re tr H2", "x": th, "y": list(scan.t2[mid].real)}],
            "arg mu", "trace", hlines=[(2.0, "+2"), (-2.0, "-2")]))
    effective = {"command": "spectral-genus", "input": cfg, "preset": data.name, "annulus": list(annulus),
                 "grid": grid, "mix": mix}
    tol = {"holonomy_rtol": 1e-10, "det": 1e-8, "symmetry": 1e-6, "unitarity": 1e-6, "commutator": 1e-6}
    return (EXIT_OK if ok else EXIT_FAIL), report, out, effective, tol, "summary.json"


def cmd_riemann_roch(args, cfg):
    from .domain import TorusDomain
    from .plucker import IndeterminateError, riemann_roch_index_check

    dom_cfg = cfg.get("domain", {"type": "torus", "tau_re": 0.0, "tau_im": 1.0, "nx": 15, "ny": 15,
                                 "scale": 2 * math.pi})
    dom = _domain(dom_cfg)
    if not isinstance(dom, TorusDomain):
        raise InputError("riemann-roch needs a torus domain")
    qs = cfg.get("q", [0.0, 0.1, 0.5])
    try:
        qs = [complex(*q) if isinstance(q, list) else complex(q) for q in qs]
    except (TypeError, ValueError):
        raise InputError("field 'q': expected numbers or [re, im] pairs")
    rows, ok = [], True
    svals = []
    for q in qs:
        try:
            r = riemann_roch_index_check(dom, q)
        except IndeterminateError as exc:
            rows.append({"q": q, "error": str(exc)})
            ok = False
            continue
        rows.append({"q": q, "h0": r.h0, "h0_adjoint": r.h0_adj, "index": r.index, "expected": r.expected,
                     "oracle_h0": r.oracle_h0, "pass": r.passed})
        ok = ok and r.passed
        svals.append((q, r.singular_values))
    report = {"command": "riemann-roch", "domain": dom.config(), "results": rows, "pass": bool(ok)}
    out = Outputs(Path(args.out))
    if args.plot and svals:
        import numpy as np

        out.add("singular_values.svg", svg_plot(
            "Smallest singular values of dbar + Q",
            [{"name": f"q={q.real:g}{q.imag:+g}i", "x": list(range(20)),
              "y": list(np.log10(np.maximum(sv[::-1][:20], 1e-300)))} for q, sv in svals],
            "index", "log10 sigma"))
    effective = {"command": "riemann-roch", "domain": dom.config(), "q": qs}
    return (EXIT_OK if ok else EXIT_FAIL), report, out, effective, {"rtol": 1e-8, "gap": 1e-4}


COMMANDS = {
    "dirac": cmd_dirac,
    "willmore": cmd_willmore,
    "plucker": cmd_plucker,
    "spectral-genus": cmd_spectral_genus,
    "riemann-roch": cmd_riemann_roch,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("--cluster-tol", type=float, dest="cluster_tol", help="relative eigenvalue cluster tolerance")
    common.add_argument("--annulus", help="mu annulus as r_in,r_out")
    common.add_argument("--grid", type=int, help="mu grid size per direction")
    common.add_argument("--seed", type=int, help="seed for randomised choices")
    common.add_argument("--preset", help="built-in example instead of an input file")
    parser = argparse.ArgumentParser(prog="quatgeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("dirac", parents=[common], help="Dirac spectra and eigenvalue bounds")
    p.add_argument("--domain", dest="config", help="domain configuration (alias of --config)")
    p.add_argument("--spin", help="torus spin structure e1,e2 with entries 0 or 1/2")
    p.add_argument("--k", type=int, help="number of smallest-magnitude eigenvalues")
    sub.add_parser("willmore", parents=[common], help="Willmore energy of an immersion")
    p = sub.add_parser("plucker", parents=[common], help="Weierstrass points and the Plucker relation")
    p.add_argument("--system", help="linear system JSON file")
    p.add_argument("--points", help="'auto' or a list like 0:0,inf:0,0:1+2j")
    p = sub.add_parser("spectral-genus", parents=[common], help="spectral curve of a harmonic torus")
    p.add_argument("--input", help="harmonic map JSON file")
    sub.add_parser("riemann-roch", parents=[common], help="index of dbar + Q on a flat torus")
    return parser


def _apply_threads():
    n = os.environ.get("QUATGEO_THREADS")
    if n:
        if not n.isdigit() or int(n) < 1:
            raise InputError(f"QUATGEO_THREADS must be a positive integer, got {n!r}")
        for var in _THREAD_VARS:
            os.environ[var] = n


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads()
        for attr in ("cluster_tol", "grid"):
            v = getattr(args, attr, None)
            if v is not None and v <= 0:
                raise InputError(f"--{attr.replace('_', '-')} must be positive")
        cfg = load_json(args.config, "config")
        result = COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"quatgeo {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    status, report, out, effective, tolerances, *name = result
    report["config_hash"] = config_hash(effective)
    report["tolerances"] = tolerances
    out.add(name[0] if name else "report.json", dumps(report) + "\n")
    out.commit()
    print(f"quatgeo {args.command}: {'pass' if status == EXIT_OK else 'FAIL'} -> {out.out_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
