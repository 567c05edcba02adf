"""Batch command line front end.

Four subcommands, each driven by a JSON manifest (a file path or the name of
a bundled example):

* ``describe``  chart summary: coordinate ranges, scalar curvature range,
  Einstein deviation, volume.
* ``check``     identity and theorem checks on the manifest's soliton block.
* ``integrate`` quadrature of an expression; beyond the metric DSL it binds
  ``r`` (scalar curvature), ``f`` (declared gradient potential) and the calls
  ``ric(v, w)``, ``g(v, w)`` over the vectors {gradf, gradr, xi}, plus
  ``lap(s)`` and ``norm2_hess(s)`` for scalar expressions s.
* ``fit``       least-squares potential fit per the manifest's fit block,
  followed by the full check suite on the fitted soliton.

Reports are printed as JSON with fixed key order and floats at 17 significant
digits, so equal inputs give byte-identical output.  Exit status: 0 for
success (hypothesis-not-met included), 1 if any check verdict is violated,
2 for usage, schema or evaluation errors.
"""

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .expr import BinOp, Call, Const, ExprError, Neg, Var, parse
from .fitting import BasisExpansion, FitError, fit_potential
from .geometry import (
    GeometryError,
    hessian,
    laplacian,
    norm2_sym2,
    raise_covec,
    ric_vv,
    scalar_field,
    scalar_jets,
)
from .manifest import ManifestError, bundled, bundled_names, load_manifest
from .quadrature import QuadratureError, default_grid, grid_nodes
from .solitons import (
    CHECK_IDS,
    GRADIENT_ONLY,
    SolitonError,
    SolitonSpec,
    Tolerances,
    grid_frame,
    run_check,
)

VERDICTS = ("identity-holds", "hypothesis-not-met", "violated")


# --------------------------------------------------------- report rendering

def _format_number(x):
    if not math.isfinite(x):
        raise ValueError("non-finite value in report")
    return format(x, ".17g")


def render_json(obj, indent=0):
    """Deterministic JSON: insertion-order keys, floats at 17 significant
    digits, two-space indentation."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = "  " * (indent + 1)
        rows = [
            f"{inner}{render_json(str(k))}: {render_json(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        inner = "  " * (indent + 1)
        rows = [f"{inner}{render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot render {type(obj).__name__} in a report")


def report_dict(rep):
    return {
        "check_id": rep.check_id,
        "verdict": rep.verdict,
        "max_residual": rep.max_residual,
        "residuals": dict(rep.residuals),
        "hypothesis_residuals": dict(rep.hypothesis_residuals),
        "integrals": dict(rep.integrals),
        "info": dict(rep.info),
        "grid": list(rep.grid),
        "tolerances": dict(rep.tolerances),
        "notes": list(rep.notes),
    }


# ------------------------------------------------------ expression evaluation

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp,
                "log": np.log, "sqrt": np.sqrt}


def _value(node, xs):
    """Plain values of a parsed expression over stacked columns xs (..., k)."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return xs[..., node.index]
    if isinstance(node, Neg):
        return -_value(node.arg, xs)
    if isinstance(node, Call):
        return _NUMPY_FUNCS[node.func](_value(node.arg, xs))
    left, right = _value(node.left, xs), _value(node.right, xs)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    return left ** right


_EXT_CALL = re.compile(r"\b(ric|g|lap|norm2_hess)\s*\(")
_EXT_NAME = re.compile(r"\b(r|f|gradf|gradr|xi)\b")


def _match_paren(text, open_idx):
    depth = 0
    for k in range(open_idx, len(text)):
        if text[k] == "(":
            depth += 1
        elif text[k] == ")":
            depth -= 1
            if depth == 0:
                return k
    raise ExprError("unbalanced parentheses", open_idx)


def _split_args(text):
    parts, depth, start = [], 0, 0
    for k, c in enumerate(text):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append(text[start:k])
            start = k + 1
    parts.append(text[start:])
    return parts


class _Integrand:
    """Rewrites the extended integrand DSL into the metric DSL plus
    precomputed placeholder columns, then evaluates it on the grid."""

    def __init__(self, man, fr, x):
        self.man = man
        self.ch = man.chart
        self.fr = fr
        self.x = x
        self.cols = {}
        self._jet_cache = {}

    def _placeholder(self, array):
        name = f"_q{len(self.cols)}"
        self.cols[name] = np.broadcast_to(np.asarray(array, float),
                                          self.x.shape[:-1])
        return name

    def _potential(self):
        sol = self.man.soliton
        if sol is None or sol.potential is None:
            raise SolitonError(
                "integrand references the potential f but the manifest "
                "declares no gradient potential"
            )
        return sol.potential

    def _jets(self, source):
        if source not in self._jet_cache:
            field = scalar_field(self.ch, source)
            self._jet_cache[source] = scalar_jets(field, self.x, order=3)
        return self._jet_cache[source]

    def _vector(self, name):
        name = name.strip()
        if name == "gradr":
            return raise_covec(self.fr, self.fr.dr)
        if name == "gradf":
            return raise_covec(self.fr, self._jets(self._potential().source).df)
        if name == "xi":
            sol = self.man.soliton
            if sol is None or sol.vector is None:
                raise SolitonError(
                    "integrand references xi but the manifest declares "
                    "no vector potential"
                )
            comps = [
                np.broadcast_to(np.asarray(_value(nd, self.x), float),
                                self.x.shape[:-1])
                for nd in sol.vector.nodes
            ]
            return np.stack(comps, axis=-1)
        raise SolitonError(
            f"ric/g arguments must be one of gradf, gradr, xi; got {name!r}"
        )

    def _scalar_op(self, func, inner):
        inner = inner.strip()
        if inner == "f":
            source = self._potential().source
        else:
            bad = _EXT_CALL.search(inner)
            if bad is None:
                for m in _EXT_NAME.finditer(inner):
                    if m.group(1) not in self.ch.coords:
                        bad = m
                        break
            if bad is not None:
                raise SolitonError(
                    f"{func} takes a coordinate expression or the potential "
                    f"name f, got {inner!r}"
                )
            source = inner
        sj = self._jets(source)
        if func == "lap":
            return laplacian(self.fr, sj)
        return norm2_sym2(self.fr, hessian(self.fr, sj))

    def _rewrite(self, source):
        text = source
        while True:
            m = _EXT_CALL.search(text)
            if m is None:
                break
            func = m.group(1)
            close = _match_paren(text, m.end() - 1)
            inner = text[m.end():close]
            if func in ("ric", "g"):
                args = _split_args(inner)
                if len(args) != 2:
                    raise SolitonError(f"{func} takes exactly two arguments")
                v, w = self._vector(args[0]), self._vector(args[1])
                if func == "ric":
                    array = ric_vv(self.fr, v, w)
                else:
                    array = np.einsum("...ab,...a,...b->...", self.fr.g, v, w)
            else:
                array = self._scalar_op(func, inner)
            text = text[:m.start()] + self._placeholder(array) + text[close + 1:]

        def bare(m):
            name = m.group(1)
            if name in self.ch.coords:
                return name
            if name == "r":
                return self._placeholder(self.fr.r)
            if name == "f":
                pot = self._potential()
                return self._placeholder(_value(pot.node, self.x))
            raise SolitonError(
                f"{name} is only meaningful as an argument of ric(,) or g(,)"
            )

        return _EXT_NAME.sub(bare, text)

    def evaluate(self, source):
        text = self._rewrite(source)
        names = tuple(self.cols)
        node = parse(text, self.ch.coords + names)
        columns = [self.x] + [c[..., None] for c in self.cols.values()]
        xs = np.concatenate(columns, axis=-1)
        with np.errstate(all="ignore"):
            values = _value(node, xs)
        return np.broadcast_to(np.asarray(values, float), self.x.shape[:-1])


# ----------------------------------------------------------------- commands

def _metric_positivity(ch, x):
    g = np.empty(x.shape[:-1] + (ch.dim, ch.dim))
    with np.errstate(all="ignore"):
        for i in range(ch.dim):
            for j in range(ch.dim):
                g[..., i, j] = _value(ch.metric[i][j], x)
        eigen = np.linalg.eigvalsh(g)
    bad = ~(eigen[..., 0] > 0.0)
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad.ravel())), bad.shape)
        node = ", ".join(
            f"{c}={x[idx + (k,)]:.6g}" for k, c in enumerate(ch.coords)
        )
        raise GeometryError(f"metric is not positive definite at node ({node})")


def cmd_describe(man, grid):
    ch = man.chart
    spec = grid if grid is not None else default_grid(ch)
    x, w = grid_nodes(ch, spec)
    _metric_positivity(ch, x)
    fr = grid_frame(ch, spec)
    dev = fr.Ric - (fr.r / ch.dim)[..., None, None] * fr.g
    report = {
        "command": "describe",
        "manifest": man.name,
        "dim": ch.dim,
        "coordinates": [
            {"name": c, "range": [ch.lo[i], ch.hi[i]],
             "periodic": ch.periodic[i]}
            for i, c in enumerate(ch.coords)
        ],
        "grid": list(spec.counts),
        "volume": float(np.sum(w * fr.sqrtg)),
        "scalar_curvature": {"min": float(fr.r.min()),
                             "max": float(fr.r.max())},
        "einstein_deviation_max": float(np.sqrt(np.max(norm2_sym2(fr, dev)))),
    }
    if man.soliton is not None:
        sol = man.soliton
        report["soliton"] = {
            "kind": sol.kind,
            "potential": "gradient" if sol.is_gradient else "vector",
            "lambda": sol.lam,
            "mu": sol.mu,
        }
    return report, 0


def _select_checks(man, args):
    ids = list(args.ids)
    if args.checks:
        ids.extend(part.strip() for part in args.checks.split(",") if part.strip())
    if not ids:
        if man.soliton is not None and not man.soliton.is_gradient:
            return [cid for cid in CHECK_IDS if cid not in GRADIENT_ONLY]
        return list(CHECK_IDS)
    for cid in ids:
        if cid not in CHECK_IDS:
            raise SolitonError(
                f"unknown check id {cid!r}; valid ids: {', '.join(CHECK_IDS)}"
            )
    return ids


def cmd_check(man, ids, grid, tol):
    if man.soliton is None:
        raise ManifestError("soliton", "the check command needs a soliton block")
    spec = grid if grid is not None else default_grid(man.chart)
    reports = [run_check(man.soliton, cid, spec, tol) for cid in ids]
    counts = {v: sum(1 for r in reports if r.verdict == v) for v in VERDICTS}
    report = {
        "command": "check",
        "manifest": man.name,
        "kind": man.soliton.kind,
        "grid": list(spec.counts),
        "tolerances": tol.as_dict(),
        "verdict_counts": counts,
        "checks": [report_dict(r) for r in reports],
    }
    return report, 1 if counts["violated"] else 0


def cmd_integrate(man, expression, grid):
    ch = man.chart
    spec = grid if grid is not None else default_grid(ch)
    x, w = grid_nodes(ch, spec)
    fr = grid_frame(ch, spec)
    values = _Integrand(man, fr, x).evaluate(expression)
    total = float(np.sum(values * w * fr.sqrtg))
    if not math.isfinite(total):
        raise ExprError("integrand evaluated to a non-finite value", 0)
    report = {
        "command": "integrate",
        "manifest": man.name,
        "expression": expression,
        "value": total,
        "grid": list(spec.counts),
        "rules": list(spec.rules),
    }
    return report, 0


def _potential_text(coefficients, terms):
    pieces = []
    for c, term in zip(coefficients, terms):
        coef = format(float(c), ".17g")
        pieces.append(coef if term == "1" else f"({coef})*{term}")
    return " + ".join(pieces) if pieces else "0"


def cmd_fit(man, grid, tol):
    if man.fit is None:
        raise ManifestError("fit", "the fit command needs a fit block")
    ch = man.chart
    spec = grid if grid is not None else default_grid(ch)
    basis = BasisExpansion(chart=ch, family=man.fit.family,
                           degree=man.fit.degree)
    result = fit_potential(ch, man.fit.kind, basis, init=man.fit.init,
                           grid=spec, opts=man.fit.options)
    terms = basis.terms()
    text = _potential_text(result.coefficients, terms)
    fitted = SolitonSpec(
        name=man.name, chart=ch, kind=man.fit.kind,
        lam=result.lam, mu=result.mu, potential=scalar_field(ch, text),
    )
    checks = [run_check(fitted, cid, spec, tol) for cid in CHECK_IDS]
    counts = {v: sum(1 for r in checks if r.verdict == v) for v in VERDICTS}
    report = {
        "command": "fit",
        "manifest": man.name,
        "kind": man.fit.kind,
        "basis": {"family": man.fit.family, "degree": man.fit.degree,
                  "terms": list(terms)},
        "result": {
            "coefficients": list(result.coefficients),
            "lambda": result.lam,
            "mu": result.mu,
            "objective": result.objective,
            "objective_fit_grid": result.objective_fit_grid,
            "iterations": result.iterations,
            "converged": result.converged,
            "reason": result.reason,
            "lambda_clamped": result.lam_clamped,
            "grid": list(result.grid),
            "fit_grid": list(result.fit_grid),
        },
        "potential": text,
        "verdict_counts": counts,
        "checks": [report_dict(r) for r in checks],
    }
    return report, 1 if counts["violated"] else 0


# --------------------------------------------------------------- entry point

def _resolve_manifest(arg):
    path = Path(arg)
    if path.exists():
        return load_manifest(path)
    names = bundled_names()
    if arg in names:
        return bundled(arg)
    raise ManifestError(
        "manifest",
        f"no such file or bundled manifest {arg!r}; bundled names: "
        + ", ".join(names),
    )


def _parse_grid(text, ch):
    try:
        counts = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise QuadratureError(
            f"--grid expects comma separated integers, got {text!r}"
        ) from None
    return default_grid(ch, counts)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="solitonlab",
        description="Curvature identities, soliton checks, integrals and "
                    "potential fits on explicit compact manifolds.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("manifest",
                       help="manifest JSON path or bundled manifest name")
        p.add_argument("--grid",
                       help="node counts per coordinate, e.g. 64,128")
        p.add_argument("--tol", type=float,
                       help="uniform tolerance replacing the defaults")
        p.add_argument("--out", help="also write the report to this file")

    p = sub.add_parser("describe", help="chart and curvature summary")
    common(p)

    p = sub.add_parser("check", help="run identity and theorem checks")
    common(p)
    p.add_argument("ids", nargs="*", metavar="check-id",
                   help=f"checks to run (default all applicable); "
                        f"valid: {', '.join(CHECK_IDS)}")
    p.add_argument("--checks", help="comma separated check ids")

    p = sub.add_parser("integrate",
                       help="integrate an expression over the manifold")
    common(p)
    p.add_argument("expression", help="integrand in the extended DSL")

    p = sub.add_parser("fit", help="fit a gradient potential")
    common(p)

    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        man = _resolve_manifest(args.manifest)
        grid = _parse_grid(args.grid, man.chart) if args.grid else None
        tol = (Tolerances.uniform(args.tol) if args.tol is not None
               else Tolerances())
        if args.command == "describe":
            report, code = cmd_describe(man, grid)
        elif args.command == "check":
            ids = _select_checks(man, args)
            report, code = cmd_check(man, ids, grid, tol)
        elif args.command == "integrate":
            report, code = cmd_integrate(man, args.expression, grid)
        else:
            report, code = cmd_fit(man, grid, tol)
    except (ManifestError, GeometryError, QuadratureError, ExprError,
            SolitonError, FitError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    text = render_json(report) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
