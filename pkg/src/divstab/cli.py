"""``divstab`` command line: analyze, flux, linear, bendixson, control, simulate, plot."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import flux as fx
from . import linstab
from .conditions import (
    INSTABILITY,
    STABILITY,
    ConditionError,
    ConditionReport,
    ConditionSpec,
    InstabilityRegion,
    analyze_instability,
    analyze_stability,
    rantzer_baseline,
)
from .control import NoneFound, SynthesisTemplate, TemplateTooLarge, synthesize, verify_control
from .expr import ExprError
from .field import Explicit, NormPower, QuadFormPower, density_expr, div_rho_f, divergence
from .invariantset import bendixson_check, dulac_check
from .plotting import plot_projection
from .report import Report
from .sampling import chunk_rng, uniform_ball
from .signcheck import DEFAULT_SAMPLES, EmptyU
from .sim import SPEED, SimError, portrait, portrait_csv, read_portrait_csv
from .sysfile import SysFileError, SystemFile, parse_density, parse_int_range, parse_matrix_file, read_system, with_alpha

EXIT_HOLDS, EXIT_REFUTED, EXIT_UNDETERMINED, EXIT_INPUT = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 3 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _seed(args, sf: SystemFile | None = None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "SEED" in os.environ:
        try:
            return int(os.environ["SEED"])
        except ValueError as exc:
            raise InputError(f"SEED must be an integer, got {os.environ['SEED']!r}") from exc
    if sf is not None and sf.seed is not None:
        return sf.seed
    return 0


def _samples(args, sf: SystemFile) -> int:
    if getattr(args, "samples", None) is not None:
        return args.samples
    return sf.samples or DEFAULT_SAMPLES


def _load(path: str) -> SystemFile:
    try:
        return read_system(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _system_section(rep: Report, sf: SystemFile, f) -> None:
    sec = rep.section("system")
    sec.add("mode", sf.mode)
    sec.add("vars", " ".join(sf.vars))
    for v, c in zip(f.vars, f.components):
        sec.add(f"{v}'", c.to_str(f.vars))
    if sf.rho_text:
        sec.add("density", sf.rho_text)
    sec.add("div_f", divergence(f).to_str(f.vars))


def _alphas(args, sf: SystemFile) -> tuple[int, ...]:
    if getattr(args, "alpha", None):
        return parse_int_range(args.alpha)
    if sf.alpha:
        return sf.alpha
    if isinstance(sf.rho, (NormPower, QuadFormPower)):
        return tuple(range(1, 9))
    return (0,)


def _beta(args, sf: SystemFile) -> Fraction:
    beta = Fraction(args.beta) if getattr(args, "beta", None) is not None else sf.beta
    if beta < 1:
        raise InputError("beta must be >= 1")
    return beta


def _fold(statuses: list[str]) -> int:
    if any(s in ("Holds", "HoldsOnSamples") for s in statuses):
        return EXIT_HOLDS
    if statuses and all(s == "Fails" for s in statuses):
        return EXIT_REFUTED
    return EXIT_UNDETERMINED


def _condition_section(rep: Report, title: str, cr: ConditionReport, names) -> None:
    rep.section(title).extend(cr.lines(names))


def cmd_analyze(args) -> tuple[Report, int]:
    sf = _load(args.file)
    f = sf.field()
    if sf.rho is None:
        raise InputError("analyze needs a 'rho:' line")
    rep = Report("analyze", Path(args.file).name, sf.digest)
    _system_section(rep, sf, f)
    cases = parse_int_range(args.cases) if args.cases else sf.cases
    beta = _beta(args, sf)
    seed = _seed(args, sf)
    kw = dict(samples=_samples(args, sf), seed=seed, workers=args.workers, empirical=args.empirical)
    settings = rep.section("settings")
    settings.add("cases", ",".join(map(str, cases)))
    settings.add("beta", beta)
    settings.add("seed", seed)
    settings.add("samples", kw["samples"])
    statuses, holding = [], []
    instability = sf.mode == "instability"
    for alpha in _alphas(args, sf):
        rho = with_alpha(sf.rho, alpha) if alpha else sf.rho
        tag = f" alpha={alpha}" if alpha else ""
        for case in cases:
            spec = ConditionSpec(INSTABILITY if instability else STABILITY, case, beta if case == 3 else None)
            if instability:
                cr = analyze_instability(f, InstabilityRegion(sf.radius, rho), spec, **kw)
            else:
                cr = analyze_stability(f, rho, spec, radius=sf.radius, **kw)
            _condition_section(rep, f"case {case}{tag}", cr, f.vars)
            statuses.append(cr.overall)
            if cr.holds:
                holding.append(f"case{case}{'@alpha=' + str(alpha) if alpha else ''}")
        if not instability and not isinstance(rho, Explicit) and args.baseline:
            cr = rantzer_baseline(f, rho, radius=sf.radius, **kw)
            _condition_section(rep, f"baseline{tag}", cr, f.vars)
    code = _fold(statuses)
    summary = rep.section("summary")
    summary.add("holds", " ".join(holding) or "none")
    summary.add("exit", code)
    return rep, code


def _estimate_items(sec, key, est: fx.IntegralEstimate):
    sec.add(key, f"{est.mean:.6e} +- {est.std_error:.3e} ({est.sign_verdict}, n={est.n_samples})")
    for note in est.notes:
        sec.add(f"{key}.note", note)


def cmd_flux(args) -> tuple[Report, int]:
    sf = _load(args.file)
    f = sf.field()
    rep = Report("flux", Path(args.file).name, sf.digest)
    _system_section(rep, sf, f)
    levels = tuple(float(v) for v in args.levels.split(",")) if args.levels else sf.levels
    seed = _seed(args, sf)
    rep.section("settings").add("levels", ",".join(f"{c:g}" for c in levels)).add("n", args.n).add("seed", seed)
    P = sf.region_P.to_array() if sf.region == "quadform" else None
    for li, C in enumerate(levels):
        base = seed + 10 * li
        region = fx.RegionSpec("norm_sq" if P is None else "quadform", C, P)
        sec = rep.section(f"level C={C:g}")
        sec.add("region", "|x|^2 <= C" if P is None else "x^T P x <= C")
        vol = fx.volume_integral(fx.grad_norm_integrand(f, region), region, args.n, base, nvars=f.n, workers=args.workers)
        surf = fx.surface_flux(f, None, region, args.n, base + 1, workers=args.workers)
        _estimate_items(sec, "level_function.volume", vol)
        _estimate_items(sec, "level_function.surface", surf)
        sec.add("level_function.agreement_se", f"{abs(vol.mean - surf.mean) / max(fx.combined_std_error(vol, surf), 1e-300):.3f}")
        if sf.rho is None:
            continue
        rho = sf.rho
        g = div_rho_f(f, rho)
        vol = fx.volume_integral(g, region, args.n, base + 2, workers=args.workers)
        surf = fx.surface_flux(f, fx.phi_for_density(density_expr(rho, f.n), region), region, args.n, base + 3, workers=args.workers)
        _estimate_items(sec, "density.volume", vol)
        _estimate_items(sec, "density.surface", surf)
        sec.add("density.agreement_se", f"{abs(vol.mean - surf.mean) / max(fx.combined_std_error(vol, surf), 1e-300):.3f}")
        if isinstance(rho, Explicit):
            sec.add("inverse_density", "skipped: div{rho^-1 f} is rational for an explicit density")
        else:
            inv = fx.shell_integral(div_rho_f(f, rho, inverse=True), region, args.outer, args.n, base + 4, workers=args.workers)
            _estimate_items(sec, "inverse_density.shell", inv)
    rep.section("summary").add("note", "a Positive volume verdict for a chosen S refutes nothing about stability")
    return rep, EXIT_HOLDS


def _read_matrix(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return np.array(parse_matrix_file(text))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_linear(args) -> tuple[Report, int]:
    A = _read_matrix(args.matrix)
    P = _read_matrix(args.P) if args.P else None
    text = Path(args.matrix).read_text(encoding="utf-8")
    rep = Report("linear", Path(args.matrix).name, hashlib.sha256(text.encode()).hexdigest())
    sec = rep.section("matrix")
    for i, row in enumerate(A):
        sec.add(f"row{i + 1}", " ".join(f"{v:.17g}" for v in row))
    sec.add("trace", f"{np.trace(A):.17g}")
    sec.add("hurwitz", "yes" if linstab.is_hurwitz(A) else "no")
    statuses = []
    for case in parse_int_range(args.case):
        if case == 1:
            v = linstab.check_case1(A, args.alpha, args.beta, P)
            title = f"case 1 alpha={args.alpha:g} beta={args.beta:g}"
        elif case == 2:
            v = linstab.check_case2(A, args.alpha, P)
            title = f"case 2 alpha={args.alpha:g}"
        else:
            raise InputError("linear cases are 1 and 2")
        s = rep.section(title)
        s.add("verdict", v.status)
        if v.P is not None:
            s.add("P_source", v.P_source)
            for i, row in enumerate(v.P):
                s.add(f"P.row{i + 1}", " ".join(f"{x:.12g}" for x in row))
        for k, eig in enumerate(v.form_eigenvalues, 1):
            s.add(f"form{k}.eigenvalues", " ".join(f"{x:.12g}" for x in eig))
        for k, note in enumerate(v.notes, 1):
            s.add(f"note{k}", note)
        statuses.append(v.status)
    code = _fold(statuses)
    rep.section("summary").add("exit", code)
    return rep, code


def cmd_bendixson(args) -> tuple[Report, int]:
    sf = _load(args.file)
    f = sf.field()
    rep = Report("bendixson", Path(args.file).name, sf.digest)
    _system_section(rep, sf, f)
    seed = _seed(args, sf)
    v = bendixson_check(f, args.radius, seed=seed)
    sec = rep.section("bendixson")
    sec.add("expression", v.expression.to_str(f.vars) if v.expression is not None else "-")
    sec.add("verdict", v.summary())
    final = v
    if args.rho or sf.rho is not None:
        try:
            rho = parse_density(args.rho, sf.vars) if args.rho else sf.rho
        except (ValueError, ExprError) as exc:
            raise InputError(f"--rho: {exc}") from exc
        d = dulac_check(f, rho, args.radius, seed=seed)
        sec = rep.section("dulac")
        sec.add("density", args.rho or sf.rho_text)
        sec.add("cleared_expression", d.expression.to_str(f.vars) if d.expression is not None else "-")
        sec.add("verdict", d.summary())
        if d.excluded:
            final = d
    code = {"Excluded": 0, "Inapplicable": 1}.get(final.status, 2)
    rep.section("summary").add("result", final.summary()).add("exit", code)
    return rep, code


def cmd_control(args) -> tuple[Report, int]:
    sf = _load(args.file)
    if sf.control is None:
        raise InputError("control needs xi<i>/g<i><j> lines")
    rep = Report(f"control {args.action}", Path(args.file).name, sf.digest)
    beta = _beta(args, sf)
    seed = _seed(args, sf)
    if sf.rho is None:
        raise InputError("control needs a 'rho:' line")
    case = args.case or (sf.cases[0] if len(sf.cases) == 1 else 3)
    spec = ConditionSpec(STABILITY, case, beta if case == 3 else None)
    if args.action == "verify":
        if sf.control.u is None:
            raise InputError("verify needs u<j> lines")
        f = sf.control.closed_loop()
        _system_section(rep, sf, f)
        statuses = []
        for alpha in _alphas(args, sf) if args.alpha else (getattr(sf.rho, "alpha", 0),):
            rho = with_alpha(sf.rho, alpha) if alpha else sf.rho
            cr = verify_control(sf.control, rho, spec, seed=seed, samples=_samples(args, sf))
            _condition_section(rep, f"case {case} alpha={alpha}", cr, f.vars)
            statuses.append(cr.overall)
        code = _fold(statuses)
        rep.section("summary").add("exit", code)
        return rep, code
    if sf.template is None:
        raise InputError("synth needs a 'u_template:' line")
    template = sf.template
    if args.alpha:
        template = SynthesisTemplate(template.monomials, template.grid, beta, parse_int_range(args.alpha))
    sec = rep.section("synthesis")
    sec.add("candidates", template.size)
    sec.add("simulation_gate", "off" if args.no_gate else "on")
    try:
        res = synthesize(sf.control, template, spec, simulation_gate=not args.no_gate, seed=seed)
    except NoneFound as exc:
        sec.add("result", f"NoneFound: {exc}")
        rep.section("summary").add("exit", EXIT_REFUTED)
        return rep, EXIT_REFUTED
    names = sf.vars
    for j, u in enumerate(res.u, 1):
        sec.add(f"u{j}", u.to_str(names))
    sec.add("alpha", res.alpha)
    sec.add("enumeration_index", res.index)
    sec.add("certified_candidates", res.certified)
    for k, r in enumerate(res.rejected_by_simulation, 1):
        sec.add(f"rejected{k}", r)
    _condition_section(rep, f"case {case} alpha={res.alpha}", res.report, names)
    rep.section("summary").add("exit", EXIT_HOLDS)
    return rep, EXIT_HOLDS


def _starts(args, sf: SystemFile, seed: int) -> list[list[float]]:
    starts = []
    for text in args.x0 or []:
        try:
            x = [float(v) for v in text.split(",")]
        except ValueError as exc:
            raise InputError(f"--x0 {text!r}: {exc}") from exc
        if len(x) != sf.n:
            raise InputError(f"--x0 {text!r} has {len(x)} components, expected {sf.n}")
        starts.append(x)
    if args.random:
        starts += uniform_ball(chunk_rng(seed, 0), args.random, sf.n, args.random_radius).tolist()
    if not starts:
        raise InputError("give --x0 or --random")
    return starts


def _coords(text: str, n: int) -> tuple[int, int]:
    try:
        i, j = (int(v) - 1 for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"--coords {text!r}: expected two 1-based indices") from exc
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InputError(f"--coords {text!r} invalid for {n} variables")
    return i, j


def cmd_simulate(args) -> tuple[Report, int]:
    sf = _load(args.file)
    f = sf.field()
    seed = _seed(args, sf)
    rep = Report("simulate", Path(args.file).name, sf.digest)
    _system_section(rep, sf, f)
    starts = _starts(args, sf, seed)
    rescale = SPEED if args.rescale == "speed" else int(args.rescale)
    records = portrait(f, starts, workers=args.workers, T=args.T, tol=args.tol, rescale=rescale)
    sec = rep.section("settings")
    sec.add("horizon", f"{args.T:g}").add("tol", f"{args.tol:g}").add("rescale", args.rescale)
    counts: dict[str, int] = {}
    for k, (x0, rec) in enumerate(zip(starts, records)):
        s = rep.section(f"trajectory {k}")
        s.add("x0", " ".join(f"{v:.12g}" for v in x0))
        s.add("classification", str(rec.classification))
        s.add("steps", rec.steps)
        s.add("final_t", f"{rec.t[-1]:.12g}")
        s.add("final_x", " ".join(f"{v:.12g}" for v in rec.x[-1]))
        counts[rec.classification.kind] = counts.get(rec.classification.kind, 0) + 1
    summary = rep.section("summary")
    for kind in sorted(counts):
        summary.add(kind, counts[kind])
    if args.csv or args.svg:
        text = portrait_csv(records, f.vars)
        if args.csv:
            Path(args.csv).write_text(text, encoding="utf-8")
            summary.add("csv", Path(args.csv).name)
        if args.svg:
            names, data = read_portrait_csv(text)
            plot_projection(data, names, args.svg, _coords(args.coords, f.n), Path(args.file).stem)
            summary.add("svg", Path(args.svg).name)
    return rep, EXIT_HOLDS


def cmd_plot(args) -> tuple[Report, int]:
    try:
        text = Path(args.csv).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {args.csv}: {exc.strerror}") from exc
    try:
        names, data = read_portrait_csv(text)
    except ValueError as exc:
        raise InputError(f"{args.csv}: {exc}") from exc
    coords = _coords(args.coords, len(names))
    plot_projection(data, names, args.out, coords, args.title)
    rep = Report("plot", Path(args.csv).name)
    rep.section("plot").add("trajectories", len(data)).add("coords", f"{names[coords[0]]},{names[coords[1]]}").add("svg", Path(args.out).name)
    return rep, EXIT_HOLDS


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="divstab", description="Divergence-based stability analysis of polynomial systems.")
    p.add_argument("--output", "-o", help="write the report to this file instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=1)

    a = sub.add_parser("analyze", help="sufficient stability / instability conditions")
    a.add_argument("file")
    a.add_argument("--cases")
    a.add_argument("--alpha", help="single value, list or range such as 1..8")
    a.add_argument("--beta")
    a.add_argument("--samples", type=int)
    a.add_argument("--empirical", action="store_true", help="accept unrefuted sampled clauses as HoldsOnSamples")
    a.add_argument("--no-baseline", dest="baseline", action="store_false")
    common(a)
    a.set_defaults(fn=cmd_analyze)

    fl = sub.add_parser("flux", help="integral conditions and divergence-theorem check")
    fl.add_argument("file")
    fl.add_argument("--levels")
    fl.add_argument("--n", type=int, default=100_000)
    fl.add_argument("--outer", type=float, help="outer level of the inverse-region shell (default 10/C)")
    common(fl)
    fl.set_defaults(fn=cmd_flux)

    li = sub.add_parser("linear", help="trace-shifted Lyapunov inequalities for x' = A x")
    li.add_argument("matrix")
    li.add_argument("--alpha", type=float, default=1.0)
    li.add_argument("--beta", type=float, default=1.0)
    li.add_argument("--P")
    li.add_argument("--case", default="1,2")
    li.set_defaults(fn=cmd_linear)

    b = sub.add_parser("bendixson", help="exclusion of invariant sets of positive measure")
    b.add_argument("file")
    b.add_argument("--rho")
    b.add_argument("--radius", type=float, default=1.0)
    common(b)
    b.set_defaults(fn=cmd_bendixson)

    c = sub.add_parser("control", help="verify or synthesize a feedback law")
    c.add_argument("file")
    c.add_argument("action", choices=("verify", "synth"))
    c.add_argument("--alpha")
    c.add_argument("--beta")
    c.add_argument("--case", type=int, choices=(1, 2, 3, 4))
    c.add_argument("--samples", type=int)
    c.add_argument("--no-gate", action="store_true", help="skip the closed-loop simulation check in synthesis")
    common(c)
    c.set_defaults(fn=cmd_control)

    s = sub.add_parser("simulate", help="integrate and classify trajectories")
    s.add_argument("file")
    s.add_argument("--x0", action="append", help="comma-separated start, repeatable")
    s.add_argument("--random", type=int, default=0, help="add N random starts in a ball")
    s.add_argument("--random-radius", type=float, default=1.0)
    s.add_argument("--T", type=float, default=100.0)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--rescale", default="0", help="0, an exponent k for f/|x|^k, or 'speed'")
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.add_argument("--coords", default="1,2")
    common(s)
    s.set_defaults(fn=cmd_simulate)

    pl = sub.add_parser("plot", help="render a trajectory CSV to SVG")
    pl.add_argument("csv")
    pl.add_argument("--out", required=True)
    pl.add_argument("--coords", default="1,2")
    pl.add_argument("--title")
    pl.set_defaults(fn=cmd_plot)
    return p


INPUT_ERRORS = (InputError, SysFileError, ExprError, ConditionError, EmptyU, TemplateTooLarge, SimError, ValueError, linstab.LinstabError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "rescale") and args.rescale != SPEED and not args.rescale.lstrip("-").isdigit():
        parser.error("--rescale must be an integer or 'speed'")
    try:
        rep, code = args.fn(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = rep.render()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
