"""Reader for the line-oriented system description format.

    vars: x1 x2 x3
    f1: x2 - 2*x1*x3^2
    ...
    rho: norm^6

Control files use ``xi<i>:``, ``g<i><j>:`` and ``u<j>:`` or ``u_template:``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .control import ControlSystem, SynthesisTemplate
from .expr import ParseError, Polynomial, parse_polynomial
from .field import DensitySpec, Explicit, NormPower, QuadFormPower, SymMatrix, VectorField

MODES = ("stability", "instability", "control")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


class SysFileError(Exception):
    def __init__(self, line: int, column: int, message: str):
        self.line, self.column = line, column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass
class SystemFile:
    vars: tuple[str, ...]
    mode: str = "stability"
    f: VectorField | None = None
    control: ControlSystem | None = None
    template: SynthesisTemplate | None = None
    rho: DensitySpec | None = None
    rho_text: str | None = None
    radius: float = 1.0
    levels: tuple[float, ...] = (0.25, 1.0, 4.0)
    region: str = "norm"
    region_P: SymMatrix | None = None
    beta: Fraction = Fraction(1)
    alpha: tuple[int, ...] | None = None
    seed: int | None = None
    samples: int | None = None
    cases: tuple[int, ...] = (1, 2, 3, 4)
    digest: str = ""
    source_lines: list[tuple[str, str]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.vars)

    def field(self) -> VectorField:
        """The vector field under study (closed loop in control mode)."""
        if self.f is not None:
            return self.f
        if self.control is not None and self.control.u is not None:
            return self.control.closed_loop()
        raise SysFileError(0, 0, "no vector field: give f<i> lines or a control law u<j>")


def parse_int_range(text: str) -> tuple[int, ...]:
    """``"3"``, ``"1..8"`` or ``"1,2,5"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        a, b = int(lo), int(hi)
        if b < a:
            raise ValueError(f"empty range {text!r}")
        return tuple(range(a, b + 1))
    return tuple(int(p) for p in text.split(","))


def parse_grid(text: str) -> tuple[Fraction, ...]:
    text = text.strip()
    if ".." in text:
        return tuple(Fraction(v) for v in parse_int_range(text))
    return tuple(Fraction(p.strip()) for p in text.split(","))


def parse_matrix(text: str) -> list[list[Fraction]]:
    """``[a b; c d]`` with rational entries."""
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError("matrix must be written as [a b; c d]")
    rows = [r.split() for r in text[1:-1].split(";")]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError("matrix must be square")
    return [[Fraction(v) for v in r] for r in rows]


def parse_density(text: str, names: tuple[str, ...]) -> DensitySpec:
    text = text.strip()
    if text.startswith("norm"):
        m = re.fullmatch(r"norm\s*\^\s*(\d+)", text)
        if not m or int(m.group(1)) % 2 or int(m.group(1)) == 0:
            raise ValueError("norm density must be norm^<even positive integer>")
        return NormPower(int(m.group(1)) // 2)
    if text.startswith("quadform"):
        m = re.fullmatch(r"quadform\s*(\[.*\])\s*\^\s*(\d+)", text)
        if not m:
            raise ValueError("expected quadform [a b; c d] ^<alpha>")
        P = SymMatrix(parse_matrix(m.group(1)))
        if P.n != len(names):
            raise ValueError(f"P is {P.n}x{P.n} but there are {len(names)} variables")
        return QuadFormPower(P, int(m.group(2)))
    if text.startswith("expr"):
        rho = parse_polynomial(text[4:], names)
        return Explicit(rho)
    raise ValueError("density must be norm^k, quadform [..] ^a or expr <polynomial>")


def with_alpha(rho: DensitySpec, alpha: int) -> DensitySpec:
    if isinstance(rho, NormPower):
        return NormPower(alpha)
    if isinstance(rho, QuadFormPower):
        return QuadFormPower(rho.P, alpha)
    return rho


def parse_template(text: str, names: tuple[str, ...]) -> tuple[tuple[Polynomial, ...], tuple[Fraction, ...]]:
    """``c1*x2 + c2*x2^3 ; grid: -2..2`` -> monomials in coefficient order, grid."""
    if ";" not in text:
        raise ValueError("template needs '; grid: <values>'")
    body, rest = text.split(";", 1)
    rest = rest.strip()
    if not rest.startswith("grid:"):
        raise ValueError("expected 'grid:' after ';'")
    grid = parse_grid(rest[5:])
    coef_names = sorted(set(re.findall(r"\bc\d+\b", body)), key=lambda s: int(s[1:]))
    if not coef_names:
        raise ValueError("template has no coefficients c1, c2, ...")
    clash = set(coef_names) & set(names)
    if clash:
        raise ValueError(f"coefficient names clash with variables: {sorted(clash)}")
    n = len(names)
    p = parse_polynomial(body, list(names) + coef_names)
    parts: dict[int, dict] = {k: {} for k in range(len(coef_names))}
    for mono, c in p.terms.items():
        cexp = mono[n:]
        if sum(cexp) != 1:
            raise ValueError("template must be linear in the coefficients with no free term")
        k = cexp.index(1)
        parts[k][mono[:n]] = parts[k].get(mono[:n], 0) + c
    return tuple(Polynomial(n, parts[k]) for k in range(len(coef_names))), grid


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_system(text: str) -> SystemFile:
    entries: dict[str, tuple[int, int, str]] = {}
    order: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if ":" not in line:
            raise SysFileError(lineno, 1, "expected 'key: value'")
        key, value = line.split(":", 1)
        key = key.strip()
        if not _NAME.match(key):
            raise SysFileError(lineno, 1, f"bad key {key!r}")
        if key in entries:
            raise SysFileError(lineno, 1, f"duplicate key {key!r}")
        col = raw.index(":") + 2 + (len(value) - len(value.lstrip()))
        entries[key] = (lineno, col, value.strip())
        order.append((key, value.strip()))

    def take(key, default=None):
        return entries.pop(key, (0, 0, default))

    def fail(key_info, exc):
        lineno, col, _ = key_info
        if isinstance(exc, ParseError):
            raise SysFileError(lineno, col + exc.position, exc.message) from exc
        raise SysFileError(lineno, col, str(exc)) from exc

    if "vars" not in entries:
        raise SysFileError(1, 1, "missing 'vars:' line")
    info = take("vars")
    names = tuple(info[2].split())
    if not names or any(not _NAME.match(v) for v in names) or len(set(names)) != len(names):
        raise SysFileError(info[0], info[1], "vars must be distinct identifiers")
    n = len(names)
    sf = SystemFile(names, source_lines=order, digest=hashlib.sha256(text.encode()).hexdigest())

    def poly(key):
        info = take(key)
        try:
            return parse_polynomial(info[2], names)
        except ParseError as exc:
            fail(info, exc)

    def simple(key, conv, attr):
        if key in entries:
            info = take(key)
            try:
                setattr(sf, attr, conv(info[2]))
            except (ValueError, ZeroDivisionError) as exc:
                fail(info, exc)

    simple("mode", str, "mode")
    if sf.mode not in MODES:
        raise SysFileError(0, 0, f"mode must be one of {MODES}")
    simple("radius", float, "radius")
    simple("levels", lambda s: tuple(float(v) for v in s.split(",")), "levels")
    simple("beta", Fraction, "beta")
    simple("alpha", parse_int_range, "alpha")
    simple("seed", int, "seed")
    simple("samples", int, "samples")
    simple("cases", parse_int_range, "cases")
    if any(c not in (1, 2, 3, 4) for c in sf.cases):
        raise SysFileError(0, 0, "cases must be drawn from 1..4")
    if sf.beta < 1:
        raise SysFileError(0, 0, "beta must be >= 1")

    if "region" in entries:
        info = take("region")
        value = info[2]
        if value == "norm":
            sf.region = "norm"
        elif value.startswith("quadform"):
            try:
                sf.region_P = SymMatrix(parse_matrix(value[len("quadform"):]))
            except ValueError as exc:
                fail(info, exc)
            sf.region = "quadform"
        else:
            fail(info, ValueError("region must be 'norm' or 'quadform [..]'"))

    if "rho" in entries:
        info = take("rho")
        sf.rho_text = info[2]
        try:
            sf.rho = parse_density(info[2], names)
        except (ValueError, ParseError) as exc:
            fail(info, exc)

    f_keys = [f"f{i + 1}" for i in range(n)]
    xi_keys = [f"xi{i + 1}" for i in range(n)]
    if any(k in entries for k in f_keys):
        missing = [k for k in f_keys if k not in entries]
        if missing:
            raise SysFileError(0, 0, f"missing component lines: {', '.join(missing)}")
        sf.f = VectorField(names, tuple(poly(k) for k in f_keys))
    if any(k in entries for k in xi_keys):
        missing = [k for k in xi_keys if k not in entries]
        if missing:
            raise SysFileError(0, 0, f"missing component lines: {', '.join(missing)}")
        xi = VectorField(names, tuple(poly(k) for k in xi_keys))
        g_cols = sorted({int(k[len(f"g{i + 1}"):]) for i in range(n) for k in entries if re.fullmatch(rf"g{i + 1}\d+", k)})
        m = max(g_cols) if g_cols else 0
        if m == 0:
            raise SysFileError(0, 0, "control mode needs g<i><j> lines")
        g = [[poly(f"g{i + 1}{j + 1}") if f"g{i + 1}{j + 1}" in entries else Polynomial.zero(n) for j in range(m)] for i in range(n)]
        u = None
        if all(f"u{j + 1}" in entries for j in range(m)):
            u = tuple(poly(f"u{j + 1}") for j in range(m))
        sf.control = ControlSystem(xi, g, u)
        if "u_template" in entries:
            if m != 1:
                raise SysFileError(entries["u_template"][0], 1, "u_template is for single-input systems")
            info = take("u_template")
            try:
                monos, grid = parse_template(info[2], names)
                if sf.alpha:
                    alphas = sf.alpha
                elif isinstance(sf.rho, (NormPower, QuadFormPower)):
                    alphas = (sf.rho.alpha,)
                else:
                    alphas = tuple(range(1, 9))
                sf.template = SynthesisTemplate((monos,), grid, sf.beta, alphas)
            except (ValueError, ParseError) as exc:
                fail(info, exc)
        if sf.mode == "stability":
            sf.mode = "control"
    if sf.f is None and sf.control is None:
        raise SysFileError(0, 0, "no f<i> or xi<i> lines")
    if entries:
        key = next(iter(entries))
        raise SysFileError(entries[key][0], 1, f"unknown key {key!r}")
    return sf


def read_system(path: str) -> SystemFile:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


def parse_matrix_file(text: str) -> list[list[float]]:
    """Whitespace-separated rows; ``#`` comments and blank lines ignored."""
    rows = []
    for raw in text.splitlines():
        line = _strip(raw).replace(",", " ")
        if line:
            rows.append([float(v) for v in line.split()])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError("matrix file must contain a square matrix")
    return rows
