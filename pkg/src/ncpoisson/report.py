"""Verification suites, convergence studies and flow demos.

Every suite returns a :class:`VerificationReport`: a list of named residuals
with tolerances.  Report bodies (everything except the wall time) are a pure
function of the configuration and seed.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import classical as cl
from . import foliation as fol
from . import torus as tor
from .algebra import BUILTIN_ALGEBRAS, center, is_derivation
from .hochschild import Cochain, cohomology_dimension, differential, gerstenhaber, pre_lie
from .poisson import (
    BUILTIN_POISSON,
    center_bracket,
    center_jacobi_residual,
    check_jacobi_witness,
    check_leibniz,
    check_proposition,
    get_poisson_structure,
)

SUITES = ("hochschild", "matrix", "torus", "classical", "foliation")
DENSITIES = ("const", "expsin", "userfourier")
H_PRESETS = ("sin", "cos", "mixed", "const")
CONVERGENCE_CHECKS = ("associativity", "leibniz", "p2witness", "theorem")
# residuals below FLOOR_REL * (size of the terms) are rounding noise
FLOOR_REL = 1e-13


class ConfigError(ValueError):
    pass


# --- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    theta: float = tor.GOLDEN_THETA
    truncation: int = 16
    p: int = 1
    q: int = 2
    grid: int = 32
    refine_grid: int | None = None
    density: str = "expsin"
    coefficients: tuple = ()
    h: str = "sin"
    seed: int = 0
    tol: float | None = None
    samples: int = 100
    triples: int = 50
    x_modes: int | None = None
    y_modes: int = 1

    def __post_init__(self):
        if self.density not in DENSITIES:
            raise ConfigError(f"density must be one of {DENSITIES}")
        if self.h not in H_PRESETS:
            raise ConfigError(f"h must be one of {H_PRESETS}")
        if self.q <= 0 or self.q % 2:
            raise ConfigError("q must be positive and even")
        if self.p < 1 or self.grid < 8 or self.truncation < 4:
            raise ConfigError("need p >= 1, grid >= 8 and truncation >= 4")
        if self.refine_grid is None:
            # the n = 32 -> 48 step of the witness check, scaled with the grid
            object.__setattr__(self, "refine_grid", 3 * self.grid // 2)
        if self.refine_grid and self.refine_grid <= self.grid:
            raise ConfigError("refine_grid must exceed grid (or be 0 to skip)")
        if self.samples < 1 or self.triples < 1:
            raise ConfigError("samples and triples must be positive")
        if self.density == "userfourier" and not self.coefficients:
            raise ConfigError("userfourier density needs coefficients")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["coefficients"] = list(self.coefficients)
        return d

    @classmethod
    def from_mapping(cls, values: dict) -> RunConfig:
        """Build from loosely typed values (strings from files or flags)."""
        kwargs = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(key, types[key], raw)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _coerce(key, type_name, raw):
    if raw is None:
        return None
    try:
        if key == "coefficients":
            data = json.loads(raw) if isinstance(raw, str) else raw
            return tuple(_freeze(t) for t in data)
        if "float" in type_name:
            return float(raw)
        if "int" in type_name:
            return int(raw)
        return str(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def _freeze(term):
    # config values must be hashable for the frozen dataclass
    return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in dict(term).items()))


def _coefficient_dicts(cfg: RunConfig) -> list[dict]:
    return [{k: list(v) if isinstance(v, tuple) else v for k, v in term} for term in cfg.coefficients]


def load_config_file(path: str | Path) -> dict:
    """JSON object, or ``key = value`` lines (an optional section header is ignored)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object")
        return data
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file: {exc}") from None
    out = {}
    for section in parser.sections():
        out.update(parser[section])
    return out


def resolve_config(cli: dict | None = None, path: str | Path | None = None) -> RunConfig:
    """CLI values override the config file, which overrides the defaults."""
    merged = dict(load_config_file(path)) if path else {}
    merged.update({k: v for k, v in (cli or {}).items() if v is not None})
    return RunConfig.from_mapping(merged)


# --- reports ----------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    check: str
    residual: float
    tolerance: float
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.residual) and self.residual <= self.tolerance)

    def as_dict(self) -> dict:
        d = {"check": self.check, "residual": float(self.residual), "tolerance": float(self.tolerance), "pass": self.passed}
        if self.info:
            d["info"] = self.info
        return d


@dataclass
class VerificationReport:
    suite: str
    checks: list[CheckResult]
    config: dict
    seed: int
    wall_time: float = 0.0

    def __post_init__(self):
        self.checks = sorted(self.checks, key=lambda c: c.check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def body(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "config": self.config,
            "pass": self.passed,
            "checks": [c.as_dict() for c in self.checks],
        }

    def body_json(self) -> str:
        return json.dumps(self.body(), sort_keys=True, indent=2)

    def to_json(self) -> str:
        d = self.body()
        d["wall_time"] = self.wall_time
        return json.dumps(d, sort_keys=True, indent=2)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def summary_lines(self) -> list[str]:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.check}  residual={c.residual:.3e}  tol={c.tolerance:.1e}" for c in self.checks]
        lines.append(f"suite {self.suite}: {len(self.checks) - len(self.failures())}/{len(self.checks)} passed")
        return lines


def _tol(cfg: RunConfig, default: float) -> float:
    return cfg.tol if cfg.tol is not None else default


# --- hochschild ---------------------------------------------------------------------

HOCHSCHILD_ALGEBRAS = ("M2", "M3", "CS3", "Ct3")


def hochschild_suite(cfg: RunConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed)
    tol = _tol(cfg, 1e-12)
    out = []
    for name in HOCHSCHILD_ALGEBRAS:
        alg = BUILTIN_ALGEBRAS[name]()
        mu_scale = max(1.0, float(np.abs(alg.structure_constants).max()))
        worst = 0.0
        for i in range(cfg.samples):
            c = Cochain.random(alg, i % 4, rng)
            worst = max(worst, differential(differential(c)).norm() / (c.norm() * mu_scale**2))
        out.append(CheckResult(f"b_squared[{name}]", worst, tol, {"cochains": cfg.samples}))

        worst = 0.0
        # keep the bracket degree <= 4 on the larger algebras
        degrees = [(1, 1), (1, 2), (2, 1), (2, 2), (0, 2), (1, 3), (3, 1)]
        if alg.dim > 6:
            degrees = degrees[:5]
        for u, v in degrees:
            U, V = Cochain.random(alg, u, rng), Cochain.random(alg, v, rng)
            sign = (-1) ** ((u - 1) * (v - 1))
            defect = gerstenhaber(U, V) + gerstenhaber(V, U) * sign
            worst = max(worst, defect.norm() / (U.norm() * V.norm()))
        out.append(CheckResult(f"gerstenhaber_antisymmetry[{name}]", worst, tol))

        worst = 0.0
        for _ in range(5):
            P = Cochain.random(alg, 2, rng)
            defect = gerstenhaber(P, P) - pre_lie(P, P) * 2.0
            worst = max(worst, defect.norm() / P.norm() ** 2)
        out.append(CheckResult(f"self_bracket_twice_pre_lie[{name}]", worst, tol))
    return out


# --- matrix / Hamiltonian derivations ----------------------------------------------------

COHOMOLOGY_EXPECTED = (("M2", 0, 1), ("M2", 1, 0), ("M3", 0, 1), ("M3", 1, 0), ("Ct3", 0, 3), ("Cxy", 0, 9))


def matrix_suite(cfg: RunConfig) -> list[CheckResult]:
    out = []
    for name, k, expected in COHOMOLOGY_EXPECTED:
        d = cohomology_dimension(BUILTIN_ALGEBRAS[name](), k)
        out.append(CheckResult(f"cohomology_H{k}[{name}]", float(abs(d - expected)), 0.0, {"dimension": d, "expected": expected}))
    tol = _tol(cfg, 1e-9)
    for name in BUILTIN_POISSON:
        out.extend(hamiltonian_checks(get_poisson_structure(name), name, tol))
    return out


def hamiltonian_checks(ps, name: str, tol: float = 1e-9) -> list[CheckResult]:
    """Hamiltonian-derivation checks over every pair of a center basis."""
    z = center(ps.algebra)
    deriv = max(is_derivation(ps.algebra, gerstenhaber(ps.pi, Cochain.from_element(c)) * 0.5, mask=ps.safe_pairs).residual for c in z)
    antisym, lie, plus, minus = 0.0, 0.0, 0.0, 0.0
    for c, e in itertools.product(z, repeat=2):
        antisym = max(antisym, (center_bracket(ps, c, e) + center_bracket(ps, e, c)).norm())
        rep = check_proposition(ps, c, e)
        lie, plus, minus = max(lie, rep.lie_derivative), max(plus, rep.commutator), max(minus, rep.commutator_opposite)
    return [
        CheckResult(f"leibniz[{name}]", check_leibniz(ps.pi, ps.safe_triples), tol),
        CheckResult(f"jacobi_witness[{name}]", check_jacobi_witness(ps.pi, ps.pi1, ps.safe_triples), tol),
        CheckResult(f"hamiltonian_is_derivation[{name}]", deriv, tol, {"center_dim": len(z)}),
        CheckResult(f"center_bracket_antisymmetry[{name}]", antisym, tol),
        CheckResult(f"center_bracket_jacobi[{name}]", center_jacobi_residual(ps, z), tol),
        CheckResult(f"lie_derivative_coboundary[{name}]", lie, tol),
        CheckResult(f"commutator_plus_inner[{name}]", plus, tol, {"combination": "[X_c,X_e] + X_{c,e}"}),
        CheckResult(f"commutator_minus_inner[{name}]", minus, tol, {"combination": "[X_c,X_e] - X_{c,e}"}),
    ]


# --- torus ---------------------------------------------------------------------------


def torus_suite(cfg: RunConfig) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed)
    th, N = cfg.theta, cfg.truncation
    worst = {"leibniz_P1": 0.0, "jacobi_P2": 0.0, "associativity": 0.0, "derivation_delta1": 0.0, "derivation_delta2": 0.0}
    inexact = 0
    for _ in range(cfg.triples):
        a = [tor.TorusElement.random(rng, N // 3, th, N) for _ in range(3)]
        b = [tor.TorusElement.random(rng, N // 4, th, N) for _ in range(3)]
        checks = {
            "leibniz_P1": tor.leibniz_check(*a),
            "jacobi_P2": tor.jacobi_check(*b),
            "associativity": tor.associativity_check(*a),
            "derivation_delta1": tor.derivation_check(tor.delta1, a[0], a[1]),
            "derivation_delta2": tor.derivation_check(tor.delta2, a[0], a[1]),
        }
        for key, chk in checks.items():
            worst[key] = max(worst[key], chk.relative)
            inexact += not chk.exact
    tols = {"leibniz_P1": 1e-12, "jacobi_P2": 1e-10, "associativity": 1e-12, "derivation_delta1": 1e-12, "derivation_delta2": 1e-12}
    out = [CheckResult(k, v, _tol(cfg, tols[k]), {"relative": True, "triples": cfg.triples}) for k, v in worst.items()]
    out.append(CheckResult("safe_support_truncation", float(inexact), 0.0, {"inexact_products": inexact}))

    U = tor.TorusElement.monomial(1, 0, th, N)
    V = tor.TorusElement.monomial(0, 1, th, N)
    expected = -8 * math.pi**4
    got = tor.canonical_witness(U, V).coefficient(1, 1)
    out.append(CheckResult("witness_on_generators", abs(got - expected) / abs(expected), 1e-12, {"coefficient_UV": [got.real, got.imag]}))

    emb = tor.embed_as_finite_algebra(2, th)
    out.append(CheckResult("embedded_jacobi_witness", check_jacobi_witness(emb.pi, emb.pi1, emb.safe_triples), _tol(cfg, 1e-10)))
    return out


# --- classical -------------------------------------------------------------------------


def _test_functions():
    f = lambda x: math.sin(x[0]) * math.cos(x[1]) + 0.3 * x[0] * x[-1]  # noqa: E731
    g = lambda x: math.exp(0.2 * x[0]) + x[1] ** 2 * x[-1]  # noqa: E731
    k = lambda x: math.cos(x[0] + 0.5 * x[1]) + 0.1 * x[-1] ** 3  # noqa: E731
    return f, g, k


def fd_convergence_order(steps=(0.1, 0.05)) -> tuple[float, list[float]]:
    """Observed order of the canonical bracket of sin(x)cos(y), exp(x)y^2 against its closed form."""
    f = lambda x: math.sin(x[0]) * math.cos(x[1])  # noqa: E731
    g = lambda x: math.exp(x[0]) * x[1] ** 2  # noqa: E731

    def exact(x):
        fx, fy = math.cos(x[0]) * math.cos(x[1]), -math.sin(x[0]) * math.sin(x[1])
        gx, gy = math.exp(x[0]) * x[1] ** 2, 2 * math.exp(x[0]) * x[1]
        return fx * gy - fy * gx

    pts = cl.sample_points(2, 20, seed=7)
    lam = cl.canonical_bivector(2)
    errs = [max(abs(cl.poisson_bracket(f, g, lam, h)(x) - exact(x)) for x in pts) for h in steps]
    return math.log(errs[0] / errs[1]) / math.log(steps[0] / steps[1]), errs


def classical_suite(cfg: RunConfig) -> list[CheckResult]:
    out = []
    pts2 = cl.sample_points(2, cfg.samples, seed=cfg.seed)
    pts3 = cl.sample_points(3, cfg.samples, seed=cfg.seed)
    pts4 = cl.sample_points(4, cfg.samples, seed=cfg.seed)
    tol9 = _tol(cfg, 1e-9)
    const = max(cl.max_jacobiator(cl.canonical_bivector(2), pts2), cl.max_jacobiator(cl.canonical_bivector(4), pts4))
    out.append(CheckResult("schouten_constant", const, tol9))
    out.append(CheckResult("schouten_so3", cl.max_jacobiator(cl.so3_bivector, pts3), tol9))

    f, g, k = _test_functions()
    tol6 = _tol(cfg, 1e-6)
    lam = cl.so3_bivector
    br = lambda u, v: cl.poisson_bracket(u, v, lam)  # noqa: E731
    gk = lambda x: g(x) * k(x)  # noqa: E731
    pts = pts3[: min(cfg.samples, 30)]
    leib = max(abs(br(f, gk)(x) - g(x) * br(f, k)(x) - br(f, g)(x) * k(x)) for x in pts)
    jac = max(abs(br(f, br(g, k))(x) + br(g, br(k, f))(x) + br(k, br(f, g))(x)) for x in pts)
    out.append(CheckResult("bracket_leibniz", leib, tol6))
    out.append(CheckResult("bracket_jacobi", jac, tol6))
    order, errs = fd_convergence_order()
    out.append(CheckResult("fd_convergence_order", abs(order - 4.0), 0.5, {"observed_order": order, "errors": errs}))

    harm = cl.get_system("harmonic")
    res = cl.integrate_flow(harm.vector_field(), [1.0, 0.0], 2 * math.pi, 1e-2, harm.conserved["energy"])
    out.append(CheckResult("harmonic_closure", float(np.abs(res.states[-1] - [1.0, 0.0]).max()), _tol(cfg, 1e-8), {"energy_drift": res.drift}))
    so3 = cl.get_system("so3star")
    res = cl.integrate_flow(so3.vector_field(), [0.6, 0.0, 0.8], 10.0, 1e-2, so3.conserved["casimir"])
    out.append(CheckResult("so3_casimir_drift", res.drift, _tol(cfg, 1e-8)))

    fit2 = cl.fit_p2_normalization(f, g, k, cl.canonical_bivector(2), cl.flat_connection(2), pts2[:20])
    fit4 = cl.fit_p2_normalization(f, g, k, cl.canonical_bivector(4), cl.flat_connection(4), pts4[:10])
    out.append(CheckResult("p2_witness_fitted[2d]", fit2.residual, tol6, {"normalization": fit2.normalization, "unscaled_residual": fit2.unscaled_residual}))
    out.append(CheckResult("p2_witness_fitted[4d]", fit4.residual, tol6, {"normalization": fit4.normalization, "unscaled_residual": fit4.unscaled_residual}))
    return out


# --- foliation ---------------------------------------------------------------------------


def build_model(cfg: RunConfig, n: int | None = None) -> fol.FoliatedTorusModel:
    n = cfg.grid if n is None else n
    return fol.FoliatedTorusModel.build(cfg.p, cfg.q, n, n, cfg.density, _coefficient_dicts(cfg))


def hamiltonian_preset(model: fol.FoliatedTorusModel, name: str) -> fol.BaseFunction:
    ys = model.y_grid()
    tp = 2 * math.pi
    values = {
        "sin": lambda: np.sin(tp * ys[0]),
        "cos": lambda: np.cos(tp * ys[1]),
        "mixed": lambda: np.sin(tp * ys[0]) * np.cos(tp * ys[1]) + 0.5 * np.cos(tp * (ys[0] + ys[1])),
        "const": lambda: np.ones(model.y_shape),
    }[name]()
    return fol.BaseFunction(model, values)


def sample_function_on_m(model: fol.FoliatedTorusModel) -> np.ndarray:
    """a(x, y) = cos 2 pi y_2 + 1/2 sin 2 pi (x_1 + y_1)."""
    xs, ys = model.m_grid()
    return np.cos(2 * math.pi * ys[1]) + 0.5 * np.sin(2 * math.pi * (xs[0] + ys[0]))


def _kernels(cfg, model, count=3, hermitian=False, x_modes=None, y_modes=None):
    rng = np.random.default_rng(cfg.seed)
    xm = cfg.x_modes if x_modes is None else x_modes
    ym = cfg.y_modes if y_modes is None else y_modes
    return [fol.random_kernel(model, rng, xm, ym, hermitian=hermitian) for _ in range(count)]


def p2_with_scale(ks) -> tuple[float, float]:
    pb = fol.poisson_bracket_kernels
    scale = max(pb(ks[0], pb(ks[1], ks[2])).norm(), pb(pb(ks[0], ks[1]), ks[2]).norm())
    return fol.p2_residual(*ks), scale


def foliation_suite(cfg: RunConfig) -> list[CheckResult]:
    m = build_model(cfg)
    k1, k2, k3 = _kernels(cfg, m)
    h = hamiltonian_preset(m, cfg.h)
    a = sample_function_on_m(m)
    out = [
        CheckResult("convolution_associativity", fol.associativity_residual(k1, k2, k3), _tol(cfg, 1e-10)),
        CheckResult("involution_antihomomorphism", fol.involution_residual(k1, k2), _tol(cfg, 1e-12)),
        CheckResult("transverse_leibniz", fol.leibniz_residual(k1, k2), _tol(cfg, 1e-9)),
        CheckResult("bracket_cocycle_P1", fol.p1_residual(k1, k2, k3), _tol(cfg, 1e-9)),
        CheckResult("lemma", fol.check_lemma(h, a), _tol(cfg, 1e-12)),
        CheckResult("hamiltonian_field_preserves_h", float(np.abs(fol.hamiltonian_field(h).apply(h)).max()), _tol(cfg, 1e-10)),
        CheckResult("second_differential_symmetry", fol.second_differential_asymmetry(k1), _tol(cfg, 1e-9)),
    ]
    rep = fol.check_main_theorem(h, k1, a, tol=_tol(cfg, 1e-9))
    out.append(CheckResult("main_theorem", max(rep.residual, rep.function_residual), rep.tolerance, {"kernel_residual": rep.residual, "function_residual": rep.function_residual}))

    s1, s2 = _kernels(cfg, m, 2, hermitian=True)
    flip = fol.involution(fol.poisson_bracket_kernels(s1, s2)) + fol.poisson_bracket_kernels(s2, s1)
    out.append(CheckResult("bracket_antisymmetry_selfadjoint", flip.norm(), _tol(cfg, 1e-9)))

    L = lambda k: fol.lie_derivative_operator(h, k)  # noqa: E731
    der = fol.convolve(L(k1), k2) + fol.convolve(k1, L(k2)) - L(fol.convolve(k1, k2))
    out.append(CheckResult("lie_derivative_derivation", der.norm(), _tol(cfg, 1e-9)))

    funcs = [a, np.cos(2 * math.pi * m.m_grid()[1][0]), np.ones(m.m_shape)]
    elems = [fol.EnlargedElement.of(m, k, f) for k, f in zip((k1, k2, k3), funcs)]
    out.append(CheckResult("extended_bracket_P1", fol.extended_p1_residual(*elems), _tol(cfg, 1e-9)))

    r_coarse, scale = p2_with_scale([k1, k2, k3])
    out.append(CheckResult("witness_P2", r_coarse, _tol(cfg, 1e-7), {"grid": cfg.grid, "term_scale": scale}))
    if cfg.refine_grid:
        mf = build_model(cfg, cfg.refine_grid)
        r_fine, scale_f = p2_with_scale(_kernels(cfg, mf))
        floor = FLOOR_REL * scale_f
        out.append(CheckResult(
            "witness_P2_refinement",
            r_fine,
            max(r_coarse, floor),
            {"grid": cfg.refine_grid, "coarse_residual": r_coarse, "rounding_floor": floor},
        ))
    return out


# --- runner -------------------------------------------------------------------------

SUITE_FUNCS: dict[str, Callable[[RunConfig], list[CheckResult]]] = {
    "hochschild": hochschild_suite,
    "matrix": matrix_suite,
    "torus": torus_suite,
    "classical": classical_suite,
    "foliation": foliation_suite,
}


def run_suite(name: str, cfg: RunConfig | None = None) -> VerificationReport:
    cfg = RunConfig() if cfg is None else cfg
    if name != "all" and name not in SUITE_FUNCS:
        raise ConfigError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    start = time.perf_counter()
    if name == "all":
        checks = [dataclasses.replace(c, check=f"{s}.{c.check}") for s in SUITES for c in SUITE_FUNCS[s](cfg)]
    else:
        checks = SUITE_FUNCS[name](cfg)
    return VerificationReport(name, checks, cfg.as_dict(), cfg.seed, time.perf_counter() - start)


# --- convergence -------------------------------------------------------------------------


def analytic_kernel(model: fol.FoliatedTorusModel) -> tuple[fol.GroupoidKernel, np.ndarray]:
    """k = exp(cos 2 pi (x_1 - x_1') + 1/2 sin 2 pi (y_1 + x_1) + 3/10 cos 2 pi y_2)
    and its exact y-gradient, shape (q,) + kernel_shape.  Not band-limited."""
    p, q = model.p, model.q
    rx = np.arange(model.n_x) / model.n_x
    ry = np.arange(model.n_y) / model.n_y
    grids = np.meshgrid(*([rx] * (2 * p) + [ry] * q), indexing="ij")
    x, xp, y1, y2 = grids[0], grids[p], grids[2 * p], grids[2 * p + 1]
    tp = 2 * math.pi
    k = np.exp(np.cos(tp * (x - xp)) + 0.5 * np.sin(tp * (y1 + x)) + 0.3 * np.cos(tp * y2))
    grad = np.zeros((q,) + k.shape)
    grad[0] = k * 0.5 * tp * np.cos(tp * (y1 + x))
    grad[1] = -k * 0.3 * tp * np.sin(tp * y2)
    return fol.GroupoidKernel(model, k), grad


def _theorem_against_exact(model, h_name) -> tuple[float, float]:
    """X_h(k) from the bracket vs L k built from the exact derivative of k."""
    h = hamiltonian_preset(model, h_name)
    k, grad = analytic_kernel(model)
    xh = fol.hamiltonian_derivation(h, fol.EnlargedElement.of(model, k)).kernel
    v = fol.hamiltonian_field(h).components
    q, kshape = model.q, model.kernel_shape
    v_k = v.reshape((q,) + (1,) * (2 * model.p) + model.y_shape)
    kappa = fol.mean_curvature_form(model)
    kf = kappa.reshape((q, model.X, model.Y))
    half = 0.5 * (kf[:, :, None, :] + kf[:, None, :, :])
    half = half.reshape((q,) + kshape)
    exact = np.sum(v_k * (grad + half * k.values), axis=0)
    return float(np.abs(xh.values - exact).max()), float(np.abs(exact).max())


def _study_point(check: str, cfg: RunConfig, n: int) -> tuple[float, float]:
    """(residual, scale of the compared terms) at grid n, with grid-independent data."""
    m = build_model(cfg, n)
    if check == "theorem":
        return _theorem_against_exact(m, cfg.h)
    ks = _kernels(cfg, m, 3, x_modes=2)
    if check == "associativity":
        c = fol.convolve(fol.convolve(ks[0], ks[1]), ks[2])
        return fol.associativity_residual(*ks), c.norm()
    if check == "leibniz":
        return fol.leibniz_residual(ks[0], ks[1]), fol.transverse_differential(fol.convolve(ks[0], ks[1])).norm()
    if check == "p2witness":
        return p2_with_scale(ks)
    raise ConfigError(f"unknown convergence check {check!r}; choose from {CONVERGENCE_CHECKS}")


@dataclass
class ConvergenceTable:
    check: str
    grids: list[int]
    residuals: list[float]
    floors: list[float]

    @property
    def orders(self) -> list[float | None]:
        """Empirical algebraic order log(r_i / r_{i+1}) / log(n_{i+1} / n_i)."""
        out: list[float | None] = [None]
        for (n0, r0), (n1, r1) in zip(zip(self.grids, self.residuals), zip(self.grids[1:], self.residuals[1:])):
            out.append(math.log(r0 / r1) / math.log(n1 / n0) if r0 > 0 and r1 > 0 else None)
        return out

    @property
    def monotone(self) -> bool:
        """Each refinement gains a factor 10 or lands at the rounding floor."""
        return all(r1 <= r0 / 10 or r1 <= f1 for r0, r1, f1 in zip(self.residuals, self.residuals[1:], self.floors[1:]))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["grid", "residual", "floor", "order"])
            for n, r, f, o in zip(self.grids, self.residuals, self.floors, self.orders):
                w.writerow([n, repr(r), repr(f), "" if o is None else repr(o)])

    def as_dict(self) -> dict:
        return {"check": self.check, "grids": self.grids, "residuals": self.residuals, "floors": self.floors, "orders": self.orders, "monotone": self.monotone}


def convergence_study(check: str, grids, cfg: RunConfig | None = None) -> ConvergenceTable:
    cfg = RunConfig() if cfg is None else cfg
    if check not in CONVERGENCE_CHECKS:
        raise ConfigError(f"unknown convergence check {check!r}; choose from {CONVERGENCE_CHECKS}")
    grids = [int(n) for n in grids]
    if grids != sorted(grids) or min(grids) < 8:
        raise ConfigError("grids must be increasing and at least 8")
    res, floors = [], []
    for n in grids:
        r, scale = _study_point(check, cfg, n)
        res.append(r)
        floors.append(FLOOR_REL * max(1.0, scale))
    return ConvergenceTable(check, grids, res, floors)


# --- flows ------------------------------------------------------------------------------


def flow_demo(system: str, x0, T: float, dt: float, out: str | Path | None = None, user_spec=None, record_every: int = 1) -> dict:
    """Integrate a built-in Hamiltonian system; optionally write the trajectory CSV."""
    sysm = cl.get_system(system, user_spec)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sysm.dim,):
        raise cl.ClassicalError(f"{system} needs an initial point of dimension {sysm.dim}")
    res = cl.integrate_flow(sysm.vector_field(), x0, T, dt, record_every=record_every)
    drifts = {}
    for name, fn in sysm.conserved.items():
        vals = np.array([fn(s) for s in res.states])
        drifts[name] = float(np.abs(vals - vals[0]).max() / max(abs(vals[0]), 1e-300))
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            names = list(sysm.conserved)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(sysm.dim)] + names)
            for t, s in zip(res.times, res.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s] + [repr(float(sysm.conserved[nm](s))) for nm in names])
    return {
        "system": system,
        "T": T,
        "dt": dt,
        "recorded_points": len(res.times),
        "final_state": res.states[-1].tolist(),
        "return_distance": float(np.abs(res.states[-1] - x0).max()),
        "drift": drifts,
    }
