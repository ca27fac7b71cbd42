"""Numerical maximisation of the postselected CHSH value.

Measurements enter through Delta = M+ - M-, constrained by -M <= Delta <= M
at fixed success operator M. With the state fixed, B is linear in each
party's Deltas (the pair efficiencies depend on M only), so each party's
update is exact:

    Delta = M^{1/2} sign(M^{1/2} E M^{1/2}) M^{1/2}

with E the party's effective operator. The state is updated by projected
gradient ascent on the ratio sum. Alternating the two gives a see-saw.

Separable maxima use mixtures of up to four product pure states, optimised
with analytic gradients by BFGS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import CompleteLossError, NumericalError, OutOfDomainError
from .kernels import pure_ratio_value_grad
from .operators import HermitianOperator, PovmElement, psd_sqrt
from .scenario import (
    CHSH_TERMS,
    LOSS_FLOOR,
    BellScenario,
    DichotomicMeasurement,
    PartySettings,
    bell_postselected,
)

STATE_CLASSES = ("entangled_pure", "product_pure", "separable_mixture")
MONOTONE_SLACK = 1e-9
MAX_STEP_FAILURES = 10
MAX_COMPONENTS = 4

_SIGNS = np.array([s for _, _, s in CHSH_TERMS])
_PAIRS = [(int(a), int(b)) for a, b, _ in CHSH_TERMS]


@dataclass(frozen=True)
class OptimizationConfig:
    restarts: int = 32
    max_iterations: int = 500
    convergence_tol: float = 1e-10
    seed: int = 42
    state_class: str = "entangled_pure"

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 1:
            raise OutOfDomainError("restarts and max_iterations must be positive")
        if not self.convergence_tol > 0:
            raise OutOfDomainError("convergence_tol must be positive")
        if self.state_class not in STATE_CLASSES:
            raise OutOfDomainError(f"state_class must be one of {STATE_CLASSES}")

    def rng(self, restart: int) -> np.random.Generator:
        return np.random.default_rng(self.seed ^ restart)


@dataclass(frozen=True)
class OptimizationResult:
    best_B: float
    argmax: BellScenario
    restart_values: tuple
    iterations_used: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.best_B != max(self.restart_values):
            raise NumericalError("best_B must equal the largest restart value")


# --- building blocks -------------------------------------------------------


def _hsign(x: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
    return (v * np.where(w >= 0, 1.0, -1.0)) @ v.conj().T


def optimal_delta(success_root: np.ndarray, effective: np.ndarray) -> np.ndarray:
    """argmax Tr(Delta E) over -M <= Delta <= M, given M^{1/2}."""
    r = success_root
    return r @ _hsign(r @ effective @ r) @ r


def _random_delta(root: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = root.shape[0]
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return root @ _hsign(z + z.conj().T) @ root


class _Problem:
    """Fixed success operators; Deltas and state vary."""

    def __init__(self, success_ops: Sequence):
        if len(success_ops) != 4:
            raise OutOfDomainError("need four success operators (M_A, M_a, M_B, M_b)")
        ops = [np.asarray(PovmElement(m).matrix) for m in success_ops]
        self.ma, self.mb = ops[:2], ops[2:]
        self.da, self.db = self.ma[0].shape[0], self.mb[0].shape[0]
        if self.ma[1].shape[0] != self.da or self.mb[1].shape[0] != self.db:
            raise OutOfDomainError("each party's success operators must share a dimension")
        self.ra = [np.asarray(psd_sqrt(m).matrix) for m in self.ma]
        self.rb = [np.asarray(psd_sqrt(m).matrix) for m in self.mb]
        self.m_stack = np.array([np.kron(self.ma[a], self.mb[b]) for a, b in _PAIRS])

    def d_stack(self, dA, dB) -> np.ndarray:
        return np.array([np.kron(dA[a], dB[b]) for a, b in _PAIRS])

    def efficiencies(self, rho: np.ndarray) -> np.ndarray:
        eff = np.einsum("kij,ji->k", self.m_stack, rho).real
        if np.any(eff < LOSS_FLOOR):
            raise CompleteLossError("a setting pair never succeeds on this state")
        return eff

    def value(self, rho, dA, dB) -> float:
        num = np.einsum("kij,ji->k", self.d_stack(dA, dB), rho).real
        return float(np.sum(_SIGNS * num / self.efficiencies(rho)))

    def delta_step(self, rho, dA, dB):
        """Exact update of Bob's Deltas, then Alice's."""
        eff = self.efficiencies(rho)
        r4 = rho.reshape(self.da, self.db, self.da, self.db)
        dB = list(dB)
        for b in range(2):
            e = sum(
                _SIGNS[k] / eff[k] * np.einsum("ij,jaib->ab", dA[a], r4)
                for k, (a, bb) in enumerate(_PAIRS)
                if bb == b
            )
            dB[b] = optimal_delta(self.rb[b], e)
        dA = list(dA)
        for a in range(2):
            e = sum(
                _SIGNS[k] / eff[k] * np.einsum("ij,ajbi->ab", dB[b], r4)
                for k, (aa, b) in enumerate(_PAIRS)
                if aa == a
            )
            dA[a] = optimal_delta(self.ra[a], e)
        return dA, dB

    def scenario(self, rho, dA, dB) -> BellScenario:
        def party(ms, ds):
            return PartySettings(
                *(DichotomicMeasurement.from_success_and_delta(m, d) for m, d in zip(ms, ds))
            )

        return BellScenario(HermitianOperator(rho), party(self.ma, dA), party(self.mb, dB))


def _pure_value_grad(problem: _Problem, psi, D):
    return pure_ratio_value_grad(psi, D, problem.m_stack, _SIGNS)


def _mixed_value_grad(problem: _Problem, x: np.ndarray, D: np.ndarray):
    """Value and gradient for rho proportional to X X^dagger (X is d x r)."""
    dx = np.einsum("kij,jr->kir", D, x)
    mx = np.einsum("kij,jr->kir", problem.m_stack, x)
    num = np.einsum("ir,kir->k", x.conj(), dx).real
    den = np.einsum("ir,kir->k", x.conj(), mx).real
    value = float(np.sum(_SIGNS * num / den))
    grad = np.einsum("k,kir->ir", 2 * _SIGNS / den, dx) - np.einsum(
        "k,kir->ir", 2 * _SIGNS * num / den**2, mx
    )
    return value, grad


def _state_step(problem, x, D, step, rank):
    """One projected-gradient ascent step with halving; returns (x, value, step, ok)."""
    if rank == 1:
        cur, g = _pure_value_grad(problem, x, D)
        g = g - np.vdot(x, g).real * x
    else:
        cur, g = _mixed_value_grad(problem, x, D)
        g = g - np.vdot(x.ravel(), g.ravel()).real * x
    for _ in range(MAX_STEP_FAILURES):
        trial = x + step * g
        trial = trial / np.linalg.norm(trial)
        val = (_pure_value_grad if rank == 1 else _mixed_value_grad)(problem, trial, D)[0]
        if val > cur:
            return trial, val, step * 1.5, True
        step *= 0.5
    return x, cur, step, False


def _density(x: np.ndarray) -> np.ndarray:
    x = x.reshape(x.shape[0], -1)
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def _seesaw_run(problem: _Problem, cfg: OptimizationConfig, rng, rank: int = 1):
    d = problem.da * problem.db
    shape = (d,) if rank == 1 else (d, rank)
    x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    x = x / np.linalg.norm(x)
    dA = [_random_delta(r, rng) for r in problem.ra]
    dB = [_random_delta(r, rng) for r in problem.rb]
    rho = _density(x)
    best = problem.value(rho, dA, dB)
    step, stalls, it = 0.5, 0, 0
    for it in range(1, cfg.max_iterations + 1):
        start = best
        dA, dB = problem.delta_step(rho, dA, dB)
        after = problem.value(rho, dA, dB)
        if after < best - MONOTONE_SLACK * max(1.0, abs(best)):
            raise NumericalError(f"Delta step decreased B from {best!r} to {after!r}")
        D = problem.d_stack(dA, dB)
        x, best, step, moved = _state_step(problem, x, D, step, rank)
        best = max(best, after)
        rho = _density(x)
        if best - start < cfg.convergence_tol:
            stalls += 1
            if stalls >= 2 or not moved:
                break
        else:
            stalls = 0
    converged = it < cfg.max_iterations
    return problem.scenario(rho, dA, dB), it, converged


def _collect(runs, extra=None) -> OptimizationResult:
    values = [bell_postselected(s) for s, _, _ in runs]
    i = int(np.argmax(values))
    diag = {
        "converged": [bool(c) for _, _, c in runs],
        "iterations": [int(n) for _, n, _ in runs],
        "best_restart": i,
    }
    if extra:
        diag.update(extra)
    return OptimizationResult(
        best_B=values[i],
        argmax=runs[i][0],
        restart_values=tuple(values),
        iterations_used=int(sum(n for _, n, _ in runs)),
        diagnostics=diag,
    )


# --- public entry points ------------------------------------------------------


def maximize_bell_fixed_loss(success_ops, cfg: OptimizationConfig | None = None) -> OptimizationResult:
    """Best postselected B over pure states and Deltas at fixed (M_A, M_a, M_B, M_b)."""
    cfg = cfg or OptimizationConfig()
    problem = _Problem(success_ops)
    runs = [_seesaw_run(problem, cfg, cfg.rng(i)) for i in range(cfg.restarts)]
    return _collect(runs)


def mixed_state_spot_check(success_ops, cfg: OptimizationConfig | None = None, rank: int = 2):
    """Same search over rank-`rank` mixed states; guards the pure-state restriction."""
    cfg = cfg or OptimizationConfig()
    problem = _Problem(success_ops)
    runs = [_seesaw_run(problem, cfg, cfg.rng(i), rank=rank) for i in range(cfg.restarts)]
    return _collect(runs, {"rank": rank})


def fig1_success_ops(p: float):
    """Lossless everywhere except Bob's upper setting, M_B = diag(1, p)."""
    if not 0 < p <= 1:
        raise OutOfDomainError(f"p must lie in (0, 1], got {p}")
    eye = np.eye(2)
    return (eye, eye, np.diag([1.0, p]), eye)


@dataclass(frozen=True)
class ScanPoint:
    p: float
    best_B: float
    result: OptimizationResult


def scan_fixed_loss(p_grid, cfg: OptimizationConfig | None = None) -> list[ScanPoint]:
    cfg = cfg or OptimizationConfig()
    out = []
    for p in p_grid:
        res = maximize_bell_fixed_loss(fig1_success_ops(p), cfg)
        out.append(ScanPoint(float(p), res.best_B, res))
    return out


def envelope_violations(points: Sequence[ScanPoint], noise: float = 2e-3) -> list[float]:
    """p values where best_B rises with p by more than `noise`."""
    pts = sorted(points, key=lambda s: s.p)
    return [b.p for a, b in zip(pts, pts[1:]) if b.best_B > a.best_B + noise]


def threshold_p(points: Sequence[ScanPoint], margin: float = 1e-6) -> float | None:
    """Smallest p from which on best_B stays within `margin` of 2 sqrt(2)."""
    limit = 2 * math.sqrt(2) + margin
    pts = sorted(points, key=lambda s: s.p)
    above = [s.p for s in pts if s.best_B > limit]
    if not above:
        return pts[0].p if pts else None
    later = [s.p for s in pts if s.p > max(above)]
    return later[0] if later else None


# --- separable states ---------------------------------------------------------


class _SeparableObjective:
    """Negative B over mixtures of n product pure states, with gradient."""

    def __init__(self, s: BellScenario, n: int):
        self.n = n
        alice, bob = s.alice, s.bob
        self.da, self.db = alice.dim, bob.dim
        # local operator stacks: Delta_upper, Delta_lower, M_upper, M_lower
        self.ha = np.array([np.asarray(x) for x in _local_ops(alice)])
        self.hb = np.array([np.asarray(x) for x in _local_ops(bob)])

    def unpack(self, p):
        n, da, db = self.n, self.da, self.db
        z = p[:n]
        xa = p[n : n + 2 * n * da].reshape(n, 2, da)
        xb = p[n + 2 * n * da :].reshape(n, 2, db)
        return z, xa[:, 0] + 1j * xa[:, 1], xb[:, 0] + 1j * xb[:, 1]

    def __call__(self, p):
        z, a, b = self.unpack(p)
        w = np.exp(z - z.max())
        w /= w.sum()
        na = np.einsum("ni,ni->n", a.conj(), a).real
        nb = np.einsum("ni,ni->n", b.conj(), b).real
        ha_a = np.einsum("qij,nj->nqi", self.ha, a)
        hb_b = np.einsum("qij,nj->nqi", self.hb, b)
        ea = np.einsum("ni,nqi->nq", a.conj(), ha_a).real / na[:, None]
        eb = np.einsum("ni,nqi->nq", b.conj(), hb_b).real / nb[:, None]
        ia = np.array([a_ for a_, _ in _PAIRS])
        ib = np.array([b_ for _, b_ in _PAIRS])
        pn = ea[:, ia] * eb[:, ib]  # (n, 4)
        pd = ea[:, 2 + ia] * eb[:, 2 + ib]
        num, den = w @ pn, w @ pd
        if np.any(den < LOSS_FLOOR):
            return 1e6, np.zeros_like(p)
        value = float(np.sum(_SIGNS * num / den))
        gn, gd = _SIGNS / den, -_SIGNS * num / den**2
        gw = pn @ gn + pd @ gd
        gz = w * (gw - w @ gw)
        gea = np.zeros_like(ea)
        geb = np.zeros_like(eb)
        for k, (i, j) in enumerate(_PAIRS):
            gea[:, i] += w * gn[k] * eb[:, j]
            geb[:, j] += w * gn[k] * ea[:, i]
            gea[:, 2 + i] += w * gd[k] * eb[:, 2 + j]
            geb[:, 2 + j] += w * gd[k] * ea[:, 2 + i]
        # d<H>/dx = 2 (H x - <H> x) / |x|^2, as (Re, Im) components
        grad_a = np.einsum("nq,nqi->ni", gea, ha_a - ea[:, :, None] * a[:, None, :]) * (
            2 / na[:, None]
        )
        grad_b = np.einsum("nq,nqi->ni", geb, hb_b - eb[:, :, None] * b[:, None, :]) * (
            2 / nb[:, None]
        )
        grad = np.concatenate(
            [
                gz,
                np.stack([grad_a.real, grad_a.imag], axis=1).ravel(),
                np.stack([grad_b.real, grad_b.imag], axis=1).ravel(),
            ]
        )
        return -value, -grad

    def state(self, p) -> np.ndarray:
        z, a, b = self.unpack(p)
        w = np.exp(z - z.max())
        w /= w.sum()
        rho = 0
        for wi, ai, bi in zip(w, a, b):
            v = np.kron(ai / np.linalg.norm(ai), bi / np.linalg.norm(bi))
            rho = rho + wi * np.outer(v, v.conj())
        return 0.5 * (rho + rho.conj().T)


def _local_ops(party: PartySettings):
    return (party.upper.delta, party.lower.delta, party.upper.success, party.lower.success)


def maximize_bell_separable(
    s: BellScenario, cfg: OptimizationConfig | None = None, max_components: int = MAX_COMPONENTS
) -> OptimizationResult:
    """Best postselected B over separable states for the measurements of `s`.

    Product pure states are searched first, then mixtures of 2..max_components
    product states; the state of `s` is ignored. Restart i of the j-component
    pass uses seed ``seed ^ (j * restarts + i)``.
    """
    cfg = cfg or OptimizationConfig(state_class="separable_mixture")
    counts = [1] if cfg.state_class == "product_pure" else range(1, max_components + 1)
    runs, per_class = [], {}
    for n in counts:
        obj = _SeparableObjective(s, n)
        size = n + 2 * n * (obj.da + obj.db)
        best_n = -math.inf
        for i in range(cfg.restarts):
            rng = cfg.rng((n - 1) * cfg.restarts + i)
            x0 = rng.normal(size=size)
            x0[:n] = 0.0
            res = minimize(obj, x0, jac=True, method="BFGS", options={"maxiter": cfg.max_iterations, "gtol": 1e-9})
            scen = BellScenario(HermitianOperator(obj.state(res.x)), s.alice, s.bob)
            runs.append((scen, int(res.nit), bool(res.success) or res.status == 2))
            best_n = max(best_n, -float(res.fun))
        per_class[n] = best_n
    return _collect(runs, {"best_by_components": per_class})


# --- optimised filter scheme ----------------------------------------------------


def _fixed_state_seesaw(problem: _Problem, rho, dA, dB, max_iter=200, tol=1e-12):
    best = problem.value(rho, dA, dB)
    for _ in range(max_iter):
        dA, dB = problem.delta_step(rho, dA, dB)
        val = problem.value(rho, dA, dB)
        if val - best < tol:
            best = max(best, val)
            break
        best = val
    return best, dA, dB


@dataclass(frozen=True)
class TradeoffPoint:
    kappa: float
    angles: tuple
    B_ent: float
    B_sep: float
    eta: float
    setting_etas: tuple
    lhv_max: float
    scenario: BellScenario


def _rescale(warm, problem):
    """Map Deltas M^{1/2} V M^{1/2} onto new success operators, keeping V."""
    if "ra" not in warm:
        return warm["dA"], warm["dB"]

    def move(ds, old_roots, new_roots):
        out = []
        for d, r_old, r_new in zip(ds, old_roots, new_roots):
            inv = np.linalg.pinv(r_old)
            v = inv @ d @ inv
            w, u = np.linalg.eigh(0.5 * (v + v.conj().T))
            v = (u * np.clip(w, -1, 1)) @ u.conj().T
            out.append(r_new @ v @ r_new)
        return out

    return move(warm["dA"], warm["ra"], problem.ra), move(warm["dB"], warm["rb"], problem.rb)


def optimize_filter_angles(
    kappa: float, cfg: OptimizationConfig | None = None, perturbations: int = 0, symmetric: bool = True
):
    """Maximise B on the scheme state over the filter angles and all Deltas.

    Success operators are those of the filter R(theta) at this kappa; for each
    angle choice the Deltas are found by the fixed-state see-saw, warm-started
    from the previous evaluation. B only depends on Alice-Bob angle sums, so
    by default both parties share angles (theta_A = phi_B, theta_a = phi_b),
    which removes the flat direction that would otherwise leave eta undefined.
    """
    from .schemes import KappaScheme, filter_measurement, optimal_theta, scheme_state

    cfg = cfg or OptimizationConfig()
    rho = np.asarray(scheme_state(kappa))
    theta, _ = optimal_theta(kappa)
    start = np.array(KappaScheme.symmetric(kappa, theta).angles)

    warm, best = {}, {"val": -math.inf}

    def evaluate(angles, reset=False):
        ms = [filter_measurement(kappa, t) for t in angles]
        problem = _Problem([m.success for m in ms])
        if reset or not warm:
            warm.clear()
            warm["dA"] = [np.asarray(ms[0].delta), np.asarray(ms[1].delta)]
            warm["dB"] = [np.asarray(ms[2].delta), np.asarray(ms[3].delta)]
        # start from the previous optimum carried over to the new success operators
        val, dA, dB = _fixed_state_seesaw(problem, rho, *_rescale(warm, problem))
        warm.update(dA=dA, dB=dB, ra=problem.ra, rb=problem.rb)
        if val > best["val"]:
            best.update(val=val, angles=tuple(float(a) for a in angles), scenario=problem.scenario(rho, dA, dB))
        return val

    def expand(x):
        return (x[0], x[1], x[0], x[1]) if symmetric else tuple(x)

    start = start[:2] if symmetric else start
    rng = cfg.rng(0)
    starts = [start] + [start + rng.normal(scale=0.2, size=start.size) for _ in range(perturbations)]
    for x0 in starts:
        evaluate(expand(x0), reset=True)
        minimize(
            lambda a: -evaluate(expand(a)),
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 1500},
        )
    return best["angles"], best["scenario"]


def _separable_cfg(cfg: OptimizationConfig) -> OptimizationConfig:
    return OptimizationConfig(
        restarts=max(4, cfg.restarts // 4),
        max_iterations=cfg.max_iterations,
        seed=cfg.seed,
        state_class="separable_mixture",
    )


def _point(kappa: float, angles, scen: BellScenario, cfg: OptimizationConfig) -> TradeoffPoint:
    from .schemes import KappaScheme, lhv_max_given_eta

    scheme = KappaScheme(kappa, *angles)
    eta = scheme.eta()
    return TradeoffPoint(
        kappa=kappa,
        angles=tuple(angles),
        B_ent=bell_postselected(scen),
        B_sep=maximize_bell_separable(scen, _separable_cfg(cfg)).best_B,
        eta=eta,
        setting_etas=scheme.setting_etas(),
        lhv_max=lhv_max_given_eta(eta),
        scenario=scen,
    )


def kappa_scheme_point(kappa: float, cfg: OptimizationConfig | None = None) -> TradeoffPoint:
    """The plain scheme at its optimal Theta, with the separable maximum searched numerically."""
    from .schemes import KappaScheme, optimal_theta, scheme_as_scenario

    cfg = cfg or OptimizationConfig()
    theta, _ = optimal_theta(kappa)
    scheme = KappaScheme.symmetric(float(kappa), theta)
    return _point(float(kappa), scheme.angles, scheme_as_scenario(scheme), cfg)


def optimized_scheme_point(kappa: float, cfg: OptimizationConfig | None = None) -> TradeoffPoint:
    cfg = cfg or OptimizationConfig()
    angles, scen = optimize_filter_angles(float(kappa), cfg)
    return _point(float(kappa), angles, scen, cfg)


def optimize_scheme_tradeoff(kappas, cfg: OptimizationConfig | None = None) -> list[TradeoffPoint]:
    """Best-effort optimised-filter curves: B_ent, B_sep, eta and the LHV bound per kappa."""
    return [optimized_scheme_point(k, cfg) for k in kappas]


@dataclass(frozen=True)
class Crossings:
    separable: TradeoffPoint | None  # where B_sep reaches 2
    lhv: TradeoffPoint | None  # where lhv_max reaches B_ent


def find_crossings(point_fn, lo: float = 0.0, hi: float = 0.6, xtol: float = 1e-4) -> Crossings:
    """Root-find the two curve crossings of ``point_fn(kappa) -> TradeoffPoint``."""
    from scipy.optimize import brentq

    cache: dict = {}

    def point(k):
        if k not in cache:
            cache[k] = point_fn(k)
        return cache[k]

    def root(f):
        if f(lo) * f(hi) > 0:
            return None
        return point(brentq(f, lo, hi, xtol=xtol))

    return Crossings(
        separable=root(lambda k: point(k).B_sep - 2.0),
        lhv=root(lambda k: point(k).lhv_max - point(k).B_ent),
    )


__all__ = [
    "OptimizationConfig",
    "OptimizationResult",
    "Crossings",
    "ScanPoint",
    "TradeoffPoint",
    "envelope_violations",
    "fig1_success_ops",
    "find_crossings",
    "kappa_scheme_point",
    "optimized_scheme_point",
    "maximize_bell_fixed_loss",
    "maximize_bell_separable",
    "mixed_state_spot_check",
    "optimal_delta",
    "optimize_filter_angles",
    "optimize_scheme_tradeoff",
    "scan_fixed_loss",
    "threshold_p",
]
