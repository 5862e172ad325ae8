"""Command implementations shared by the CLI and the optional service.

Each command takes a validated :class:`ExperimentConfig` and returns an
:class:`Outcome`: named checks, a JSON-ready result, CSV tables and optional
matrices.  Nothing here touches the file system except reading Perron inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS
from .errors import ConfigError


@dataclass
class Check:
    name: str
    value: float | bool | None
    limit: float | None
    passed: bool

    def to_dict(self):
        return {"value": self.value, "limit": self.limit, "passed": self.passed}


def at_most(name, value, limit):
    return Check(name, value, limit, bool(value is not None and math.isfinite(value) and value <= limit))


def at_least(name, value, limit):
    return Check(name, value, limit, bool(value is not None and math.isfinite(value) and value >= limit))


def holds(name, flag):
    return Check(name, bool(flag), None, bool(flag))


@dataclass
class Outcome:
    command: str
    result: dict
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    problem: tuple | None = None        # (g_steps, f_steps, q_minus, q_plus) for export
    error: str | None = None

    @property
    def passed(self):
        return self.error is None and all(c.passed for c in self.checks)

    def report(self, cfg, timestamp):
        return {
            "command": self.command,
            "version": __version__,
            "timestamp": timestamp,
            "seed": cfg.seed,
            "config": cfg.model_dump(mode="json", exclude={"base_dir"}),
            "passed": self.passed,
            "error": self.error,
            "checks": {c.name: c.to_dict() for c in self.checks},
            "result": self.result,
            "tables": sorted(f"{self.command}_{t}.csv" for t in self.tables),
        }


# ---------------------------------------------------------------------------

def _setup(cfg):
    from .disc import assemble_hamiltonian, assemble_pencil

    grid = cfg.require_grid()
    model = cfg.model.build()
    pencil = assemble_pencil(model, grid, cfg.ell)
    return model, grid, pencil, assemble_hamiltonian(pencil)


def model_check(cfg, threads=1):
    from .model import model_report, trapping_time

    model = cfg.model.build()
    rep = model_report(model)
    tr = trapping_time(model)
    rows = [{"sample": i, "sojourn": float(s), "escaped": bool(e)} for i, (s, e) in enumerate(zip(tr.sojourn, tr.escaped))]
    checks = [holds("invariants", not rep["invariants"])]
    return Outcome("model-check", rep, checks, {"rays": rows})


def spectrum(cfg, threads=1):
    from .disc import energy_form
    from .spectral import eig_lower_half, trichotomy_static

    model, grid, pencil, ham = _setup(cfg)
    block = cfg.spectrum
    rep = eig_lower_half(ham, alpha_floor=block.alpha_floor)
    result = rep.to_dict()
    checks = [holds("k0_finite", math.isfinite(rep.k0))]
    rows = []
    for z in rep.eigenvalues:
        d = np.abs(rep.partners - np.conj(z)) if len(rep.partners) else np.array([math.inf])
        rows.append({"re": z.real, "im": z.imag, "pairing_defect": float(d.min())})
    if model.symmetric:
        defect = max((r["pairing_defect"] for r in rows), default=0.0)
        checks.append(at_most("pairing", defect if len(rep.partners) == rep.kappa else math.inf, block.pairing_tol))
        if block.trichotomy and rep.kappa and math.isfinite(rep.k0):
            tri = trichotomy_static(ham, energy_form(pencil), report=rep, tol=block.isotropy_tol)
            result["trichotomy"] = tri.to_dict()
            checks.append(at_most("isotropy", tri.isotropy_defect, block.isotropy_tol))
            checks.append(at_least("coercivity", tri.coercivity, 0.0))
    return Outcome("spectrum", result, checks, {"eigenvalues": rows})


def resolvent_scan(cfg, threads=1):
    from .spectral import lap_scan

    _, _, pencil, _ = _setup(cfg)
    s = cfg.scan
    omegas = [complex(x, y) for y in s.im for x in np.linspace(s.re_min, s.re_max, s.n_re)]
    rows = lap_scan(pencil, omegas, iters=s.iters)
    table = [{"re_omega": r.re_omega, "im_omega": r.im_omega, "norm": r.norm, "residual": r.residual} for r in rows]
    worst = max(r.residual for r in rows)
    result = {"points": len(rows), "max_norm": max(r.norm for r in rows), "max_residual": worst}
    return Outcome("resolvent-scan", result, [at_most("residual", worst, s.residual_tol)], {"scan": table})


def _initial_data(cfg, model, grid, ham):
    from .evolve import eigen_projectors
    from .spectral import eig_lower_half

    d = cfg.evolve.data
    if d.kind == "eigenmode":
        rep = eig_lower_half(ham)
        if rep.kappa == 0:
            raise ConfigError("eigenmode data needs a model with a growing mode", "evolve.data.kind")
        return rep.eigenvectors[:, 0], None
    r = grid.r
    v = np.exp(-(((r - d.center) / d.width) ** 2)) * (np.cos(d.carrier * r) if d.carrier else 1.0)
    w = -np.gradient(v, grid.h) if d.outgoing else np.zeros_like(v)
    U = np.concatenate([v, w]).astype(complex)
    if d.kind == "zero_part":
        if not model.stationary:
            raise ConfigError("zero_part data needs a stationary model", "evolve.data.kind")
        _, _, p0, _ = eigen_projectors(ham)
        return p0 @ U, p0
    return U, None


def _trajectory(cfg, T=None):
    from .evolve import evolve

    model, grid, _, ham = _setup(cfg)
    e = cfg.evolve
    U0, p0 = _initial_data(cfg, model, grid, ham)
    tr = evolve(model, grid, cfg.ell, U0, T=e.T if T is None else T, dt=e.dt, sponge=e.sponge,
                store_every=e.store_every, projector=p0)
    return model, tr


def evolve_cmd(cfg, threads=1):
    model, tr = _trajectory(cfg)
    du = tr.du_series()
    drift = float(np.abs(tr.energy - tr.energy[0]).max())
    scale = max(abs(tr.energy[0]), float(du.max()) ** 2, 1e-300)
    result = {"steps": len(tr.times) - 1, "dt": tr.dt, "T": float(tr.times[-1]), "energy_initial": tr.energy[0],
              "energy_final": tr.energy[-1], "energy_drift_relative": drift / scale, "du_initial": du[0],
              "du_final": du[-1], "du_max": du.max()}
    checks = []
    if model.symmetric and model.stationary and not cfg.evolve.sponge:
        checks.append(at_most("energy_drift", drift / scale, cfg.evolve.drift_tol))
    return Outcome("evolve", result, checks, {"series": tr.norm_rows()})


def decay_report_cmd(cfg, threads=1):
    from .evolve import decay_report

    b = cfg.decay
    _, tr = _trajectory(cfg, T=max(b.horizons))
    rep = decay_report(tr, b.horizons, alpha_hint=b.alpha_hint, classify=b.classify)
    result = rep.to_dict()
    keys = ("two_point_ratio", "le_ratio", "stationary_ratio", "high_freq_ratio", "low_mourre_ratio",
            "high_mourre_ratio")
    rows = [{"T": T, **{k: getattr(rep, k)[T] for k in keys}} for T in rep.horizons]
    present = [r[k] for r in rows for k in keys if r[k] is not None]
    finite = bool(present) and all(math.isfinite(x) for x in present)
    return Outcome("decay-report", result, [holds("ratios_finite", finite)], {"ratios": rows})


def trichotomy_cmd(cfg, threads=1):
    from .evolve import flow_matrices
    from .perron import DichotomyProblem, flow_projectors, perron_trichotomy, verify_discrete_trichotomy

    model = cfg.model.build()
    grid = cfg.require_grid()
    b = cfg.trichotomy
    flow = flow_matrices(model, grid, cfg.ell, b.T_star, b.N, dt=b.dt, projector_method=b.projector_method)
    prob = DichotomyProblem.from_flow(flow)
    res = perron_trichotomy(prob, tol=b.tol, parallel=threads > 1, keep_bases=True)
    pushed = flow_projectors(res, prob.f_steps)
    table = verify_discrete_trichotomy(prob.f_steps, res.p_minus, res.p_plus, flow.t_grid, frozen=prob.pushed,
                                       epsilon=model.max_rate or None, pushed=pushed)
    result = {"perron": res.to_dict(), "rates": table.to_dict(), "flow_epsilon": flow.epsilon,
              "ranks": [int(round(np.trace(p).real)) for p in (res.p_minus, res.p_zero, res.p_plus)]}
    checks = [at_most(k, v, b.check_tol) for k, v in sorted(res.checks.items())]
    rows = [{"n": n, "t": float(flow.t_grid[n]),
             "deviation_minus": float(np.linalg.norm(prob.pushed[n][0] - pushed[0][n], 2)),
             "deviation_plus": float(np.linalg.norm(prob.pushed[n][1] - pushed[1][n], 2))}
            for n in range(len(flow.t_grid))]
    mats = {"p_minus": res.p_minus, "p_plus": res.p_plus}
    out = Outcome("trichotomy", result, checks, {"pushed": rows}, mats)
    if b.export_problem:
        out.problem = (prob.g_steps, prob.f_steps, prob.q_minus, prob.q_plus)
    return out


def _toy_problem(toy, seed):
    from .perron import DichotomyProblem

    d = len(toy.diagonal)
    g = np.diag(toy.diagonal).astype(complex)
    E = np.random.default_rng(seed).standard_normal((d, d))
    E /= np.linalg.norm(E, 2)
    f = g @ (np.eye(d) + toy.eps * E)
    return DichotomyProblem([g] * toy.N, [f] * toy.N, np.diag(toy.q_minus), np.diag(toy.q_plus))


def perron_cmd(cfg, threads=1):
    from .io import read_problem
    from .perron import DichotomyProblem, perron_trichotomy

    b = cfg.perron
    if b is None:
        raise ConfigError("missing [perron] block", "perron")
    if b.toy is not None:
        prob = _toy_problem(b.toy, cfg.seed)
    else:
        p = Path(b.problem)
        p = p if p.is_absolute() else Path(cfg.base_dir) / p
        prob = DichotomyProblem(*read_problem(p))
    if b.C is not None:
        prob.C, prob.gamma, prob.gamma0 = b.C, b.gamma, b.gamma0
    res = perron_trichotomy(prob, tol=b.tol, max_iter=b.max_iter, parallel=threads > 1)
    qm, qp = prob.q_minus, prob.q_plus
    identities = {
        "idempotent_minus": float(np.abs(res.p_minus @ res.p_minus - res.p_minus).max()),
        "idempotent_plus": float(np.abs(res.p_plus @ res.p_plus - res.p_plus).max()),
    }
    distance = float(max(np.abs(res.p_minus - qm).max(), np.abs(res.p_plus - qp).max()))
    if prob.epsilon == 0:
        identities["equals_reference"] = distance
    result = {**res.to_dict(), "identities": identities, "dimension": prob.dimension, "horizon": prob.horizon,
              "distance_to_reference": distance}
    checks = [at_most(k, v, b.check_tol) for k, v in sorted({**res.checks, **identities}.items())]
    rows = [{"row": i, "col": j, "p_minus_re": res.p_minus[i, j].real, "p_minus_im": res.p_minus[i, j].imag,
             "p_plus_re": res.p_plus[i, j].real, "p_plus_im": res.p_plus[i, j].imag}
            for i in range(prob.dimension) for j in range(prob.dimension)] if prob.dimension <= 32 else []
    mats = {"p_minus": res.p_minus, "p_plus": res.p_plus, "p_zero": res.p_zero}
    return Outcome("perron", result, checks, {"projectors": rows} if rows else {}, mats)


def carleman_check(cfg, threads=1):
    from .carleman import build_weight, bump_tests, carleman_ratio, medium_band_check, packet_tests

    c = cfg.carleman
    model = cfg.model.build()
    grid = cfg.require_grid()
    R = c.R
    if c.family == "interior":
        lo, hi = c.r_range or (0.0, 1.0)
        tests = packet_tests(grid, np.linspace(0.1, 0.2, c.n_tests), T=c.T)
    else:
        lo, hi = c.r_range or (model.r0 * 1.05, 0.9 * grid.r_max)
        tests = bump_tests(grid, c.n_tests, (lo, hi), seed=cfg.seed, T=c.T)
    rows, profiles = [], []
    for lam in c.lambdas:
        w = build_weight(c.family, lam, sigma=c.sigma if c.family == "interior" else None,
                         R=R if c.family != "exterior_convex" else None, r0=model.r0)
        st = carleman_ratio(model, w, tests, c.estimate, grid=grid, workers=threads)
        rows.append(st.row())
        profiles.extend({"lambda": lam, **p} for p in w.profile())
    maxima = [r["max_ratio"] for r in rows]
    spread = max(maxima) / min(maxima)
    result = {"family": c.family, "estimate": c.estimate, "per_lambda": rows, "spread": spread,
              "n_tests": rows[0]["n_tests"]}
    checks = [holds("ratios_finite", all(math.isfinite(m) for m in maxima)),
              at_most("lambda_spread", spread, c.spread_max)]
    tables = {"ratios": rows, "weights": profiles}
    if c.band is not None:
        bw = build_weight("medium", c.band.lam, R=c.band.R, r0=model.r0)
        verdict = medium_band_check(model, bw, (c.band.tau0, c.band.tau1), grid=grid, delta=c.band.delta,
                                    seed=cfg.seed)
        result["band"] = verdict.to_dict()
        checks.append(holds("medium_band", verdict.passed))
    return Outcome("carleman-check", result, checks, tables)


RUNNERS = {
    "model-check": model_check,
    "spectrum": spectrum,
    "resolvent-scan": resolvent_scan,
    "evolve": evolve_cmd,
    "decay-report": decay_report_cmd,
    "trichotomy": trichotomy_cmd,
    "perron": perron_cmd,
    "carleman-check": carleman_check,
}
assert set(RUNNERS) == set(COMMANDS)


def run(command, cfg, threads=1):
    """Run one command.  Configuration errors propagate; other library errors are recorded."""
    from .errors import LedlabError

    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}", "command")
    try:
        return RUNNERS[command](cfg, threads=threads)
    except ConfigError:
        raise
    except LedlabError as exc:
        return Outcome(command, {}, error=f"{type(exc).__name__}: {exc}")
