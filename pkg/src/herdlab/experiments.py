"""Experiment runners behind the command line: simulate, analyze, the two
figure reproductions and the oracle validation suite.

Long runs are streamed: the integrator advances in chunks and each chunk is
folded into Welch and histogram accumulators, so memory stays bounded.
"""

from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .distances import ks_distance, tv_distance
from .jump import params_digest, simulate_jump, simulate_jump_fixed_dt
from .market import log_price, market_series, price_series
from .model import GeneralThreeStateParams, PopulationState, ThreeStateParams, TwoStateParams, theoretical_exponents
from .oracle import simplex_states, stationary_birth_death, stationary_three_state, xi_marginal
from .sde import (
    Boundary,
    DecompositionError,
    IntegratorConfig,
    OccupationSpec,
    SdeIntegrator,
    SdeModel,
    YParams,
    diffusion_decompose,
    financial_d2,
    integrate_sde,
)
from .spectral import (
    PdfAccumulator,
    PsdAccumulator,
    SpectralDensity,
    default_psd_range,
    empirical_pdf,
    fit_fractured,
    fit_powerlaw,
    fit_psd,
    hill_estimator,
    log_edges,
    pdf_from_occupation,
    psd,
)
from .trajectory import Trajectory, read_binary, read_csv

__all__ = [
    "versions",
    "default_x0",
    "run_simulate",
    "run_analyze",
    "Fig1Settings",
    "fig1_point",
    "run_reproduce_fig1",
    "Fig3Settings",
    "run_fig3_streams",
    "run_reproduce_fig3",
    "CheckResult",
    "run_validate",
    "CHECKS",
]

CHUNK = 2**21


def versions() -> Dict[str, str]:
    import numba
    import scipy

    return {
        "herdlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", newline="\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _map(fn: Callable, items: Sequence, jobs: int) -> List:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# simulate / analyze
# ---------------------------------------------------------------------------


def default_x0(model: SdeModel) -> List[float]:
    """A start well inside the boundaries, at the deterministic fixed point where one exists."""
    if model.variant in ("two-state-full", "two-state-asymptotic"):
        return [1.0]
    if model.variant == "general-class":
        lo, hi = (b for b in (model.default_boundaries()[0].lower, model.default_boundaries()[0].upper))
        return [math.sqrt(lo * hi)]
    p = model.params
    n_f = p.sigma_cf / (p.sigma_cf + p.sigma_fc)
    if model.variant == "three-state-fp":
        return [n_f, (1 - n_f) / 2]
    return [n_f, 0.0]


def _simulate_member(args) -> Tuple[str, Trajectory]:
    cfg, seed = args
    params = cfg.build()
    if cfg.is_sde:
        model = cfg.sde_model()
        x0 = cfg.x0 if cfg.x0 is not None else default_x0(model)
        traj = integrate_sde(model, x0, cfg.t_end, cfg.integrator_config(), seed=seed)
        traj.meta["params_digest"] = params_digest(model.params) if hasattr(model.params, "to_dict") else \
            _digest(model.to_dict())
    else:
        kind = "two-state" if cfg.model == "jump-two-state" else "three-state"
        x0 = None
        if cfg.x0 is not None:
            x0 = (PopulationState.two_state(int(cfg.x0[0]), params.N) if kind == "two-state"
                  else PopulationState.three_state(*map(int, cfg.x0)))
        if cfg.simulator.kind == "gillespie":
            traj = simulate_jump(kind, params, x0, cfg.t_end, cfg.sample_dt, seed, burn_in=cfg.burn_in)
        else:
            traj = simulate_jump_fixed_dt(kind, params, x0, cfg.t_end, cfg.simulator.step_dt, cfg.sample_dt,
                                          seed, burn_in=cfg.burn_in)
    return seed, traj


def _digest(d: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def run_simulate(cfg: ExperimentConfig, out_dir: Optional[Path] = None, jobs: int = 1) -> Dict:
    """One trajectory file per ensemble member plus ``manifest.json``.

    The manifest is written even when a member fails; it then carries the
    error and the exception is re-raised.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": "simulate",
        "model": cfg.model,
        "config": cfg.to_dict(),
        "params_digest": _digest(cfg.params),
        "seeds": cfg.seeds(),
        "versions": versions(),
        "files": [],
        "status": "ok",
    }
    try:
        results = _map(_simulate_member, [(cfg, s) for s in cfg.seeds()], jobs)
        for i, (seed, traj) in enumerate(results):
            ext = "csv" if cfg.format == "csv" else "bin"
            name = f"run_{i:04d}.{ext}"
            if cfg.format == "csv":
                traj.to_csv(out / name)
            else:
                traj.to_binary(out / name)
            manifest["files"].append({"file": name, "seed": seed})
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        _write_json(out / "manifest.json", manifest)
        raise
    _write_json(out / "manifest.json", manifest)
    return manifest


def _observable(traj: Trajectory, cfg: ExperimentConfig) -> Tuple[str, np.ndarray, float]:
    """Scalar positive series for the PSD/PDF analysis, with its sample spacing."""
    obs = cfg.analysis.observable
    cols = traj.columns
    if obs == "auto":
        if cfg.model == "jump-two-state":
            obs = "y"
        elif cfg.model in ("jump-three-state", "sde-three-state-fp", "sde-three-state-transformed"):
            obs = "abs_return"
        else:
            obs = "value"
    if obs == "value":
        v = np.asarray(traj.values, dtype=float)
        return obs, (v if v.ndim == 1 else v[:, 0]), traj.dt
    if obs == "y":
        X = np.asarray(traj.values, dtype=float)
        N = cfg.build().N
        X = np.clip(X, 1, N - 1)
        return obs, X / (N - X), traj.dt
    if obs in ("abs_return", "abs_price"):
        r0 = cfg.params.get("r0", 1.0)
        if obs == "abs_price":
            return obs, np.abs(price_series(traj, r0).values), traj.dt
        ms = market_series(traj, cfg.analysis.window_T, r0)
        return obs, ms.abs_returns, traj.dt
    if obs in cols:
        return obs, np.asarray(traj.column(obs), dtype=float), traj.dt
    raise ValueError(f"unknown observable {obs!r} for columns {cols}")


def _pdf_fit_range(pdf, analysis) -> Tuple[float, float]:
    if analysis.pdf_fit_range is not None:
        return analysis.pdf_fit_range
    q0, q1 = analysis.pdf_fit_quantiles
    return pdf.quantile(q0), pdf.quantile(q1)


def run_analyze(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> Dict:
    """PSD, PDF and power-law fits for the trajectories listed in the manifest."""
    out = Path(out_dir or cfg.output_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    a = cfg.analysis
    psd_acc = None
    series_all = []
    name = None
    for entry in manifest["files"]:
        path = out / entry["file"]
        traj = read_csv(path) if path.suffix == ".csv" else read_binary(path)
        k = int(round(cfg.burn_in * len(traj)))
        traj = traj.drop_burn_in(cfg.burn_in) if k else traj
        name, x, dt = _observable(traj, cfg)
        if psd_acc is None:
            psd_acc = PsdAccumulator(dt, a.psd_segment_len, a.psd_overlap)
        psd_acc.add(x - x.mean())
        # segments must not straddle two ensemble members
        psd_acc.break_stream()
        series_all.append(x)
    pooled = np.concatenate(series_all)
    pos = pooled[pooled > 0]
    summary: Dict = {"observable": name, "members": len(series_all), "versions": versions()}
    pdf = empirical_pdf(pos, a.pdf_bins_per_decade, min_samples=1)
    pdf.to_csv(out / "pdf.csv")
    rng = _pdf_fit_range(pdf, a)
    try:
        summary["pdf_fit"] = fit_powerlaw(pdf.centers, pdf.density, rng).to_dict()
        summary["hill"] = dict(zip(("exponent", "stderr"), hill_estimator(pos, rng[0])))
    except ValueError as exc:
        summary["pdf_fit"] = {"error": str(exc)}
    try:
        spec = psd_acc.result()
        spec.to_csv(out / "psd.csv")
        summary["psd_fit"] = fit_psd(spec, a.psd_fit_range).to_dict()
        if a.fracture:
            summary["fracture"] = fit_fractured(spec.log_binned(20), fit_range=a.psd_fit_range).to_dict()
    except ValueError as exc:
        summary["psd_fit"] = {"error": str(exc)}
    _write_json(out / "analysis.json", summary)
    return summary


# ---------------------------------------------------------------------------
# reproduce-fig1: exponent sweep of the y-equation
# ---------------------------------------------------------------------------


@dataclass
class Fig1Settings:
    """Sweep of ``eps2`` for the full y-equation with ``alpha = 1``.

    The density comes from a long run with a time-weighted occupation
    histogram accumulated at every integration step; the spectrum from a
    separate, finely sampled run. The tail fit uses the asymptotic window
    ``y in [10, 100]`` where the large-y equation applies.
    """

    eps1: float = 0.1
    alpha: float = 1.0
    eps2_values: Tuple[float, ...] = (0.1, 0.5, 1.0, 1.5, 2.0, 3.0)
    y_bounds: Tuple[float, float] = (1e-2, 1e3)
    kappa: float = 0.05
    pdf_t_end: Dict[float, float] = field(default_factory=lambda: {
        0.1: 2e4, 0.5: 5e4, 1.0: 1e5, 1.5: 2e5, 2.0: 4e5, 3.0: 1e6})
    pdf_sample_dt: float = 0.1
    pdf_bins_per_decade: int = 20
    pdf_fit_range: Tuple[float, float] = (10.0, 100.0)
    psd_t_end: float = 5e4
    psd_sample_dt: float = 1e-4
    psd_segment_len: int = 2**16
    psd_fit_range: Tuple[float, float] = (10.0, 1000.0)
    burn_in: float = 0.01
    seed: int = 1

    def pdf_time(self, eps2: float) -> float:
        return self.pdf_t_end.get(eps2, max(self.pdf_t_end.values()))


def _fig1_pdf(eps2: float, s: Fig1Settings, seed: int):
    model = SdeModel("two-state-full", YParams(s.eps1, eps2, s.alpha))
    t_end = s.pdf_time(eps2)
    lo, hi = s.y_bounds
    nb = int(round(math.log10(hi / lo) * s.pdf_bins_per_decade))
    cfg = IntegratorConfig(
        kappa=s.kappa, sample_dt=s.pdf_sample_dt, max_dt=s.pdf_sample_dt,
        boundaries=(Boundary(lo, hi),), burn_in=s.burn_in,
        occupation=OccupationSpec(0, lo, hi, nb, True),
    )
    integ = SdeIntegrator(model, [1.0], cfg, seed=seed, occupation_start=s.burn_in * t_end)
    n = int(round(t_end / s.pdf_sample_dt))
    while n > 0:
        k = min(n, CHUNK)
        integ.run(k)
        n -= k
    return pdf_from_occupation(integ.occupation), integ.steps


def _fig1_psd(eps2: float, s: Fig1Settings, seed: int):
    model = SdeModel("two-state-full", YParams(s.eps1, eps2, s.alpha))
    lo, hi = s.y_bounds
    cfg = IntegratorConfig(kappa=s.kappa, sample_dt=s.psd_sample_dt, max_dt=s.psd_sample_dt,
                           boundaries=(Boundary(lo, hi),))
    integ = SdeIntegrator(model, [1.0], cfg, seed=seed)
    integ.run(int(round(s.burn_in * s.psd_t_end / s.psd_sample_dt)))
    acc = PsdAccumulator(s.psd_sample_dt, s.psd_segment_len)
    n = int(round(s.psd_t_end / s.psd_sample_dt))
    while n > 0:
        k = min(n, CHUNK)
        acc.add(integ.run(k)[:, 0])
        n -= k
    return acc.result(), integ.steps


def fig1_point(eps2: float, settings: Fig1Settings, out_dir: Optional[Path] = None, index: int = 0) -> Dict:
    """Simulate one sweep point and fit both exponents."""
    t0 = time.time()
    seed = settings.seed + 2 * index
    eta, lam, beta = theoretical_exponents(settings.alpha, eps2)
    pdf, pdf_steps = _fig1_pdf(eps2, settings, seed)
    spec, psd_steps = _fig1_psd(eps2, settings, seed + 1)
    lam_fit = fit_powerlaw(pdf.centers, pdf.density, settings.pdf_fit_range)
    beta_fit = fit_psd(spec, settings.psd_fit_range)
    if out_dir is not None:
        pdf.to_csv(Path(out_dir) / f"pdf_eps2_{eps2:g}.csv")
        spec.log_binned(20).to_csv(Path(out_dir) / f"psd_eps2_{eps2:g}.csv")
    return {
        "eps2": eps2,
        "eta": eta,
        "lambda_theory": lam,
        "beta_theory": beta,
        "lambda_hat": lam_fit.exponent,
        "lambda_stderr": lam_fit.stderr,
        "lambda_fit_range": list(lam_fit.fit_range),
        "beta_hat": beta_fit.exponent,
        "beta_stderr": beta_fit.stderr,
        "beta_fit_range": list(beta_fit.fit_range),
        "beta_fit_decades": math.log10(beta_fit.fit_range[1] / beta_fit.fit_range[0]),
        "lambda_error": abs(lam_fit.exponent - lam),
        "beta_error": abs(beta_fit.exponent - beta),
        "pdf_t_end": settings.pdf_time(eps2),
        "pdf_steps": pdf_steps,
        "psd_t_end": settings.psd_t_end,
        "psd_samples": int(round(settings.psd_t_end / settings.psd_sample_dt)),
        "psd_steps": psd_steps,
        "seconds": time.time() - t0,
    }


def _fig1_job(args):
    eps2, settings, out_dir, index = args
    return fig1_point(eps2, settings, out_dir, index)


def run_reproduce_fig1(out_dir, settings: Optional[Fig1Settings] = None, jobs: int = 1) -> Dict:
    s = settings or Fig1Settings()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = _map(_fig1_job, [(e, s, out, i) for i, e in enumerate(s.eps2_values)], jobs)
    summary = {"settings": _settings_dict(s), "rows": rows, "versions": versions()}
    _write_json(out / "fig1_summary.json", summary)
    keys = ("eps2", "lambda_theory", "lambda_hat", "lambda_error", "beta_theory", "beta_hat", "beta_error")
    lines = [",".join(keys)] + [",".join(f"{r[k]:.6g}" for k in keys) for r in rows]
    (out / "fig1_table.csv").write_text("\n".join(lines) + "\n", newline="\n")
    return summary


def _settings_dict(s) -> Dict:
    d = asdict(s)
    for k, v in list(d.items()):
        if isinstance(v, dict):
            d[k] = {str(kk): vv for kk, vv in v.items()}
        if isinstance(v, ThreeStateParams):
            d[k] = asdict(v)
    return d


# ---------------------------------------------------------------------------
# reproduce-fig3: fractured spectrum of absolute returns
# ---------------------------------------------------------------------------


@dataclass
class Fig3Settings:
    """Three-state transformed equations at the reference market parameters.

    ``windows`` lists every return window ``T`` analysed; ``primary_T`` is
    the one the headline fits use. The instantaneous ``|p|`` series is always
    analysed too.
    """

    params: ThreeStateParams = field(default_factory=lambda: ThreeStateParams(
        eps_cf=3.0, eps_fc=3.0, eps_cc=3.0, H=100.0, h1=1.0, alpha=2.0, r0=1.0, N=1000))
    t_end: float = 1e4
    burn_in: float = 0.01
    sample_dt: float = 2.5e-5
    kappa: float = 0.05
    windows: Tuple[float, ...] = (1e-2, 0.1, 1.0, 10.0)
    primary_T: float = 1.0
    segment_len: int = 2**16
    pdf_edges: Tuple[float, float, int] = (1e-9, 1e4, 20)
    tail_quantiles: Tuple[float, float] = (0.9, 0.999)
    psd_fit_range: Optional[Tuple[float, float]] = None
    seed: int = 3


@dataclass
class Fig3Streams:
    """Accumulated spectra and histograms, keyed by window (``0`` means ``|p|``)."""

    psd: Dict[float, SpectralDensity]
    pdf: Dict[float, "EmpiricalPdf"]
    steps: int
    samples: int


def run_fig3_streams(s: Fig3Settings) -> Fig3Streams:
    model = SdeModel("three-state-transformed", s.params)
    n_lo = 1.0 / s.params.N
    cfg = IntegratorConfig(kappa=s.kappa, sample_dt=s.sample_dt, max_dt=s.sample_dt,
                           boundaries=(Boundary(n_lo, 1 - n_lo), Boundary(-1 + 1e-3, 1 - 1e-3)))
    integ = SdeIntegrator(model, default_x0(model), cfg, seed=s.seed)
    integ.run(int(round(s.burn_in * s.t_end / s.sample_dt)))
    lags = {}
    for T in s.windows:
        k = int(round(T / s.sample_dt))
        if k < 1 or not math.isclose(k * s.sample_dt, T, rel_tol=1e-9):
            raise ValueError(f"window {T} is not a multiple of sample_dt {s.sample_dt}")
        lags[T] = k
    keys = [0.0] + list(s.windows)
    edges = log_edges(s.pdf_edges[0], s.pdf_edges[1], s.pdf_edges[2])
    psd_acc = {T: PsdAccumulator(s.sample_dt, s.segment_len) for T in keys}
    pdf_acc = {T: PdfAccumulator(edges) for T in keys}
    kmax = max(lags.values())
    carry = np.empty(0)
    n = int(round(s.t_end / s.sample_dt))
    total = 0
    while n > 0:
        k = min(n, CHUNK)
        chunk = integ.run(k)
        n -= k
        p = log_price(chunk[:, 0], chunk[:, 1], s.params.r0)
        ap = np.abs(p)
        psd_acc[0.0].add(ap)
        pdf_acc[0.0].add(ap)
        full = np.concatenate([carry, p])
        for T, lag in lags.items():
            start = len(carry)
            if len(full) - lag <= 0:
                continue
            # returns whose end point lies in this chunk and whose start is known
            lo = max(start, lag)
            r = np.abs(full[lo:] - full[lo - lag:len(full) - lag])
            psd_acc[T].add(r)
            pdf_acc[T].add(r)
        carry = full[-kmax:]
        total += k
    return Fig3Streams(
        psd={T: a.result() for T, a in psd_acc.items()},
        pdf={T: a.result() for T, a in pdf_acc.items()},
        steps=integ.steps,
        samples=total,
    )


def _fig3_fits(spec: SpectralDensity, pdf, s: Fig3Settings) -> Dict:
    q0, q1 = s.tail_quantiles
    row: Dict = {}
    rng = (pdf.quantile(q0), pdf.quantile(q1))
    try:
        lf = fit_powerlaw(pdf.centers, pdf.density, rng)
        row.update(lambda_hat=lf.exponent, lambda_stderr=lf.stderr, lambda_fit_range=list(rng))
    except ValueError as exc:
        row["lambda_error"] = str(exc)
    rng50 = (pdf.quantile(0.5), pdf.quantile(0.999))
    try:
        row["lambda_hat_p50_p999"] = fit_powerlaw(pdf.centers, pdf.density, rng50).exponent
    except ValueError:
        pass
    binned = spec.log_binned(20)
    frange = s.psd_fit_range or default_psd_range(spec.freqs)
    try:
        ff = fit_fractured(binned, fit_range=frange)
        row.update(fracture=ff.to_dict())
    except ValueError as exc:
        row["fracture_error"] = str(exc)
    return row


def run_reproduce_fig3(out_dir, settings: Optional[Fig3Settings] = None) -> Dict:
    s = settings or Fig3Settings()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    streams = run_fig3_streams(s)
    table = []
    for T in [0.0] + list(s.windows):
        tag = "abs_p" if T == 0 else f"abs_r_T{T:g}"
        streams.psd[T].log_binned(20).to_csv(out / f"psd_{tag}.csv")
        streams.pdf[T].to_csv(out / f"pdf_{tag}.csv")
        row = {"series": tag, "T": T if T else None}
        row.update(_fig3_fits(streams.psd[T], streams.pdf[T], s))
        table.append(row)
    primary = next(r for r in table if r["T"] == s.primary_T)
    summary = {
        "settings": _settings_dict(s),
        "primary": primary,
        "targets": {"lambda": 3.67, "beta1": 1.42, "beta2": 0.41},
        "sensitivity": table,
        "steps": streams.steps,
        "samples": streams.samples,
        "seconds": time.time() - t0,
        "versions": versions(),
    }
    if "fracture" in primary:
        (out / "fracture.json").write_text(
            json.dumps({k: primary["fracture"][k] for k in ("beta1", "beta2", "f_break", "stderr1", "stderr2")})
            + "\n", newline="\n")
    _write_json(out / "fig3_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    metric: str
    value: float
    threshold: float
    passed: bool
    detail: Dict = field(default_factory=dict)


def _below(name, metric, value, threshold, **detail) -> CheckResult:
    return CheckResult(name, metric, float(value), float(threshold), bool(value < threshold), detail)


def _perturb(p: TwoStateParams, fault: bool) -> TwoStateParams:
    if not fault:
        return p
    return TwoStateParams(p.sigma1 * 1.6, p.sigma2, p.h, p.N, p.alpha, p.feedback_enabled)


def check_jump_vs_detailed_balance(level: str, fault: bool = False) -> CheckResult:
    p = TwoStateParams(0.2, 0.2, 1.0, 20)
    t_end = 1e6
    traj = simulate_jump("two-state", _perturb(p, fault), t_end=t_end, sample_dt=t_end, seed=101)
    tv = tv_distance(traj.occupation.weights, stationary_birth_death(p))
    return _below("jump_vs_detailed_balance", "TV", tv, 0.02, N=20, t_end=t_end)


def check_fixed_dt_vs_gillespie(level: str, fault: bool = False) -> CheckResult:
    p = TwoStateParams(0.2, 0.2, 1.0, 20)
    t_end = 5e4 if level == "quick" else 2e5
    a = simulate_jump("two-state", p, t_end=t_end, sample_dt=t_end, seed=102)
    b = simulate_jump_fixed_dt("two-state", _perturb(p, fault), t_end=t_end, step_dt=1e-3, sample_dt=t_end, seed=103)
    states = np.arange(p.N + 1)
    ks = ks_distance(states, states, a.occupation.weights, b.occupation.weights)
    return _below("fixed_dt_vs_gillespie", "KS", ks, 0.02, t_end=t_end,
                  step_halvings=b.meta["step_halvings"])


def check_jump_vs_generator_three_state(level: str, fault: bool = False) -> CheckResult:
    sigma = np.full((3, 3), 0.3)
    h = np.array([[0, 1.0, 0.5], [1.0, 0, 2.0], [0.5, 2.0, 0]])
    p = GeneralThreeStateParams(sigma, h, 8)
    sim = p
    if fault:
        s2 = sigma.copy()
        s2[0, 1] *= 3
        sim = GeneralThreeStateParams(s2, h, 8)
    t_end = 2e4 if level == "quick" else 1e5
    traj = simulate_jump("three-state", sim, t_end=t_end, sample_dt=t_end, seed=104)
    s = simplex_states(p.N)
    occ = traj.occupation.weights[s[:, 0], s[:, 1]]
    tv = tv_distance(occ, stationary_three_state(p))
    return _below("jump_vs_generator_three_state", "TV", tv, 0.03, N=8, t_end=t_end)


def _x_sde_samples(eps1: float, eps2: float, t_end: float, seed: int) -> np.ndarray:
    """Stationary x = y/(1+y) samples from the y-equation without feedback."""
    model = SdeModel("two-state-full", YParams(eps1, eps2, 0.0))
    cfg = IntegratorConfig(kappa=0.05, sample_dt=0.05, max_dt=0.01, boundaries=(Boundary(1e-4, 1e4),))
    y = integrate_sde(model, [eps1 / eps2], t_end, cfg, seed=seed).values
    y = y[int(0.1 * len(y)):]
    return y / (1 + y)


def jump_vs_sde_distance(N: int, t_end_scaled: float, eps1: float = 1.5, eps2: float = 2.5,
                         seed: int = 105, fault: bool = False) -> Dict:
    """KS distance between the stationary X/N of the jump process and the SDE's x.

    The jump process runs with ``h = 1`` so model time equals scaled time.
    """
    p = TwoStateParams(eps1, eps2, 1.0, N)
    traj = simulate_jump("two-state", _perturb(p, fault), t_end=t_end_scaled, sample_dt=t_end_scaled, seed=seed)
    x_jump = np.arange(N + 1) / N
    x_sde = _x_sde_samples(eps1, eps2, t_end_scaled, seed + 1)
    ks = ks_distance(x_jump, x_sde, traj.occupation.weights, None)
    return {"ks": ks, "n_events": traj.meta["n_events"], "sde_samples": len(x_sde)}


def check_jump_vs_sde(level: str, fault: bool = False) -> CheckResult:
    N, T = (200, 1000.0) if level == "quick" else (1000, 2000.0)
    d = jump_vs_sde_distance(N, T, fault=fault)
    return _below("jump_vs_sde_two_state", "KS", d["ks"], 0.05, N=N, t_end=T, **d)


def xi_oracle_vs_sde_distance(N: int = 60, t_end: float = 200.0, seed: int = 106, fault: bool = False) -> Dict:
    params = ThreeStateParams(3.0, 3.0, 3.0, 100.0, h1=1.0, alpha=0.0, N=N)
    vals, probs = xi_marginal(stationary_three_state(params), N)
    sim = ThreeStateParams(3.0, 3.0, 6.0 if fault else 3.0, 100.0, h1=1.0, alpha=0.0, N=N)
    model = SdeModel("three-state-transformed", sim)
    cfg = IntegratorConfig(kappa=0.05, sample_dt=0.01, max_dt=1e-3)
    traj = integrate_sde(model, default_x0(model), t_end, cfg, seed=seed)
    xi = traj.values[int(0.05 * len(traj)):, 1]
    return {"ks": ks_distance(vals, xi, probs, None), "sde_samples": len(xi)}


def check_xi_oracle_vs_sde(level: str, fault: bool = False) -> CheckResult:
    T = 50.0 if level == "quick" else 200.0
    d = xi_oracle_vs_sde_distance(60, T, fault=fault)
    return _below("xi_oracle_vs_sde", "KS", d["ks"], 0.07, N=60, t_end=T, **d)


def decomposition_stats(n: int = 1000, seed: int = 107, fault: bool = False) -> Dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        a = rng.normal(size=(2, 2))
        s0 = (a + a.T) / 2
        s0[np.diag_indices(2)] = np.abs(s0.diagonal()) + 0.1
        d2 = 0.5 * s0 @ s0.T
        S = diffusion_decompose(d2)
        if fault:
            S = S * (1 + 1e-6)
        worst = max(worst, float(np.linalg.norm(0.5 * S @ S.T - d2)))
    return {
        "max_residual": worst,
        "max_offdiag_ratio": offdiag_ratio(100.0, 0.2),
        "max_offdiag_ratio_margin_0.1": offdiag_ratio(100.0, 0.1),
        "max_offdiag_ratio_margin_0.05": offdiag_ratio(100.0, 0.05),
        "max_offdiag_ratio_H1e4_margin_0.05": offdiag_ratio(1e4, 0.05),
    }


def offdiag_ratio(H: float, margin: float, n: int = 41) -> float:
    """Largest ``|S_fp| / min(S_ff, S_pp)`` over simplex points with every fraction >= ``margin``."""
    params = ThreeStateParams(3.0, 3.0, 3.0, H)
    worst = 0.0
    for n_f in np.linspace(margin, 1 - 2 * margin, n):
        for n_p in np.linspace(margin, 1 - n_f - margin, n):
            S = diffusion_decompose(financial_d2(n_f, n_p, params))
            worst = max(worst, abs(S[0, 1]) / min(S[0, 0], S[1, 1]))
    return float(worst)


def check_decomposition(level: str, fault: bool = False) -> CheckResult:
    d = decomposition_stats(200 if level == "quick" else 1000, fault=fault)
    ok = d["max_residual"] <= 1e-12 and d["max_offdiag_ratio"] <= 0.15
    return CheckResult("decomposition_round_trip", "frobenius_residual", d["max_residual"], 1e-12, ok, d)


def estimator_stats(seed: int = 108, fault: bool = False) -> Dict:
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(2**20)
    spec = psd(white, 2**14, dt=1.0)
    lo, hi = spec.freqs[0], spec.freqs[-1]
    mid = math.sqrt(lo * hi)
    beta_white = fit_psd(spec, (mid / 10, mid * 10)).exponent
    u = rng.random(10**6)
    lam = 3.0 + (0.5 if fault else 0.0)
    x = u ** (-1.0 / (lam - 1.0))
    pdf = empirical_pdf(x, 10)
    lam_hat = fit_powerlaw(pdf.centers, pdf.density, (pdf.quantile(0.5), pdf.quantile(0.999))).exponent
    f = np.logspace(-4, 0, 400)
    fb = 1e-2
    S = np.where(f < fb, f**-0.4, fb ** (1.4 - 0.4) * f**-1.4)
    ff = fit_fractured(SpectralDensity(f, S))
    return {
        "white_beta": beta_white,
        "powerlaw_lambda": lam_hat,
        "beta1": ff.beta1,
        "beta2": ff.beta2,
        "f_break": ff.f_break,
    }


def check_estimators(level: str, fault: bool = False) -> CheckResult:
    d = estimator_stats(fault=fault)
    errs = {
        "white": abs(d["white_beta"]),
        "lambda": abs(d["powerlaw_lambda"] - 3.0),
        "beta1": abs(d["beta1"] - 1.4),
        "beta2": abs(d["beta2"] - 0.4),
    }
    ok = max(errs.values()) < 0.05 and 0.5 <= d["f_break"] / 1e-2 <= 2
    return CheckResult("estimator_oracles", "max_abs_error", max(errs.values()), 0.05, ok, d)


CHECKS: Dict[str, Callable[[str, bool], CheckResult]] = {
    "jump_vs_detailed_balance": check_jump_vs_detailed_balance,
    "fixed_dt_vs_gillespie": check_fixed_dt_vs_gillespie,
    "jump_vs_generator_three_state": check_jump_vs_generator_three_state,
    "jump_vs_sde_two_state": check_jump_vs_sde,
    "xi_oracle_vs_sde": check_xi_oracle_vs_sde,
    "decomposition_round_trip": check_decomposition,
    "estimator_oracles": check_estimators,
}


def run_validate(level: str = "quick", out_dir=None, faults: Iterable[str] = (),
                 only: Optional[Iterable[str]] = None) -> Dict:
    """Run every check (or ``only`` those named); ``faults`` perturbs the named checks' simulators."""
    if level not in ("quick", "full"):
        raise ValueError("level must be quick or full")
    faults = set(faults)
    unknown = faults - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    names = list(only) if only is not None else list(CHECKS)
    results = []
    for name in names:
        t0 = time.time()
        try:
            res = CHECKS[name](level, name in faults)
        except Exception as exc:
            res = CheckResult(name, "error", math.nan, math.nan, False, {"error": f"{type(exc).__name__}: {exc}"})
        res.detail["seconds"] = round(time.time() - t0, 3)
        results.append(res)
    report = {
        "level": level,
        "faults": sorted(faults),
        "passed": all(r.passed for r in results),
        "checks": [asdict(r) for r in results],
        "versions": versions(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "validate_report.json", report)
    return report
