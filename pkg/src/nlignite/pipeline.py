"""Experiment configuration and the staged pipeline behind the command line.

Stages run in order (kernel, comparison, waves, spectral, entire); each writes
its artifacts plus a diagnostics JSON in which every checked number is stored
together with the tolerance it was tested against. A manifest links all
artifacts by content hash and records the config hash and seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .cauchy import comparison_test, random_ordered_pair, stability_budget
from .entire import (MONOTONE_TOL, FrontPair, build_entire, case_of, entire_window, default_forward_horizon,
                     limit_match, limit_table, p_closed_form, p_ode_rk4, prepare_pair,
                     qualitative_checks, supersolution_check, theta_monotonicity)
from .errors import ConfigurationError, NligniteError, ValidationError
from .field import GridFunction, read_csv, write_checkpoint, write_csv
from .kernel import KernelSpec, kernel_check, kernel_from_config, kernel_moment, sample_kernel
from .reaction import IgnitionNonlinearity, derive_constants, reaction_from_config
from .spectral import (DEFAULT_BAND, find_roots, ratio_diagnostic, sign_pattern, tail_rate_fit)
from .waves import (Orientation, WaveSolution, classify_speeds, is_monotone, reaction_integral,
                    kernel_radius, solve_wave, speed_identity_check)

log = logging.getLogger(__name__)

OUTPUT_ENV = "NLIGNITE_OUTPUT_ROOT"
STAGES = ("kernel", "comparison", "waves", "spectral", "entire")

DEFAULTS: dict = {
    "name": None,
    "seed": 0,
    "kernel": {"preset": "paper-example-2.1"},
    "reaction": {"rho": 0.25, "q": 3, "fprime_max": 0.5},
    "grid": {"window": [-60.0, 60.0], "h": 0.05, "dt": None, "track_dt": 0.1},
    "kernel_check": {"tol": 1e-8},
    "comparison": {"pairs": 50, "T": 10.0, "dt": 0.1, "window": [-30.0, 30.0], "h": 0.1, "tol": 1e-10},
    "waves": {"newton_tol": 1e-10, "fd_order": 6, "method": "both", "residual_tol": 1e-6,
              "agreement_tol": 0.01, "identity_tol": 1e-3, "difference_tol": 2e-3},
    "spectral": {"band": list(DEFAULT_BAND), "root_tol": 1e-10, "rate_tol": 0.02, "r2_min": 0.9999,
                 "samples": 1000},
    "entire": {"theta": None, "theta_step": 1.0, "n_list": [5, 10, 20], "t_forward": None,
               "n_factor": 2.0, "p0": -1.0, "checkpoint": 0.5, "super_tol": 1e-3,
               "super_t": [-20.0, 0.0, 0.5], "falsify_factor": 0.01, "case_expect": None,
               "eps": 1e-2, "separation": 20.0, "limit_T": [5.0, 10.0, 20.0], "p_tol": 1e-8, "snapshot_every": 10.0},
}

EXPERIMENT_PRESETS: dict[str, dict] = {
    "paper-example-2.1": {},
    "both-positive": {"kernel": {"preset": "paper-example-2.1", "shift": -1.0}},
    "both-negative": {"kernel": {"preset": "paper-example-2.1", "shift": 1.0}},
    "small-support": {"kernel": {"preset": "top-hat", "radius": 0.2},
                      "grid": {"window": [-10.0, 10.0], "h": 0.01}},
}


# ----------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k == "kernel" and isinstance(v, dict) and ("preset" in v or "pieces" in v):
            out[k] = copy.deepcopy(v)  # a new kernel replaces the old one wholesale
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def parse_value(text: str):
    """JSON literal if possible, else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def resolve(cls, file_cfg: dict | None = None, preset: str | None = None,
                overrides: dict | None = None) -> "ExperimentConfig":
        file_cfg = dict(file_cfg or {})
        preset = preset or file_cfg.pop("preset", None)
        cfg = copy.deepcopy(DEFAULTS)
        if preset is not None:
            if preset not in EXPERIMENT_PRESETS:
                raise ConfigurationError(f"unknown preset {preset!r}; known: {sorted(EXPERIMENT_PRESETS)}")
            cfg = _merge(cfg, EXPERIMENT_PRESETS[preset])
            cfg["preset"] = preset
        cfg = _merge(cfg, file_cfg)
        for k, v in (overrides or {}).items():
            set_path(cfg, k, v)
        out = cls(cfg)
        out.validate()
        return out

    @classmethod
    def from_file(cls, path: str | Path | None, preset=None, overrides=None) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text()) if path else {}
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        return cls.resolve(data, preset, overrides)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def kernel(self) -> KernelSpec:
        return kernel_from_config(self.data["kernel"])

    def reaction(self) -> IgnitionNonlinearity:
        return reaction_from_config(self.data["reaction"])

    def validate(self) -> None:
        d = self.data
        nl = self.reaction()
        derive_constants(nl)  # raises when max f' >= 1
        self.kernel()
        g = d["grid"]
        lo, hi = g["window"]
        if not lo < 0 < hi:
            raise ConfigurationError("grid.window must contain 0")
        if g["h"] <= 0:
            raise ConfigurationError("grid.h must be positive")
        budget = stability_budget(nl)
        for key in ("dt", "track_dt"):
            if g.get(key) is not None and not 0 < g[key] <= budget:
                raise ConfigurationError(f"grid.{key}={g[key]} outside (0, {budget:.4g}]")
        if not 0 < d["comparison"]["dt"] <= budget:
            raise ConfigurationError("comparison.dt outside the stability budget")
        tolerances = [
            d["kernel_check"]["tol"], d["comparison"]["tol"], d["waves"]["newton_tol"],
            d["waves"]["residual_tol"], d["waves"]["agreement_tol"], d["waves"]["identity_tol"],
            d["waves"]["difference_tol"], d["spectral"]["root_tol"], d["spectral"]["rate_tol"],
            d["entire"]["super_tol"], d["entire"]["eps"], d["entire"]["p_tol"],
        ]
        if any(not (isinstance(t, (int, float)) and t > 0) for t in tolerances):
            raise ConfigurationError("all tolerances must be positive numbers")
        nl_ = d["entire"]["n_list"]
        if not nl_ or any(int(n) != n or n < 1 for n in nl_):
            raise ConfigurationError("entire.n_list must hold positive integers")
        if d["entire"]["case_expect"] not in (None, "a", "b", "c"):
            raise ConfigurationError("entire.case_expect must be one of a, b, c")

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def run_name(self) -> str:
        return self.data.get("name") or f"run-{self.hash()[:12]}"


# ----------------------------------------------------------------------------
# artifacts


def claim(value, tol, passed: bool, relation: str) -> dict:
    """A checked number, the tolerance it was tested against and the outcome."""
    return {"value": value, "tol": tol, "relation": relation, "passed": bool(passed)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (int, float, str)):
        return obj.value  # enums
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _all_passed(obj) -> bool:
    if isinstance(obj, dict):
        if "passed" in obj and isinstance(obj["passed"], bool) and not obj["passed"]:
            return False
        return all(_all_passed(v) for v in obj.values())
    if isinstance(obj, list):
        return all(_all_passed(v) for v in obj)
    return True


class ArtifactWriter:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _record(self, rel: str) -> str:
        self.files[rel] = hashlib.sha256((self.root / rel).read_bytes()).hexdigest()
        return rel

    def text(self, rel: str, content: str) -> str:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
        return self._record(rel)

    def json(self, rel: str, obj) -> str:
        return self.text(rel, dumps(obj))

    def csv(self, rel: str, u: GridFunction, column: str = "u") -> str:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(u, path, column)
        return self._record(rel)


# ----------------------------------------------------------------------------
# pipeline context: lazily computed shared objects


@dataclass
class Context:
    cfg: ExperimentConfig
    out: ArtifactWriter
    jobs: int = 1
    cache: dict = field(default_factory=dict)

    def _get(self, key, make: Callable):
        if key not in self.cache:
            self.cache[key] = make()
        return self.cache[key]

    @property
    def spec(self) -> KernelSpec:
        return self._get("spec", self.cfg.kernel)

    @property
    def nl(self) -> IgnitionNonlinearity:
        return self._get("nl", self.cfg.reaction)

    def wave_kwargs(self) -> dict:
        g, w = self.cfg["grid"], self.cfg["waves"]
        return {"window": tuple(g["window"]), "h": g["h"], "tol": w["newton_tol"],
                "fd_order": w["fd_order"], "dt": g["track_dt"]}

    def waves(self) -> tuple[WaveSolution, WaveSolution]:
        def make():
            kw = self.wave_kwargs()
            return (solve_wave(self.spec, self.nl, Orientation.INCREASING, "newton", **kw),
                    solve_wave(self.spec, self.nl, Orientation.DECREASING, "newton", **kw))
        return self._get("waves", make)

    def roots(self):
        def make():
            w, wh = self.waves()
            return find_roots(self.spec, w.speed, wh.speed, self.nl.fprime_at_1,
                              tol=self.cfg["spectral"]["root_tol"])
        return self._get("roots", make)


# ----------------------------------------------------------------------------
# stages


def stage_kernel(ctx: Context) -> dict:
    tol = ctx.cfg["kernel_check"]["tol"]
    rep = kernel_check(ctx.spec, tol)
    ctx.out.json("kernel/spec.json", ctx.spec.to_dict())
    diag = {
        "report": rep.to_dict(),
        "mass": claim(rep.mass, tol, abs(rep.mass - 1.0) <= tol, "|mass - 1| <= tol"),
        "witnesses_straddle_zero": claim(list(rep.j2_witnesses), 0.0,
                                         rep.j2_witnesses[0] <= 0.0 <= rep.j2_witnesses[1], "a <= 0 <= b"),
    }
    return diag


def stage_comparison(ctx: Context) -> dict:
    c = ctx.cfg["comparison"]
    rng = np.random.default_rng(ctx.cfg.seed)
    lo, hi = c["window"]
    n = int(round((hi - lo) / c["h"])) + 1
    kern = sample_kernel(ctx.spec, c["h"])
    worst, fails = 0.0, 0
    for _ in range(int(c["pairs"])):
        u0, v0 = random_ordered_pair(rng, lo, c["h"], n)
        rep = comparison_test(kern, ctx.nl, u0, v0, c["T"], c["dt"], tol=c["tol"])
        worst = max(worst, rep.max_violation)
        fails += not rep.passed
    return {"seed": ctx.cfg.seed, "pairs": int(c["pairs"]), "T": c["T"],
            "max_violation": claim(worst, c["tol"], fails == 0, "max (u - v)+ <= tol")}


def _wave_record(ctx: Context, tag: str, w: WaveSolution) -> dict:
    rel = ctx.out.csv(f"waves/{tag}.csv", w.profile, "phi")
    return {**w.summary(), "profile_csv": rel}


def _wave_claims(ctx: Context, w: WaveSolution, wh: WaveSolution, m1: float) -> dict:
    wc = ctx.cfg["waves"]
    If, Ifh = reaction_integral(w, ctx.nl), reaction_integral(wh, ctx.nl)
    ids = speed_identity_check(w, ctx.spec, ctx.nl, m1)
    idh = speed_identity_check(wh, ctx.spec, ctx.nl, m1)
    dif = abs((w.speed - wh.speed) - (If + Ifh))
    rtol = wc["residual_tol"]
    return {
        "speeds": {"c": w.speed, "c_hat": wh.speed, "m1": m1, "int_f_phi": If, "int_f_phi_hat": Ifh},
        "residual": {"increasing": claim(w.residual_norm, rtol, w.residual_norm <= rtol, "<="),
                     "decreasing": claim(wh.residual_norm, rtol, wh.residual_norm <= rtol, "<=")},
        "monotone": {"increasing": claim(is_monotone(w), 1e-10, is_monotone(w), "steps >= -tol"),
                     "decreasing": claim(is_monotone(wh), 1e-10, is_monotone(wh), "steps <= tol")},
        "speed_identity": {
            "increasing": claim(ids, wc["identity_tol"], ids <= wc["identity_tol"], "|c + m1 - int f(phi)| <= tol"),
            "decreasing": claim(idh, wc["identity_tol"], idh <= wc["identity_tol"],
                                "|c_hat + m1 + int f(phi_hat)| <= tol"),
            "difference": claim(dif, wc["difference_tol"], dif <= wc["difference_tol"],
                                "|(c - c_hat) - (int f(phi) + int f(phi_hat))| <= tol"),
        },
        "ordering": claim(w.speed - wh.speed, 0.0, w.speed > wh.speed, "c - c_hat > 0"),
        "classification": classify_speeds(w.speed, wh.speed).value,
    }


def _value(x):
    return x["value"] if isinstance(x, dict) else x


def stage_waves(ctx: Context) -> dict:
    wc = ctx.cfg["waves"]
    method = wc["method"]
    m1 = kernel_moment(ctx.spec, 1)
    summary: dict = {"kernel": ctx.spec.to_dict(), "reaction": ctx.nl.to_dict(), "method": method}
    diag: dict = {}
    if method in ("newton", "both"):
        w, wh = ctx.waves()
        summary["increasing"] = _wave_record(ctx, "increasing_newton", w)
        summary["decreasing"] = _wave_record(ctx, "decreasing_newton", wh)
        diag["newton"] = _wave_claims(ctx, w, wh, m1)
    if method in ("tracking", "both"):
        kw = ctx.wave_kwargs()
        tr = solve_wave(ctx.spec, ctx.nl, Orientation.INCREASING, "tracking", **kw)
        trh = solve_wave(ctx.spec, ctx.nl, Orientation.DECREASING, "tracking", **kw)
        summary["increasing_tracking"] = _wave_record(ctx, "increasing_tracking", tr)
        summary["decreasing_tracking"] = _wave_record(ctx, "decreasing_tracking", trh)
        # the tracking profile is a recentred time slice, not a solution of the discrete BVP:
        # its identities are reported, the claims are made for the Newton fronts
        t = _wave_claims(ctx, tr, trh, m1)
        diag["tracking"] = {"speeds": t["speeds"], "classification": t["classification"],
                            "speed_identity": {k: v["value"] for k, v in t["speed_identity"].items()}}
    if method == "both":
        rel = lambda a, b: abs(a - b) / abs(a)
        da, db = rel(w.speed, tr.speed), rel(wh.speed, trh.speed)
        tol = wc["agreement_tol"]
        diag["dual_solver"] = {
            "increasing": claim(da, tol, da <= tol, "|c_N - c_T|/|c_N| <= tol"),
            "decreasing": claim(db, tol, db <= tol, "|c_N - c_T|/|c_N| <= tol"),
        }
    if method not in ("newton", "tracking", "both"):
        raise ValidationError(f"unknown wave method {method!r}")
    main = diag["newton"] if "newton" in diag else diag["tracking"]
    diag["summary"] = {
        "c": main["speeds"]["c"], "c_hat": main["speeds"]["c_hat"],
        "residual": max(summary[k]["residual_norm"] for k in ("increasing", "decreasing") if k in summary)
        if "increasing" in summary else None,
        "identity_residual": max(_value(main["speed_identity"]["increasing"]),
                                 _value(main["speed_identity"]["decreasing"])),
        "classification": main["classification"],
    }
    ctx.out.json("waves/waves.json", summary)
    ctx.out.text("waves/plot_waves.py", PLOT_WAVES)
    return diag


def spectral_report(spec: KernelSpec, nl: IgnitionNonlinearity, w: WaveSolution, wh: WaveSolution,
                    sc: dict, roots=None) -> tuple[dict, dict]:
    """Roots, sign patterns, tail fits and ratio diagnostics for a pair of fronts."""
    roots = roots or find_roots(spec, w.speed, wh.speed, nl.fprime_at_1, tol=sc["root_tol"])
    band = tuple(sc["band"])
    n = int(sc["samples"])
    from .spectral import characteristic_eval
    res = {
        "F1(mu1)": characteristic_eval("F1", roots.mu1, spec, w.speed),
        "F2(mu21)": characteristic_eval("F2", roots.mu21, spec, w.speed, nl.fprime_at_1),
        "F2(mu22)": characteristic_eval("F2", roots.mu22, spec, w.speed, nl.fprime_at_1),
        "F1hat(mu1_hat)": characteristic_eval("F1hat", roots.mu1_hat, spec, wh.speed),
        "F2hat(mu21_hat)": characteristic_eval("F2hat", roots.mu21_hat, spec, wh.speed, nl.fprime_at_1),
        "F2hat(mu22_hat)": characteristic_eval("F2hat", roots.mu22_hat, spec, wh.speed, nl.fprime_at_1),
    }
    diag: dict = {
        "roots": roots.to_dict(),
        "root_residuals": {k: claim(abs(v), sc["root_tol"], abs(v) <= sc["root_tol"], "|F(root)| <= tol")
                           for k, v in res.items()},
        "sign_patterns": {
            "F1": claim(sign_pattern("F1", spec, w.speed, 0.0, (roots.mu1,), n), n, None, "samples"),
            "F2": claim(sign_pattern("F2", spec, w.speed, nl.fprime_at_1, (roots.mu21, roots.mu22), n), n,
                        None, "samples"),
            "F1hat": claim(sign_pattern("F1hat", spec, wh.speed, 0.0, (roots.mu1_hat,), n), n, None, "samples"),
            "F2hat": claim(sign_pattern("F2hat", spec, wh.speed, nl.fprime_at_1,
                                        (roots.mu21_hat, roots.mu22_hat), n), n, None, "samples"),
        },
    }
    for v in diag["sign_patterns"].values():
        v["passed"] = bool(v["value"])
    fit_r = tail_rate_fit(w.profile, "right", band)
    fit_lh = tail_rate_fit(wh.profile, "left", band)
    rel = lambda a, b: abs(a - b) / abs(b)
    diag["tail_fits"] = {
        "phi_right": {"fit": fit_r.to_dict(), "target": roots.mu21,
                      "rate": claim(rel(fit_r.rate, roots.mu21), sc["rate_tol"],
                                    rel(fit_r.rate, roots.mu21) <= sc["rate_tol"], "|rate/mu21 - 1| <= tol"),
                      "r2": claim(fit_r.r2, sc["r2_min"], fit_r.r2 >= sc["r2_min"], ">=")},
        "phi_hat_left": {"fit": fit_lh.to_dict(), "target": -roots.mu21_hat,
                         "rate": claim(rel(fit_lh.rate, -roots.mu21_hat), sc["rate_tol"],
                                       rel(fit_lh.rate, -roots.mu21_hat) <= sc["rate_tol"],
                                       "|rate/(-mu21_hat) - 1| <= tol"),
                         "r2": claim(fit_lh.r2, sc["r2_min"], fit_lh.r2 >= sc["r2_min"], ">=")},
    }
    for tag, wave, side in (("phi_left", w, "left"), ("phi_hat_right", wh, "right")):
        try:
            diag["tail_fits"][tag] = {"fit": tail_rate_fit(wave.profile, side, band).to_dict()}
        except NligniteError as exc:
            diag["tail_fits"][tag] = {"error": str(exc)}
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rd = ratio_diagnostic(w, roots.mu1, spec, band)
        rdh = ratio_diagnostic(wh, roots.mu1_hat, spec, band)
    diag["ratio"] = {"increasing": {**rd.to_dict(), "mu1": roots.mu1},
                     "decreasing": {**rdh.to_dict(), "mu1_hat": roots.mu1_hat}}
    return diag, roots.to_dict()


def stage_spectral(ctx: Context) -> dict:
    w, wh = ctx.waves()
    diag, roots = spectral_report(ctx.spec, ctx.nl, w, wh, ctx.cfg["spectral"], ctx.roots())
    ctx.out.json("spectral/roots.json", roots)
    return diag


def _snapshot_times(run, every: float) -> list[float]:
    tr = run.trajectories[run.n_list[-1]]
    t0, t1 = tr.times[0], tr.times[-1]
    ts = np.arange(math.ceil(t0 / every) * every, t1 + 1e-9, every)
    return [float(t) for t in ts]


def stage_entire(ctx: Context) -> dict:
    ec = ctx.cfg["entire"]
    w, wh = ctx.waves()
    roots = ctx.roots()
    pair = prepare_pair(w, wh, roots, ctx.nl)
    case = case_of(pair)
    if ec["case_expect"] is not None and ec["case_expect"] != case.value:
        raise ValidationError(f"expected case ({ec['case_expect']}) but the speeds give case ({case.value})",
                              c=pair.c, c_hat=pair.c_hat)
    params = pair.params(ec["n_factor"], ec["p0"])
    diag: dict = {"pair": pair.to_dict(), "params": params.to_dict(), "case": case.value}

    # p(t): closed form against RK4, and the exponential bound
    ts, ps = p_ode_rk4(params, -20.0, 1e-3)
    dev = float(np.max(np.abs(p_closed_form(params, ts) - ps)))
    tt = np.linspace(-20.0, 0.0, 401)
    excess = p_closed_form(params, tt) - params.c0 * tt - params.omega
    bound = params.K * np.exp(params.c0 * params.sigma * tt)
    diag["p"] = {
        "rk4_deviation": claim(dev, ec["p_tol"], dev <= ec["p_tol"], "max |closed - rk4| <= tol"),
        "bound_lower": claim(float(excess.min()), 0.0, bool(np.all(excess > 0)), "p - c0 t - omega > 0"),
        "bound_upper": claim(float(np.max(excess - bound)), 0.0, bool(np.all(excess <= bound * (1 + 1e-12))),
                             "p - c0 t - omega <= K exp(c0 sigma t)"),
        "p_nonpositive": claim(float(np.max(p_closed_form(params, tt))), 0.0,
                               bool(np.all(p_closed_form(params, tt) <= 0)), "p(t) <= 0"),
    }

    # supersolution and the falsification probe
    t0, t1, st = ec["super_t"]
    tg = np.arange(t0, t1 + 1e-9, st)
    sup = supersolution_check(pair, params, tg, ec["super_tol"])
    weak = supersolution_check(pair, pair.params(ec["falsify_factor"], ec["p0"]), tg, ec["super_tol"])
    diag["supersolution"] = {
        "check": {**sup.to_dict(), **claim(sup.min_residual, ec["super_tol"], sup.passed, "min L(u_bar) >= -tol")},
        "falsification": {**weak.to_dict(),
                          **claim(weak.min_residual, ec["super_tol"], not weak.passed,
                                  "min L(u_bar) < -tol when N is far below N*")},
    }

    # backward Cauchy sequence
    theta = params.omega if ec["theta"] is None else float(ec["theta"])
    n_list = [int(n) for n in ec["n_list"]]
    partner = None if ec["theta_step"] in (None, 0) else theta + float(ec["theta_step"])
    thetas = [theta] + ([partner] if partner is not None else [])
    t_forward = ec["t_forward"]
    if t_forward is None:
        t_forward = max(default_forward_horizon(pair, th) for th in thetas)
    window = entire_window(pair, thetas, max(n_list), t_forward)
    dt = ctx.cfg["grid"]["dt"]
    run = build_entire(pair, params, theta, n_list, t_forward, dt=dt, checkpoint=ec["checkpoint"],
                       window=window, jobs=ctx.jobs)
    other = None
    if partner is not None:
        other = build_entire(pair, params, partner, n_list, t_forward, dt=dt, checkpoint=ec["checkpoint"],
                             window=window, jobs=ctx.jobs)
    rd = run.diagnostics
    mono = rd["monotone_in_n"]
    diag["construction"] = {
        "theta": theta, "omega": params.omega, "shift": rd["shift"], "window": rd["window"],
        "dt": rd["dt"], "t_forward": rd["t_forward"],
        "sandwich_lower": claim(rd["sandwich_lower"]["min"], rd["sandwich_lower"]["tol"],
                                rd["sandwich_lower"]["passed"], "min (u_n - u_low) >= -tol"),
        "sandwich_lower_at": {k: rd["sandwich_lower"][k] for k in ("x", "t", "n")},
        "upper_bound": claim(rd["upper_bound"]["max"], rd["upper_bound"]["tol"], rd["upper_bound"]["passed"],
                             "max u_n - 1 <= tol"),
        "below_supersolution": claim(rd["below_supersolution"]["min"], rd["below_supersolution"]["tol"],
                                     rd["below_supersolution"]["passed"], "min (u_bar - u_n) >= -tol"),
        "monotone_in_n": [{"n": m["n"], **claim(m["min_gap"], m["tol"], m["passed"], "min (u_m - u_n) >= -tol")}
                          for m in mono],
        "successive_differences": {**rd["successive_differences"],
                                   "passed": rd["successive_differences"]["decreasing"]},
        "ut_min": claim(rd["ut_min"]["value"], MONOTONE_TOL, rd["ut_min"]["value"] >= -MONOTONE_TOL,
                        "min u_t >= -tol"),
        "lipschitz": rd["lipschitz"],
    }
    lt = limit_table(run, ec["limit_T"])
    diag["limit"] = {
        "table": {"T": lt["T"], "D": lt["D"]},
        "strictly_decreasing": claim(lt["D"], 0.0, lt["strictly_decreasing"], "D(T) strictly decreasing in T"),
        "decay_rate": claim(lt["decay_rate"], lt["rate_floor"], lt["rate_ok"], "fitted rate >= 0.5 c0 sigma"),
        "separated": _separated_limit(run, lt, ec["eps"], ec["separation"]),
    }
    diag["qualitative"] = qualitative_checks(run, case, ec["eps"], other)

    snaps = []
    for t in _snapshot_times(run, ec["snapshot_every"]):
        rel = ctx.out.csv(f"entire/u_n{run.n_list[-1]}_t{t:+08.2f}.csv", run.state(run.n_list[-1], t))
        snaps.append({"t": t, "csv": rel})
    for n in run.n_list:
        rel = f"entire/u_n{n}_final.bin"
        (ctx.out.root / rel).parent.mkdir(parents=True, exist_ok=True)
        write_checkpoint(run.trajectories[n].final, ctx.out.root / rel)
        ctx.out._record(rel)
    fronts = _front_tracks(run)
    diag["front_separation"] = _separation_report(fronts)
    ctx.out.json("entire/fronts.json", fronts)
    ctx.out.json("entire/snapshots.json", {"n": run.n_list[-1], "snapshots": snaps})
    ctx.out.text("entire/plot_entire.py", PLOT_ENTIRE)
    return diag


def front_separation(run, T: float) -> float:
    """Distance between the two fronts of the subsolution at t = -T."""
    pair = run.pair
    return (pair.c - pair.c_hat) * T - 2.0 * run.theta


def _separated_limit(run, table: dict, eps: float, radii: float) -> dict:
    """D(T) <= eps at every tabulated T whose fronts are at least ``radii`` kernel radii apart."""
    r = kernel_radius(run.pair.wave.kernel)
    rows = [{"T": T, "D": D, "separation": front_separation(run, T)} for T, D in zip(table["T"], table["D"])]
    far = [row for row in rows if row["separation"] >= radii * r]
    worst = max((row["D"] for row in far), default=None)
    out = claim(worst, eps, bool(far) and worst <= eps, f"max D(T) <= eps over separation >= {radii:g} radii")
    out.update(kernel_radius=r, rows=rows)
    return out


def _front_tracks(run) -> dict:
    """Leftmost and rightmost level-1/2 crossings of u_n over time (the valley edges)."""
    tr = run.trajectories[run.n_list[-1]]
    x = run.x
    rows = []
    for t, s in zip(tr.times, tr.states):
        below = np.nonzero(s.values < 0.5)[0]
        if below.size == 0:
            rows.append({"t": float(t), "left": None, "right": None})
        else:
            rows.append({"t": float(t), "left": float(x[below[0]]), "right": float(x[below[-1]])})
    return {"n": run.n_list[-1], "level": 0.5, "tracks": rows}


def _separation_report(fronts: dict) -> dict:
    """Width of the region where u_n < 1/2, tracked until it closes (reported, not asserted)."""
    rows = [r for r in fronts["tracks"] if r["left"] is not None]
    widths = [r["right"] - r["left"] for r in rows]
    closed = next((r["t"] for r in fronts["tracks"] if r["left"] is None and r["t"] > rows[0]["t"]), None) \
        if rows else None
    return {"initial_width": widths[0] if widths else None, "final_width": widths[-1] if widths else None,
            "nonincreasing": all(b <= a + 1e-12 for a, b in zip(widths, widths[1:])),
            "closed_at": closed}


STAGE_FUNCS: dict[str, Callable[[Context], dict]] = {
    "kernel": stage_kernel,
    "comparison": stage_comparison,
    "waves": stage_waves,
    "spectral": stage_spectral,
    "entire": stage_entire,
}


# ----------------------------------------------------------------------------
# driver


@dataclass
class PipelineResult:
    exit_code: int
    manifest: dict
    out_dir: Path


def output_root(explicit: str | Path | None = None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_ENV) or "runs")


def run_stages(cfg: ExperimentConfig, stages, out_dir: Path, jobs: int = 1,
               cache: dict | None = None) -> PipelineResult:
    """Run ``stages`` in order; a failing stage stops the rest.

    Exit code: 0 when every claim passed, the error's code when a stage raised,
    4 when all stages ran but some claim failed.
    """
    writer = ArtifactWriter(out_dir)
    ctx = Context(cfg, writer, jobs, cache if cache is not None else {})
    writer.json("config.json", cfg.data)
    status: dict = {}
    exit_code = 0
    for name in STAGES:
        if name not in stages:
            continue
        if exit_code not in (0, 4):
            status[name] = {"status": "skipped"}
            continue
        t = time.perf_counter()
        try:
            diag = STAGE_FUNCS[name](ctx)
        except NligniteError as exc:
            log.error("stage %s failed: %s", name, exc)
            status[name] = {"status": "failed", "error": {"type": type(exc).__name__, "message": str(exc),
                                                          "payload": _jsonable(_safe_payload(exc.payload))}}
            writer.json(f"{name}/diagnostics.json", {"stage": name, "status": "failed",
                                                     "error": status[name]["error"]})
            exit_code = exc.exit_code
            continue
        log.info("stage %s finished in %.1f s", name, time.perf_counter() - t)
        ok = _all_passed(diag)
        writer.json(f"{name}/diagnostics.json", {"stage": name, "passed": ok, **diag})
        status[name] = {"status": "ok", "passed": ok}
        if not ok and exit_code == 0:
            exit_code = 4
    manifest = {
        "tool": "nlignite", "version": __version__, "config_hash": cfg.hash(), "seed": cfg.seed,
        "stages": status, "exit_code": exit_code,
        "artifacts": dict(sorted(writer.files.items())),
    }
    (out_dir / "manifest.json").write_text(dumps(manifest))
    return PipelineResult(exit_code, manifest, out_dir)


def _safe_payload(payload: dict) -> dict:
    out = {}
    for k, v in payload.items():
        if isinstance(v, (int, float, str, bool, list, tuple)) or v is None:
            out[k] = v
    return out


def run_pipeline(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1, until: str | None = None) -> PipelineResult:
    stages = STAGES if until is None else STAGES[: STAGES.index(until) + 1]
    return run_stages(cfg, stages, out_dir, jobs)


def expand_sweep(base: dict, axes: dict[str, list]) -> list[dict]:
    """Cartesian product of dotted-key axes applied on top of ``base`` overrides."""
    import itertools
    keys = list(axes)
    points = []
    for values in itertools.product(*(axes[k] for k in keys)):
        o = dict(base)
        o.update(dict(zip(keys, values)))
        points.append(o)
    return points


def load_waves_summary(path: str | Path, spec: KernelSpec) -> tuple[WaveSolution, WaveSolution]:
    """Rebuild both Newton fronts from a waves.json written by the waves stage."""
    path = Path(path)
    data = json.loads(path.read_text())
    root = path.parent.parent
    out = []
    for key, orient, ff in (("increasing", Orientation.INCREASING, (0.0, 1.0)),
                            ("decreasing", Orientation.DECREASING, (1.0, 0.0))):
        rec = data[key]
        prof = read_csv(root / rec["profile_csv"], *ff)
        kern = sample_kernel(spec, prof.h)
        out.append(WaveSolution(prof, float(rec["speed"]), orient, float(rec["residual_norm"]),
                                rec.get("method", "newton"), 6, kern))
    return out[0], out[1]


PLOT_WAVES = '''"""Plot the computed fronts. Usage: python plot_waves.py  (needs matplotlib)."""
import csv
import json
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
summary = json.loads((here / "waves.json").read_text())
fig, ax = plt.subplots()
for key in ("increasing", "decreasing", "increasing_tracking", "decreasing_tracking"):
    if key not in summary:
        continue
    rows = list(csv.reader(open(here.parent / summary[key]["profile_csv"])))[1:]
    ax.plot([float(r[0]) for r in rows], [float(r[1]) for r in rows],
            label=f"{key} (speed {summary[key]['speed']:.5f})")
ax.set_xlabel("xi")
ax.set_ylabel("profile")
ax.legend()
fig.savefig(here / "waves.png", dpi=150)
'''

PLOT_ENTIRE = '''"""Plot u(x, t) snapshots and the valley edges. Usage: python plot_entire.py  (needs matplotlib)."""
import csv
import json
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
snaps = json.loads((here / "snapshots.json").read_text())
fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))
for s in snaps["snapshots"]:
    rows = list(csv.reader(open(here.parent / s["csv"])))[1:]
    a1.plot([float(r[0]) for r in rows], [float(r[1]) for r in rows], label=f"t={s['t']:g}")
a1.set_xlabel("x")
a1.set_ylabel("u")
a1.legend(fontsize=6)
fr = json.loads((here / "fronts.json").read_text())
ts = [r["t"] for r in fr["tracks"] if r["left"] is not None]
a2.plot([r["left"] for r in fr["tracks"] if r["left"] is not None], ts, label="left edge")
a2.plot([r["right"] for r in fr["tracks"] if r["right"] is not None], ts, label="right edge")
a2.set_xlabel("x")
a2.set_ylabel("t")
a2.legend()
fig.savefig(here / "entire.png", dpi=150)
'''
