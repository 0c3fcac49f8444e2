"""End-to-end experiments: time-domain plant, windowed phasor extraction, controller bank."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from ahss.controllers import (
    DIVERGENCE_FACTOR,
    AhssGains,
    AhssState,
    HssController,
    ToneBank,
    hss_gain_bound,
    optimal_control,
    tone_bank_step,
)
from ahss.duct_model import DuctGeometry, build_duct
from ahss.harmonic import avg_power, extract
from ahss.lti_core import (
    ConfigurationError,
    StateSpaceModel,
    TonalDisturbance,
    ValidationError,
    simulate,
    transfer_at,
)
from ahss.stability_lab import oracle_report

logger = logging.getLogger(__name__)

CONTROLLERS = ("none", "hss", "ahss")
PRESETS = ("ex1a", "ex1b", "ex2a", "ex2b", "ex3a", "ex3b")
OMEGA_1 = 251.0
OMEGA_2 = 628.0


# ---------------------------------------------------------------------------
# configuration


def _check_keys(data: dict, allowed, where: str):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def parse_complex(value) -> complex:
    """Accept numbers, strings like ``'1.5-0.2j'`` or ``[re, im]`` pairs."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigurationError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(str(value).replace(" ", "")) if isinstance(value, str) else complex(value)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse complex value {value!r}") from exc


@dataclass
class EstimateSpec:
    """Initial estimate of one tone's plant map.

    Either an explicit complex matrix ``value`` or ``scale * exp(j phase)``
    applied to the true map (``scale`` and ``phase`` may be scalars or
    element-wise matrices).
    """

    scale: Any = 1.0
    phase: Any = 0.0
    value: Any = None

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateSpec":
        _check_keys(data, ("scale", "phase", "value"), "initial_estimate")
        return cls(**data)

    def resolve(self, M_star: np.ndarray) -> np.ndarray:
        if self.value is not None:
            vals = np.atleast_2d(np.array(self.value, dtype=object))
            M0 = np.vectorize(parse_complex, otypes=[complex])(vals)
            if M0.shape != M_star.shape:
                # allow a flat column for single-input plants
                M0 = M0.reshape(M_star.shape)
            return M0
        scale = np.asarray(self.scale, dtype=float)
        phase = np.asarray(self.phase, dtype=float)
        if scale.ndim:
            scale = scale.reshape(M_star.shape)
        if phase.ndim:
            phase = phase.reshape(M_star.shape)
        return scale * np.exp(1j * phase) * M_star

    def to_dict(self) -> dict:
        out = {}
        if self.value is not None:
            out["value"] = self.value
        else:
            out["scale"] = self.scale
            out["phase"] = self.phase
        return out


@dataclass
class ToneSpec:
    omega: float
    cos: list
    sin: list
    initial_estimate: EstimateSpec = field(default_factory=EstimateSpec)

    @classmethod
    def from_dict(cls, data: dict) -> "ToneSpec":
        _check_keys(data, ("omega", "cos", "sin", "initial_estimate"), "tone")
        est = EstimateSpec.from_dict(data.get("initial_estimate", {}))
        return cls(
            omega=float(data["omega"]),
            cos=[float(x) for x in np.atleast_1d(data.get("cos", [0.0]))],
            sin=[float(x) for x in np.atleast_1d(data.get("sin", [0.0]))],
            initial_estimate=est,
        )


@dataclass
class Timing:
    update_period: float = 0.1
    sample_rate: float = 1000.0
    duration: float = 12.0
    control_enable_time: float = 1.0

    @property
    def window_samples(self) -> int:
        return int(round(self.update_period * self.sample_rate))

    @property
    def n_windows(self) -> int:
        return int(math.floor(self.duration / self.update_period + 1e-9))

    @property
    def enable_window(self) -> int:
        return int(round(self.control_enable_time / self.update_period))

    def validate(self):
        if self.update_period <= 0 or self.sample_rate <= 0 or self.duration <= 0:
            raise ConfigurationError("timing values must be positive")
        spw = self.update_period * self.sample_rate
        if abs(spw - round(spw)) > 1e-9 or round(spw) < 1:
            raise ConfigurationError("update_period * sample_rate must be a positive integer")
        ratio = self.control_enable_time / self.update_period
        if self.control_enable_time < 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("control_enable_time must be a nonnegative multiple of update_period")
        if self.enable_window > self.n_windows:
            raise ConfigurationError("control_enable_time exceeds duration")


@dataclass
class GainSpec:
    """Controller gains; ``None`` entries take the defaults derived from each tone's M0."""

    mu: float = 0.2
    gamma: float = 0.2
    nu1: Optional[float] = None
    nu2: Optional[float] = None
    rho: Optional[float] = None
    nu_scale: float = 0.1

    def for_estimate(self, M0: np.ndarray) -> tuple[AhssGains, float]:
        fro2 = float(np.vdot(M0, M0).real)
        nu1 = self.nu_scale * fro2 if self.nu1 is None else self.nu1
        nu2 = self.nu_scale * fro2 if self.nu2 is None else self.nu2
        gains = AhssGains(mu=self.mu, gamma=self.gamma, nu1=nu1, nu2=nu2)
        rho = gains.hss_rho(M0) if self.rho is None else self.rho
        return gains, rho


@dataclass
class ExperimentConfig:
    plant: dict
    tones: list
    controller: str = "ahss"
    timing: Timing = field(default_factory=Timing)
    gains: GainSpec = field(default_factory=GainSpec)
    u0: Any = None
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    name: str = ""

    KEYS = ("plant", "tones", "controller", "timing", "gains", "u0", "outputs", "seed", "name")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping")
        _check_keys(data, cls.KEYS, "config")
        for key in ("plant", "tones"):
            if key not in data:
                raise ConfigurationError(f"config is missing {key!r}")
        timing = data.get("timing", {}) or {}
        gains = data.get("gains", {}) or {}
        outputs = data.get("outputs", {}) or {}
        _check_keys(timing, [f.name for f in dataclasses.fields(Timing)], "timing")
        _check_keys(gains, [f.name for f in dataclasses.fields(GainSpec)], "gains")
        _check_keys(outputs, ("dir",), "outputs")
        cfg = cls(
            plant=data["plant"],
            tones=[t if isinstance(t, ToneSpec) else ToneSpec.from_dict(t) for t in data["tones"]],
            controller=str(data.get("controller", "ahss")),
            timing=Timing(**{k: float(v) for k, v in timing.items()}),
            gains=GainSpec(**gains),
            u0=data.get("u0"),
            outputs=outputs,
            seed=int(data.get("seed", 0)),
            name=str(data.get("name", "")),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "plant": self.plant,
            "tones": [
                {"omega": t.omega, "cos": t.cos, "sin": t.sin, "initial_estimate": t.initial_estimate.to_dict()}
                for t in self.tones
            ],
            "controller": self.controller,
            "timing": dataclasses.asdict(self.timing),
            "gains": dataclasses.asdict(self.gains),
            "u0": self.u0,
            "outputs": self.outputs,
            "seed": self.seed,
        }

    def validate(self):
        if self.controller not in CONTROLLERS:
            raise ConfigurationError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if not self.tones:
            raise ConfigurationError("at least one tone is required")
        freqs = [t.omega for t in self.tones]
        if len(set(freqs)) != len(freqs) or min(freqs) <= 0:
            raise ConfigurationError("tone frequencies must be positive and distinct")
        if set(self.plant) not in ({"duct"}, {"matrices"}):
            raise ConfigurationError("plant must contain exactly one of 'duct' or 'matrices'")
        self.timing.validate()

    def build_model(self) -> StateSpaceModel:
        if "duct" in self.plant:
            spec = dict(self.plant["duct"] or {})
            allowed = [f.name for f in dataclasses.fields(DuctGeometry)]
            _check_keys(spec, allowed, "plant.duct")
            for key in ("speaker_positions", "microphone_positions", "damping"):
                if key in spec:
                    spec[key] = tuple(np.atleast_1d(spec[key]).tolist())
            try:
                return build_duct(DuctGeometry(**spec))
            except ValidationError as exc:
                raise ConfigurationError(str(exc)) from exc
        spec = dict(self.plant["matrices"])
        _check_keys(spec, ("A", "B", "C", "D", "D1", "D2", "x0"), "plant.matrices")
        try:
            return StateSpaceModel(**spec)
        except ValidationError as exc:
            raise ConfigurationError(str(exc)) from exc

    def disturbance(self, p: int) -> TonalDisturbance:
        try:
            return TonalDisturbance(
                [t.omega for t in self.tones],
                np.array([np.resize(t.cos, p) if len(t.cos) == 1 else t.cos for t in self.tones]),
                np.array([np.resize(t.sin, p) if len(t.sin) == 1 else t.sin for t in self.tones]),
            )
        except ValidationError as exc:
            raise ConfigurationError(str(exc)) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path: Union[str, Path]):
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# presets


def preset(name: str, controller: str = "ahss") -> ExperimentConfig:
    """Configurations of the three duct examples (SISO, single-input two-output, two-tone MIMO)."""
    pi = math.pi
    if name in ("ex1a", "ex1b"):
        plant = {"duct": {"speaker_positions": [0.4], "microphone_positions": [0.3]}}
        phase = pi / 3 if name == "ex1a" else 2 * pi / 3
        tones = [ToneSpec(OMEGA_1, [2.0], [1.0], EstimateSpec(scale=2.0, phase=phase))]
    elif name in ("ex2a", "ex2b"):
        plant = {"duct": {"speaker_positions": [0.4], "microphone_positions": [0.3, 1.7]}}
        phases = [pi / 4, pi / 3] if name == "ex2a" else [3 * pi / 4, 2 * pi / 3]
        tones = [ToneSpec(OMEGA_1, [2.0], [1.0], EstimateSpec(scale=[1.5, 0.5], phase=phases))]
    elif name in ("ex3a", "ex3b"):
        plant = {"duct": {"speaker_positions": [0.4, 1.25], "microphone_positions": [0.3, 1.7]}}
        if name == "ex3a":
            est = [EstimateSpec(0.6, pi / 6), EstimateSpec(0.9, pi / 3)]
        else:
            est = [EstimateSpec(0.2, pi / 7), EstimateSpec(0.6, pi / 14)]
        tones = [ToneSpec(OMEGA_1, [1.0], [1.0], est[0]), ToneSpec(OMEGA_2, [1.0], [1.0], est[1])]
    else:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg = ExperimentConfig(plant=plant, tones=tones, controller=controller, name=name)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# running


@dataclass(eq=False)
class ToneHistory:
    """Per-tone controller history in recursion indexing.

    ``y[k]`` is the k-th measurement (row 0 is NaN), ``u[k]`` the k-th command
    and ``M[k]`` the k-th estimate (k = 0 is the initial estimate).
    """

    omega: float
    M_star: np.ndarray
    d_hat: np.ndarray
    y: np.ndarray
    u: np.ndarray
    M: np.ndarray
    gains: AhssGains
    rho: float


@dataclass(eq=False)
class RunResult:
    config: ExperimentConfig
    t: np.ndarray
    y: np.ndarray
    u: np.ndarray
    tones: list
    open_loop_phasors: list
    diverged: bool = False
    truncated: bool = False
    oracles: dict = field(default_factory=dict)
    windows_run: int = 0

    @property
    def sample_rate(self) -> float:
        return self.config.timing.sample_rate

    def trailing_rms(self, seconds: float = 1.0) -> float:
        n = max(1, int(round(seconds * self.sample_rate)))
        tail = self.y[-n:]
        return float(np.sqrt(np.mean(np.sum(tail**2, axis=1)))) if tail.size else math.nan


def settling_time(model: StateSpaceModel) -> float:
    """4 / (zeta w_n) of the slowest mode, i.e. 4 / min(-Re spec A)."""
    return 4.0 / float(np.min(-np.linalg.eigvals(model.A).real))


def _u0_for(u0, i: int, m: int) -> np.ndarray:
    vals = u0[i] if isinstance(u0, (list, tuple)) and len(u0) and isinstance(u0[0], (list, tuple)) else u0
    out = np.array([parse_complex(v) for v in np.atleast_1d(np.array(vals, dtype=object))], dtype=complex)
    if out.shape != (m,):
        raise ConfigurationError(f"u0 must have {m} entries per tone")
    return out


def _make_controller(kind: str, M0, gains: AhssGains, rho: float, u0):
    if kind == "hss":
        return HssController.from_initial(M0, rho, u0)
    return AhssState.initial(M0, gains, u0)


def run(config: ExperimentConfig) -> RunResult:
    """Run one experiment window by window.

    During window k the plant is driven by the held phasor commands ``u_k``;
    the phasor measured over that window is ``y_{k+1}``.  Before the control
    enable time the command is zero; the window ending at the enable time
    carries the controllers' initial command and yields their first
    measurement.
    """
    config.validate()
    model = config.build_model()
    timing = config.timing
    settling = settling_time(model)
    if timing.update_period <= settling:
        logger.warning("update period %.3g s does not exceed the settling time %.3g s", timing.update_period, settling)
    dist = config.disturbance(model.n_disturbances)
    freqs = list(dist.frequencies)
    m = model.n_inputs

    histories = []
    controllers = []
    for i, tone in enumerate(config.tones):
        M_star = transfer_at(model, tone.omega, "control")
        d_hat = transfer_at(model, tone.omega, "disturbance") @ dist.phasor(i)
        M0 = tone.initial_estimate.resolve(M_star)
        gains, rho = config.gains.for_estimate(M0)
        u0 = np.zeros(m, dtype=complex) if config.u0 is None else _u0_for(config.u0, i, m)
        histories.append(dict(omega=tone.omega, M_star=M_star, d_hat=d_hat, gains=gains, rho=rho,
                              y=[np.full(M_star.shape[0], complex(np.nan, np.nan))], u=[u0], M=[M0]))
        controllers.append(_make_controller(config.controller, M0, gains, rho, u0))
    bank = ToneBank(freqs, controllers)

    N = timing.window_samples
    n_windows = timing.n_windows
    start_ctl = max(timing.enable_window - 1, 0) if config.controller != "none" else n_windows
    x = model.x0.copy()
    t_parts, y_parts, u_parts = [], [], []
    open_loop = []
    diverged = truncated = False
    first_norm = [None] * len(freqs)
    windows_run = 0
    for k in range(n_windows):
        active = k >= start_ctl
        control = bank.command if active else None
        span = (k * N / timing.sample_rate, (k + 1) * N / timing.sample_rate)
        sim = simulate(model, control, dist, span, timing.sample_rate, x0=x, frequencies=freqs, start_index=k * N)
        x = sim.x_final
        t_parts.append(sim.t)
        y_parts.append(sim.y)
        u_parts.append(sim.u)
        windows_run = k + 1
        if not active:
            open_loop.append([extract(sim.y, sim.t, w).value for w in freqs])
            if config.controller == "none":
                for h, yk in zip(histories, open_loop[-1]):
                    h["y"].append(yk)
                    h["u"].append(h["u"][0])
            continue
        bank, ys = tone_bank_step(bank, sim.y, sim.t)
        for i, (h, ctl, yk) in enumerate(zip(histories, bank.controllers, ys)):
            h["y"].append(yk.value)
            h["u"].append(ctl.u)
            if isinstance(ctl, AhssState) and ctl.k >= 2:
                h["M"].append(ctl.M)
            norm = float(np.linalg.norm(yk.value))
            if first_norm[i] is None:
                first_norm[i] = norm
            elif first_norm[i] > 0 and norm > DIVERGENCE_FACTOR * first_norm[i]:
                diverged = True
        if diverged or not np.all(np.isfinite(x)):
            diverged = True
            truncated = k + 1 < n_windows
            break

    tones = []
    for h, ctl in zip(histories, bank.controllers):
        M_hist = h["M"]
        if config.controller == "hss":
            M_hist = [ctl.M_e] * len(h["u"])
        elif config.controller == "none":
            M_hist = [np.full_like(h["M_star"], np.nan)] * len(h["u"])
        tones.append(ToneHistory(
            omega=h["omega"], M_star=h["M_star"], d_hat=h["d_hat"],
            y=np.array(h["y"]), u=np.array(h["u"]), M=np.array(M_hist),
            gains=h["gains"], rho=h["rho"],
        ))

    oracles = {}
    if config.controller == "ahss":
        for i, th in enumerate(tones):
            oracles[i] = oracle_report(th.M_star, th.gains, list(th.M), list(th.y), strict=False)

    return RunResult(
        config=config,
        t=np.concatenate(t_parts),
        y=np.concatenate(y_parts),
        u=np.concatenate(u_parts),
        tones=tones,
        open_loop_phasors=open_loop,
        diverged=diverged,
        truncated=truncated,
        oracles=oracles,
        windows_run=windows_run,
    )


def run_with_baseline(config: ExperimentConfig) -> tuple[RunResult, RunResult]:
    """Run ``config`` and the same configuration without control."""
    base_cfg = dataclasses.replace(config, controller="none")
    return run(config), run(base_cfg)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class RunMetrics:
    baseline_rms: float
    trailing_rms: float
    rms_ratio: Optional[float]
    note: str
    u_inf: list
    final_cost: list
    convergence_step: Optional[int]
    diverged: bool
    oracle_passed: dict
    oracle_total: dict

    def lines(self) -> list[str]:
        ratio = self.note if self.rms_ratio is None else f"{self.rms_ratio:.6g}"
        out = [
            f"trailing_rms={self.trailing_rms:.6g}",
            f"baseline_rms={self.baseline_rms:.6g}",
            f"rms_ratio={ratio}",
            f"diverged={self.diverged}",
            f"convergence_step={self.convergence_step}",
        ]
        for i, (u, J) in enumerate(zip(self.u_inf, self.final_cost)):
            u_txt = " ".join(f"{z.real:+.6g}{z.imag:+.6g}j" for z in np.atleast_1d(u))
            out.append(f"tone{i + 1}: u_inf=[{u_txt}] J_final={J:.6g}")
        for i in self.oracle_total:
            out.append(f"tone{i + 1}: oracle checks passed {self.oracle_passed[i]}/{self.oracle_total[i]}")
        return out


CONVERGENCE_RATIO = 0.01
U_INF_WINDOWS = 10


def window_rms(result: RunResult) -> np.ndarray:
    N = result.config.timing.window_samples
    n = result.y.shape[0] // N
    w = result.y[: n * N].reshape(n, N, -1)
    return np.sqrt(np.mean(np.sum(w**2, axis=2), axis=1))


def metrics(result: RunResult, baseline: Union[RunResult, float, None] = None, seconds: float = 1.0) -> RunMetrics:
    """Summary of a run relative to an open-loop baseline RMS.

    ``u_inf`` is the mean command over the final ten windows and the
    convergence step is the first controller step whose window RMS falls
    below 1% of the baseline.
    """
    if isinstance(baseline, RunResult):
        base = baseline.trailing_rms(seconds)
    elif baseline is None:
        base = math.nan
    else:
        base = float(baseline)
    tail = result.trailing_rms(seconds)
    if base == 0:
        ratio, note = (None, "no disturbance")
    elif math.isnan(base):
        ratio, note = (None, "no baseline")
    else:
        ratio, note = tail / base, ""

    u_inf = [th.u[-U_INF_WINDOWS:].mean(axis=0) for th in result.tones]
    final_cost = [avg_power(th.y[-1]) if th.y.shape[0] > 1 else math.nan for th in result.tones]

    conv = None
    if ratio is not None and result.config.controller != "none":
        start = max(result.config.timing.enable_window - 1, 0)
        rms = window_rms(result)
        below = np.nonzero(rms[start:] < CONVERGENCE_RATIO * base)[0]
        conv = int(below[0]) + 1 if below.size else None

    passed, total = {}, {}
    for i, recs in result.oracles.items():
        total[i] = len(recs)
        passed[i] = sum(
            1 for r in recs
            if r.prop1_gap <= 1e-12 and not (r.dV_bound_margin < -1e-12) and not (r.M_abs < r.c2 - 1e-12)
        )
    return RunMetrics(base, tail, ratio, note, u_inf, final_cost, conv, result.diverged, passed, total)


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    return "%.9g" % x


def _cplx_cols(z) -> list[str]:
    out = []
    for v in np.ravel(z):
        out += [_fmt(v.real), _fmt(v.imag)]
    return out


def write_outputs(result: RunResult, out_dir: Union[str, Path]) -> list[Path]:
    """Write ``timeseries.csv``, ``phasors.csv`` and (AHSS only) ``oracles.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ell, m = result.y.shape[1], result.u.shape[1]
    path = out_dir / "timeseries.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y_{i + 1}" for i in range(ell)] + [f"u_{j + 1}" for j in range(m)])
        for t, y, u in zip(result.t, result.y, result.u):
            w.writerow([_fmt(t)] + [_fmt(v) for v in y] + [_fmt(v) for v in u])
    written.append(path)

    path = out_dir / "phasors.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["k", "tone_index"]
        header += [f"y_{i + 1}_{part}" for i in range(ell) for part in ("re", "im")]
        header += [f"u_{j + 1}_{part}" for j in range(m) for part in ("re", "im")]
        header += [f"M_{i + 1}{j + 1}_{part}" for i in range(ell) for j in range(m) for part in ("re", "im")]
        w.writerow(header)
        nan_M = np.full((ell, m), np.nan, dtype=complex)
        for ti, th in enumerate(result.tones):
            for k in range(th.u.shape[0]):
                y = th.y[k] if k < th.y.shape[0] else np.full(ell, np.nan, dtype=complex)
                M = th.M[k] if k < th.M.shape[0] else nan_M
                w.writerow([k, ti + 1] + _cplx_cols(y) + _cplx_cols(th.u[k]) + _cplx_cols(M))
    written.append(path)

    if result.oracles:
        path = out_dir / "oracles.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "tone_index", "prop1_gap", "dV", "dV_bound_margin", "abs_M_k", "c2"])
            for ti, recs in result.oracles.items():
                for r in recs:
                    w.writerow([r.k, ti + 1, _fmt(r.prop1_gap), _fmt(r.dV), _fmt(r.dV_bound_margin), _fmt(r.M_abs), _fmt(r.c2)])
        written.append(path)
    return written


def write_summary(m: RunMetrics, result: RunResult, path: Union[str, Path]):
    lines = [f"name={result.config.name}", f"controller={result.config.controller}",
             f"seed={result.config.seed}", f"windows_run={result.windows_run}"] + m.lines()
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# stability-region sweep


SWEEP_COLUMNS = ["tone_index", "scale", "phase", "hss_rho_max", "hss_final_ratio", "hss_diverged",
                 "ahss_final_ratio", "ahss_converged"]


def sweep(config: ExperimentConfig, phases, scales=(None,), steps: int = 500) -> list[dict]:
    """Map HSS/AHSS outcomes over initial-estimate phase (and scale) in the exact phasor model.

    Each tone's estimate is ``scale * exp(j phase) * M_*``; ``None`` keeps the
    configured scale.  Ratios are ``||y_K - y_opt|| / ||y_1 - y_opt||`` after
    ``steps`` updates, where ``y_opt`` is the residual of the optimal control
    (zero unless the plant has more outputs than inputs).
    """
    model = config.build_model()
    dist = config.disturbance(model.n_disturbances)
    rows = []
    for i, tone in enumerate(config.tones):
        M_star = transfer_at(model, tone.omega, "control")
        d_hat = transfer_at(model, tone.omega, "disturbance") @ dist.phasor(i)
        y_opt = optimal_control(M_star, d_hat).y
        for scale in scales:
            s = tone.initial_estimate.scale if scale is None else scale
            for phase in phases:
                M0 = EstimateSpec(scale=s, phase=float(phase)).resolve(M_star)
                gains, rho = config.gains.for_estimate(M0)
                bound = hss_gain_bound(M0, M_star)
                row = {"tone_index": i + 1, "scale": float(np.mean(s)), "phase": float(phase),
                       "hss_rho_max": bound.rho_max if bound.stable else math.nan}
                for kind in ("hss", "ahss"):
                    ctl = _make_controller(kind, M0, gains, rho, np.zeros(M_star.shape[1], dtype=complex))
                    y = M_star @ ctl.u + d_hat
                    n1 = float(np.linalg.norm(y - y_opt))
                    diverged = False
                    for _ in range(steps):
                        ctl = ctl.step(y)
                        y = M_star @ ctl.u + d_hat
                        if np.linalg.norm(y - y_opt) > DIVERGENCE_FACTOR * n1:
                            diverged = True
                            break
                    ratio = float(np.linalg.norm(y - y_opt)) / n1 if n1 else 0.0
                    row[f"{kind}_final_ratio"] = ratio
                    if kind == "hss":
                        row["hss_diverged"] = int(diverged)
                    else:
                        row["ahss_converged"] = int(ratio < CONVERGENCE_RATIO)
                rows.append(row)
    return rows


def write_sweep(rows: list[dict], path: Union[str, Path]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r["tone_index"]] + [_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS[1:]])
