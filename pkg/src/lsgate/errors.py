"""Analytic error models and the gate error budget.

Conventions: rates and detunings are angular (rad/s), times in seconds,
powers in watts, errors are average gate infidelities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.optimize import minimize_scalar

from .constants import D32_LIFETIME, TWO_PI
from .pulse import PulseEnvelope


class OptimizationError(RuntimeError):
    pass


class BudgetIncompleteError(ValueError):
    def __init__(self, missing):
        super().__init__("budget entries missing: " + ", ".join(missing))
        self.missing = list(missing)


@dataclass(frozen=True)
class AtomicRates:
    """Decay rates and the detuning scale of the dipole-allowed P levels.

    ``gamma_p`` and ``p_detuning`` set only the physical scale of the P-state
    scattering model; its overall coefficient is calibrated separately.
    """

    gamma_d: float = 1.0 / D32_LIFETIME
    gamma_p: float = TWO_PI * 19.6e6
    p_detuning: float = TWO_PI * 1.23e14
    raman_fraction: float = 1.0

    def __post_init__(self):
        if min(self.gamma_d, self.gamma_p, self.p_detuning) <= 0:
            raise ValueError("rates and detunings must be positive")
        if not 0 <= self.raman_fraction <= 1:
            raise ValueError("raman_fraction must lie in [0, 1]")

    @classmethod
    def from_lifetime(cls, lifetime: float, **kw) -> "AtomicRates":
        return cls(gamma_d=1.0 / lifetime, **kw)


# --- spontaneous emission --------------------------------------------------


def d_scatter_error(gamma_d: float, delta: float, loops: int, eta: float) -> float:
    """Scattering error off the D level, ``2 pi (Gamma / Delta) sqrt(K) / eta``.

    Every scattering event counts as a full error.
    """
    if min(gamma_d, delta, loops, eta) <= 0:
        raise ValueError("all inputs must be positive")
    return TWO_PI * (gamma_d / delta) * math.sqrt(loops) / eta


@dataclass(frozen=True)
class PScatterModel:
    """Off-resonant Raman scattering off the P levels during the gate.

    The P-level coupling scales like the D-level one,
    ``g_P^2 = kappa (Gamma_P / Gamma_D) g^2``, and ``g^2 = Omega Delta`` at
    fixed gate strength ``Omega``, so

    ``eps_P = t_gate raman_fraction kappa Gamma_P^2 Omega Delta / (Gamma_D Delta_P^2)``.

    ``kappa`` lumps matrix elements and geometry; it is a calibration input.
    """

    rates: AtomicRates = AtomicRates()
    kappa: float = 1.0

    def error(self, delta: float, omega: float, t_gate: float) -> float:
        r = self.rates
        return (t_gate * r.raman_fraction * self.kappa * r.gamma_p**2 * omega * delta
                / (r.gamma_d * r.p_detuning**2))

    def coefficient(self, omega: float, t_gate: float) -> float:
        """``eps_P / Delta`` at fixed ``omega`` and ``t_gate``."""
        return self.error(1.0, omega, t_gate)

    @classmethod
    def calibrated(cls, eps_min: float, c_d: float, omega: float, t_gate: float,
                   rates: AtomicRates = AtomicRates()) -> "PScatterModel":
        """Fix ``kappa`` so the optimum of ``c_d / Delta + c_P Delta`` equals ``eps_min``.

        The optimum is ``2 sqrt(c_d c_P)``, hence ``c_P = eps_min^2 / (4 c_d)``.
        """
        c_p = eps_min**2 / (4 * c_d)
        unit = cls(rates, 1.0).coefficient(omega, t_gate)
        return cls(rates, c_p / unit)


def p_scatter_error(model: PScatterModel, delta: float, omega: float, t_gate: float) -> float:
    return model.error(delta, omega, t_gate)


@dataclass(frozen=True)
class DetuningOptimum:
    delta: float
    error: float
    d_error: float
    p_error: float
    power: float | None = None


def optimize_detuning(eps_d, eps_p, bracket=(TWO_PI * 1e5, TWO_PI * 1e11), power=None,
                      grid: int = 200) -> DetuningOptimum:
    """Minimise ``eps_d(Delta) + eps_p(Delta)`` over ``Delta`` (log-scale search).

    ``power(Delta)``, if given, converts the optimum to a laser power.

    Raises
    ------
    OptimizationError
        The sum is not unimodal on the bracket or the minimum sits on its edge.
    """
    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    xs = np.linspace(lo, hi, grid)
    ys = np.array([eps_d(math.exp(x)) + eps_p(math.exp(x)) for x in xs])
    d = np.sign(np.diff(ys))
    d = d[d != 0]
    if len(d) == 0 or np.count_nonzero(np.diff(d)) != 1 or d[0] > 0:
        raise OptimizationError("total scattering error is not unimodal on the bracket")
    i = int(np.argmin(ys))
    if i in (0, grid - 1):
        raise OptimizationError("minimum lies on the bracket edge")
    res = minimize_scalar(lambda x: eps_d(math.exp(x)) + eps_p(math.exp(x)),
                          bracket=(xs[i - 1], xs[i], xs[i + 1]), tol=1e-12)
    delta = math.exp(res.x)
    return DetuningOptimum(delta, float(res.fun), eps_d(delta), eps_p(delta),
                           None if power is None else power(delta))


# --- power -----------------------------------------------------------------


def power_scaling(eps_target: float, t_gate: float, reference: tuple[float, float, float]) -> float:
    """Laser power for a target scattering error and gate time.

    ``reference = (P0, eps0, t0)``; the power scales as ``1 / (eps t_gate)``
    and does not depend on the linewidth.
    """
    p0, eps0, t0 = reference
    if eps_target <= 0 or t_gate <= 0:
        raise ValueError("target error and gate time must be positive")
    return p0 * eps0 * t0 / (eps_target * t_gate)


def required_power(delta: float, omega: float, gamma_d: float,
                   reference: tuple[float, float, float, float]) -> float:
    """Power to reach light-shift strength ``omega`` at detuning ``delta``.

    ``g^2`` is proportional to intensity times ``Gamma_D`` for a dipole-forbidden
    line, so ``P ~ Delta Omega / Gamma_D``.  ``reference = (P0, Delta0, Omega0, Gamma0)``.
    """
    p0, d0, o0, g0 = reference
    return p0 * (delta / d0) * (omega / o0) * (g0 / gamma_d)


# --- off-resonant populations --------------------------------------------


def perturbative_population(coupling, detuning: float, times) -> np.ndarray:
    """Second-order population ``|int_0^t g(t') exp(i detuning t') dt'|^2``.

    ``coupling`` is a callable or an array sampled at ``times`` (uniform,
    fine compared to ``2 pi / detuning``).
    """
    times = np.asarray(times, dtype=float)
    g = np.asarray(coupling(times) if callable(coupling) else coupling, dtype=complex)
    amp = cumulative_trapezoid(g * np.exp(1j * detuning * times), times, initial=0.0)
    return np.abs(amp) ** 2


def square_pulse_population(g: float, detuning: float, t) -> np.ndarray:
    """Closed form for a constant coupling, ``4 (g / detuning)^2 sin^2(detuning t / 2)``."""
    return 4 * (g / detuning) ** 2 * np.sin(detuning * np.asarray(t) / 2) ** 2


def _envelope_samples(env: PulseEnvelope, n: int):
    t = np.linspace(0, env.duration, n)
    return t, np.array([env.value(x) for x in t])


def carrier_estimate(beams, scheme, envelope: PulseEnvelope, amplitude: float = 1.0, pulses: int = 2,
                     positions=(0.0, 0.0), samples_per_period: int = 40, envelope_mode: str = "intensity") -> dict:
    """Second-order estimate of the excited-level population left after the gate.

    Each ion in the upper qubit level is driven to ``e_tau`` by both beams at
    detunings ``E_tau - s_b mu / 2``; amplitudes from the two beams add with
    the optical phase at the ion.  Averaged over the qubit basis each ion is
    in the upper level half the time, and populations left by successive
    pulses add incoherently.
    """
    fast = scheme.delta + abs(beams.mu) / 2
    n = int(envelope.duration * fast / TWO_PI * samples_per_period) + 2
    t, env = _envelope_samples(envelope, n)
    if envelope_mode == "intensity":
        env = np.sqrt(env)
    env = amplitude * env
    trace = np.zeros(n)
    for x in positions:
        for tau, lvl in ((-1, "e-"), (1, "e+")):
            amp = np.zeros(n, dtype=complex)
            for b, s, k, phase in (("A", 1.0, beams.k_a, beams.phase_a), ("B", -1.0, beams.k_b, beams.phase_b)):
                w = scheme.energy(lvl) - s * beams.mu / 2
                c = beams.coupling(b, tau) * np.exp(-1j * (phase + k[0] * x))
                amp += cumulative_trapezoid(c * env * np.exp(1j * w * t), t, initial=0.0)
            trace += np.abs(amp) ** 2 / 2
    return {"times": t, "trace": trace, "per_pulse": float(trace[-1]), "final": float(pulses * trace[-1])}


# --- technical noise ------------------------------------------------------


def phase_noise_error(eps_ramsey: float, g: float, delta: float) -> float:
    """Gate error from slow laser phase noise, ``eps_ramsey (4 g^2 / Delta^2)^2``."""
    if not 0 <= eps_ramsey <= 1:
        raise ValueError("eps_ramsey must lie in [0, 1]")
    return eps_ramsey * (4 * g**2 / delta**2) ** 2


def echo_filter(omega, total_time: float):
    """Spin-echo filter function ``F(w) = 4 sin^4(w T / 4)`` for phase noise.

    With one-sided phase spectral density ``S(w)`` the error probability of
    the echo sequence is ``int S(w) F(w) dw`` to lowest order.
    """
    return 4 * np.sin(np.asarray(omega) * total_time / 4) ** 4


def ramsey_error(spectral_density, total_time: float, omega_max: float | None = None) -> float:
    """``eps_ramsey = int_0^inf S_phi(w) F(w) dw`` for a callable spectral density."""
    upper = np.inf if omega_max is None else omega_max
    val, _ = quad(lambda w: spectral_density(w) * echo_filter(w, total_time), 0, upper, limit=400)
    return float(val)


def com_heating_error(kappa_com: float, t_gate: float, p_com: float) -> float:
    """One absorbed phonon spoils the shaped return of the com population: ``kappa t P``."""
    if min(kappa_com, t_gate, p_com) < 0:
        raise ValueError("inputs must be non-negative")
    return kappa_com * t_gate * p_com


def gate_mode_heating_error(kappa_gate: float, t_gate: float, loops: int) -> float:
    """Upper-bound model ``kappa t / (2 K)`` for heating of the gate mode.

    A stand-in: first-order sensitivity of a K-loop gate to single-quantum
    heating events, not a closed form from first principles.
    """
    if kappa_gate < 0 or t_gate < 0 or loops < 1:
        raise ValueError("invalid heating inputs")
    return kappa_gate * t_gate / (2 * loops)


# --- budget ---------------------------------------------------------------


class Provenance(str, Enum):
    ANALYTIC = "analytic"
    SIMULATED = "simulated"
    EXTERNAL = "external-input"


@dataclass(frozen=True)
class BudgetEntry:
    mechanism: str
    value: float
    provenance: Provenance
    section: str  # "non-technical" or "technical"
    upper_bound: bool = False
    note: str = ""


@dataclass
class ErrorBudget:
    entries: list[BudgetEntry] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def section(self, name: str) -> list[BudgetEntry]:
        return [e for e in self.entries if e.section == name]

    def section_total(self, name: str) -> float:
        return float(sum(e.value for e in self.section(name)))

    @property
    def total(self) -> float:
        return float(sum(e.value for e in self.entries))

    def __getitem__(self, mechanism: str) -> BudgetEntry:
        for e in self.entries:
            if e.mechanism == mechanism:
                return e
        raise KeyError(mechanism)

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"mechanism": e.mechanism, "value": e.value, "provenance": e.provenance.value,
                 "section": e.section, "upper_bound": e.upper_bound, "note": e.note}
                for e in self.entries
            ],
            "non_technical_total": self.section_total("non-technical"),
            "technical_total": self.section_total("technical"),
            **self.summary,
        }

    def table(self, scale: float = 1e-4) -> str:
        """Aligned text table in units of ``scale``."""
        lines = [f"{'Mechanism':<30}{'error (x1e-4)':>14}  provenance"]
        for sec, label in (("non-technical", "Total"), ("technical", "Total")):
            lines.append("-" * 60)
            for e in self.section(sec):
                v = ("<" if e.upper_bound else " ") + f"{e.value / scale:.3g}"
                lines.append(f"{e.mechanism:<30}{v:>14}  {e.provenance.value}")
            lines.append(f"{label:<30}{self.section_total(sec) / scale:>14.3g}")
            if sec == "non-technical" and "min_total" in self.summary:
                lines.append(f"{'Min':<30}{self.summary['min_total'] / scale:>14.3g}")
        return "\n".join(lines)


BUDGET_INPUTS = (
    "gamma_d", "delta", "loops", "eta", "omega", "t_gate", "eps_min", "off_resonant",
    "leakage_rate", "leakage_spontaneous_fraction", "eps_ramsey", "g", "kappa_gate",
    "kappa_com", "p_com", "microwave_error", "microwave_pulses",
)


def assemble_budget(inputs: dict, provenance: dict | None = None, rates: AtomicRates | None = None) -> ErrorBudget:
    """Build the two-section budget.

    Non-technical: spontaneous emission (D plus P scattering at the operating
    detuning), off-resonant + Lamb-Dicke error; ``min_total`` pairs the
    optimal-detuning scattering floor with the same off-resonant error.
    Technical: leakage net of the spontaneous-emission share (already in the
    upper section), laser phase noise, gate-mode heating (upper bound),
    com heating and the echo pulses.

    ``provenance`` overrides the default tag of inputs, e.g.
    ``{"off_resonant": "simulated", "p_com": "simulated"}``.

    Raises
    ------
    BudgetIncompleteError
        An input is missing or None.
    """
    missing = [k for k in BUDGET_INPUTS if inputs.get(k) is None]
    if missing:
        raise BudgetIncompleteError(missing)
    prov = {k: Provenance(v) for k, v in (provenance or {}).items()}
    x = inputs
    rates = rates or AtomicRates(gamma_d=x["gamma_d"])
    eps_d = d_scatter_error(x["gamma_d"], x["delta"], x["loops"], x["eta"])
    c_d = eps_d * x["delta"]
    pmodel = PScatterModel.calibrated(x["eps_min"], c_d, x["omega"], x["t_gate"], rates)
    eps_p = pmodel.error(x["delta"], x["omega"], x["t_gate"])
    opt = optimize_detuning(lambda d: c_d / d, lambda d: pmodel.error(d, x["omega"], x["t_gate"]))
    p_ref = x.get("reference_power")

    off_prov = prov.get("off_resonant", Provenance.EXTERNAL)
    com_prov = Provenance.ANALYTIC if prov.get("p_com") is None else prov["p_com"]
    entries = [
        BudgetEntry("Spontaneous emission", eps_d + eps_p, Provenance.ANALYTIC, "non-technical",
                    note=f"D: {eps_d:.3g}, P: {eps_p:.3g}"),
        BudgetEntry("Off-resonant + L.D. errors", float(x["off_resonant"]), off_prov, "non-technical"),
        BudgetEntry("Leakage", x["leakage_rate"] * (1 - x["leakage_spontaneous_fraction"]), Provenance.EXTERNAL,
                    "technical", note="measured rate net of the spontaneous-emission share"),
        BudgetEntry("Laser phase noise", phase_noise_error(x["eps_ramsey"], x["g"], x["delta"]),
                    Provenance.ANALYTIC, "technical", note=f"eps_ramsey = {x['eps_ramsey']:.3g}"),
        BudgetEntry("Gate mode heating", gate_mode_heating_error(x["kappa_gate"], x["t_gate"], x["loops"]),
                    Provenance.ANALYTIC, "technical", upper_bound=True, note="stand-in model kappa t / (2K)"),
        BudgetEntry("c.o.m. heating", com_heating_error(x["kappa_com"], x["t_gate"], x["p_com"]), com_prov,
                    "technical"),
        BudgetEntry("Microwaves", x["microwave_error"] * x["microwave_pulses"], Provenance.EXTERNAL, "technical"),
    ]
    budget = ErrorBudget(entries)
    budget.summary = {
        "min_total": opt.error + float(x["off_resonant"]),
        "min_scattering": opt.error,
        "optimal_delta_hz": opt.delta / TWO_PI,
        "p_scatter_kappa": pmodel.kappa,
    }
    if p_ref is not None:
        budget.summary["power_at_min_w"] = required_power(opt.delta, x["omega"], x["gamma_d"],
                                                           (p_ref, x["delta"], x["omega"], x["gamma_d"]))
    return budget

