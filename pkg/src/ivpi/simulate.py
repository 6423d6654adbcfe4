"""Population-level scenarios for preference-based instruments.

Two generative models are provided:

* the two-physician clinic, where the treatment-preferring physician (Z=1)
  withholds treatment from diabetic patients and the other physician (Z=0)
  treats physically active patients, so active diabetics are defiers;
* a dichotomized proxy for an unmeasured, multi-level preference
  instrument, whose Wald estimand is a weighted average of level effects.

Reports are computed by exact enumeration.  :func:`sample_counts` draws
finite-sample cell counts for use with the rest of the toolkit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .bounds import ALWAYS_TAKER, COMPLIANCE_TYPES, COMPLIER, DEFIER, NEVER_TAKER
from .estimators import iv_estimates
from .model import ObservedLaw, TrialCounts

_COVARIATE_CELLS = tuple(itertools.product((0, 1), repeat=2))  # (diabetic, active)


class FrechetError(ValueError):
    """Correlation incompatible with the requested marginals."""


def _prob(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def compliance_type(x_if_z1: int, x_if_z0: int) -> str:
    return {(1, 1): ALWAYS_TAKER, (0, 0): NEVER_TAKER, (1, 0): COMPLIER, (0, 1): DEFIER}[(x_if_z1, x_if_z0)]


@dataclass(frozen=True)
class ScenarioReport:
    shares: dict
    true_ate: float
    true_late: Optional[float]
    iv_estimand: Optional[float]
    defier_share: float
    law: ObservedLaw
    level_weights: Optional[tuple[float, ...]] = None

    @property
    def bias_vs_late(self) -> Optional[float]:
        if self.iv_estimand is None or self.true_late is None:
            return None
        return self.iv_estimand - self.true_late

    @property
    def bias_vs_ate(self) -> Optional[float]:
        if self.iv_estimand is None:
            return None
        return self.iv_estimand - self.true_ate


# Two-physician clinic ---------------------------------------------------------


@dataclass(frozen=True)
class TwoPhysicianScenario:
    """Clinic with two physicians whose preferences have opposite exceptions.

    ``outcome_model`` maps ``(diabetic, active, treated)`` to P(Y=1).
    ``rho`` is the Pearson correlation between the diabetic and active
    indicators.
    """

    p_diabetic: float
    p_active: float
    outcome_model: Mapping[tuple[int, int, int], float]
    rho: float = 0.0
    instrument_split: float = 0.5

    def __post_init__(self):
        _prob(self.p_diabetic, "p_diabetic")
        _prob(self.p_active, "p_active")
        _prob(self.instrument_split, "instrument_split")
        if not (-1.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        model = {}
        for d, a, t in itertools.product((0, 1), repeat=3):
            if (d, a, t) not in self.outcome_model:
                raise ValueError(f"outcome_model is missing cell (diabetic={d}, active={a}, treated={t})")
            model[(d, a, t)] = _prob(self.outcome_model[(d, a, t)], f"outcome_model[{d},{a},{t}]")
        object.__setattr__(self, "outcome_model", model)
        self.joint()

    def joint(self) -> dict[tuple[int, int], float]:
        """P(diabetic=d, active=a) from the marginals and the correlation."""
        pd, pa = self.p_diabetic, self.p_active
        p11 = pd * pa + self.rho * math.sqrt(pd * (1 - pd) * pa * (1 - pa))
        cells = {(1, 1): p11, (1, 0): pd - p11, (0, 1): pa - p11, (0, 0): 1 - pd - pa + p11}
        if min(cells.values()) < -1e-12:
            lo = max(0.0, pd + pa - 1)
            hi = min(pd, pa)
            raise FrechetError(
                f"rho={self.rho} gives P(diabetic and active)={p11:.6g}, outside the Frechet "
                f"range [{lo:.6g}, {hi:.6g}] for p_diabetic={pd}, p_active={pa}"
            )
        return {k: max(v, 0.0) for k, v in cells.items()}

    @staticmethod
    def treatment(z: int, diabetic: int, active: int) -> int:
        """Z=1 physician treats unless diabetic; Z=0 physician treats only the active."""
        return 1 - diabetic if z == 1 else active


def run_two_physician(s: TwoPhysicianScenario) -> ScenarioReport:
    joint = s.joint()
    shares = dict.fromkeys(COMPLIANCE_TYPES, 0.0)
    p = np.zeros((2, 2, 2))
    ate = 0.0
    complier_effect = 0.0
    for (d, a), w in joint.items():
        risk = {t: s.outcome_model[(d, a, t)] for t in (0, 1)}
        ctype = compliance_type(s.treatment(1, d, a), s.treatment(0, d, a))
        shares[ctype] += w
        ate += w * (risk[1] - risk[0])
        if ctype == COMPLIER:
            complier_effect += w * (risk[1] - risk[0])
        for z in (0, 1):
            x = s.treatment(z, d, a)
            p[z, x, 1] += w * risk[x]
            p[z, x, 0] += w * (1 - risk[x])
    law = ObservedLaw(p)
    late = complier_effect / shares[COMPLIER] if shares[COMPLIER] > 0 else None
    return ScenarioReport(
        shares=shares,
        true_ate=ate,
        true_late=late,
        iv_estimand=iv_estimates(law).wald,
        defier_share=shares[DEFIER],
        law=law,
    )


# Dichotomized proxy instrument ----------------------------------------------


@dataclass(frozen=True)
class PreferenceLevel:
    """One stratum of the population behind a proxy instrument.

    ``uptake`` holds P(treated) when the proxy is 0 and when it is 1.  The
    effect is homogeneous within the level; ``baseline`` is the untreated risk.
    """

    u: float
    weight: float
    uptake: tuple[float, float]
    effect: float
    baseline: float = 0.5

    def __post_init__(self):
        _prob(self.weight, "weight")
        g = tuple(_prob(v, "uptake") for v in self.uptake)
        if len(g) != 2:
            raise ValueError("uptake needs one probability per proxy arm")
        object.__setattr__(self, "uptake", g)
        _prob(self.baseline, "baseline")
        _prob(self.baseline + self.effect, "baseline + effect")

    def risk(self, x: int) -> float:
        return self.baseline + self.effect * x


@dataclass(frozen=True)
class ProxyScenario:
    levels: tuple[PreferenceLevel, ...]
    threshold: Optional[float] = None
    instrument_split: float = 0.5

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) < 2:
            raise ValueError("a proxy scenario needs at least two preference levels")
        total = sum(lv.weight for lv in levels)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"level weights must sum to 1, got {total}")
        _prob(self.instrument_split, "instrument_split")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_preference(
        cls,
        physicians: Sequence[tuple[float, float]],
        patients: Sequence[tuple[float, float, float, float]],
        threshold: float,
    ) -> "ProxyScenario":
        """Build a scenario by dichotomizing a continuous physician preference.

        ``physicians`` lists ``(preference score, share of patients)``; the
        proxy is ``score >= threshold``.  ``patients`` lists ``(tolerance,
        weight, effect, baseline)``: a patient is treated by any physician
        whose score reaches their tolerance, so per-arm uptake is the share
        of that arm's physicians above the tolerance.
        """
        scores = np.array([s for s, _ in physicians], dtype=float)
        shares = np.array([w for _, w in physicians], dtype=float)
        if abs(shares.sum() - 1.0) > 1e-9:
            raise ValueError("physician shares must sum to 1")
        arm = scores >= threshold
        p1 = shares[arm].sum()
        if p1 <= 0 or p1 >= 1:
            raise ValueError(f"threshold {threshold} leaves one proxy arm empty")
        levels = []
        for u, weight, effect, baseline in patients:
            treats = scores >= u
            g1 = shares[arm & treats].sum() / p1
            g0 = shares[~arm & treats].sum() / (1 - p1)
            levels.append(PreferenceLevel(u, weight, (g0, g1), effect, baseline))
        return cls(tuple(levels), threshold, float(p1))


def run_proxy(s: ProxyScenario) -> ScenarioReport:
    """Exact Wald estimand of the proxy and the level weights it implies.

    Within a level, compliance types are formed by the monotone coupling of
    the two uptake probabilities, so a level whose uptake falls under the
    proxy contributes defiers.
    """
    shares = dict.fromkeys(COMPLIANCE_TYPES, 0.0)
    p = np.zeros((2, 2, 2))
    contrib = []
    late_num = 0.0
    for lv in s.levels:
        g0, g1 = lv.uptake
        shares[ALWAYS_TAKER] += lv.weight * min(g0, g1)
        shares[NEVER_TAKER] += lv.weight * (1 - max(g0, g1))
        shares[COMPLIER] += lv.weight * max(g1 - g0, 0.0)
        shares[DEFIER] += lv.weight * max(g0 - g1, 0.0)
        late_num += lv.weight * max(g1 - g0, 0.0) * lv.effect
        contrib.append(lv.weight * (g1 - g0))
        for z, g in ((0, g0), (1, g1)):
            for x, px in ((0, 1 - g), (1, g)):
                p[z, x, 1] += lv.weight * px * lv.risk(x)
                p[z, x, 0] += lv.weight * px * (1 - lv.risk(x))
    law = ObservedLaw(p)
    denom = sum(contrib)
    if abs(denom) > 1e-9:
        weights = tuple(c / denom for c in contrib)
        estimand = sum(w * lv.effect for w, lv in zip(weights, s.levels))
        wald = iv_estimates(law).wald
        assert wald is not None and abs(wald - estimand) <= 1e-9, (wald, estimand)
    else:
        weights, estimand = None, None
    return ScenarioReport(
        shares=shares,
        true_ate=sum(lv.weight * lv.effect for lv in s.levels),
        true_late=late_num / shares[COMPLIER] if shares[COMPLIER] > 0 else None,
        iv_estimand=estimand,
        defier_share=shares[DEFIER],
        law=law,
        level_weights=weights,
    )


def run_scenario(s) -> ScenarioReport:
    if isinstance(s, TwoPhysicianScenario):
        return run_two_physician(s)
    if isinstance(s, ProxyScenario):
        return run_proxy(s)
    raise TypeError(f"unsupported scenario type {type(s).__name__}")


# Finite-sample draws ----------------------------------------------------------


def _unit_probabilities(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(stratum weights, P(X=1 | stratum, z) [k, z], P(Y=1 | stratum, x) [k, x])."""
    if isinstance(s, TwoPhysicianScenario):
        joint = s.joint()
        w = np.array([joint[c] for c in _COVARIATE_CELLS])
        g = np.array([[s.treatment(z, d, a) for z in (0, 1)] for d, a in _COVARIATE_CELLS], dtype=float)
        r = np.array([[s.outcome_model[(d, a, x)] for x in (0, 1)] for d, a in _COVARIATE_CELLS])
        return w, g, r
    if isinstance(s, ProxyScenario):
        w = np.array([lv.weight for lv in s.levels])
        g = np.array([lv.uptake for lv in s.levels])
        r = np.array([[lv.risk(0), lv.risk(1)] for lv in s.levels])
        return w, g, r
    raise TypeError(f"unsupported scenario type {type(s).__name__}")


def sample_counts(s, n: int, rng: np.random.Generator) -> TrialCounts:
    """Draw ``n`` units and tabulate them."""
    if n <= 0:
        raise ValueError("n must be positive")
    w, g, r = _unit_probabilities(s)
    w = w / w.sum()
    z = (rng.random(n) < s.instrument_split).astype(int)
    k = rng.choice(len(w), size=n, p=w)
    x = (rng.random(n) < g[k, z]).astype(int)
    y = (rng.random(n) < r[k, x]).astype(int)
    arr = np.zeros((2, 2, 2), dtype=np.int64)
    np.add.at(arr, (z, x, y), 1)
    if np.any(arr.sum(axis=(1, 2)) == 0):
        raise ValueError(f"sample of n={n} left an instrument arm empty; increase n")
    return TrialCounts(arr)


def sample_replicates(s, n: int, seed: int, replicates: int = 1) -> list[TrialCounts]:
    """Independent draws with per-replicate streams spawned from ``seed``."""
    if replicates <= 0:
        raise ValueError("replicates must be positive")
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [sample_counts(s, n, np.random.default_rng(child)) for child in children]


def scenario_from_dict(data: Mapping) -> TwoPhysicianScenario | ProxyScenario:
    """Parse the scenario-file schema (see README)."""
    kind = data.get("type")
    if kind == "two_physician":
        model = {}
        for rec in data["outcome_model"]:
            key = (int(rec["diabetic"]), int(rec["active"]), int(rec["treated"]))
            if key in model:
                raise ValueError(f"duplicate outcome_model cell {key}")
            model[key] = float(rec["risk"])
        return TwoPhysicianScenario(
            p_diabetic=float(data["p_diabetic"]),
            p_active=float(data["p_active"]),
            rho=float(data.get("rho", 0.0)),
            outcome_model=model,
            instrument_split=float(data.get("instrument_split", 0.5)),
        )
    if kind == "proxy":
        if "physicians" in data:
            return ProxyScenario.from_preference(
                [(float(p["score"]), float(p["weight"])) for p in data["physicians"]],
                [(float(p["tolerance"]), float(p["weight"]), float(p["effect"]), float(p.get("baseline", 0.5)))
                 for p in data["patients"]],
                float(data["threshold"]),
            )
        levels = tuple(
            PreferenceLevel(
                u=float(lv.get("u", i)),
                weight=float(lv["weight"]),
                uptake=(float(lv["uptake"][0]), float(lv["uptake"][1])),
                effect=float(lv["effect"]),
                baseline=float(lv.get("baseline", 0.5)),
            )
            for i, lv in enumerate(data["levels"])
        )
        threshold = data.get("threshold")
        return ProxyScenario(
            levels,
            None if threshold is None else float(threshold),
            float(data.get("instrument_split", 0.5)),
        )
    raise ValueError(f"scenario 'type' must be 'two_physician' or 'proxy', got {kind!r}")
