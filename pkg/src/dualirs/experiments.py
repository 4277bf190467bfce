"""Scenario assembly, SNR bookkeeping and the reproduction studies.

Every study evaluates the exact channels (per-element distances for t, S and r)
with beamformers built from the far-field signature model, and compares them
against the closed forms in :mod:`dualirs.analysis`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analysis
from .beamforming import (
    EffectiveChannel,
    ReflectionConfig,
    cascade_double,
    cascade_single,
    irs1_phases,
    irs2_phases,
    single_irs_phases,
)
from .channel import (
    PropagationParams,
    RngStream,
    los_from_distances,
    rank_one_margin,
    rician_mix,
    signature_decomposition,
)
from .geometry import (
    GeometryError,
    PanelGeometry,
    Point3,
    as_point,
    distance,
    near_square_grid,
    pairwise_distances,
    point_to_panel_distances,
)

log = logging.getLogger(__name__)

# default bound on |exact - closed form| per sweep row, in dB
DEFAULT_TRACKING_TOL_DB = 1.5

# substream tags under each trial's RngStream
_DOUBLE_STREAM = 0
_SINGLE_STREAM = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Positions, panel templates and link-budget constants of one deployment.

    ``irs1``/``irs2`` fix anchors, base directions and spacing; experiments
    override their element counts. ``nominal_link`` pins the anchor distances
    used by the closed forms; when absent they are measured from the geometry.
    """

    bs_pos: Point3
    user_pos: Point3
    irs1: PanelGeometry
    irs2: PanelGeometry
    prop: PropagationParams
    tx_power_dbm: float = 43.0
    noise_power_dbm: float = -60.0
    nominal_link: analysis.LinkDistances | None = None

    def __post_init__(self):
        object.__setattr__(self, "bs_pos", as_point(self.bs_pos))
        object.__setattr__(self, "user_pos", as_point(self.user_pos))
        for name in ("tx_power_dbm", "noise_power_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for point_name, point in (("bs_pos", self.bs_pos), ("user_pos", self.user_pos)):
            for panel_name, panel in (("irs1", self.irs1), ("irs2", self.irs2)):
                try:
                    point_to_panel_distances(point, panel)
                except GeometryError as exc:
                    raise GeometryError(f"{point_name} vs {panel_name}: {exc}") from None
        if distance(self.irs1.anchor, self.irs2.anchor) == 0:
            raise GeometryError("irs1 and irs2 anchors coincide")

    def link_distances(self) -> analysis.LinkDistances:
        if self.nominal_link is not None:
            return self.nominal_link
        return self.geometric_link()

    def geometric_link(self) -> analysis.LinkDistances:
        return analysis.LinkDistances(
            d_t=distance(self.irs1.anchor, self.bs_pos),
            d_s=distance(self.irs2.anchor, self.irs1.anchor),
            d_r=distance(self.user_pos, self.irs2.anchor),
        )

    def to_dict(self) -> dict:
        def panel(p: PanelGeometry) -> dict:
            return {
                "anchor": list(p.anchor),
                "dir_a": list(p.dir_a),
                "dir_b": list(p.dir_b),
                "count_a": p.count_a,
                "count_b": p.count_b,
                "spacing": p.spacing,
            }

        out = {
            "bs": {"position": list(self.bs_pos)},
            "user": {"position": list(self.user_pos)},
            "irs1": panel(self.irs1),
            "irs2": panel(self.irs2),
            "prop": {"wavelength": self.prop.wavelength, "ref_gain": self.prop.ref_gain},
            "power": {"tx_dbm": self.tx_power_dbm, "noise_dbm": self.noise_power_dbm},
        }
        if self.nominal_link is not None:
            link = self.nominal_link
            out["link"] = {"d_t": link.d_t, "d_s": link.d_s, "d_r": link.d_r}
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def snr_db(power_gain: float, tx_power_dbm: float, noise_power_dbm: float) -> float:
    if power_gain <= 0:
        return -math.inf
    return tx_power_dbm - noise_power_dbm + 10 * math.log10(power_gain)


def received_snr(h: EffectiveChannel, tx_power_dbm: float, noise_power_dbm: float) -> float:
    """P |h|^2 / sigma^2 in dB; a zero channel gives -inf."""
    return snr_db(h.power_gain, tx_power_dbm, noise_power_dbm)


def build_panels(base: ScenarioConfig, K1: int, K2: int) -> tuple[PanelGeometry, PanelGeometry]:
    """IRS panels with K1 and K2 elements on near-square grids."""
    if K1 < 1 or K2 < 1:
        raise ValueError(f"element counts must be positive, got ({K1}, {K2})")
    return base.irs1.with_counts(*near_square_grid(K1)), base.irs2.with_counts(*near_square_grid(K2))


def single_panel(base: ScenarioConfig, K: int) -> PanelGeometry:
    """One-IRS benchmark panel: all K elements at the IRS 2 site."""
    if K < 1:
        raise ValueError(f"element count must be positive, got {K}")
    return base.irs2.with_counts(*near_square_grid(K))


@dataclass
class DoubleLink:
    """Exact channels and far-field-designed beamformers of a two-IRS link."""

    t: np.ndarray
    r: np.ndarray
    distances: np.ndarray
    s_los: np.ndarray
    phi1: ReflectionConfig
    phi2: ReflectionConfig
    margin: float

    def evaluate(self, S: np.ndarray | None = None) -> EffectiveChannel:
        return cascade_double(self.r, self.phi2, self.s_los if S is None else S, self.phi1, self.t)


def double_link(scenario: ScenarioConfig, K1: int, K2: int) -> DoubleLink:
    irs1, irs2 = build_panels(scenario, K1, K2)
    prop = scenario.prop
    t = los_from_distances(point_to_panel_distances(scenario.bs_pos, irs1), prop)
    r = los_from_distances(point_to_panel_distances(scenario.user_pos, irs2), prop)
    d = pairwise_distances(irs1, irs2)
    dec = signature_decomposition(irs1, irs2, prop)
    return DoubleLink(
        t=t,
        r=r,
        distances=d,
        s_los=los_from_distances(d, prop),
        phi1=irs1_phases(dec.g1, t),
        phi2=irs2_phases(dec.g2, r),
        margin=rank_one_margin(irs2, dec.d_s, prop),
    )


def single_link(scenario: ScenarioConfig, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t_tilde, r_tilde, BS-side distances) of the one-IRS benchmark."""
    panel = single_panel(scenario, K)
    d_bs = point_to_panel_distances(scenario.bs_pos, panel)
    r = los_from_distances(point_to_panel_distances(scenario.user_pos, panel), scenario.prop)
    return los_from_distances(d_bs, scenario.prop), r, d_bs


def exact_double_snr(scenario: ScenarioConfig, K1: int, K2: int) -> float:
    link = double_link(scenario, K1, K2)
    return received_snr(link.evaluate(), scenario.tx_power_dbm, scenario.noise_power_dbm)


def exact_single_snr(scenario: ScenarioConfig, K: int) -> float:
    t, r, _ = single_link(scenario, K)
    h = cascade_single(r, single_irs_phases(t, r), t)
    return received_snr(h, scenario.tx_power_dbm, scenario.noise_power_dbm)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SweepRow:
    k1: int
    k2: int
    snr_exact_db: float
    snr_closed_db: float
    snr_single_db: float


@dataclass
class SweepResult:
    K: int
    step: int
    seed: int
    scenario_digest: str
    rows: list[SweepRow]

    CSV_HEADER = ("k1", "k2", "snr_exact_db", "snr_closed_db", "snr_single_db")

    def csv_rows(self) -> Iterable[tuple]:
        for row in self.rows:
            yield (row.k1, row.k2, fmt_db(row.snr_exact_db), fmt_db(row.snr_closed_db),
                   fmt_db(row.snr_single_db))

    def best(self) -> SweepRow:
        return max(self.rows, key=lambda row: row.snr_exact_db)

    def max_closed_form_gap(self) -> float:
        return max(abs(row.snr_exact_db - row.snr_closed_db) for row in self.rows)

    def tracks_closed_form(self, tol_db: float = DEFAULT_TRACKING_TOL_DB) -> bool:
        return self.max_closed_form_gap() < tol_db


def run_split_sweep(
    scenario: ScenarioConfig, K: int, step: int, seed: int = 0, workers: int = 1
) -> SweepResult:
    """SNR of every split K1 in {step, 2 step, ..., < K} plus the one-IRS benchmark.

    The sweep is deterministic; ``seed`` is only recorded for the manifest.
    """
    if K < 2:
        raise ValueError(f"total element count must be at least 2, got {K}")
    if step < 1:
        raise ValueError(f"step must be positive, got {step}")
    splits = list(range(step, K, step))
    if not splits:
        raise ValueError(f"step {step} leaves no split of K={K}")
    link = scenario.link_distances()
    alpha = scenario.prop.alpha
    p, n = scenario.tx_power_dbm, scenario.noise_power_dbm
    single = exact_single_snr(scenario, K)

    def row(k1: int) -> SweepRow:
        k2 = K - k1
        closed = snr_db(analysis.double_gain_closed_form(k1, k2, link, alpha), p, n)
        return SweepRow(k1, k2, exact_double_snr(scenario, k1, k2), closed, single)

    return SweepResult(K, step, seed, scenario.digest(), _map(row, splits, workers))


@dataclass
class McResult:
    tau: float
    trials: int
    mean_snr_db: float
    std_err_db: float
    case: str
    trial_snr_db: np.ndarray | None = field(default=None, repr=False)

    CSV_HEADER = ("tau", "trials", "mean_snr_db", "std_err_db", "case")

    def csv_row(self) -> tuple:
        return (fmt_tau(self.tau), self.trials, fmt_db(self.mean_snr_db),
                fmt_db(self.std_err_db), self.case)


def summarize_trials(
    gains: np.ndarray, tau: float, case: str, scenario: ScenarioConfig, keep: bool = False
) -> McResult:
    """Average per-trial SNR in linear scale and report it in dB.

    The mean is taken as ``x0 + mean(x - x0)`` so a constant sequence averages
    to exactly its value. The standard error is mapped to dB to first order.
    """
    gains = np.asarray(gains, dtype=float)
    n = gains.size
    if n < 1:
        raise ValueError("need at least one trial")
    # SNR is P/sigma^2 times the power gain, so average the gains directly
    shifted = gains - gains[0]
    mean = gains[0] + np.mean(shifted)
    if n > 1 and mean > 0:
        std_err = 10 / math.log(10) * np.std(shifted, ddof=1) / math.sqrt(n) / mean
    else:
        std_err = math.nan
    p, noise = scenario.tx_power_dbm, scenario.noise_power_dbm
    per_trial = np.array([snr_db(g, p, noise) for g in gains]) if keep else None
    return McResult(float(tau), n, snr_db(float(mean), p, noise), float(std_err), case, per_trial)


def run_rician_study(
    scenario: ScenarioConfig,
    K1: int,
    K2: int,
    taus: Sequence[float],
    trials: int,
    seed: int,
    workers: int = 1,
    keep_trials: bool = False,
) -> list[McResult]:
    """Average SNR under Rician fading of the inter-IRS (and BS-to-single-IRS) channel.

    Two-IRS beamformers stay fixed to the LoS far-field design; the one-IRS
    benchmark (K1 + K2 elements at the IRS 2 site) re-aligns to each realization.
    Trial ``i`` draws from ``RngStream(seed, i)`` for every tau, so results do not
    depend on execution order or ``workers``. Rows come out per tau as
    (double, single).
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    taus = [float(tau) for tau in taus]
    for tau in taus:
        if math.isnan(tau) or tau < 0:
            raise ValueError(f"Rician factor must be >= 0 or inf, got {tau}")

    link = double_link(scenario, K1, K2)
    scatter_s = math.sqrt(scenario.prop.alpha) / link.distances
    t1, r1, d_bs = single_link(scenario, K1 + K2)
    scatter_t1 = math.sqrt(scenario.prop.alpha) / d_bs

    results = []
    for tau in taus:
        def double_trial(i: int) -> float:
            gen = RngStream(seed, i).generator(_DOUBLE_STREAM)
            return link.evaluate(rician_mix(link.s_los, scatter_s, tau, gen)).power_gain

        def single_trial(i: int) -> float:
            gen = RngStream(seed, i).generator(_SINGLE_STREAM)
            t = rician_mix(t1, scatter_t1, tau, gen)
            return cascade_single(r1, single_irs_phases(t, r1), t).power_gain

        for case, fn in (("double", double_trial), ("single", single_trial)):
            gains = _map(fn, range(trials), workers)
            res = summarize_trials(gains, tau, case, scenario, keep=keep_trials)
            log.info("tau=%s %s: mean %.4f dB", fmt_tau(tau), case, res.mean_snr_db)
            results.append(res)
    return results


@dataclass(frozen=True)
class DoublingResult:
    k_small: int
    snr_double_small_db: float
    snr_double_large_db: float
    snr_single_small_db: float
    snr_single_large_db: float

    CSV_HEADER = ("case", "k_small", "k_large", "snr_small_db", "snr_large_db", "delta_db")

    @property
    def delta_double_db(self) -> float:
        return self.snr_double_large_db - self.snr_double_small_db

    @property
    def delta_single_db(self) -> float:
        return self.snr_single_large_db - self.snr_single_small_db

    def csv_rows(self) -> Iterable[tuple]:
        k, k2 = self.k_small, 2 * self.k_small
        yield ("double", k, k2, fmt_db(self.snr_double_small_db),
               fmt_db(self.snr_double_large_db), fmt_db(self.delta_double_db))
        yield ("single", k, k2, fmt_db(self.snr_single_small_db),
               fmt_db(self.snr_single_large_db), fmt_db(self.delta_single_db))


def run_doubling_deltas(scenario: ScenarioConfig, K_small: int, seed: int = 0) -> DoublingResult:
    """SNR gained by doubling the element budget, balanced two-IRS vs one IRS."""
    if K_small < 2 or K_small % 2:
        raise ValueError(f"K_small must be even and >= 2, got {K_small}")

    def double(K: int) -> float:
        return exact_double_snr(scenario, *analysis.optimal_split(K))

    return DoublingResult(
        K_small,
        double(K_small),
        double(2 * K_small),
        exact_single_snr(scenario, K_small),
        exact_single_snr(scenario, 2 * K_small),
    )


@dataclass
class CrossoverResult:
    """Outcome of a crossover scan; ``k_star`` is None when nothing crossed."""

    k_star: float | None
    found: bool
    at_boundary: bool
    rows: list[tuple[int, float, float]]

    CSV_HEADER = ("k", "snr_double_db", "snr_single_db")

    def csv_rows(self) -> Iterable[tuple]:
        for k, double, single in self.rows:
            yield (k, fmt_db(double), fmt_db(single))


def run_crossover_search(
    scenario: ScenarioConfig, k_min: int, k_max: int, step: int = 20, workers: int = 1
) -> CrossoverResult:
    """Smallest even K where the balanced two-IRS SNR reaches the one-IRS SNR.

    K* is interpolated linearly in the SNR difference between the last losing and
    first winning K. If the first K already wins, it is returned flagged as a
    boundary value.
    """
    if step < 2 or step % 2:
        raise ValueError(f"step must be a positive even number, got {step}")
    start = max(2, k_min + (k_min % 2))
    ks = list(range(start, k_max + 1, step))
    if not ks:
        raise ValueError(f"no even K in [{k_min}, {k_max}]")

    def point(K: int) -> tuple[int, float, float]:
        return K, exact_double_snr(scenario, *analysis.optimal_split(K)), exact_single_snr(scenario, K)

    rows = _map(point, ks, workers)
    prev = None
    for K, double, single in rows:
        diff = double - single
        if diff >= 0:
            if prev is None:
                return CrossoverResult(float(K), True, True, rows)
            k_prev, diff_prev = prev
            k_star = k_prev + (K - k_prev) * (-diff_prev) / (diff - diff_prev)
            return CrossoverResult(k_star, True, False, rows)
        prev = (K, diff)
    return CrossoverResult(None, False, False, rows)


def fmt_db(x: float) -> str:
    """Fixed 6-significant-digit rendering used in every CSV."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def fmt_tau(tau: float) -> str:
    return "inf" if math.isinf(tau) else f"{tau:.6g}"
