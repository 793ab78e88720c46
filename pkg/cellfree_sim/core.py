"""Core interface for Cellfree Sim: experiment plans, per-layout simulation and the runner."""

import asyncio
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .association import AssociationGraph, assign_leaders_and_pilots, form_clusters
from .baselines import build_local_precoders
from .channel import ChannelMatrix, SupportMap, compute_supports, draw_channel_matrix
from .config import DlPowerMode, Direction, Estimator, Scheme, SimConfig, _env
from .csi import EstimateSet, PilotBook, estimate_channels, synthesize_pilot_field
from .duality import dual_power_allocation, nominal_coefficients, nominal_ul_sinr, virtual_ul_snr
from .geometry import LargeScaleMap, NetworkLayout, compute_lsfc, place_nodes
from .metrics import (
    REPORT_COLUMNS,
    RateReport,
    actual_dl_sinr,
    actual_ul_sinr,
    ergodic_rates,
    sinr_db,
    spectral_efficiency,
)
from .receivers import BaseReceiver, ClzfReceiver, LmmseClusterReceiver, LsfdReceiver
from .rng import Purpose, StreamId, stream_for
from .scenario import DerivedConstants, derive_constants
from .utils import provenance_lines, validate_output_dir, version_string, write_json, write_report_csv

logger = logging.getLogger(__name__)

LZF_POWER_NOTE = "lzf/lpzf per-RU power K_active/L (normalized to P_ue)"


class ExperimentPlan(BaseModel):
    """
    Sweep over scenario points.

    An axis left as None keeps the base value. Plans are not validated on
    construction; use validate_plan to get diagnostics.
    """
    model_config = ConfigDict(frozen=True)

    name: str = "experiment"
    base: SimConfig = Field(default_factory=SimConfig)
    pilot_dims: Optional[list[int]] = None
    ue_counts: Optional[list[int]] = None
    ru_antenna_pairs: Optional[list[tuple[int, int]]] = None
    schemes: list[Scheme] = Field(default_factory=lambda: [Scheme.LMMSE_CLUSTER])
    estimators: list[Estimator] = Field(default_factory=lambda: [Estimator.SP])
    output_dir: Path = Field(default_factory=lambda: Path(_env("output_dir", "results")))
    workers: int = Field(default_factory=lambda: int(_env("workers", "1")))
    fixed_antenna_budget: bool = False

    def point_updates(self) -> list[dict[str, Any]]:
        """Field overrides of every sweep point, τ_p varying fastest."""
        pairs = self.ru_antenna_pairs or [(self.base.num_rus, self.base.antennas_per_ru)]
        ues = self.ue_counts or [self.base.num_ues]
        taus = self.pilot_dims or [self.base.pilot_dim]
        return [
            {"num_rus": L, "antennas_per_ru": M, "num_ues": K, "pilot_dim": tau}
            for (L, M), K, tau in itertools.product(pairs, ues, taus)
        ]

    def points(self) -> list[SimConfig]:
        """
        Validated configs of all sweep points.

        Raises:
            pydantic.ValidationError: If a point violates the config invariants
        """
        base = self.base.model_dump()
        return [SimConfig.model_validate({**base, **update}) for update in self.point_updates()]


def validate_plan(plan: ExperimentPlan) -> tuple[bool, list[str]]:
    """
    Check a plan without running it.

    Returns:
        Tuple of (is_valid, diagnostics)
    """
    diagnostics: list[str] = []
    if not plan.schemes:
        diagnostics.append("empty scheme list")
    if not plan.estimators:
        diagnostics.append("empty estimator list")
    for axis in ("pilot_dims", "ue_counts", "ru_antenna_pairs"):
        if getattr(plan, axis) == []:
            diagnostics.append(f"empty sweep axis: {axis}")
    if plan.workers <= 0:
        diagnostics.append(f"parallelism must be positive, got workers={plan.workers}")

    base = plan.base.model_dump()
    for update in plan.point_updates():
        try:
            SimConfig.model_validate({**base, **update})
        except ValidationError as e:
            for error in e.errors():
                message = str(error["msg"]).removeprefix("Value error, ")
                diagnostics.append(f"point {update}: {message}")

    if plan.fixed_antenna_budget and plan.ru_antenna_pairs:
        budgets = {L * M for L, M in plan.ru_antenna_pairs}
        if len(budgets) > 1:
            diagnostics.append(f"(L, M) pairs do not keep L·M fixed: {sorted(budgets)}")

    return not diagnostics, diagnostics


def get_receiver(scheme: str | Scheme, sim_config: SimConfig) -> BaseReceiver:
    """
    Create the receiver of a UL scheme.

    Raises:
        ValueError: If the scheme is unknown or has no UL receiver
    """
    if isinstance(scheme, str):
        try:
            scheme = Scheme(scheme)
        except ValueError:
            raise ValueError(f"Unsupported scheme: {scheme}")

    if scheme == Scheme.CLZF:
        return ClzfReceiver(sim_config)
    elif scheme == Scheme.LMMSE_CLUSTER:
        return LmmseClusterReceiver(sim_config)
    elif scheme == Scheme.LSFD:
        return LsfdReceiver(sim_config)
    elif scheme.is_local_precoding:
        raise ValueError(f"{scheme.value} is a DL local precoding scheme without UL receiver")
    else:
        raise ValueError(f"Unsupported scheme: {scheme}")


@dataclass(frozen=True)
class LayoutState:
    """Everything that stays fixed over the fading draws of one layout."""
    index: int
    layout: NetworkLayout
    lsfc: LargeScaleMap
    supports: SupportMap
    graph: AssociationGraph
    constants: DerivedConstants


@dataclass
class LayoutResult:
    layout_index: int
    rows: list[dict[str, Any]] = field(default_factory=list)
    outage: int = 0
    degenerate: int = 0


def build_layout(sim_config: SimConfig, layout_index: int) -> LayoutState:
    """Place nodes, draw large-scale fading and form the clusters of one layout."""
    seed = sim_config.master_seed
    constants = derive_constants(sim_config)
    layout = place_nodes(sim_config, stream_for(seed, StreamId(layout_index, Purpose.PLACEMENT)))
    lsfc = compute_lsfc(layout, sim_config, stream_for(seed, StreamId(layout_index, Purpose.LARGE_SCALE)))
    supports = compute_supports(layout, sim_config)
    partial = assign_leaders_and_pilots(
        lsfc, sim_config, constants, stream_for(seed, StreamId(layout_index, Purpose.UE_ORDER))
    )
    graph = form_clusters(lsfc, partial, sim_config, constants)
    return LayoutState(layout_index, layout, lsfc, supports, graph, constants)


def dl_snr(sim_config: SimConfig, constants: DerivedConstants, num_active: int) -> float:
    """
    SNR at which the DL is evaluated: the UL SNR, or the virtual UL SNR in per-RU mode.

    The virtual UL spreads L·P_ru over the UEs that are actually served, so the
    dual powers (Σ q = K_active) spend exactly L·P_ru.
    """
    if sim_config.dl_power_mode is DlPowerMode.PER_RU:
        return virtual_ul_snr(
            sim_config.num_rus, max(num_active, 1), sim_config.ru_power_mw, sim_config.noise_mw
        )
    return constants.snr


def draw_estimates(
    state: LayoutState,
    sim_config: SimConfig,
    estimators: Sequence[Estimator],
    draw_index: int,
    fading: Purpose = Purpose.FADING,
    pilot_noise: Purpose = Purpose.PILOT_NOISE,
) -> tuple[ChannelMatrix, dict[Estimator, EstimateSet]]:
    """One fading realization and its estimates for every requested estimator."""
    seed = sim_config.master_seed
    channels = draw_channel_matrix(
        state.lsfc, state.supports, stream_for(seed, StreamId(state.index, fading, draw_index))
    )
    book = PilotBook(sim_config.pilot_dim, state.constants.snr)
    pilot_field = None
    if any(e is not Estimator.IDEAL for e in estimators):
        pilot_field = synthesize_pilot_field(
            channels, state.graph, book, stream_for(seed, StreamId(state.index, pilot_noise, draw_index))
        )
    estimates = {
        estimator: estimate_channels(channels, state.graph, state.supports, estimator, book, pilot_field)
        for estimator in estimators
    }
    return channels, estimates


def _lsfd_estimates(state: LayoutState, sim_config: SimConfig, estimator: Estimator) -> Iterator[EstimateSet]:
    for draw in range(sim_config.lsfd_stat_draws):
        _, estimates = draw_estimates(
            state, sim_config, [estimator], draw, Purpose.LSFD_FADING, Purpose.LSFD_PILOT_NOISE
        )
        yield estimates[estimator]


def _prepare_receivers(
    state: LayoutState,
    sim_config: SimConfig,
    schemes: Sequence[Scheme],
    estimators: Sequence[Estimator],
    snrs: Sequence[float],
) -> dict[tuple[Scheme, Estimator], BaseReceiver]:
    receivers = {}
    for scheme in schemes:
        if scheme.is_local_precoding:
            continue
        for estimator in estimators:
            receiver = get_receiver(scheme, sim_config)
            if isinstance(receiver, LsfdReceiver):
                receiver.fit(_lsfd_estimates(state, sim_config, estimator), state.graph, state.lsfc, snrs)
            receivers[(scheme, estimator)] = receiver
    return receivers


def simulate_layout(
    sim_config: SimConfig,
    layout_index: int,
    schemes: Sequence[Scheme],
    estimators: Sequence[Estimator],
) -> LayoutResult:
    """
    Run every scheme/estimator pair over the fading draws of one layout.

    Returns one row per served UE, direction, scheme and estimator. The local
    precoding schemes produce DL rows only.
    """
    state = build_layout(sim_config, layout_index)
    graph, lsfc = state.graph, state.lsfc
    snr = state.constants.snr
    active = graph.active
    snr_dl = dl_snr(sim_config, state.constants, int(active.sum()))
    ru_power = int(active.sum()) / sim_config.num_rus

    receivers = _prepare_receivers(state, sim_config, schemes, estimators, sorted({snr, snr_dl}))
    samples: dict[tuple[Scheme, Estimator, Direction], list[np.ndarray]] = {}
    result = LayoutResult(layout_index=layout_index, outage=int(graph.outage.sum()))

    def record(scheme: Scheme, estimator: Estimator, direction: Direction, sinr: np.ndarray) -> None:
        samples.setdefault((scheme, estimator, direction), []).append(sinr)

    for draw in range(sim_config.fading_draws_per_layout):
        channels, estimate_sets = draw_estimates(state, sim_config, estimators, draw)
        full = channels.full()
        for estimator, estimates in estimate_sets.items():
            for scheme in schemes:
                if scheme.is_local_precoding:
                    precoders = build_local_precoders(estimates, graph, lsfc, ru_power, scheme)
                    columns, q = precoders.global_precoders()
                    record(scheme, estimator, Direction.DL, actual_dl_sinr(columns, q, full, snr_dl))
                    continue

                receiver = receivers[(scheme, estimator)]
                ul_set = receiver.build(estimates, graph, lsfc, snr)
                result.degenerate += ul_set.degenerate_count
                record(scheme, estimator, Direction.UL, actual_ul_sinr(ul_set.matrix(), full, snr, active))

                dl_set = ul_set
                if snr_dl != snr and receiver.depends_on_snr:
                    dl_set = receiver.build(estimates, graph, lsfc, snr_dl)
                coeffs = nominal_coefficients(dl_set, estimates, lsfc, graph, sim_config.unknown_link_weight)
                power = dual_power_allocation(
                    coeffs, nominal_ul_sinr(coeffs, snr_dl), snr_dl, sim_config.dl_power_mode
                )
                record(scheme, estimator, Direction.DL, actual_dl_sinr(dl_set.matrix(), power.q, full, snr_dl))

    served = np.flatnonzero(active)
    for (scheme, estimator, direction), draws in samples.items():
        stacked = np.vstack(draws)
        rates = ergodic_rates(stacked)
        se = spectral_efficiency(rates, sim_config.pilot_dim, sim_config.coherence_block)
        mean_db = sinr_db(stacked.mean(axis=0))
        for ue in served:
            result.rows.append({
                "layout_id": layout_index,
                "ue_id": int(ue),
                "direction": direction.value,
                "scheme": scheme.value,
                "estimator": estimator.value,
                "sinr_mean_db": float(mean_db[ue]),
                "rate": float(rates[ue]),
                "se": float(se[ue]),
            })

    logger.debug("Layout %d: %d served, %d in outage", layout_index, len(served), result.outage)
    return result


def collect_report(sim_config: SimConfig, results: Sequence[LayoutResult]) -> RateReport:
    """Merge layout results in layout order."""
    ordered = sorted(results, key=lambda r: r.layout_index)
    rows = [row for r in ordered for row in r.rows]
    return RateReport(
        rows=pd.DataFrame(rows, columns=REPORT_COLUMNS),
        outage={r.layout_index: r.outage for r in ordered},
        degenerate=sum(r.degenerate for r in ordered),
        num_ues=sim_config.num_ues,
    )


async def _run_layouts(
    sim_config: SimConfig,
    plan: ExperimentPlan,
    executor: Optional[ProcessPoolExecutor],
) -> list[LayoutResult]:
    indices = range(sim_config.num_layouts)
    if executor is None:
        return [simulate_layout(sim_config, i, plan.schemes, plan.estimators) for i in indices]
    loop = asyncio.get_running_loop()
    tasks = [
        loop.run_in_executor(executor, simulate_layout, sim_config, i, plan.schemes, plan.estimators)
        for i in indices
    ]
    return list(await asyncio.gather(*tasks))


async def run_experiment(plan: ExperimentPlan) -> list[Path]:
    """
    Run all sweep points of a plan and write the per-UE rates and the rate CDF of every
    point as CSVs, plus a summary JSON.

    Args:
        plan: Experiment plan

    Returns:
        Paths of the written files, CSVs first

    Raises:
        ValueError: If the plan is invalid
        OSError: If the output directory cannot be written
    """
    is_valid, diagnostics = validate_plan(plan)
    if not is_valid:
        raise ValueError("Invalid experiment plan: " + "; ".join(diagnostics))
    output_dir = Path(plan.output_dir)
    is_writable, error_msg = validate_output_dir(output_dir)
    if not is_writable:
        raise OSError(error_msg)

    written: list[Path] = []
    points_summary = []
    executor = ProcessPoolExecutor(max_workers=plan.workers) if plan.workers > 1 else None
    try:
        for index, sim_config in enumerate(plan.points()):
            logger.info(
                "Point %d: L=%d M=%d K=%d tau_p=%d (%d layouts x %d draws)",
                index, sim_config.num_rus, sim_config.antennas_per_ru, sim_config.num_ues,
                sim_config.pilot_dim, sim_config.num_layouts, sim_config.fading_draws_per_layout,
            )
            results = await _run_layouts(sim_config, plan, executor)
            report = collect_report(sim_config, results)
            header = provenance_lines(sim_config, {"point": index, "note": LZF_POWER_NOTE})
            written.append(write_report_csv(report.to_frame(), output_dir / f"{plan.name}_p{index:03d}.csv", header))
            written.append(write_report_csv(report.cdf_frame(), output_dir / f"{plan.name}_p{index:03d}_cdf.csv", header))
            if report.degenerate:
                logger.warning("Point %d: %d degenerate CLZF receivers", index, report.degenerate)
            points_summary.append({
                "index": index,
                "config": sim_config.model_dump(mode="json"),
                "outage_users": report.outage_total,
                "degenerate_clzf": report.degenerate,
                "groups": report.summary(),
            })
    finally:
        if executor is not None:
            executor.shutdown()

    summary = {
        "version": version_string(),
        "plan": plan.model_dump(mode="json"),
        "note": LZF_POWER_NOTE,
        "points": points_summary,
    }
    written.append(write_json(summary, output_dir / f"{plan.name}_summary.json"))
    logger.info("Wrote %d files to %s", len(written), output_dir)
    return written


SUM_SE_LAYOUTS = {"sum_se_l10": (10, 64), "sum_se_l20": (20, 32), "sum_se_l40": (40, 16)}
FIGURE_NAMES = (*SUM_SE_LAYOUTS, "sum_se_vs_tau_p", "rate_cdf")


def figure_plan(name: str, base: Optional[SimConfig] = None, **kwargs: Any) -> ExperimentPlan:
    """
    Plan reproducing one of the result figures.

    sum_se_l10/l20/l40 sweep τ_p for K ∈ {100, 200} at one antenna arrangement with
    LM = 640, sum_se_vs_tau_p covers all three, rate_cdf is the per-user rate
    distribution at L=10, M=64, K=100, τ_p=40.

    Raises:
        ValueError: If the figure name is unknown
    """
    base = base or SimConfig()
    taus = list(range(10, min(100, base.coherence_block) + 1, 10))
    if name in SUM_SE_LAYOUTS:
        pairs = [SUM_SE_LAYOUTS[name]]
    elif name == "sum_se_vs_tau_p":
        pairs = list(SUM_SE_LAYOUTS.values())
    elif name == "rate_cdf":
        return ExperimentPlan(
            name=name,
            base=base,
            pilot_dims=[40],
            ue_counts=[100],
            ru_antenna_pairs=[(10, 64)],
            schemes=[Scheme.CLZF, Scheme.LMMSE_CLUSTER],
            estimators=[Estimator.SP],
            **kwargs,
        )
    else:
        raise ValueError(f"Unknown figure: {name} (expected one of {', '.join(FIGURE_NAMES)})")

    return ExperimentPlan(
        name=name,
        base=base,
        pilot_dims=taus,
        ue_counts=[100, 200],
        ru_antenna_pairs=pairs,
        schemes=[Scheme.LMMSE_CLUSTER, Scheme.LZF_PPA],
        estimators=[Estimator.SP],
        fixed_antenna_budget=True,
        **kwargs,
    )
