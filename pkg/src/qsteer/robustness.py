"""Perturbation models and the robustness-infidelity measure.

The measure is the mean infidelity over an ensemble of perturbed
re-simulations: pulse offsets drawn once per control channel, decoherence
rates shifted upward uniformly, or both combined. Perturbed pulses are
deliberately not re-clamped to the nominal amplitude box: the perturbation
models hardware error, which does not respect nominal bounds.

Per-sample RNG streams are derived deterministically from
(seed, system id, experiment index, sample index) so serial and parallel
campaigns agree bitwise.
"""

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .catalog import CatalogEntry
from .dynamics import DensityMatrix, PulseSchedule, amplitude_damping_channels, fidelity, propagate_open

KINDS = ("pulse", "decoherence", "combined")


@dataclass(frozen=True)
class PerturbationModel:
    kind: str
    delta_u: float = 0.05
    delta_gamma: float = 0.005
    nominal_gamma: float = 0.01
    samples: int = 15
    per_segment: bool = False  # sensitivity-study variant, off by default

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.delta_u < 0 or self.delta_gamma < 0:
            raise ValueError("perturbation magnitudes must be nonnegative")
        if self.samples < 1:
            raise ValueError("need at least one sample")


def default_models(samples: int = 15, nominal_gamma: float = 0.01) -> tuple:
    return tuple(
        PerturbationModel(kind=k, samples=samples, nominal_gamma=nominal_gamma)
        for k in KINDS
    )


def sample_rng(seed: int, system_id: str, experiment: int, sample: int) -> np.random.Generator:
    """Deterministic per-sample stream; stable across processes."""
    key = (int(seed), zlib.crc32(system_id.encode()), int(experiment), int(sample))
    return np.random.default_rng(np.random.SeedSequence(key))


def perturb_pulses(
    schedule: PulseSchedule, delta_u: float, rng: np.random.Generator, per_segment: bool = False
) -> PulseSchedule:
    """Add one Uniform(-delta_u, delta_u) offset per control channel (applied
    to every segment of that channel). No re-clamping."""
    if delta_u < 0:
        raise ValueError("delta_u must be nonnegative")
    m = schedule.n_controls
    if per_segment:
        offsets = rng.uniform(-delta_u, delta_u, size=schedule.amplitudes.shape)
    else:
        offsets = rng.uniform(-delta_u, delta_u, size=m)[None, :]
    return PulseSchedule(
        schedule.total_time, schedule.segments, schedule.amplitudes + offsets
    )


def perturb_gamma(nominal: float, delta_gamma: float, rng: np.random.Generator) -> float:
    """Upward shift: nominal + Uniform(0, delta_gamma)."""
    if nominal < 0:
        raise ValueError("nominal rate must be nonnegative")
    return float(nominal + rng.uniform(0.0, delta_gamma))


def _perturbed_fidelity(
    entry: CatalogEntry, schedule: PulseSchedule, model: PerturbationModel, rng
) -> float:
    sched = schedule
    gamma = model.nominal_gamma
    if model.kind in ("pulse", "combined"):
        sched = perturb_pulses(sched, model.delta_u, rng, model.per_segment)
    if model.kind in ("decoherence", "combined"):
        gamma = perturb_gamma(gamma, model.delta_gamma, rng)
    channels = amplitude_damping_channels(entry.n_qubits, gamma)
    rho0 = DensityMatrix.from_state(entry.initial)
    states = propagate_open(entry.ham, channels, sched, rho0)
    return fidelity(states[-1], entry.target)


def rim_samples(
    entry: CatalogEntry,
    schedule: PulseSchedule,
    model: PerturbationModel,
    seed: int,
    experiment: int = 0,
) -> np.ndarray:
    """Fidelities of the perturbed re-simulations (length model.samples)."""
    out = np.empty(model.samples)
    for i in range(model.samples):
        rng = sample_rng(seed, entry.id, experiment, i)
        out[i] = _perturbed_fidelity(entry, schedule, model, rng)
    return out


def rim(
    entry: CatalogEntry,
    schedule: PulseSchedule,
    model: PerturbationModel,
    seed: int,
    experiment: int = 0,
) -> float:
    """Mean infidelity over the perturbation ensemble."""
    return float(np.mean(1.0 - rim_samples(entry, schedule, model, seed, experiment)))


@dataclass(frozen=True)
class PulseRecord:
    """A nominal control solution to be stressed: one (system, experiment)."""

    system_id: str
    experiment: int
    schedule: PulseSchedule


@dataclass(frozen=True)
class RimPoint:
    system_id: str
    experiment: int
    kind: str
    nominal_fidelity: float
    rim: float
    sample_fidelities: tuple


@dataclass(frozen=True)
class RimReport:
    points: tuple  # included RimPoints
    per_system: dict  # id -> {kind: mean rim, "nominal_fidelity": mean}
    aggregates: dict  # kind -> {mean, median, min, max, count}
    excluded: tuple  # system ids with no surviving points
    threshold: float


def _campaign_task(args):
    entry, record, models, seed = args
    channels = amplitude_damping_channels(entry.n_qubits, models[0].nominal_gamma)
    rho0 = DensityMatrix.from_state(entry.initial)
    states = propagate_open(entry.ham, channels, record.schedule, rho0)
    nominal = fidelity(states[-1], entry.target)
    results = []
    for model in models:
        fids = rim_samples(entry, record.schedule, model, seed, record.experiment)
        results.append(
            RimPoint(
                system_id=record.system_id,
                experiment=record.experiment,
                kind=model.kind,
                nominal_fidelity=nominal,
                rim=float(np.mean(1.0 - fids)),
                sample_fidelities=tuple(float(f) for f in fids),
            )
        )
    return results


def rim_campaign(
    records,
    catalog_map: dict,
    models,
    seed: int,
    threshold: float = 0.95,
    workers: int = 1,
) -> RimReport:
    """Stress every pulse record under every model; records whose nominal
    (pre-perturbation) fidelity falls below the threshold are excluded."""
    models = tuple(models)
    if not models:
        raise ValueError("need at least one perturbation model")
    gammas = {m.nominal_gamma for m in models}
    if len(gammas) != 1:
        raise ValueError("all models in one campaign must share nominal_gamma")
    records = sorted(records, key=lambda r: (r.system_id, r.experiment))
    tasks = [(catalog_map[r.system_id], r, models, seed) for r in records]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(_campaign_task, tasks, chunksize=1))
    else:
        grouped = [_campaign_task(t) for t in tasks]

    all_points = [p for group in grouped for p in group]
    included = tuple(p for p in all_points if p.nominal_fidelity >= threshold)
    seen_ids = sorted({r.system_id for r in records})
    kept_ids = {p.system_id for p in included}
    excluded = tuple(i for i in seen_ids if i not in kept_ids)

    per_system = {}
    for sid in sorted(kept_ids):
        mine = [p for p in included if p.system_id == sid]
        row = {"nominal_fidelity": float(np.mean([p.nominal_fidelity for p in mine]))}
        for model in models:
            vals = [p.rim for p in mine if p.kind == model.kind]
            row[model.kind] = float(np.mean(vals)) if vals else None
        per_system[sid] = row

    aggregates = {}
    for model in models:
        vals = np.array([p.rim for p in included if p.kind == model.kind])
        if vals.size:
            aggregates[model.kind] = {
                "mean": float(np.mean(vals)),
                "median": float(np.median(vals)),
                "min": float(np.min(vals)),
                "max": float(np.max(vals)),
                "count": int(vals.size),
            }
        else:
            aggregates[model.kind] = {"mean": None, "median": None, "min": None, "max": None, "count": 0}

    return RimReport(
        points=included,
        per_system=per_system,
        aggregates=aggregates,
        excluded=excluded,
        threshold=threshold,
    )
