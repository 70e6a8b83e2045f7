"""Experiment orchestration: training runs, the 30x25 evaluation protocol,
progressive training-set expansion, GRAPE sweeps, robustness campaigns and
the closed-vs-open gap report, with deterministic seeding and plain CSV/JSON
outputs.

Run layout: <out>/{config.json, checkpoints/, logs/, results/}. Every output
file carries the config hash; reruns with the same config and seed are
byte-identical apart from the ``generated_at`` timestamp field.
"""

import dataclasses
import json
import pickle
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import accel
from . import catalog as catalog_mod
from . import robustness, sac
from .dynamics import PulseSchedule
from .env import EnvConfig, QuantumControlEnv
from .grape import GrapeConfig, grape_optimize
from .runconfig import ConfigError, config_hash

# Quoted for context in robustness reports: combined-perturbation mean
# infidelities this harness is expected to land near at full scale. Used as
# documentation, never asserted.
REFERENCE_MEAN_RIM_COMBINED = {"sac": 0.045, "grape": 0.061}


@dataclass(frozen=True)
class EvaluationRecord:
    system_id: str
    experiment: int
    best_fidelity: float
    chosen_T: float
    chosen_N: int
    effective_T: float
    effective_N: int
    success: bool


# ---------------------------------------------------------------------------
# run-directory and file helpers


def ensure_run_dir(out) -> Path:
    root = Path(out)
    for sub in ("checkpoints", "logs", "results"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    return root


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_json(path, payload: dict, cfg_hash: str):
    body = {"config_hash": cfg_hash, "generated_at": _timestamp()}
    body.update(payload)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(body, fh, indent=1, sort_keys=False)
        fh.write("\n")


def write_csv(path, columns, rows, cfg_hash: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(f"# generated_at={_timestamp()}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row[c]) for c in columns) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def save_pulse_file(path, system_id, schedule: PulseSchedule, mode, gamma, seed, nominal_fidelity):
    payload = {
        "system_id": system_id,
        "T": schedule.total_time,
        "N": schedule.segments,
        "amplitudes": schedule.amplitudes.tolist(),
        "mode": mode,
        "gamma": gamma,
        "seed": seed,
        "nominal_fidelity": nominal_fidelity,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_pulse_file(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    data["schedule"] = PulseSchedule(data["T"], data["N"], np.array(data["amplitudes"]))
    return data


def load_pulse_dir(pulse_dir, systems=None) -> list:
    """All *.pulse.json files as robustness.PulseRecord, optionally filtered."""
    records = []
    for path in sorted(Path(pulse_dir).glob("*.pulse.json")):
        data = load_pulse_file(path)
        if systems is not None and data["system_id"] not in systems:
            continue
        records.append(
            robustness.PulseRecord(
                system_id=data["system_id"],
                experiment=int(data.get("experiment", _experiment_from_name(path.name))),
                schedule=data["schedule"],
            )
        )
    if not records:
        raise ConfigError(f"no pulse files found under {pulse_dir}")
    return records


def _experiment_from_name(name: str) -> int:
    # <system>_exp<k>.pulse.json
    try:
        return int(name.split("_exp")[1].split(".")[0])
    except (IndexError, ValueError):
        return 0


def write_checkpoint_meta(path, cfg_hash, systems, env_config: EnvConfig, seed, total_steps):
    meta = {
        "catalog_hash": catalog_mod.catalog_hash(),
        "config_hash": cfg_hash,
        "systems": list(systems),
        "mode": env_config.mode,
        "gamma": env_config.gamma,
        "f_min": env_config.f_min,
        "seed": seed,
        "total_steps": total_steps,
        "generated_at": _timestamp(),
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return meta


def load_checkpoint_checked(path) -> sac.SacAgent:
    """Load an agent, refusing checkpoints built against a different catalog."""
    meta_path = str(path) + ".meta.json"
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"checkpoint metadata missing: {meta_path}") from exc
    current = catalog_mod.catalog_hash()
    if meta.get("catalog_hash") != current:
        raise ConfigError(
            f"checkpoint {path} was built against catalog {meta.get('catalog_hash')!r}, "
            f"current catalog is {current!r}"
        )
    return sac.load_checkpoint(path)


# ---------------------------------------------------------------------------
# evaluation protocol


def _trial_rng(seed, system_id, experiment, trial):
    key = (int(seed), zlib.crc32(f"eval|{system_id}".encode()), int(experiment), int(trial))
    return np.random.default_rng(np.random.SeedSequence(key))


_WORKER_STATE = {}


def _eval_worker_init(agent_blob, env_config):
    _WORKER_STATE["blas_limit"] = accel.single_thread_blas()
    _WORKER_STATE["agent"] = pickle.loads(agent_blob)
    _WORKER_STATE["env_config"] = env_config


def _run_experiment(agent, env_config, system_id, experiment, trials, threshold, seed, keep_pulses):
    env = QuantumControlEnv(catalog_mod.get_entry(system_id), env_config)
    best = None
    for trial in range(trials):
        rng = _trial_rng(seed, system_id, experiment, trial)
        result = sac.rollout(agent, env, rng=rng, deterministic=False)
        if best is None or result["fidelity"] > best["fidelity"]:
            best = result
    record = EvaluationRecord(
        system_id=system_id,
        experiment=experiment,
        best_fidelity=best["fidelity"],
        chosen_T=best["chosen_T"],
        chosen_N=best["chosen_N"],
        effective_T=best["effective_T"],
        effective_N=best["effective_N"],
        success=best["fidelity"] >= threshold,
    )
    pulses = best["amplitudes"] if keep_pulses else None
    return record, pulses


def _eval_task(args):
    system_id, experiment, trials, threshold, seed, keep_pulses = args
    return _run_experiment(
        _WORKER_STATE["agent"],
        _WORKER_STATE["env_config"],
        system_id,
        experiment,
        trials,
        threshold,
        seed,
        keep_pulses,
    )


def evaluate_agent(
    agent,
    system_ids,
    env_config: EnvConfig,
    experiments: int,
    trials: int,
    threshold: float,
    seed: int,
    workers: int = 1,
    keep_pulses: bool = False,
):
    """Per system: ``experiments`` independent experiments, each scored by the
    maximum fidelity over ``trials`` stochastic rollouts."""
    tasks = [
        (sid, e, trials, threshold, seed, keep_pulses)
        for sid in system_ids
        for e in range(experiments)
    ]
    if workers > 1:
        blob = pickle.dumps(agent)
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_eval_worker_init, initargs=(blob, env_config)
        ) as pool:
            outputs = list(pool.map(_eval_task, tasks, chunksize=1))
    else:
        with accel.single_thread_blas():
            outputs = [_run_experiment(agent, env_config, *t) for t in tasks]
    records = [r for r, _ in outputs]
    pulses = {
        (r.system_id, r.experiment): amps for (r, amps) in outputs if amps is not None
    }
    return records, pulses


def _stats(values) -> dict:
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        return {"mean": None, "median": None}
    return {"mean": float(np.mean(arr)), "median": float(np.median(arr))}


def success_rate(records) -> float:
    """Exact percentage of records at or above the success threshold."""
    records = list(records)
    if not records:
        return 0.0
    return 100.0 * sum(r.success for r in records) / len(records)


def summarize_records(records, system_ids) -> dict:
    per_system = {}
    for sid in system_ids:
        mine = [r for r in records if r.system_id == sid]
        fids = [r.best_fidelity for r in mine]
        per_system[sid] = {
            "n_experiments": len(mine),
            "success_rate": success_rate(mine),
            "mean_fidelity": float(np.mean(fids)) if fids else None,
            "median_fidelity": float(np.median(fids)) if fids else None,
        }
    return {
        "per_system": per_system,
        "overall": {
            "n_records": len(records),
            "success_rate": success_rate(records),
            "mean_fidelity": float(np.mean([r.best_fidelity for r in records]))
            if records
            else None,
        },
        "temporal": {
            "chosen_T": _stats(r.chosen_T for r in records),
            "chosen_N": _stats(r.chosen_N for r in records),
            "effective_T": _stats(r.effective_T for r in records),
            "effective_N": _stats(r.effective_N for r in records),
        },
    }


def records_to_rows(records) -> list:
    return [dataclasses.asdict(r) for r in records]

EVAL_COLUMNS = [
    "system_id",
    "experiment",
    "best_fidelity",
    "chosen_T",
    "chosen_N",
    "effective_T",
    "effective_N",
    "success",
]


def fidelity_plot_data(records, bins: int = 20) -> dict:
    """Binned distributions for fidelity and the temporal choices; each
    histogram's counts sum to the record count."""
    fids = np.array([r.best_fidelity for r in records])
    t_eff = np.array([r.effective_T for r in records])
    n_eff = np.array([r.effective_N for r in records])

    def hist(values, lo, hi, n):
        counts, edges = np.histogram(np.clip(values, lo, hi), bins=n, range=(lo, hi))
        return {"edges": edges.tolist(), "counts": counts.tolist(), "n": int(values.size)}

    per_system = {}
    for sid in sorted({r.system_id for r in records}):
        per_system[sid] = sorted(
            float(r.best_fidelity) for r in records if r.system_id == sid
        )
    return {
        "fidelity_histogram": hist(fids, 0.0, 1.0, bins),
        "effective_T_histogram": hist(t_eff, 1.0, 20.0, bins),
        "effective_N_histogram": hist(n_eff, 2.0, 60.0, bins),
        "per_system_fidelities": per_system,
    }


def rim_plot_data(report: robustness.RimReport, bins: int = 20) -> dict:
    out = {}
    for kind, agg in report.aggregates.items():
        vals = np.array([p.rim for p in report.points if p.kind == kind])
        if vals.size:
            counts, edges = np.histogram(vals, bins=bins, range=(0.0, max(1e-9, vals.max())))
            out[kind] = {
                "edges": edges.tolist(),
                "counts": counts.tolist(),
                "n": int(vals.size),
                "aggregate": agg,
            }
        else:
            out[kind] = {"edges": [], "counts": [], "n": 0, "aggregate": agg}
    return out


# ---------------------------------------------------------------------------
# commands (validated config dicts in, files + summaries out)


def cmd_train(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    system_ids = catalog_mod.resolve_ids(cfg["systems"])
    entries = [catalog_mod.get_entry(s) for s in system_ids]
    env_config = EnvConfig(mode=cfg["mode"], gamma=cfg["gamma"], f_min=cfg["f_min"])
    sac_config = sac.SacConfig(
        warmup_steps=cfg["warmup_steps"], buffer_capacity=cfg["buffer_capacity"]
    )
    write_json(root / "config.json", {"command": "train", "config": cfg}, chash)
    agent, log = sac.train(
        entries,
        env_config,
        sac_config,
        total_steps=cfg["total_steps"],
        seed=cfg["seed"],
        checkpoint_dir=str(root / "checkpoints") if cfg["checkpoint_every"] else None,
        checkpoint_every=cfg["checkpoint_every"],
    )
    ckpt = root / "checkpoints" / "final.ckpt"
    sac.save_checkpoint(agent, ckpt)
    write_checkpoint_meta(ckpt, chash, system_ids, env_config, cfg["seed"], cfg["total_steps"])
    with open(root / "logs" / "train_log.jsonl", "w") as fh:
        for entry in log:
            fh.write(json.dumps(entry) + "\n")
    completed = [e for e in log if e["completed"]]
    tail = completed[-100:]
    summary = {
        "episodes": len(log),
        "env_steps": cfg["total_steps"],
        "systems": system_ids,
        "final_100_mean_fidelity": float(np.mean([e["fidelity"] for e in tail]))
        if tail
        else None,
        "checkpoint": str(ckpt),
    }
    write_json(root / "results" / "train_summary.json", summary, chash)
    return summary


def cmd_eval(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    agent = load_checkpoint_checked(cfg["checkpoint"])
    system_ids = catalog_mod.resolve_ids(cfg["systems"])
    env_config = EnvConfig(
        mode=cfg["mode"],
        gamma=cfg["gamma"],
        f_min=cfg["f_min"],
        fixed_t=cfg["fixed_T"],
        fixed_n=cfg["fixed_N"],
    )
    write_json(root / "config.json", {"command": "eval", "config": cfg}, chash)
    records, pulses = evaluate_agent(
        agent,
        system_ids,
        env_config,
        experiments=cfg["experiments"],
        trials=cfg["trials"],
        threshold=cfg["success_threshold"],
        seed=cfg["seed"],
        workers=cfg["workers"],
        keep_pulses=cfg["save_pulses"],
    )
    write_csv(root / "results" / "eval_records.csv", EVAL_COLUMNS, records_to_rows(records), chash)
    summary = summarize_records(records, system_ids)
    write_json(root / "results" / "eval_summary.json", summary, chash)
    write_json(root / "results" / "eval_plot_data.json", fidelity_plot_data(records), chash)
    if cfg["save_pulses"]:
        by_key = {(r.system_id, r.experiment): r for r in records}
        for (sid, exp), amps in pulses.items():
            # Early-terminated episodes keep only the applied segments, so the
            # schedule's horizon is the effective time, not the latched T.
            rec = by_key[(sid, exp)]
            save_pulse_file(
                root / "results" / "pulses" / f"{sid}_exp{exp:03d}.pulse.json",
                sid,
                PulseSchedule(rec.effective_T, amps.shape[0], amps),
                cfg["mode"],
                cfg["gamma"],
                cfg["seed"],
                rec.best_fidelity,
            )
    return summary


def expansion_stage_ids(stages, seed) -> list:
    """Nested training sets: the five-system base, then seeded-uniform draws
    from the remaining catalog up to each stage size."""
    all_ids = [e.id for e in catalog_mod.build_catalog()]
    base = list(catalog_mod.TABLE1_IDS)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), zlib.crc32(b"expand"))))
    remaining = [i for i in all_ids if i not in base]
    order = list(rng.permutation(len(remaining)))
    shuffled = [remaining[i] for i in order]
    out = []
    for size in stages:
        if size < len(base) or size > len(all_ids):
            raise ConfigError(f"stage size {size} out of range [{len(base)}, {len(all_ids)}]")
        out.append(base + shuffled[: size - len(base)])
    return out


def cmd_expand(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    write_json(root / "config.json", {"command": "expand", "config": cfg}, chash)
    all_ids = [e.id for e in catalog_mod.build_catalog()]
    stage_sets = expansion_stage_ids(cfg["stages"], cfg["seed"])
    env_config = EnvConfig(mode=cfg["mode"], gamma=cfg["gamma"])
    sac_config = sac.SacConfig(warmup_steps=cfg["warmup_steps"])
    rows = []
    for size, train_ids in zip(cfg["stages"], stage_sets):
        entries = [catalog_mod.get_entry(s) for s in train_ids]
        agent, _ = sac.train(
            entries,
            env_config,
            sac_config,
            total_steps=cfg["steps_per_stage"],
            seed=cfg["seed"] + size,
        )
        ckpt = root / "checkpoints" / f"stage_{size}.ckpt"
        sac.save_checkpoint(agent, ckpt)
        write_checkpoint_meta(ckpt, chash, train_ids, env_config, cfg["seed"] + size, cfg["steps_per_stage"])
        records, _ = evaluate_agent(
            agent,
            all_ids,
            env_config,
            experiments=cfg["experiments"],
            trials=cfg["trials"],
            threshold=cfg["success_threshold"],
            seed=cfg["seed"],
            workers=cfg["workers"],
        )
        heldout_ids = [i for i in all_ids if i not in train_ids]
        heldout_records = [r for r in records if r.system_id in heldout_ids]
        solved = sum(
            1
            for sid in heldout_ids
            if success_rate([r for r in heldout_records if r.system_id == sid]) >= 50.0
        )
        rows.append(
            {
                "stage": size,
                "trained_on": ",".join(train_ids),
                "full_success_rate": success_rate(records),
                "heldout_success_rate": success_rate(heldout_records)
                if heldout_records
                else None,
                "heldout_solved": solved if heldout_ids else None,
                "heldout_total": len(heldout_ids) if heldout_ids else None,
            }
        )
    # The seed fixes both the per-stage draws and the evaluation streams.
    report = {"seed": cfg["seed"], "stages": rows}
    write_json(root / "results" / "expansion_report.json", report, chash)
    csv_rows = [
        {**r, "heldout_success_rate": "" if r["heldout_success_rate"] is None else r["heldout_success_rate"],
         "heldout_solved": "" if r["heldout_solved"] is None else r["heldout_solved"],
         "heldout_total": "" if r["heldout_total"] is None else r["heldout_total"]}
        for r in rows
    ]
    write_csv(
        root / "results" / "expansion_report.csv",
        ["stage", "full_success_rate", "heldout_success_rate", "heldout_solved", "heldout_total", "trained_on"],
        csv_rows,
        chash,
    )
    return report


def cmd_grape(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    write_json(root / "config.json", {"command": "grape", "config": cfg}, chash)
    system_ids = catalog_mod.resolve_ids(cfg["systems"])
    grape_config = GrapeConfig(restarts=cfg["restarts"], max_iters=cfg["max_iters"])

    tn_source = {}
    if cfg["from_pulses"]:
        for rec in load_pulse_dir(cfg["from_pulses"], systems=set(system_ids)):
            tn_source[(rec.system_id, rec.experiment)] = (
                rec.schedule.total_time,
                rec.schedule.segments,
            )
    elif cfg["T"] is None or cfg["N"] is None:
        raise ConfigError("grape needs either T and N or from_pulses")

    rows = []
    for sid in system_ids:
        entry = catalog_mod.get_entry(sid)
        for exp in range(cfg["experiments"]):
            total_time, segments = tn_source.get(
                (sid, exp), (cfg["T"], cfg["N"])
            )
            if total_time is None or segments is None:
                raise ConfigError(f"no T/N available for {sid} experiment {exp}")
            run_seed = int(
                np.random.SeedSequence(
                    (cfg["seed"], zlib.crc32(f"grape|{sid}".encode()), exp)
                ).generate_state(1)[0]
            )
            result = grape_optimize(
                entry,
                total_time,
                segments,
                cfg["mode"],
                cfg["gamma"],
                grape_config,
                seed=run_seed,
            )
            save_pulse_file(
                root / "results" / "pulses" / f"{sid}_exp{exp:03d}.pulse.json",
                sid,
                result.schedule,
                cfg["mode"],
                cfg["gamma"],
                run_seed,
                result.fidelity,
            )
            rows.append(
                {
                    "system_id": sid,
                    "experiment": exp,
                    "T": total_time,
                    "N": segments,
                    "fidelity": result.fidelity,
                    "iterations": len(result.fidelity_trace) - 1,
                    "converged": result.converged,
                }
            )
    write_csv(
        root / "results" / "grape_results.csv",
        ["system_id", "experiment", "T", "N", "fidelity", "iterations", "converged"],
        rows,
        chash,
    )
    fids = np.array([r["fidelity"] for r in rows])
    counts, edges = np.histogram(np.clip(fids, 0.0, 1.0), bins=20, range=(0.0, 1.0))
    write_json(
        root / "results" / "grape_plot_data.json",
        {
            "fidelity_histogram": {
                "edges": edges.tolist(),
                "counts": counts.tolist(),
                "n": int(fids.size),
            }
        },
        chash,
    )
    summary = {
        "n_runs": len(rows),
        "mean_fidelity": float(np.mean(fids)),
        "pulses_dir": str(root / "results" / "pulses"),
    }
    write_json(root / "results" / "grape_summary.json", summary, chash)
    return summary


def cmd_rim(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    write_json(root / "config.json", {"command": "rim", "config": cfg}, chash)
    systems = set(catalog_mod.resolve_ids(cfg["systems"])) if cfg["systems"] else None
    records = load_pulse_dir(cfg["pulses"], systems=systems)
    models = tuple(
        robustness.PerturbationModel(
            kind=k,
            delta_u=cfg["delta_u"],
            delta_gamma=cfg["delta_gamma"],
            nominal_gamma=cfg["nominal_gamma"],
            samples=cfg["samples"],
        )
        for k in cfg["kinds"]
    )
    report = robustness.rim_campaign(
        records,
        catalog_mod.catalog_by_id(),
        models,
        seed=cfg["seed"],
        threshold=cfg["threshold"],
        workers=cfg["workers"],
    )
    rows = [
        {
            "system_id": sid,
            "kind": kind,
            "nominal_fidelity": vals["nominal_fidelity"],
            "rim": vals[kind],
        }
        for sid, vals in sorted(report.per_system.items())
        for kind in cfg["kinds"]
        if vals.get(kind) is not None
    ]
    write_csv(
        root / "results" / "rim_report.csv",
        ["system_id", "kind", "nominal_fidelity", "rim"],
        rows,
        chash,
    )
    payload = {
        "source": cfg["source"],
        "aggregates": report.aggregates,
        "per_system": report.per_system,
        "excluded": list(report.excluded),
        "threshold": report.threshold,
        "reference_mean_rim_combined": REFERENCE_MEAN_RIM_COMBINED,
        "points": [
            {
                "system_id": p.system_id,
                "experiment": p.experiment,
                "kind": p.kind,
                "nominal_fidelity": p.nominal_fidelity,
                "rim": p.rim,
                "sample_fidelities": list(p.sample_fidelities),
            }
            for p in report.points
        ],
    }
    write_json(root / "results" / "rim_report.json", payload, chash)
    write_json(root / "results" / "rim_plot_data.json", rim_plot_data(report), chash)
    return payload


def cmd_gap(cfg: dict) -> dict:
    root = ensure_run_dir(cfg["out"])
    chash = config_hash(cfg)
    write_json(root / "config.json", {"command": "gap", "config": cfg}, chash)
    system_ids = catalog_mod.resolve_ids(cfg["systems"])
    agents = {
        "closed_trained": load_checkpoint_checked(cfg["closed_checkpoint"]),
        "open_trained": load_checkpoint_checked(cfg["open_checkpoint"]),
    }
    rows = []
    summary = {}
    for model_name, agent in agents.items():
        for gamma in cfg["gammas"]:
            env_config = EnvConfig(mode="open", gamma=gamma)
            records, _ = evaluate_agent(
                agent,
                system_ids,
                env_config,
                experiments=cfg["experiments"],
                trials=cfg["trials"],
                threshold=cfg["success_threshold"],
                seed=cfg["seed"],
                workers=cfg["workers"],
            )
            for sid in system_ids:
                mine = [r for r in records if r.system_id == sid]
                rows.append(
                    {
                        "system_id": sid,
                        "model": model_name,
                        "gamma": gamma,
                        "mean_fidelity": float(np.mean([r.best_fidelity for r in mine])),
                        "success_rate": success_rate(mine),
                    }
                )
            summary.setdefault(model_name, {})[str(gamma)] = {
                "mean_success_rate": success_rate(records),
                "mean_fidelity": float(np.mean([r.best_fidelity for r in records])),
            }
    write_csv(
        root / "results" / "gap_report.csv",
        ["system_id", "model", "gamma", "mean_fidelity", "success_rate"],
        rows,
        chash,
    )
    write_json(root / "results" / "gap_report.json", {"rows": rows, "summary": summary}, chash)
    return {"rows": rows, "summary": summary}


def cmd_export(cfg: dict) -> dict:
    chash = config_hash(cfg)
    if cfg["kind"] == "eval":
        records = read_eval_csv(cfg["input"])
        payload = fidelity_plot_data(records, bins=cfg["bins"])
    else:
        with open(cfg["input"]) as fh:
            data = json.load(fh)
        vals = {}
        for p in data["points"]:
            vals.setdefault(p["kind"], []).append(p["rim"])
        payload = {}
        for kind, rims in vals.items():
            arr = np.array(rims)
            counts, edges = np.histogram(arr, bins=cfg["bins"], range=(0.0, max(1e-9, arr.max())))
            payload[kind] = {"edges": edges.tolist(), "counts": counts.tolist(), "n": int(arr.size)}
    write_json(cfg["out"], payload, chash)
    return payload


def read_eval_csv(path) -> list:
    records = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    for line in lines[1:]:
        vals = dict(zip(header, line.strip().split(",")))
        records.append(
            EvaluationRecord(
                system_id=vals["system_id"],
                experiment=int(vals["experiment"]),
                best_fidelity=float(vals["best_fidelity"]),
                chosen_T=float(vals["chosen_T"]),
                chosen_N=int(vals["chosen_N"]),
                effective_T=float(vals["effective_T"]),
                effective_N=int(vals["effective_N"]),
                success=vals["success"] == "1",
            )
        )
    return records
