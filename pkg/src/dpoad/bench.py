"""Experiment harness: synthetic corpus, baselines, sweeps, result tables.

Ground truth follows the evaluation rule of running the same detection
pipeline with no noise: a window belongs to the truth set when the
noise-free detector flags it. The generator's injected labels are kept for
diagnostics only.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import build_count_matrix
from .detector import SessionDetector, precision_recall
from .mechanisms import laplace_noise
from .protocol import SessionConfig, establish_session, run_session, serialize_trace
from .sampler import k_learning, m_learning, rho_star_learning, sample_sensitivity_uniform

RESULT_COLUMNS = [
    "mechanism", "epsilon", "gamma", "threshold", "iteration", "seed",
    "precision", "recall", "runtime_ms", "sensitivity_used", "k", "m",
    "phase_switch_iter",
]

MECHANISMS = ("laplace", "painfree", "dpoad")


@dataclass(frozen=True)
class SyntheticSpec:
    """Benign traffic with rare anomalous windows.

    Per time step, Poisson(records_per_step) records with standard normal
    values, so every histogram bin count is Poisson. In an anomalous window
    a fraction of each step's records is replaced by records whose values
    sit magnitude benign-sigmas into the tail (unit spread), so they land in
    the top bins / clamp into the last bin. At magnitude 0 the anomalous
    records are distributed exactly like benign ones: a true null.
    """

    records_per_step: float = 30.0
    anomaly_rate: float = 0.05
    magnitude: float = 3.0
    anomaly_fraction: float = 0.25
    windows_per_iteration: int = 100
    steps_per_window: int = 80

    def __post_init__(self):
        if not 0 <= self.anomaly_rate < 0.5:
            raise ValueError("anomaly rate must be in [0, 0.5)")
        if not 0 <= self.anomaly_fraction <= 1:
            raise ValueError("anomaly fraction must be in [0, 1]")
        if self.records_per_step <= 0 or self.windows_per_iteration < 1 or self.steps_per_window < 1:
            raise ValueError("invalid synthetic dimensions")


def generate_synthetic(spec: SyntheticSpec, iterations: int,
                       rng: np.random.Generator) -> tuple[list[list[np.ndarray]], list[np.ndarray]]:
    """Returns (data, labels): per-iteration lists of per-step value arrays,
    and per-iteration boolean window labels (the injected ground truth)."""
    data = []
    labels = []
    w, s = spec.windows_per_iteration, spec.steps_per_window
    rate = spec.records_per_step
    for _ in range(iterations):
        lab = rng.random(w) < spec.anomaly_rate
        anom_steps = np.repeat(lab, s)
        # independent Poisson thinning keeps every bin count Poisson
        ben_rate = np.where(anom_steps, rate * (1.0 - spec.anomaly_fraction), rate)
        n_ben = rng.poisson(ben_rate)
        n_anom = np.where(anom_steps, rng.poisson(rate * spec.anomaly_fraction, size=w * s), 0)
        ben_vals = rng.normal(0.0, 1.0, size=int(n_ben.sum()))
        anom_vals = rng.normal(spec.magnitude, 1.0, size=int(n_anom.sum()))
        ben_split = np.split(ben_vals, np.cumsum(n_ben)[:-1])
        anom_split = np.split(anom_vals, np.cumsum(n_anom)[:-1])
        steps = [np.concatenate([b, a]) for b, a in zip(ben_split, anom_split)]
        data.append(steps)
        labels.append(lab)
    return data, labels


def ingest_csv(path, attribute_columns=None, records_per_step: int = 30,
               window_column: int | None = None, skip_header: bool = False,
               label_column: int | None = None):
    """Read numeric rows into per-step record arrays.

    Rows become records; steps are either groups sharing the window-column
    value (in first-appearance order) or consecutive chunks of
    records_per_step rows. Parse failures name the offending row/column.

    With label_column set, that column is stripped from the records and the
    return value is (steps, step_labels) where a step is labelled anomalous
    when any of its records carries a nonzero label.
    """
    steps: dict = {}
    order: list = []
    chunk_rows: list[list[float]] = []
    out: list[np.ndarray] = []
    drop = {c for c in (window_column, label_column) if c is not None}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row_idx, row in enumerate(reader):
            if skip_header and row_idx == 0:
                continue
            if not row:
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                bad_col = next(i for i, cell in enumerate(row) if not _is_float(cell))
                raise ValueError(f"non-numeric cell at row {row_idx}, column {bad_col}")
            rec = [v for i, v in enumerate(values) if i not in drop]
            if label_column is not None:
                rec.append(values[label_column])  # kept last, stripped below
            if window_column is not None:
                key = values[window_column]
                if key not in steps:
                    steps[key] = []
                    order.append(key)
                steps[key].append(rec)
            else:
                chunk_rows.append(rec)
                if len(chunk_rows) == records_per_step:
                    out.append(np.array(chunk_rows))
                    chunk_rows = []
    if window_column is not None:
        out = [np.array(steps[key]) for key in order]
    elif chunk_rows:
        out.append(np.array(chunk_rows))
    if label_column is None:
        return [_select(step, attribute_columns) for step in out]
    labels = np.array([bool(step.size) and bool(np.any(step[:, -1] != 0)) for step in out])
    stripped = [_select(step[:, :-1], attribute_columns) for step in out]
    return stripped, labels


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _select(arr: np.ndarray, attribute_columns) -> np.ndarray:
    if attribute_columns is None:
        return arr
    return arr[:, list(attribute_columns)]


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: str = "all"
    epsilons: tuple = (1.0,)
    gammas: tuple = (0.2,)
    thresholds: tuple = (0.9,)
    iterations: int = 6
    seeds: int = 20
    seed_base: int = 0
    bins: int = 11
    c_max: int = 18
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    dataset: str | None = None
    dataset_has_header: bool = False
    dataset_window_column: int | None = None
    dataset_records_per_step: int = 30
    attribute_index: int = 0
    score_mode: str = "pvalue"
    combine: str = "sidak-min"
    c_const: float = 1.0
    blend: float = 0.5
    alpha: float = 0.1
    beta: float = 0.1
    m_cap: int = 200_000
    trace_dir: str | None = None

    def __post_init__(self):
        if self.mechanism not in ("all",) + MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if not self.epsilons or not self.gammas or not self.thresholds:
            raise ValueError("sweeps must be non-empty")
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")

    @property
    def mechanisms(self) -> tuple:
        return MECHANISMS if self.mechanism == "all" else (self.mechanism,)


def _session_config(cfg: ExperimentConfig, epsilon: float, gamma: float,
                    threshold: float, spec: SyntheticSpec) -> SessionConfig:
    return SessionConfig(
        epsilon=epsilon, gamma=gamma, c_max=cfg.c_max, n_bins=cfg.bins,
        steps_per_window=spec.steps_per_window, threshold=threshold,
        alpha=cfg.alpha, beta=cfg.beta, c_const=cfg.c_const, blend=cfg.blend,
        score_mode=cfg.score_mode, combine=cfg.combine, m_cap=cfg.m_cap,
        attribute_index=cfg.attribute_index,
    )


def _iteration_data(cfg: ExperimentConfig, seed: int):
    """Materialize one seed's data: (per-iteration step values, injected labels)."""
    if cfg.dataset is not None:
        steps = ingest_csv(cfg.dataset, None, cfg.dataset_records_per_step,
                           cfg.dataset_window_column, cfg.dataset_has_header)
        steps = [np.asarray(s, dtype=np.float64) for s in steps]
        spw = cfg.synthetic.steps_per_window
        wpi = cfg.synthetic.windows_per_iteration
        per_iter = spw * wpi
        need = per_iter * cfg.iterations
        if len(steps) < need:
            raise ValueError(f"dataset holds {len(steps)} steps; need {need}")
        # keep full records; the session layer selects the attribute
        data = [steps[i * per_iter:(i + 1) * per_iter] for i in range(cfg.iterations)]
        labels = [np.zeros(wpi, dtype=bool) for _ in range(cfg.iterations)]
        return data, labels
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    return generate_synthetic(cfg.synthetic, cfg.iterations, rng)


def _count_matrices(data, config: SessionConfig):
    _owner, _mssp = establish_session(config, data[0])
    edges = _owner.bins.edges
    sel = config.attribute_index
    out = []
    for batch in data:
        vals = [np.asarray(v, dtype=np.float64) for v in batch]
        vals = [v if v.ndim == 1 else v[:, sel] for v in vals]
        out.append(build_count_matrix(vals, edges).counts)
    return out


def _detect_series(matrices, config: SessionConfig) -> list[np.ndarray]:
    """Window scores per iteration for a fixed pseudo-count stream."""
    det = SessionDetector(config.n_bins, config.steps_per_window,
                          config.score_mode, config.combine)
    scores = []
    for mat in matrices:
        s, _ = det.score_iteration(mat)
        det.commit_iteration(mat)
        scores.append(s)
    return scores


def _baseline_session(mechanism: str, matrices, config: SessionConfig, seed_seq):
    """Interactive Laplace / uniform-sampled-sensitivity baselines."""
    rng = np.random.default_rng(seed_seq)
    det = SessionDetector(config.n_bins, config.steps_per_window,
                          config.score_mode, config.combine)
    if mechanism == "painfree":
        rho = rho_star_learning(config.gamma)
        m = m_learning(config.gamma, rho)
        k = k_learning(m, config.gamma, rho)
    else:
        m = k = 0
    scores = []
    sens_used = []
    for mat in matrices:
        if mechanism == "laplace":
            dq = float(config.c_max)
        else:
            dq = sample_sensitivity_uniform(config.c_max, m, k, rng).chosen
        noisy = mat + laplace_noise(dq / config.epsilon, rng, mat.shape)
        pseudo = np.clip(np.floor(noisy + 0.5), 0, config.c_max).astype(np.int64)
        s, _ = det.score_iteration(pseudo)
        det.commit_iteration(pseudo)
        scores.append(s)
        sens_used.append(dq)
    return scores, sens_used, m, k


def _cumulative_sets(scores_by_iter, threshold: float) -> list[set]:
    detected: set = set()
    out = []
    for i, scores in enumerate(scores_by_iter):
        for w in np.flatnonzero(scores >= threshold):
            detected.add((i + 1, int(w)))
        out.append(set(detected))
    return out


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Run the grid (mechanism x epsilon x gamma x threshold x seed) and
    return one row per (mechanism, sweep point, iteration, seed)."""
    rows: list[dict] = []
    spec = config.synthetic
    for seed_off in range(config.seeds):
        seed = config.seed_base + seed_off
        data, _injected = _iteration_data(config, seed)
        base_cfg = _session_config(config, config.epsilons[0], config.gammas[0],
                                   config.thresholds[0], spec)
        matrices = _count_matrices(data, base_cfg)
        clean_scores = _detect_series(matrices, base_cfg)
        truth_by_thr = {
            thr: _cumulative_sets(clean_scores, thr) for thr in config.thresholds
        }
        for epsilon in config.epsilons:
            for gamma in config.gammas:
                for mechanism in config.mechanisms:
                    scfg = _session_config(config, epsilon, gamma,
                                           config.thresholds[0], spec)
                    t0 = time.perf_counter()
                    if mechanism == "dpoad":
                        trace = run_session(
                            data, scfg,
                            [seed, int(epsilon * 1_000_000), int(gamma * 1_000_000), 2],
                        )
                        if config.trace_dir is not None:
                            name = f"trace_eps{epsilon}_gamma{gamma}_seed{seed}.txt"
                            path = Path(config.trace_dir)
                            path.mkdir(parents=True, exist_ok=True)
                            (path / name).write_text(serialize_trace(trace))
                        scores_by_iter = [r.scores for r in trace.anomaly_reports]
                        sens_used = [st.sensitivity_used for st in trace.stats]
                        ms = [st.m for st in trace.stats]
                        ks = [st.k for st in trace.stats]
                        switch = trace.phase_switch_iteration
                    else:
                        seq = np.random.SeedSequence(
                            [seed, int(epsilon * 1_000_000), int(gamma * 1_000_000),
                             MECHANISMS.index(mechanism)])
                        scores_by_iter, sens_used, m, k = _baseline_session(
                            mechanism, matrices, scfg, seq)
                        ms = [m] * config.iterations
                        ks = [k] * config.iterations
                        switch = 0
                    runtime_ms = (time.perf_counter() - t0) * 1000.0
                    for threshold in config.thresholds:
                        truth = truth_by_thr[threshold]
                        detected = _cumulative_sets(scores_by_iter, threshold)
                        for i in range(config.iterations):
                            prec, rec = precision_recall(detected[i], truth[i])
                            rows.append({
                                "mechanism": mechanism,
                                "epsilon": epsilon,
                                "gamma": gamma,
                                "threshold": threshold,
                                "iteration": i + 1,
                                "seed": seed,
                                "precision": prec,
                                "recall": rec,
                                "runtime_ms": runtime_ms,
                                "sensitivity_used": sens_used[i],
                                "k": ks[i],
                                "m": ms[i],
                                "phase_switch_iter": switch,
                            })
    return rows


def emit_results(rows: list[dict], fmt: str, path) -> None:
    """Write the result table; csv and json encode identical values."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([{c: row[c] for c in RESULT_COLUMNS} for row in rows], fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


_NUMERIC = {
    "epsilon": float, "gamma": float, "threshold": float, "iteration": int,
    "seed": int, "precision": float, "recall": float, "runtime_ms": float,
    "sensitivity_used": float, "k": int, "m": int, "phase_switch_iter": int,
}


def read_results(path, fmt: str = "csv") -> list[dict]:
    if fmt == "json":
        with open(path) as fh:
            return json.load(fh)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append({c: (_NUMERIC[c](raw[c]) if c in _NUMERIC else raw[c])
                         for c in RESULT_COLUMNS})
        return rows
