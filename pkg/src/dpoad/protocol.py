"""The iterative release protocol: owner and analyst state machines.

One session alternates owner_step / mssp_step over iterations. The owner
releases privatized data only: noisy bin counts while the analyst is still
learning the count distribution, noisy anomaly scores afterwards. The
analyst (MSSP) scores anomalies on reconstructed pseudo-counts, refreshes
its distribution estimate, and returns the sensitivity the owner should use
next round.

Phases switch exactly once, learning -> prediction, when the accumulated
sample count reaches the private-learning target. At the switch the per-bin
score tables are frozen from the learning-phase estimates (the mapping is a
fixed input of the prediction algorithm); the per-iteration distribution
updates feed only the sensitivity sampler.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .core import DiscretePdf, Phase, build_count_matrix, validate_records
from .detector import AnomalyReport, SessionDetector, classify
from .disentangler import ScoreMap, build_score_map, disentangle, map_sensitivity, reconstruct
from .learner import LearnerState, phase_switch_ready, update_pdf_with_scores
from .mechanisms import laplace_noise
from .sampler import (
    PredictionCalibration,
    calibrate_prediction,
    compute_T,
    k_learning,
    m_learning,
    rho_star_learning,
    sample_sensitivity,
    sample_sensitivity_uniform,
)

SCHEMA_TAG = "dpoad/1"


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    epsilon: float = 1.0
    gamma: float = 0.2
    c_max: int = 18
    n_bins: int = 11
    steps_per_window: int = 80
    threshold: float = 0.9
    alpha: float = 0.1
    beta: float = 0.1
    c_const: float = 1.0
    blend: float = 0.5
    rho: float | None = None              # learning-phase override; None = rho*
    score_mode: str = "pvalue"            # "pvalue" | "statistic"
    combine: str = "sidak-min"            # window combination of bin scores
    sensitivity_mode: str = "difference"  # "difference" | "direct"
    sensitivity_source: str = "max_spread"  # "max_spread" | "pooled"
    m_cap: int = 200_000
    attribute_index: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.c_max < 0 or self.n_bins < 1 or self.steps_per_window < 1:
            raise ValueError("invalid domain configuration")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class SessionSetup:
    """Owner -> MSSP bootstrap metadata (declared non-private)."""

    epsilon: float
    c_max: int
    n_bins: int
    steps_per_window: int
    attr_low: float
    attr_high: float


@dataclass(frozen=True)
class BinSpec:
    """MSSP -> owner: the bin edges every release must use."""

    edges: np.ndarray
    edges_id: str


def edges_identity(edges: np.ndarray) -> str:
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(edges, dtype=np.float64).tobytes())
    return h.hexdigest()[:12]


def define_bins(setup: SessionSetup) -> BinSpec:
    """Equal-width bins over the declared attribute range (MSSP policy)."""
    if setup.attr_high <= setup.attr_low:
        raise ProtocolError("degenerate attribute range")
    edges = np.linspace(setup.attr_low, setup.attr_high, setup.n_bins + 1)
    return BinSpec(edges, edges_identity(edges))


@dataclass(frozen=True)
class OwnerRelease:
    """One privatized release. payload holds noisy counts (learning) or
    noisy scores (prediction); raw counts never enter this type."""

    iteration: int
    phase: Phase
    payload: np.ndarray
    epsilon_used: float
    bin_edges_ack: str

    def __post_init__(self):
        payload = np.asarray(self.payload, dtype=np.float64)
        if payload.ndim != 2:
            raise ValueError("payload must be bins x windows")
        object.__setattr__(self, "payload", payload)


@dataclass(frozen=True)
class MsspReport:
    iteration: int
    anomaly_scores: np.ndarray
    updated_pdf: DiscretePdf
    bin_pdfs: tuple
    sampled_sensitivity: float | None
    phase_recommendation: Phase
    n_received: int
    m: int = 0
    k: int = 0
    T: float = 0.0

    def __post_init__(self):
        scores = np.asarray(self.anomaly_scores, dtype=np.float64)
        if scores.size and (scores.min() < 0 or scores.max() > 1):
            raise ValueError("scores must be in [0, 1]")
        object.__setattr__(self, "anomaly_scores", scores)
        object.__setattr__(self, "bin_pdfs", tuple(self.bin_pdfs))


@dataclass
class OwnerState:
    config: SessionConfig
    bins: BinSpec
    phase: Phase = Phase.LEARNING
    iteration: int = 0
    cumulative_n: int = 0
    last_report: MsspReport | None = None
    score_maps: list[ScoreMap] | None = None
    m_learn: int = 0
    k_learn: int = 0
    rho_learn: float = 0.0
    last_delta_q: float = 0.0

    def __post_init__(self):
        rho = self.config.rho if self.config.rho is not None else rho_star_learning(self.config.gamma)
        self.rho_learn = rho
        self.m_learn = m_learning(self.config.gamma, rho)
        self.k_learn = k_learning(self.m_learn, self.config.gamma, rho)


@dataclass
class MsspState:
    config: SessionConfig
    bins: BinSpec
    phase: Phase = Phase.LEARNING
    iteration: int = 0
    detector: SessionDetector | None = None
    learner: LearnerState | None = None
    score_maps: list[ScoreMap] | None = None
    anchor_pdfs: list[DiscretePdf] | None = None
    pred_obs: list[list[np.ndarray]] = field(default_factory=list)
    pred_scores: list[list[np.ndarray]] = field(default_factory=list)
    pred_n: int = 0
    current_bin_pdfs: list[DiscretePdf] | None = None
    last_calibration: PredictionCalibration | None = None
    reference_reset_done: bool = False

    def __post_init__(self):
        cfg = self.config
        if self.detector is None:
            self.detector = SessionDetector(cfg.n_bins, cfg.steps_per_window,
                                            cfg.score_mode, cfg.combine)
        if self.learner is None:
            self.learner = LearnerState(c_max=cfg.c_max, n_bins=cfg.n_bins,
                                        alpha_target=cfg.alpha, beta=cfg.beta)
        if not self.pred_obs:
            self.pred_obs = [[] for _ in range(cfg.n_bins)]
            self.pred_scores = [[] for _ in range(cfg.n_bins)]

    @property
    def total_n(self) -> int:
        return self.learner.n_samples + self.pred_n


def establish_session(config: SessionConfig, first_batch: list[np.ndarray]) -> tuple[OwnerState, MsspState]:
    """Handshake: the owner declares epsilon, c_max and the attribute range
    (1-99% percentiles of the first batch); the MSSP returns bin edges."""
    values = np.concatenate([
        validate_records(v)[:, config.attribute_index] for v in first_batch if np.asarray(v).size
    ])
    if values.size < 2:
        raise ProtocolError("first batch too small to define bins")
    low, high = np.percentile(values, [1.0, 99.0])
    if high <= low:
        low, high = float(values.min()), float(values.max() + 1.0)
    setup = SessionSetup(config.epsilon, config.c_max, config.n_bins,
                         config.steps_per_window, float(low), float(high))
    bins = define_bins(setup)
    return OwnerState(config, bins), MsspState(config, bins)


def _score_maps_from(bin_pdfs, n_effective: int) -> list[ScoreMap]:
    return [build_score_map(p, n_effective) for p in bin_pdfs]


def owner_step(state: OwnerState, raw_window: list[np.ndarray],
               rng: np.random.Generator) -> OwnerRelease:
    """Privatize one iteration of data and emit the release."""
    cfg = state.config
    state.iteration += 1
    matrix = build_count_matrix(
        [validate_records(v)[:, cfg.attribute_index] for v in raw_window],
        state.bins.edges,
    )
    if matrix.n_bins != cfg.n_bins:
        raise ProtocolError("bin structure mismatch")
    counts = matrix.counts

    if state.phase is Phase.LEARNING:
        sens = sample_sensitivity_uniform(cfg.c_max, state.m_learn, state.k_learn,
                                          rng, cfg.sensitivity_mode)
        delta_q = sens.chosen
        payload = counts + laplace_noise(delta_q / cfg.epsilon, rng, counts.shape)
    else:
        report = state.last_report
        if report is None or report.sampled_sensitivity is None:
            raise ProtocolError("prediction phase requires a prior analyst report")
        if state.score_maps is None:
            raise ProtocolError("prediction phase requires frozen score maps")
        delta_q = report.sampled_sensitivity
        # declared domain bound: out-of-domain counts clamp before scoring
        clipped = np.clip(counts, 0, cfg.c_max)
        payload = np.empty(counts.shape, dtype=np.float64)
        for j in range(cfg.n_bins):
            gap = map_sensitivity(delta_q, state.score_maps[j])
            scores = disentangle(clipped[j], state.score_maps[j])
            payload[j] = scores + laplace_noise(gap / cfg.epsilon, rng, scores.shape)

    state.cumulative_n += int(counts.size)
    state.last_delta_q = float(delta_q)
    return OwnerRelease(
        iteration=state.iteration,
        phase=state.phase,
        payload=payload,
        epsilon_used=cfg.epsilon,
        bin_edges_ack=state.bins.edges_id,
    )


def receive_report(state: OwnerState, report: MsspReport) -> None:
    """Owner-side report intake: adopt the recommendation, freeze maps once."""
    if report.iteration != state.iteration:
        raise ProtocolError("report iteration mismatch")
    state.last_report = report
    if report.phase_recommendation is Phase.PREDICTION and state.phase is Phase.LEARNING:
        state.phase = Phase.PREDICTION
        n_eff = max(report.n_received // state.config.n_bins, 1)
        state.score_maps = _score_maps_from(report.bin_pdfs, n_eff)


def mssp_step(state: MsspState, release: OwnerRelease,
              rng: np.random.Generator) -> MsspReport:
    """Analyst-side processing of one release."""
    cfg = state.config
    state.iteration += 1
    if release.iteration != state.iteration:
        raise ProtocolError("release iteration mismatch")
    if release.bin_edges_ack != state.bins.edges_id:
        raise ProtocolError("release uses unknown bin edges")
    if release.phase is not state.phase:
        raise ProtocolError(f"unexpected phase {release.phase}")

    payload = release.payload
    if state.phase is Phase.LEARNING:
        pseudo = np.clip(np.floor(payload + 0.5), 0, cfg.c_max).astype(np.int64)
    else:
        if state.score_maps is None:
            raise ProtocolError("prediction release before score maps are frozen")
        if not state.reference_reset_done:
            # reconstruction regime changes at the switch; old references are void
            state.detector.reset_reference()
            state.reference_reset_done = True
        pseudo = np.vstack([
            reconstruct(payload[j], state.score_maps[j]) for j in range(cfg.n_bins)
        ])

    window_scores, unit_scores = state.detector.score_iteration(pseudo)
    state.detector.commit_iteration(pseudo)

    recommendation = state.phase
    sampled = None
    m = k = 0
    T = 0.0
    if state.phase is Phase.LEARNING:
        state.learner.accumulate(payload)
        state.current_bin_pdfs = list(state.learner.per_bin_pdfs)
        if phase_switch_ready(state.learner, cfg.epsilon, cfg.c_const):
            recommendation = Phase.PREDICTION
            n_eff = max(state.learner.n_samples // cfg.n_bins, 1)
            state.anchor_pdfs = list(state.learner.per_bin_pdfs)
            state.score_maps = _score_maps_from(state.anchor_pdfs, n_eff)
            state.phase = Phase.PREDICTION
    else:
        recommendation = Phase.PREDICTION
        state.pred_n += int(pseudo.size)
        s = cfg.steps_per_window
        for j in range(cfg.n_bins):
            state.pred_obs[j].append(pseudo[j])
            state.pred_scores[j].append(np.repeat(np.clip(unit_scores[j], 0.0, 1.0), s))
        state.current_bin_pdfs = [
            update_pdf_with_scores(
                state.anchor_pdfs[j],
                np.concatenate(state.pred_obs[j]),
                np.concatenate(state.pred_scores[j]),
                cfg.blend,
            )
            for j in range(cfg.n_bins)
        ]

    if recommendation is Phase.PREDICTION:
        T = compute_T(state.total_n, cfg.epsilon, cfg.c_max + 1, cfg.c_const)
        calib = calibrate_prediction(cfg.gamma, T, m_cap=cfg.m_cap)
        state.last_calibration = calib
        sens_pdf = _sensitivity_pdf(state)
        sampled = sample_sensitivity(sens_pdf, calib.m_exec, calib.k_exec, rng,
                                     cfg.sensitivity_mode).chosen
        m, k = calib.m, calib.k

    pooled = _pool(state.current_bin_pdfs, cfg.c_max)
    return MsspReport(
        iteration=state.iteration,
        anomaly_scores=np.clip(window_scores, 0.0, 1.0),
        updated_pdf=pooled,
        bin_pdfs=tuple(state.current_bin_pdfs),
        sampled_sensitivity=sampled,
        phase_recommendation=recommendation,
        n_received=state.total_n,
        m=m,
        k=k,
        T=T,
    )


def _pool(bin_pdfs, c_max: int) -> DiscretePdf:
    stack = np.mean([p.mass for p in bin_pdfs], axis=0)
    return DiscretePdf.from_weights(stack, c_max)


def _sensitivity_pdf(state: MsspState) -> DiscretePdf:
    cfg = state.config
    pdfs = state.current_bin_pdfs
    if cfg.sensitivity_source == "pooled":
        return _pool(pdfs, cfg.c_max)
    domain = np.arange(cfg.c_max + 1, dtype=np.float64)
    spreads = [float(np.sqrt(max(np.sum(p.mass * domain**2) - np.sum(p.mass * domain) ** 2, 0.0)))
               for p in pdfs]
    return pdfs[int(np.argmax(spreads))]


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    phase: Phase
    sensitivity_used: float
    m: int
    k: int
    T: float


@dataclass
class SessionTrace:
    config: SessionConfig
    seed: int
    releases: list[OwnerRelease] = field(default_factory=list)
    reports: list[MsspReport] = field(default_factory=list)
    anomaly_reports: list[AnomalyReport] = field(default_factory=list)
    stats: list[IterationStats] = field(default_factory=list)
    phase_switch_iteration: int = 0

    @property
    def pseudo_by_iteration(self) -> list[np.ndarray]:
        return self._pseudo

    def __post_init__(self):
        self._pseudo: list[np.ndarray] = []


def run_session(data: list[list[np.ndarray]], config: SessionConfig,
                seed: int | list[int]) -> SessionTrace:
    """Run the full iterative session over iteration-indexed record windows.

    The whole session is a pure function of (data, config, seed): the owner
    and analyst derive independent child streams from the seed and every
    message is value-copied.
    """
    if not data:
        raise ValueError("need at least one iteration window")
    root = np.random.SeedSequence(seed)
    owner_seq, mssp_seq = root.spawn(2)
    owner_rng = np.random.default_rng(owner_seq)
    mssp_rng = np.random.default_rng(mssp_seq)

    owner, mssp = establish_session(config, data[0])
    trace = SessionTrace(config=config, seed=seed)
    for batch in data:
        try:
            release = owner_step(owner, batch, owner_rng)
            report = mssp_step(mssp, release, mssp_rng)
        except ProtocolError as exc:
            raise ProtocolError(f"iteration {owner.iteration}: {exc}") from exc
        receive_report(owner, report)
        if release.phase is Phase.PREDICTION and trace.phase_switch_iteration == 0:
            trace.phase_switch_iteration = release.iteration
        trace.releases.append(release)
        trace.reports.append(report)
        trace.anomaly_reports.append(AnomalyReport(
            scores=report.anomaly_scores,
            labels=classify(report.anomaly_scores, config.threshold),
            threshold=config.threshold,
            iteration=release.iteration,
        ))
        trace.stats.append(IterationStats(
            iteration=release.iteration,
            phase=release.phase,
            sensitivity_used=owner.last_delta_q,
            m=report.m if release.phase is Phase.PREDICTION else owner.m_learn,
            k=report.k if release.phase is Phase.PREDICTION else owner.k_learn,
            T=report.T,
        ))
        trace._pseudo.append(_pseudo_of(mssp, release))
    return trace


def _pseudo_of(mssp: MsspState, release: OwnerRelease):
    # reconstructed view for the bench: recompute deterministically
    cfg = mssp.config
    if release.phase is Phase.LEARNING:
        return np.clip(np.floor(release.payload + 0.5), 0, cfg.c_max).astype(np.int64)
    return np.vstack([
        reconstruct(release.payload[j], mssp.score_maps[j]) for j in range(cfg.n_bins)
    ])


# --- plain-text serialization (schema dpoad/1) ---------------------------

def _fmt_floats(arr) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(arr, dtype=np.float64).ravel())


def _parse_floats(text: str) -> np.ndarray:
    if not text.strip():
        return np.empty(0)
    return np.array([float(t) for t in text.split()], dtype=np.float64)


def serialize_release(release: OwnerRelease) -> str:
    lines = [
        f"schema: {SCHEMA_TAG}",
        "kind: owner_release",
        f"iteration: {release.iteration}",
        f"phase: {release.phase.value}",
        f"epsilon_used: {release.epsilon_used!r}",
        f"bin_edges_ack: {release.bin_edges_ack}",
        f"shape: {release.payload.shape[0]} {release.payload.shape[1]}",
        f"payload: {_fmt_floats(release.payload)}",
    ]
    return "\n".join(lines) + "\n"


def parse_release(text: str) -> OwnerRelease:
    fields = _parse_kv(text, "owner_release")
    rows, cols = (int(t) for t in fields["shape"].split())
    return OwnerRelease(
        iteration=int(fields["iteration"]),
        phase=Phase(fields["phase"]),
        payload=_parse_floats(fields["payload"]).reshape(rows, cols),
        epsilon_used=float(fields["epsilon_used"]),
        bin_edges_ack=fields["bin_edges_ack"],
    )


def serialize_report(report: MsspReport) -> str:
    lines = [
        f"schema: {SCHEMA_TAG}",
        "kind: mssp_report",
        f"iteration: {report.iteration}",
        f"phase_recommendation: {report.phase_recommendation.value}",
        "sampled_sensitivity: " + ("none" if report.sampled_sensitivity is None
                                   else repr(float(report.sampled_sensitivity))),
        f"n_received: {report.n_received}",
        f"m: {report.m}",
        f"k: {report.k}",
        f"T: {report.T!r}",
        f"anomaly_scores: {_fmt_floats(report.anomaly_scores)}",
        f"domain_max: {report.updated_pdf.domain_max}",
        f"updated_pdf: {_fmt_floats(report.updated_pdf.mass)}",
        f"n_bin_pdfs: {len(report.bin_pdfs)}",
    ]
    for j, pdf in enumerate(report.bin_pdfs):
        lines.append(f"bin_pdf_{j}: {_fmt_floats(pdf.mass)}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> MsspReport:
    fields = _parse_kv(text, "mssp_report")
    domain_max = int(fields["domain_max"])
    sens = fields["sampled_sensitivity"]
    n_pdfs = int(fields["n_bin_pdfs"])
    bin_pdfs = tuple(
        DiscretePdf(domain_max, _parse_floats(fields[f"bin_pdf_{j}"])) for j in range(n_pdfs)
    )
    return MsspReport(
        iteration=int(fields["iteration"]),
        anomaly_scores=_parse_floats(fields["anomaly_scores"]),
        updated_pdf=DiscretePdf(domain_max, _parse_floats(fields["updated_pdf"])),
        bin_pdfs=bin_pdfs,
        sampled_sensitivity=None if sens == "none" else float(sens),
        phase_recommendation=Phase(fields["phase_recommendation"]),
        n_received=int(fields["n_received"]),
        m=int(fields["m"]),
        k=int(fields["k"]),
        T=float(fields["T"]),
    )


def _parse_kv(text: str, expected_kind: str) -> dict:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(": ")
        fields[key] = value
    if fields.get("schema") != SCHEMA_TAG:
        raise ProtocolError(f"unknown schema: {fields.get('schema')!r}")
    if fields.get("kind") != expected_kind:
        raise ProtocolError(f"expected {expected_kind}, got {fields.get('kind')!r}")
    return fields


def serialize_trace(trace: SessionTrace) -> str:
    parts = []
    for release, report in zip(trace.releases, trace.reports):
        parts.append(serialize_release(release))
        parts.append(serialize_report(report))
    return "".join(parts)
