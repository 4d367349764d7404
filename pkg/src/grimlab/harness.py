"""The goal-exploration loop, its metrics and their on-disk format."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, format_config
from .env import EnvState, PlaygroundRGB, Room, evaluate_success, f1_visible
from .grimgep import (ClusteringFn, DisjointSupportError, EmptyClusterError, build_prior,
                      cluster_histories, combine, sample_cluster, select_gmm_by_aic)
from .learner import ReplayBuffer, random_rollout, reach_from_anchor
from .novelty import GoalDistribution, goal_distribution, sample_index
from .representation import embed, fit_density, fit_pca_features, rewards

log = logging.getLogger(__name__)

CATEGORIES = ("start_room", "object_room", "tv_on", "tv_off")
CSV_COLUMNS = (
    "seed", "epoch", "mean_success", "mean_f1",
    "frac_start_room", "frac_object_room", "frac_tv_on", "frac_tv_off",
    "cum_frac_start_room", "cum_frac_object_room", "cum_frac_tv_on", "cum_frac_tv_off",
    "n_clusters", "alps",
)

STREAMS = ("warmup", "env", "goals", "bandit", "em", "reach", "eval", "eval_env", "fit", "density")


def categorize_goal(state: EnvState) -> str:
    if state.room == Room.START:
        return "start_room"
    if state.room == Room.OBJECT:
        return "object_room"
    return "tv_on" if state.tv_on else "tv_off"


def make_streams(seed: int) -> dict:
    """Independent generators per component, derived from one seed and fixed labels."""
    return {name: np.random.default_rng([seed, zlib.crc32(name.encode())]) for name in STREAMS}


@dataclass
class EpochMetrics:
    epoch: int
    mean_success: float
    mean_f1: float
    frac_start_room: float
    frac_object_room: float
    frac_tv_on: float
    frac_tv_off: float
    cum_frac_start_room: float
    cum_frac_object_room: float
    cum_frac_tv_on: float
    cum_frac_tv_off: float
    alps: tuple = ()

    @property
    def goal_fraction(self) -> dict:
        return {c: getattr(self, "frac_" + c) for c in CATEGORIES}


@dataclass
class RunResult:
    config: ExperimentConfig
    metrics: list = field(default_factory=list)
    wall_clock: float = 0.0
    n_performance_records: int = 0

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def name(self) -> str:
        return self.config.name()


class _PerformanceLog:
    def __init__(self):
        self.goal_img, self.last_img, self.epoch = [], [], []

    def add(self, goal_img, last_img, epoch):
        self.goal_img.append(goal_img)
        self.last_img.append(last_img)
        self.epoch.append(epoch)

    def __len__(self):
        return len(self.epoch)


def _cluster_alps(buffer, perf, cl, l):
    Z = buffer.latents(cl.pca)
    g = np.asarray(perf.goal_img)
    p = rewards(Z[g], Z[np.asarray(perf.last_img)])
    hist = cluster_histories(buffer.image_clusters(cl)[g], p, perf.epoch, l)
    return hist.alps(cl.n_clusters)


class Experiment:
    """One seeded run; :meth:`run` executes the whole loop."""

    def __init__(self, config: ExperimentConfig):
        self.config = config.validate()
        self.env = PlaygroundRGB(config.env_config())
        self.rng = make_streams(config.seed)
        self.buffer = ReplayBuffer(self.env, capacity=config.buffer_capacity)
        self.test_set = self.env.build_test_set()
        self.perf = _PerformanceLog()
        self.pca = None
        self.density = None
        self.clustering = None
        self.goal_counts = dict.fromkeys(CATEGORIES, 0)

    def run(self) -> RunResult:
        cfg = self.config
        t0 = time.perf_counter()
        for _ in range(cfg.n_warmup):
            traj = random_rollout(self.env, cfg.episode_length, self.rng["warmup"], self.rng["env"])
            self.buffer.record_rollout(traj)
        uniform = GoalDistribution.uniform(len(self.buffer))
        self._refit(0, [uniform])
        result = RunResult(cfg)
        for epoch in range(1, cfg.n_epochs + 1):
            result.metrics.append(self.run_epoch(epoch))
            if epoch % 100 == 0:
                log.info("%s seed=%d epoch=%d success=%.3f tv_on=%.3f buffer=%d images=%d",
                         cfg.name(), cfg.seed, epoch, result.metrics[-1].mean_success,
                         result.metrics[-1].cum_frac_tv_on, len(self.buffer), len(self.buffer.store))
        result.wall_clock = time.perf_counter() - t0
        result.n_performance_records = len(self.perf)
        return result

    def goal_distributions(self, epoch: int):
        """The sampling distributions for this epoch's goals plus the per-cluster ALPs."""
        cfg = self.config
        n = len(self.buffer)
        if epoch <= cfg.start_exploration:
            return [GoalDistribution.uniform(n)] * cfg.goals_per_epoch, ()
        imgep = goal_distribution(self.buffer, cfg.strategy, alpha=cfg.alpha,
                                  density=self.density, pca=self.pca)
        if not cfg.wrap_grimgep:
            return [imgep] * cfg.goals_per_epoch, ()
        cl = self.clustering
        alps = _cluster_alps(self.buffer, self.perf, cl, cfg.l) if len(self.perf) else np.zeros(cl.n_clusters)
        assignments = self.buffer.image_clusters(cl)[self.buffer.image_ids]
        ablation = cfg.cluster_sampling == "uniform-ablation"
        dists = []
        for _ in range(cfg.goals_per_epoch):
            prior = None
            for _attempt in range(cl.n_clusters):
                c = sample_cluster(alps, cfg.T, self.rng["bandit"], uniform=ablation)
                try:
                    prior = build_prior(c, assignments)
                    break
                except EmptyClusterError:
                    continue
            if prior is None:
                dists.append(imgep)
                continue
            try:
                dists.append(combine(prior, imgep))
            except DisjointSupportError:
                dists.append(prior)
        return dists, tuple(float(a) for a in alps)

    def run_epoch(self, epoch: int) -> EpochMetrics:
        cfg = self.config
        buf = self.buffer
        dists, alps = self.goal_distributions(epoch)
        goals = [sample_index(p, self.rng["goals"]) for p in dists]

        goal_latents = buf.latents(self.pca)[buf.image_ids[goals]]
        anchors = buf.find_anchors(goal_latents, self.pca)
        trajs = [reach_from_anchor(buf, int(a), self.env, cfg.episode_length, self.rng["reach"],
                                   self.rng["env"], goal_index=g) for a, g in zip(anchors, goals)]
        cats = [categorize_goal(buf.state(g)) for g in goals]
        goal_imgs = [int(buf.image_ids[g]) for g in goals]
        for traj, gi in zip(trajs, goal_imgs):
            visited = buf.record_rollout(traj)
            self.perf.add(gi, int(buf.image_ids[visited[-1]]), epoch)

        self._refit(epoch, dists)
        success, f1 = self.evaluate()

        for c in cats:
            self.goal_counts[c] += 1
        total = sum(self.goal_counts.values())
        frac = {c: cats.count(c) / len(cats) for c in CATEGORIES}
        cum = {c: self.goal_counts[c] / total for c in CATEGORIES}
        return EpochMetrics(epoch, success, f1,
                            *(frac[c] for c in CATEGORIES), *(cum[c] for c in CATEGORIES), alps)

    def _refit(self, epoch: int, dists):
        """Refit the reward embedding, then the density model and the clustering as needed."""
        cfg = self.config
        buf = self.buffer
        n = len(buf)
        sample = np.sort(self.rng["fit"].choice(n, size=min(cfg.fit_sample_size, n), replace=False))
        sample_imgs = buf.image_ids[sample]
        density_imgs = None
        if cfg.strategy == "skewfit":
            # the density model trains on data drawn from this epoch's sampling distributions
            mix = np.mean([p.probs for p in dists], axis=0)
            mix /= mix.sum()
            drawn = self.rng["density"].choice(len(mix), size=cfg.kde_max_points, p=mix)
            density_imgs = buf.image_ids[drawn]

        feats = buf.store.features[sample_imgs].astype(float)
        self.pca = fit_pca_features(feats, cfg.d)
        Z = buf.latents(self.pca)
        if density_imgs is not None:
            self.density = fit_density(Z[density_imgs], cfg.kde_bandwidth, cfg.kde_max_points)
        if cfg.wrap_grimgep and epoch >= cfg.start_exploration:
            # clustering is fitted on a random subset of the reward-model sample
            sub = sample_imgs[self.rng["em"].permutation(len(sample_imgs))[:cfg.cluster_fit_size]]
            ks = [k for k in cfg.candidate_ks if k <= len(sub)]
            gmm = select_gmm_by_aic(Z[sub], ks, self.rng["em"], eps_reg=cfg.eps_reg)
            self.clustering = ClusteringFn(self.pca, gmm)

    def evaluate(self):
        """Mean success and visible-entity f1 over the fixed test set; nothing is recorded."""
        cfg = self.config
        G = np.stack([embed(self.pca, spec.image) for spec in self.test_set])
        anchors = self.buffer.find_anchors(G, self.pca)
        succ, f1 = 0, 0.0
        for spec, a in zip(self.test_set, anchors):
            traj = reach_from_anchor(self.buffer, int(a), self.env, cfg.episode_length,
                                     self.rng["eval"], self.rng["eval_env"])
            final = traj.last_state
            succ += evaluate_success(spec, final)
            f1 += f1_visible(spec.state, final)
        return succ / len(self.test_set), f1 / len(self.test_set)


def run_experiment(config: ExperimentConfig) -> RunResult:
    return Experiment(config).run()


def _fmt(x) -> str:
    return format(float(x), ".9g")


def metrics_csv(result: RunResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for m in result.metrics:
        w.writerow([result.seed, m.epoch, *(_fmt(getattr(m, c)) for c in CSV_COLUMNS[2:12]),
                    len(m.alps), ";".join(_fmt(a) for a in m.alps)])
    return out.getvalue()


def write_run(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(result))
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "config.txt").write_text(format_config(result.config))
    (out / "run.json").write_text(json.dumps({
        "fingerprint": result.fingerprint, "name": result.name,
        "wall_clock_seconds": round(result.wall_clock, 3),
        "n_performance_records": result.n_performance_records}, indent=2) + "\n")
    return out


def read_run(run_dir) -> RunResult:
    run_dir = Path(run_dir)
    cfg_dict = json.loads((run_dir / "config.json").read_text())
    cfg_dict["candidate_ks"] = tuple(cfg_dict["candidate_ks"])
    cfg = ExperimentConfig(**cfg_dict)
    result = RunResult(cfg)
    with open(run_dir / "metrics.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            alps = tuple(float(a) for a in row["alps"].split(";")) if row["alps"] else ()
            result.metrics.append(EpochMetrics(
                int(row["epoch"]), *(float(row[c]) for c in CSV_COLUMNS[2:12]), alps))
    meta = run_dir / "run.json"
    if meta.exists():
        info = json.loads(meta.read_text())
        result.wall_clock = info.get("wall_clock_seconds", 0.0)
        result.n_performance_records = info.get("n_performance_records", 0)
    return result


def find_runs(paths) -> list:
    """Every run directory (one holding metrics.csv and config.json) under ``paths``."""
    runs = []
    for p in paths:
        p = Path(p)
        if (p / "metrics.csv").exists() and (p / "config.json").exists():
            runs.append(p)
        else:
            runs.extend(sorted(q.parent for q in p.rglob("metrics.csv") if (q.parent / "config.json").exists()))
    return runs
