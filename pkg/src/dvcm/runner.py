"""End-to-end pipelines and run-directory layout.

A run directory holds::

    config.txt              resolved configuration (key=value)
    plan.txt                subset assignments (distributed runs)
    draws/chain_JJJ.csv     stored draws of each chain, plus .json sidecar
    combined/METHOD.csv     combined draws or PIE quantiles, plus .json sidecar
    metrics/METHOD.txt      accuracy metrics (when the truth is known)
    manifest.json           seeds and sha256 of every file above
    volatile/               wall-clock timings and efficiency

Everything outside ``volatile/`` is a deterministic function of the
configuration, whatever the number of workers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from . import _seeding
from .combiner import ALL_METHODS, POLICIES, combine
from .diagnostics import MetricReport, report_from_combined
from .errors import ChainError, ConfigError
from .io import ingest_dataset, read_combined, read_draw_store, write_dataset
from .kernels import KernelFamily, PriorRange
from .model import Dataset, ModelSpec
from .partitioner import make_subsets
from .sampler import ChainConfig, DrawStore, run_chain
from .simgen import SimTruth, generate_simulation

MODES = ("full", "distributed", "simulate", "combine", "metrics")
DETERMINISTIC_METRICS = ("mse", "mspe", "coverage", "mean_ci_length", "ess_total", "tau2_lower", "tau2_upper", "y_coverage")
# fields that do not affect results and stay out of config.txt
UNRECORDED = ("output", "workers")


@dataclass
class RunConfig:
    mode: str = "distributed"
    train: str = ""
    test: str = ""
    truth: str = ""
    output: str = "run"
    n: int = 300
    n_test: int = 300
    k: int = 10
    m: int = 0
    seed: int = 0
    kernel: str = "exponential"
    priors: str = ""
    fitc_rank: int = 0
    fitc_grid: bool = False
    n_iterations: int = 10000
    burn_in: int = 5000
    thin: int = 5
    ess_prior_scale: float = 2.0
    theta_sweep: str = "joint"
    methods: str = ",".join(ALL_METHODS)
    policy: str = "auto"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.m < 0 or self.fitc_rank < 0:
            raise ConfigError("m and fitc_rank must be non-negative")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        bad = [m for m in self.method_list if m not in ALL_METHODS]
        if bad:
            raise ConfigError(f"unknown combination methods {bad}")
        try:
            self.chain_config(0, 1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def method_list(self) -> list[str]:
        return [m.strip().lower() for m in self.methods.split(",") if m.strip()]

    def families(self, q: int) -> list[KernelFamily]:
        names = [s.strip() for s in self.kernel.split(",") if s.strip()]
        if len(names) == 1:
            names = names * q
        if len(names) != q:
            raise ConfigError(f"need 1 or {q} kernel families, got {len(names)}")
        try:
            return [KernelFamily(n.lower()) for n in names]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def prior_ranges(self, families) -> list[PriorRange]:
        """``priors`` is ``lo:hi[,lo:hi...]`` per coefficient, coefficients separated by ``;``."""
        if not self.priors.strip():
            return [PriorRange.default(f) for f in families]
        specs = [s.strip() for s in self.priors.split(";") if s.strip()]
        if len(specs) == 1:
            specs = specs * len(families)
        if len(specs) != len(families):
            raise ConfigError("need one prior specification per coefficient")
        out = []
        for spec, fam in zip(specs, families):
            try:
                pairs = [tuple(float(v) for v in part.split(":")) for part in spec.split(",")]
                rng = PriorRange(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
                rng.check_family(fam)
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"bad prior range {spec!r}: {exc}") from None
            out.append(rng)
        return out

    def model_spec(self, data: Dataset, delta: float = 1.0) -> ModelSpec:
        fams = self.families(data.q)
        try:
            return ModelSpec(
                data.p,
                data.q,
                data.d,
                tuple(fams),
                tuple(self.prior_ranges(fams)),
                delta=delta,
                fitc_rank=self.fitc_rank or None,
                fitc_grid=self.fitc_grid,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def chain_config(self, seed: int, delta: float) -> ChainConfig:
        return ChainConfig(
            n_iterations=self.n_iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            delta=delta,
            ess_prior_scale=self.ess_prior_scale,
            rng_seed=seed,
            theta_sweep=self.theta_sweep,
        )

    def to_text(self) -> str:
        d = dataclasses.asdict(self)
        return "".join(f"{k}={_fmt_value(d[k])}\n" for k in sorted(d) if k not in UNRECORDED)


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config_file(path) -> dict:
    """Parse a ``key=value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = parse_value(key, value)
    return out


def load_config(path=None, overrides: dict | None = None, **defaults) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (highest precedence)."""
    values = dict(defaults)
    if path:
        values.update(read_config_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    values = {k: parse_value(k, v) if isinstance(v, str) else v for k, v in values.items()}
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _prepare(out: Path) -> None:
    for sub in ("draws", "combined", "metrics", "volatile"):
        (out / sub).mkdir(parents=True, exist_ok=True)


def write_manifest(out: Path, seeds: dict) -> None:
    files = sorted(
        p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json" and "volatile" not in p.relative_to(out).parts
    )
    _dump({"seeds": seeds, "files": {str(p.relative_to(out)): _sha256(p) for p in files}}, out / "manifest.json")


def _load_data(config: RunConfig):
    if not config.train:
        raise ConfigError("a training dataset path is required")
    train = ingest_dataset(config.train)
    test = ingest_dataset(config.test, allow_missing_y=True) if config.test else train
    if test.p != train.p or test.d != train.d:
        raise ConfigError("training and test datasets disagree on p or d")
    truth = SimTruth.load(config.truth) if config.truth else None
    return train, test, truth


def _chain_task(args):
    data, spec, chain_cfg, test, subset_id = args
    return subset_id, run_chain(data, spec, chain_cfg, test, subset_id=subset_id)


def _run_chains(tasks, workers: int, out: Path):
    """Run chain tasks and write each DrawStore as soon as it is done."""
    stores = {}

    def keep(j, store):
        store.save(out / "draws" / f"chain_{j:03d}.csv")
        stores[j] = store

    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            keep(*_chain_task(task))
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as pool:
            futures = {pool.submit(_chain_task, t): t[-1] for t in tasks}
            failure = None
            for fut in as_completed(futures):
                try:
                    keep(*fut.result())
                except ChainError as exc:
                    failure = failure or exc
            if failure is not None:
                raise failure
    return [stores[j] for j in sorted(stores)]


def _truth_at_test(truth: SimTruth | None, test: Dataset):
    if truth is None:
        return None, None
    beta = truth.beta_test
    if beta.shape[0] != test.n:
        raise ConfigError("truth file does not match the test dataset")
    return beta, test.y


def _write_metrics(out: Path, name: str, report: MetricReport) -> None:
    (out / "metrics" / f"{name}.txt").write_text(report.to_text(DETERMINISTIC_METRICS))


# ---------------------------------------------------------------------------
# pipelines


def run_full(config: RunConfig) -> Path:
    """Single untempered chain on the full training data."""
    train, test, truth = _load_data(config)
    out = Path(config.output)
    _prepare(out)
    (out / "config.txt").write_text(config.to_text())
    spec = config.model_spec(train, 1.0)
    chain_seed = _seeding.derive_seed(config.seed, _seeding.CHAIN, 0)
    (store,) = _run_chains([(train, spec, config.chain_config(chain_seed, 1.0), test, 0)], 1, out)
    wall = store.metadata["wall_seconds"]
    summary = {"full": {"wall_seconds": wall}}
    beta_true, y_true = _truth_at_test(truth, test)
    if beta_true is not None:
        report = report_from_combined(_as_combined(store), beta_true, y_true, wall / 3600.0)
        _write_metrics(out, "full", report)
        summary["full"].update(report.to_dict())
    _dump({"chains": {"0": wall}}, out / "volatile" / "timings.json")
    _dump(summary, out / "volatile" / "summary.json")
    write_manifest(out, {"seed": config.seed, "chains": {"0": chain_seed}})
    return out


def _as_combined(store: DrawStore):
    """View a single chain's draws through the combined-draws interface."""
    return combine([store], "amc", "joint")


def run_distributed(config: RunConfig) -> Path:
    """Subsets, tempered chains, every requested combination and their metrics."""
    train, test, truth = _load_data(config)
    m = config.m or train.n
    if m > train.n:
        raise ConfigError(f"m={m} exceeds n={train.n}")
    out = Path(config.output)
    _prepare(out)
    (out / "config.txt").write_text(config.to_text())
    plan = make_subsets(train, config.k, m, config.seed)
    plan.save(out / "plan.txt")
    delta = train.n / m
    spec = config.model_spec(train, delta)
    seeds = {j: _seeding.derive_seed(config.seed, _seeding.CHAIN, j) for j in range(config.k)}
    tasks = [
        (train.subset(plan.assignments[j]), spec, config.chain_config(seeds[j], delta), test, j)
        for j in range(config.k)
    ]
    stores = _run_chains(tasks, config.workers, out)
    chain_times = {str(j): s.metadata["wall_seconds"] for j, s in enumerate(stores)}
    slowest = max(chain_times.values())

    beta_true, y_true = _truth_at_test(truth, test)
    combine_times, summary = {}, {}
    for method in config.method_list:
        t0 = time.perf_counter()
        combined = combine(stores, method, config.policy)
        combine_times[method] = time.perf_counter() - t0
        combined.save(out / "combined" / f"{method}.csv")
        hours = (slowest + combine_times[method]) / 3600.0
        summary[method] = {"wall_seconds": slowest + combine_times[method]}
        if beta_true is not None:
            report = report_from_combined(combined, beta_true, y_true, hours)
            _write_metrics(out, method, report)
            summary[method].update(report.to_dict())
    _dump({"chains": chain_times, "combine": combine_times}, out / "volatile" / "timings.json")
    _dump(summary, out / "volatile" / "summary.json")
    write_manifest(out, {"seed": config.seed, "chains": {str(j): s for j, s in seeds.items()}})
    return out


def run_simulate(config: RunConfig) -> Path:
    """Write ``train.csv``, ``test.csv`` and ``truth.json`` into the output directory."""
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    train, test, truth = generate_simulation(config.n, config.n_test, config.seed)
    write_dataset(train, out / "train.csv")
    write_dataset(test, out / "test.csv")
    truth.save(out / "truth.json")
    return out


def run_combine(config: RunConfig, run_dir=None) -> Path:
    """Recombine the stored chain draws of an existing run directory."""
    out = Path(run_dir or config.output)
    paths = sorted((out / "draws").glob("chain_*.csv"))
    if not paths:
        raise ConfigError(f"no chain draws under {out / 'draws'}")
    stores = [read_draw_store(p) for p in paths]
    (out / "combined").mkdir(exist_ok=True)
    for method in config.method_list:
        combine(stores, method, config.policy).save(out / "combined" / f"{method}.csv")
    return out


def run_metrics(config: RunConfig, run_dir=None) -> dict:
    """Score every combined output of a run directory against the truth."""
    out = Path(run_dir or config.output)
    if not config.truth or not config.test:
        raise ConfigError("metrics need both a truth file and the test dataset")
    test = ingest_dataset(config.test, allow_missing_y=True)
    beta_true, y_true = _truth_at_test(SimTruth.load(config.truth), test)
    (out / "metrics").mkdir(exist_ok=True)
    reports = {}
    for path in sorted((out / "combined").glob("*.csv")):
        report = report_from_combined(read_combined(path), beta_true, y_true)
        _write_metrics(out, path.stem, report)
        reports[path.stem] = report.to_dict()
    return reports


def report_table(run_dir) -> str:
    """Plain-text table of the metrics files (and efficiency when timed)."""
    out = Path(run_dir)
    summary_path = out / "volatile" / "summary.json"
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
    cols = ("mse", "mspe", "coverage", "mean_ci_length", "tau2_lower", "tau2_upper", "comp_efficiency")
    lines = ["method " + " ".join(f"{c:>14}" for c in cols)]
    for path in sorted((out / "metrics").glob("*.txt")):
        vals = dict(line.split("=", 1) for line in path.read_text().splitlines() if "=" in line)
        vals["comp_efficiency"] = str(summary.get(path.stem, {}).get("comp_efficiency", "nan"))
        lines.append(f"{path.stem:<6} " + " ".join(f"{float(vals.get(c, 'nan')):>14.6g}" for c in cols))
    return "\n".join(lines) + "\n"


PIPELINES = {"full": run_full, "distributed": run_distributed, "simulate": run_simulate}
