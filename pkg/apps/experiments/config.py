"""
Experiment configuration: loading TOML or JSON files, validating them with
the config serializers and freezing the result into dataclasses.
"""
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

ATTENTION_ALGORITHMS = ('gatta', 'ce_gatta')


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    n: Optional[int] = None
    p: Optional[float] = None
    seed: Optional[int] = None
    path: Optional[str] = None
    lazy: bool = True


@dataclass(frozen=True)
class DataSpec:
    regime: str
    seed: int
    test_frac: float = 0.25
    n_classes: int = 6
    n_features: int = 20
    per_class: int = 500
    separation: float = 1.5
    labels_per_agent: Optional[int] = None
    writers_per_agent: Optional[int] = None
    n_writers: Optional[int] = None
    identity_transforms: bool = False
    images_path: Optional[str] = None
    labels_path: Optional[str] = None


@dataclass(frozen=True)
class ModelSpec:
    hidden: Tuple[int, ...] = (64,)


@dataclass(frozen=True)
class AlgorithmSpec:
    eta: float
    name: Optional[str] = None
    mu: float = 0.9
    tau_rule: Optional[str] = None
    tau_value: Optional[float] = None
    ft_epochs: Optional[int] = None
    gt_step_scale: Optional[float] = None


@dataclass(frozen=True)
class RunSpec:
    rounds: int
    seed: int
    batch_size: int = 32
    local_steps: Optional[int] = None
    trials: int = 1
    algorithms: Tuple[str, ...] = ()
    record_alphas: bool = True


@dataclass(frozen=True)
class TheorySpec:
    estimate: bool = False
    cadence: int = 10
    L: float = 1.0
    c: Optional[float] = None
    F0: Optional[float] = None
    F_star: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologySpec
    data: DataSpec
    algorithm: AlgorithmSpec
    run: RunSpec
    model: ModelSpec = field(default_factory=ModelSpec)
    theory: TheorySpec = field(default_factory=TheorySpec)

    @property
    def name(self) -> str:
        return self.algorithm.name

    @property
    def uses_attention(self) -> bool:
        return self.algorithm.name in ATTENTION_ALGORITHMS

    def to_dict(self) -> dict:
        data = asdict(self)
        data['model']['hidden'] = list(self.model.hidden)
        data['run']['algorithms'] = list(self.run.algorithms)
        return data

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()

    def for_algorithm(self, name: str) -> 'ExperimentConfig':
        """The single-run config for one algorithm of a sweep."""
        algorithm = self.algorithm
        if name != 'ce_gatta':
            algorithm = replace(algorithm, tau_rule=None, tau_value=None)
        return replace(self, algorithm=replace(algorithm, name=name), run=replace(self.run, algorithms=()))

    def for_trial(self, trial: int, seed_base: int = 0) -> 'ExperimentConfig':
        """Shift every seed by seed_base + trial so each trial draws independent streams."""
        offset = seed_base + trial
        if offset == 0:
            return self
        topology = self.topology
        if topology.seed is not None:
            topology = replace(topology, seed=topology.seed + offset)
        return replace(
            self,
            topology=topology,
            data=replace(self.data, seed=self.data.seed + offset),
            run=replace(self.run, seed=self.run.seed + offset),
        )


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def _freeze(validated: dict) -> ExperimentConfig:
    model = dict(validated['model'])
    model['hidden'] = tuple(model['hidden'])
    run = dict(validated['run'])
    run['algorithms'] = tuple(run['algorithms'])
    return ExperimentConfig(
        topology=TopologySpec(**validated['topology']),
        data=DataSpec(**validated['data']),
        algorithm=AlgorithmSpec(**validated['algorithm']),
        run=RunSpec(**run),
        model=ModelSpec(**model),
        theory=TheorySpec(**validated['theory']),
    )


def parse_config(payload: dict, sweep: bool = False) -> ExperimentConfig:
    """Validate a raw config mapping; field-level problems raise ConfigError."""
    # sweep workers import this module before django.setup()
    from .serializers import ExperimentConfigSerializer

    serializer = ExperimentConfigSerializer(data=payload, sweep=sweep)
    if not serializer.is_valid():
        raise ConfigError(serializer.errors)
    return _freeze(serializer.validated_data)


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError({'config': [f"No such file: {path}"]})
    try:
        if path.suffix == '.json':
            return json.loads(path.read_text())
        with path.open('rb') as handle:
            return tomllib.load(handle)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError({'config': [f"{path}: {e}"]}) from e


def load_config(path, sweep: bool = False) -> ExperimentConfig:
    config = parse_config(read_config_file(path), sweep=sweep)
    logger.info(f"Loaded config {path} (hash {config.config_hash[:12]})")
    return config


def sweep_algorithms(config: ExperimentConfig) -> List[str]:
    return list(config.run.algorithms) or [config.algorithm.name]
