"""
Non-i.i.d. partitioners: label-distribution skew and feature-distribution skew.
"""
import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd
from django.conf import settings
from sklearn.model_selection import train_test_split

from .datasets import Dataset, ShardAssignment
from .exceptions import PartitionError

logger = logging.getLogger(__name__)


def _check_test_frac(test_frac: float) -> None:
    if not 0 < test_frac < 1:
        raise PartitionError(f"Test fraction must lie in (0, 1), got {test_frac}")


def _draw_label_sets(rng: np.random.Generator, n_classes: int, n_agents: int,
                     labels_per_agent: int) -> List[tuple]:
    max_attempts = settings.SIMULATION['PARTITION_MAX_ATTEMPTS']
    for _ in range(max_attempts):
        label_sets = [
            tuple(sorted(int(c) for c in rng.choice(n_classes, size=labels_per_agent, replace=False)))
            for _ in range(n_agents)
        ]
        covered = set().union(*label_sets)
        if len(covered) == n_classes:
            return label_sets
    raise PartitionError(
        f"Could not cover all {n_classes} labels with {n_agents} agents holding "
        f"{labels_per_agent} labels each after {max_attempts} attempts"
    )


def _split_by_label(pool: np.ndarray, labels: np.ndarray, label_sets: List[tuple],
                    rng: np.random.Generator) -> List[np.ndarray]:
    n_agents = len(label_sets)
    shards = [[] for _ in range(n_agents)]
    for label in np.unique(labels):
        holders = [i for i, held in enumerate(label_sets) if label in held]
        members = rng.permutation(pool[labels[pool] == label])
        # array_split hands the remainder out one by one to the lowest agent ids
        for holder, chunk in zip(holders, np.array_split(members, len(holders))):
            shards[holder].append(chunk)
    return [np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64) for parts in shards]


def partition_label_skew(data: Dataset, n_agents: int, labels_per_agent: int,
                         test_frac: float, seed: int) -> ShardAssignment:
    """
    Give each agent `labels_per_agent` distinct labels; the samples of a label
    are split evenly among the agents holding it. Test samples come from a
    held-out pool and follow each agent's own label set.
    """
    if labels_per_agent > data.n_classes:
        raise PartitionError(
            f"Cannot give {labels_per_agent} labels per agent with only {data.n_classes} classes"
        )
    if labels_per_agent < 1 or n_agents < 1:
        raise PartitionError("Need at least one agent and one label per agent")
    _check_test_frac(test_frac)

    rng = np.random.default_rng(seed)
    label_sets = _draw_label_sets(rng, data.n_classes, n_agents, labels_per_agent)

    indices = np.arange(len(data))
    train_pool, test_pool = train_test_split(
        indices, test_size=test_frac, stratify=data.labels, random_state=seed
    )
    train_idx = _split_by_label(np.sort(train_pool), data.labels, label_sets, rng)
    test_idx = _split_by_label(np.sort(test_pool), data.labels, label_sets, rng)

    for i in range(n_agents):
        if train_idx[i].size == 0 or test_idx[i].size == 0:
            raise PartitionError(
                f"Agent {i} received an empty shard; generate more samples per class"
            )

    assignment = ShardAssignment(
        regime='label_skew',
        train=[data.subset(idx) for idx in train_idx],
        test=[data.subset(idx) for idx in test_idx],
        groups=label_sets,
        train_indices=train_idx,
        test_indices=test_idx,
    )
    logger.info(f"Label skew: {n_agents} agents x {labels_per_agent} labels from {data.n_classes} classes")
    return assignment


def _writer_transform(rng: np.random.Generator, n_features: int):
    q, r = np.linalg.qr(rng.standard_normal((n_features, n_features)))
    rotation = q * np.sign(np.diag(r))
    scale = rng.uniform(0.5, 2.0, size=n_features)
    shift = rng.normal(0.0, 0.5, size=n_features)
    return rotation, scale, shift


def _deal_writers(writer_order: np.ndarray, n_agents: int, writers_per_agent: int) -> List[tuple]:
    # contiguous runs over the cyclic writer order: every writer is dealt at
    # least once and no agent holds the same writer twice
    n_writers = len(writer_order)
    slots = np.arange(max(n_agents * writers_per_agent, n_writers))
    return [
        tuple(sorted(int(writer_order[k % n_writers]) for k in run))
        for run in np.array_split(slots, n_agents)
    ]


def partition_feature_skew(base: Dataset, n_agents: int, writers_per_agent: int,
                           n_writers: int, test_frac: float, seed: int,
                           identity_transforms: bool = False) -> ShardAssignment:
    """
    Simulated writers: the base samples are cut into `n_writers` disjoint
    blocks and every writer applies its own affine transform (rotation,
    per-dimension scale in [0.5, 2], shift) to its block. Each agent holds at
    least `writers_per_agent` distinct writers and every writer has a holder.
    A writer's block is split train/test, then shared evenly among its
    holders, so every sample lands in exactly one shard.
    """
    if writers_per_agent < 1 or writers_per_agent > n_writers:
        raise PartitionError(f"writers_per_agent must lie in [1, {n_writers}], got {writers_per_agent}")
    if n_agents < 1 or n_agents > n_writers:
        raise PartitionError(f"Need between 1 and {n_writers} agents for {n_writers} writers, got {n_agents}")
    _check_test_frac(test_frac)
    min_samples = settings.SIMULATION['MIN_WRITER_SAMPLES']
    if len(base) < n_writers * min_samples:
        raise PartitionError(
            f"{len(base)} samples cannot give {n_writers} writers {min_samples} samples each"
        )

    rng = np.random.default_rng(seed)
    blocks = np.array_split(rng.permutation(len(base)), n_writers)
    transforms = [_writer_transform(rng, base.n_features) for _ in range(n_writers)]
    groups = _deal_writers(rng.permutation(n_writers), n_agents, writers_per_agent)

    features = base.features.copy()
    if not identity_transforms:
        for block, (rotation, scale, shift) in zip(blocks, transforms):
            features[block] = (base.features[block] @ rotation.T) * scale + shift
    transformed = Dataset(features, base.labels, base.n_classes)

    agent_train = [[] for _ in range(n_agents)]
    agent_test = [[] for _ in range(n_agents)]
    for w in range(n_writers):
        holders = [i for i, held in enumerate(groups) if w in held]
        tr, te = train_test_split(
            np.sort(blocks[w]), test_size=test_frac, random_state=int(rng.integers(2 ** 31 - 1))
        )
        for holder, tr_chunk, te_chunk in zip(holders, np.array_split(rng.permutation(tr), len(holders)),
                                              np.array_split(rng.permutation(te), len(holders))):
            agent_train[holder].append(tr_chunk)
            agent_test[holder].append(te_chunk)

    train_idx = [np.sort(np.concatenate(parts)) for parts in agent_train]
    test_idx = [np.sort(np.concatenate(parts)) for parts in agent_test]
    for i in range(n_agents):
        if train_idx[i].size == 0 or test_idx[i].size == 0:
            raise PartitionError(
                f"Agent {i} received an empty shard; generate more samples per writer"
            )

    shared = sum(len(group) for group in groups) - n_writers
    logger.info(f"Feature skew: {n_agents} agents x {writers_per_agent}+ writers of {n_writers} ({shared} shared)")
    return ShardAssignment(
        regime='feature_skew',
        train=[transformed.subset(idx) for idx in train_idx],
        test=[transformed.subset(idx) for idx in test_idx],
        groups=groups,
        train_indices=train_idx,
        test_indices=test_idx,
    )


def dump_shards(assignment: ShardAssignment, path) -> Path:
    """Write every shard into one CSV table: agent, split, label, f0..f{d-1}."""
    frames = []
    for agent in range(assignment.n_agents):
        for split, shard in (('train', assignment.train[agent]), ('test', assignment.test[agent])):
            frame = pd.DataFrame(shard.features, columns=[f"f{k}" for k in range(shard.n_features)])
            frame.insert(0, 'label', shard.labels)
            frame.insert(0, 'split', split)
            frame.insert(0, 'agent', agent)
            frames.append(frame)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format='%.17g')
    return path
