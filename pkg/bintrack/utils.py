from typing import Any

import numpy as np
import orjson
import xxhash


def normalize_for_hash(value: Any) -> Any:
    """Converts a config value into a structure with a stable byte encoding.

    Dictionaries are rebuilt with sorted keys, tuples become lists and numpy
    scalars/arrays become plain python values so that two configs that load to
    the same content always produce the same hash.
    """
    if isinstance(value, dict):
        return {str(k): normalize_for_hash(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [normalize_for_hash(v) for v in value]
    if isinstance(value, np.ndarray):
        return normalize_for_hash(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def get_config_hash(config_dict: dict) -> str:
    """Generates a short deterministic hash for a config dictionary.

    Example:
        >>> get_config_hash({"seed": 1, "scenario": {"sigma2": 0.1}})
        'xxhash_hexdigest_value'
    """
    return xxhash.xxh64(
        orjson.dumps(normalize_for_hash(config_dict), option=orjson.OPT_SORT_KEYS)
    ).hexdigest()


def derive_seed(*keys: int) -> int:
    """Derives an independent 32 bit seed from a tuple of integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def step_rng(seed: int, timestep: int) -> np.random.Generator:
    # One stream per (seed, timestep) so a step can be replayed on its own
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(timestep)]))


def format_header(command: str, **fields: Any) -> str:
    """Comment lines written at the top of every output file."""
    parts = " ".join(f"{k}={v}" for k, v in fields.items() if v is not None)
    return f"# bintrack {command} {parts}".rstrip() + "\n"
