import numpy as np
import pandas as pd

from bintrack.model import SensorNetwork, TargetState, binary_matrix, count_vector


def read_output(path: str) -> pd.DataFrame:
    """Reads a bintrack CSV, skipping the comment header."""
    return pd.read_csv(path, comment="#")


def read_header(path: str) -> str:
    with open(path) as f:
        return f.readline()


def noiseless_counts(state: TargetState, net: SensorNetwork) -> np.ndarray:
    return count_vector(binary_matrix(state, net))


def replay_counts(positions: np.ndarray, velocities: np.ndarray, net: SensorNetwork) -> np.ndarray:
    """Counts of logged proposals recomputed one particle at a time."""
    return np.array([
        noiseless_counts(TargetState(p, v), net)
        for p, v in zip(positions, velocities)
    ])
