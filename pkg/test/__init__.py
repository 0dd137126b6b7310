from enum import Enum


class SampleGrid(Enum):
    SMALL = 16
    DENSE = 64
