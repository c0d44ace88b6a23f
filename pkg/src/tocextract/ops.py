from enum import IntEnum


class Op(IntEnum):
    """Node operations; the value order is also the argmax tie-break order."""

    KEEP = 0
    DELETE = 1
    MOVE = 2
