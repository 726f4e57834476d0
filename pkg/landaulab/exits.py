from enum import Enum


class ExitCodes(Enum):
    E_OK = 0
    E_ACCEPTANCE_FAILED = 1
    E_USAGE = 2
    E_NUMERICS = 3
