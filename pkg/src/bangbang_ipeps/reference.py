"""Published reference values used by reports and acceptance tests."""

from typing import Dict


__all__ = [
    "VARIATIONAL_ENERGY",
    "EXACT_FERRO_ENERGY",
    "PARA_TARGET",
    "PARA_TO_FERRO",
]

# variational iPEPS (D=6) ground-state energy per bond at g=3.1
VARIATIONAL_ENERGY = -1.6422386
EXACT_FERRO_ENERGY = -1.0

# N -> (epsilon_NTU, E_AP, E_BB); None where no value was published
PARA_TARGET: Dict[int, tuple] = {
    2: (0.0, -1.575331, -1.637082),
    3: (0.0, -1.611126, -1.639453),
    4: (5.1e-7, -1.626484, -1.64071),
    5: (1.6e-6, -1.630946, -1.64085),
    6: (1.9e-6, -1.633067, -1.64091),
    7: (1.2e-8, -1.635215, None),
    8: (2.0e-8, -1.636623, None),
    9: (3.2e-8, -1.637411, None),
    10: (5.6e-7, -1.637896, None),
}

PARA_TO_FERRO: Dict[int, tuple] = {
    2: (0.0, -0.28202, -0.48065),
    3: (0.0, -0.32152, -0.52906),
    4: (2.1e-4, -0.35180, -0.6015),
    5: (5.1e-4, -0.42315, -0.616),
}
