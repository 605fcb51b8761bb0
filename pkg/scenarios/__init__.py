from . import collapse_cycle, concentration_suite, correspondence, decomposition, double_slit, weak_equivalence
from .builders import ScenarioContext

SCENARIO_RUNNERS = {
    'collapse': collapse_cycle.run,
    'concentration-suite': concentration_suite.run,
    'correspondence': correspondence.run,
    'decompose': decomposition.run,
    'double-slit': double_slit.run,
    'wep': weak_equivalence.run,
}

__all__ = ['SCENARIO_RUNNERS', 'ScenarioContext']
