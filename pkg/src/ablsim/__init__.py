"""Pre- and post-selected measurement calculator: ABL rule, its extension to
incomplete final measurements, and the which-way Mach-Zehnder experiment."""

from .abl import AblQuery, DecompositionInput, abl, abl_generalized, abl_probability, decompose_total
from .cohen import D1Variant, Scenario, build_scenario, forward_probabilities, reproduce_table

__version__ = "0.1.0"
