"""Quality-diversity evolution of 2D mass-spring walkers.

Programs emit walker specs through a builder interface; a deterministic
physics roll-out scores them; MAP-Elites keeps the best per behavior niche;
mutation operators (LLM diff, prompt completion, or random spec perturbation)
propose children.  Sub-modules are importable on their own — see the README
for the map.
"""
from __future__ import annotations

__version__ = "0.1.0"
