from .grid import TimeGrid, Trajectory
from .integrator import integrate, integrate_with_sensitivities
from .instrument import EvaluationCounter, count_evaluations, record

__all__ = [
	"TimeGrid",
	"Trajectory",
	"integrate",
	"integrate_with_sensitivities",
	"EvaluationCounter",
	"count_evaluations",
	"record",
]
