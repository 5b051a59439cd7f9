from .behavior import EgoParams, EgoState, Percept, Profile, HEADWAYS, ego_behavior_step
from .engine import ActorState, SimulationTrace, Termination, simulate
from .geometry import Polyline, Rectangle, line_of_sight
from .templates import ActorId, ScenarioTemplate, get_template, scenario1_template, scenario2_template
