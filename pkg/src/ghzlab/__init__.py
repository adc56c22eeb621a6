"""GHZ game laboratory: classical and quantum values, loophole adversaries, timeline audits."""

from ghzlab.game import GameSpec, Question, make_ghz_game, wins
from ghzlab.kernels import BACKEND

__version__ = "0.1.0"
