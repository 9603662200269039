"""Model zoo: spectral functions, intensities and exact mass oracles."""
from .base import SpectralModel, TailUnavailable, WindowChoice
from .boolean import BooleanSet, make_boolean
from .cells import CellFamily, FrechetLift, IIDModel, frechet_table, make_cells, make_frechet_lift, make_iid
from .config import grid_from_spec, load_config, model_from_config
from .lines import MaxStableLine, PoissonLine, make_poisson_line, make_poisson_line_maxstable
from .moving import MovingMaxima, make_moving_maxima
from .penrose import GaussianPathMark, PenroseField, make_penrose
from .storms import GrainSet, StormProfile, ball_volume
