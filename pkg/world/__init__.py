from .genome import Genome, genome_matrix, kinship_matrix
from .config import FoodLayout, ReproductionMode, WorldConfig
from .state import (
    Action,
    AgentState,
    AttackEvent,
    BirthEvent,
    DeathCause,
    DeathEvent,
    HarvestEvent,
    Move,
    Tile,
    TileKind,
    TickEvents,
    WorldEvent,
    WorldState,
)
from .engine import init_world, step, resolve_attack, try_reproduce
from .observation import (
    CHANNEL_COUNT,
    CROP_SIZE,
    KINSHIP_CHANNEL,
    SCALAR_COUNT,
    Observation,
    ObservationBatch,
    observe,
    observe_all,
)
from .snapshot import WorldSnapshot
from .recording import EpisodeHeader, EpisodeRecorder, Frame, family_label, read_episode
from .render import legend, render_pixmap, render_text
