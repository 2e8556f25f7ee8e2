"""
config.py

Central config for the variation engine, shared by all scripts
"""

# -------------------- Time Grid --------------------

# Ticks per quarter note; supports sixteenths, triplets and dotted values exactly
TICKS_PER_QUARTER = 24

# -------------------- Similarity Weights --------------------

# Calibration constants for the Mongeau & Sankoff weights (not taken from any corpus)
DEFAULT_K1 = 0.5
DEFAULT_PENALTY_P = 8.0
DEFAULT_K_DEL = 4.0
DEFAULT_K_INS = 4.0
DEFAULT_REST_MISMATCH = 3.0
DEFAULT_MAX_GROUP = 8

# Interval class (0-11) -> pitch weight; consonant intervals are cheap
DEFAULT_PITCH_TABLE = (0.0, 3.0, 2.0, 1.0, 1.0, 2.0, 3.0, 1.0, 2.0, 2.0, 2.0, 3.0)

# -------------------- Model / Sampling --------------------

DEFAULT_ORDER = 1
DEFAULT_BIAS_RENORM = "global"
BIAS_RENORM_CHOICES = ("global", "local")

DEFAULT_SEED = 42
DEFAULT_COUNT = 1000
DEFAULT_ALPHAS = (0.0, 0.5, 0.95)

# -------------------- Synthetic Corpus --------------------

DEFAULT_CORPUS_SONGS = 29
DEFAULT_CORPUS_BARS = 12
DEFAULT_CORPUS_PITCHES = "C4,D4,E4,F4,G4,A4,B4,C5,rest"
DEFAULT_CORPUS_DURATIONS = "12,24,36,48"

# -------------------- Paths --------------------

CORPUS_DIR = "data/corpus"
EXPERIMENT_DIR = "export/experiment"
