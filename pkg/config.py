# =============================================================================
# MAIN CONFIGURATION SETTINGS for detection, scheduling, mixing and simulation
# =============================================================================

# Default domain set (ordering is fixed for a run; every vector indexes against it)
DEFAULT_DOMAINS = ['law', 'medicine', 'finance', 'science', 'code', 'other']

# Absolute tolerance for |sum(weights) - 1| on every Distribution
SUM_TOLERANCE = 1e-9

# Floor applied to each weight before taking reciprocals for the inverse baseline
DEFAULT_INVERSE_FLOOR = 1e-3

# =============================================================================
# DETECTION (classifier annotation of base-model generations)
# =============================================================================

# Samples per detection iteration and number of iterations in the reference protocol
DETECTION_SAMPLE_COUNT = 40_000
DETECTION_ITERATIONS = 5

# Classifier output is renormalized when its sum is within this distance of 1
CLASSIFIER_SUM_TOLERANCE = 0.05

# Fraction of dropped samples above which a detection run is rejected
MAX_DROP_FRACTION = 0.10

# Environment variable holding the classifier API key
CLASSIFIER_API_KEY_ENV = 'CLASSIFIER_API_KEY'

# Classifier client defaults
CLASSIFIER_MAX_PARALLEL = 16
CLASSIFIER_TIMEOUT_S = 60.0
CLASSIFIER_MAX_RETRIES = 3
CLASSIFIER_BACKOFF_FACTOR_S = 1.0

# =============================================================================
# SCHEDULER
# =============================================================================

# Adjustment magnitude, swept over [0.1, 0.3, 0.5, 0.8, 1.0] with stable ordering
DEFAULT_SIGMA = 0.5

# Target-domain increment per gated expansion step
DEFAULT_DELTA = 0.10

# Variation threshold weighting potential against non-target forgetting
DEFAULT_EPSILON = 1.0

# Maximum proportion the target domain may reach through increments
DEFAULT_TARGET_CAP = 0.95
MAX_TARGET_CAP = 0.99

# Scheduling steps (one step per epoch)
DEFAULT_TOTAL_STEPS = 4

# =============================================================================
# MIXER
# =============================================================================

# Training samples per epoch across all domains
DEFAULT_BUDGET = 60_000

DEFAULT_SEED = 0

# =============================================================================
# SIMULATOR (default synthetic world)
# =============================================================================

SIM_INITIAL_LOSS = 2.5
SIM_FLOOR = 1.0
SIM_CEILING = 3.5
SIM_LEARN_RATE = 0.5
SIM_FORGET_RATE = 0.15
SIM_NOISE_SCALE = 0.02

# Exposure saturation; 0 keeps exposure linear in the mixed proportions.
# worlds/saturating_world.json ships the saturating variant (5.0)
SIM_SATURATION = 0.0

# Reference losses for simulated scheduling sit this far above the floors
SIM_REFERENCE_MARGIN = 0.05

# Cross-domain transfer: (receiving domain, contributing domain, strength)
SIM_AFFINITY = [
    ('law', 'finance', 0.3),
    ('finance', 'law', 0.3),
    ('medicine', 'science', 0.3),
    ('science', 'medicine', 0.3),
    ('science', 'code', 0.2),
]

# Knowledge distribution the simulated base model would report under detection
SIM_KNOWLEDGE = [0.19, 0.21, 0.19, 0.17, 0.17, 0.07]

SIM_STEPS = 4
SIM_SEEDS = 20
SIM_MAX_WORKERS = 8
