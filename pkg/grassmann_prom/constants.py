# Time integration defaults
DEFAULT_DT = 0.01
NEWMARK_BETA = 0.25
NEWMARK_GAMMA = 0.5
NEWTON_TOL = 1e-8
MAX_NEWTON_ITERS = 30

# Parameter space
COINCIDENCE_TOL = 1e-12
SHEPARD_POWER = 2

# Bases and manifold maps
ORTHONORMALITY_TOL = 1e-10
LOG_MAP_COND_LIMIT = 1e8

# Excitation
BUTTERWORTH_ORDER = 4

# Hyper-reduction
ECSW_TAU = 0.01
ECSW_STRIDE = 5

VARIANTS = ('global', 'local', 'entries', 'coefficients')

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3

# Binary matrix file: row count, column count, then row-major float64 data
MATRIX_HEADER = {
    'rows': '<Q',  # 8bytes
    'cols': '<Q',
}

MATRIX_DTYPE = '<f8'

LOAD_HISTORY_HEADER = {
    'dt': '<d',  # 8bytes
    'steps': '<Q',
    'dofs': '<Q',
    'seed': '<q',  # -1 for deterministic generators
}
