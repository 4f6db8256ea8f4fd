"""Step-control constants shared by the numpy and compiled loop kernels."""

# Accepted steps grow the trial step size; rejected candidates halve it.
GROWTH = 1.5
# Step size is confined to [eta0 * ETA_MIN_FACTOR, eta0 * ETA_MAX_FACTOR].
ETA_MAX_FACTOR = 1e7
ETA_MIN_FACTOR = 1e-14
# Loss values beyond this signal a diverged run.
DIVERGENCE_LIMIT = 1e12
# Length of the open-loop escape phase used when a non-gradient field stalls.
ESCAPE_STEPS = 400

# Stop codes reported by the loop kernels.
STOP_GRAD = 0
STOP_MAX_ITERS = 1
STOP_STEP_UNDERFLOW = 2
STOP_TIME = 3

# Retraction codes for the Riemannian loop.
RETRACT_POLAR = 0
RETRACT_QR = 1
RETRACT_CAYLEY = 2
