# Description: Numeric constants of the tensor engine.

# Guard added to layernorm variances and cosine/normalisation denominators
EPS = 1e-8

# Central-difference step used by fd_check
FD_STEP = 1e-5

# Floor of the relative-error denominator in fd_check
FD_FLOOR = 1e-8

# Tanh approximation constant of GELU
GELU_COEF = 0.044715
