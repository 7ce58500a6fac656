# Minimal dense-tensor engine with reverse-mode automatic differentiation.
