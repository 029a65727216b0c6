"""
sgm_schedules: time-inhomogeneous score-based generative models, their
KL / Wasserstein error bounds, and noise-schedule tuning by bound minimization.
"""

__version__ = "0.1.0"
