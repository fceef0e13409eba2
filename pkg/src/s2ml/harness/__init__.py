"""Training, evaluation, ablation, sensitivity and gradient-check drivers."""
