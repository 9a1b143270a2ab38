"""Feedback-driven adaptation for graph-based instruction-following navigation.

A desk-scale simulation stack: synthetic viewpoint environments, a persistent
topological memory bank, a trainable linear-softmax navigation policy,
episode rollout with goal-level feedback lifted into trajectory supervision,
imitation-based adaptation (continual / hybrid / entropy baseline), and the
standard navigation metric suite.
"""

__version__ = "0.1.0"
