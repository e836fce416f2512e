"""Desk-scale comparison of keyword retrieval, knowledge-graph expansion and
generative language models for manufacturing instructions.

The package is organised around a small text-processing core (``corpus``),
three retrieval/generation model families (``retrieval``, ``lexkg``,
``ngram`` plus the remote client in ``genclient``), evaluation metrics
(``metrics``), a decision aid for choosing between the families
(``decision``) and a knowledge-augmented generation pipeline (``pipeline``).
``harness`` ties everything together behind a command line.
"""

from __future__ import annotations

__version__ = "0.1.0"
