"""HTTP server exposing causal transformer language models over a small
two-endpoint generation protocol.

``models`` builds and wraps the language models behind a three-strategy
decoding contract (greedy, beam, sample); ``server`` puts one loaded
model behind ``GET /v1/info`` and ``POST /v1/generate`` and owns the
process lifecycle.  The server is a standalone counterpart to the lklm
toolkit's remote backend: lklm talks to it over HTTP only, and nothing
here imports lklm.
"""

from __future__ import annotations

__version__ = "0.1.0"
