"""Differentiable action-to-waypoint lifting for driving policies."""

from __future__ import annotations

__version__ = "0.1.0"
