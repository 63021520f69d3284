"""Allow running the package with `python -m actionlift`."""

from __future__ import annotations

from actionlift.main import main

main()
