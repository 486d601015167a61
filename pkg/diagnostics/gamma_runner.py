#!/usr/bin/env python3
# diagnostics/gamma_runner.py
"""
Tabulate the Γ-probe θ_n·ℐ_n(ν_n) against the level-1 functional of rm5
for a few well mixtures.
"""

import sys
from pathlib import Path

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from chuk_metastable import (
    build_tree,
    configure_logging,
    gamma_probe_level_p,
    load_example_family,
)
from chuk_metastable.grid import validate_grid_spec
from chuk_metastable.types import ProbeCandidate

MIXTURES = [(0.5, 0.5), (0.25, 0.75), (0.1, 0.9), (1.0, 0.0)]


def main() -> int:
    configure_logging("WARNING")
    family = load_example_family("rm5")
    grid = validate_grid_spec("6:12")
    tree = build_tree(family, grid)

    print("🔧 Γ-probe on rm5, level 1")
    print("=" * 72)
    print(f"{'ω':<14}{'candidate':<12}{'last value':>14}{'target':>14}{'gap':>10}  ok")
    failures = 0
    for omega in MIXTURES:
        for candidate in ProbeCandidate:
            report = gamma_probe_level_p(family, tree, 1, list(omega), grid, candidate)
            last = report.values[-1].value
            ok = report.liminf_respected
            if candidate == ProbeCandidate.HARMONIC:
                ok = ok and report.within_tolerance
            failures += not ok
            mark = "✅" if ok else "❌"
            print(
                f"{str(omega):<14}{report.candidate:<12}{last:>14.6f}{report.target:>14.6f}"
                f"{report.relative_gap:>10.2e}  {mark}"
            )
    print("=" * 72)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
