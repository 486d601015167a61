#!/usr/bin/env python3
# diagnostics/hierarchy_runner.py
"""
Build the metastable tree of a bundled family and print each level.

Usage: hierarchy_runner.py [example] [grid]
"""

import asyncio
import sys
import traceback
from pathlib import Path

# Add the src directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from chuk_metastable import build_tree_async, configure_logging, load_example_family
from chuk_metastable.exceptions import MetastableError
from chuk_metastable.grid import validate_grid_spec
from chuk_metastable.hierarchy import tree_diagnostics


async def run(name: str, spec: str) -> None:
    family = load_example_family(name)
    grid = validate_grid_spec(spec)
    print(f"🌲 {name} on n = {grid.points[0]:g} … {grid.largest:g}")

    tree = await build_tree_async(family, grid)
    print(f"  depth {tree.depth}")
    for level in tree.levels:
        print(f"\n  level {level.index}: wells {level.labels}")
        if level.transient:
            print(f"    transient {level.transient}")
        if level.timescale is None:
            print("    terminal")
            continue
        scale = level.timescale
        print(f"    θ_n ≈ {scale.coefficient:.6g}·n^{scale.exponent:.4f} (fit {scale.fit_quality:.2e})")
        for source, target in level.reduced_chain.edge_keys:
            print(f"    r({source} → {target}) = {level.reduced_chain.rate(source, target):.6g}")

    diagnostics = tree_diagnostics(family, tree, grid)
    print("\n📊 Diagnostics")
    for key, value in diagnostics.model_dump().items():
        print(f"  {key}: {value}")


def main() -> int:
    configure_logging("WARNING")
    name = sys.argv[1] if len(sys.argv) > 1 else "rm5"
    spec = sys.argv[2] if len(sys.argv) > 2 else "6:14"
    try:
        asyncio.run(run(name, spec))
    except MetastableError as e:
        print(f"❌ {type(e).__name__}: {e}")
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
