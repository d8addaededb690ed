"""Stand-in for a compile-and-run worker: reads one request on stdin and
prints a fake runtime. Oversized tiles exit nonzero to mimic a launch failure."""
import json
import sys

req = json.load(sys.stdin)
k = req["knobs"]
if k["tile_f"] * k["tile_y"] > 512:
    sys.exit(1)
runtime = 1e-3 * (1 + abs(k["tile_f"] - 16) / 16 + abs(k["tile_y"] - 8) / 8 + 0.1 * k["unroll"])
print(json.dumps({"runtime_seconds": runtime}))
