"""Drive the whole pipeline through the CLI entry point.

Equivalent to:
    trajkit pipeline --config configs/nominal.json --out demo_out
then prints the recovered correction and the forecast metrics.
"""

import json
import os

from trajkit.cli import main


def run(out="demo_out"):
    rc = main(["pipeline", "--config", "configs/nominal.json", "--out", out])
    if rc != 0:
        raise SystemExit(rc)

    print("\nartifacts:")
    for name in sorted(os.listdir(out)):
        size = os.path.getsize(os.path.join(out, name))
        print(f"  {name:24s} {size:>9d} bytes")

    with open(os.path.join(out, "correction.json")) as fh:
        corr = json.load(fh)
    print(f"\nrecovered time offset: {corr['time_offset']*1e3:+.1f} ms "
          "(injected +50.0 ms)")

    with open(os.path.join(out, "metrics.json")) as fh:
        metrics = json.load(fh)
    print("forecast error by horizon:")
    for key in sorted(k for k in metrics if k.startswith("E_")):
        print(f"  {key:6s} {metrics[key]:.4f} m")


if __name__ == "__main__":
    run()
