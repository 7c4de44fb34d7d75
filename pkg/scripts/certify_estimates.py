#!/usr/bin/env python3
"""Run the fast identity and geometry certificates in one sweep.

Wraps the named checks of the ``penwave verify`` subcommand that need no
stored trajectory: the conformal-factor identity, the operator intertwining
and commutator batteries, the obstacle boundary-curve geometry, and the
tip vanishing orders.  Writes one JSON report per check and exits nonzero
if any verdict fails.

Usage:
    python scripts/certify_estimates.py --out results/certificates
"""

import argparse
import sys

from penwave import cli

FAST_CHECKS = (
    "identity-omega",
    "intertwining",
    "commutator",
    "boundary-geometry",
    "vanishing-order",
)


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/certificates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--traj", help="optionally also certify a stored trajectory "
                                  "(decay, morawetz, energy, weighted-norms)")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    checks = list(FAST_CHECKS)
    if args.traj:
        checks += ["decay", "morawetz", "energy", "weighted-norms"]
    failures = 0
    for check in checks:
        argv_check = ["verify", "--check", check, "--out", args.out,
                      "--seed", str(args.seed)]
        if args.traj:
            argv_check += ["--traj", args.traj]
        code = cli.main(argv_check)
        if code != 0:
            failures += 1
    print(f"{len(checks) - failures}/{len(checks)} certificates passed")
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
