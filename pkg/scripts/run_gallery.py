#!/usr/bin/env python3
"""Run the structural checks over every built-in scenario and tabulate the
estimated constants against their hand-derived values."""

import argparse

from semilab.coefficients import sample
from semilab.gallery import gallery_names, gallery_scenario
from semilab.hypotheses import check_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", help="comma list of scenario keys")
    args = ap.parse_args()

    keys = args.only.split(",") if args.only else gallery_names()
    header = f"{'scenario':28s} {'mode':11s} {'c0':>8s} {'kA':>8s} {'kB':>8s} {'kC':>8s} {'kW':>8s} {'K':>8s} pass"
    print(header)
    print("-" * len(header))
    for key in keys:
        scn = gallery_scenario(key)
        rep = check_all(sample(scn.system, scn.grid), mode=scn.mode)
        print(f"{scn.name:28s} {scn.mode.kind:11s} "
              f"{rep.c0:8.4f} {rep.kappaA:8.4f} {rep.kappaB:8.4f} "
              f"{rep.kappaC:8.4f} {rep.kappaW:8.4f} {rep.K:8.4f} "
              f"{'yes' if rep.all_pass else 'NO'}")
        for name, bound in sorted(scn.closed_forms.items()):
            est = getattr(rep, name)
            gap = bound - est
            marker = "ok" if gap >= -1e-9 else "VIOLATED"
            print(f"    {name}: estimated {est:.6f} vs derived {bound:.6f} ({marker})")


if __name__ == "__main__":
    main()
