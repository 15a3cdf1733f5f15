"""Max-min fairness of efficient policies against battery size, n = 1..4 users.

The system with n users takes the first n sources of configs/fairness4.json.
"""

import copy

from _common import config, parser, write

from fairshare.analysis import CSV_HEADER, sweep


def main():
    args = parser(__doc__).parse_args()
    base = config("fairness4.json")
    lines = ["n_users," + ",".join(CSV_HEADER)]
    for n in range(1, len(base.users) + 1):
        cfg = copy.deepcopy(base)
        cfg.users = cfg.users[:n]
        rows = sweep("fairness_vs_b", cfg.chain(), cfg.b_grid, jobs=args.jobs)
        lines += [f"{n}," + ",".join(r.csv_cells()) for r in rows]
        print(f"n={n}: theta* = " + ", ".join(f"{r.metrics['theta_star']:.4f}" for r in rows))
    write(args.out_dir, "fairness_vs_battery.csv", "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
