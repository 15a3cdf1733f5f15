"""Fairness-efficiency frontier eps(delta) at b_max = 12 for 3 and 5 users."""

from _common import config, parser, write

from fairshare.analysis import rows_to_csv, sweep


def main():
    args = parser(__doc__).parse_args()
    for name, cfg_file in (("frontier_three_user.csv", "three_user.json"), ("frontier_five_user.csv", "five_user.json")):
        cfg = config(cfg_file)
        rows = sweep("frontier", cfg.chain(), cfg.delta_grid, b_max=cfg.b_max, jobs=args.jobs)
        write(args.out_dir, name, rows_to_csv(rows))
        for r in rows:
            print(f"  delta={r.abscissa:.2f}  eps={r.metrics['epsilon']:.6g}")


if __name__ == "__main__":
    main()
