"""Price of fairness against battery size for two all-generating user sets.

Writes pof_hi_lo.csv ({U_hi, U_lo}) and pof_three_gen.csv (three generators),
plus pof_hi_dem.csv for the pair with a net-demanding user.
"""

from _common import config, parser, write

from fairshare.analysis import rows_to_csv, sweep


def main():
    args = parser(__doc__).parse_args()
    for name, cfg_file in (("pof_hi_lo.csv", "two_user.json"), ("pof_three_gen.csv", "three_gen.json"),
                           ("pof_hi_dem.csv", "hi_dem.json")):
        cfg = config(cfg_file)
        rows = sweep("pof_vs_b", cfg.chain(), cfg.b_grid, jobs=args.jobs)
        write(args.out_dir, name, rows_to_csv(rows))
        for r in rows:
            print(f"  b={r.abscissa:>3}  PoF={r.metrics.get('pof')}")


if __name__ == "__main__":
    main()
