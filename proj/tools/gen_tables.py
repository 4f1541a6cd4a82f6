#!/usr/bin/env python3
"""Regenerate include/retina/detail/tables.hpp from data/ and materials/."""

import csv
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "include" / "retina" / "detail" / "tables.hpp"

MATERIALS = [
    ("wo3_colored", "WO3", "colored"),
    ("wo3_dark", "WO3", "dark"),
    ("air", "air", "none"),
    ("electrolyte", "electrolyte", "none"),
    ("al", "Al", "none"),
    ("pt", "Pt", "none"),
]


def rows(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        return [r for r in reader if r]


def main():
    out = []
    out.append("// Generated by tools/gen_tables.py. Do not edit by hand.")
    out.append("#pragma once")
    out.append("")
    out.append("#include <array>")
    out.append("")
    out.append("namespace retina::detail {")
    out.append("")

    cmf = rows(ROOT / "data" / "cie1931_2deg_5nm.csv")
    d65 = rows(ROOT / "data" / "d65_5nm.csv")
    assert [r[0] for r in cmf] == [r[0] for r in d65]
    out.append("struct CmfRow {")
    out.append("    double wavelength_nm, xbar, ybar, zbar, d65;")
    out.append("};")
    out.append("")
    out.append(f"inline constexpr std::array<CmfRow, {len(cmf)}> kCie1931 = {{{{")
    for c, d in zip(cmf, d65):
        out.append(f"    {{{c[0]}, {c[1]}, {c[2]}, {c[3]}, {d[1]}}},")
    out.append("}};")
    out.append("")

    out.append("struct MaterialRow {")
    out.append("    double wavelength_nm, n, k;")
    out.append("};")
    out.append("")
    for key, _, _ in MATERIALS:
        data = rows(ROOT / "materials" / f"{key}.csv")
        out.append(f"inline constexpr std::array<MaterialRow, {len(data)}> k_{key} = {{{{")
        for r in data:
            out.append(f"    {{{r[0]}, {r[1]}, {r[2]}}},")
        out.append("}};")
        out.append("")

    out.append("}  // namespace retina::detail")
    OUT.write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
