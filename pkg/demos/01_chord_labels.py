"""Chord labels: parsing, pitch-class algebra, and the 25-class vocabulary."""

from chordbench.labels import (majmin_name, parse_harte, pitch_class_set,
                               render, to_majmin, transpose)

print("== parsing ==")
for text in ("C:maj", "Db:min7", "G/5", "N", "F#:dim", "C:(1,4,5)"):
    label = parse_harte(text)
    print(f"{text:>12} -> root={label.root} "
          f"quality={label.quality.kind if label.quality else None} "
          f"bass={label.bass} render={render(label)}")

print("\n== pitch-class sets ==")
for text in ("C:maj", "A:min", "C:maj7", "G:7/5", "N"):
    pcs = sorted(pitch_class_set(parse_harte(text)))
    print(f"{text:>8} -> {pcs}")

print("\n== 25-class reduction ==")
for text in ("C:maj7", "D:dim", "E:sus4", "Bb:min6", "N"):
    c = to_majmin(parse_harte(text))
    print(f"{text:>8} -> class {c:2d} ({majmin_name(c)})")

print("\n== transposition ==")
label = parse_harte("B:maj")
for k in (2, 7, -3):
    print(f"transpose({render(label)}, {k:+d}) = {render(transpose(label, k))}")
