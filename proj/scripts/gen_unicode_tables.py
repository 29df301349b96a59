#!/usr/bin/env python3
"""Regenerates include/mojidistill/unicode_tables.hpp.

Emits contiguous codepoint ranges for the Unicode general categories P* and S*
(punctuation and symbols) and a simple one-to-one lowercase mapping table.
Multi-codepoint lowercase expansions are skipped on purpose; tokenization only
needs a deterministic simple fold.

Usage: python3 scripts/gen_unicode_tables.py > include/mojidistill/unicode_tables.hpp
"""

import sys
import unicodedata


def punct_symbol_ranges():
    ranges = []
    start = None
    prev = None
    for cp in range(0x110000):
        cat = unicodedata.category(chr(cp))
        if cat[0] in ("P", "S"):
            if start is None:
                start = cp
            prev = cp
        else:
            if start is not None:
                ranges.append((start, prev))
                start = None
    if start is not None:
        ranges.append((start, prev))
    return ranges


def lowercase_pairs():
    pairs = []
    for cp in range(0x110000):
        lo = chr(cp).lower()
        if len(lo) == 1 and ord(lo) != cp:
            pairs.append((cp, ord(lo)))
    return pairs


def main():
    out = sys.stdout
    ranges = punct_symbol_ranges()
    pairs = lowercase_pairs()
    out.write("// Generated by scripts/gen_unicode_tables.py (unicodedata %s). Do not edit.\n"
              % unicodedata.unidata_version)
    out.write("#pragma once\n\n#include <cstdint>\n#include <cstddef>\n\n")
    out.write("namespace moji::uni {\n\n")
    out.write("struct CodepointRange { char32_t first; char32_t last; };\n\n")
    out.write("// Unicode general categories P* and S*, as inclusive ranges.\n")
    out.write("inline constexpr CodepointRange kPunctSymbolRanges[] = {\n")
    for i, (a, b) in enumerate(ranges):
        sep = "\n" if (i + 1) % 4 == 0 else " "
        out.write("    {0x%X, 0x%X},%s" % (a, b, sep if sep == " " else "\n"))
    out.write("\n};\n")
    out.write("inline constexpr std::size_t kPunctSymbolRangeCount = %d;\n\n" % len(ranges))
    out.write("struct LowercasePair { char32_t upper; char32_t lower; };\n\n")
    out.write("// Simple one-to-one lowercase mappings, sorted by source codepoint.\n")
    out.write("inline constexpr LowercasePair kLowercasePairs[] = {\n")
    for i, (a, b) in enumerate(pairs):
        sep = "\n" if (i + 1) % 4 == 0 else " "
        out.write("    {0x%X, 0x%X},%s" % (a, b, sep if sep == " " else "\n"))
    out.write("\n};\n")
    out.write("inline constexpr std::size_t kLowercasePairCount = %d;\n\n" % len(pairs))
    out.write("}  // namespace moji::uni\n")


if __name__ == "__main__":
    main()
