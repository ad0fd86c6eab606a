"""Reference-based metrics and the two agreement statistics.

ROUGE-1/2/L with clipped n-gram overlap and LCS, a one-way ANOVA F
statistic, and Krippendorff's alpha at the nominal, ordinal, and
interval levels via the coincidence-matrix formulation. All text runs
through the shared tokenizer; there is no stemming or stopword removal.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter

from .text import tokenize

logger = logging.getLogger(__name__)

ALPHA_LEVELS = ("nominal", "ordinal", "interval")


# -- ROUGE -----------------------------------------------------------------


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _prf(overlap: float, n_candidate: int, n_reference: int) -> dict:
    p = overlap / n_candidate if n_candidate else 0.0
    r = overlap / n_reference if n_reference else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return {"p": p, "r": r, "f1": f1}


def _lcs_length(a: list[str], b: list[str]) -> int:
    # One-row DP; a is the shorter side to keep the row small.
    if len(a) > len(b):
        a, b = b, a
    row = [0] * (len(a) + 1)
    for tok_b in b:
        prev = 0
        for i, tok_a in enumerate(a, start=1):
            cur = row[i]
            row[i] = prev + 1 if tok_a == tok_b else max(row[i], row[i - 1])
            prev = cur
    return row[len(a)]


def rouge(candidate: str, reference: str) -> dict:
    """ROUGE-1, ROUGE-2, and ROUGE-L precision/recall/F1.

    N-gram overlaps are clipped per type. Either side tokenizing to
    nothing yields all-zero scores with the record flagged.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        zero = {"p": 0.0, "r": 0.0, "f1": 0.0}
        return {"rouge1": dict(zero), "rouge2": dict(zero), "rougeL": dict(zero), "empty": True}
    out: dict = {"empty": False}
    for n, key in ((1, "rouge1"), (2, "rouge2")):
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        overlap = sum(min(c, ref_grams[g]) for g, c in cand_grams.items())
        out[key] = _prf(overlap, max(len(cand) - n + 1, 0), max(len(ref) - n + 1, 0))
    lcs = _lcs_length(cand, ref)
    out["rougeL"] = _prf(lcs, len(cand), len(ref))
    return out


def rouge_report(pairs: list[dict]) -> dict:
    """Per-pair ROUGE plus unweighted means over the non-flagged fields."""
    if not pairs:
        raise ValueError("no candidate/reference pairs to score")
    records = []
    for pair in sorted(pairs, key=lambda p: p["id"]):
        scores = rouge(pair["candidate"], pair["reference"])
        records.append({"id": pair["id"], **scores})
    means: dict = {}
    for key in ("rouge1", "rouge2", "rougeL"):
        means[key] = {
            field: sum(r[key][field] for r in records) / len(records)
            for field in ("p", "r", "f1")
        }
    return {
        "n_pairs": len(records),
        "n_empty": sum(1 for r in records if r["empty"]),
        "records": records,
        "means": means,
    }


# -- one-way ANOVA ---------------------------------------------------------


def anova_oneway(groups: list[list[float]]) -> dict:
    """F statistic with degrees of freedom (k - 1, N - k).

    Needs at least two groups of at least two finite values each. Zero
    within-group variance gives F = inf when the group means differ and
    is an error when they do not (0/0).
    """
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    for i, g in enumerate(groups):
        if len(g) < 2:
            raise ValueError(f"group {i} has fewer than 2 values")
        for v in g:
            if not math.isfinite(v):
                raise ValueError(f"group {i} contains a non-finite value")
    n_total = sum(len(g) for g in groups)
    k = len(groups)
    grand = sum(sum(g) for g in groups) / n_total
    ss_between = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups)
    ss_within = sum(
        sum((v - sum(g) / len(g)) ** 2 for v in g) for g in groups
    )
    df_between = k - 1
    df_within = n_total - k
    if ss_within == 0.0:
        if ss_between == 0.0:
            raise ValueError("no variance between or within groups, F undefined")
        f = math.inf
    else:
        f = (ss_between / df_between) / (ss_within / df_within)
    return {
        "f": f,
        "df_between": df_between,
        "df_within": df_within,
        "ss_between": ss_between,
        "ss_within": ss_within,
    }


# -- Krippendorff's alpha --------------------------------------------------


def krippendorff_alpha(ratings: list[list], level: str = "nominal") -> float:
    """Alpha from a raters-by-items matrix with None for missing cells.

    The coincidence matrix is built from every item with at least two
    ratings; items rated once or never are excluded. Distances are
    exact-match (nominal), squared cumulative-rank (ordinal), or squared
    difference (interval). Zero expected disagreement means every
    recorded rating is identical and maps to alpha = 1.0.
    """
    if level not in ALPHA_LEVELS:
        raise ValueError(f"unknown level: {level!r}")
    if not ratings:
        raise ValueError("empty ratings matrix")
    width = len(ratings[0])
    if any(len(row) != width for row in ratings):
        raise ValueError("ragged ratings matrix")

    units: list[list] = []
    for col in range(width):
        values = [row[col] for row in ratings if row[col] is not None]
        if len(values) >= 2:
            units.append(values)
    if not units:
        raise ValueError("no item rated by at least two raters")

    observed = sorted({v for unit in units for v in unit})
    if level in ("ordinal", "interval"):
        for v in observed:
            if not isinstance(v, (int, float)):
                raise ValueError(f"{level} level needs numeric ratings, got {v!r}")
    index = {v: i for i, v in enumerate(observed)}
    size = len(observed)

    coincidence = [[0.0] * size for _ in range(size)]
    for unit in units:
        m = len(unit)
        for i, a in enumerate(unit):
            for j, b in enumerate(unit):
                if i != j:
                    coincidence[index[a]][index[b]] += 1.0 / (m - 1)
    marginals = [sum(row) for row in coincidence]
    n = sum(marginals)

    def distance_sq(i: int, j: int) -> float:
        if i == j:
            return 0.0
        if level == "nominal":
            return 1.0
        if level == "interval":
            return (observed[i] - observed[j]) ** 2
        lo, hi = min(i, j), max(i, j)
        span = sum(marginals[g] for g in range(lo, hi + 1))
        return (span - (marginals[lo] + marginals[hi]) / 2.0) ** 2

    d_observed = 0.0
    d_expected = 0.0
    for i in range(size):
        for j in range(size):
            d = distance_sq(i, j)
            d_observed += coincidence[i][j] * d
            d_expected += marginals[i] * marginals[j] * d
    d_observed /= n
    d_expected /= n * (n - 1)
    if d_expected == 0.0:
        return 1.0
    if d_observed == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected


# -- file formats ----------------------------------------------------------


def read_pairs_file(path) -> list[dict]:
    """Candidate/reference pairs: JSONL {id, candidate, reference}."""
    records: list[dict] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if "_meta" in record:
                logger.debug("pairs file %s: meta %s", path, record["_meta"])
                continue
            if (
                not isinstance(record.get("id"), str)
                or not isinstance(record.get("candidate"), str)
                or not isinstance(record.get("reference"), str)
            ):
                raise ValueError(f"{path}:{lineno}: expected {{id, candidate, reference}}")
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            records.append(record)
    if not records:
        raise ValueError(f"{path}: no pairs to score")
    return records


def read_groups_file(path) -> dict[str, list[float]]:
    """ANOVA groups: a JSON object mapping group name to a number list."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or not payload:
        raise ValueError(f"{path}: expected a non-empty object of groups")
    groups: dict[str, list[float]] = {}
    for name in sorted(payload):
        values = payload[name]
        if not isinstance(values, list) or not values:
            raise ValueError(f"{path}: group {name!r} is not a non-empty list")
        for v in values:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValueError(f"{path}: group {name!r} contains a non-number")
        groups[name] = [float(v) for v in values]
    return groups


def read_ratings_csv(path) -> list[list]:
    """Ratings matrix: CSV rows are raters, columns items, blank missing.

    Cells parse as numbers when they can; anything else stays a string
    label (usable at the nominal level only).
    """
    rows: list[list] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for cells in csv.reader(fh):
            row = []
            for cell in cells:
                cell = cell.strip()
                if not cell:
                    row.append(None)
                    continue
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty ratings file")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ValueError(f"{path}: ragged ratings matrix")
    return rows
